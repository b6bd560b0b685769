//! Episode construction for few-shot classification and GP regression.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{MannError, Result};
use crate::images::{resize, rotate_quarters, rotate_translate, GrayImage};
use crate::model::{SequenceBatch, STRING_ALPHABET, STRING_CHUNKS};
use crate::oracles::{cholesky, GpParams};

/// Side length of the network input images.
pub const IMAGE_SIDE: usize = 20;
/// Flattened network input width.
pub const IMAGE_PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE;
/// Number of distinct five-letter labels.
pub const STRING_LABEL_SPACE: usize = 3125;
/// Base classes in the default training split.
pub const OMNIGLOT_TRAIN_CLASSES: usize = 1200;
/// Classes with fewer samples are dropped at ingestion.
pub const MIN_SAMPLES_PER_CLASS: usize = 10;
/// Largest small-angle rotation applied per sample.
pub const MAX_JITTER_ANGLE: f64 = PI / 16.0;
/// Translation range for 105-pixel Omniglot images.
pub const OMNIGLOT_MAX_SHIFT: f64 = 10.0;
/// Canvas side of the synthetic glyphs.
pub const SYNTH_SIDE: usize = 40;
/// Translation range for synthetic glyphs.
pub const SYNTH_MAX_SHIFT: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImageClass {
    /// Unique across both splits of a dataset.
    pub id: usize,
    pub name: String,
    pub images: Vec<GrayImage>,
}

/// Classes of raw images belonging to one split.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageClassSet {
    pub classes: Vec<ImageClass>,
    pub split: Split,
    /// Translation range in source pixels used by [`augment`].
    pub max_shift: f64,
}

impl ImageClassSet {
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn class_ids(&self) -> Vec<usize> {
        self.classes.iter().map(|c| c.id).collect()
    }
}

/// A dataset divided into disjoint train and test classes.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitDataset {
    pub train: ImageClassSet,
    pub test: ImageClassSet,
}

impl SplitDataset {
    /// First `train_classes` classes (in the given order) train, the rest test.
    pub fn from_classes(
        mut classes: Vec<ImageClass>,
        train_classes: usize,
        max_shift: f64,
    ) -> Self {
        let cut = train_classes.min(classes.len());
        let test = classes.split_off(cut);
        Self {
            train: ImageClassSet {
                classes,
                split: Split::Train,
                max_shift,
            },
            test: ImageClassSet {
                classes: test,
                split: Split::Test,
                max_shift,
            },
        }
    }

    /// Errors when a class id appears in both splits.
    pub fn check_disjoint(&self) -> Result<()> {
        check_disjoint(&self.train, &self.test)
    }

    pub fn split(&self, split: Split) -> &ImageClassSet {
        match split {
            Split::Train => &self.train,
            Split::Test => &self.test,
        }
    }
}

pub fn check_disjoint(a: &ImageClassSet, b: &ImageClassSet) -> Result<()> {
    let ids: std::collections::HashSet<usize> = a.class_ids().into_iter().collect();
    let mut shared: Vec<usize> = b
        .class_ids()
        .into_iter()
        .filter(|id| ids.contains(id))
        .collect();
    shared.sort_unstable();
    if shared.is_empty() {
        Ok(())
    } else {
        Err(MannError::SplitOverlap(shared))
    }
}

fn sorted_dirs(path: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(path)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    Ok(dirs)
}

fn load_ink(path: &Path) -> std::result::Result<GrayImage, String> {
    let img = image::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let luma = img.to_luma8();
    let (w, h) = luma.dimensions();
    // dark strokes on a light page become ink = 1
    let pixels = luma.pixels().map(|p| 1.0 - p.0[0] as f64 / 255.0).collect();
    Ok(GrayImage::new(w as usize, h as usize, pixels))
}

/// Loads an `alphabet/character/image` tree. Classes are ordered by sorted
/// path; the first `train_classes` go to the training split.
pub fn ingest_omniglot(root: &Path, train_classes: usize) -> Result<SplitDataset> {
    let fail = |problems: Vec<String>| MannError::Ingestion {
        root: root.to_path_buf(),
        problems,
    };
    let alphabets = sorted_dirs(root).map_err(|e| fail(vec![format!("cannot read root: {e}")]))?;
    let mut problems = Vec::new();
    let mut classes = Vec::new();
    for alphabet in &alphabets {
        let characters = match sorted_dirs(alphabet) {
            Ok(c) => c,
            Err(e) => {
                problems.push(format!("{}: {e}", alphabet.display()));
                continue;
            }
        };
        for character in characters {
            let mut files: Vec<PathBuf> = match std::fs::read_dir(&character) {
                Ok(rd) => rd
                    .filter_map(|e| e.ok())
                    .map(|e| e.path())
                    .filter(|p| p.is_file())
                    .collect(),
                Err(e) => {
                    problems.push(format!("{}: {e}", character.display()));
                    continue;
                }
            };
            files.sort();
            let mut images = Vec::with_capacity(files.len());
            for file in &files {
                match load_ink(file) {
                    Ok(img) => images.push(img),
                    Err(e) => problems.push(e),
                }
            }
            let name = character
                .strip_prefix(root)
                .unwrap_or(&character)
                .to_string_lossy()
                .into_owned();
            if images.len() < MIN_SAMPLES_PER_CLASS {
                log::warn!(
                    "excluding class {name}: {} samples (< {MIN_SAMPLES_PER_CLASS})",
                    images.len()
                );
                continue;
            }
            classes.push(ImageClass {
                id: classes.len(),
                name,
                images,
            });
        }
    }
    if !problems.is_empty() {
        return Err(fail(problems));
    }
    if classes.is_empty() {
        return Err(fail(vec!["found 0 classes".into()]));
    }
    log::info!("ingested {} classes from {}", classes.len(), root.display());
    Ok(SplitDataset::from_classes(
        classes,
        train_classes,
        OMNIGLOT_MAX_SHIFT,
    ))
}

/// Control points of one stroke, in canvas pixels.
type Stroke = Vec<(f64, f64)>;

fn random_glyph<R: Rng + ?Sized>(rng: &mut R) -> Vec<Stroke> {
    let margin = 8.0;
    let span = SYNTH_SIDE as f64 - 2.0 * margin;
    let strokes = rng.random_range(2..=4);
    (0..strokes)
        .map(|_| {
            let points = rng.random_range(2..=4);
            (0..points)
                .map(|_| {
                    (
                        margin + rng.random::<f64>() * span,
                        margin + rng.random::<f64>() * span,
                    )
                })
                .collect()
        })
        .collect()
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt()
}

fn render_glyph(strokes: &[Stroke]) -> GrayImage {
    let half_width = 1.3;
    let mut img = GrayImage::blank(SYNTH_SIDE, SYNTH_SIDE);
    for y in 0..SYNTH_SIDE {
        for x in 0..SYNTH_SIDE {
            let p = (x as f64, y as f64);
            let hit = strokes.iter().any(|s| {
                s.windows(2)
                    .any(|w| segment_distance(p, w[0], w[1]) <= half_width)
            });
            if hit {
                img.set(x, y, 1.0);
            }
        }
    }
    img
}

/// Procedural stand-in for Omniglot: each class is a random set of strokes,
/// each sample jitters the control points. Binary 40×40 images.
pub fn synth_glyphs(num_classes: usize, samples_per_class: usize, seed: u64) -> Vec<ImageClass> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = 1.2;
    (0..num_classes)
        .map(|id| {
            let prototype = random_glyph(&mut rng);
            let images = (0..samples_per_class)
                .map(|_| {
                    let strokes: Vec<Stroke> = prototype
                        .iter()
                        .map(|s| {
                            s.iter()
                                .map(|&(x, y)| {
                                    let nx: f64 = StandardNormal.sample(&mut rng);
                                    let ny: f64 = StandardNormal.sample(&mut rng);
                                    (x + jitter * nx, y + jitter * ny)
                                })
                                .collect()
                        })
                        .collect();
                    render_glyph(&strokes)
                })
                .collect();
            ImageClass {
                id,
                name: format!("glyph{id:04}"),
                images,
            }
        })
        .collect()
}

/// Synthetic dataset split into train and test classes.
pub fn synth_dataset(
    num_classes: usize,
    samples_per_class: usize,
    train_classes: usize,
    seed: u64,
) -> SplitDataset {
    SplitDataset::from_classes(
        synth_glyphs(num_classes, samples_per_class, seed),
        train_classes,
        SYNTH_MAX_SHIFT,
    )
}

/// Small random rotation and shift at source resolution, downscale to
/// 20×20, then the episode's quarter-turn class rotation. Row-major output
/// clamped to `[0, 1]`.
pub fn augment<R: Rng + ?Sized>(
    image: &GrayImage,
    class_rotation: u8,
    max_shift: f64,
    rng: &mut R,
) -> Vec<f64> {
    let angle = rng.random_range(-MAX_JITTER_ANGLE..=MAX_JITTER_ANGLE);
    let (dx, dy) = if max_shift > 0.0 {
        (
            rng.random_range(-max_shift..=max_shift),
            rng.random_range(-max_shift..=max_shift),
        )
    } else {
        (0.0, 0.0)
    };
    augment_with(image, angle, dx, dy, class_rotation)
}

/// [`augment`] with explicit transform parameters.
pub fn augment_with(
    image: &GrayImage,
    angle: f64,
    dx: f64,
    dy: f64,
    class_rotation: u8,
) -> Vec<f64> {
    let moved = rotate_translate(image, angle, dx, dy);
    let small = resize(&moved, IMAGE_SIDE, IMAGE_SIDE);
    let turned = rotate_quarters(&small, class_rotation);
    turned
        .into_pixels()
        .into_iter()
        .map(|v| v.clamp(0.0, 1.0))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum LabelMode {
    /// One-hot over `width` slots; episodes draw distinct slots.
    OneHot { width: usize },
    /// Five-letter words over `a..e`.
    String,
}

impl LabelMode {
    pub fn width(&self) -> usize {
        match self {
            LabelMode::OneHot { width } => *width,
            LabelMode::String => STRING_CHUNKS * STRING_ALPHABET,
        }
    }

    /// Number of distinct labels.
    pub fn space(&self) -> usize {
        match self {
            LabelMode::OneHot { width } => *width,
            LabelMode::String => STRING_LABEL_SPACE,
        }
    }
}

/// One-hot vector of `width` with a one at `slot`.
pub fn encode_onehot(slot: usize, width: usize) -> Result<Vec<f64>> {
    if slot >= width {
        return Err(MannError::Label(format!(
            "slot {slot} outside width {width}"
        )));
    }
    let mut v = vec![0.0; width];
    v[slot] = 1.0;
    Ok(v)
}

/// Five concatenated one-hots for a word such as `"ecdba"`.
pub fn encode_word(word: &str) -> Result<Vec<f64>> {
    let letters: Vec<char> = word.chars().collect();
    if letters.len() != STRING_CHUNKS {
        return Err(MannError::Label(format!(
            "{word:?} is not {STRING_CHUNKS} letters long"
        )));
    }
    let mut v = vec![0.0; STRING_CHUNKS * STRING_ALPHABET];
    for (chunk, c) in letters.iter().enumerate() {
        let idx = match c {
            'a'..='e' => *c as usize - 'a' as usize,
            _ => {
                return Err(MannError::Label(format!(
                    "{word:?} has a letter outside a..e"
                )))
            }
        };
        v[chunk * STRING_ALPHABET + idx] = 1.0;
    }
    Ok(v)
}

/// Word for a label id in `[0, 3125)`; the first letter is most significant.
pub fn word_from_id(id: usize) -> Result<String> {
    if id >= STRING_LABEL_SPACE {
        return Err(MannError::Label(format!(
            "word id {id} outside the label space"
        )));
    }
    let mut letters = [b'a'; STRING_CHUNKS];
    let mut rest = id;
    for slot in letters.iter_mut().rev() {
        *slot = b'a' + (rest % STRING_ALPHABET) as u8;
        rest /= STRING_ALPHABET;
    }
    Ok(String::from_utf8(letters.to_vec()).expect("ascii"))
}

/// Label vector for a slot (one-hot) or word id (string).
pub fn encode_label(label: usize, mode: LabelMode) -> Result<Vec<f64>> {
    match mode {
        LabelMode::OneHot { width } => encode_onehot(label, width),
        LabelMode::String => encode_word(&word_from_id(label)?),
    }
}

/// One sampled classification episode.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassificationEpisode {
    /// `[steps, 400]`
    pub images: Vec<f64>,
    /// `[steps, label_width]`
    pub labels: Vec<f64>,
    pub label_width: usize,
    pub class_ids: Vec<usize>,
    /// Slot (one-hot) or word id (string) of each step's label.
    pub label_ids: Vec<usize>,
    /// 1 for the first occurrence of a class, 2 for the second, ...
    pub instance_index: Vec<usize>,
    /// Classes drawn for the episode, with their label and quarter turns.
    pub classes: Vec<EpisodeClass>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EpisodeClass {
    pub class_id: usize,
    pub label: usize,
    pub rotation: u8,
}

impl ClassificationEpisode {
    pub fn steps(&self) -> usize {
        self.class_ids.len()
    }

    pub fn image(&self, t: usize) -> &[f64] {
        &self.images[t * IMAGE_PIXELS..(t + 1) * IMAGE_PIXELS]
    }

    pub fn label(&self, t: usize) -> &[f64] {
        &self.labels[t * self.label_width..(t + 1) * self.label_width]
    }
}

/// `instance_index` for a sequence of class ids.
pub fn instance_indices(class_ids: &[usize]) -> Vec<usize> {
    let mut seen: BTreeMap<usize, usize> = BTreeMap::new();
    class_ids
        .iter()
        .map(|c| {
            let k = seen.entry(*c).or_insert(0);
            *k += 1;
            *k
        })
        .collect()
}

/// Draws `n` classes without replacement, gives each a distinct random label
/// and quarter-turn rotation, then draws every step's class uniformly from
/// the chosen ones (some may not appear).
pub fn sample_classification_episode<R: Rng + ?Sized>(
    dataset: &ImageClassSet,
    n: usize,
    steps: usize,
    mode: LabelMode,
    rng: &mut R,
) -> Result<ClassificationEpisode> {
    if n == 0 || n > dataset.len() {
        return Err(MannError::InvalidArgument(format!(
            "episode needs {n} classes, dataset has {}",
            dataset.len()
        )));
    }
    if n > mode.space() {
        return Err(MannError::InvalidArgument(format!(
            "{n} classes do not fit in {} labels",
            mode.space()
        )));
    }
    let picked = rand::seq::index::sample(rng, dataset.len(), n);
    let labels = rand::seq::index::sample(rng, mode.space(), n);
    let classes: Vec<EpisodeClass> = picked
        .iter()
        .zip(labels.iter())
        .map(|(c, label)| EpisodeClass {
            class_id: c,
            label,
            rotation: rng.random_range(0..4u8),
        })
        .collect();
    let width = mode.width();
    let mut ep = ClassificationEpisode {
        images: Vec::with_capacity(steps * IMAGE_PIXELS),
        labels: Vec::with_capacity(steps * width),
        label_width: width,
        class_ids: Vec::with_capacity(steps),
        label_ids: Vec::with_capacity(steps),
        instance_index: Vec::new(),
        classes: Vec::new(),
    };
    for _ in 0..steps {
        let chosen = *classes.choose(rng).expect("n > 0");
        let class = &dataset.classes[chosen.class_id];
        let raw = class.images.choose(rng).ok_or_else(|| {
            MannError::InvalidArgument(format!("class {} has no images", class.name))
        })?;
        ep.images
            .extend(augment(raw, chosen.rotation, dataset.max_shift, rng));
        ep.labels.extend(encode_label(chosen.label, mode)?);
        ep.class_ids.push(class.id);
        ep.label_ids.push(chosen.label);
    }
    ep.instance_index = instance_indices(&ep.class_ids);
    ep.classes = classes
        .into_iter()
        .map(|c| EpisodeClass {
            class_id: dataset.classes[c.class_id].id,
            ..c
        })
        .collect();
    Ok(ep)
}

/// Episodes of equal length stacked into one minibatch.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeBatch {
    pub episodes: Vec<ClassificationEpisode>,
}

impl EpisodeBatch {
    pub fn to_sequence_batch(&self) -> Result<SequenceBatch> {
        let first = self
            .episodes
            .first()
            .ok_or_else(|| MannError::InvalidArgument("empty episode batch".into()))?;
        let inputs: Vec<Vec<f64>> = self.episodes.iter().map(|e| e.images.clone()).collect();
        let targets: Vec<Vec<f64>> = self.episodes.iter().map(|e| e.labels.clone()).collect();
        SequenceBatch::from_lanes(&inputs, &targets, IMAGE_PIXELS, first.label_width)
    }
}

/// Largest class count allowed at `episode` under the curriculum.
pub fn curriculum_max_classes(episode: usize, start_max: usize, step: usize) -> usize {
    start_max + episode / step.max(1)
}

/// Class count for one curriculum episode, uniform in `[2, max]`, and its
/// length of ten steps per class.
pub fn curriculum_sample<R: Rng + ?Sized>(
    episode: usize,
    start_max: usize,
    step: usize,
    rng: &mut R,
) -> (usize, usize) {
    let max = curriculum_max_classes(episode, start_max, step);
    let n = rng.random_range(2.min(max)..=max);
    (n, 10 * n)
}

/// A function drawn from a GP prior, observed at random points.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionEpisode {
    /// `[steps, d]`
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub d: usize,
    pub gp_params: GpParams,
}

impl RegressionEpisode {
    pub fn steps(&self) -> usize {
        self.y.len()
    }
}

/// Default episode length for `d`-dimensional regression.
pub fn regression_steps(d: usize) -> usize {
    20 * d
}

/// Samples `x ~ U[0,1]^d` and `y ~ N(0, K + σ²I)` via a Cholesky factor.
pub fn sample_regression_episode<R: Rng + ?Sized>(
    d: usize,
    steps: usize,
    params: &GpParams,
    rng: &mut R,
) -> Result<RegressionEpisode> {
    if !(1..=3).contains(&d) || steps == 0 {
        return Err(MannError::InvalidArgument(format!(
            "regression needs d in 1..=3 and steps > 0, got d={d}, steps={steps}"
        )));
    }
    let x: Vec<f64> = (0..steps * d).map(|_| rng.random::<f64>()).collect();
    let y = sample_gp_prior(&x, d, params, rng)?;
    Ok(RegressionEpisode {
        x,
        y,
        d,
        gp_params: *params,
    })
}

/// Joint draw of noisy function values at `x` (rows of width `d`).
pub fn sample_gp_prior<R: Rng + ?Sized>(
    x: &[f64],
    d: usize,
    params: &GpParams,
    rng: &mut R,
) -> Result<Vec<f64>> {
    params.validate()?;
    let n = x.len() / d;
    let (l, _) = cholesky(&params.gram(x, d), n)?;
    let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    Ok((0..n)
        .map(|i| (0..=i).map(|j| l[i * n + j] * z[j]).sum())
        .collect())
}

/// Regression episodes as a batch: inputs `x_t`, targets `y_t`.
pub fn regression_batch(episodes: &[RegressionEpisode]) -> Result<SequenceBatch> {
    let d = episodes
        .first()
        .ok_or_else(|| MannError::InvalidArgument("empty episode batch".into()))?
        .d;
    let inputs: Vec<Vec<f64>> = episodes.iter().map(|e| e.x.clone()).collect();
    let targets: Vec<Vec<f64>> = episodes.iter().map(|e| e.y.clone()).collect();
    SequenceBatch::from_lanes(&inputs, &targets, d, 1)
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct DumpRow {
    episode: usize,
    t: usize,
    class_id: usize,
    label_slot: usize,
    instance_index: usize,
}

/// Writes `episode,t,class_id,label_slot,instance_index` rows.
pub fn write_episode_dump<'a, W, I>(writer: W, episodes: I) -> Result<()>
where
    W: std::io::Write,
    I: IntoIterator<Item = (usize, &'a ClassificationEpisode)>,
{
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(writer);
    w.write_record(["episode", "t", "class_id", "label_slot", "instance_index"])?;
    for (index, ep) in episodes {
        for t in 0..ep.steps() {
            w.serialize(DumpRow {
                episode: index,
                t,
                class_id: ep.class_ids[t],
                label_slot: ep.label_ids[t],
                instance_index: ep.instance_index[t],
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn onehot_and_word_encoding() {
        assert_eq!(encode_onehot(2, 5).unwrap(), vec![0.0, 0.0, 1.0, 0.0, 0.0]);
        let v = encode_word("abcde").unwrap();
        let ones: Vec<usize> = (0..25).filter(|&i| v[i] == 1.0).collect();
        assert_eq!(ones, vec![0, 6, 12, 18, 24]);
        assert!(encode_word("abcdf").is_err());
        assert!(encode_word("abcd").is_err());
        assert!(encode_onehot(5, 5).is_err());
    }

    #[test]
    fn word_ids_cover_label_space() {
        assert_eq!(word_from_id(0).unwrap(), "aaaaa");
        assert_eq!(word_from_id(3124).unwrap(), "eeeee");
        let all: std::collections::HashSet<String> = (0..STRING_LABEL_SPACE)
            .map(|i| word_from_id(i).unwrap())
            .collect();
        assert_eq!(all.len(), 3125);
        assert!(word_from_id(3125).is_err());
    }

    #[test]
    fn curriculum_boundaries() {
        assert_eq!(curriculum_max_classes(0, 15, 10_000), 15);
        assert_eq!(curriculum_max_classes(9_999, 15, 10_000), 15);
        assert_eq!(curriculum_max_classes(10_000, 15, 10_000), 16);
        assert_eq!(curriculum_max_classes(100_000, 15, 10_000), 25);
    }

    #[test]
    fn instance_indices_count_occurrences() {
        assert_eq!(
            instance_indices(&[3, 1, 3, 3, 1, 7]),
            vec![1, 1, 2, 3, 2, 1]
        );
    }

    #[test]
    fn identity_augmentation_is_downscale() {
        let img = synth_glyphs(1, 1, 4).remove(0).images.remove(0);
        let out = augment_with(&img, 0.0, 0.0, 0.0, 0);
        assert_eq!(out, resize(&img, 20, 20).into_pixels());
    }
}
