//! Episode construction, augmentation, ingestion and GP sampling.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use mann_core::config::ExperimentConfig;
use mann_core::episodes::*;
use mann_core::harness::{sample_episodes, EpisodeSet};
use mann_core::images::{resize, rotate_quarters, GrayImage};
use mann_core::oracles::GpParams;
use mann_core::MannError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_synth() -> SplitDataset {
    synth_dataset(40, 12, 30, 17)
}

#[test]
fn protocol_over_thousand_episodes() {
    let data = small_synth();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for i in 0..1000 {
        let (n, mode) = match i % 3 {
            0 => (5, LabelMode::OneHot { width: 5 }),
            1 => (15, LabelMode::OneHot { width: 15 }),
            _ => (5, LabelMode::String),
        };
        let steps = 10 * n;
        let ep = sample_classification_episode(&data.train, n, steps, mode, &mut rng).unwrap();
        assert_eq!(ep.steps(), steps);
        assert_eq!(ep.images.len(), steps * IMAGE_PIXELS);
        assert!(ep.images.iter().all(|v| (0.0..=1.0).contains(v)));

        let batch = EpisodeBatch {
            episodes: vec![ep.clone()],
        }
        .to_sequence_batch()
        .unwrap();
        let lw = mode.width();
        assert!(batch.prev_labels[..lw].iter().all(|&v| v == 0.0));
        for t in 1..steps {
            assert_eq!(
                &batch.prev_labels[t * lw..(t + 1) * lw],
                batch.target(t - 1, 0)
            );
        }

        // class -> label is a bijection onto the sampled labels
        let mut class_to_label = BTreeMap::new();
        let mut label_to_class = BTreeMap::new();
        for t in 0..steps {
            assert_eq!(ep.label(t), encode_label(ep.label_ids[t], mode).unwrap());
            assert_eq!(
                *class_to_label
                    .entry(ep.class_ids[t])
                    .or_insert(ep.label_ids[t]),
                ep.label_ids[t]
            );
            assert_eq!(
                *label_to_class
                    .entry(ep.label_ids[t])
                    .or_insert(ep.class_ids[t]),
                ep.class_ids[t]
            );
        }
        let labels: HashSet<usize> = ep.classes.iter().map(|c| c.label).collect();
        let classes: HashSet<usize> = ep.classes.iter().map(|c| c.class_id).collect();
        assert_eq!(labels.len(), n);
        assert_eq!(classes.len(), n);
        for c in &ep.classes {
            if let Some(&l) = class_to_label.get(&c.class_id) {
                assert_eq!(l, c.label);
            }
        }

        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for t in 0..steps {
            let k = counts.entry(ep.class_ids[t]).or_insert(0);
            *k += 1;
            assert_eq!(ep.instance_index[t], *k);
        }
    }
}

#[test]
fn episode_lengths_follow_ten_per_class() {
    let config = ExperimentConfig::default();
    assert_eq!(config.steps_for(5), 50);
    assert_eq!(config.steps_for(15), 150);
}

#[test]
fn too_many_classes_is_an_error() {
    let data = synth_dataset(4, 10, 3, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let err =
        sample_classification_episode(&data.train, 5, 50, LabelMode::OneHot { width: 5 }, &mut rng);
    assert!(matches!(err, Err(MannError::InvalidArgument(_))));
}

#[test]
fn fixed_seed_gives_identical_episode() {
    let data = small_synth();
    let mode = LabelMode::OneHot { width: 5 };
    let a =
        sample_classification_episode(&data.train, 5, 50, mode, &mut ChaCha8Rng::seed_from_u64(9))
            .unwrap();
    let b =
        sample_classification_episode(&data.train, 5, 50, mode, &mut ChaCha8Rng::seed_from_u64(9))
            .unwrap();
    assert_eq!(a, b);
}

#[test]
fn labels_are_reshuffled_between_episodes() {
    // with six classes every class recurs often; a class keeps its slot
    // across two episodes with probability 1/5
    let data = synth_dataset(6, 10, 6, 3);
    let mode = LabelMode::OneHot { width: 5 };
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut prev: Option<BTreeMap<usize, usize>> = None;
    let (mut same, mut total) = (0usize, 0usize);
    for _ in 0..10_000 {
        let ep = sample_classification_episode(&data.train, 5, 1, mode, &mut rng).unwrap();
        let labels: BTreeMap<usize, usize> =
            ep.classes.iter().map(|c| (c.class_id, c.label)).collect();
        if let Some(p) = &prev {
            for (c, l) in &labels {
                if let Some(pl) = p.get(c) {
                    total += 1;
                    same += (pl == l) as usize;
                }
            }
        }
        prev = Some(labels);
    }
    let f = same as f64 / total as f64;
    let se = (0.16 / total as f64).sqrt();
    assert!((f - 0.2).abs() < 4.0 * se, "{f} over {total}");
}

#[test]
fn string_label_space() {
    let mut seen = HashSet::new();
    for id in 0..STRING_LABEL_SPACE {
        let word = word_from_id(id).unwrap();
        let v = encode_word(&word).unwrap();
        assert_eq!(v.len(), 25);
        assert_eq!(v.iter().filter(|&&x| x == 1.0).count(), 5);
        assert!(v.iter().all(|&x| x == 0.0 || x == 1.0));
        for chunk in v.chunks(5) {
            assert_eq!(chunk.iter().sum::<f64>(), 1.0);
        }
        seen.insert(word);
    }
    assert_eq!(seen.len(), 3125);
    assert!(word_from_id(3125).is_err());
    assert!(encode_word("abcd").is_err());
    assert!(encode_word("abcdz").is_err());
    assert_eq!(encode_onehot(2, 5).unwrap(), vec![0.0, 0.0, 1.0, 0.0, 0.0]);
    assert!(encode_onehot(5, 5).is_err());
}

#[test]
fn curriculum_schedule() {
    assert_eq!(curriculum_max_classes(0, 15, 10_000), 15);
    assert_eq!(curriculum_max_classes(9_999, 15, 10_000), 15);
    assert_eq!(curriculum_max_classes(10_000, 15, 10_000), 16);
    assert_eq!(curriculum_max_classes(100_000, 15, 10_000), 25);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut seen = HashSet::new();
    for _ in 0..2000 {
        let (n, t) = curriculum_sample(10_000, 15, 10_000, &mut rng);
        assert!((2..=16).contains(&n));
        assert_eq!(t, 10 * n);
        seen.insert(n);
    }
    assert_eq!(seen.len(), 15);
}

#[test]
fn quarter_turn_twice_is_half_turn() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let img = GrayImage::new(20, 20, (0..400).map(|_| rng.random()).collect());
    let twice = rotate_quarters(&rotate_quarters(&img, 1), 1);
    assert_eq!(twice.pixels(), rotate_quarters(&img, 2).pixels());
    let four = rotate_quarters(&rotate_quarters(&img, 2), 2);
    assert_eq!(four.pixels(), img.pixels());
    let q = rotate_quarters(&img, 1);
    assert_ne!(q.pixels(), img.pixels());
}

#[test]
fn half_turn_of_blank_image_is_identity() {
    let blank = GrayImage::blank(40, 40);
    assert_eq!(
        augment_with(&blank, 0.0, 0.0, 0.0, 2),
        augment_with(&blank, 0.0, 0.0, 0.0, 0)
    );
}

#[test]
fn identity_augmentation_is_pure_downscale() {
    let data = small_synth();
    let raw = &data.train.classes[0].images[0];
    let expected = resize(raw, IMAGE_SIDE, IMAGE_SIDE).into_pixels();
    let got = augment_with(raw, 0.0, 0.0, 0.0, 0);
    for (g, e) in got.iter().zip(&expected) {
        assert!((g - e.clamp(0.0, 1.0)).abs() < 1e-12);
    }
}

#[test]
fn random_augmentation_keeps_range_and_shape() {
    let data = small_synth();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for class in &data.train.classes[..10] {
        for img in &class.images {
            let v = augment(img, rng.random_range(0..4), SYNTH_MAX_SHIFT, &mut rng);
            assert_eq!(v.len(), IMAGE_PIXELS);
            assert!(v.iter().all(|x| (0.0..=1.0).contains(x)));
        }
    }
}

#[test]
fn synth_is_deterministic_and_binary() {
    let a = synth_glyphs(5, 4, 11);
    let b = synth_glyphs(5, 4, 11);
    assert_eq!(a, b);
    assert_ne!(a, synth_glyphs(5, 4, 12));
    assert!(synth_glyphs(0, 4, 11).is_empty());
    for class in &a {
        for img in &class.images {
            assert_eq!((img.width(), img.height()), (SYNTH_SIDE, SYNTH_SIDE));
            assert!(img.pixels().iter().all(|&v| v == 0.0 || v == 1.0));
            assert!(img.pixels().contains(&1.0));
        }
    }
}

fn l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[test]
fn synth_classes_are_separated() {
    let classes = synth_glyphs(20, 10, 21);
    let mean_dist = |a: &ImageClass, b: &ImageClass, same: bool| {
        let mut total = 0.0;
        let mut count = 0;
        for (i, x) in a.images.iter().enumerate() {
            for (j, y) in b.images.iter().enumerate() {
                if same && i >= j {
                    continue;
                }
                total += l2(x.pixels(), y.pixels());
                count += 1;
            }
        }
        total / count as f64
    };
    let within: f64 =
        classes.iter().map(|c| mean_dist(c, c, true)).sum::<f64>() / classes.len() as f64;
    let nearest: f64 = classes
        .iter()
        .enumerate()
        .map(|(i, a)| {
            classes
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, b)| mean_dist(a, b, false))
                .fold(f64::INFINITY, f64::min)
        })
        .sum::<f64>()
        / classes.len() as f64;
    assert!(
        nearest > within,
        "nearest class {nearest} vs within {within}"
    );
}

#[test]
fn split_is_disjoint_and_sized() {
    let data = synth_dataset(1623, 1, OMNIGLOT_TRAIN_CLASSES, 0);
    assert_eq!(data.train.len(), 1200);
    assert_eq!(data.test.len(), 423);
    data.check_disjoint().unwrap();
    let mut overlapping = data.test.clone();
    overlapping.classes.push(data.train.classes[7].clone());
    match check_disjoint(&data.train, &overlapping) {
        Err(MannError::SplitOverlap(ids)) => assert_eq!(ids, vec![7]),
        other => panic!("expected overlap error, got {other:?}"),
    }
}

#[test]
fn persistent_flag_leaves_episodes_unchanged() {
    let data = small_synth();
    let off = ExperimentConfig::default();
    let on = ExperimentConfig {
        persistent_memory: true,
        ..ExperimentConfig::default()
    };
    let a = sample_episodes(
        &off,
        Some(&data.train),
        5,
        4,
        &mut ChaCha8Rng::seed_from_u64(8),
    )
    .unwrap();
    let b = sample_episodes(
        &on,
        Some(&data.train),
        5,
        4,
        &mut ChaCha8Rng::seed_from_u64(8),
    )
    .unwrap();
    match (a, b) {
        (EpisodeSet::Classification(a), EpisodeSet::Classification(b)) => {
            for (x, y) in a.iter().zip(&b) {
                let bits = |e: &ClassificationEpisode| {
                    e.images.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
                };
                assert_eq!(bits(x), bits(y));
                assert_eq!(x, y);
            }
        }
        _ => panic!("classification episodes expected"),
    }
}

#[test]
fn episode_dump_columns() {
    let data = small_synth();
    let ep = sample_classification_episode(
        &data.train,
        2,
        4,
        LabelMode::OneHot { width: 2 },
        &mut ChaCha8Rng::seed_from_u64(1),
    )
    .unwrap();
    let mut out = Vec::new();
    write_episode_dump(&mut out, [(3, &ep)]).unwrap();
    let text = String::from_utf8(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "episode,t,class_id,label_slot,instance_index");
    assert_eq!(lines.len(), 5);
    assert_eq!(
        lines[1],
        format!("3,0,{},{},1", ep.class_ids[0], ep.label_ids[0])
    );
}

#[test]
fn gp_prior_covariance_matches_kernel() {
    let p = GpParams::for_dim(1);
    let x = [0.2, 0.5];
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let n = 20_000;
    let draws: Vec<Vec<f64>> = (0..n)
        .map(|_| sample_gp_prior(&x, 1, &p, &mut rng).unwrap())
        .collect();
    let mean = |i: usize| draws.iter().map(|d| d[i]).sum::<f64>() / n as f64;
    let (m0, m1) = (mean(0), mean(1));
    let cov = |i: usize, j: usize, mi: f64, mj: f64| {
        draws.iter().map(|d| (d[i] - mi) * (d[j] - mj)).sum::<f64>() / (n - 1) as f64
    };
    let var = p.signal_variance + p.noise_variance;
    let k01 = p.kernel(&[0.2], &[0.5]);
    // standard errors of sample (co)variances of a Gaussian pair
    let se_var = (2.0 * var * var / n as f64).sqrt();
    let se_cov = ((var * var + k01 * k01) / n as f64).sqrt();
    assert!((cov(0, 0, m0, m0) - var).abs() < 3.0 * se_var);
    assert!((cov(1, 1, m1, m1) - var).abs() < 3.0 * se_var);
    assert!(
        (cov(0, 1, m0, m1) - k01).abs() < 3.0 * se_cov,
        "{} vs {k01}",
        cov(0, 1, m0, m1)
    );
}

#[test]
fn regression_episode_shapes_and_limits() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for d in 1..=3 {
        let ep = sample_regression_episode(d, regression_steps(d), &GpParams::for_dim(d), &mut rng)
            .unwrap();
        assert_eq!(ep.steps(), 20 * d);
        assert_eq!(ep.x.len(), 20 * d * d);
        assert!(ep.x.iter().all(|v| (0.0..1.0).contains(v)));
    }
    assert!(sample_regression_episode(4, 10, &GpParams::for_dim(1), &mut rng).is_err());
    let noiseless = GpParams {
        noise_variance: 0.0,
        ..GpParams::for_dim(1)
    };
    for _ in 0..20 {
        let y = sample_gp_prior(&[0.4, 0.4], 1, &noiseless, &mut rng).unwrap();
        assert!((y[0] - y[1]).abs() < 1e-4, "{y:?}");
    }
    let batch =
        regression_batch(&[
            sample_regression_episode(1, 5, &GpParams::for_dim(1), &mut rng).unwrap(),
        ])
        .unwrap();
    assert_eq!(
        (batch.input_width, batch.label_width, batch.steps),
        (1, 1, 5)
    );
    assert_eq!(batch.prev_labels[0], 0.0);
    assert_eq!(batch.prev_labels[1], batch.targets[0]);
}

fn write_png(path: &Path, side: u32, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let img = image::GrayImage::from_fn(side, side, |_, _| {
        image::Luma([if rng.random::<bool>() { 0 } else { 255 }])
    });
    img.save(path).unwrap();
}

fn write_tree(root: &Path, alphabets: usize, characters: usize, samples: usize) {
    for a in 0..alphabets {
        for c in 0..characters {
            let dir = root
                .join(format!("alphabet{a:02}"))
                .join(format!("character{c:02}"));
            std::fs::create_dir_all(&dir).unwrap();
            for s in 0..samples {
                write_png(
                    &dir.join(format!("{s:02}.png")),
                    24,
                    (a * 1000 + c * 10 + s) as u64,
                );
            }
        }
    }
}

#[test]
fn ingests_png_tree_into_unit_range() {
    let dir = tempfile::tempdir().unwrap();
    write_tree(dir.path(), 2, 3, 10);
    let data = ingest_omniglot(dir.path(), 4).unwrap();
    assert_eq!(data.train.len(), 4);
    assert_eq!(data.test.len(), 2);
    assert_eq!(data.train.max_shift, OMNIGLOT_MAX_SHIFT);
    assert_eq!(
        data.train.classes[0].name,
        Path::new("alphabet00")
            .join("character00")
            .to_string_lossy()
    );
    for class in data.train.classes.iter().chain(&data.test.classes) {
        assert_eq!(class.images.len(), 10);
        for img in &class.images {
            assert!(img.pixels().iter().all(|&v| v == 0.0 || v == 1.0));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let ep =
        sample_classification_episode(&data.test, 2, 20, LabelMode::OneHot { width: 2 }, &mut rng)
            .unwrap();
    assert!(ep.images.iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn standard_layout_splits_1200_423() {
    let dir = tempfile::tempdir().unwrap();
    // 1623 characters spread over 30 alphabets
    let mut written = 0;
    for a in 0..30 {
        for c in 0..55 {
            if written == 1623 {
                break;
            }
            let d = dir
                .path()
                .join(format!("alphabet{a:02}"))
                .join(format!("character{c:02}"));
            std::fs::create_dir_all(&d).unwrap();
            for s in 0..10 {
                write_png(&d.join(format!("{s:02}.png")), 21, written as u64 * 10 + s);
            }
            written += 1;
        }
    }
    let data = ingest_omniglot(dir.path(), OMNIGLOT_TRAIN_CLASSES).unwrap();
    assert_eq!(data.train.len(), 1200);
    assert_eq!(data.test.len(), 423);
    data.check_disjoint().unwrap();
}

#[test]
fn empty_root_reports_zero_classes() {
    let dir = tempfile::tempdir().unwrap();
    match ingest_omniglot(dir.path(), 10) {
        Err(MannError::Ingestion { problems, .. }) => {
            assert!(problems[0].contains("found 0 classes"))
        }
        other => panic!("expected ingestion error, got {other:?}"),
    }
}

#[test]
fn corrupt_file_is_itemized() {
    let dir = tempfile::tempdir().unwrap();
    write_tree(dir.path(), 1, 2, 10);
    let bad = dir
        .path()
        .join("alphabet00")
        .join("character01")
        .join("03.png");
    std::fs::write(&bad, b"not an image").unwrap();
    match ingest_omniglot(dir.path(), 1) {
        Err(MannError::Ingestion { problems, .. }) => {
            assert_eq!(problems.len(), 1);
            assert!(problems[0].contains("03.png"), "{problems:?}");
        }
        other => panic!("expected ingestion error, got {other:?}"),
    }
}

#[test]
fn small_classes_are_excluded() {
    let dir = tempfile::tempdir().unwrap();
    write_tree(dir.path(), 1, 3, 10);
    let sparse = dir.path().join("alphabet00").join("character01");
    std::fs::remove_file(sparse.join("09.png")).unwrap();
    let data = ingest_omniglot(dir.path(), 1).unwrap();
    assert_eq!(data.train.len() + data.test.len(), 2);
    assert!(data
        .train
        .classes
        .iter()
        .chain(&data.test.classes)
        .all(|c| !c.name.contains("character01")));
}
