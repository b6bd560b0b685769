//! Training, frozen-weight evaluation and the experiment suites.

use std::fmt::Write as _;
use std::path::Path;

use mann_autodiff::{AutodiffError, RmsProp, Tape, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{Architecture, ExperimentConfig, Task};
use crate::episodes::{
    check_disjoint, curriculum_max_classes, curriculum_sample, ingest_omniglot, regression_batch,
    sample_classification_episode, sample_regression_episode, synth_dataset, ClassificationEpisode,
    EpisodeBatch, ImageClassSet, RegressionEpisode, Split, SplitDataset,
};
use crate::error::{MannError, Result};
use crate::memory::MemorySnapshot;
use crate::metrics::{
    export_metrics, AccuracyTally, InstanceAccuracy, MetricsRecord, RegressionRecord, INSTANCES,
};
use crate::model::{
    decode_label, ControllerKind, ForwardOptions, HeadOutput, Model, SequenceBatch,
};
use crate::oracles::{gaussian_nll, gp_sequential_nll, KnnStore};

/// Accuracies of human subjects on the one-hot five-class task.
pub const HUMAN_REFERENCE: [f64; 6] = [34.5, 57.3, 70.1, 71.8, 81.4, 92.4];

pub const SUITES: [&str; 6] = [
    "table1",
    "table2",
    "persistent",
    "curriculum",
    "regression1d",
    "regression_nd",
];

const STREAM_INIT: u64 = 1;
const STREAM_TRAIN: u64 = 2;
const STREAM_TEST: u64 = 3;
const STREAM_DATA: u64 = 4;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the `index`-th draw of a named stream under the master seed.
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    splitmix(splitmix(splitmix(seed) ^ stream) ^ index)
}

/// Loads Omniglot or builds the synthetic glyphs; `None` for regression.
pub fn load_dataset(config: &ExperimentConfig) -> Result<Option<SplitDataset>> {
    if config.regression_dim().is_some() {
        return Ok(None);
    }
    let data = if config.task.is_omniglot() {
        let root = config
            .dataset
            .as_ref()
            .ok_or_else(|| MannError::Config("omniglot tasks need a dataset path".into()))?;
        ingest_omniglot(root, config.train_classes)?
    } else {
        synth_dataset(
            config.synth_classes,
            config.synth_samples,
            config.train_classes,
            derive_seed(config.seed, STREAM_DATA, 0),
        )
    };
    data.check_disjoint()?;
    Ok(Some(data))
}

/// Builds a freshly initialized model for `config`.
pub fn init_model(config: &ExperimentConfig) -> Result<Model> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, STREAM_INIT, 0));
    Model::new(config.model_config(), &mut rng)
}

/// Frozen-weight results over a set of test episodes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalSummary {
    pub episodes: usize,
    pub accuracy: InstanceAccuracy,
    pub loss: f64,
    /// Mean `(model, GP)` NLL per step for regression tasks.
    pub step_nll: Vec<(f64, f64)>,
}

impl EvalSummary {
    pub fn instance(&self, k: usize) -> Option<f64> {
        INSTANCES
            .iter()
            .position(|&i| i == k)
            .and_then(|slot| self.accuracy[slot])
    }
}

pub struct TrainOutcome {
    pub model: Model,
    pub metrics: Vec<MetricsRecord>,
    pub regression: Vec<RegressionRecord>,
    /// Test summary at the last evaluation, if any.
    pub final_eval: Option<EvalSummary>,
    /// Per-lane memory left by the last training batch.
    pub memory: Option<MemorySnapshot>,
}

/// Episodes of one minibatch, in either task family.
pub enum EpisodeSet {
    Classification(Vec<ClassificationEpisode>),
    Regression(Vec<RegressionEpisode>),
}

impl EpisodeSet {
    pub fn to_sequence_batch(&self) -> Result<SequenceBatch> {
        match self {
            EpisodeSet::Classification(eps) => EpisodeBatch {
                episodes: eps.clone(),
            }
            .to_sequence_batch(),
            EpisodeSet::Regression(eps) => regression_batch(eps),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            EpisodeSet::Classification(e) => e.len(),
            EpisodeSet::Regression(e) => e.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Samples `lanes` episodes of `n` classes (ignored for regression).
pub fn sample_episodes(
    config: &ExperimentConfig,
    set: Option<&ImageClassSet>,
    n: usize,
    lanes: usize,
    rng: &mut ChaCha8Rng,
) -> Result<EpisodeSet> {
    let steps = config.steps_for(n);
    if let Some(d) = config.regression_dim() {
        let gp = config.gp_params().expect("regression task");
        let eps = (0..lanes)
            .map(|_| sample_regression_episode(d, steps, &gp, rng))
            .collect::<Result<Vec<_>>>()?;
        return Ok(EpisodeSet::Regression(eps));
    }
    let set =
        set.ok_or_else(|| MannError::Config("classification task without a dataset".into()))?;
    let mode = config.label_mode();
    let eps = (0..lanes)
        .map(|_| sample_classification_episode(set, n, steps, mode, rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(EpisodeSet::Classification(eps))
}

/// Forward results of one batch, detached from the tape.
pub struct BatchOutput {
    /// Episode loss summed over steps, per lane.
    pub lane_loss: Vec<f64>,
    /// Per lane, per step: prediction correct (classification only).
    pub correct: Vec<Vec<bool>>,
    /// Per lane, per step: model NLL (regression only).
    pub step_nll: Vec<Vec<f64>>,
    /// Parameter gradients of the mean lane loss, when requested.
    pub gradients: Option<Vec<Tensor>>,
    pub memory: Option<MemorySnapshot>,
}

/// Runs `model` over `episodes`, optionally backpropagating the mean loss.
pub fn run_batch(
    model: &Model,
    episodes: &EpisodeSet,
    initial_memory: Option<MemorySnapshot>,
    want_gradients: bool,
) -> Result<BatchOutput> {
    let batch = episodes.to_sequence_batch()?;
    let lanes = batch.lanes;
    let mut tape = Tape::new();
    let options = ForwardOptions {
        ablate_memory: false,
        initial_memory,
    };
    let pass = model.forward(&mut tape, &batch, &options)?;
    let total = model.episode_loss(&mut tape, &pass.outputs, &batch)?;

    let output_kind = model.config().output;
    let mut lane_loss = vec![0.0; lanes];
    let mut correct = vec![Vec::with_capacity(batch.steps); lanes];
    let mut step_nll = vec![Vec::with_capacity(batch.steps); lanes];
    for (t, out) in pass.outputs.iter().enumerate() {
        match *out {
            HeadOutput::Probabilities(p) => {
                let probs = tape.value(p);
                for lane in 0..lanes {
                    let row = probs.row(lane);
                    let target = batch.target(t, lane);
                    lane_loss[lane] -= target
                        .iter()
                        .zip(row)
                        .map(|(y, q)| y * q.max(mann_autodiff::LOG_FLOOR).ln())
                        .sum::<f64>();
                    correct[lane].push(
                        decode_label(&output_kind, row) == decode_label(&output_kind, target),
                    );
                }
            }
            HeadOutput::Gaussian { mean, std } => {
                let (mu, sigma) = (tape.value(mean), tape.value(std));
                for lane in 0..lanes {
                    let y = batch.target(t, lane)[0];
                    let nll = gaussian_nll(y, mu.data()[lane], sigma.data()[lane].powi(2));
                    lane_loss[lane] += nll;
                    step_nll[lane].push(nll);
                }
            }
        }
    }
    let total_value = tape.value(total).item();
    if !total_value.is_finite() {
        return Err(AutodiffError::NonFinite { op: "episode loss" }.into());
    }
    let gradients = if want_gradients {
        let grads = tape.backward(total)?;
        let mut g = pass.params.gradients(&tape, &grads);
        let scale = 1.0 / lanes as f64;
        for t in &mut g {
            t.data_mut().iter_mut().for_each(|v| *v *= scale);
        }
        Some(g)
    } else {
        None
    };
    let memory = pass.memory.as_ref().map(|m| m.snapshot(&tape));
    Ok(BatchOutput {
        lane_loss,
        correct,
        step_nll,
        gradients,
        memory,
    })
}

fn tally_batch(tally: &mut AccuracyTally, episodes: &EpisodeSet, out: &BatchOutput) {
    if let EpisodeSet::Classification(eps) = episodes {
        for (ep, c) in eps.iter().zip(&out.correct) {
            tally.add_episode(c, &ep.instance_index);
        }
    }
    for l in &out.lane_loss {
        tally.add_loss(*l);
    }
}

fn test_batches(config: &ExperimentConfig) -> impl Iterator<Item = (u64, usize)> + '_ {
    let b = config.batch_size;
    (0..config.test_episodes.div_ceil(b))
        .map(move |i| (i as u64, b.min(config.test_episodes - i * b)))
}

/// Memory an episode starts from: the previous episode's memory content and
/// usage in persistent mode, a fresh memory otherwise.
pub fn initial_memory(
    config: &ExperimentConfig,
    model: &Model,
    previous: Option<&MemorySnapshot>,
    lanes: usize,
) -> Option<MemorySnapshot> {
    match (previous, &model.config().memory) {
        (Some(m), Some(cfg)) if config.persistent_memory && m.lanes() == lanes => {
            Some(m.carry_over(cfg))
        }
        _ => None,
    }
}

/// Evaluates frozen weights on `test_episodes` held-out episodes. The same
/// episodes are drawn for every call with the same seed.
pub fn evaluate(
    model: &Model,
    config: &ExperimentConfig,
    data: Option<&SplitDataset>,
) -> Result<EvalSummary> {
    if let Some(d) = data {
        check_disjoint(&d.train, &d.test)?;
    }
    let test = data.map(|d| &d.test);
    let mut tally = AccuracyTally::new();
    let mut model_nll: Vec<f64> = Vec::new();
    let mut gp_nll: Vec<f64> = Vec::new();
    let mut regression_episodes = 0usize;
    let mut memory: Option<MemorySnapshot> = None;
    for (index, lanes) in test_batches(config) {
        let seed = derive_seed(config.seed, STREAM_TEST, index);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let episodes = sample_episodes(config, test, config.test_classes(), lanes, &mut rng)?;
        let initial = initial_memory(config, model, memory.as_ref(), lanes);
        let out = run_batch(model, &episodes, initial, false).map_err(|e| numeric(e, 0, seed))?;
        tally_batch(&mut tally, &episodes, &out);
        if let EpisodeSet::Regression(eps) = &episodes {
            for (ep, nll) in eps.iter().zip(&out.step_nll) {
                let gp = gp_sequential_nll(&ep.x, &ep.y, ep.d, &ep.gp_params)?;
                if model_nll.is_empty() {
                    model_nll = vec![0.0; nll.len()];
                    gp_nll = vec![0.0; nll.len()];
                }
                for t in 0..nll.len() {
                    model_nll[t] += nll[t];
                    gp_nll[t] += gp[t];
                }
                regression_episodes += 1;
            }
        }
        memory = out.memory;
    }
    let step_nll = model_nll
        .iter()
        .zip(&gp_nll)
        .map(|(m, g)| {
            (
                m / regression_episodes as f64,
                g / regression_episodes as f64,
            )
        })
        .collect();
    Ok(EvalSummary {
        episodes: config.test_episodes,
        accuracy: tally.accuracy(),
        loss: tally.mean_loss(),
        step_nll,
    })
}

/// One-nearest-neighbour baseline on the same test episodes as [`evaluate`].
pub fn evaluate_knn(config: &ExperimentConfig, data: &SplitDataset) -> Result<EvalSummary> {
    check_disjoint(&data.train, &data.test)?;
    let labels = config.label_mode().space();
    let mut tally = AccuracyTally::new();
    for (index, lanes) in test_batches(config) {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, STREAM_TEST, index));
        let EpisodeSet::Classification(eps) = sample_episodes(
            config,
            Some(&data.test),
            config.test_classes(),
            lanes,
            &mut rng,
        )?
        else {
            return Err(MannError::Config(
                "nearest neighbour needs a classification task".into(),
            ));
        };
        for ep in &eps {
            tally.add_episode(&knn_episode(ep, labels, &mut rng), &ep.instance_index);
        }
    }
    Ok(EvalSummary {
        episodes: config.test_episodes,
        accuracy: tally.accuracy(),
        loss: 0.0,
        step_nll: Vec::new(),
    })
}

/// Predict-then-store over one episode; returns per-step correctness.
pub fn knn_episode(
    ep: &ClassificationEpisode,
    num_labels: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<bool> {
    let mut store = KnnStore::new();
    (0..ep.steps())
        .map(|t| {
            let guess = store.predict(ep.image(t), num_labels, rng);
            store.insert(ep.image(t).to_vec(), ep.label_ids[t]);
            guess == ep.label_ids[t]
        })
        .collect()
}

fn numeric(e: MannError, episode: usize, batch_seed: u64) -> MannError {
    match e {
        MannError::Autodiff(AutodiffError::NonFinite { op }) => MannError::NumericFailure {
            episode,
            batch_seed,
            detail: format!("{op} produced a non-finite value"),
        },
        other => other,
    }
}

#[derive(Serialize)]
struct FailureDump<'a> {
    episode: usize,
    batch_seed: u64,
    detail: &'a str,
}

/// Trains per `config`, evaluating every `eval_every` episodes. Writes
/// `config.json`, `metrics.csv`, `regression.csv` (regression tasks) and
/// `checkpoint.bin` under `out` when given.
pub fn train(
    config: &ExperimentConfig,
    data: Option<&SplitDataset>,
    out: Option<&Path>,
) -> Result<TrainOutcome> {
    config.validate()?;
    train_from(config, data, out, init_model(config)?)
}

/// [`train`] starting from the given parameters.
pub fn train_from(
    config: &ExperimentConfig,
    data: Option<&SplitDataset>,
    out: Option<&Path>,
    mut model: Model,
) -> Result<TrainOutcome> {
    config.validate()?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("config.json"), config.to_json())?;
    }
    let mut optimizer = RmsProp::new(config.rmsprop(), model.params())?;
    let train_set = data.map(|d| &d.train);

    let mut metrics = Vec::new();
    let mut regression = Vec::new();
    let mut final_eval = None;
    let mut tally = AccuracyTally::new();
    let mut memory: Option<MemorySnapshot> = None;
    let mut done = 0usize;
    let mut next_eval = config.eval_every;
    let mut minibatch = 0u64;
    while done < config.episodes {
        let lanes = config.batch_size.min(config.episodes - done);
        let batch_seed = derive_seed(config.seed, STREAM_TRAIN, minibatch);
        let mut rng = ChaCha8Rng::seed_from_u64(batch_seed);
        let n = if config.curriculum {
            curriculum_sample(
                done,
                config.curriculum_start_max,
                config.curriculum_step,
                &mut rng,
            )
            .0
        } else {
            config.num_classes
        };
        let episodes = sample_episodes(config, train_set, n, lanes, &mut rng)?;
        let initial = initial_memory(config, &model, memory.as_ref(), lanes);
        let result =
            run_batch(&model, &episodes, initial, true).map_err(|e| numeric(e, done, batch_seed));
        let out_batch = match result {
            Ok(o) => o,
            Err(e) => {
                if let (
                    Some(dir),
                    MannError::NumericFailure {
                        episode,
                        batch_seed,
                        detail,
                    },
                ) = (out, &e)
                {
                    let dump = FailureDump {
                        episode: *episode,
                        batch_seed: *batch_seed,
                        detail,
                    };
                    std::fs::write(
                        dir.join("failure.json"),
                        serde_json::to_string_pretty(&dump)?,
                    )?;
                }
                return Err(e);
            }
        };
        optimizer.step(
            model.params_mut(),
            out_batch.gradients.as_ref().expect("gradients requested"),
        )?;
        tally_batch(&mut tally, &episodes, &out_batch);
        memory = out_batch.memory;
        done += lanes;
        minibatch += 1;

        if done >= next_eval || done == config.episodes {
            next_eval = (done / config.eval_every + 1) * config.eval_every;
            let summary = evaluate(&model, config, data)?;
            metrics.push(MetricsRecord {
                episode: done,
                split: Split::Train,
                accuracy: tally.accuracy(),
                loss: tally.mean_loss(),
            });
            metrics.push(MetricsRecord {
                episode: done,
                split: Split::Test,
                accuracy: summary.accuracy,
                loss: summary.loss,
            });
            for (step, (m, g)) in summary.step_nll.iter().enumerate() {
                regression.push(RegressionRecord {
                    episode: done,
                    step: step + 1,
                    model_nll: *m,
                    gp_nll: *g,
                });
            }
            log::info!(
                "episode {done}: train loss {:.3}, test loss {:.3}, test inst1/2/10 {:?}/{:?}/{:?}",
                tally.mean_loss(),
                summary.loss,
                summary.accuracy[0],
                summary.accuracy[1],
                summary.accuracy[5]
            );
            tally = AccuracyTally::new();
            final_eval = Some(summary);
            if let Some(dir) = out {
                model.params().save(&dir.join("checkpoint.bin"))?;
                write_outputs(dir, config, &metrics, &regression)?;
            }
        }
    }
    if let Some(dir) = out {
        model.params().save(&dir.join("checkpoint.bin"))?;
        write_outputs(dir, config, &metrics, &regression)?;
    }
    Ok(TrainOutcome {
        model,
        metrics,
        regression,
        final_eval,
        memory,
    })
}

fn write_outputs(
    dir: &Path,
    config: &ExperimentConfig,
    metrics: &[MetricsRecord],
    regression: &[RegressionRecord],
) -> Result<()> {
    let reg = config.regression_dim().map(|_| regression);
    export_metrics(dir, metrics, reg)
}

/// Restores a checkpoint written by [`train`] and evaluates it.
pub fn evaluate_checkpoint(checkpoint: &Path, config: &ExperimentConfig) -> Result<EvalSummary> {
    let data = load_dataset(config)?;
    let mut model = init_model(config)?;
    model.params_mut().load(checkpoint)?;
    evaluate(&model, config, data.as_ref())
}

/// One row of a suite's summary table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteRow {
    pub label: String,
    pub controller: String,
    pub classes: usize,
    pub summary: EvalSummary,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteReport {
    pub name: String,
    pub rows: Vec<SuiteRow>,
    pub table: String,
}

#[derive(Clone, Debug)]
enum RunKind {
    Train,
    Knn,
}

#[derive(Clone, Debug)]
struct SuiteEntry {
    slug: String,
    label: String,
    controller: String,
    kind: RunKind,
    config: ExperimentConfig,
}

fn entry(
    slug: &str,
    label: &str,
    controller: &str,
    kind: RunKind,
    config: ExperimentConfig,
) -> SuiteEntry {
    SuiteEntry {
        slug: slug.into(),
        label: label.into(),
        controller: controller.into(),
        kind,
        config,
    }
}

fn with(
    base: &ExperimentConfig,
    architecture: Architecture,
    controller: ControllerKind,
) -> ExperimentConfig {
    ExperimentConfig {
        architecture,
        controller,
        ..base.clone()
    }
}

fn suite_entries(name: &str, base: &ExperimentConfig) -> Result<Vec<SuiteEntry>> {
    let omniglot = base.dataset.is_some();
    let onehot = ExperimentConfig {
        task: Task::SynthOnehot.with_source(omniglot),
        ..base.clone()
    };
    let string = ExperimentConfig {
        task: Task::SynthString.with_source(omniglot),
        ..base.clone()
    };
    use Architecture::*;
    use ControllerKind::{Feedforward as Ff, Lstm as L};
    let entries = match name {
        "table1" => {
            let c = ExperimentConfig {
                num_classes: 5,
                ..onehot
            };
            vec![
                entry(
                    "feedforward",
                    "Feedforward",
                    "--",
                    RunKind::Train,
                    with(&c, Feedforward, Ff),
                ),
                entry("lstm", "LSTM", "--", RunKind::Train, with(&c, Lstm, L)),
                entry("mann", "MANN", "LSTM", RunKind::Train, with(&c, Mann, L)),
            ]
        }
        "table2" => {
            let mut out = Vec::new();
            for (n, steps) in [(5, None), (15, Some(100))] {
                let c = ExperimentConfig {
                    num_classes: n,
                    episode_length: steps,
                    ..string.clone()
                };
                out.push(entry(
                    &format!("knn_n{n}"),
                    "kNN (raw pixels)",
                    "--",
                    RunKind::Knn,
                    c.clone(),
                ));
                out.push(entry(
                    &format!("feedforward_n{n}"),
                    "Feedforward",
                    "--",
                    RunKind::Train,
                    with(&c, Feedforward, Ff),
                ));
                out.push(entry(
                    &format!("lstm_n{n}"),
                    "LSTM",
                    "--",
                    RunKind::Train,
                    with(&c, Lstm, L),
                ));
                out.push(entry(
                    &format!("mann_ff_n{n}"),
                    "MANN",
                    "Feedforward",
                    RunKind::Train,
                    with(&c, Mann, Ff),
                ));
                out.push(entry(
                    &format!("mann_lstm_n{n}"),
                    "MANN",
                    "LSTM",
                    RunKind::Train,
                    with(&c, Mann, L),
                ));
            }
            out
        }
        "persistent" => {
            let five = with(
                &ExperimentConfig {
                    num_classes: 5,
                    ..onehot.clone()
                },
                Mann,
                L,
            );
            let ten = ExperimentConfig {
                num_classes: 10,
                episode_length: Some(75),
                persistent_memory: true,
                ..five.clone()
            };
            vec![
                entry(
                    "wipe_n5",
                    "MANN (memory wipe)",
                    "LSTM",
                    RunKind::Train,
                    five.clone(),
                ),
                entry(
                    "persistent_n5",
                    "MANN (persistent)",
                    "LSTM",
                    RunKind::Train,
                    ExperimentConfig {
                        persistent_memory: true,
                        ..five
                    },
                ),
                entry(
                    "persistent_n10_t75",
                    "MANN (persistent, T=75)",
                    "LSTM",
                    RunKind::Train,
                    ten,
                ),
            ]
        }
        "curriculum" => {
            let c = ExperimentConfig {
                curriculum: true,
                ..with(&string, Mann, L)
            };
            vec![entry(
                "mann_curriculum",
                "MANN (curriculum)",
                "LSTM",
                RunKind::Train,
                c,
            )]
        }
        "regression1d" => vec![entry(
            "mann_1d",
            "MANN 1-D",
            "LSTM",
            RunKind::Train,
            with(
                &ExperimentConfig {
                    task: Task::Regression1d,
                    ..base.clone()
                },
                Mann,
                L,
            ),
        )],
        "regression_nd" => vec![
            entry(
                "mann_2d",
                "MANN 2-D",
                "LSTM",
                RunKind::Train,
                with(
                    &ExperimentConfig {
                        task: Task::Regression2d,
                        ..base.clone()
                    },
                    Mann,
                    L,
                ),
            ),
            entry(
                "mann_3d",
                "MANN 3-D",
                "LSTM",
                RunKind::Train,
                with(
                    &ExperimentConfig {
                        task: Task::Regression3d,
                        ..base.clone()
                    },
                    Mann,
                    L,
                ),
            ),
        ],
        _ => {
            return Err(MannError::UnknownSuite {
                name: name.into(),
                valid: SUITES.join(", "),
            })
        }
    };
    Ok(entries)
}

/// Validates a suite name without running anything.
pub fn check_suite_name(name: &str) -> Result<()> {
    suite_entries(name, &ExperimentConfig::default()).map(|_| ())
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "--".into(), |a| format!("{:.1}", 100.0 * a))
}

fn accuracy_table(rows: &[SuiteRow], human: bool) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<26} {:<12} {:>7} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6}",
        "model", "controller", "classes", "1st", "2nd", "3rd", "4th", "5th", "10th"
    );
    if human {
        let h: Vec<String> = HUMAN_REFERENCE.iter().map(|v| format!("{v:.1}")).collect();
        let _ = writeln!(
            s,
            "{:<26} {:<12} {:>7} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6}",
            "Human", "--", 5, h[0], h[1], h[2], h[3], h[4], h[5]
        );
    }
    for r in rows {
        let a = r.summary.accuracy;
        let _ = writeln!(
            s,
            "{:<26} {:<12} {:>7} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6}",
            r.label,
            r.controller,
            r.classes,
            pct(a[0]),
            pct(a[1]),
            pct(a[2]),
            pct(a[3]),
            pct(a[4]),
            pct(a[5])
        );
    }
    s
}

fn curriculum_table(config: &ExperimentConfig, metrics: &[MetricsRecord]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>9} {:>11} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6}",
        "episode", "max classes", "1st", "2nd", "3rd", "4th", "5th", "10th"
    );
    for r in metrics.iter().filter(|r| r.split == Split::Test) {
        let max = curriculum_max_classes(
            r.episode.saturating_sub(1),
            config.curriculum_start_max,
            config.curriculum_step,
        );
        let a = r.accuracy;
        let _ = writeln!(
            s,
            "{:>9} {:>11} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6}",
            r.episode,
            max,
            pct(a[0]),
            pct(a[1]),
            pct(a[2]),
            pct(a[3]),
            pct(a[4]),
            pct(a[5])
        );
    }
    s
}

fn regression_table(rows: &[SuiteRow]) -> String {
    let mut s = String::new();
    for r in rows {
        let _ = writeln!(s, "{}", r.label);
        let _ = writeln!(s, "{:>6} {:>12} {:>12}", "step", "model NLL", "GP NLL");
        for (t, (m, g)) in r.summary.step_nll.iter().enumerate() {
            let _ = writeln!(s, "{:>6} {:>12.4} {:>12.4}", t + 1, m, g);
        }
    }
    s
}

/// Runs every configuration of suite `name` on top of `base`, writing each
/// run under `out/<run>/` and the summary table to `out/summary.txt`.
pub fn run_experiment_suite(
    name: &str,
    base: &ExperimentConfig,
    out: &Path,
) -> Result<SuiteReport> {
    let entries = suite_entries(name, base)?;
    std::fs::create_dir_all(out)?;
    let mut rows = Vec::new();
    let mut curriculum_metrics = Vec::new();
    for e in &entries {
        log::info!("suite {name}: running {}", e.slug);
        let dir = out.join(&e.slug);
        let data = load_dataset(&e.config)?;
        let summary = match e.kind {
            RunKind::Knn => {
                let data = data
                    .as_ref()
                    .ok_or_else(|| MannError::Config("kNN needs images".into()))?;
                std::fs::create_dir_all(&dir)?;
                std::fs::write(dir.join("config.json"), e.config.to_json())?;
                let s = evaluate_knn(&e.config, data)?;
                let record = MetricsRecord {
                    episode: 0,
                    split: Split::Test,
                    accuracy: s.accuracy,
                    loss: s.loss,
                };
                export_metrics(&dir, &[record], None)?;
                s
            }
            RunKind::Train => {
                let outcome = train(&e.config, data.as_ref(), Some(&dir))?;
                if e.config.curriculum {
                    curriculum_metrics = outcome.metrics.clone();
                }
                match outcome.final_eval {
                    Some(s) => s,
                    None => evaluate(&outcome.model, &e.config, data.as_ref())?,
                }
            }
        };
        rows.push(SuiteRow {
            label: e.label.clone(),
            controller: e.controller.clone(),
            classes: e.config.test_classes(),
            summary,
        });
    }
    let table = match name {
        "curriculum" => curriculum_table(&entries[0].config, &curriculum_metrics),
        "regression1d" | "regression_nd" => regression_table(&rows),
        _ => accuracy_table(&rows, name == "table1"),
    };
    std::fs::write(out.join("summary.txt"), &table)?;
    Ok(SuiteReport {
        name: name.into(),
        rows,
        table,
    })
}
