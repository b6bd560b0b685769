//! Finite-difference verification of full-model gradients.

use mann_autodiff::{ParamId, Tape};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::episodes::{sample_classification_episode, synth_dataset, EpisodeBatch, LabelMode};
use crate::error::Result;
use crate::memory::MemoryConfig;
use crate::model::{ControllerKind, ForwardOptions, Model, ModelConfig, OutputKind, SequenceBatch};
use crate::oracles::finite_diff_grad;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradCheckReport {
    /// Scalars compared.
    pub checked: usize,
    /// Scalars outside both the relative and the absolute tolerance.
    pub failures: usize,
    pub max_relative_error: f64,
    pub max_absolute_error: f64,
    /// Parameter holding the largest relative error among failures, if any.
    pub worst: Option<String>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Settings of the gradient check.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckConfig {
    pub model: ModelConfig,
    pub classes: usize,
    pub steps: usize,
    pub step_size: f64,
    pub relative_tolerance: f64,
    pub absolute_floor: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    /// 8×5 memory, 16 hidden units, 2 read heads, 2 classes over 7 steps.
    fn default() -> Self {
        Self {
            model: ModelConfig {
                controller: ControllerKind::Lstm,
                hidden_size: 16,
                input_size: crate::episodes::IMAGE_PIXELS,
                output: OutputKind::Categorical { classes: 2 },
                memory: Some(MemoryConfig {
                    num_slots: 8,
                    slot_width: 5,
                    num_read_heads: 2,
                    usage_decay: 0.99,
                    strict_cosine: false,
                }),
            },
            classes: 2,
            steps: 7,
            step_size: 1e-5,
            relative_tolerance: 1e-4,
            absolute_floor: 1e-7,
            seed: 0,
        }
    }
}

fn episode_loss(model: &Model, batch: &SequenceBatch) -> Result<f64> {
    let mut tape = Tape::new();
    let pass = model.forward(&mut tape, batch, &ForwardOptions::default())?;
    let loss = model.episode_loss(&mut tape, &pass.outputs, batch)?;
    Ok(tape.value(loss).item())
}

/// Compares analytic and central-difference gradients of one episode's
/// loss for every parameter scalar.
pub fn check_model_gradients(cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = Model::new(cfg.model, &mut rng)?;
    // move away from the zero-initialized biases and write gates
    let ids: Vec<ParamId> = model.params().iter().map(|(id, _, _)| id).collect();
    for &id in &ids {
        for v in model.params_mut().get_mut(id).data_mut() {
            *v += 0.1 * (rng.random::<f64>() - 0.5);
        }
    }
    let data = synth_dataset(cfg.classes, 3, cfg.classes, cfg.seed);
    let mode = LabelMode::OneHot {
        width: cfg.model.output.label_width(),
    };
    let ep = sample_classification_episode(&data.train, cfg.classes, cfg.steps, mode, &mut rng)?;
    let batch = EpisodeBatch { episodes: vec![ep] }.to_sequence_batch()?;

    let mut tape = Tape::new();
    let pass = model.forward(&mut tape, &batch, &ForwardOptions::default())?;
    let loss = model.episode_loss(&mut tape, &pass.outputs, &batch)?;
    let grads = tape.backward(loss)?;
    let analytic = pass.params.gradients(&tape, &grads);

    let mut report = GradCheckReport {
        checked: 0,
        failures: 0,
        max_relative_error: 0.0,
        max_absolute_error: 0.0,
        worst: None,
    };
    let mut worst_failure = 0.0;
    let names: Vec<String> = model
        .params()
        .iter()
        .map(|(_, n, _)| n.to_string())
        .collect();
    for (index, (&id, name)) in ids.iter().zip(&names).enumerate() {
        let original = model.params().get(id).clone();
        let mut probe = model.clone();
        let numeric = finite_diff_grad(
            |x| {
                probe.params_mut().get_mut(id).data_mut().copy_from_slice(x);
                episode_loss(&probe, &batch).unwrap_or(f64::NAN)
            },
            original.data(),
            cfg.step_size,
        )?;
        for (a, n) in analytic[index].data().iter().zip(&numeric) {
            let abs = (a - n).abs();
            let rel = abs / a.abs().max(n.abs()).max(f64::MIN_POSITIVE);
            report.checked += 1;
            report.max_absolute_error = report.max_absolute_error.max(abs);
            if abs > cfg.absolute_floor {
                report.max_relative_error = report.max_relative_error.max(rel);
                if rel > cfg.relative_tolerance {
                    report.failures += 1;
                    if rel > worst_failure {
                        worst_failure = rel;
                        report.worst = Some(name.clone());
                    }
                }
            }
        }
    }
    Ok(report)
}
