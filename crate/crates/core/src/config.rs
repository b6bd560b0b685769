//! Experiment configuration as a flat JSON object.

use std::path::{Path, PathBuf};

use mann_autodiff::RmsPropConfig;
use serde::{Deserialize, Serialize};

use crate::episodes::{curriculum_max_classes, regression_steps, LabelMode};
use crate::error::{MannError, Result};
use crate::memory::MemoryConfig;
use crate::model::{ControllerKind, ModelConfig, OutputKind};
use crate::oracles::GpParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    OmniglotOnehot,
    OmniglotString,
    SynthOnehot,
    SynthString,
    #[serde(rename = "regression_1d")]
    Regression1d,
    #[serde(rename = "regression_2d")]
    Regression2d,
    #[serde(rename = "regression_3d")]
    Regression3d,
}

impl Task {
    pub fn regression_dim(&self) -> Option<usize> {
        match self {
            Task::Regression1d => Some(1),
            Task::Regression2d => Some(2),
            Task::Regression3d => Some(3),
            _ => None,
        }
    }

    pub fn is_string(&self) -> bool {
        matches!(self, Task::OmniglotString | Task::SynthString)
    }

    pub fn is_omniglot(&self) -> bool {
        matches!(self, Task::OmniglotOnehot | Task::OmniglotString)
    }

    /// Same label mode, other data source.
    pub fn with_source(&self, omniglot: bool) -> Task {
        match (self.is_string(), omniglot) {
            (_, _) if self.regression_dim().is_some() => *self,
            (true, true) => Task::OmniglotString,
            (true, false) => Task::SynthString,
            (false, true) => Task::OmniglotOnehot,
            (false, false) => Task::SynthOnehot,
        }
    }
}

/// Which network is trained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    /// Controller plus external memory.
    Mann,
    Lstm,
    Feedforward,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    pub architecture: Architecture,
    /// Controller used by the memory-augmented network.
    pub controller: ControllerKind,
    pub hidden_size: usize,
    pub memory_slots: usize,
    pub slot_width: usize,
    pub read_heads: usize,
    pub usage_decay: f64,
    /// Classes per episode (the fixed N when the curriculum is off).
    pub num_classes: usize,
    /// Steps per episode; ten per class when unset.
    pub episode_length: Option<usize>,
    /// One-hot label width; defaults to the largest class count used.
    pub label_width: Option<usize>,
    pub batch_size: usize,
    pub episodes: usize,
    pub seed: u64,
    pub learning_rate: f64,
    pub max_learning_rate: f64,
    pub rmsprop_decay: f64,
    pub momentum: f64,
    pub epsilon: f64,
    pub persistent_memory: bool,
    pub curriculum: bool,
    pub curriculum_start_max: usize,
    pub curriculum_step: usize,
    pub eval_every: usize,
    pub test_episodes: usize,
    /// Classes per test episode; `num_classes` when unset.
    pub test_num_classes: Option<usize>,
    /// Omniglot root for the omniglot tasks.
    pub dataset: Option<PathBuf>,
    pub train_classes: usize,
    pub synth_classes: usize,
    pub synth_samples: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let rms = RmsPropConfig::default();
        let mem = MemoryConfig::default();
        Self {
            task: Task::SynthOnehot,
            architecture: Architecture::Mann,
            controller: ControllerKind::Lstm,
            hidden_size: 200,
            memory_slots: mem.num_slots,
            slot_width: mem.slot_width,
            read_heads: mem.num_read_heads,
            usage_decay: mem.usage_decay,
            num_classes: 5,
            episode_length: None,
            label_width: None,
            batch_size: 16,
            episodes: 100_000,
            seed: 0,
            learning_rate: rms.learning_rate,
            max_learning_rate: rms.max_learning_rate,
            rmsprop_decay: rms.decay,
            momentum: rms.momentum,
            epsilon: rms.epsilon,
            persistent_memory: false,
            curriculum: false,
            curriculum_start_max: 15,
            curriculum_step: 10_000,
            eval_every: 1000,
            test_episodes: 1000,
            test_num_classes: None,
            dataset: None,
            train_classes: 1200,
            synth_classes: 1623,
            synth_samples: 20,
        }
    }
}

impl ExperimentConfig {
    /// Settings sized for a single desktop CPU: 20,000 episodes of five
    /// classes, evaluated every 500.
    pub fn desk_scale() -> Self {
        Self {
            episodes: 20_000,
            eval_every: 500,
            test_episodes: 320,
            ..Self::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        Ok(cfg)
    }

    /// Reads `path` on top of defaults (or the desk-scale preset).
    pub fn load(path: &Path, desk_scale: bool) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut base = serde_json::to_value(if desk_scale {
            Self::desk_scale()
        } else {
            Self::default()
        })?;
        let file: serde_json::Value = serde_json::from_str(&text)?;
        let serde_json::Value::Object(overrides) = file else {
            return Err(MannError::Config(
                "configuration file must hold a JSON object".into(),
            ));
        };
        let fields = base
            .as_object_mut()
            .expect("config serializes to an object");
        for (k, v) in overrides {
            fields.insert(k, v);
        }
        Ok(serde_json::from_value(base)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(MannError::Config(m.into()));
        if self.batch_size == 0 {
            return fail("batch_size must be positive");
        }
        if self.eval_every == 0 {
            return fail("eval_every must be positive");
        }
        if self.hidden_size == 0 {
            return fail("hidden_size must be positive");
        }
        if self.regression_dim().is_none() {
            if self.num_classes == 0 {
                return fail("num_classes must be positive");
            }
            if self.curriculum && (self.curriculum_start_max < 2 || self.curriculum_step == 0) {
                return fail("curriculum needs start max >= 2 and a positive step");
            }
            if let LabelMode::OneHot { width } = self.label_mode() {
                if self.largest_class_count() > width {
                    return fail("label_width is smaller than the number of classes");
                }
            }
        }
        if self.task.is_omniglot() && self.dataset.is_none() {
            return fail("omniglot tasks need a dataset path");
        }
        if self.episode_length == Some(0) {
            return fail("episode_length must be positive");
        }
        self.rmsprop().validate()?;
        self.model_config().validate()?;
        Ok(())
    }

    pub fn regression_dim(&self) -> Option<usize> {
        self.task.regression_dim()
    }

    pub fn test_classes(&self) -> usize {
        self.test_num_classes.unwrap_or(self.num_classes)
    }

    /// Most classes any training or test episode will hold.
    pub fn largest_class_count(&self) -> usize {
        let train = if self.curriculum {
            curriculum_max_classes(
                self.episodes.saturating_sub(1),
                self.curriculum_start_max,
                self.curriculum_step,
            )
        } else {
            self.num_classes
        };
        train.max(self.test_classes())
    }

    pub fn label_mode(&self) -> LabelMode {
        if self.task.is_string() {
            LabelMode::String
        } else {
            LabelMode::OneHot {
                width: self
                    .label_width
                    .unwrap_or_else(|| self.largest_class_count()),
            }
        }
    }

    /// Episode length for `n` classes.
    pub fn steps_for(&self, n: usize) -> usize {
        match self.regression_dim() {
            Some(d) => self.episode_length.unwrap_or_else(|| regression_steps(d)),
            None => self.episode_length.unwrap_or(10 * n),
        }
    }

    pub fn memory_config(&self) -> MemoryConfig {
        MemoryConfig {
            num_slots: self.memory_slots,
            slot_width: self.slot_width,
            num_read_heads: self.read_heads,
            usage_decay: self.usage_decay,
            strict_cosine: false,
        }
    }

    pub fn model_config(&self) -> ModelConfig {
        let (input_size, output) = match self.regression_dim() {
            Some(d) => (d, OutputKind::Gaussian),
            None if self.task.is_string() => (crate::episodes::IMAGE_PIXELS, OutputKind::String),
            None => (
                crate::episodes::IMAGE_PIXELS,
                OutputKind::Categorical {
                    classes: self.label_mode().width(),
                },
            ),
        };
        let (controller, memory) = match self.architecture {
            Architecture::Mann => (self.controller, Some(self.memory_config())),
            Architecture::Lstm => (ControllerKind::Lstm, None),
            Architecture::Feedforward => (ControllerKind::Feedforward, None),
        };
        ModelConfig {
            controller,
            hidden_size: self.hidden_size,
            input_size,
            output,
            memory,
        }
    }

    pub fn rmsprop(&self) -> RmsPropConfig {
        RmsPropConfig {
            learning_rate: self.learning_rate,
            max_learning_rate: self.max_learning_rate,
            decay: self.rmsprop_decay,
            momentum: self.momentum,
            epsilon: self.epsilon,
        }
    }

    pub fn gp_params(&self) -> Option<GpParams> {
        self.regression_dim().map(GpParams::for_dim)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_setup() {
        let c = ExperimentConfig::default();
        assert_eq!(c.batch_size, 16);
        assert_eq!(c.learning_rate, 1e-4);
        assert_eq!((c.memory_slots, c.slot_width, c.read_heads), (128, 40, 4));
        assert_eq!(c.usage_decay, 0.99);
        assert_eq!(c.hidden_size, 200);
        assert_eq!(c.episodes, 100_000);
        assert!(!c.persistent_memory);
        c.validate().unwrap();
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"batch_size": 4, "bogus": 1}"#).is_err());
        let c =
            ExperimentConfig::from_json(r#"{"batch_size": 4, "task": "regression_2d"}"#).unwrap();
        assert_eq!(c.batch_size, 4);
        assert_eq!(c.steps_for(0), 40);
    }

    #[test]
    fn curriculum_label_width_covers_final_max() {
        let c = ExperimentConfig {
            curriculum: true,
            episodes: 100_001,
            ..ExperimentConfig::default()
        };
        assert_eq!(c.label_mode(), LabelMode::OneHot { width: 25 });
    }
}
