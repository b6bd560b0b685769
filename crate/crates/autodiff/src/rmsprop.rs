//! RMSProp with momentum and a per-element step clip.
//!
//! ```text
//! s ← decay·s + (1 − decay)·g²
//! v ← momentum·v + lr·g / √(s + ε)
//! v ← clamp(v, −max_lr, +max_lr)
//! θ ← θ − v
//! ```

use crate::error::{AutodiffError, Result};
use crate::params::ParamStore;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RmsPropConfig {
    pub learning_rate: f64,
    /// Bound on the magnitude of any single element's update.
    pub max_learning_rate: f64,
    pub decay: f64,
    pub momentum: f64,
    pub epsilon: f64,
}

impl Default for RmsPropConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            max_learning_rate: 5e-1,
            decay: 0.95,
            momentum: 0.9,
            epsilon: 1e-8,
        }
    }
}

impl RmsPropConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(AutodiffError::InvalidOptimizer(msg.to_owned()));
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be > 0");
        }
        if !(self.max_learning_rate > 0.0) {
            return bad("max_learning_rate must be > 0");
        }
        if !(0.0..1.0).contains(&self.decay) {
            return bad("decay must lie in [0, 1)");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be > 0");
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct RmsProp {
    config: RmsPropConfig,
    mean_square: Vec<Tensor>,
    velocity: Vec<Tensor>,
}

impl RmsProp {
    pub fn new(config: RmsPropConfig, params: &ParamStore) -> Result<Self> {
        config.validate()?;
        let zeros = || {
            params
                .values()
                .iter()
                .map(|p| Tensor::zeros(p.shape()))
                .collect()
        };
        Ok(Self {
            config,
            mean_square: zeros(),
            velocity: zeros(),
        })
    }

    pub fn config(&self) -> &RmsPropConfig {
        &self.config
    }

    pub fn mean_square(&self) -> &[Tensor] {
        &self.mean_square
    }

    pub fn velocity(&self) -> &[Tensor] {
        &self.velocity
    }

    /// One update of every parameter from `grads` (store order).
    pub fn step(&mut self, params: &mut ParamStore, grads: &[Tensor]) -> Result<()> {
        if grads.len() != params.len() || self.mean_square.len() != params.len() {
            return Err(AutodiffError::InvalidArgument {
                op: "rmsprop_step",
                msg: format!("{} gradients for {} parameters", grads.len(), params.len()),
            });
        }
        let c = self.config;
        for (((p, g), s), v) in params
            .values_mut()
            .iter_mut()
            .zip(grads)
            .zip(&mut self.mean_square)
            .zip(&mut self.velocity)
        {
            if p.shape() != g.shape() || s.shape() != p.shape() {
                return Err(AutodiffError::ShapeMismatch {
                    op: "rmsprop_step",
                    left: p.shape().to_vec(),
                    right: g.shape().to_vec(),
                });
            }
            for (((pi, &gi), si), vi) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(s.data_mut())
                .zip(v.data_mut())
            {
                *si = c.decay * *si + (1.0 - c.decay) * gi * gi;
                *vi = c.momentum * *vi + c.learning_rate * gi / (*si + c.epsilon).sqrt();
                *vi = vi.clamp(-c.max_learning_rate, c.max_learning_rate);
                *pi -= *vi;
            }
            if !p.is_finite() {
                return Err(AutodiffError::NonFinite { op: "rmsprop_step" });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_param(v: f64) -> ParamStore {
        let mut s = ParamStore::new();
        s.insert("w", Tensor::vector(vec![v]));
        s
    }

    #[test]
    fn zero_gradient_is_fixed_point() {
        let mut p = one_param(1.5);
        let mut opt = RmsProp::new(RmsPropConfig::default(), &p).unwrap();
        for _ in 0..5 {
            opt.step(&mut p, &[Tensor::vector(vec![0.0])]).unwrap();
        }
        assert_eq!(p.values()[0].item(), 1.5);
    }

    #[test]
    fn first_step_magnitude() {
        // s = 0.05, v = 1e-4 / sqrt(0.05 + 1e-8)
        let expected = 1e-4 / (0.05f64 + 1e-8).sqrt();
        let mut p = one_param(0.0);
        let mut opt = RmsProp::new(RmsPropConfig::default(), &p).unwrap();
        opt.step(&mut p, &[Tensor::vector(vec![1.0])]).unwrap();
        let step = -p.values()[0].item();
        assert!((step - expected).abs() < 1e-18, "{step} vs {expected}");
        assert!((step - 4.472_135_5e-4).abs() < 1e-10);
    }

    #[test]
    fn step_is_clipped() {
        let cfg = RmsPropConfig {
            learning_rate: 10.0,
            ..RmsPropConfig::default()
        };
        let mut p = one_param(0.0);
        let mut opt = RmsProp::new(cfg, &p).unwrap();
        opt.step(&mut p, &[Tensor::vector(vec![3.0])]).unwrap();
        assert_eq!(p.values()[0].item(), -0.5);
    }

    #[test]
    fn deterministic() {
        let run = || {
            let mut p = one_param(0.3);
            let mut opt = RmsProp::new(RmsPropConfig::default(), &p).unwrap();
            for i in 0..10 {
                opt.step(&mut p, &[Tensor::vector(vec![(i as f64).sin()])])
                    .unwrap();
            }
            p.values()[0].item().to_bits()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn invalid_config_rejected() {
        let p = one_param(0.0);
        for cfg in [
            RmsPropConfig {
                learning_rate: 0.0,
                ..Default::default()
            },
            RmsPropConfig {
                decay: 1.0,
                ..Default::default()
            },
            RmsPropConfig {
                momentum: -0.1,
                ..Default::default()
            },
        ] {
            assert!(RmsProp::new(cfg, &p).is_err());
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut p = one_param(0.0);
        let mut opt = RmsProp::new(RmsPropConfig::default(), &p).unwrap();
        assert!(opt.step(&mut p, &[Tensor::vector(vec![1.0, 2.0])]).is_err());
        assert!(opt.step(&mut p, &[]).is_err());
    }
}
