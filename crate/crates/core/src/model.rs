//! Controllers, key projection, output heads and episode losses.
//!
//! One [`Model`] covers the memory-augmented network (LSTM or feed-forward
//! controller with external memory) and the memory-less baselines.

use mann_autodiff::{BoundParams, ParamId, ParamStore, Tape, Tensor, Var};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MannError, Result};
use crate::memory::{memory_step, MemoryConfig, MemorySnapshot, MemoryState};

/// Five letters per string label.
pub const STRING_CHUNKS: usize = 5;
/// Letters are drawn from a five-symbol alphabet.
pub const STRING_ALPHABET: usize = 5;
/// Lower bound added to the softplus standard deviation.
pub const SIGMA_FLOOR: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    Lstm,
    Feedforward,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    Categorical { classes: usize },
    String,
    Gaussian,
}

impl OutputKind {
    /// Width of the label vectors fed back as input and used as targets.
    pub fn label_width(&self) -> usize {
        match self {
            OutputKind::Categorical { classes } => *classes,
            OutputKind::String => STRING_CHUNKS * STRING_ALPHABET,
            OutputKind::Gaussian => 1,
        }
    }

    /// Size of the final linear layer.
    pub fn linear_width(&self) -> usize {
        match self {
            OutputKind::Gaussian => 2,
            other => other.label_width(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub controller: ControllerKind,
    pub hidden_size: usize,
    /// Width of `x_t` (400 for 20×20 images, `d` for regression).
    pub input_size: usize,
    pub output: OutputKind,
    /// `None` builds the memory-less baseline.
    pub memory: Option<MemoryConfig>,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_size == 0 || self.input_size == 0 {
            return Err(MannError::Config(
                "hidden_size and input_size must be positive".into(),
            ));
        }
        if let OutputKind::Categorical { classes: 0 } = self.output {
            return Err(MannError::Config(
                "categorical output needs at least one class".into(),
            ));
        }
        if let Some(m) = &self.memory {
            m.validate()?;
        }
        Ok(())
    }

    pub fn read_width(&self) -> usize {
        self.memory.as_ref().map_or(0, MemoryConfig::read_width)
    }

    /// Width of the controller input `(x_t, y_{t-1}, r_{t-1})`.
    pub fn controller_input_width(&self) -> usize {
        self.input_size + self.output.label_width() + self.read_width()
    }

    /// Width of `o_t = (h_t, r_t)`.
    pub fn controller_output_width(&self) -> usize {
        self.hidden_size + self.read_width()
    }
}

/// Recurrent controller state; the feed-forward controller ignores it.
#[derive(Clone, Copy, Debug)]
pub struct ControllerState {
    pub h: Var,
    pub c: Var,
}

impl ControllerState {
    pub fn zeros(tape: &mut Tape, lanes: usize, hidden: usize) -> Self {
        Self {
            h: tape.constant(Tensor::zeros(&[lanes, hidden])),
            c: tape.constant(Tensor::zeros(&[lanes, hidden])),
        }
    }
}

/// Time-major sequences for a batch of episodes, all of equal length.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceBatch {
    pub lanes: usize,
    pub steps: usize,
    pub input_width: usize,
    pub label_width: usize,
    /// `[steps, lanes, input_width]`
    pub inputs: Vec<f64>,
    /// `[steps, lanes, label_width]`, all zero at step 0.
    pub prev_labels: Vec<f64>,
    /// `[steps, lanes, label_width]`
    pub targets: Vec<f64>,
}

impl SequenceBatch {
    /// Builds the offset-label batch from per-lane inputs and targets
    /// (`[steps, width]` row-major per lane).
    pub fn from_lanes(
        inputs: &[Vec<f64>],
        targets: &[Vec<f64>],
        input_width: usize,
        label_width: usize,
    ) -> Result<Self> {
        let lanes = inputs.len();
        if lanes == 0 || targets.len() != lanes {
            return Err(MannError::InvalidArgument(
                "batch needs matching, non-empty lanes".into(),
            ));
        }
        let steps = inputs[0].len() / input_width;
        for (x, y) in inputs.iter().zip(targets) {
            if x.len() != steps * input_width || y.len() != steps * label_width {
                return Err(MannError::InvalidArgument("lanes differ in length".into()));
            }
        }
        let mut b = Self {
            lanes,
            steps,
            input_width,
            label_width,
            inputs: Vec::with_capacity(steps * lanes * input_width),
            prev_labels: Vec::with_capacity(steps * lanes * label_width),
            targets: Vec::with_capacity(steps * lanes * label_width),
        };
        for t in 0..steps {
            for lane in 0..lanes {
                b.inputs
                    .extend_from_slice(&inputs[lane][t * input_width..(t + 1) * input_width]);
                b.targets
                    .extend_from_slice(&targets[lane][t * label_width..(t + 1) * label_width]);
                if t == 0 {
                    b.prev_labels.extend(std::iter::repeat_n(0.0, label_width));
                } else {
                    b.prev_labels
                        .extend_from_slice(&targets[lane][(t - 1) * label_width..t * label_width]);
                }
            }
        }
        Ok(b)
    }

    /// `(x_t, y_{t-1})` for every lane, `[lanes, input_width + label_width]`.
    pub fn step_inputs(&self, t: usize) -> Tensor {
        let (iw, lw) = (self.input_width, self.label_width);
        let mut data = Vec::with_capacity(self.lanes * (iw + lw));
        for lane in 0..self.lanes {
            let i = (t * self.lanes + lane) * iw;
            let l = (t * self.lanes + lane) * lw;
            data.extend_from_slice(&self.inputs[i..i + iw]);
            data.extend_from_slice(&self.prev_labels[l..l + lw]);
        }
        Tensor::new(&[self.lanes, iw + lw], data).expect("step shape")
    }

    /// Targets at step `t`, `[lanes, label_width]`.
    pub fn step_targets(&self, t: usize) -> Tensor {
        let lw = self.label_width;
        let start = t * self.lanes * lw;
        Tensor::new(
            &[self.lanes, lw],
            self.targets[start..start + self.lanes * lw].to_vec(),
        )
        .expect("target shape")
    }

    pub fn target(&self, t: usize, lane: usize) -> &[f64] {
        let lw = self.label_width;
        let i = (t * self.lanes + lane) * lw;
        &self.targets[i..i + lw]
    }
}

#[derive(Clone, Copy, Debug)]
pub enum HeadOutput {
    /// `[lanes, linear_width]` probabilities (per chunk for strings).
    Probabilities(Var),
    Gaussian {
        mean: Var,
        std: Var,
    },
}

#[derive(Clone, Debug, Default)]
pub struct ForwardOptions {
    /// Replace every memory read by zeros.
    pub ablate_memory: bool,
    /// Memory to start from instead of a fresh one.
    pub initial_memory: Option<MemorySnapshot>,
}

pub struct ForwardPass {
    pub params: BoundParams,
    pub outputs: Vec<HeadOutput>,
    pub controller: ControllerState,
    pub memory: Option<MemoryState>,
}

#[derive(Clone, Copy, Debug)]
enum ControllerIds {
    Lstm {
        w_x: ParamId,
        w_h: ParamId,
        b: ParamId,
    },
    Feedforward {
        w1: ParamId,
        b1: ParamId,
        w2: ParamId,
        b2: ParamId,
    },
}

#[derive(Clone, Copy, Debug)]
struct MemoryIds {
    keys_w: ParamId,
    keys_b: ParamId,
    alpha: ParamId,
}

#[derive(Clone, Debug)]
pub struct Model {
    config: ModelConfig,
    params: ParamStore,
    controller: ControllerIds,
    memory: Option<MemoryIds>,
    out_w: ParamId,
    out_b: ParamId,
}

impl Model {
    /// Glorot-uniform weights, zero biases, zero write gates.
    pub fn new<R: Rng + ?Sized>(config: ModelConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let mut p = ParamStore::new();
        let h = config.hidden_size;
        let input = config.controller_input_width();
        let controller = match config.controller {
            ControllerKind::Lstm => ControllerIds::Lstm {
                w_x: p.insert_glorot("controller.w_x", &[input, 4 * h], input, 4 * h, rng),
                w_h: p.insert_glorot("controller.w_h", &[h, 4 * h], h, 4 * h, rng),
                b: p.insert_zeros("controller.b", &[4 * h]),
            },
            ControllerKind::Feedforward => ControllerIds::Feedforward {
                w1: p.insert_glorot("controller.w1", &[input, h], input, h, rng),
                b1: p.insert_zeros("controller.b1", &[h]),
                w2: p.insert_glorot("controller.w2", &[h, h], h, h, rng),
                b2: p.insert_zeros("controller.b2", &[h]),
            },
        };
        let memory = config.memory.map(|m| {
            let kw = m.read_width();
            MemoryIds {
                keys_w: p.insert_glorot("keys.w", &[h, kw], h, m.slot_width, rng),
                keys_b: p.insert_zeros("keys.b", &[kw]),
                alpha: p.insert_zeros("lrua.alpha", &[m.num_read_heads]),
            }
        });
        let ow = config.controller_output_width();
        let units = config.output.linear_width();
        let out_w = p.insert_glorot("output.w", &[ow, units], ow, units, rng);
        let out_b = p.insert_zeros("output.b", &[units]);
        Ok(Self {
            config,
            params: p,
            controller,
            memory,
            out_w,
            out_b,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// Runs every step of `batch`. The returned head outputs are indexed by
    /// time step; each covers all lanes.
    pub fn forward(
        &self,
        tape: &mut Tape,
        batch: &SequenceBatch,
        options: &ForwardOptions,
    ) -> Result<ForwardPass> {
        if batch.input_width != self.config.input_size
            || batch.label_width != self.config.output.label_width()
        {
            return Err(MannError::InvalidArgument(format!(
                "batch widths ({}, {}) do not match model ({}, {})",
                batch.input_width,
                batch.label_width,
                self.config.input_size,
                self.config.output.label_width()
            )));
        }
        let bound = self.params.bind(tape);
        let lanes = batch.lanes;
        let hidden = self.config.hidden_size;
        let mut controller = ControllerState::zeros(tape, lanes, hidden);

        let mut memory = match (&self.config.memory, &options.initial_memory) {
            (Some(_), Some(snap)) => {
                if snap.lanes() != lanes {
                    return Err(MannError::InvalidArgument(format!(
                        "initial memory has {} lanes, batch has {lanes}",
                        snap.lanes()
                    )));
                }
                Some(MemoryState::attach(tape, snap))
            }
            (Some(cfg), None) => Some(MemoryState::attach(
                tape,
                &MemorySnapshot::fresh(cfg, lanes),
            )),
            (None, _) => None,
        };
        let alphas = match (self.memory, &self.config.memory) {
            (Some(ids), Some(cfg)) => (0..cfg.num_read_heads)
                .map(|h| tape.slice(bound.var(ids.alpha), h, 1))
                .collect::<std::result::Result<Vec<_>, _>>()?,
            _ => Vec::new(),
        };
        let read_width = self.config.read_width();
        let mut prev_reads = if read_width > 0 {
            Some(tape.constant(Tensor::zeros(&[lanes, read_width])))
        } else {
            None
        };

        let mut outputs = Vec::with_capacity(batch.steps);
        for t in 0..batch.steps {
            let xy = tape.constant(batch.step_inputs(t));
            let input = match prev_reads {
                Some(r) => tape.concat(&[xy, r])?,
                None => xy,
            };
            controller = match self.controller {
                ControllerIds::Lstm { w_x, w_h, b } => lstm_step(
                    tape,
                    input,
                    &controller,
                    LstmParams {
                        w_x: bound.var(w_x),
                        w_h: bound.var(w_h),
                        b: bound.var(b),
                    },
                )?,
                ControllerIds::Feedforward { w1, b1, w2, b2 } => {
                    let h = feedforward_step(
                        tape,
                        input,
                        [bound.var(w1), bound.var(b1), bound.var(w2), bound.var(b2)],
                    )?;
                    ControllerState { h, c: controller.c }
                }
            };

            let o = match (&mut memory, self.memory, &self.config.memory) {
                (Some(state), Some(ids), Some(cfg)) => {
                    let keys = project_keys(
                        tape,
                        controller.h,
                        bound.var(ids.keys_w),
                        bound.var(ids.keys_b),
                        cfg,
                    )?;
                    let (reads, next) = memory_step(tape, cfg, state, &keys, &alphas)?;
                    *state = next;
                    let r = if options.ablate_memory {
                        tape.constant(Tensor::zeros(&[lanes, read_width]))
                    } else {
                        tape.concat(&reads)?
                    };
                    prev_reads = Some(r);
                    tape.concat(&[controller.h, r])?
                }
                _ => controller.h,
            };

            let (w, b) = (bound.var(self.out_w), bound.var(self.out_b));
            outputs.push(match self.config.output {
                OutputKind::Categorical { .. } => {
                    HeadOutput::Probabilities(categorical_head(tape, o, w, b)?)
                }
                OutputKind::String => HeadOutput::Probabilities(string_head(tape, o, w, b)?),
                OutputKind::Gaussian => {
                    let (mean, std) = gaussian_head(tape, o, w, b)?;
                    HeadOutput::Gaussian { mean, std }
                }
            });
        }
        Ok(ForwardPass {
            params: bound,
            outputs,
            controller,
            memory,
        })
    }

    /// Memory-augmented forward pass; errors on a memory-less model.
    pub fn mann_forward(
        &self,
        tape: &mut Tape,
        batch: &SequenceBatch,
        options: &ForwardOptions,
    ) -> Result<ForwardPass> {
        if self.config.memory.is_none() {
            return Err(MannError::Config(
                "mann_forward needs a memory configuration".into(),
            ));
        }
        self.forward(tape, batch, options)
    }

    /// Memory-less baseline forward pass.
    pub fn baseline_forward(&self, tape: &mut Tape, batch: &SequenceBatch) -> Result<ForwardPass> {
        if self.config.memory.is_some() {
            return Err(MannError::Config(
                "baseline_forward needs a model without memory".into(),
            ));
        }
        self.forward(tape, batch, &ForwardOptions::default())
    }

    /// Summed episode loss over every step and lane.
    pub fn episode_loss(
        &self,
        tape: &mut Tape,
        outputs: &[HeadOutput],
        batch: &SequenceBatch,
    ) -> Result<Var> {
        match self.config.output {
            OutputKind::Categorical { .. } | OutputKind::String => {
                let probs = outputs
                    .iter()
                    .map(|o| match o {
                        HeadOutput::Probabilities(p) => Ok(*p),
                        HeadOutput::Gaussian { .. } => {
                            Err(MannError::InvalidArgument("expected probabilities".into()))
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                let targets: Vec<Tensor> =
                    (0..batch.steps).map(|t| batch.step_targets(t)).collect();
                if self.config.output == OutputKind::String {
                    episode_loss_string(tape, &probs, &targets)
                } else {
                    episode_loss_onehot(tape, &probs, &targets)
                }
            }
            OutputKind::Gaussian => {
                let mut means = Vec::with_capacity(outputs.len());
                let mut stds = Vec::with_capacity(outputs.len());
                for o in outputs {
                    match o {
                        HeadOutput::Gaussian { mean, std } => {
                            means.push(*mean);
                            stds.push(*std);
                        }
                        HeadOutput::Probabilities(_) => {
                            return Err(MannError::InvalidArgument(
                                "expected a gaussian head".into(),
                            ))
                        }
                    }
                }
                let targets: Vec<Tensor> =
                    (0..batch.steps).map(|t| batch.step_targets(t)).collect();
                episode_loss_gaussian(tape, &means, &stds, &targets)
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LstmParams {
    /// `[input, 4·hidden]`, gate blocks ordered forget, input, output, candidate.
    pub w_x: Var,
    /// `[hidden, 4·hidden]`
    pub w_h: Var,
    /// `[4·hidden]`
    pub b: Var,
}

/// One LSTM update:
/// `ĝ = W_x x + W_h h + b`, gates σ, candidate tanh,
/// `c = g_f⊙c + g_i⊙u`, `h = g_o⊙tanh(c)`.
pub fn lstm_step(
    tape: &mut Tape,
    input: Var,
    state: &ControllerState,
    p: LstmParams,
) -> Result<ControllerState> {
    let hidden = tape.shape(state.h)[1];
    let a = tape.matmul(input, p.w_x)?;
    let r = tape.matmul(state.h, p.w_h)?;
    let pre = tape.add(a, r)?;
    let pre = tape.add_row(pre, p.b)?;
    let gates_hat = tape.slice(pre, 0, 3 * hidden)?;
    let gates = tape.sigmoid(gates_hat)?;
    let forget = tape.slice(gates, 0, hidden)?;
    let input_gate = tape.slice(gates, hidden, hidden)?;
    let output_gate = tape.slice(gates, 2 * hidden, hidden)?;
    let u_hat = tape.slice(pre, 3 * hidden, hidden)?;
    let u = tape.tanh(u_hat)?;
    let kept = tape.mul(forget, state.c)?;
    let fresh = tape.mul(input_gate, u)?;
    let c = tape.add(kept, fresh)?;
    let tc = tape.tanh(c)?;
    let h = tape.mul(output_gate, tc)?;
    Ok(ControllerState { h, c })
}

/// Two tanh layers; `[w1, b1, w2, b2]`.
pub fn feedforward_step(tape: &mut Tape, input: Var, p: [Var; 4]) -> Result<Var> {
    let a = tape.matmul(input, p[0])?;
    let a = tape.add_row(a, p[1])?;
    let h1 = tape.tanh(a)?;
    let b = tape.matmul(h1, p[2])?;
    let b = tape.add_row(b, p[3])?;
    Ok(tape.tanh(b)?)
}

/// One key per read head from independent affine maps of `h`
/// (columns `[i·width, (i+1)·width)` of `w` belong to head `i`).
pub fn project_keys(
    tape: &mut Tape,
    h: Var,
    w: Var,
    b: Var,
    memory: &MemoryConfig,
) -> Result<Vec<Var>> {
    let all = tape.matmul(h, w)?;
    let all = tape.add_row(all, b)?;
    (0..memory.num_read_heads)
        .map(|i| Ok(tape.slice(all, i * memory.slot_width, memory.slot_width)?))
        .collect()
}

fn linear(tape: &mut Tape, o: Var, w: Var, b: Var) -> Result<Var> {
    let z = tape.matmul(o, w)?;
    Ok(tape.add_row(z, b)?)
}

/// Softmax over the linear output.
pub fn categorical_head(tape: &mut Tape, o: Var, w: Var, b: Var) -> Result<Var> {
    let z = linear(tape, o, w, b)?;
    Ok(tape.softmax(z)?)
}

/// 25 logits split into five independent 5-way softmaxes; the result keeps
/// the flat `[lanes, 25]` layout.
pub fn string_head(tape: &mut Tape, o: Var, w: Var, b: Var) -> Result<Var> {
    let z = linear(tape, o, w, b)?;
    let lanes = tape.shape(z)[0];
    let chunks = tape.reshape(z, &[lanes, STRING_CHUNKS, STRING_ALPHABET])?;
    let p = tape.softmax(chunks)?;
    Ok(tape.reshape(p, &[lanes, STRING_CHUNKS * STRING_ALPHABET])?)
}

/// Mean and standard deviation, `σ = softplus(raw) + SIGMA_FLOOR`.
pub fn gaussian_head(tape: &mut Tape, o: Var, w: Var, b: Var) -> Result<(Var, Var)> {
    let z = linear(tape, o, w, b)?;
    let mean = tape.slice(z, 0, 1)?;
    let raw = tape.slice(z, 1, 1)?;
    let sp = tape.softplus(raw)?;
    let std = tape.affine(sp, 1.0, SIGMA_FLOOR)?;
    Ok((mean, std))
}

fn check_one_hot(rows: &Tensor, chunk: usize) -> Result<()> {
    for (i, c) in rows.data().chunks_exact(chunk).enumerate() {
        let ones = c.iter().filter(|&&v| v == 1.0).count();
        let zeros = c.iter().filter(|&&v| v == 0.0).count();
        if ones != 1 || ones + zeros != chunk {
            return Err(MannError::Label(format!(
                "target chunk {i} is not one-hot: {c:?}"
            )));
        }
    }
    Ok(())
}

fn cross_entropy(tape: &mut Tape, probs: &[Var], targets: &[Tensor]) -> Result<Var> {
    if probs.len() != targets.len() {
        return Err(MannError::InvalidArgument(
            "probabilities and targets differ in length".into(),
        ));
    }
    let mut total: Option<Var> = None;
    for (&p, y) in probs.iter().zip(targets) {
        let lp = tape.log(p)?;
        let y = tape.constant(y.clone());
        let m = tape.mul(y, lp)?;
        let s = tape.sum(m)?;
        total = Some(match total {
            Some(acc) => tape.add(acc, s)?,
            None => s,
        });
    }
    match total {
        Some(t) => Ok(tape.scale(t, -1.0)?),
        None => Ok(tape.constant(Tensor::scalar(0.0))),
    }
}

/// `−Σ_t y_tᵀ log p_t` for one-hot targets.
pub fn episode_loss_onehot(tape: &mut Tape, probs: &[Var], targets: &[Tensor]) -> Result<Var> {
    for y in targets {
        check_one_hot(y, y.last_dim())?;
    }
    cross_entropy(tape, probs, targets)
}

/// `−Σ_t Σ_c y_t(c)ᵀ log p_t(c)` for five-hot string targets.
pub fn episode_loss_string(tape: &mut Tape, probs: &[Var], targets: &[Tensor]) -> Result<Var> {
    for y in targets {
        if y.last_dim() != STRING_CHUNKS * STRING_ALPHABET {
            return Err(MannError::Label(format!(
                "string target width {} != 25",
                y.last_dim()
            )));
        }
        check_one_hot(y, STRING_ALPHABET)?;
    }
    cross_entropy(tape, probs, targets)
}

/// `Σ_t ½ln(2πσ²) + (y − μ)²/(2σ²)`.
pub fn episode_loss_gaussian(
    tape: &mut Tape,
    means: &[Var],
    stds: &[Var],
    targets: &[Tensor],
) -> Result<Var> {
    if means.len() != stds.len() || means.len() != targets.len() {
        return Err(MannError::InvalidArgument(
            "gaussian loss inputs differ in length".into(),
        ));
    }
    let half_log_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
    let mut total: Option<Var> = None;
    for ((&mu, &sigma), y) in means.iter().zip(stds).zip(targets) {
        if tape.value(sigma).data().iter().any(|&s| !(s > 0.0)) {
            return Err(MannError::InvalidArgument(
                "gaussian sigma must be positive".into(),
            ));
        }
        let y = tape.constant(y.clone());
        let diff = tape.sub(y, mu)?;
        let z = tape.div(diff, sigma)?;
        let z2 = tape.mul(z, z)?;
        let quad = tape.scale(z2, 0.5)?;
        let log_sigma = tape.log(sigma)?;
        let per = tape.add(quad, log_sigma)?;
        let s = tape.sum(per)?;
        let n = tape.value(sigma).len() as f64;
        let s = tape.affine(s, 1.0, n * half_log_2pi)?;
        total = Some(match total {
            Some(acc) => tape.add(acc, s)?,
            None => s,
        });
    }
    match total {
        Some(t) => Ok(t),
        None => Ok(tape.constant(Tensor::scalar(0.0))),
    }
}

/// Index of the largest element (first on ties).
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Decodes a label vector to an index: the argmax for one-hot labels, or
/// the base-5 word index built from the per-chunk argmaxes for strings.
pub fn decode_label(output: &OutputKind, v: &[f64]) -> usize {
    match output {
        OutputKind::String => v
            .chunks_exact(STRING_ALPHABET)
            .fold(0, |acc, c| acc * STRING_ALPHABET + argmax(c)),
        _ => argmax(v),
    }
}
