//! External memory with content-based reads and least-recently-used writes.
//!
//! All tensors carry a leading lane (episode) axis: the memory is
//! `[lanes, slots, width]` and every weighting is `[lanes, slots]`.
//! Read weights, write weights and the memory itself live on the tape;
//! usage and least-used bookkeeping are plain values because they are
//! piecewise constant in the inputs.

use mann_autodiff::{Tape, Tensor, Var};
use serde::{Deserialize, Serialize};

use crate::error::{MannError, Result};

/// Initial value of every memory cell, so the first cosine read is defined.
pub const MEMORY_INIT: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryConfig {
    pub num_slots: usize,
    pub slot_width: usize,
    pub num_read_heads: usize,
    /// Decay γ applied to the previous usage weights.
    pub usage_decay: f64,
    /// Reject zero-norm keys instead of relying on the ε guard.
    #[serde(default)]
    pub strict_cosine: bool,
}

impl Default for MemoryConfig {
    fn default() -> Self {
        Self {
            num_slots: 128,
            slot_width: 40,
            num_read_heads: 4,
            usage_decay: 0.99,
            strict_cosine: false,
        }
    }
}

impl MemoryConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_slots == 0 || self.slot_width == 0 || self.num_read_heads == 0 {
            return Err(MannError::Config(
                "memory dimensions must be positive".into(),
            ));
        }
        if self.num_read_heads > self.num_slots {
            return Err(MannError::Config(format!(
                "{} read heads exceed {} memory slots",
                self.num_read_heads, self.num_slots
            )));
        }
        if !(0.0..1.0).contains(&self.usage_decay) {
            return Err(MannError::Config("usage_decay must lie in [0, 1)".into()));
        }
        Ok(())
    }

    /// Width of all head reads concatenated.
    pub fn read_width(&self) -> usize {
        self.num_read_heads * self.slot_width
    }
}

/// Memory state as plain values, detached from any tape.
///
/// This is what persists between episodes and what gets checkpointed.
#[derive(Clone, Debug, PartialEq)]
pub struct MemorySnapshot {
    pub memory: Tensor,
    pub read_weights: Vec<Tensor>,
    pub write_weights: Vec<Tensor>,
    pub usage: Tensor,
    /// Shared by every head: usage is shared and `n` is the head count.
    pub least_used: Tensor,
}

impl MemorySnapshot {
    /// Start-of-episode state: constant memory, uniform reads, zero usage
    /// (so every slot ties as least used) and zero write weights.
    pub fn fresh(config: &MemoryConfig, lanes: usize) -> Self {
        let (s, w) = (config.num_slots, config.slot_width);
        let usage = Tensor::zeros(&[lanes, s]);
        let least_used = least_used_weights(&usage, config.num_read_heads).expect("n <= slots");
        Self {
            memory: Tensor::full(&[lanes, s, w], MEMORY_INIT),
            read_weights: vec![Tensor::full(&[lanes, s], 1.0 / s as f64); config.num_read_heads],
            write_weights: vec![Tensor::zeros(&[lanes, s]); config.num_read_heads],
            usage,
            least_used,
        }
    }

    /// Keeps memory contents and usage, resets read and write weightings
    /// to their start-of-episode values.
    pub fn carry_over(&self, config: &MemoryConfig) -> Self {
        let lanes = self.lanes();
        let mut next = Self::fresh(config, lanes);
        next.memory = self.memory.clone();
        next.usage = self.usage.clone();
        next.least_used =
            least_used_weights(&self.usage, config.num_read_heads).expect("n <= slots");
        next
    }

    pub fn lanes(&self) -> usize {
        self.memory.shape()[0]
    }

    /// Named records for embedding in a checkpoint file.
    pub fn records(&self) -> Vec<(String, Tensor)> {
        let mut out = vec![
            ("memory.M".to_owned(), self.memory.clone()),
            ("memory.usage".to_owned(), self.usage.clone()),
            ("memory.least_used".to_owned(), self.least_used.clone()),
        ];
        for (h, (r, w)) in self
            .read_weights
            .iter()
            .zip(&self.write_weights)
            .enumerate()
        {
            out.push((format!("memory.read_weights.{h}"), r.clone()));
            out.push((format!("memory.write_weights.{h}"), w.clone()));
        }
        out
    }

    pub fn from_records(records: &[(String, Tensor)]) -> Result<Self> {
        let find = |name: &str| {
            records
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, t)| t.clone())
                .ok_or_else(|| MannError::InvalidArgument(format!("missing record {name}")))
        };
        let heads = records
            .iter()
            .filter(|(n, _)| n.starts_with("memory.read_weights."))
            .count();
        Ok(Self {
            memory: find("memory.M")?,
            usage: find("memory.usage")?,
            least_used: find("memory.least_used")?,
            read_weights: (0..heads)
                .map(|h| find(&format!("memory.read_weights.{h}")))
                .collect::<Result<_>>()?,
            write_weights: (0..heads)
                .map(|h| find(&format!("memory.write_weights.{h}")))
                .collect::<Result<_>>()?,
        })
    }
}

/// Memory state during a forward pass.
#[derive(Clone, Debug)]
pub struct MemoryState {
    pub memory: Var,
    pub read_weights: Vec<Var>,
    pub write_weights: Vec<Var>,
    pub usage: Tensor,
    pub least_used: Tensor,
}

impl MemoryState {
    /// Places a snapshot on `tape` as constants (no gradient into the past).
    pub fn attach(tape: &mut Tape, snapshot: &MemorySnapshot) -> Self {
        Self {
            memory: tape.constant(snapshot.memory.clone()),
            read_weights: snapshot
                .read_weights
                .iter()
                .map(|t| tape.constant(t.clone()))
                .collect(),
            write_weights: snapshot
                .write_weights
                .iter()
                .map(|t| tape.constant(t.clone()))
                .collect(),
            usage: snapshot.usage.clone(),
            least_used: snapshot.least_used.clone(),
        }
    }

    pub fn snapshot(&self, tape: &Tape) -> MemorySnapshot {
        MemorySnapshot {
            memory: tape.value(self.memory).clone(),
            read_weights: self
                .read_weights
                .iter()
                .map(|&v| tape.value(v).clone())
                .collect(),
            write_weights: self
                .write_weights
                .iter()
                .map(|&v| tape.value(v).clone())
                .collect(),
            usage: self.usage.clone(),
            least_used: self.least_used.clone(),
        }
    }
}

/// `K(k, M(i)) = k·M(i) / (‖k‖‖M(i)‖ + ε)` for every slot.
pub fn cosine_similarity(tape: &mut Tape, key: Var, memory: Var, strict: bool) -> Result<Var> {
    if strict {
        let k = tape.value(key);
        let zero_row = k
            .data()
            .chunks_exact(k.last_dim())
            .any(|r| r.iter().all(|&x| x == 0.0));
        if zero_row {
            return Err(MannError::ZeroNormKey);
        }
    }
    Ok(tape.cosine_similarity(key, memory)?)
}

/// Softmax of the similarities over slots.
pub fn read_weights(tape: &mut Tape, similarities: Var) -> Result<Var> {
    Ok(tape.softmax(similarities)?)
}

/// `r = Σ_i w_r(i) M(i)`.
pub fn read_memory(tape: &mut Tape, weights: Var, memory: Var) -> Result<Var> {
    Ok(tape.weighted_read(weights, memory)?)
}

/// `w_u = γ w_u_prev + Σ_heads w_r + Σ_heads w_w`.
pub fn update_usage(
    previous: &Tensor,
    reads: &[&Tensor],
    writes: &[&Tensor],
    decay: f64,
) -> Result<Tensor> {
    let mut out: Vec<f64> = previous.data().iter().map(|u| decay * u).collect();
    for w in reads.iter().chain(writes) {
        if w.shape() != previous.shape() {
            return Err(MannError::InvalidArgument(format!(
                "usage update: weighting shape {:?} vs usage {:?}",
                w.shape(),
                previous.shape()
            )));
        }
        for (o, x) in out.iter_mut().zip(w.data()) {
            *o += x;
        }
    }
    Ok(Tensor::new(previous.shape(), out)?)
}

/// `w_lu(i) = 1` iff `w_u(i)` is at most the `n`-th smallest usage in its
/// row. Ties can make more than `n` entries one.
pub fn least_used_weights(usage: &Tensor, n: usize) -> Result<Tensor> {
    let slots = usage.last_dim();
    if n == 0 || n > slots {
        return Err(MannError::InvalidArgument(format!(
            "least-used count {n} must lie in 1..={slots}"
        )));
    }
    let mut out = Vec::with_capacity(usage.len());
    let mut sorted = vec![0.0; slots];
    for row in usage.data().chunks_exact(slots) {
        sorted.copy_from_slice(row);
        sorted.sort_by(f64::total_cmp);
        let threshold = sorted[n - 1];
        out.extend(row.iter().map(|&u| if u <= threshold { 1.0 } else { 0.0 }));
    }
    Ok(Tensor::new(usage.shape(), out)?)
}

/// Rows of `t` scaled to sum to one.
fn normalize_rows(t: &Tensor) -> Tensor {
    let w = t.last_dim();
    let mut out = t.data().to_vec();
    for row in out.chunks_exact_mut(w) {
        let total: f64 = row.iter().sum();
        if total > 0.0 {
            row.iter_mut().for_each(|x| *x /= total);
        }
    }
    Tensor::new(t.shape(), out).expect("same shape")
}

/// `w_w = σ(α) w_r_prev + (1 − σ(α)) normalize(w_lu_prev)`, with `alpha`
/// a one-element variable. No gradient flows into `least_used_prev`.
pub fn write_weights(
    tape: &mut Tape,
    read_prev: Var,
    least_used_prev: &Tensor,
    alpha: Var,
) -> Result<Var> {
    let gate = tape.sigmoid(alpha)?;
    let from_read = tape.mul_scalar(read_prev, gate)?;
    let complement = tape.affine(gate, -1.0, 1.0)?;
    let lu = tape.constant(normalize_rows(least_used_prev));
    let from_lu = tape.mul_scalar(lu, complement)?;
    Ok(tape.add(from_read, from_lu)?)
}

/// Multiplicative keep-mask that zeroes, per lane, the least used slot
/// (lowest index among ties).
pub fn zeroing_mask(usage_prev: &Tensor) -> Tensor {
    let slots = usage_prev.last_dim();
    let mut keep = Tensor::ones(usage_prev.shape());
    for (lane, row) in usage_prev.data().chunks_exact(slots).enumerate() {
        let mut best = 0;
        for (i, &u) in row.iter().enumerate() {
            if u < row[best] {
                best = i;
            }
        }
        keep.data_mut()[lane * slots + best] = 0.0;
    }
    keep
}

/// Zeroes each head's least-used slot, then adds `w_w(i)·k` to every slot
/// for every head in index order.
///
/// Every head selects the argmin of the shared previous usage, so exactly
/// one slot per lane is cleared.
pub fn write_memory(
    tape: &mut Tape,
    memory: Var,
    usage_prev: &Tensor,
    writes: &[(Var, Var)],
) -> Result<Var> {
    let keep = zeroing_mask(usage_prev);
    Ok(tape.memory_write(memory, keep, writes)?)
}

/// One full memory interaction: write weights from step t−1 quantities,
/// slot zeroing and write, then one content-based read per head, then the
/// usage and least-used updates.
///
/// `keys` holds one `[lanes, width]` key per head, used for both the write
/// and the read. `alphas` holds one `[1]` gate per head.
pub fn memory_step(
    tape: &mut Tape,
    config: &MemoryConfig,
    state: &MemoryState,
    keys: &[Var],
    alphas: &[Var],
) -> Result<(Vec<Var>, MemoryState)> {
    let heads = config.num_read_heads;
    if keys.len() != heads || alphas.len() != heads || state.read_weights.len() != heads {
        return Err(MannError::InvalidArgument(format!(
            "memory step expects {heads} keys, gates and read weightings"
        )));
    }
    let write_weights = state
        .read_weights
        .iter()
        .zip(alphas)
        .map(|(&r, &a)| write_weights(tape, r, &state.least_used, a))
        .collect::<Result<Vec<_>>>()?;
    let writes: Vec<(Var, Var)> = write_weights
        .iter()
        .copied()
        .zip(keys.iter().copied())
        .collect();
    let memory = write_memory(tape, state.memory, &state.usage, &writes)?;

    let mut reads = Vec::with_capacity(heads);
    let mut read_weights_now = Vec::with_capacity(heads);
    for &key in keys {
        let sims = cosine_similarity(tape, key, memory, config.strict_cosine)?;
        let w = read_weights(tape, sims)?;
        reads.push(read_memory(tape, w, memory)?);
        read_weights_now.push(w);
    }

    let r_vals: Vec<&Tensor> = read_weights_now.iter().map(|&v| tape.value(v)).collect();
    let w_vals: Vec<&Tensor> = write_weights.iter().map(|&v| tape.value(v)).collect();
    let usage = update_usage(&state.usage, &r_vals, &w_vals, config.usage_decay)?;
    let least_used = least_used_weights(&usage, heads)?;

    Ok((
        reads,
        MemoryState {
            memory,
            read_weights: read_weights_now,
            write_weights,
            usage,
            least_used,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vec_t(v: &[f64]) -> Tensor {
        Tensor::vector(v.to_vec())
    }

    fn cos(k: &[f64], row: &[f64]) -> f64 {
        let mut tape = Tape::new();
        let kv = tape.constant(vec_t(k));
        let m = tape.constant(Tensor::new(&[1, row.len()], row.to_vec()).unwrap());
        let s = cosine_similarity(&mut tape, kv, m, false).unwrap();
        tape.value(s).item()
    }

    #[test]
    fn cosine_examples() {
        assert!((cos(&[1.0, 0.0], &[1.0, 0.0]) - 1.0).abs() < 1e-7);
        assert_eq!(cos(&[1.0, 0.0], &[0.0, 1.0]), 0.0);
        assert!((cos(&[1.0, 2.0], &[2.0, 4.0]) - 1.0).abs() < 1e-7);
    }

    #[test]
    fn strict_cosine_rejects_zero_key() {
        let mut tape = Tape::new();
        let k = tape.constant(Tensor::zeros(&[2]));
        let m = tape.constant(Tensor::ones(&[3, 2]));
        assert!(matches!(
            cosine_similarity(&mut tape, k, m, true),
            Err(MannError::ZeroNormKey)
        ));
        let s = cosine_similarity(&mut tape, k, m, false).unwrap();
        assert!(tape.value(s).data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn read_weight_examples() {
        let mut tape = Tape::new();
        let s = tape.constant(vec_t(&[0.0, 0.0]));
        let w = read_weights(&mut tape, s).unwrap();
        assert_eq!(tape.value(w).data(), &[0.5, 0.5]);
        let s = tape.constant(vec_t(&[2f64.ln(), 0.0]));
        let w = read_weights(&mut tape, s).unwrap();
        let d = tape.value(w).data();
        assert!((d[0] - 2.0 / 3.0).abs() < 1e-15 && (d[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn read_memory_examples() {
        let mut tape = Tape::new();
        let m = tape.constant(
            Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 5.0], vec![7.0, 11.0]]).unwrap(),
        );
        let one_hot = tape.constant(vec_t(&[0.0, 1.0, 0.0]));
        let r = read_memory(&mut tape, one_hot, m).unwrap();
        assert_eq!(tape.value(r).data(), &[3.0, 5.0]);
        let m2 = tape.constant(Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 6.0]]).unwrap());
        let half = tape.constant(vec_t(&[0.5, 0.5]));
        let r = read_memory(&mut tape, half, m2).unwrap();
        assert_eq!(tape.value(r).data(), &[2.0, 4.0]);
    }

    #[test]
    fn usage_examples() {
        let u = update_usage(
            &vec_t(&[1.0, 0.0]),
            &[&vec_t(&[0.5, 0.5])],
            &[&vec_t(&[0.0, 1.0])],
            0.99,
        )
        .unwrap();
        assert!((u.data()[0] - 1.49).abs() < 1e-15);
        assert!((u.data()[1] - 1.50).abs() < 1e-15);
        let z = update_usage(
            &vec_t(&[0.0; 3]),
            &[&vec_t(&[0.0; 3])],
            &[&vec_t(&[0.0; 3])],
            0.99,
        )
        .unwrap();
        assert_eq!(z.data(), &[0.0; 3]);
    }

    #[test]
    fn least_used_examples() {
        let lu = least_used_weights(&vec_t(&[0.2, 0.5, 0.1, 0.9]), 2).unwrap();
        assert_eq!(lu.data(), &[1.0, 0.0, 1.0, 0.0]);
        let lu = least_used_weights(&vec_t(&[0.3; 5]), 1).unwrap();
        assert_eq!(lu.data(), &[1.0; 5]);
        assert!(least_used_weights(&vec_t(&[0.3; 5]), 6).is_err());
        assert!(least_used_weights(&vec_t(&[0.3; 5]), 0).is_err());
    }

    #[test]
    fn write_weight_examples() {
        let mut tape = Tape::new();
        let r = tape.constant(vec_t(&[1.0, 0.0]));
        let a = tape.constant(Tensor::scalar(0.0));
        let w = write_weights(&mut tape, r, &vec_t(&[0.0, 1.0]), a).unwrap();
        assert_eq!(tape.value(w).data(), &[0.5, 0.5]);

        // Large gate saturates towards the previous read weights.
        let r = tape.constant(vec_t(&[0.7, 0.2, 0.1]));
        let a = tape.constant(Tensor::scalar(40.0));
        let w = write_weights(&mut tape, r, &vec_t(&[0.0, 1.0, 1.0]), a).unwrap();
        for (x, y) in tape.value(w).data().iter().zip([0.7, 0.2, 0.1]) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn write_into_cleared_slot() {
        let mut tape = Tape::new();
        let mem = Tensor::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0]]).unwrap();
        let m = tape.constant(mem.reshaped(&[1, 3, 2]).unwrap());
        let usage = Tensor::new(&[1, 3], vec![0.5, 0.1, 0.9]).unwrap();
        let ww = tape.constant(Tensor::new(&[1, 3], vec![0.0, 1.0, 0.0]).unwrap());
        let k = tape.constant(Tensor::new(&[1, 2], vec![-4.0, 6.0]).unwrap());
        let out = write_memory(&mut tape, m, &usage, &[(ww, k)]).unwrap();
        assert_eq!(tape.value(out).data(), &[1.0, 1.0, -4.0, 6.0, 3.0, 3.0]);

        let none = tape.constant(Tensor::zeros(&[1, 3]));
        let out = write_memory(&mut tape, m, &usage, &[(none, k)]).unwrap();
        assert_eq!(tape.value(out).data(), &[1.0, 1.0, 0.0, 0.0, 3.0, 3.0]);
    }

    #[test]
    fn zeroing_ties_pick_lowest_index() {
        let keep = zeroing_mask(&Tensor::new(&[2, 3], vec![0.2, 0.1, 0.1, 0.0, 0.0, 0.0]).unwrap());
        assert_eq!(keep.data(), &[1.0, 0.0, 1.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn fresh_state_reads_constant_rows() {
        let config = MemoryConfig {
            num_slots: 6,
            slot_width: 3,
            num_read_heads: 2,
            ..MemoryConfig::default()
        };
        let mut tape = Tape::new();
        let state = MemoryState::attach(&mut tape, &MemorySnapshot::fresh(&config, 1));
        // A zero key writes nothing, leaving the constant rows (slot 0 cleared).
        let keys = vec![tape.constant(Tensor::zeros(&[1, 3])); 2];
        let alphas = vec![tape.constant(Tensor::scalar(0.0)); 2];
        let (reads, _) = memory_step(&mut tape, &config, &state, &keys, &alphas).unwrap();
        for r in reads {
            for &x in tape.value(r).data() {
                assert!((x - MEMORY_INIT * 5.0 / 6.0).abs() < 1e-18);
            }
        }
    }

    #[test]
    fn config_validation() {
        assert!(MemoryConfig::default().validate().is_ok());
        let bad = MemoryConfig {
            num_slots: 2,
            num_read_heads: 3,
            ..MemoryConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = MemoryConfig {
            usage_decay: 1.0,
            ..MemoryConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn snapshot_records_round_trip() {
        let config = MemoryConfig {
            num_slots: 4,
            slot_width: 2,
            num_read_heads: 2,
            ..MemoryConfig::default()
        };
        let snap = MemorySnapshot::fresh(&config, 3);
        let back = MemorySnapshot::from_records(&snap.records()).unwrap();
        assert_eq!(back, snap);
    }
}
