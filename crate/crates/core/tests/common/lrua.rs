//! Plain-loop reference simulator of the LRUA memory step.

use mann_autodiff::{Tape, Tensor};
use mann_core::memory::{memory_step, MemoryConfig, MemorySnapshot, MemoryState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One lane of memory state, every weighting held explicitly.
#[derive(Clone, Debug)]
pub struct RefState {
    pub m: Vec<Vec<f64>>,
    pub w_r: Vec<Vec<f64>>,
    pub w_w: Vec<Vec<f64>>,
    pub w_u: Vec<f64>,
    pub w_lu: Vec<f64>,
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn nth_smallest(v: &[f64], n: usize) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    s[n - 1]
}

pub fn ref_step(
    s: &RefState,
    keys: &[Vec<f64>],
    alphas: &[f64],
    gamma: f64,
) -> (Vec<Vec<f64>>, RefState) {
    let slots = s.m.len();
    let heads = keys.len();
    let lu_total: f64 = s.w_lu.iter().sum();
    let mut w_w = vec![vec![0.0; slots]; heads];
    for h in 0..heads {
        let g = sigmoid(alphas[h]);
        for i in 0..slots {
            w_w[h][i] = g * s.w_r[h][i] + (1.0 - g) * s.w_lu[i] / lu_total;
        }
    }
    let mut m = s.m.clone();
    let mut zero = 0;
    for i in 1..slots {
        if s.w_u[i] < s.w_u[zero] {
            zero = i;
        }
    }
    for x in m[zero].iter_mut() {
        *x = 0.0;
    }
    for h in 0..heads {
        for i in 0..slots {
            for j in 0..keys[h].len() {
                m[i][j] += w_w[h][i] * keys[h][j];
            }
        }
    }
    let mut reads = Vec::new();
    let mut w_r = Vec::new();
    for key in keys {
        let kn = key.iter().map(|x| x * x).sum::<f64>().sqrt();
        let sims: Vec<f64> = m
            .iter()
            .map(|row| {
                let dot: f64 = row.iter().zip(key).map(|(a, b)| a * b).sum();
                let rn = row.iter().map(|x| x * x).sum::<f64>().sqrt();
                dot / (kn * rn + 1e-8)
            })
            .collect();
        let mx = sims.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = sims.iter().map(|x| (x - mx).exp()).collect();
        let z: f64 = e.iter().sum();
        let w: Vec<f64> = e.iter().map(|x| x / z).collect();
        let mut r = vec![0.0; key.len()];
        for i in 0..slots {
            for j in 0..key.len() {
                r[j] += w[i] * m[i][j];
            }
        }
        reads.push(r);
        w_r.push(w);
    }
    let mut w_u: Vec<f64> = s.w_u.iter().map(|u| gamma * u).collect();
    for h in 0..heads {
        for i in 0..slots {
            w_u[i] += w_r[h][i] + w_w[h][i];
        }
    }
    let threshold = nth_smallest(&w_u, heads);
    let w_lu = w_u
        .iter()
        .map(|&u| if u <= threshold { 1.0 } else { 0.0 })
        .collect();
    (
        reads,
        RefState {
            m,
            w_r,
            w_w,
            w_u,
            w_lu,
        },
    )
}

pub fn fresh_ref(slots: usize, width: usize, heads: usize) -> RefState {
    RefState {
        m: vec![vec![1e-6; width]; slots],
        w_r: vec![vec![1.0 / slots as f64; slots]; heads],
        w_w: vec![vec![0.0; slots]; heads],
        w_u: vec![0.0; slots],
        w_lu: vec![1.0; slots],
    }
}

pub fn to_snapshot(lanes: &[RefState]) -> MemorySnapshot {
    let slots = lanes[0].m.len();
    let width = lanes[0].m[0].len();
    let heads = lanes[0].w_r.len();
    let b = lanes.len();
    let flat_m: Vec<f64> = lanes
        .iter()
        .flat_map(|s| s.m.iter().flatten().copied())
        .collect();
    let per_head = |f: &dyn Fn(&RefState, usize) -> Vec<f64>| -> Vec<Tensor> {
        (0..heads)
            .map(|h| {
                Tensor::new(&[b, slots], lanes.iter().flat_map(|s| f(s, h)).collect()).unwrap()
            })
            .collect()
    };
    MemorySnapshot {
        memory: Tensor::new(&[b, slots, width], flat_m).unwrap(),
        read_weights: per_head(&|s, h| s.w_r[h].clone()),
        write_weights: per_head(&|s, h| s.w_w[h].clone()),
        usage: Tensor::new(
            &[b, slots],
            lanes.iter().flat_map(|s| s.w_u.clone()).collect(),
        )
        .unwrap(),
        least_used: Tensor::new(
            &[b, slots],
            lanes.iter().flat_map(|s| s.w_lu.clone()).collect(),
        )
        .unwrap(),
    }
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn assert_matches(snap: &MemorySnapshot, lanes: &[RefState], tol: f64) {
    let expected = to_snapshot(lanes);
    assert!(
        max_diff(snap.memory.data(), expected.memory.data()) <= tol,
        "memory"
    );
    assert!(
        max_diff(snap.usage.data(), expected.usage.data()) <= tol,
        "usage"
    );
    assert_eq!(
        snap.least_used.data(),
        expected.least_used.data(),
        "least used"
    );
    for h in 0..expected.read_weights.len() {
        assert!(
            max_diff(snap.read_weights[h].data(), expected.read_weights[h].data()) <= tol,
            "read weights"
        );
        assert!(
            max_diff(
                snap.write_weights[h].data(),
                expected.write_weights[h].data()
            ) <= tol,
            "write weights"
        );
    }
}

/// Advances the implementation one step from `snap`; returns reads per head.
pub fn impl_step(
    cfg: &MemoryConfig,
    snap: &MemorySnapshot,
    keys: &[Tensor],
    alphas: &[f64],
) -> (Vec<Tensor>, MemorySnapshot) {
    let mut tape = Tape::new();
    let state = MemoryState::attach(&mut tape, snap);
    let kv: Vec<_> = keys.iter().map(|k| tape.constant(k.clone())).collect();
    let av: Vec<_> = alphas
        .iter()
        .map(|&a| tape.constant(Tensor::scalar(a)))
        .collect();
    let (reads, next) = memory_step(&mut tape, cfg, &state, &kv, &av).unwrap();
    let reads = reads.iter().map(|&r| tape.value(r).clone()).collect();
    (reads, next.snapshot(&tape))
}

/// Random mid-episode state with usage drawn from a few values, so zeroing
/// and least-used thresholds hit ties.
pub fn tied_ref<R: Rng>(slots: usize, width: usize, heads: usize, rng: &mut R) -> RefState {
    let mut dist = || {
        let raw: Vec<f64> = (0..slots).map(|_| rng.random_range(0.01..1.0)).collect();
        let z: f64 = raw.iter().sum();
        raw.iter().map(|x| x / z).collect::<Vec<f64>>()
    };
    let w_r = (0..heads).map(|_| dist()).collect();
    let w_w = (0..heads).map(|_| dist()).collect();
    let w_u: Vec<f64> = (0..slots)
        .map(|_| [0.0, 0.5, 1.0][rng.random_range(0..3)])
        .collect();
    let threshold = nth_smallest(&w_u, heads.min(slots));
    RefState {
        m: (0..slots)
            .map(|_| (0..width).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect(),
        w_r,
        w_w,
        w_lu: w_u
            .iter()
            .map(|&u| if u <= threshold { 1.0 } else { 0.0 })
            .collect(),
        w_u,
    }
}

pub fn run_trajectory(slots: usize, steps: usize, seed: u64) {
    run_sequence(slots, steps, seed, false);
}

pub fn run_sequence(slots: usize, steps: usize, seed: u64, tied_start: bool) {
    let (width, heads, lanes) = (5, 4, 2);
    let cfg = MemoryConfig {
        num_slots: slots,
        slot_width: width,
        num_read_heads: heads,
        usage_decay: 0.99,
        strict_cosine: false,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alphas: Vec<f64> = (0..heads).map(|_| rng.random_range(-2.0..2.0)).collect();
    let (mut reference, mut snap) = if tied_start {
        let lanes: Vec<RefState> = (0..lanes)
            .map(|_| tied_ref(slots, width, heads, &mut rng))
            .collect();
        let snap = to_snapshot(&lanes);
        (lanes, snap)
    } else {
        (
            vec![fresh_ref(slots, width, heads); lanes],
            MemorySnapshot::fresh(&cfg, lanes),
        )
    };
    assert_matches(&snap, &reference, 0.0);
    for _ in 0..steps {
        let keys: Vec<Vec<Vec<f64>>> = (0..lanes)
            .map(|_| {
                (0..heads)
                    .map(|_| (0..width).map(|_| rng.random_range(-1.0..1.0)).collect())
                    .collect()
            })
            .collect();
        let key_tensors: Vec<Tensor> = (0..heads)
            .map(|h| {
                Tensor::new(
                    &[lanes, width],
                    (0..lanes).flat_map(|l| keys[l][h].clone()).collect(),
                )
                .unwrap()
            })
            .collect();
        let (reads, next) = impl_step(&cfg, &snap, &key_tensors, &alphas);
        for l in 0..lanes {
            let (ref_reads, ref_next) = ref_step(&reference[l], &keys[l], &alphas, 0.99);
            for h in 0..heads {
                assert!(max_diff(reads[h].row(l), &ref_reads[h]) <= 1e-10);
            }
            reference[l] = ref_next;
        }
        assert_matches(&next, &reference, 1e-10);
        snap = next;
    }
}
