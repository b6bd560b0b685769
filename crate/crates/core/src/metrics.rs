//! Per-instance accuracy bookkeeping and CSV export.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::episodes::Split;
use crate::error::{MannError, Result};

/// Occurrence counts reported as accuracy columns.
pub const INSTANCES: [usize; 6] = [1, 2, 3, 4, 5, 10];

pub const CLASSIFICATION_HEADER: [&str; 9] = [
    "episode", "split", "inst1", "inst2", "inst3", "inst4", "inst5", "inst10", "loss",
];
pub const REGRESSION_HEADER: [&str; 4] = ["episode", "step", "model_nll", "gp_nll"];

/// Accuracy at each entry of [`INSTANCES`]; `None` where no step had that
/// occurrence count.
pub type InstanceAccuracy = [Option<f64>; 6];

/// Running per-episode average of instance-k accuracy.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AccuracyTally {
    sums: [f64; 6],
    episodes: [usize; 6],
    loss_sum: f64,
    loss_count: usize,
}

impl AccuracyTally {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one episode: `correct[t]` and `instance_index[t]` per step.
    pub fn add_episode(&mut self, correct: &[bool], instance_index: &[usize]) {
        for (slot, &k) in INSTANCES.iter().enumerate() {
            let (mut hits, mut total) = (0usize, 0usize);
            for (&c, &i) in correct.iter().zip(instance_index) {
                if i == k {
                    total += 1;
                    hits += c as usize;
                }
            }
            if total > 0 {
                self.sums[slot] += hits as f64 / total as f64;
                self.episodes[slot] += 1;
            }
        }
    }

    pub fn add_loss(&mut self, loss: f64) {
        self.loss_sum += loss;
        self.loss_count += 1;
    }

    pub fn accuracy(&self) -> InstanceAccuracy {
        let mut out = [None; 6];
        for (slot, o) in out.iter_mut().enumerate() {
            if self.episodes[slot] > 0 {
                *o = Some(self.sums[slot] / self.episodes[slot] as f64);
            }
        }
        out
    }

    /// Mean loss per added episode, zero when none were added.
    pub fn mean_loss(&self) -> f64 {
        if self.loss_count == 0 {
            0.0
        } else {
            self.loss_sum / self.loss_count as f64
        }
    }

    pub fn is_empty(&self) -> bool {
        self.loss_count == 0 && self.episodes.iter().all(|&e| e == 0)
    }
}

/// Accuracy at each instance count, averaged over episodes.
pub fn per_instance_accuracy(
    correct: &[Vec<bool>],
    instance_index: &[Vec<usize>],
) -> InstanceAccuracy {
    let mut tally = AccuracyTally::new();
    for (c, i) in correct.iter().zip(instance_index) {
        tally.add_episode(c, i);
    }
    tally.accuracy()
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRecord {
    pub episode: usize,
    pub split: Split,
    pub accuracy: InstanceAccuracy,
    pub loss: f64,
}

impl MetricsRecord {
    pub fn instance(&self, k: usize) -> Option<f64> {
        INSTANCES
            .iter()
            .position(|&i| i == k)
            .and_then(|slot| self.accuracy[slot])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionRecord {
    pub episode: usize,
    pub step: usize,
    pub model_nll: f64,
    pub gp_nll: f64,
}

#[derive(Serialize, Deserialize)]
struct ClassificationRow {
    episode: usize,
    split: Split,
    inst1: Option<f64>,
    inst2: Option<f64>,
    inst3: Option<f64>,
    inst4: Option<f64>,
    inst5: Option<f64>,
    inst10: Option<f64>,
    loss: f64,
}

impl From<&MetricsRecord> for ClassificationRow {
    fn from(r: &MetricsRecord) -> Self {
        let a = r.accuracy;
        Self {
            episode: r.episode,
            split: r.split,
            inst1: a[0],
            inst2: a[1],
            inst3: a[2],
            inst4: a[3],
            inst5: a[4],
            inst10: a[5],
            loss: r.loss,
        }
    }
}

impl From<ClassificationRow> for MetricsRecord {
    fn from(r: ClassificationRow) -> Self {
        Self {
            episode: r.episode,
            split: r.split,
            accuracy: [r.inst1, r.inst2, r.inst3, r.inst4, r.inst5, r.inst10],
            loss: r.loss,
        }
    }
}

pub fn write_classification_csv<W: Write>(writer: W, records: &[MetricsRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(writer);
    w.write_record(CLASSIFICATION_HEADER)?;
    for r in records {
        w.serialize(ClassificationRow::from(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_classification_csv<R: Read>(reader: R) -> Result<Vec<MetricsRecord>> {
    let mut r = csv::Reader::from_reader(reader);
    check_header(r.headers()?, &CLASSIFICATION_HEADER)?;
    r.deserialize::<ClassificationRow>()
        .map(|row| Ok(row?.into()))
        .collect()
}

pub fn write_regression_csv<W: Write>(writer: W, records: &[RegressionRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(writer);
    w.write_record(REGRESSION_HEADER)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_regression_csv<R: Read>(reader: R) -> Result<Vec<RegressionRecord>> {
    let mut r = csv::Reader::from_reader(reader);
    check_header(r.headers()?, &REGRESSION_HEADER)?;
    r.deserialize().map(|row| Ok(row?)).collect()
}

fn check_header(found: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    if found.iter().eq(expected.iter().copied()) {
        Ok(())
    } else {
        Err(MannError::InvalidArgument(format!(
            "unexpected CSV header {:?}, expected {expected:?}",
            found.iter().collect::<Vec<_>>()
        )))
    }
}

/// Writes the classification and (if any) regression records under `dir`.
pub fn export_metrics(
    dir: &Path,
    records: &[MetricsRecord],
    regression: Option<&[RegressionRecord]>,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_classification_csv(std::fs::File::create(dir.join("metrics.csv"))?, records)?;
    if let Some(reg) = regression {
        write_regression_csv(std::fs::File::create(dir.join("regression.csv"))?, reg)?;
    }
    Ok(())
}
