//! Evaluation diagnostics: per-expert correct sets, the diversity factor,
//! the averaged-logit ensemble, shot-group accuracy and model variance.

mod dump;

use std::collections::BTreeSet;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

pub use dump::{DumpRecord, PredictionDump};

use crate::data::{Shot, ShotSplit};
use crate::error::{Error, Result};
use crate::loss::{argmax, softmax};

/// A value per shot group plus the overall value. Groups without any test
/// instance are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ShotValues {
    pub many: Option<f64>,
    pub medium: Option<f64>,
    pub few: Option<f64>,
    pub all: Option<f64>,
}

impl ShotValues {
    pub fn get(&self, shot: Shot) -> Option<f64> {
        match shot {
            Shot::Many => self.many,
            Shot::Medium => self.medium,
            Shot::Few => self.few,
        }
    }

    fn set(&mut self, shot: Shot, value: Option<f64>) {
        match shot {
            Shot::Many => self.many = value,
            Shot::Medium => self.medium = value,
            Shot::Few => self.few = value,
        }
    }

    /// Columns in report order: Many, Medium, Few, All.
    pub fn columns(&self) -> [Option<f64>; 4] {
        [self.many, self.medium, self.few, self.all]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Predictor {
    Expert(usize),
    Ensemble,
}

/// Ids the given expert classifies correctly (argmax, lowest index on ties).
pub fn expert_correct_set(dump: &PredictionDump, expert: usize) -> BTreeSet<usize> {
    dump.records()
        .iter()
        .filter(|r| argmax(&r.logits[expert]) == r.label)
        .map(|r| r.id)
        .collect()
}

/// Fraction of the `n_test` instances that at least one expert gets right.
pub fn diversity_factor(sets: &[BTreeSet<usize>], n_test: usize) -> f64 {
    if n_test == 0 {
        return 0.0;
    }
    let union: BTreeSet<usize> = sets.iter().flatten().copied().collect();
    union.len() as f64 / n_test as f64
}

/// Uniform mean of the raw expert logits.
pub fn ensemble_logits(record: &DumpRecord) -> Array1<f64> {
    let m = record.logits.len() as f64;
    let mut sum = Array1::zeros(record.logits[0].len());
    for v in &record.logits {
        sum += v;
    }
    sum / m
}

/// Argmax of the averaged expert logits for the `instance`-th record.
pub fn ensemble_predict(dump: &PredictionDump, instance: usize) -> usize {
    argmax(&ensemble_logits(&dump.records()[instance]))
}

fn predict(record: &DumpRecord, predictor: Predictor) -> usize {
    match predictor {
        Predictor::Expert(mu) => argmax(&record.logits[mu]),
        Predictor::Ensemble => argmax(&ensemble_logits(record)),
    }
}

fn check_split(dump: &PredictionDump, split: &ShotSplit) -> Result<()> {
    if let Some(r) = dump.records().iter().find(|r| split.group(r.label).is_none()) {
        return Err(Error::invalid(format!(
            "class {} of instance {} is missing from the shot split",
            r.label, r.id
        )));
    }
    Ok(())
}

/// Aggregates a per-instance boolean into group and overall fractions.
fn group_fractions(dump: &PredictionDump, split: &ShotSplit, hit: impl Fn(&DumpRecord) -> bool) -> ShotValues {
    let mut totals = [0usize; 3];
    let mut hits = [0usize; 3];
    for r in dump.records() {
        let g = split.group(r.label).expect("split checked") as usize;
        totals[g] += 1;
        if hit(r) {
            hits[g] += 1;
        }
    }
    let frac = |h: usize, t: usize| (t > 0).then(|| h as f64 / t as f64);
    let mut out = ShotValues::default();
    for shot in Shot::ALL {
        let g = shot as usize;
        out.set(shot, frac(hits[g], totals[g]));
    }
    out.all = frac(hits.iter().sum(), totals.iter().sum());
    out
}

pub fn shot_accuracy(dump: &PredictionDump, split: &ShotSplit, predictor: Predictor) -> Result<ShotValues> {
    check_split(dump, split)?;
    if let Predictor::Expert(mu) = predictor {
        if mu >= dump.num_experts() {
            return Err(Error::invalid(format!("no expert {mu}")));
        }
    }
    Ok(group_fractions(dump, split, |r| predict(r, predictor) == r.label))
}

/// Diversity factor overall and within each shot group, each normalized by
/// the number of test instances it covers.
pub fn diversity_by_group(dump: &PredictionDump, split: &ShotSplit) -> Result<ShotValues> {
    check_split(dump, split)?;
    Ok(group_fractions(dump, split, |r| {
        r.logits.iter().any(|v| argmax(v) == r.label)
    }))
}

/// Standard-softmax probability of the true class under the averaged logits.
pub fn ensemble_truth_probabilities(dump: &PredictionDump) -> Vec<f64> {
    dump.records()
        .iter()
        .map(|r| softmax(ensemble_logits(r).view())[r.label])
        .collect()
}

/// `m x n_probe` truth probabilities, one row per trained model.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMatrix {
    values: Array2<f64>,
}

impl PredictionMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid("prediction matrix entries must lie in [0, 1]"));
        }
        Ok(Self { values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("prediction rows differ in length".into()));
        }
        let flat: Vec<f64> = rows.concat();
        let values = Array2::from_shape_vec((rows.len(), n), flat)
            .map_err(|e| Error::Dimension(e.to_string()))?;
        Self::new(values)
    }

    pub fn models(&self) -> usize {
        self.values.nrows()
    }

    pub fn probes(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceStats {
    /// Population variance across models, per probe instance.
    pub per_instance: Vec<f64>,
    /// Mean of `per_instance`.
    pub mean: f64,
}

/// `Var(x) = 1/m sum_k (y_k - mean)^2` for every probe column.
pub fn model_variance(pm: &PredictionMatrix) -> Result<VarianceStats> {
    let m = pm.models();
    if m < 2 {
        return Err(Error::invalid(format!("model variance needs m >= 2, got {m}")));
    }
    let per_instance: Vec<f64> = pm
        .values
        .columns()
        .into_iter()
        .map(|col| {
            // shifting by the first entry keeps identical columns at exactly zero
            let base = col[0];
            let mean = base + col.iter().map(|y| y - base).sum::<f64>() / m as f64;
            col.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / m as f64
        })
        .collect();
    let mean = if per_instance.is_empty() {
        0.0
    } else {
        per_instance.iter().sum::<f64>() / per_instance.len() as f64
    };
    Ok(VarianceStats { per_instance, mean })
}

/// Mean per-instance variance within each shot group of the probe labels.
pub fn variance_by_group(per_instance: &[f64], labels: &[usize], split: &ShotSplit) -> Result<ShotValues> {
    if per_instance.len() != labels.len() {
        return Err(Error::Dimension("variance and label counts differ".into()));
    }
    let mut sums = [0.0; 3];
    let mut counts = [0usize; 3];
    for (&v, &y) in per_instance.iter().zip(labels) {
        let g = split
            .group(y)
            .ok_or_else(|| Error::invalid(format!("class {y} missing from the shot split")))?
            as usize;
        sums[g] += v;
        counts[g] += 1;
    }
    let mean = |s: f64, c: usize| (c > 0).then(|| s / c as f64);
    let mut out = ShotValues::default();
    for shot in Shot::ALL {
        let g = shot as usize;
        out.set(shot, mean(sums[g], counts[g]));
    }
    out.all = mean(sums.iter().sum(), counts.iter().sum());
    Ok(out)
}
