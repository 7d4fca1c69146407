use ndarray::{Array2, ArrayView2, Zip};
use serde::{Deserialize, Serialize};

use super::diversity::DistributionWeight;
use super::softmax::{argmax, log_softmax};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistillConfig {
    pub temperature: f64,
    /// Weight of the consistency term in the combined objective.
    pub alpha: f64,
    /// Treat the weak-view distribution as a constant target.
    pub detach_teacher: bool,
    /// Apply the diversity loss to both views (averaged) instead of only
    /// the strong view.
    pub supervise_both_views: bool,
}

impl Default for DistillConfig {
    fn default() -> Self {
        Self {
            temperature: 2.0,
            alpha: 0.6,
            detach_teacher: true,
            supervise_both_views: true,
        }
    }
}

impl DistillConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::invalid("temperature must be positive and finite"));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid("alpha must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Batch rows whose weak-view prediction matches the label, in ascending order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConfidentSet {
    pub indices: Vec<usize>,
}

impl ConfidentSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }
}

/// Rows of `weak_probs` whose argmax (lowest index on ties) equals the label.
pub fn confident_set(weak_probs: ArrayView2<'_, f64>, labels: &[usize]) -> ConfidentSet {
    let indices = weak_probs
        .rows()
        .into_iter()
        .zip(labels)
        .enumerate()
        .filter(|(_, (row, &y))| argmax(row) == y)
        .map(|(i, _)| i)
        .collect();
    ConfidentSet { indices }
}

/// Confident set gated on the unit-temperature diversity softmax of the weak
/// view, i.e. on the argmax of `v + w`. The distillation temperature plays no
/// part in membership.
pub fn confident_set_from_logits(
    weak_logits: ArrayView2<'_, f64>,
    labels: &[usize],
    dw: &DistributionWeight,
) -> ConfidentSet {
    let indices = weak_logits
        .rows()
        .into_iter()
        .zip(labels)
        .enumerate()
        .filter(|(_, (row, &y))| argmax(&dw.adjust(*row, 1.0)) == y)
        .map(|(i, _)| i)
        .collect();
    ConfidentSet { indices }
}

#[derive(Debug, Clone)]
pub struct CsOutput {
    pub loss: f64,
    pub grad_strong: Array2<f64>,
    /// Zero when the teacher is detached.
    pub grad_weak: Array2<f64>,
    pub confident: ConfidentSet,
}

/// Mean over the confident set of `KL(p_weak || p_strong)`, both taken from
/// the temperature-scaled diversity softmax. An empty confident set gives a
/// zero loss and zero gradients.
pub fn cs_loss(
    weak_logits: ArrayView2<'_, f64>,
    strong_logits: ArrayView2<'_, f64>,
    labels: &[usize],
    dw: &DistributionWeight,
    cfg: &DistillConfig,
) -> Result<CsOutput> {
    cfg.validate()?;
    if weak_logits.dim() != strong_logits.dim() {
        return Err(Error::Dimension(format!(
            "weak logits {:?} vs strong logits {:?}",
            weak_logits.dim(),
            strong_logits.dim()
        )));
    }
    if weak_logits.nrows() != labels.len() || weak_logits.ncols() != dw.num_classes() {
        return Err(Error::Dimension("logits do not match labels or classes".into()));
    }
    let t = cfg.temperature;
    let confident = confident_set_from_logits(weak_logits, labels, dw);
    let mut grad_strong = Array2::zeros(strong_logits.raw_dim());
    let mut grad_weak = Array2::zeros(weak_logits.raw_dim());
    if confident.is_empty() {
        return Ok(CsOutput {
            loss: 0.0,
            grad_strong,
            grad_weak,
            confident,
        });
    }
    let norm = confident.len() as f64;
    let mut total = 0.0;
    for &i in &confident.indices {
        let log_teacher = log_softmax(dw.adjust(weak_logits.row(i), t).view());
        let log_student = log_softmax(dw.adjust(strong_logits.row(i), t).view());
        let teacher = log_teacher.mapv(f64::exp);
        let student = log_student.mapv(f64::exp);
        let kl: f64 = Zip::from(&teacher)
            .and(&log_teacher)
            .and(&log_student)
            .fold(0.0, |acc, &p, &lp, &lq| acc + p * (lp - lq));
        total += kl;
        grad_strong
            .row_mut(i)
            .assign(&((&student - &teacher) / (t * norm)));
        if !cfg.detach_teacher {
            let g = Zip::from(&teacher)
                .and(&log_teacher)
                .and(&log_student)
                .map_collect(|&p, &lp, &lq| p * ((lp - lq) - kl) / (t * norm));
            grad_weak.row_mut(i).assign(&g);
        }
    }
    Ok(CsOutput {
        loss: total / norm,
        grad_strong,
        grad_weak,
        confident,
    })
}
