use ndarray::{Array2, ArrayView2};

use super::distill::{cs_loss, DistillConfig};
use super::diversity::{diversity_loss_batch, DistributionWeight};
use crate::error::{Error, Result};
use crate::net::{Gradients, MultiExpertModel};

/// Loss terms of one expert on one batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpertTerms {
    pub dl: f64,
    pub cs: f64,
    /// Size of the confident set on this batch.
    pub confident: usize,
}

#[derive(Debug, Clone)]
pub struct LossBreakdown {
    /// `sum_mu (DL_mu + alpha * CS_mu)`
    pub total: f64,
    pub experts: Vec<ExpertTerms>,
    pub grad_weak: Vec<Array2<f64>>,
    pub grad_strong: Vec<Array2<f64>>,
}

/// Combined objective over all experts, from the per-expert logits of the
/// weak and strong views. With `alpha == 0` the consistency term is computed
/// for bookkeeping only and never touches the total or the gradients.
pub fn total_loss(
    weak_logits: &[Array2<f64>],
    strong_logits: &[Array2<f64>],
    labels: &[usize],
    weights: &[DistributionWeight],
    cfg: &DistillConfig,
) -> Result<LossBreakdown> {
    cfg.validate()?;
    if weak_logits.len() != weights.len() || strong_logits.len() != weights.len() {
        return Err(Error::Dimension(format!(
            "{} weak / {} strong logit sets for {} experts",
            weak_logits.len(),
            strong_logits.len(),
            weights.len()
        )));
    }
    let mut out = LossBreakdown {
        total: 0.0,
        experts: Vec::with_capacity(weights.len()),
        grad_weak: Vec::with_capacity(weights.len()),
        grad_strong: Vec::with_capacity(weights.len()),
    };
    for ((weak, strong), dw) in weak_logits.iter().zip(strong_logits).zip(weights) {
        let (dl, mut g_weak, mut g_strong) = if cfg.supervise_both_views {
            let (lw, gw) = diversity_loss_batch(weak.view(), labels, dw)?;
            let (ls, gs) = diversity_loss_batch(strong.view(), labels, dw)?;
            (0.5 * (lw + ls), gw * 0.5, gs * 0.5)
        } else {
            let (ls, gs) = diversity_loss_batch(strong.view(), labels, dw)?;
            (ls, Array2::zeros(weak.raw_dim()), gs)
        };
        let cs = cs_loss(weak.view(), strong.view(), labels, dw, cfg)?;
        let mut expert_total = dl;
        if cfg.alpha != 0.0 {
            expert_total += cfg.alpha * cs.loss;
            g_strong.scaled_add(cfg.alpha, &cs.grad_strong);
            if !cfg.detach_teacher {
                g_weak.scaled_add(cfg.alpha, &cs.grad_weak);
            }
        }
        out.total += expert_total;
        out.experts.push(ExpertTerms {
            dl,
            cs: cs.loss,
            confident: cs.confident.len(),
        });
        out.grad_weak.push(g_weak);
        out.grad_strong.push(g_strong);
    }
    Ok(out)
}

/// Forward both views through `model`, evaluate [`total_loss`] and
/// backpropagate into parameter gradients.
pub fn model_objective(
    model: &MultiExpertModel,
    weak_inputs: ArrayView2<'_, f64>,
    strong_inputs: ArrayView2<'_, f64>,
    labels: &[usize],
    weights: &[DistributionWeight],
    cfg: &DistillConfig,
) -> Result<(LossBreakdown, Gradients)> {
    let weak = model.forward(weak_inputs)?;
    let strong = model.forward(strong_inputs)?;
    let breakdown = total_loss(&weak.logits, &strong.logits, labels, weights, cfg)?;
    let mut grads = model.backward(&strong.cache, &breakdown.grad_strong)?;
    grads.accumulate(&model.backward(&weak.cache, &breakdown.grad_weak)?);
    Ok((breakdown, grads))
}

/// Default lambda per expert count: head experts in [-1, 0.5], balanced in
/// (0.5, 1.5), tail in [1.5, 3]. Beyond seven experts the values are spread
/// evenly over [-1, 3].
pub fn default_lambdas(experts: usize) -> Result<Vec<f64>> {
    Ok(match experts {
        0 => return Err(Error::invalid("need at least one expert")),
        1 => vec![1.0],
        2 => vec![-0.5, 2.5],
        3 => vec![-0.5, 1.0, 2.5],
        4 => vec![-0.5, 0.0, 1.0, 2.5],
        5 => vec![-0.5, 0.0, 1.0, 2.0, 2.5],
        6 => vec![-1.0, -0.5, 0.0, 2.0, 2.5, 3.0],
        7 => vec![-1.0, -0.5, 0.0, 1.0, 2.0, 2.5, 3.0],
        m => (0..m)
            .map(|i| -1.0 + 4.0 * i as f64 / (m - 1) as f64)
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_lists() {
        assert_eq!(default_lambdas(1).unwrap(), [1.0]);
        assert_eq!(default_lambdas(3).unwrap(), [-0.5, 1.0, 2.5]);
        assert_eq!(default_lambdas(7).unwrap(), [-1.0, -0.5, 0.0, 1.0, 2.0, 2.5, 3.0]);
        let nine = default_lambdas(9).unwrap();
        assert_eq!(nine.first(), Some(&-1.0));
        assert_eq!(nine.last(), Some(&3.0));
        assert_eq!(nine[4], 1.0);
        assert!(default_lambdas(0).is_err());
    }
}
