use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use super::softmax::{log_softmax, softmax};
use crate::error::{Error, Result};

/// Per-expert logit offsets `w_k = lambda * ln(n_k)` built from the
/// training class counts.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionWeight {
    lambda: f64,
    counts: Vec<usize>,
    w: Array1<f64>,
}

impl DistributionWeight {
    pub fn new(lambda: f64, counts: &[usize]) -> Result<Self> {
        if !lambda.is_finite() {
            return Err(Error::invalid("lambda must be finite"));
        }
        if counts.is_empty() {
            return Err(Error::invalid("distribution weight needs at least one class"));
        }
        if let Some(k) = counts.iter().position(|&n| n == 0) {
            return Err(Error::invalid(format!(
                "class {k} has no training samples; ln(0) is undefined"
            )));
        }
        let w = counts.iter().map(|&n| lambda * (n as f64).ln()).collect();
        Ok(Self {
            lambda,
            counts: counts.to_vec(),
            w,
        })
    }

    /// One weight per entry of `lambdas`, all sharing `counts`.
    pub fn for_lambdas(lambdas: &[f64], counts: &[usize]) -> Result<Vec<Self>> {
        lambdas.iter().map(|&l| Self::new(l, counts)).collect()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn offsets(&self) -> ArrayView1<'_, f64> {
        self.w.view()
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    /// `v / T + w`, the log-domain argument of the diversity softmax.
    pub(crate) fn adjust(&self, v: ArrayView1<'_, f64>, temperature: f64) -> Array1<f64> {
        let mut a = v.mapv(|x| x / temperature);
        a += &self.w;
        a
    }

    fn check_width(&self, width: usize) -> Result<()> {
        if width != self.num_classes() {
            return Err(Error::Dimension(format!(
                "{width} logits for {} classes",
                self.num_classes()
            )));
        }
        Ok(())
    }
}

/// `p_k = n_k^lambda exp(v_k / T) / sum_c n_c^lambda exp(v_c / T)`, evaluated
/// as `softmax(v / T + lambda ln n)`.
pub fn diversity_softmax(v: ArrayView1<'_, f64>, dw: &DistributionWeight, temperature: f64) -> Result<Array1<f64>> {
    dw.check_width(v.len())?;
    if !(temperature > 0.0) {
        return Err(Error::invalid("temperature must be positive"));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("non-finite logits".into()));
    }
    Ok(softmax(dw.adjust(v, temperature).view()))
}

/// Cross-entropy of `softmax(v + w)` against class `label`, with its
/// gradient `p - y`.
pub fn diversity_loss(v: ArrayView1<'_, f64>, label: usize, dw: &DistributionWeight) -> Result<(f64, Array1<f64>)> {
    dw.check_width(v.len())?;
    if label >= v.len() {
        return Err(Error::invalid(format!("label {label} out of range")));
    }
    let log_p = log_softmax(dw.adjust(v, 1.0).view());
    let mut grad = log_p.mapv(f64::exp);
    grad[label] -= 1.0;
    Ok((-log_p[label], grad))
}

/// Batch mean of [`diversity_loss`]; the gradient rows carry the `1/B`.
pub fn diversity_loss_batch(
    logits: ArrayView2<'_, f64>,
    labels: &[usize],
    dw: &DistributionWeight,
) -> Result<(f64, Array2<f64>)> {
    if logits.nrows() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} logit rows for {} labels",
            logits.nrows(),
            labels.len()
        )));
    }
    let batch = labels.len().max(1) as f64;
    let mut grad = Array2::zeros(logits.raw_dim());
    let mut total = 0.0;
    for (i, (row, &y)) in logits.rows().into_iter().zip(labels).enumerate() {
        let (loss, g) = diversity_loss(row, y, dw)?;
        total += loss;
        grad.row_mut(i).assign(&(g / batch));
    }
    Ok((total / batch, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn zero_counts_rejected() {
        assert!(DistributionWeight::new(1.0, &[3, 0]).is_err());
        assert!(DistributionWeight::new(f64::NAN, &[3, 1]).is_err());
    }

    #[test]
    fn uniform_logits_give_normalized_counts() {
        let dw = DistributionWeight::new(1.0, &[100, 10, 1]).unwrap();
        let p = diversity_softmax(array![0.0, 0.0, 0.0].view(), &dw, 1.0).unwrap();
        for (a, b) in p.iter().zip([100.0 / 111.0, 10.0 / 111.0, 1.0 / 111.0]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn non_finite_logits_error() {
        let dw = DistributionWeight::new(1.0, &[2, 1]).unwrap();
        assert!(matches!(
            diversity_softmax(array![f64::NAN, 0.0].view(), &dw, 1.0),
            Err(Error::Numeric(_))
        ));
        assert!(diversity_softmax(array![0.0, 0.0].view(), &dw, 0.0).is_err());
    }

    #[test]
    fn cancelled_logits_give_ln_c() {
        let dw = DistributionWeight::new(1.7, &[40, 9, 2]).unwrap();
        let v = dw.offsets().mapv(|w| -w);
        for y in 0..3 {
            let (loss, _) = diversity_loss(v.view(), y, &dw).unwrap();
            assert!((loss - 3f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn confident_correct_prediction_has_vanishing_loss() {
        let dw = DistributionWeight::new(0.0, &[5, 5]).unwrap();
        let (loss, grad) = diversity_loss(array![0.0, 60.0].view(), 1, &dw).unwrap();
        assert!(loss < 1e-20);
        assert!(grad.iter().all(|g| g.abs() < 1e-20));
    }

    #[test]
    fn batch_is_mean() {
        let dw = DistributionWeight::new(1.0, &[9, 1]).unwrap();
        let logits = array![[0.0, 0.0], [1.0, -1.0]];
        let (mean, grad) = diversity_loss_batch(logits.view(), &[1, 0], &dw).unwrap();
        let (a, ga) = diversity_loss(logits.row(0), 1, &dw).unwrap();
        let (b, gb) = diversity_loss(logits.row(1), 0, &dw).unwrap();
        assert!((mean - (a + b) / 2.0).abs() < 1e-15);
        assert_eq!(grad.row(0), ga / 2.0);
        assert_eq!(grad.row(1), gb / 2.0);
    }
}
