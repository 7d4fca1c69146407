//! Central finite-difference check of analytic gradients.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Component with the largest relative error.
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Relative error with a `max(|a|, |b|, 1e-8)` denominator.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Central differences of `loss` at `point`, one component at a time.
pub fn numeric_gradient<F>(mut loss: F, point: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(h > 0.0) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let mut x = point.to_vec();
    let mut out = Vec::with_capacity(point.len());
    for i in 0..point.len() {
        x[i] = point[i] + h;
        let plus = loss(&x);
        x[i] = point[i] - h;
        let minus = loss(&x);
        x[i] = point[i];
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::Numeric(format!(
                "loss not finite while perturbing component {i}"
            )));
        }
        out.push((plus - minus) / (2.0 * h));
    }
    Ok(out)
}

/// Compares `analytic` against central differences of `loss` around `point`.
pub fn grad_check<F>(loss: F, point: &[f64], analytic: &[f64], h: f64, tolerance: f64) -> Result<GradCheckReport>
where
    F: FnMut(&[f64]) -> f64,
{
    if analytic.len() != point.len() {
        return Err(Error::Dimension(format!(
            "{} gradient components for {} parameters",
            analytic.len(),
            point.len()
        )));
    }
    if analytic.iter().any(|g| !g.is_finite()) {
        return Err(Error::Numeric("analytic gradient is not finite".into()));
    }
    let numeric = numeric_gradient(loss, point, h)?;
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_index: 0,
        analytic: analytic.first().copied().unwrap_or(0.0),
        numeric: numeric.first().copied().unwrap_or(0.0),
        tolerance,
        passed: true,
    };
    for (i, (&a, &n)) in analytic.iter().zip(&numeric).enumerate() {
        let err = relative_error(a, n);
        if err > report.max_rel_error {
            report.max_rel_error = err;
            report.worst_index = i;
            report.analytic = a;
            report.numeric = n;
        }
    }
    report.passed = report.max_rel_error < tolerance;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_loss_is_exact() {
        let c = [0.5, -2.0, 3.0];
        let loss = |p: &[f64]| p.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>();
        let r = grad_check(loss, &[1.0, 2.0, -1.0], &c, 1e-3, 1e-4).unwrap();
        assert!(r.passed);
        assert!(r.max_rel_error < 1e-10);
    }

    #[test]
    fn cubic_matches_taylor_error() {
        let h = 1e-3;
        let r = grad_check(|p: &[f64]| p[0].powi(3), &[1.0], &[3.0], h, 1e-4).unwrap();
        // FD value is 3 + h^2
        assert!((r.numeric - (3.0 + h * h)).abs() < 1e-9);
        let expected = h * h / (3.0 + h * h);
        assert!((r.max_rel_error - expected).abs() < 1e-9);
        assert!(r.passed);
    }

    #[test]
    fn wrong_gradient_is_flagged() {
        let loss = |p: &[f64]| p[0] * p[0] + p[1] * p[1];
        let point = [1.0, -0.5];
        let doubled = [4.0, -2.0];
        let r = grad_check(loss, &point, &doubled, 1e-3, 1e-4).unwrap();
        assert!(!r.passed);
        assert!((r.max_rel_error - 0.5).abs() < 1e-6);
    }

    #[test]
    fn non_finite_loss_errors() {
        let r = grad_check(|p: &[f64]| p[0].ln(), &[5e-4], &[2000.0], 1e-3, 1e-4);
        assert!(matches!(r, Err(Error::Numeric(_))));
        assert!(grad_check(|p: &[f64]| p[0], &[1.0], &[1.0], 0.0, 1e-4).is_err());
    }
}
