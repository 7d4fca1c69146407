use ndarray::{Array1, ArrayView1};

/// Index of the largest entry; ties resolve to the lowest index and NaN
/// never wins.
pub fn argmax<'a>(values: impl IntoIterator<Item = &'a f64>) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, &v) in values.into_iter().enumerate() {
        if v > best_val {
            best = i;
            best_val = v;
        }
    }
    best
}

pub fn log_softmax(a: ArrayView1<'_, f64>) -> Array1<f64> {
    let max = a.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let lse = max + a.mapv(|v| (v - max).exp()).sum().ln();
    a.mapv(|v| v - lse)
}

pub fn softmax(a: ArrayView1<'_, f64>) -> Array1<f64> {
    let max = a.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let mut e = a.mapv(|v| (v - max).exp());
    let total = e.sum();
    e /= total;
    e
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[f64::NAN, 1.0]), 1);
    }

    #[test]
    fn softmax_survives_large_logits() {
        let p = softmax(array![1000.0, 1000.0].view());
        assert_eq!(p, array![0.5, 0.5]);
        let lp = log_softmax(array![1000.0, 0.0].view());
        assert!(lp[0].abs() < 1e-300 && lp[1] == -1000.0);
    }
}
