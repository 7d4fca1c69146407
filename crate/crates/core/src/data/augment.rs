use ndarray::{Array1, ArrayView1};
use rand::RngExt;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AugmentKind {
    Weak,
    Strong,
}

/// Feature-space stand-ins for image augmentations. Weak views add Gaussian
/// jitter; strong views add jitter, random coordinate dropout and a global
/// rescale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentPolicy {
    pub kind: AugmentKind,
    pub jitter_sigma: f64,
    pub dropout_prob: f64,
    pub scale_range: (f64, f64),
    /// Rounds of jitter + dropout applied before the rescale.
    pub op_count: usize,
}

impl AugmentPolicy {
    pub fn weak(jitter_sigma: f64) -> Self {
        Self {
            kind: AugmentKind::Weak,
            jitter_sigma,
            dropout_prob: 0.0,
            scale_range: (1.0, 1.0),
            op_count: 1,
        }
    }

    pub fn strong(jitter_sigma: f64, dropout_prob: f64, scale_range: (f64, f64), op_count: usize) -> Self {
        Self {
            kind: AugmentKind::Strong,
            jitter_sigma,
            dropout_prob,
            scale_range,
            op_count,
        }
    }

    pub fn identity() -> Self {
        Self::weak(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.jitter_sigma >= 0.0 && self.jitter_sigma.is_finite()) {
            return Err(Error::invalid("jitter sigma must be finite and >= 0"));
        }
        match self.kind {
            AugmentKind::Weak => {
                if self.dropout_prob != 0.0 || self.scale_range != (1.0, 1.0) {
                    return Err(Error::invalid(
                        "weak augmentation cannot use dropout or rescaling",
                    ));
                }
            }
            AugmentKind::Strong => {
                if !(0.0..=1.0).contains(&self.dropout_prob) {
                    return Err(Error::invalid("dropout probability must lie in [0, 1]"));
                }
                let (lo, hi) = self.scale_range;
                if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                    return Err(Error::invalid("scale range must be a finite interval"));
                }
                if self.op_count == 0 {
                    return Err(Error::invalid("strong augmentation needs op_count >= 1"));
                }
            }
        }
        Ok(())
    }
}

/// Checks the weak/strong pair ordering used by the training views.
pub fn validate_pair(weak: &AugmentPolicy, strong: &AugmentPolicy) -> Result<()> {
    weak.validate()?;
    strong.validate()?;
    if weak.kind != AugmentKind::Weak || strong.kind != AugmentKind::Strong {
        return Err(Error::invalid("expected a weak and a strong policy"));
    }
    if strong.jitter_sigma < weak.jitter_sigma {
        return Err(Error::invalid(
            "strong jitter sigma must be at least the weak jitter sigma",
        ));
    }
    Ok(())
}

/// Applies `policy` to one feature vector. Pure in `(x, policy, seed)`.
pub fn augment(x: ArrayView1<'_, f64>, policy: &AugmentPolicy, seed: u64) -> Array1<f64> {
    let mut out = x.to_owned();
    augment_in_place(&mut out, policy, seed);
    out
}

pub(crate) fn augment_in_place(out: &mut Array1<f64>, policy: &AugmentPolicy, seed: u64) {
    let mut rng = seed::rng(seed);
    let rounds = match policy.kind {
        AugmentKind::Weak => 1,
        AugmentKind::Strong => policy.op_count,
    };
    for _ in 0..rounds {
        if policy.jitter_sigma > 0.0 {
            let noise = Normal::new(0.0, policy.jitter_sigma).expect("validated sigma");
            out.mapv_inplace(|v| v + noise.sample(&mut rng));
        }
        if policy.kind == AugmentKind::Strong && policy.dropout_prob > 0.0 {
            let p = policy.dropout_prob;
            out.mapv_inplace(|v| if rng.random_bool(p) { 0.0 } else { v });
        }
    }
    if policy.kind == AugmentKind::Strong {
        let (lo, hi) = policy.scale_range;
        let scale = if lo < hi { rng.random_range(lo..hi) } else { lo };
        out.mapv_inplace(|v| v * scale);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn weak_zero_sigma_is_identity() {
        let x = array![1.5, -2.0, 0.25];
        assert_eq!(augment(x.view(), &AugmentPolicy::identity(), 17), x);
    }

    #[test]
    fn full_dropout_zeroes_before_scaling() {
        let x = array![1.0, 2.0, 3.0, 4.0];
        let p = AugmentPolicy::strong(0.5, 1.0, (0.5, 2.0), 1);
        assert!(augment(x.view(), &p, 3).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn weak_jitter_matches_regenerated_noise() {
        let x = array![0.0, 1.0, -1.0, 2.0];
        let policy = AugmentPolicy::weak(0.1);
        let y = augment(x.view(), &policy, 99);
        assert_eq!(y, augment(x.view(), &policy, 99));

        let mut rng = seed::rng(99);
        let noise = Normal::new(0.0, 0.1).unwrap();
        let expected: Vec<f64> = x.iter().map(|v| v + noise.sample(&mut rng)).collect();
        assert_eq!(y.to_vec(), expected);
        let max_dev = (&y - &x).iter().fold(0.0f64, |m, d| m.max(d.abs()));
        assert!(max_dev > 0.0 && max_dev < 0.6);
    }

    #[test]
    fn strong_scale_is_uniform_global_factor() {
        let x = array![1.0, 2.0, 4.0];
        let p = AugmentPolicy::strong(0.0, 0.0, (0.5, 1.5), 1);
        let y = augment(x.view(), &p, 5);
        let s = y[0] / x[0];
        assert!((0.5..1.5).contains(&s));
        for k in 0..3 {
            assert!((y[k] - s * x[k]).abs() < 1e-15);
        }
    }

    #[test]
    fn policy_validation() {
        assert!(AugmentPolicy::weak(-1.0).validate().is_err());
        assert!(AugmentPolicy::strong(0.1, 1.5, (1.0, 1.0), 1).validate().is_err());
        assert!(AugmentPolicy::strong(0.1, 0.1, (2.0, 1.0), 1).validate().is_err());
        let mut weak = AugmentPolicy::weak(0.1);
        weak.dropout_prob = 0.2;
        assert!(weak.validate().is_err());
        assert!(validate_pair(&AugmentPolicy::weak(0.3), &AugmentPolicy::strong(0.2, 0.0, (1.0, 1.0), 1)).is_err());
        assert!(validate_pair(&AugmentPolicy::weak(0.1), &AugmentPolicy::strong(0.2, 0.1, (0.8, 1.2), 2)).is_ok());
    }
}
