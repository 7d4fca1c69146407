use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::RngExt;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::seed;

/// Exponential long-tail profile: `classes` classes, the largest with
/// `n_max` samples and imbalance factor `beta = n_max / n_min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImbalanceProfile {
    pub classes: usize,
    pub n_max: usize,
    pub beta: f64,
}

/// Per-class counts `round(n_max * beta^(-j / (C - 1)))`, non-increasing in `j`.
pub fn exp_longtail_counts(profile: &ImbalanceProfile) -> Result<Vec<usize>> {
    let ImbalanceProfile {
        classes,
        n_max,
        beta,
    } = *profile;
    if classes < 2 {
        return Err(Error::invalid("imbalance profile needs at least 2 classes"));
    }
    if n_max < 1 {
        return Err(Error::invalid("n_max must be at least 1"));
    }
    if !(beta.is_finite() && beta >= 1.0) {
        return Err(Error::invalid(format!("imbalance factor {beta} must be >= 1")));
    }
    let last = (classes - 1) as f64;
    let counts: Vec<usize> = (0..classes)
        .map(|j| (n_max as f64 * beta.powf(-(j as f64) / last)).round() as usize)
        .collect();
    if counts.contains(&0) {
        return Err(Error::invalid(format!(
            "imbalance factor {beta} with n_max {n_max} rounds a class count to zero"
        )));
    }
    Ok(counts)
}

/// Draws exactly `counts[j]` rows of each class without replacement.
/// Selected rows keep their original relative order.
pub fn subsample_longtail(
    balanced: &LabeledDataset,
    counts: &[usize],
    seed: u64,
) -> Result<LabeledDataset> {
    if counts.len() != balanced.num_classes() {
        return Err(Error::Dimension(format!(
            "{} target counts for {} classes",
            counts.len(),
            balanced.num_classes()
        )));
    }
    let mut rng = seed::rng(seed);
    let mut chosen = Vec::with_capacity(counts.iter().sum());
    for (class, (mut pool, &want)) in balanced.class_indices().into_iter().zip(counts).enumerate() {
        if want > pool.len() {
            return Err(Error::invalid(format!(
                "class {class} has {} samples, {want} requested",
                pool.len()
            )));
        }
        pool.shuffle(&mut rng);
        chosen.extend_from_slice(&pool[..want]);
    }
    chosen.sort_unstable();
    Ok(balanced.select(&chosen))
}

/// Class means for [`synth_gaussians`]. With `classes <= dim` class `j` sits at
/// `separation / sqrt(2) * e_j`, so every pair of means is exactly
/// `separation` apart. Otherwise the means lie on a circle in the first two
/// coordinates with neighbouring means `separation` apart.
pub fn gaussian_means(classes: usize, dim: usize, separation: f64) -> Array2<f64> {
    let mut means = Array2::zeros((classes, dim));
    if classes <= dim {
        let offset = separation / std::f64::consts::SQRT_2;
        for j in 0..classes {
            means[[j, j]] = offset;
        }
    } else {
        let step = std::f64::consts::TAU / classes as f64;
        let radius = separation / (2.0 * (step / 2.0).sin());
        for j in 0..classes {
            let angle = step * j as f64;
            means[[j, 0]] = radius * angle.cos();
            means[[j, 1]] = radius * angle.sin();
        }
    }
    means
}

/// Isotropic unit-variance Gaussian mixture with exactly `counts[j]` rows of
/// class `j`. Rows are grouped by class.
pub fn synth_gaussians(
    classes: usize,
    dim: usize,
    counts: &[usize],
    separation: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    if classes < 2 || dim < 2 {
        return Err(Error::invalid("need at least 2 classes and 2 dimensions"));
    }
    if !(separation > 0.0 && separation.is_finite()) {
        return Err(Error::invalid("separation must be positive"));
    }
    if counts.len() != classes {
        return Err(Error::Dimension(format!(
            "{} counts for {classes} classes",
            counts.len()
        )));
    }
    let means = gaussian_means(classes, dim, separation);
    let n: usize = counts.iter().sum();
    let mut rng = seed::rng(seed);
    let mut features = Array2::zeros((n, dim));
    let mut labels = Vec::with_capacity(n);
    let mut row = 0;
    for (class, &count) in counts.iter().enumerate() {
        for _ in 0..count {
            for k in 0..dim {
                let z: f64 = StandardNormal.sample(&mut rng);
                features[[row, k]] = means[[class, k]] + z;
            }
            labels.push(class);
            row += 1;
        }
    }
    LabeledDataset::new(features, labels, classes)
}

/// Per-class resample with replacement that keeps every class count fixed.
pub fn bootstrap_resample(dataset: &LabeledDataset, seed: u64) -> Result<LabeledDataset> {
    if dataset.is_empty() {
        return Err(Error::invalid("cannot resample an empty dataset"));
    }
    let mut rng = seed::rng(seed);
    let mut chosen = Vec::with_capacity(dataset.len());
    for pool in dataset.class_indices() {
        for _ in 0..pool.len() {
            chosen.push(pool[rng.random_range(0..pool.len())]);
        }
    }
    Ok(dataset.select(&chosen))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Shot {
    Many,
    Medium,
    Few,
}

impl Shot {
    pub const ALL: [Shot; 3] = [Shot::Many, Shot::Medium, Shot::Few];

    pub fn name(self) -> &'static str {
        match self {
            Shot::Many => "Many",
            Shot::Medium => "Medium",
            Shot::Few => "Few",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotThresholds {
    /// Classes with strictly more training samples are Many-shot.
    pub many: usize,
    /// Classes with strictly fewer training samples are Few-shot.
    pub few: usize,
}

impl Default for ShotThresholds {
    fn default() -> Self {
        Self { many: 100, few: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotSplit {
    pub thresholds: ShotThresholds,
    pub assignment: Vec<Shot>,
}

impl ShotSplit {
    pub fn group(&self, class: usize) -> Option<Shot> {
        self.assignment.get(class).copied()
    }

    pub fn num_classes(&self) -> usize {
        self.assignment.len()
    }
}

pub fn shot_partition(counts: &[usize], thresholds: ShotThresholds) -> Result<ShotSplit> {
    if thresholds.few > thresholds.many {
        return Err(Error::invalid(format!(
            "few threshold {} exceeds many threshold {}",
            thresholds.few, thresholds.many
        )));
    }
    let assignment = counts
        .iter()
        .map(|&n| {
            if n > thresholds.many {
                Shot::Many
            } else if n < thresholds.few {
                Shot::Few
            } else {
                Shot::Medium
            }
        })
        .collect();
    Ok(ShotSplit {
        thresholds,
        assignment,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(classes: usize, n_max: usize, beta: f64) -> ImbalanceProfile {
        ImbalanceProfile {
            classes,
            n_max,
            beta,
        }
    }

    #[test]
    fn longtail_counts_examples() {
        assert_eq!(exp_longtail_counts(&profile(3, 100, 100.0)).unwrap(), [100, 10, 1]);
        assert_eq!(exp_longtail_counts(&profile(2, 50, 1.0)).unwrap(), [50, 50]);
    }

    #[test]
    fn longtail_counts_five_classes() {
        // 500 * 100^(-j/4) = 500, 158.11, 50, 15.81, 5
        let counts = exp_longtail_counts(&profile(5, 500, 100.0)).unwrap();
        assert_eq!(counts, [500, 158, 50, 16, 5]);
        assert_eq!(counts[0] / counts[4], 100);
    }

    #[test]
    fn longtail_counts_reject_zero() {
        assert!(exp_longtail_counts(&profile(3, 10, 100.0)).is_err());
        assert!(exp_longtail_counts(&profile(1, 10, 2.0)).is_err());
        assert!(exp_longtail_counts(&profile(3, 10, 0.5)).is_err());
    }

    #[test]
    fn shot_partition_boundaries() {
        let t = ShotThresholds::default();
        assert_eq!(
            shot_partition(&[150, 50, 5], t).unwrap().assignment,
            [Shot::Many, Shot::Medium, Shot::Few]
        );
        assert_eq!(shot_partition(&[100], t).unwrap().assignment, [Shot::Medium]);
        assert_eq!(shot_partition(&[20], t).unwrap().assignment, [Shot::Medium]);
        assert_eq!(shot_partition(&[101, 19], t).unwrap().assignment, [Shot::Many, Shot::Few]);
        assert!(shot_partition(&[1], ShotThresholds { many: 5, few: 6 }).is_err());
    }

    #[test]
    fn subsample_exact_counts_and_deterministic() {
        let balanced = synth_gaussians(3, 4, &[100, 100, 100], 3.0, 1).unwrap();
        let a = subsample_longtail(&balanced, &[100, 10, 1], 42).unwrap();
        let b = subsample_longtail(&balanced, &[100, 10, 1], 42).unwrap();
        assert_eq!(a.len(), 111);
        assert_eq!(a.counts(), &[100, 10, 1]);
        assert_eq!(a, b);
        let c = subsample_longtail(&balanced, &[100, 10, 1], 43).unwrap();
        assert_ne!(a, c);
        assert!(subsample_longtail(&balanced, &[101, 1, 1], 0).is_err());
    }

    #[test]
    fn subsample_everything_is_identity() {
        let balanced = synth_gaussians(3, 2, &[7, 5, 3], 3.0, 1).unwrap();
        let all = subsample_longtail(&balanced, &[7, 5, 3], 9).unwrap();
        assert_eq!(all, balanced);
    }

    #[test]
    fn synth_counts_and_determinism() {
        let ds = synth_gaussians(3, 2, &[5, 5, 5], 4.0, 3).unwrap();
        assert_eq!(ds.len(), 15);
        assert_eq!(ds.counts(), &[5, 5, 5]);
        let again = synth_gaussians(3, 2, &[5, 5, 5], 4.0, 3).unwrap();
        let bits = |d: &LabeledDataset| d.features().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&ds), bits(&again));
    }

    #[test]
    fn means_are_separation_apart() {
        for (classes, dim) in [(2, 2), (4, 16), (10, 16), (5, 2)] {
            let means = gaussian_means(classes, dim, 3.0);
            let dist = |a: usize, b: usize| {
                (&means.row(a) - &means.row(b)).mapv(|v| v * v).sum().sqrt()
            };
            let min = (0..classes)
                .flat_map(|a| (0..classes).filter(move |&b| b != a).map(move |b| (a, b)))
                .map(|(a, b)| dist(a, b))
                .fold(f64::INFINITY, f64::min);
            assert!((min - 3.0).abs() < 1e-9, "{classes}x{dim}: {min}");
        }
    }

    #[test]
    fn nearest_mean_separates_far_clusters() {
        for seed in 0..5 {
            let ds = synth_gaussians(2, 2, &[10, 10], 10.0, 7 + seed).unwrap();
            let means = gaussian_means(2, 2, 10.0);
            let correct = (0..ds.len())
                .filter(|&i| {
                    let x = ds.row(i);
                    let d: Vec<f64> = (0..2)
                        .map(|j| (&x - &means.row(j)).mapv(|v| v * v).sum())
                        .collect();
                    let guess = if d[1] < d[0] { 1 } else { 0 };
                    guess == ds.labels()[i]
                })
                .count();
            assert!(correct as f64 / ds.len() as f64 >= 0.95);
        }
    }

    #[test]
    fn bootstrap_preserves_counts() {
        let balanced = synth_gaussians(3, 2, &[100, 100, 100], 3.0, 0).unwrap();
        let lt = subsample_longtail(&balanced, &[100, 10, 1], 1).unwrap();
        let boot = bootstrap_resample(&lt, 5).unwrap();
        assert_eq!(boot.counts(), &[100, 10, 1]);
        // the single Few sample is repeated once
        let tail = lt.class_indices()[2][0];
        let boot_tail = boot.class_indices()[2][0];
        assert_eq!(boot.row(boot_tail), lt.row(tail));
        assert_eq!(bootstrap_resample(&lt, 5).unwrap(), boot);
    }

    #[test]
    fn bootstrap_seeds_give_distinct_multisets() {
        let balanced = synth_gaussians(3, 2, &[100, 100, 100], 3.0, 0).unwrap();
        let lt = subsample_longtail(&balanced, &[100, 10, 1], 1).unwrap();
        let key = |d: &LabeledDataset| {
            let mut rows: Vec<Vec<u64>> = d
                .features()
                .rows()
                .into_iter()
                .map(|r| r.iter().map(|v| v.to_bits()).collect())
                .collect();
            rows.sort();
            rows
        };
        let samples: Vec<_> = (0..20).map(|s| key(&bootstrap_resample(&lt, s).unwrap())).collect();
        for a in 0..samples.len() {
            for b in a + 1..samples.len() {
                assert_ne!(samples[a], samples[b], "seeds {a} and {b} collided");
            }
        }
    }
}
