//! Long-tailed dataset construction, shot-group splits, feature-space
//! augmentation, and bootstrap resampling.

mod augment;
mod dataset;
mod longtail;

pub use augment::{augment, validate_pair, AugmentKind, AugmentPolicy};
pub(crate) use augment::augment_in_place;
pub(crate) use dataset::{format_f64, parse_field};
pub use dataset::LabeledDataset;
pub use longtail::{
    bootstrap_resample, exp_longtail_counts, gaussian_means, shot_partition, subsample_longtail,
    synth_gaussians, ImbalanceProfile, Shot, ShotSplit, ShotThresholds,
};
