//! Multi-expert long-tailed classification with diversity losses and
//! consistency self-distillation.
//!
//! Each expert head of a shared-backbone network is trained with a
//! logit-adjusted softmax whose exponent `lambda` steers it toward head,
//! balanced or tail classes. A KL term distills each expert's prediction on a
//! weakly augmented view into its prediction on a strongly augmented view,
//! restricted to instances the weak view already classifies correctly.
//!
//! Modules:
//! - [`data`]: long-tailed dataset generation, shot splits, augmentation,
//!   bootstrap resampling.
//! - [`net`]: MLP backbone with cosine expert heads, backprop, SGD,
//!   checkpoints, finite-difference checks.
//! - [`loss`]: diversity softmax/loss, confident-instance consistency loss,
//!   combined objective.
//! - [`metrics`]: correct sets, diversity factor, ensemble, shot accuracy,
//!   model variance.
//! - [`runner`]: config, training loop, evaluation, sweeps, variance protocol.

pub mod data;
pub mod error;
pub mod loss;
pub mod metrics;
pub mod net;
pub mod runner;
pub mod seed;

pub use error::{Error, Result};
