//! Shared-backbone multi-expert network with cosine heads, analytic
//! backpropagation, momentum SGD, and a finite-difference gradient oracle.

mod checkpoint;
mod gradcheck;
mod model;
mod sgd;

pub use checkpoint::{Checkpoint, HEADER as CHECKPOINT_HEADER};
pub use gradcheck::{grad_check, numeric_gradient, relative_error, GradCheckReport};
pub use model::{Affine, CosineHead, ForwardCache, ForwardOutput, Gradients, MultiExpertModel, NORM_EPS};
pub use sgd::{lr_at, sgd_update, Schedule, SgdConfig, SgdState};
