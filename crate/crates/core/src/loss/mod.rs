//! Diversity softmax and diversity loss, consistency self-distillation gated
//! by confident instance sampling, and the combined multi-expert objective.

mod distill;
mod diversity;
mod objective;
mod softmax;

pub use distill::{confident_set, confident_set_from_logits, cs_loss, ConfidentSet, CsOutput, DistillConfig};
pub use diversity::{diversity_loss, diversity_loss_batch, diversity_softmax, DistributionWeight};
pub use objective::{default_lambdas, model_objective, total_loss, ExpertTerms, LossBreakdown};
pub use softmax::{argmax, log_softmax, softmax};
