//! Loss terms of the adaptation objective and their analytic gradients.

mod contrastive;
mod cross_entropy;
mod mmd;
mod weights;

pub use contrastive::{contrastive_loss, contrastive_loss_with_grad, PairedBatch, COSINE_EPS};
pub use cross_entropy::{cross_entropy, cross_entropy_batch, cross_entropy_batch_with_grad, CE_EPS};
pub use mmd::{
    empirical_mmd, empirical_mmd_with_grad, gram_matrix, median_heuristic_sigma, mmd_bracket, rbf_kernel,
};
pub use weights::{total_loss, LossComponents, LossWeights, SigmaPolicy};
