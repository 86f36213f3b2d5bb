//! Projection head, classifier, manual backpropagation and optimization.

mod adam;
mod batchnorm;
mod checkpoint;
mod gradcheck;
mod linear;
mod network;
mod objective;

pub use adam::AdamState;
pub use batchnorm::{BatchNormState, BnCache, BnGrad, BnMode, DEFAULT_EPSILON, DEFAULT_MOMENTUM};
pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use gradcheck::{
    analytic_gradient, compare_gradients, grad_check, numeric_gradient, GradCheckInput, GradCheckReport,
    GRAD_CHECK_FLOOR, GRAD_CHECK_STEP,
};
pub use linear::{LinearGrad, LinearLayer};
pub use network::{
    argmax_labels, dropout_mask, softmax_rows, Classifier, ClassifierCache, DropoutMasks, Gradients, ModelDims,
    ModelState, ProjectionCache, ProjectionHead, DEFAULT_DROPOUT, NUM_CLASSES,
};
pub use objective::{
    objective_backward, objective_forward, objective_value, resolve_sigma, ObjectivePass, StepBatch, StepMasks,
};
