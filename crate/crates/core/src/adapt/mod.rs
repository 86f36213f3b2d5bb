//! Training loop for the adaptation objective and test-time batch-norm adaptation.

mod augment;
mod batches;
mod config;
mod trace;
mod train;
mod tta;

pub use augment::{augment_features, augment_matrix};
pub use batches::BatchAssembler;
pub use config::TrainConfig;
pub use trace::{EpochRecord, TrainTrace};
pub use train::{fit, split_validation, train_step, validation_ce, EarlyStopping, FitOutcome, StepOutcome, StopDecision};
pub use tta::{tta_adapt, tta_chunks, TtaReport};
