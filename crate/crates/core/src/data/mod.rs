//! Embedding records, file I/O, domain partitioning and the synthetic benchmark.

mod io;
mod partition;
mod records;
mod synthetic;

pub use io::{load_embeddings, parse_embeddings, save_embeddings, write_embeddings};
pub use partition::{partition, DomainPartition, PartitionedData, TargetSplit};
pub use records::{
    all_features, feature_matrix, labels_of, EmbeddingRecord, HasFeatures, LabeledRecord, UnlabeledRecord,
};
pub use synthetic::{domain_name, generate_synthetic, SyntheticSpec, OFFSET_PER_UNIT, ROTATION_PER_UNIT};

