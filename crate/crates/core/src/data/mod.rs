//! TU-format benchmark ingestion, node features and fold splits.

mod features;
mod folds;
mod tu;

pub use features::{build_features, FeatureSpec, DEFAULT_MAX_DEGREE};
pub use folds::split_folds;
pub use tu::{parse_tu_dataset, TuDatasetRaw};
