//! Treatment catalogue, validated datasets, ingestion and fold assignment.

mod catalogue;
mod dataset;
mod folds;
mod load;

pub use catalogue::TreatmentCatalogue;
pub use dataset::{Dataset, Outcome};
pub use folds::{make_folds, FoldAssignment};
pub use load::{load_dataset, read_dataset_dir, write_dataset_dir, LoadReport, Schema};
