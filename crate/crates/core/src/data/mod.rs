//! Datasets: synthetic generators, the UCI HAR loader and splitting helpers.

mod split;
mod synthetic;
mod ucihar;

pub use split::{kfold, split_train_test, Standardizer};
pub use synthetic::{
    generate_synthetic, generate_synthetic_classification, generate_synthetic_regression,
    SyntheticDataset, SyntheticSpec,
};
pub use ucihar::{load_ucihar, truncate_per_task, UCIHAR_FEATURES};
