//! Dataset ingestion and persistence, standardization, and synthetic batch
//! pairs.

mod csv_io;
mod standardize;
pub mod synthetic;

pub use csv_io::{
    format_f64, load_csv, load_json, matrix_to_csv, save_csv, save_json, write_atomic,
    BatchDataset, Role,
};
pub use standardize::StandardizationParams;
pub use synthetic::{
    generate_synthetic_pair, Distortion, MixtureComponent, Nonlinearity, SyntheticPair,
    SyntheticSpec,
};
