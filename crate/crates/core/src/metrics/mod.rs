//! Batch-effect diagnostics: kernel MMD and PCA.

pub mod mmd;
pub mod pca;

pub use mmd::{
    gaussian_kernel, median_heuristic, mmd2, mmd_protocol, Estimator, KernelSpec, MmdReport,
    ProtocolConfig, Summary,
};
pub use pca::{pca_fit, separation, PcaModel, Separation};
