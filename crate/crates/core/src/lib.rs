//! Higher-order interactions in multivariate data.
//!
//! Data are mapped through a Gaussian copula, reduced to covariance matrices,
//! and every n-plet of variables is scored with total correlation, dual total
//! correlation, O-information and S-information. Exhaustive scans stream
//! batches of n-plets through a [`scanner::Reducer`]; greedy and annealing
//! searches in [`optim`] cover systems too large to enumerate.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod copula;
pub mod error;
pub mod io;
pub mod linalg;
pub mod measures;
pub mod nplet;
pub mod optim;
pub mod scanner;
pub mod synthetic;

pub use copula::{
    copula_covariance, copula_transform, corrected_entropy_nats, entropy_bias, estimate_covariance,
    gaussian_entropy_nats, CovSet, CovarianceMatrix, DataMatrix, EntropyValue, UNIT_NORMAL_ENTROPY,
};
pub use error::{HoiError, Result};
pub use measures::{compute_hoi_batch, pairwise_mi, Direction, HoiBatch, Measure};
pub use nplet::{count_nplets, enumerate_orders, NpletBatch};
pub use optim::{anneal, greedy, AnnealSchedule, GreedyConfig, ObjectiveSpec};
pub use scanner::{extract_features, scan, Histogram, Reducer, ScanConfig, TopK};
