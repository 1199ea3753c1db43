//! Binary DDoS flow classification: kNN and SVM base learners combined by
//! stacked generalization, evaluated with repeated stratified random
//! subsampling over CICDDoS2019-style flow CSVs.

pub mod cli;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod flowdata;
pub mod learners;
pub mod matrix;
pub mod rng;

pub use error::{Error, Result};
pub use matrix::Matrix;
