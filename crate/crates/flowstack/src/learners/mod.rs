//! Base classifiers built from scratch: Euclidean kNN (kd-tree index with
//! exact brute-force semantics) and a soft-margin SVM trained by SMO, with
//! Platt-calibrated probability outputs.

mod kdtree;
mod knn;
mod platt;
mod svm;

pub use knn::{brute_force_neighbors, euclidean_distance, knn_fit, KnnModel};
pub use platt::{fit_platt, PlattParams};
pub use svm::{svm_fit, Kernel, KernelSpec, SmoConfig, SvmModel};
