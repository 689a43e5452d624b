//! Semi-supervised classification of multi-descriptor histogram data:
//! χ² kernels, linear and kernel SVMs, Laplacian-regularized least squares
//! and ensemble projection features, plus the experiment protocols that
//! compare them.

pub mod cli;
pub mod config;
pub mod data;
pub mod ensemble;
pub mod error;
pub mod experiments;
pub mod kernel_svm;
pub mod kernels;
pub mod linear;
pub mod manifold;
pub mod matrix;
pub mod report;
pub mod seed;
pub mod synth;

pub use data::{DescriptorSet, DescriptorView, SplitPlan};
pub use error::{Error, Result};
pub use matrix::Matrix;
