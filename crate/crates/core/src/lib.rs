//! DDoS detection from IP-flow interaction features and generalized
//! multiple kernel learning.
//!
//! The pipeline: packet traces ([`ingest`], [`traffic`]) are cut into
//! fixed windows and partitioned into flow classes ([`flow`]), each window
//! is summarized by the fused SFV/CDF feature pair ([`features`]), and a
//! GMKL classifier ([`kernels`], [`svm`], [`mkl`]) separates normal from
//! attack windows. Kernel family and regularizer are selected by the R
//! fitness; [`eval`] holds the DR/ER metrics and method comparison.

pub mod eval;
pub mod features;
pub mod flow;
pub mod ingest;
pub mod kernels;
pub mod mkl;
pub mod svm;
pub mod traffic;
