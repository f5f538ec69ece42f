//! Clustering of incomplete data by multiple imputation.
//!
//! Each completed copy of an incomplete dataset is clustered, the resulting
//! partitions are pooled by solving the median-partition problem
//! ([`consensus`]) and the clustering instability is decomposed into a
//! within-imputation term, a between-imputation term and their total
//! ([`stability`]).

pub mod cli;
pub mod clustering;
pub mod consensus;
pub mod dataset;
pub mod datagen;
pub mod error;
pub mod exec;
pub mod imputation;
pub mod partition;
pub mod rubin;
pub mod seed;
pub mod simharness;
pub mod stability;

pub use error::{Error, ErrorKind, Result};
