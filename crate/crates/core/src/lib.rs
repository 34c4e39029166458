//! Cluster-expansion engine for the hard-core model on the hypercube `Q_d`.

pub mod error;
pub mod hypercube;
pub mod poly;
pub mod ursell;
pub mod cluster_enum;
pub mod expansion;
pub mod defects;
pub mod oracle_sampler;
pub mod acceptance;

pub use error::{Error, Result};
