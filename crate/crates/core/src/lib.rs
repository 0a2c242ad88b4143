//! Numerical laboratory for sparse sample covariance matrices.
//!
//! * [`ensemble`]: sparse data matrices, the Dyson matrix flow, entry cumulants.
//! * [`law`]: the fourth-cumulant corrected Marchenko–Pastur law, its edges,
//!   density and classical locations.
//! * [`spectra`]: eigenvalues, resolvents and eigenvector statistics of samples.
//! * [`twref`]: Tracy–Widom (β = 1) reference samples and their cache.
//! * [`experiments`]: seeded Monte Carlo runs with JSON/CSV reports.

pub mod ensemble;
pub mod error;
pub mod experiments;
pub mod law;
pub mod rng;
pub mod spectra;
pub mod twref;

pub use error::{Error, Result};
