//! Causal discovery for multivariate time series with possibly different
//! sampling rates.
//!
//! The entry point is [`discovery::discover`]: given a [`series::Dataset`] it
//! returns a summary causal graph over the series. Dependence between series
//! is measured with a causal temporal mutual information (CTMI) score that
//! searches over window sizes and lags compatible with the sampling rates,
//! estimates (conditional) mutual information with a k-nearest-neighbour
//! estimator, and judges significance with permutation tests. A PC-style
//! skeleton phase removes edges that become independent given conditioning
//! windows, then entropy-reduction and collider rules orient what remains.
//!
//! Supporting modules: [`csv_io`] reads and writes datasets, [`datagen`]
//! simulates benchmark structures, and [`eval`] scores discovered graphs
//! against ground truth.

pub mod csv_io;
pub mod ctmi;
pub mod datagen;
pub mod discovery;
pub mod error;
pub mod estimator;
pub mod eval;
pub mod graph;
pub mod knn;
pub mod math;
pub mod series;

pub use error::{Error, Result};
