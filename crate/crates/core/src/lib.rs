//! Information flow through multilayer perceptrons, measured with a Gibbs
//! probability space defined on each layer.
//!
//! The crate trains small dense networks, turns every layer into a
//! distribution over its neurons, and tracks `I(X, F)`, `I(Y, F)` and
//! `I(X̄, F)` through training. Binning and kernel-density estimators are
//! included for comparison, along with correlation diagnostics for the
//! neuron independence assumption.

pub mod baselines;
pub mod data;
pub mod error;
pub mod gibbs;
pub mod harness;
pub mod iid;
pub mod matrix;
pub mod nn;
pub mod par;

pub use data::Dataset;
pub use error::{Error, Result};
pub use matrix::DenseMatrix;
pub use par::Exec;
