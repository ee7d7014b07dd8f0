//! Online topology learning for graphs whose node set grows over time.
//!
//! Signals arrive one per time step; nodes may join at any step and are
//! appended after the existing ones. The crate tracks the covariance of such
//! a stream, estimates a Gaussian graphical model from it online, and
//! provides baselines, synthetic scenarios and regret accounting.

// negated comparisons reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod covariance;
pub mod error;
pub mod experiment;
pub mod gmrf;
pub mod matops;
pub mod metrics;
pub mod online;
pub mod synth;

pub use covariance::{CovarianceModel, CovarianceTracker};
pub use error::{Error, Result};
pub use gmrf::{Gmrf, GmrfParams};
pub use matops::SymMatrix;
pub use online::{OnlineLearner, OnlineOptions, SmoothLoss};
