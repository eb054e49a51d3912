//! Stochastic proximal-gradient methods for trimmed estimation.
//!
//! The objective couples per-example weights `w` with model parameters `x`:
//!
//! ```text
//! F(w, x) = (1/n) sum_i w_i f_i(x) + r1(w) + r2(x)
//! ```
//!
//! where `r1` is typically the indicator of the capped simplex
//! `{w in [0,1]^n : sum w = h}`, so that at a minimizer the `n - h` examples
//! with the largest losses get weight zero. [`solver::run`] drives the SMART
//! block-coordinate method (with SAGA, SVRG or full-refresh dual tables) and
//! the PALM, PSPG and minibatch SG baselines.

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod estimator;
pub mod exec;
pub mod instance;
pub mod linalg;
pub mod plan;
pub mod problems;
pub mod prox;
pub mod record;
pub mod solver;
pub mod stationarity;
pub mod stepsize;

pub use error::{Error, Result};
pub use estimator::DualTable;
pub use exec::Exec;
pub use instance::{DynProblem, IterateState, Loss, Problem, Regularizer, Shape};
pub use plan::{DualPolicy, SamplingPlan};
pub use record::{Counters, LogEntry, RunRecord, Stationarity, StopReason};
pub use solver::{run, LogEvery, Method, RunOutcome, StopRule};
pub use stepsize::{RateRegime, StepSizeSchedule};
