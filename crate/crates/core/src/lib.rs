//! Fair risk assessment: a classifier trained on a baseline group, an
//! optimal-transport map that carries a comparison group's covariates onto
//! the baseline distribution, and split conformal prediction sets.
//!
//! The pipeline has three stages:
//!
//! 1. [`boost`] fits cost-weighted gradient boosted trees on the baseline
//!    group's training split.
//! 2. [`transport`] solves the discrete Kantorovich problem between the two
//!    groups' covariates, turns the coupling into a map by barycentric
//!    projection and smooths it with per-coordinate regression forests.
//! 3. [`conformal`] calibrates prediction sets on the baseline calibration
//!    split; comparison-group rows are transported before being scored.
//!
//! [`fairness`] evaluates the result and [`synth`] generates two-group data
//! with known counterfactual outcomes. [`pipeline`] wires everything into the
//! commands exposed by the `fairrisk` binary.

pub mod boost;
pub mod conformal;
pub mod error;
pub mod fairness;
pub mod forest;
pub mod par;
pub mod pipeline;
pub mod synth;
pub mod tabular;
pub mod transport;
pub mod tree;

pub use error::{Error, Result};
pub use tabular::{Dataset, Group, Label, Record};
