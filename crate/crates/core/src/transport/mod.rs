//! Optimal transport from the comparison group's covariates to the
//! baseline group's.
//!
//! The discrete problem between two uniform empirical measures is solved
//! exactly by network simplex ([`solve_coupling`]). The coupling becomes a
//! map on the source sample by barycentric projection, and a per-coordinate
//! regression forest extends it to unseen points ([`fit_smoothed_map`]).
//! Samples too large for one coupling are handled by [`batched_fit_map`].

mod coupling;
mod diagnostics;
mod map;
pub mod network_simplex;

pub use coupling::{
    barycentric_project, solve_coupling, squared_distance, CouplingOptions, DiscreteCoupling,
    DEFAULT_MEMORY_BUDGET,
};
pub use diagnostics::{
    diagnose_marginals, histogram_overlap, ks_statistic, HistogramBin, MarginalHistogram,
};
pub use map::{
    apply_map, apply_map_all, batch_assignment, batched_barycentric, batched_fit_map,
    fit_smoothed_map, fit_smoothed_map_with, BatchCombine, BatchOptions, SmoothedMap,
    TransportMap, MIN_SMOOTHING_PAIRS,
};
