//! Exact-arithmetic toolkit for the variance of estimators of a two-color
//! population fraction under stratified sampling.
//!
//! The crate models a population of red and black items split into strata,
//! evaluates the classical closed-form variances of the simple and stratified
//! estimators in exact rational arithmetic, checks the comparison theorems
//! between them by exhaustive enumeration on small instances, and solves the
//! minimax game where a statistician picks an allocation before nature picks
//! the least favorable red distribution. A seeded Monte Carlo harness
//! cross-checks the analytic values and is bit-identical across worker
//! counts.

pub mod model;
pub mod oracle;
pub mod ratio;
pub mod simulate;
pub mod variance;

pub use model::{
    enumerate_allocations, enumerate_distributions, is_proportional, is_three_quarters,
    proportional_allocation, Allocation, AllocationClass, ModelError, RedDistribution, RedsDoc,
    Scenario, ScenarioDoc, StratifiedPopulation, DEFAULT_SEARCH_CAP,
};
pub use oracle::{
    best_allocation, check_theorem, exhaustive_variance_y, minimax_value, worst_nature,
    Counterexample, MinimaxResult, SearchResult, TheoremId, TheoremReport, TheoremSweep,
    UnknownTheoremId, Verdict,
};
pub use ratio::{ExactRatio, ParseRatioError};
pub use simulate::{
    draw_with_replacement, draw_without_replacement, estimate, CounterRng, SimConfig, SimError,
    SimResult,
};
pub use variance::{
    bound_b, minimax_upper_bound, nature_relaxed_max, proportional_decomposition, var_simple_with,
    var_simple_without, var_simple_without_fraction, var_strat_with, var_strat_without,
    variance_report, EstimatorKind, RelaxedMax, VarianceError, VarianceReport,
};
