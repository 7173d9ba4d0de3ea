//! Shared fixtures for the criterion benchmarks.

use stratvar::{Allocation, RedDistribution, Scenario, StratifiedPopulation};

/// A mid-sized three-stratum scenario used across the benchmarks.
pub fn fixture_scenario() -> Scenario {
    let pop = StratifiedPopulation::new(vec![40, 60, 100]).expect("valid sizes");
    let dist = RedDistribution::from_counts(&pop, vec![12, 30, 45]).expect("valid counts");
    let alloc = Allocation::new(&pop, vec![8, 12, 20]).expect("valid allocation");
    Scenario::new(pop, dist, alloc).expect("valid scenario")
}
