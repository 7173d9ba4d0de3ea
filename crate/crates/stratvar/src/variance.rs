//! Exact closed-form variances for the four estimators of the population red
//! fraction, the benchmark lower bound, the proportional decomposition, and
//! the relaxed worst-case value used by the minimax analysis.
//!
//! All formulas evaluate in exact rational arithmetic. Functions whose only
//! failure mode is a violated precondition panic; the ones with meaningful
//! runtime failures return a typed error.

use crate::model::{Allocation, Scenario, ScenarioDoc, StratifiedPopulation};
use crate::ratio::ExactRatio;
use crate::RedDistribution;
use num::BigInt;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VarianceError {
    #[error("allocation is not proportional: stratum {index} has n_j N != n N_j")]
    NotProportional { index: usize },
    #[error("hypothesis violated: {detail}")]
    HypothesisViolated { detail: String },
    #[error("stratum {index} is sampled exhaustively; its worst case is degenerate")]
    ExhaustedStratum { index: usize },
}

/// Which estimator a variance or simulation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    SimpleWith,
    SimpleWithout,
    StratWith,
    StratWithout,
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            EstimatorKind::SimpleWith => "simple-with",
            EstimatorKind::SimpleWithout => "simple-without",
            EstimatorKind::StratWith => "strat-with",
            EstimatorKind::StratWithout => "strat-without",
        };
        write!(f, "{name}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error(
    "unknown estimator `{0}`; expected simple-with, simple-without, strat-with, or strat-without"
)]
pub struct ParseKindError(String);

impl FromStr for EstimatorKind {
    type Err = ParseKindError;

    fn from_str(s: &str) -> Result<Self, ParseKindError> {
        match s {
            "simple-with" => Ok(EstimatorKind::SimpleWith),
            "simple-without" => Ok(EstimatorKind::SimpleWithout),
            "strat-with" => Ok(EstimatorKind::StratWith),
            "strat-without" => Ok(EstimatorKind::StratWithout),
            other => Err(ParseKindError(other.to_owned())),
        }
    }
}

fn assert_fraction(p: &ExactRatio) {
    assert!(
        !p.is_negative() && *p <= ExactRatio::one(),
        "red fraction must lie in [0, 1], got {p}"
    );
}

/// `p (1 - p)`.
fn bernoulli_var(p: &ExactRatio) -> ExactRatio {
    p * (ExactRatio::one() - p)
}

/// Variance of the sample red fraction under `n` draws with replacement:
/// `p (1 - p) / n`.
pub fn var_simple_with(p: &ExactRatio, n: u64) -> ExactRatio {
    assert_fraction(p);
    assert!(n >= 1, "need at least one draw");
    bernoulli_var(p) / ExactRatio::from(n)
}

/// Variance of the sample red fraction under `n` draws without replacement
/// from an urn of `total` items, `red` of them red:
/// `red (total - red) (total - n) / (total^2 n (total - 1))`.
///
/// Computed directly from the integer parameters rather than by rescaling the
/// with-replacement variance, so the two routes stay independent checks on
/// one another.
pub fn var_simple_without(total: u64, red: u64, n: u64) -> ExactRatio {
    assert!(total >= 2, "urn must hold at least two items");
    assert!(red <= total, "red count exceeds urn size");
    assert!(n >= 1 && n <= total, "draw count must lie in [1, total]");
    let num = BigInt::from(red) * BigInt::from(total - red) * BigInt::from(total - n);
    let den = BigInt::from(total) * BigInt::from(total) * BigInt::from(n) * BigInt::from(total - 1);
    ExactRatio::new(num, den)
}

/// Without-replacement variance for a possibly non-integer red fraction:
/// the with-replacement variance scaled by `(total - n) / (total - 1)`.
pub fn var_simple_without_fraction(total: u64, p: &ExactRatio, n: u64) -> ExactRatio {
    assert!(total >= 2, "urn must hold at least two items");
    assert!(n >= 1 && n <= total, "draw count must lie in [1, total]");
    var_simple_with(p, n) * ExactRatio::ratio(total - n, total - 1)
}

/// Shared by the public scenario entry points and the exhaustive searches,
/// which evaluate many distributions against one population and allocation.
pub(crate) fn strat_with_parts(
    pop: &StratifiedPopulation,
    dist: &RedDistribution,
    alloc: &Allocation,
) -> ExactRatio {
    debug_assert_eq!(pop.num_strata(), dist.num_strata());
    debug_assert_eq!(pop.num_strata(), alloc.num_strata());
    let total = ExactRatio::from(pop.total());
    let mut acc = ExactRatio::zero();
    for j in 0..pop.num_strata() {
        let weight = (ExactRatio::from(pop.size(j)) / &total).square();
        acc = acc + weight * bernoulli_var(dist.fraction(j)) / ExactRatio::from(alloc.count(j));
    }
    acc
}

pub(crate) fn strat_without_parts(
    pop: &StratifiedPopulation,
    dist: &RedDistribution,
    alloc: &Allocation,
) -> ExactRatio {
    debug_assert_eq!(pop.num_strata(), dist.num_strata());
    debug_assert_eq!(pop.num_strata(), alloc.num_strata());
    let total = ExactRatio::from(pop.total());
    let mut acc = ExactRatio::zero();
    for j in 0..pop.num_strata() {
        let size = pop.size(j);
        let n_j = alloc.count(j);
        let weight = (ExactRatio::from(size) / &total).square();
        let fpc = ExactRatio::ratio(size - n_j, size - 1);
        acc = acc
            + weight * bernoulli_var(dist.fraction(j)) / ExactRatio::from(n_j) * fpc;
    }
    acc
}

/// Variance of the stratified estimator with within-stratum replacement:
/// `sum_j (N_j / N)^2 p_j (1 - p_j) / n_j`.
pub fn var_strat_with(scenario: &Scenario) -> ExactRatio {
    strat_with_parts(
        scenario.population(),
        scenario.distribution(),
        scenario.allocation(),
    )
}

/// Variance of the stratified estimator without replacement:
/// `sum_j (N_j / N)^2 p_j (1 - p_j) / n_j * (N_j - n_j) / (N_j - 1)`.
pub fn var_strat_without(scenario: &Scenario) -> ExactRatio {
    strat_without_parts(
        scenario.population(),
        scenario.distribution(),
        scenario.allocation(),
    )
}

/// Benchmark lower bound `(N - n) p (1 - p) / ((N - m) n)` for sampling `n`
/// of `N` items split into `m` strata.
pub fn bound_b(total: u64, strata: usize, n: u64, p: &ExactRatio) -> ExactRatio {
    assert!(strata >= 2, "need at least 2 strata");
    assert!(
        total > strata as u64,
        "population must exceed the number of strata"
    );
    assert!(n >= 1 && n <= total, "sample size must lie in [1, total]");
    assert_fraction(p);
    bernoulli_var(p) * ExactRatio::ratio(total - n, (total - strata as u64) * n)
}

/// Split of the proportionally allocated with-replacement variance into
/// `p (1 - p) / n` minus the heterogeneity term
/// `(1 / n) sum_j (N_j / N) (p_j - p)^2`.
///
/// Fails with [`VarianceError::NotProportional`] when the scenario allocation
/// is not exactly proportional.
pub fn proportional_decomposition(
    scenario: &Scenario,
) -> Result<(ExactRatio, ExactRatio), VarianceError> {
    let pop = scenario.population();
    let alloc = scenario.allocation();
    let n = alloc.total();
    let total = pop.total();
    for j in 0..pop.num_strata() {
        if alloc.count(j) as u128 * total as u128 != n as u128 * pop.size(j) as u128 {
            return Err(VarianceError::NotProportional { index: j });
        }
    }
    let p = scenario.overall_fraction();
    let simple = var_simple_with(&p, n);
    let total_ratio = ExactRatio::from(total);
    let mut spread = ExactRatio::zero();
    for j in 0..pop.num_strata() {
        let weight = ExactRatio::from(pop.size(j)) / &total_ratio;
        spread = spread + weight * (scenario.distribution().fraction(j) - &p).square();
    }
    let heterogeneity = spread / ExactRatio::from(n);
    Ok((simple, heterogeneity))
}

/// Closed-form upper bound for the minimax value:
/// `B + (N - n) / (4 (N - m) n N^2) * sum_j (N - m N_j) / (N_j - 1)`.
///
/// Requires the proportional allocation of `n` to exist, i.e. `N | n N_j` for
/// every stratum.
pub fn minimax_upper_bound(
    pop: &StratifiedPopulation,
    n: u64,
    p: &ExactRatio,
) -> Result<ExactRatio, VarianceError> {
    assert_fraction(p);
    let total = pop.total();
    let m = pop.num_strata() as u64;
    if n < m || n > total {
        return Err(VarianceError::HypothesisViolated {
            detail: format!("sample size {n} is outside [{m}, {total}]"),
        });
    }
    for (index, &size) in pop.sizes().iter().enumerate() {
        if (n as u128 * size as u128) % total as u128 != 0 {
            return Err(VarianceError::HypothesisViolated {
                detail: format!("stratum {index}: proportional share of {n} is not an integer"),
            });
        }
    }
    let base = bound_b(total, pop.num_strata(), n, p);
    let mut spread = ExactRatio::zero();
    for &size in pop.sizes() {
        let num = BigInt::from(total as i128) - BigInt::from(m as i128 * size as i128);
        spread = spread + ExactRatio::new(num, BigInt::from(size - 1));
    }
    let scale_den = BigInt::from(4u64)
        * BigInt::from(total - m)
        * BigInt::from(n)
        * BigInt::from(total)
        * BigInt::from(total);
    let correction = ExactRatio::new(BigInt::from(total - n), scale_den) * spread;
    Ok(base + correction)
}

/// Value and maximizer of the relaxed worst-case problem.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RelaxedMax {
    pub value: ExactRatio,
    pub maximizer: Vec<ExactRatio>,
}

/// Exact maximum of the without-replacement variance over real-valued
/// stratum fractions `p_j` subject only to `sum_j N_j p_j = p N`.
///
/// With `a_j = N_j^2 (N_j - n_j) / (N^2 (N_j - 1) n_j)` and `b_j = N_j / N`,
/// the unique stationary point is
/// `p_j = 1/2 + b_j (p - 1/2) / (a_j sum_k b_k^2 / a_k)` and the value is
/// `(sum_j a_j - (2p - 1)^2 / (sum_k b_k^2 / a_k)) / 4`.
///
/// Every stratum must be sampled strictly below its size; a stratum with
/// `n_j = N_j` contributes zero variance regardless of `p_j`, which makes the
/// quadratic degenerate.
pub fn nature_relaxed_max(
    pop: &StratifiedPopulation,
    alloc: &Allocation,
    p: &ExactRatio,
) -> Result<RelaxedMax, VarianceError> {
    assert_eq!(
        pop.num_strata(),
        alloc.num_strata(),
        "allocation and population must have the same strata"
    );
    assert_fraction(p);
    let m = pop.num_strata();
    let total = ExactRatio::from(pop.total());
    let mut coeff = Vec::with_capacity(m);
    let mut weight = Vec::with_capacity(m);
    for index in 0..m {
        let size = pop.size(index);
        let n_j = alloc.count(index);
        if n_j >= size {
            return Err(VarianceError::ExhaustedStratum { index });
        }
        let num = BigInt::from(size) * BigInt::from(size) * BigInt::from(size - n_j);
        let den = BigInt::from(pop.total())
            * BigInt::from(pop.total())
            * BigInt::from(size - 1)
            * BigInt::from(n_j);
        coeff.push(ExactRatio::new(num, den));
        weight.push(ExactRatio::from(size) / &total);
    }
    let pull: ExactRatio = weight
        .iter()
        .zip(&coeff)
        .map(|(b, a)| b.square() / a)
        .sum();
    let half = ExactRatio::ratio(1, 2);
    let offset = p - &half;
    let maximizer: Vec<ExactRatio> = weight
        .iter()
        .zip(&coeff)
        .map(|(b, a)| &half + b * &offset / (a * &pull))
        .collect();
    let slope = ExactRatio::from(2u64) * p - ExactRatio::one();
    let coeff_sum: ExactRatio = coeff.iter().cloned().sum();
    let value = (coeff_sum - slope.square() / pull) / ExactRatio::from(4u64);
    Ok(RelaxedMax { value, maximizer })
}

/// One evaluated variance with its inputs echoed.
#[derive(Debug, Clone, Serialize)]
pub struct VarianceReport {
    pub kind: EstimatorKind,
    pub exact: ExactRatio,
    pub decimal: f64,
    pub inputs: ScenarioDoc,
}

impl VarianceReport {
    pub fn render_table(&self) -> String {
        let mut lines = vec![
            format!("kind: {}", self.kind),
            format!("exact: {}", self.exact),
            format!("decimal: {}", self.decimal),
            format!("sizes: {}", crate::model::join_u64(&self.inputs.sizes)),
            format!("reds: {}", self.inputs.reds),
        ];
        if let Some(alloc) = &self.inputs.alloc {
            lines.push(format!("alloc: {}", crate::model::join_u64(alloc)));
        }
        lines.join("\n")
    }
}

/// Evaluate the requested estimator's variance on a full scenario.
///
/// The simple estimators ignore the strata: they draw `n` (the allocation
/// total) from the pooled urn at the overall red fraction.
pub fn variance_report(scenario: &Scenario, kind: EstimatorKind) -> VarianceReport {
    let n = scenario.sample_size();
    let total = scenario.population().total();
    let exact = match kind {
        EstimatorKind::SimpleWith => var_simple_with(&scenario.overall_fraction(), n),
        EstimatorKind::SimpleWithout => {
            var_simple_without_fraction(total, &scenario.overall_fraction(), n)
        }
        EstimatorKind::StratWith => var_strat_with(scenario),
        EstimatorKind::StratWithout => var_strat_without(scenario),
    };
    VarianceReport {
        kind,
        decimal: exact.to_f64(),
        exact,
        inputs: scenario.to_doc(),
    }
}
