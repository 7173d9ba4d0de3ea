//! Exhaustive verification tools: worst-case and best-case searches over the
//! enumerable spaces, the Statistician-versus-Nature minimax game, a
//! definition-level variance computed by enumerating subsets, and sweep
//! checkers for the five theorems, the decomposition identity, and the
//! increase-by-one bound.
//!
//! Searches iterate in lexicographic order and keep the first strict optimum,
//! so reported witnesses are always the lexicographically smallest and runs
//! are deterministic.

use crate::model::{
    enumerate_allocations, enumerate_distributions, is_proportional, is_three_quarters,
    proportional_allocation, Allocation, AllocationClass, BoundedCompositions, ModelError,
    RedDistribution, Scenario, StratifiedPopulation, DEFAULT_SEARCH_CAP,
};
use crate::ratio::ExactRatio;
use crate::variance::{
    bound_b, minimax_upper_bound, proportional_decomposition, strat_with_parts,
    strat_without_parts, var_simple_with, var_simple_without_fraction,
};
use num::BigInt;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// How many equality cases and probe hits a report stores verbatim; totals
/// are always counted in full.
const MAX_STORED_CASES: usize = 32;

/// Result of a one-sided exhaustive search.
#[derive(Debug, Clone, Serialize)]
pub struct SearchResult {
    pub value: ExactRatio,
    pub decimal: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub allocation: Option<Allocation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distribution: Option<RedDistribution>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class: Option<AllocationClass>,
    pub candidates: u64,
}

impl SearchResult {
    pub fn render_table(&self) -> String {
        let mut lines = vec![
            format!("value: {}", self.value),
            format!("decimal: {}", self.decimal),
        ];
        if let Some(alloc) = &self.allocation {
            lines.push(format!("allocation: {alloc}"));
        }
        if let Some(dist) = &self.distribution {
            lines.push(format!("distribution: {dist}"));
        }
        if let Some(class) = &self.class {
            lines.push(format!("class: {class}"));
        }
        lines.push(format!("candidates: {}", self.candidates));
        lines.join("\n")
    }
}

/// Result of the full minimax game, sandwiched between the closed-form
/// bounds where those apply. The upper bound is `None` when the proportional
/// allocation of `n` does not exist.
#[derive(Debug, Clone, Serialize)]
pub struct MinimaxResult {
    pub value: ExactRatio,
    pub decimal: f64,
    pub lower_bound: ExactRatio,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upper_bound: Option<ExactRatio>,
    pub allocation: Allocation,
    pub distribution: RedDistribution,
    pub class: AllocationClass,
    pub allocations_examined: u64,
    pub candidates: u64,
}

impl MinimaxResult {
    pub fn render_table(&self) -> String {
        let mut lines = vec![
            format!("value: {}", self.value),
            format!("decimal: {}", self.decimal),
            format!("lower bound: {}", self.lower_bound),
        ];
        if let Some(upper) = &self.upper_bound {
            lines.push(format!("upper bound: {upper}"));
        }
        lines.push(format!("allocation: {}", self.allocation));
        lines.push(format!("distribution: {}", self.distribution));
        lines.push(format!("class: {}", self.class));
        lines.push(format!("allocations examined: {}", self.allocations_examined));
        lines.push(format!("candidates: {}", self.candidates));
        lines.join("\n")
    }
}

/// Maximize the without-replacement variance over all red distributions with
/// the given total. Returns the lexicographically smallest maximizer.
pub fn worst_nature(
    pop: &StratifiedPopulation,
    alloc: &Allocation,
    total_red: u64,
    cap: u64,
) -> Result<SearchResult, ModelError> {
    assert_eq!(
        pop.num_strata(),
        alloc.num_strata(),
        "allocation and population must have the same strata"
    );
    let mut best: Option<(RedDistribution, ExactRatio)> = None;
    let mut candidates = 0u64;
    for dist in enumerate_distributions(pop, total_red, cap)? {
        let value = strat_without_parts(pop, &dist, alloc);
        candidates += 1;
        match &best {
            Some((_, incumbent)) if value <= *incumbent => {}
            _ => best = Some((dist, value)),
        }
    }
    let (distribution, value) = best.expect("distribution enumeration is never empty");
    Ok(SearchResult {
        decimal: value.to_f64(),
        value,
        allocation: None,
        distribution: Some(distribution),
        class: None,
        candidates,
    })
}

/// Minimize the without-replacement variance over an allocation class for a
/// fixed red distribution. Returns the lexicographically smallest minimizer.
pub fn best_allocation(
    pop: &StratifiedPopulation,
    dist: &RedDistribution,
    n: u64,
    class: AllocationClass,
    cap: u64,
) -> Result<SearchResult, ModelError> {
    assert_eq!(
        pop.num_strata(),
        dist.num_strata(),
        "distribution and population must have the same strata"
    );
    let mut best: Option<(Allocation, ExactRatio)> = None;
    let mut candidates = 0u64;
    for alloc in enumerate_allocations(pop, n, class, cap)? {
        let value = strat_without_parts(pop, dist, &alloc);
        candidates += 1;
        match &best {
            Some((_, incumbent)) if value >= *incumbent => {}
            _ => best = Some((alloc, value)),
        }
    }
    let (allocation, value) = best.expect("class emptiness is reported by the enumerator");
    Ok(SearchResult {
        decimal: value.to_f64(),
        value,
        allocation: Some(allocation),
        distribution: None,
        class: Some(class),
        candidates,
    })
}

/// Solve the game: the statistician picks an allocation from the class, then
/// nature picks the worst red distribution with the given total. Ties break
/// to the lexicographically smallest allocation, then distribution.
pub fn minimax_value(
    pop: &StratifiedPopulation,
    n: u64,
    total_red: u64,
    class: AllocationClass,
    cap: u64,
) -> Result<MinimaxResult, ModelError> {
    let mut best: Option<(Allocation, SearchResult)> = None;
    let mut allocations_examined = 0u64;
    let mut candidates = 0u64;
    for alloc in enumerate_allocations(pop, n, class, cap)? {
        let worst = worst_nature(pop, &alloc, total_red, cap)?;
        allocations_examined += 1;
        candidates += worst.candidates;
        match &best {
            Some((_, incumbent)) if worst.value >= incumbent.value => {}
            _ => best = Some((alloc, worst)),
        }
    }
    let (allocation, worst) = best.expect("class emptiness is reported by the enumerator");
    let p = ExactRatio::ratio(total_red, pop.total());
    let lower_bound = bound_b(pop.total(), pop.num_strata(), n, &p);
    let upper_bound = minimax_upper_bound(pop, n, &p).ok();
    // The sandwich holds when nature can realize the flat distribution, i.e.
    // when p N_j is an integer in every stratum.
    if shares_are_integral(pop, total_red) {
        if class != AllocationClass::All {
            assert!(
                worst.value >= lower_bound,
                "game value fell below the benchmark bound"
            );
        }
        if matches!(
            class,
            AllocationClass::Admissible | AllocationClass::Proportional
        ) {
            if let Some(upper) = &upper_bound {
                assert!(
                    worst.value <= *upper,
                    "game value exceeded the closed-form upper bound"
                );
            }
        }
    }
    Ok(MinimaxResult {
        value: worst.value,
        decimal: worst.decimal,
        lower_bound,
        upper_bound,
        allocation,
        distribution: worst.distribution.expect("worst_nature always has a witness"),
        class,
        allocations_examined,
        candidates,
    })
}

/// Exact binomial coefficient, `None` on u128 overflow.
fn binomial(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 1..=k {
        acc = acc.checked_mul((n - k + i) as u128)? / i as u128;
    }
    Some(acc)
}

/// Variance of the sample red fraction under without-replacement sampling
/// computed straight from the definition, by enumerating all `C(total, n)`
/// equally likely subsets and averaging.
///
/// This shares no algebra with the closed forms, which is the point.
pub fn exhaustive_variance_y(
    total: u64,
    red: u64,
    n: u64,
    cap: u64,
) -> Result<ExactRatio, ModelError> {
    assert!(total >= 1, "urn must be nonempty");
    assert!(red <= total, "red count exceeds urn size");
    assert!(n >= 1 && n <= total, "draw count must lie in [1, total]");
    let count = binomial(total, n).unwrap_or(u128::MAX);
    if count > cap as u128 {
        return Err(ModelError::SearchSpaceExceeded { count, cap });
    }
    // Index the urn so that items 0..red are the red ones, and walk the
    // n-subsets of 0..total in colex-compatible index order.
    let mut indices: Vec<u64> = (0..n).collect();
    let mut sum_y: u128 = 0;
    let mut sum_y_sq: u128 = 0;
    let mut subsets: u128 = 0;
    loop {
        let y = indices.iter().take_while(|&&i| i < red).count() as u128;
        sum_y += y;
        sum_y_sq += y * y;
        subsets += 1;
        let mut pos = n as usize;
        for i in (0..n as usize).rev() {
            if indices[i] < total - n + i as u64 {
                pos = i;
                break;
            }
        }
        if pos == n as usize {
            break;
        }
        indices[pos] += 1;
        for i in pos + 1..n as usize {
            indices[i] = indices[i - 1] + 1;
        }
    }
    debug_assert_eq!(subsets, count);
    // var(Y/n) = (C * sum(Y^2) - sum(Y)^2) / (C n)^2 over the C subsets.
    let c = BigInt::from(subsets);
    let num = &c * BigInt::from(sum_y_sq) - BigInt::from(sum_y) * BigInt::from(sum_y);
    let den = (&c * BigInt::from(n)).pow(2);
    Ok(ExactRatio::new(num, den))
}

/// The statements this crate can check by exhaustive sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TheoremId {
    /// Stratified with replacement, equal fractions, non-proportional
    /// allocation: strictly worse than simple with replacement.
    T1,
    /// Stratified without replacement, equal fractions, `n < N`: strictly
    /// worse than simple without replacement.
    T2,
    /// Admissible allocations never beat the benchmark bound; equality holds
    /// exactly at the even split of an evenly split population.
    T3,
    /// Equal strata, equal allocation: nature's best is the benchmark bound,
    /// achieved only by the even red distribution.
    T4,
    /// The minimax value is sandwiched between the benchmark bound and the
    /// closed-form upper bound.
    T5,
    /// Proportional decomposition identity and its heterogeneity term.
    E2,
    /// Sampling one extra item per stratum keeps the benchmark bound below
    /// the simple without-replacement variance.
    Inc,
}

impl TheoremId {
    pub const ALL: [TheoremId; 7] = [
        TheoremId::T1,
        TheoremId::T2,
        TheoremId::T3,
        TheoremId::T4,
        TheoremId::T5,
        TheoremId::E2,
        TheoremId::Inc,
    ];
}

impl fmt::Display for TheoremId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            TheoremId::T1 => "1",
            TheoremId::T2 => "2",
            TheoremId::T3 => "3",
            TheoremId::T4 => "4",
            TheoremId::T5 => "5",
            TheoremId::E2 => "E2",
            TheoremId::Inc => "INC",
        };
        write!(f, "{name}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown theorem id `{0}`; expected 1, 2, 3, 4, 5, E2, or INC")]
pub struct UnknownTheoremId(String);

impl FromStr for TheoremId {
    type Err = UnknownTheoremId;

    fn from_str(s: &str) -> Result<Self, UnknownTheoremId> {
        match s.to_ascii_uppercase().as_str() {
            "1" => Ok(TheoremId::T1),
            "2" => Ok(TheoremId::T2),
            "3" => Ok(TheoremId::T3),
            "4" => Ok(TheoremId::T4),
            "5" => Ok(TheoremId::T5),
            "E2" => Ok(TheoremId::E2),
            "INC" => Ok(TheoremId::Inc),
            _ => Err(UnknownTheoremId(s.to_owned())),
        }
    }
}

impl Serialize for TheoremId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TheoremId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Ranges for an exhaustive theorem sweep.
#[derive(Debug, Clone, Serialize)]
pub struct TheoremSweep {
    /// Largest total population `N` to visit.
    pub max_population: u64,
    /// Largest number of strata `m` to visit.
    pub max_strata: usize,
    /// Largest single stratum size to visit.
    pub max_stratum_size: u64,
    /// Equal red fractions to use where a theorem quantifies over `p`.
    pub fractions: Vec<ExactRatio>,
    /// Also probe instances outside the hypotheses and record any breaches
    /// of the conclusion there. Probes never affect the verdict.
    pub include_violations: bool,
    /// Per-enumeration candidate cap.
    pub cap: u64,
}

impl Default for TheoremSweep {
    fn default() -> Self {
        TheoremSweep {
            max_population: 12,
            max_strata: 3,
            max_stratum_size: 12,
            fractions: vec![
                ExactRatio::ratio(1, 4),
                ExactRatio::ratio(1, 2),
                ExactRatio::ratio(3, 4),
            ],
            include_violations: false,
            cap: DEFAULT_SEARCH_CAP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Holds,
    Fails,
}

/// A concrete instance where a checked relation came out wrong.
#[derive(Debug, Clone, Serialize)]
pub struct Counterexample {
    pub scenario: Scenario,
    pub lhs: ExactRatio,
    pub rhs: ExactRatio,
    pub relation: String,
}

impl Counterexample {
    fn describe(&self) -> String {
        let doc = self.scenario.to_doc();
        let alloc = doc
            .alloc
            .as_ref()
            .map(|a| crate::model::join_u64(a))
            .unwrap_or_default();
        format!(
            "sizes={} reds={} alloc={}: {} vs {} ({})",
            crate::model::join_u64(&doc.sizes),
            self.scenario.distribution(),
            alloc,
            self.lhs,
            self.rhs,
            self.relation
        )
    }
}

/// Outcome of one theorem sweep.
#[derive(Debug, Clone, Serialize)]
pub struct TheoremReport {
    pub theorem: TheoremId,
    pub verdict: Verdict,
    pub instances: u64,
    pub failures: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Counterexample>,
    pub equality_count: u64,
    pub equality_cases: Vec<Scenario>,
    pub probe_count: u64,
    pub probes: Vec<Counterexample>,
    pub sweep: TheoremSweep,
}

impl TheoremReport {
    pub fn render_table(&self) -> String {
        let verdict = match self.verdict {
            Verdict::Holds => "holds",
            Verdict::Fails => "fails",
        };
        let mut lines = vec![
            format!("theorem: {}", self.theorem),
            format!("verdict: {verdict}"),
            format!("instances: {}", self.instances),
            format!("failures: {}", self.failures),
            format!("equality cases: {}", self.equality_count),
        ];
        if let Some(ce) = &self.counterexample {
            lines.push(format!("counterexample: {}", ce.describe()));
        }
        if self.probe_count > 0 {
            lines.push(format!("probes outside hypotheses: {}", self.probe_count));
            for probe in &self.probes {
                lines.push(format!("  {}", probe.describe()));
            }
        }
        lines.join("\n")
    }
}

struct Checker {
    instances: u64,
    failures: u64,
    counterexample: Option<Counterexample>,
    equality_count: u64,
    equality_cases: Vec<Scenario>,
    probe_count: u64,
    probes: Vec<Counterexample>,
}

impl Checker {
    fn new() -> Self {
        Checker {
            instances: 0,
            failures: 0,
            counterexample: None,
            equality_count: 0,
            equality_cases: Vec::new(),
            probe_count: 0,
            probes: Vec::new(),
        }
    }

    fn tick(&mut self) {
        self.instances += 1;
    }

    fn fail(&mut self, scenario: Scenario, lhs: ExactRatio, rhs: ExactRatio, relation: &str) {
        self.failures += 1;
        if self.counterexample.is_none() {
            self.counterexample = Some(Counterexample {
                scenario,
                lhs,
                rhs,
                relation: relation.to_owned(),
            });
        }
    }

    fn equality(&mut self, scenario: Scenario) {
        self.equality_count += 1;
        if self.equality_cases.len() < MAX_STORED_CASES {
            self.equality_cases.push(scenario);
        }
    }

    fn probe(&mut self, scenario: Scenario, lhs: ExactRatio, rhs: ExactRatio, relation: &str) {
        self.probe_count += 1;
        if self.probes.len() < MAX_STORED_CASES {
            self.probes.push(Counterexample {
                scenario,
                lhs,
                rhs,
                relation: relation.to_owned(),
            });
        }
    }

    fn finish(self, theorem: TheoremId, sweep: &TheoremSweep) -> TheoremReport {
        TheoremReport {
            theorem,
            verdict: if self.failures == 0 {
                Verdict::Holds
            } else {
                Verdict::Fails
            },
            instances: self.instances,
            failures: self.failures,
            counterexample: self.counterexample,
            equality_count: self.equality_count,
            equality_cases: self.equality_cases,
            probe_count: self.probe_count,
            probes: self.probes,
            sweep: sweep.clone(),
        }
    }
}

/// All stratified populations within the sweep ranges, each stratum of size
/// at least 2, in lexicographic size order per (m, N).
fn sweep_populations(sweep: &TheoremSweep) -> Vec<StratifiedPopulation> {
    let mut pops = Vec::new();
    for m in 2..=sweep.max_strata.max(2) {
        if 2 * m as u64 > sweep.max_population {
            break;
        }
        for total in 2 * m as u64..=sweep.max_population {
            let lows = vec![2u64; m];
            let highs = vec![sweep.max_stratum_size.min(total); m];
            for sizes in BoundedCompositions::new(lows, highs, total) {
                pops.push(StratifiedPopulation::new(sizes).expect("sizes are at least 2"));
            }
        }
    }
    pops
}

fn interior_fractions(sweep: &TheoremSweep) -> Vec<ExactRatio> {
    sweep
        .fractions
        .iter()
        .filter(|p| !p.is_zero() && **p < ExactRatio::one() && !p.is_negative())
        .cloned()
        .collect()
}

fn scenario_of(
    pop: &StratifiedPopulation,
    dist: &RedDistribution,
    alloc: &Allocation,
) -> Scenario {
    Scenario::new(pop.clone(), dist.clone(), alloc.clone())
        .expect("components were validated together")
}

/// `x N_j` divisible by `N` for every stratum.
fn shares_are_integral(pop: &StratifiedPopulation, x: u64) -> bool {
    let total = pop.total() as u128;
    pop.sizes()
        .iter()
        .all(|&size| (x as u128 * size as u128) % total == 0)
}

fn all_equal(values: &[u64]) -> bool {
    values.iter().all(|&v| v == values[0])
}

fn check_t1(sweep: &TheoremSweep) -> Result<Checker, ModelError> {
    let mut checker = Checker::new();
    for pop in sweep_populations(sweep) {
        let m = pop.num_strata() as u64;
        let total = pop.total();
        for p in interior_fractions(sweep) {
            let dist = RedDistribution::uniform(&pop, &p).expect("interior fraction");
            for n in m..=total {
                let simple = var_simple_with(&p, n);
                for alloc in enumerate_allocations(&pop, n, AllocationClass::All, sweep.cap)? {
                    if is_proportional(&pop, &alloc) {
                        continue;
                    }
                    let strat = strat_with_parts(&pop, &dist, &alloc);
                    checker.tick();
                    if strat <= simple {
                        checker.fail(
                            scenario_of(&pop, &dist, &alloc),
                            strat,
                            simple.clone(),
                            "var_strat_with > var_simple_with",
                        );
                    }
                }
            }
        }
    }
    Ok(checker)
}

fn check_t2(sweep: &TheoremSweep) -> Result<Checker, ModelError> {
    let mut checker = Checker::new();
    for pop in sweep_populations(sweep) {
        let m = pop.num_strata() as u64;
        let total = pop.total();
        for p in interior_fractions(sweep) {
            let dist = RedDistribution::uniform(&pop, &p).expect("interior fraction");
            for n in m..total {
                let simple = var_simple_without_fraction(total, &p, n);
                for alloc in enumerate_allocations(&pop, n, AllocationClass::All, sweep.cap)? {
                    let strat = strat_without_parts(&pop, &dist, &alloc);
                    checker.tick();
                    if strat <= simple {
                        checker.fail(
                            scenario_of(&pop, &dist, &alloc),
                            strat,
                            simple.clone(),
                            "var_strat_without > var_simple_without",
                        );
                    }
                }
            }
        }
    }
    Ok(checker)
}

fn check_t3(sweep: &TheoremSweep) -> Result<Checker, ModelError> {
    let mut checker = Checker::new();
    for pop in sweep_populations(sweep) {
        let m = pop.num_strata();
        let total = pop.total();
        let equal_sizes = pop.has_equal_strata();
        for p in interior_fractions(sweep) {
            let dist = RedDistribution::uniform(&pop, &p).expect("interior fraction");
            for n in m as u64..total {
                let bound = bound_b(total, m, n, &p);
                for alloc in enumerate_allocations(&pop, n, AllocationClass::All, sweep.cap)? {
                    let admissible = is_three_quarters(&pop, &alloc)
                        || is_proportional(&pop, &alloc)
                        || equal_sizes;
                    if !admissible {
                        if sweep.include_violations {
                            let strat = strat_without_parts(&pop, &dist, &alloc);
                            if strat < bound {
                                checker.probe(
                                    scenario_of(&pop, &dist, &alloc),
                                    strat,
                                    bound.clone(),
                                    "var_strat_without < bound_b outside the admissible classes",
                                );
                            }
                        }
                        continue;
                    }
                    let strat = strat_without_parts(&pop, &dist, &alloc);
                    checker.tick();
                    let even_split = equal_sizes && all_equal(alloc.counts());
                    if strat < bound {
                        checker.fail(
                            scenario_of(&pop, &dist, &alloc),
                            strat,
                            bound.clone(),
                            "var_strat_without >= bound_b",
                        );
                    } else if strat == bound && !even_split {
                        checker.fail(
                            scenario_of(&pop, &dist, &alloc),
                            strat,
                            bound.clone(),
                            "equality with bound_b away from the even split",
                        );
                    } else if strat > bound && even_split {
                        checker.fail(
                            scenario_of(&pop, &dist, &alloc),
                            strat,
                            bound.clone(),
                            "even split must attain bound_b exactly",
                        );
                    } else if strat == bound {
                        checker.equality(scenario_of(&pop, &dist, &alloc));
                    }
                }
            }
        }
    }
    Ok(checker)
}

/// Equal-stratum populations `[s; m]` with the equal allocation `[per; m]`.
fn equal_designs(sweep: &TheoremSweep) -> Vec<(StratifiedPopulation, Allocation)> {
    let mut designs = Vec::new();
    for m in 2..=sweep.max_strata.max(2) {
        for s in 2..=sweep.max_stratum_size {
            if m as u64 * s > sweep.max_population {
                break;
            }
            let pop = StratifiedPopulation::new(vec![s; m]).expect("s >= 2");
            for per in 1..s {
                let alloc =
                    Allocation::new(&pop, vec![per; m]).expect("per is within every stratum");
                designs.push((pop.clone(), alloc));
            }
        }
    }
    designs
}

fn check_t4(sweep: &TheoremSweep) -> Result<Checker, ModelError> {
    let mut checker = Checker::new();
    for (pop, alloc) in equal_designs(sweep) {
        let m = pop.num_strata() as u64;
        let total = pop.total();
        let n = alloc.total();
        for total_red in 0..=total {
            let p = ExactRatio::ratio(total_red, total);
            let bound = bound_b(total, pop.num_strata(), n, &p);
            let mut max: Option<ExactRatio> = None;
            let mut argmax: Vec<RedDistribution> = Vec::new();
            for dist in enumerate_distributions(&pop, total_red, sweep.cap)? {
                let value = strat_without_parts(&pop, &dist, &alloc);
                match &max {
                    Some(incumbent) if value < *incumbent => {}
                    Some(incumbent) if value == *incumbent => argmax.push(dist),
                    _ => {
                        max = Some(value);
                        argmax = vec![dist];
                    }
                }
            }
            let max = max.expect("distribution enumeration is never empty");
            checker.tick();
            if total_red % m == 0 {
                let even = vec![total_red / m; pop.num_strata()];
                if max != bound {
                    checker.fail(
                        scenario_of(&pop, &argmax[0], &alloc),
                        max.clone(),
                        bound.clone(),
                        "max over distributions == bound_b at a feasible total",
                    );
                } else if argmax.len() != 1 || argmax[0].counts() != Some(&even[..]) {
                    let witness = argmax
                        .iter()
                        .find(|d| d.counts() != Some(&even[..]))
                        .unwrap_or(&argmax[0]);
                    checker.fail(
                        scenario_of(&pop, witness, &alloc),
                        max.clone(),
                        bound.clone(),
                        "even distribution is the unique maximizer",
                    );
                } else {
                    checker.equality(scenario_of(&pop, &argmax[0], &alloc));
                }
            } else if max >= bound {
                checker.fail(
                    scenario_of(&pop, &argmax[0], &alloc),
                    max.clone(),
                    bound.clone(),
                    "max over distributions < bound_b at an infeasible total",
                );
            }
        }
    }
    Ok(checker)
}

fn check_t5(sweep: &TheoremSweep) -> Result<Checker, ModelError> {
    let mut checker = Checker::new();
    for pop in sweep_populations(sweep) {
        let m = pop.num_strata() as u64;
        let total = pop.total();
        for n in m..total {
            if !shares_are_integral(&pop, n) {
                continue;
            }
            let prop = proportional_allocation(&pop, n)?;
            for total_red in 1..total {
                if !shares_are_integral(&pop, total_red) {
                    continue;
                }
                let p = ExactRatio::ratio(total_red, total);
                let bound = bound_b(total, pop.num_strata(), n, &p);
                let upper = minimax_upper_bound(&pop, n, &p)
                    .expect("integral shares satisfy the hypothesis");
                let game =
                    minimax_value(&pop, n, total_red, AllocationClass::Admissible, sweep.cap)?;
                checker.tick();
                if game.value < bound {
                    checker.fail(
                        scenario_of(&pop, &game.distribution, &game.allocation),
                        game.value.clone(),
                        bound.clone(),
                        "bound_b <= minimax value",
                    );
                }
                if game.value > upper {
                    checker.fail(
                        scenario_of(&pop, &game.distribution, &game.allocation),
                        game.value.clone(),
                        upper.clone(),
                        "minimax value <= closed-form upper bound",
                    );
                }
                let at_prop = worst_nature(&pop, &prop, total_red, sweep.cap)?;
                if at_prop.value > upper {
                    checker.fail(
                        scenario_of(
                            &pop,
                            at_prop.distribution.as_ref().expect("witness"),
                            &prop,
                        ),
                        at_prop.value.clone(),
                        upper.clone(),
                        "worst case at the proportional allocation <= upper bound",
                    );
                }
                if 4 * n <= 3 * total {
                    let simple = var_simple_with(&p, n);
                    if upper > simple {
                        let dist = RedDistribution::uniform(&pop, &p).expect("p interior");
                        checker.fail(
                            scenario_of(&pop, &dist, &prop),
                            upper.clone(),
                            simple,
                            "upper bound <= simple with-replacement variance for n <= 3N/4",
                        );
                    }
                }
            }
        }
    }
    Ok(checker)
}

fn check_e2(sweep: &TheoremSweep) -> Result<Checker, ModelError> {
    let mut checker = Checker::new();
    for pop in sweep_populations(sweep) {
        let total = pop.total();
        for n in 1..=total {
            let alloc = match proportional_allocation(&pop, n) {
                Ok(alloc) => alloc,
                Err(_) => continue,
            };
            for total_red in 0..=total {
                for dist in enumerate_distributions(&pop, total_red, sweep.cap)? {
                    let scenario = scenario_of(&pop, &dist, &alloc);
                    let (simple, heterogeneity) = proportional_decomposition(&scenario)
                        .expect("allocation is proportional by construction");
                    let strat = strat_with_parts(&pop, &dist, &alloc);
                    checker.tick();
                    if strat != &simple - &heterogeneity {
                        checker.fail(
                            scenario,
                            strat,
                            simple - heterogeneity,
                            "var_strat_with == simple term minus heterogeneity",
                        );
                        continue;
                    }
                    if heterogeneity.is_negative() {
                        checker.fail(
                            scenario,
                            heterogeneity,
                            ExactRatio::zero(),
                            "heterogeneity >= 0",
                        );
                        continue;
                    }
                    let fractions = dist.fractions();
                    let uniform = fractions.iter().all(|f| f == &fractions[0]);
                    if heterogeneity.is_zero() != uniform {
                        checker.fail(
                            scenario,
                            heterogeneity,
                            ExactRatio::zero(),
                            "heterogeneity vanishes exactly on equal fractions",
                        );
                    } else if heterogeneity.is_zero() {
                        checker.equality(scenario);
                    }
                }
            }
        }
    }
    Ok(checker)
}

fn check_inc(sweep: &TheoremSweep) -> Result<Checker, ModelError> {
    let mut checker = Checker::new();
    for m in 2..=sweep.max_strata.max(2) {
        for total in 2 * m as u64..=sweep.max_population {
            for n in m as u64..=total - m as u64 {
                for total_red in 0..=total {
                    let p = ExactRatio::ratio(total_red, total);
                    let grown = bound_b(total, m, n + m as u64, &p);
                    let simple = var_simple_without_fraction(total, &p, n);
                    checker.tick();
                    if grown > simple {
                        // Only the counterexample needs a concrete layout;
                        // any population with these totals will do.
                        let sizes = BoundedCompositions::new(
                            vec![2; m],
                            vec![total; m],
                            total,
                        )
                        .next()
                        .expect("total >= 2m");
                        let pop = StratifiedPopulation::new(sizes).expect("sizes at least 2");
                        let alloc_counts =
                            BoundedCompositions::new(vec![1; m], pop.sizes().to_vec(), n)
                                .next()
                                .expect("m <= n <= N");
                        let dist = RedDistribution::uniform(&pop, &p).expect("p in [0, 1]");
                        let alloc = Allocation::new(&pop, alloc_counts).expect("within bounds");
                        checker.fail(
                            scenario_of(&pop, &dist, &alloc),
                            grown,
                            simple,
                            "bound_b after one extra draw per stratum <= var_simple_without",
                        );
                    }
                }
            }
        }
    }
    Ok(checker)
}

/// Run one theorem's exhaustive sweep and report the verdict.
pub fn check_theorem(id: TheoremId, sweep: &TheoremSweep) -> Result<TheoremReport, ModelError> {
    let checker = match id {
        TheoremId::T1 => check_t1(sweep)?,
        TheoremId::T2 => check_t2(sweep)?,
        TheoremId::T3 => check_t3(sweep)?,
        TheoremId::T4 => check_t4(sweep)?,
        TheoremId::T5 => check_t5(sweep)?,
        TheoremId::E2 => check_e2(sweep)?,
        TheoremId::Inc => check_inc(sweep)?,
    };
    Ok(checker.finish(id, sweep))
}
