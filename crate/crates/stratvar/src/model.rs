//! Population, red-count distribution, and allocation types, plus exhaustive
//! enumeration of distributions and allocation classes in lexicographic order.
//!
//! Every constructor validates its arguments and reports the first offending
//! stratum index. Enumerations are streaming iterators; the number of items is
//! counted up front and compared against a caller-supplied cap, so a search
//! that would be too large fails fast instead of truncating silently.

use crate::ratio::ExactRatio;
use serde::de::Error as _;
use serde::ser::SerializeSeq;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Default ceiling on the number of enumerated candidates per stream.
pub const DEFAULT_SEARCH_CAP: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("need at least 2 strata, got {0}")]
    TooFewStrata(usize),
    #[error("stratum {index} has size {size}, need at least 2")]
    StratumTooSmall { index: usize, size: u64 },
    #[error("expected {expected} strata, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("stratum {index}: red count {count} exceeds stratum size {size}")]
    RedCountOutOfRange { index: usize, count: u64, size: u64 },
    #[error("stratum {index}: red fraction {fraction} is outside [0, 1]")]
    RedFractionOutOfRange { index: usize, fraction: ExactRatio },
    #[error("stratum {index}: sample size {count} is outside [1, {size}]")]
    AllocationOutOfRange { index: usize, count: u64, size: u64 },
    #[error("total red count {total_red} exceeds population size {population}")]
    RedTotalOutOfRange { total_red: u64, population: u64 },
    #[error("sample size {n} is outside [{min}, {max}]")]
    SampleTotalOutOfRange { n: u64, min: u64, max: u64 },
    #[error("stratum {index}: proportional share of {n} is not an integer")]
    NotProportionable { index: usize, n: u64 },
    #[error("stratum {index}: proportional share of {n} is zero")]
    ZeroStratum { index: usize, n: u64 },
    #[error("search space has {count} candidates, cap is {cap}")]
    SearchSpaceExceeded { count: u128, cap: u64 },
    #[error("allocation class `{class}` is empty for this population and sample size")]
    EmptyClass { class: AllocationClass },
    #[error("invalid scenario document: {0}")]
    InvalidScenario(String),
    #[error("scenario document has no `alloc` field but one is required here")]
    MissingAllocation,
}

/// A population split into strata of two-color (red/black) items.
///
/// At least two strata, each of size at least 2.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StratifiedPopulation {
    sizes: Vec<u64>,
}

impl StratifiedPopulation {
    pub fn new(sizes: Vec<u64>) -> Result<Self, ModelError> {
        if sizes.len() < 2 {
            return Err(ModelError::TooFewStrata(sizes.len()));
        }
        for (index, &size) in sizes.iter().enumerate() {
            if size < 2 {
                return Err(ModelError::StratumTooSmall { index, size });
            }
        }
        Ok(StratifiedPopulation { sizes })
    }

    pub fn num_strata(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[u64] {
        &self.sizes
    }

    pub fn size(&self, index: usize) -> u64 {
        self.sizes[index]
    }

    pub fn total(&self) -> u64 {
        self.sizes.iter().sum()
    }

    pub fn has_equal_strata(&self) -> bool {
        self.sizes.iter().all(|&s| s == self.sizes[0])
    }
}

/// Per-stratum red content, either exact integer counts or bare fractions.
///
/// Integer mode keeps the counts and derives the fractions; fraction mode has
/// no counts. The two modes never compare equal even when the fractions agree,
/// because only integer mode supports exhaustive subset arguments and
/// simulation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RedDistribution {
    counts: Option<Vec<u64>>,
    fractions: Vec<ExactRatio>,
}

impl RedDistribution {
    pub fn from_counts(pop: &StratifiedPopulation, counts: Vec<u64>) -> Result<Self, ModelError> {
        if counts.len() != pop.num_strata() {
            return Err(ModelError::DimensionMismatch {
                expected: pop.num_strata(),
                got: counts.len(),
            });
        }
        for (index, (&count, &size)) in counts.iter().zip(pop.sizes()).enumerate() {
            if count > size {
                return Err(ModelError::RedCountOutOfRange { index, count, size });
            }
        }
        Ok(Self::from_counts_unchecked(pop, counts))
    }

    pub(crate) fn from_counts_unchecked(pop: &StratifiedPopulation, counts: Vec<u64>) -> Self {
        let fractions = counts
            .iter()
            .zip(pop.sizes())
            .map(|(&r, &s)| ExactRatio::ratio(r, s))
            .collect();
        RedDistribution {
            counts: Some(counts),
            fractions,
        }
    }

    pub fn from_fractions(
        pop: &StratifiedPopulation,
        fractions: Vec<ExactRatio>,
    ) -> Result<Self, ModelError> {
        if fractions.len() != pop.num_strata() {
            return Err(ModelError::DimensionMismatch {
                expected: pop.num_strata(),
                got: fractions.len(),
            });
        }
        for (index, fraction) in fractions.iter().enumerate() {
            if fraction.is_negative() || *fraction > ExactRatio::one() {
                return Err(ModelError::RedFractionOutOfRange {
                    index,
                    fraction: fraction.clone(),
                });
            }
        }
        Ok(RedDistribution {
            counts: None,
            fractions,
        })
    }

    /// Equal red fraction `p` in every stratum.
    pub fn uniform(pop: &StratifiedPopulation, p: &ExactRatio) -> Result<Self, ModelError> {
        Self::from_fractions(pop, vec![p.clone(); pop.num_strata()])
    }

    pub fn num_strata(&self) -> usize {
        self.fractions.len()
    }

    pub fn counts(&self) -> Option<&[u64]> {
        self.counts.as_deref()
    }

    pub fn is_integer(&self) -> bool {
        self.counts.is_some()
    }

    pub fn fractions(&self) -> &[ExactRatio] {
        &self.fractions
    }

    pub fn fraction(&self, index: usize) -> &ExactRatio {
        &self.fractions[index]
    }

    pub fn total_red(&self) -> Option<u64> {
        self.counts.as_ref().map(|c| c.iter().sum())
    }

    /// Population-wide red fraction `p = sum_j N_j p_j / N`.
    pub fn overall_fraction(&self, pop: &StratifiedPopulation) -> ExactRatio {
        let weighted: ExactRatio = self
            .fractions
            .iter()
            .zip(pop.sizes())
            .map(|(p, &size)| p * ExactRatio::from(size))
            .sum();
        weighted / ExactRatio::from(pop.total())
    }
}

impl fmt::Display for RedDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.counts {
            Some(counts) => write!(f, "{}", join_u64(counts)),
            None => {
                let parts: Vec<String> = self.fractions.iter().map(|p| p.to_string()).collect();
                write!(f, "{}", parts.join(","))
            }
        }
    }
}

impl Serialize for RedDistribution {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match &self.counts {
            Some(counts) => counts.serialize(serializer),
            None => {
                let mut seq = serializer.serialize_seq(Some(self.fractions.len()))?;
                for p in &self.fractions {
                    seq.serialize_element(&p.to_string())?;
                }
                seq.end()
            }
        }
    }
}

/// Per-stratum sample sizes, `1 <= n_j <= N_j`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Allocation {
    counts: Vec<u64>,
}

impl Allocation {
    pub fn new(pop: &StratifiedPopulation, counts: Vec<u64>) -> Result<Self, ModelError> {
        if counts.len() != pop.num_strata() {
            return Err(ModelError::DimensionMismatch {
                expected: pop.num_strata(),
                got: counts.len(),
            });
        }
        for (index, (&count, &size)) in counts.iter().zip(pop.sizes()).enumerate() {
            if count < 1 || count > size {
                return Err(ModelError::AllocationOutOfRange { index, count, size });
            }
        }
        Ok(Allocation { counts })
    }

    pub(crate) fn from_counts_unchecked(counts: Vec<u64>) -> Self {
        Allocation { counts }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn count(&self, index: usize) -> u64 {
        self.counts[index]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn num_strata(&self) -> usize {
        self.counts.len()
    }
}

impl fmt::Display for Allocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", join_u64(&self.counts))
    }
}

impl Serialize for Allocation {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.counts.serialize(serializer)
    }
}

/// The allocation families searched by the minimax game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AllocationClass {
    /// Every allocation with `1 <= n_j <= N_j`.
    All,
    /// Allocations with `4 n_j <= 3 N_j` in every stratum.
    ThreeQuarters,
    /// The single allocation with `n_j = n N_j / N` exactly, when it exists.
    Proportional,
    /// Union of `ThreeQuarters` and `Proportional`.
    Admissible,
}

impl AllocationClass {
    pub fn contains(&self, pop: &StratifiedPopulation, alloc: &Allocation) -> bool {
        match self {
            AllocationClass::All => true,
            AllocationClass::ThreeQuarters => is_three_quarters(pop, alloc),
            AllocationClass::Proportional => is_proportional(pop, alloc),
            AllocationClass::Admissible => {
                is_three_quarters(pop, alloc) || is_proportional(pop, alloc)
            }
        }
    }
}

impl fmt::Display for AllocationClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            AllocationClass::All => "all",
            AllocationClass::ThreeQuarters => "three-quarters",
            AllocationClass::Proportional => "proportional",
            AllocationClass::Admissible => "admissible",
        };
        write!(f, "{name}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown allocation class `{0}`; expected all, three-quarters, proportional, or admissible")]
pub struct ParseClassError(String);

impl FromStr for AllocationClass {
    type Err = ParseClassError;

    fn from_str(s: &str) -> Result<Self, ParseClassError> {
        match s {
            "all" => Ok(AllocationClass::All),
            "three-quarters" => Ok(AllocationClass::ThreeQuarters),
            "proportional" => Ok(AllocationClass::Proportional),
            "admissible" => Ok(AllocationClass::Admissible),
            other => Err(ParseClassError(other.to_owned())),
        }
    }
}

/// `4 n_j <= 3 N_j` in every stratum.
pub fn is_three_quarters(pop: &StratifiedPopulation, alloc: &Allocation) -> bool {
    alloc
        .counts()
        .iter()
        .zip(pop.sizes())
        .all(|(&n_j, &size)| 4 * n_j <= 3 * size)
}

/// `n_j N == n N_j` exactly in every stratum.
pub fn is_proportional(pop: &StratifiedPopulation, alloc: &Allocation) -> bool {
    let n = alloc.total() as u128;
    let total = pop.total() as u128;
    alloc
        .counts()
        .iter()
        .zip(pop.sizes())
        .all(|(&n_j, &size)| n_j as u128 * total == n * size as u128)
}

/// The exactly proportional allocation `n_j = n N_j / N`, if all shares are
/// positive integers.
pub fn proportional_allocation(
    pop: &StratifiedPopulation,
    n: u64,
) -> Result<Allocation, ModelError> {
    let total = pop.total();
    if n < 1 || n > total {
        return Err(ModelError::SampleTotalOutOfRange {
            n,
            min: 1,
            max: total,
        });
    }
    let mut counts = Vec::with_capacity(pop.num_strata());
    for (index, &size) in pop.sizes().iter().enumerate() {
        let product = n as u128 * size as u128;
        if product % total as u128 != 0 {
            return Err(ModelError::NotProportionable { index, n });
        }
        let share = (product / total as u128) as u64;
        if share == 0 {
            return Err(ModelError::ZeroStratum { index, n });
        }
        counts.push(share);
    }
    Ok(Allocation::from_counts_unchecked(counts))
}

/// Integer vectors `x` with `lows[j] <= x[j] <= highs[j]` and `sum x = total`,
/// produced in ascending lexicographic order.
pub(crate) struct BoundedCompositions {
    lows: Vec<u64>,
    highs: Vec<u64>,
    suffix_low: Vec<u64>,
    suffix_high: Vec<u64>,
    total: u64,
    state: Option<Vec<u64>>,
    done: bool,
}

impl BoundedCompositions {
    pub(crate) fn new(lows: Vec<u64>, highs: Vec<u64>, total: u64) -> Self {
        assert_eq!(lows.len(), highs.len());
        let m = lows.len();
        let mut suffix_low = vec![0u64; m + 1];
        let mut suffix_high = vec![0u64; m + 1];
        for j in (0..m).rev() {
            suffix_low[j] = suffix_low[j + 1] + lows[j];
            suffix_high[j] = suffix_high[j + 1] + highs[j];
        }
        let feasible = m > 0
            && lows.iter().zip(&highs).all(|(l, h)| l <= h)
            && suffix_low[0] <= total
            && total <= suffix_high[0];
        BoundedCompositions {
            lows,
            highs,
            suffix_low,
            suffix_high,
            total,
            state: None,
            done: !feasible,
        }
    }

    /// Lexicographically smallest completion of positions `from..` summing to
    /// `rem`. Caller guarantees `rem` is within the suffix bounds.
    fn fill_minimal(&self, x: &mut [u64], from: usize, mut rem: u64) {
        for j in from..x.len() {
            let floor = rem.saturating_sub(self.suffix_high[j + 1]);
            let value = self.lows[j].max(floor);
            x[j] = value;
            rem -= value;
        }
        debug_assert_eq!(rem, 0);
    }
}

impl Iterator for BoundedCompositions {
    type Item = Vec<u64>;

    fn next(&mut self) -> Option<Vec<u64>> {
        if self.done {
            return None;
        }
        let m = self.lows.len();
        match self.state.take() {
            None => {
                let mut x = vec![0u64; m];
                self.fill_minimal(&mut x, 0, self.total);
                self.state = Some(x.clone());
                Some(x)
            }
            Some(mut x) => {
                // Find the rightmost position that can take one more unit
                // while the suffix after it can give one up.
                let mut suffix_sum = *x.last().unwrap();
                for i in (0..m.saturating_sub(1)).rev() {
                    if x[i] < self.highs[i] && suffix_sum > self.suffix_low[i + 1] {
                        x[i] += 1;
                        self.fill_minimal(&mut x, i + 1, suffix_sum - 1);
                        self.state = Some(x.clone());
                        return Some(x);
                    }
                    suffix_sum += x[i];
                }
                self.done = true;
                None
            }
        }
    }
}

/// Number of bounded compositions, saturating at `u128::MAX`.
pub(crate) fn count_bounded(lows: &[u64], highs: &[u64], total: u64) -> u128 {
    let suffix_high: u64 = highs.iter().sum();
    let suffix_low: u64 = lows.iter().sum();
    if total > suffix_high || total < suffix_low {
        return 0;
    }
    let mut ways = vec![0u128; total as usize + 1];
    ways[0] = 1;
    for (&low, &high) in lows.iter().zip(highs) {
        let mut next = vec![0u128; total as usize + 1];
        for t in 0..=total {
            if ways[t as usize] == 0 {
                continue;
            }
            let hi = high.min(total - t);
            for v in low..=hi {
                let cell = &mut next[(t + v) as usize];
                *cell = cell.saturating_add(ways[t as usize]);
            }
            if low > total - t {
                continue;
            }
        }
        ways = next;
    }
    ways[total as usize]
}

/// Streaming enumeration of all red-count distributions with a fixed total.
pub struct DistributionStream {
    inner: BoundedCompositions,
    sizes: Vec<u64>,
}

impl Iterator for DistributionStream {
    type Item = RedDistribution;

    fn next(&mut self) -> Option<RedDistribution> {
        let counts = self.inner.next()?;
        let fractions = counts
            .iter()
            .zip(&self.sizes)
            .map(|(&r, &s)| ExactRatio::ratio(r, s))
            .collect();
        Some(RedDistribution {
            counts: Some(counts),
            fractions,
        })
    }
}

/// All integer red distributions `0 <= r_j <= N_j` with `sum r_j = total_red`,
/// ascending lexicographic in `(r_1, ..., r_m)`.
pub fn enumerate_distributions(
    pop: &StratifiedPopulation,
    total_red: u64,
    cap: u64,
) -> Result<DistributionStream, ModelError> {
    let population = pop.total();
    if total_red > population {
        return Err(ModelError::RedTotalOutOfRange {
            total_red,
            population,
        });
    }
    let lows = vec![0u64; pop.num_strata()];
    let count = count_bounded(&lows, pop.sizes(), total_red);
    if count > cap as u128 {
        return Err(ModelError::SearchSpaceExceeded { count, cap });
    }
    Ok(DistributionStream {
        inner: BoundedCompositions::new(lows, pop.sizes().to_vec(), total_red),
        sizes: pop.sizes().to_vec(),
    })
}

enum AllocInner {
    Stream(BoundedCompositions),
    Single(Option<Vec<u64>>),
    /// Three-quarters stream merged with the proportional allocation when the
    /// latter is not itself a three-quarters member.
    Merged {
        stream: BoundedCompositions,
        extra: Option<Vec<u64>>,
        buffered: Option<Vec<u64>>,
    },
}

/// Streaming enumeration of an allocation class in lexicographic order.
pub struct AllocationStream {
    inner: AllocInner,
}

impl Iterator for AllocationStream {
    type Item = Allocation;

    fn next(&mut self) -> Option<Allocation> {
        let counts = match &mut self.inner {
            AllocInner::Stream(stream) => stream.next(),
            AllocInner::Single(slot) => slot.take(),
            AllocInner::Merged {
                stream,
                extra,
                buffered,
            } => {
                let candidate = buffered.take().or_else(|| stream.next());
                match (candidate, extra.is_some()) {
                    (Some(v), true) if v < *extra.as_ref().unwrap() => Some(v),
                    (Some(v), true) => {
                        *buffered = Some(v);
                        extra.take()
                    }
                    (Some(v), false) => Some(v),
                    (None, _) => extra.take(),
                }
            }
        };
        counts.map(Allocation::from_counts_unchecked)
    }
}

fn three_quarter_highs(pop: &StratifiedPopulation) -> Vec<u64> {
    pop.sizes().iter().map(|&size| 3 * size / 4).collect()
}

/// All allocations of `n` draws in the given class, ascending lexicographic in
/// `(n_1, ..., n_m)`.
pub fn enumerate_allocations(
    pop: &StratifiedPopulation,
    n: u64,
    class: AllocationClass,
    cap: u64,
) -> Result<AllocationStream, ModelError> {
    let m = pop.num_strata() as u64;
    let total = pop.total();
    if n < m || n > total {
        return Err(ModelError::SampleTotalOutOfRange {
            n,
            min: m,
            max: total,
        });
    }
    let lows = vec![1u64; pop.num_strata()];
    let guard = |count: u128| -> Result<(), ModelError> {
        if count == 0 {
            Err(ModelError::EmptyClass { class })
        } else if count > cap as u128 {
            Err(ModelError::SearchSpaceExceeded { count, cap })
        } else {
            Ok(())
        }
    };
    let inner = match class {
        AllocationClass::All => {
            guard(count_bounded(&lows, pop.sizes(), n))?;
            AllocInner::Stream(BoundedCompositions::new(lows, pop.sizes().to_vec(), n))
        }
        AllocationClass::ThreeQuarters => {
            let highs = three_quarter_highs(pop);
            guard(count_bounded(&lows, &highs, n))?;
            AllocInner::Stream(BoundedCompositions::new(lows, highs, n))
        }
        AllocationClass::Proportional => match proportional_allocation(pop, n) {
            Ok(alloc) => AllocInner::Single(Some(alloc.counts().to_vec())),
            Err(ModelError::NotProportionable { .. }) | Err(ModelError::ZeroStratum { .. }) => {
                return Err(ModelError::EmptyClass { class });
            }
            Err(e) => return Err(e),
        },
        AllocationClass::Admissible => {
            let highs = three_quarter_highs(pop);
            let stream_count = count_bounded(&lows, &highs, n);
            let extra = match proportional_allocation(pop, n) {
                Ok(alloc) if !is_three_quarters(pop, &alloc) => Some(alloc.counts().to_vec()),
                _ => None,
            };
            guard(stream_count + extra.is_some() as u128)?;
            AllocInner::Merged {
                stream: BoundedCompositions::new(lows, highs, n),
                extra,
                buffered: None,
            }
        }
    };
    Ok(AllocationStream { inner })
}

/// A fully specified instance: population, red contents, and allocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    population: StratifiedPopulation,
    distribution: RedDistribution,
    allocation: Allocation,
}

impl Scenario {
    pub fn new(
        population: StratifiedPopulation,
        distribution: RedDistribution,
        allocation: Allocation,
    ) -> Result<Self, ModelError> {
        // The parts may have been validated against different populations, so
        // check the joint invariants again.
        if distribution.num_strata() != population.num_strata() {
            return Err(ModelError::DimensionMismatch {
                expected: population.num_strata(),
                got: distribution.num_strata(),
            });
        }
        if let Some(counts) = distribution.counts() {
            for (index, (&count, &size)) in counts.iter().zip(population.sizes()).enumerate() {
                if count > size {
                    return Err(ModelError::RedCountOutOfRange { index, count, size });
                }
            }
        }
        if allocation.num_strata() != population.num_strata() {
            return Err(ModelError::DimensionMismatch {
                expected: population.num_strata(),
                got: allocation.num_strata(),
            });
        }
        for (index, (&count, &size)) in allocation
            .counts()
            .iter()
            .zip(population.sizes())
            .enumerate()
        {
            if count < 1 || count > size {
                return Err(ModelError::AllocationOutOfRange { index, count, size });
            }
        }
        Ok(Scenario {
            population,
            distribution,
            allocation,
        })
    }

    pub fn population(&self) -> &StratifiedPopulation {
        &self.population
    }

    pub fn distribution(&self) -> &RedDistribution {
        &self.distribution
    }

    pub fn allocation(&self) -> &Allocation {
        &self.allocation
    }

    pub fn num_strata(&self) -> usize {
        self.population.num_strata()
    }

    pub fn sample_size(&self) -> u64 {
        self.allocation.total()
    }

    /// Population-wide red fraction.
    pub fn overall_fraction(&self) -> ExactRatio {
        self.distribution.overall_fraction(&self.population)
    }

    pub fn to_doc(&self) -> ScenarioDoc {
        let reds = match self.distribution.counts() {
            Some(counts) => RedsDoc::Counts(counts.to_vec()),
            None => RedsDoc::Fractions(
                self.distribution
                    .fractions()
                    .iter()
                    .map(|p| p.to_string())
                    .collect(),
            ),
        };
        ScenarioDoc {
            sizes: self.population.sizes().to_vec(),
            reds,
            alloc: Some(self.allocation.counts().to_vec()),
        }
    }

    pub fn from_doc(doc: &ScenarioDoc) -> Result<Self, ModelError> {
        let (population, distribution, allocation) = doc.components()?;
        let allocation = allocation.ok_or(ModelError::MissingAllocation)?;
        Scenario::new(population, distribution, allocation)
    }
}

impl Serialize for Scenario {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_doc().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Scenario {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let doc = ScenarioDoc::deserialize(deserializer)?;
        Scenario::from_doc(&doc).map_err(D::Error::custom)
    }
}

/// On-disk scenario document.
///
/// `reds` is either integer counts or `"num/den"` fraction strings; `alloc`
/// may be omitted for commands that search over allocations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    pub sizes: Vec<u64>,
    pub reds: RedsDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alloc: Option<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RedsDoc {
    Counts(Vec<u64>),
    Fractions(Vec<String>),
}

impl fmt::Display for RedsDoc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RedsDoc::Counts(counts) => write!(f, "{}", join_u64(counts)),
            RedsDoc::Fractions(strings) => write!(f, "{}", strings.join(",")),
        }
    }
}

impl ScenarioDoc {
    pub fn parse(text: &str) -> Result<Self, ModelError> {
        serde_json::from_str(text).map_err(|e| ModelError::InvalidScenario(e.to_string()))
    }

    /// Validate and build the typed components.
    pub fn components(
        &self,
    ) -> Result<(StratifiedPopulation, RedDistribution, Option<Allocation>), ModelError> {
        let population = StratifiedPopulation::new(self.sizes.clone())?;
        let distribution = match &self.reds {
            RedsDoc::Counts(counts) => RedDistribution::from_counts(&population, counts.clone())?,
            RedsDoc::Fractions(strings) => {
                let mut fractions = Vec::with_capacity(strings.len());
                for (index, s) in strings.iter().enumerate() {
                    let fraction: ExactRatio = s.parse().map_err(|e| {
                        ModelError::InvalidScenario(format!("reds[{index}]: {e}"))
                    })?;
                    fractions.push(fraction);
                }
                RedDistribution::from_fractions(&population, fractions)?
            }
        };
        let allocation = match &self.alloc {
            Some(counts) => Some(Allocation::new(&population, counts.clone())?),
            None => None,
        };
        Ok((population, distribution, allocation))
    }
}

pub(crate) fn join_u64(values: &[u64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pop(sizes: &[u64]) -> StratifiedPopulation {
        StratifiedPopulation::new(sizes.to_vec()).unwrap()
    }

    #[test]
    fn population_validation() {
        assert!(StratifiedPopulation::new(vec![5, 5]).is_ok());
        assert_eq!(
            StratifiedPopulation::new(vec![5]),
            Err(ModelError::TooFewStrata(1))
        );
        assert_eq!(
            StratifiedPopulation::new(vec![5, 1]),
            Err(ModelError::StratumTooSmall { index: 1, size: 1 })
        );
        assert_eq!(pop(&[2, 5]).total(), 7);
        assert!(pop(&[4, 4, 4]).has_equal_strata());
        assert!(!pop(&[4, 6]).has_equal_strata());
    }

    #[test]
    fn distribution_validation() {
        let p = pop(&[5, 5]);
        let d = RedDistribution::from_counts(&p, vec![1, 3]).unwrap();
        assert_eq!(d.total_red(), Some(4));
        assert_eq!(d.fraction(0), &ExactRatio::ratio(1, 5));
        assert_eq!(d.overall_fraction(&p), ExactRatio::ratio(2, 5));
        assert_eq!(
            RedDistribution::from_counts(&p, vec![1, 6]),
            Err(ModelError::RedCountOutOfRange {
                index: 1,
                count: 6,
                size: 5
            })
        );
        assert_eq!(
            RedDistribution::from_counts(&p, vec![1]),
            Err(ModelError::DimensionMismatch {
                expected: 2,
                got: 1
            })
        );
        let frac = RedDistribution::uniform(&p, &ExactRatio::ratio(1, 2)).unwrap();
        assert_eq!(frac.total_red(), None);
        assert_eq!(frac.overall_fraction(&p), ExactRatio::ratio(1, 2));
        assert!(matches!(
            RedDistribution::from_fractions(&p, vec![ExactRatio::ratio(1, 2), ExactRatio::ratio(3, 2)]),
            Err(ModelError::RedFractionOutOfRange { index: 1, .. })
        ));
    }

    #[test]
    fn integer_and_fraction_modes_are_distinct() {
        let p = pop(&[5, 5]);
        let ints = RedDistribution::from_counts(&p, vec![1, 3]).unwrap();
        let fracs = RedDistribution::from_fractions(
            &p,
            vec![ExactRatio::ratio(1, 5), ExactRatio::ratio(3, 5)],
        )
        .unwrap();
        assert_eq!(ints.fractions(), fracs.fractions());
        assert_ne!(ints, fracs);
    }

    #[test]
    fn allocation_validation() {
        let p = pop(&[2, 5]);
        let a = Allocation::new(&p, vec![2, 4]).unwrap();
        assert_eq!(a.total(), 6);
        assert_eq!(
            Allocation::new(&p, vec![0, 4]),
            Err(ModelError::AllocationOutOfRange {
                index: 0,
                count: 0,
                size: 2
            })
        );
        assert_eq!(
            Allocation::new(&p, vec![2, 6]),
            Err(ModelError::AllocationOutOfRange {
                index: 1,
                count: 6,
                size: 5
            })
        );
    }

    #[test]
    fn class_membership() {
        let p = pop(&[4, 6]);
        let prop = Allocation::new(&p, vec![2, 3]).unwrap();
        assert!(is_proportional(&p, &prop));
        assert!(is_three_quarters(&p, &prop));
        assert!(AllocationClass::Admissible.contains(&p, &prop));
        let skew = Allocation::new(&p, vec![4, 1]).unwrap();
        assert!(!is_proportional(&p, &skew));
        assert!(!is_three_quarters(&p, &skew));
        assert!(!AllocationClass::Admissible.contains(&p, &skew));
        assert!(AllocationClass::All.contains(&p, &skew));
    }

    #[test]
    fn proportional_allocation_cases() {
        assert_eq!(
            proportional_allocation(&pop(&[4, 6]), 5).unwrap().counts(),
            &[2, 3]
        );
        assert_eq!(
            proportional_allocation(&pop(&[5, 5]), 10).unwrap().counts(),
            &[5, 5]
        );
        assert_eq!(
            proportional_allocation(&pop(&[5, 5]), 3),
            Err(ModelError::NotProportionable { index: 0, n: 3 })
        );
        assert_eq!(
            proportional_allocation(&pop(&[5, 5]), 11),
            Err(ModelError::SampleTotalOutOfRange {
                n: 11,
                min: 1,
                max: 10
            })
        );
    }

    #[test]
    fn distributions_enumerate_in_lex_order() {
        let p = pop(&[2, 2]);
        let items: Vec<Vec<u64>> = enumerate_distributions(&p, 2, DEFAULT_SEARCH_CAP)
            .unwrap()
            .map(|d| d.counts().unwrap().to_vec())
            .collect();
        assert_eq!(items, vec![vec![0, 2], vec![1, 1], vec![2, 0]]);

        let p = pop(&[5, 5]);
        let items: Vec<Vec<u64>> = enumerate_distributions(&p, 4, DEFAULT_SEARCH_CAP)
            .unwrap()
            .map(|d| d.counts().unwrap().to_vec())
            .collect();
        assert_eq!(
            items,
            vec![vec![0, 4], vec![1, 3], vec![2, 2], vec![3, 1], vec![4, 0]]
        );

        let items: Vec<Vec<u64>> = enumerate_distributions(&pop(&[3, 3]), 0, DEFAULT_SEARCH_CAP)
            .unwrap()
            .map(|d| d.counts().unwrap().to_vec())
            .collect();
        assert_eq!(items, vec![vec![0, 0]]);
    }

    #[test]
    fn distribution_enumeration_errors() {
        let p = pop(&[5, 5]);
        assert!(matches!(
            enumerate_distributions(&p, 11, DEFAULT_SEARCH_CAP),
            Err(ModelError::RedTotalOutOfRange { .. })
        ));
        assert_eq!(
            enumerate_distributions(&p, 4, 3).err(),
            Some(ModelError::SearchSpaceExceeded { count: 5, cap: 3 })
        );
    }

    #[test]
    fn allocations_enumerate_in_lex_order() {
        let p = pop(&[2, 2]);
        let items: Vec<Vec<u64>> =
            enumerate_allocations(&p, 3, AllocationClass::All, DEFAULT_SEARCH_CAP)
                .unwrap()
                .map(|a| a.counts().to_vec())
                .collect();
        assert_eq!(items, vec![vec![1, 2], vec![2, 1]]);

        let items: Vec<Vec<u64>> =
            enumerate_allocations(&pop(&[2, 5]), 6, AllocationClass::All, DEFAULT_SEARCH_CAP)
                .unwrap()
                .map(|a| a.counts().to_vec())
                .collect();
        assert_eq!(items, vec![vec![1, 5], vec![2, 4]]);
    }

    #[test]
    fn allocation_class_streams() {
        let p = pop(&[4, 6]);
        let items: Vec<Vec<u64>> =
            enumerate_allocations(&p, 5, AllocationClass::Proportional, DEFAULT_SEARCH_CAP)
                .unwrap()
                .map(|a| a.counts().to_vec())
                .collect();
        assert_eq!(items, vec![vec![2, 3]]);

        assert_eq!(
            enumerate_allocations(&pop(&[2, 5]), 6, AllocationClass::ThreeQuarters, 100).err(),
            Some(ModelError::EmptyClass {
                class: AllocationClass::ThreeQuarters
            })
        );
        assert_eq!(
            enumerate_allocations(&pop(&[5, 5]), 3, AllocationClass::Proportional, 100).err(),
            Some(ModelError::EmptyClass {
                class: AllocationClass::Proportional
            })
        );

        // On (2,2) with n = 4 the three-quarters family is empty but the
        // proportional allocation (2,2) still makes the admissible class
        // nonempty.
        let items: Vec<Vec<u64>> =
            enumerate_allocations(&pop(&[2, 2]), 4, AllocationClass::Admissible, 100)
                .unwrap()
                .map(|a| a.counts().to_vec())
                .collect();
        assert_eq!(items, vec![vec![2, 2]]);
        assert_eq!(
            enumerate_allocations(&pop(&[2, 2]), 4, AllocationClass::ThreeQuarters, 100).err(),
            Some(ModelError::EmptyClass {
                class: AllocationClass::ThreeQuarters
            })
        );

        // Admissible never double-counts a proportional allocation that is
        // already a three-quarters member.
        let items: Vec<Vec<u64>> =
            enumerate_allocations(&pop(&[4, 4]), 6, AllocationClass::Admissible, 100)
                .unwrap()
                .map(|a| a.counts().to_vec())
                .collect();
        assert_eq!(items, vec![vec![3, 3]]);

        assert!(matches!(
            enumerate_allocations(&pop(&[5, 5]), 1, AllocationClass::All, 100),
            Err(ModelError::SampleTotalOutOfRange { n: 1, min: 2, .. })
        ));
    }

    #[test]
    fn scenario_joint_validation() {
        let p = pop(&[5, 5]);
        let d = RedDistribution::from_counts(&p, vec![1, 3]).unwrap();
        let a = Allocation::new(&p, vec![2, 2]).unwrap();
        let s = Scenario::new(p, d, a).unwrap();
        assert_eq!(s.sample_size(), 4);
        assert_eq!(s.overall_fraction(), ExactRatio::ratio(2, 5));

        // Parts validated against one population must not pass for another.
        let small = pop(&[2, 2]);
        let d = RedDistribution::from_counts(&pop(&[5, 5]), vec![4, 4]).unwrap();
        let a = Allocation::new(&small, vec![1, 1]).unwrap();
        assert_eq!(
            Scenario::new(small, d, a),
            Err(ModelError::RedCountOutOfRange {
                index: 0,
                count: 4,
                size: 2
            })
        );
    }

    #[test]
    fn scenario_doc_round_trip() {
        let text = r#"{"sizes": [5, 5], "reds": [2, 2], "alloc": [2, 2]}"#;
        let doc = ScenarioDoc::parse(text).unwrap();
        let scenario = Scenario::from_doc(&doc).unwrap();
        assert_eq!(scenario.population().sizes(), &[5, 5]);
        assert_eq!(scenario.distribution().counts(), Some(&[2u64, 2][..]));
        assert_eq!(scenario.to_doc(), doc);

        let rational = r#"{"sizes": [5, 5], "reds": ["1/2", "1/2"], "alloc": [2, 2]}"#;
        let doc = ScenarioDoc::parse(rational).unwrap();
        let scenario = Scenario::from_doc(&doc).unwrap();
        assert!(!scenario.distribution().is_integer());
        assert_eq!(
            scenario.distribution().fraction(0),
            &ExactRatio::ratio(1, 2)
        );

        let no_alloc = r#"{"sizes": [5, 5], "reds": [2, 2]}"#;
        let doc = ScenarioDoc::parse(no_alloc).unwrap();
        assert_eq!(Scenario::from_doc(&doc), Err(ModelError::MissingAllocation));
        let (_, _, alloc) = doc.components().unwrap();
        assert!(alloc.is_none());

        assert!(matches!(
            ScenarioDoc::parse("{\"sizes\": [5, 5]}"),
            Err(ModelError::InvalidScenario(_))
        ));
        let bad_fraction = r#"{"sizes": [5, 5], "reds": ["1/2", "x"], "alloc": [2, 2]}"#;
        let doc = ScenarioDoc::parse(bad_fraction).unwrap();
        assert!(matches!(
            doc.components(),
            Err(ModelError::InvalidScenario(_))
        ));
    }

    #[test]
    fn scenario_json_uses_fraction_strings() {
        let p = pop(&[5, 5]);
        let d = RedDistribution::uniform(&p, &ExactRatio::ratio(1, 2)).unwrap();
        let a = Allocation::new(&p, vec![2, 2]).unwrap();
        let s = Scenario::new(p, d, a).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(
            json,
            r#"{"sizes":[5,5],"reds":["1/2","1/2"],"alloc":[2,2]}"#
        );
    }

    /// Slow reference counter used only to cross-check the DP and streams.
    fn count_by_recursion(lows: &[u64], highs: &[u64], total: u64) -> u128 {
        if lows.is_empty() {
            return (total == 0) as u128;
        }
        let mut acc = 0u128;
        for v in lows[0]..=highs[0].min(total) {
            acc += count_by_recursion(&lows[1..], &highs[1..], total - v);
        }
        acc
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn stream_agrees_with_reference_count(
            sizes in proptest::collection::vec(2u64..7, 2..4),
            frac in 0.0f64..=1.0,
        ) {
            let p = StratifiedPopulation::new(sizes.clone()).unwrap();
            let total_red = (frac * p.total() as f64).floor() as u64;
            let expected = count_by_recursion(&vec![0; sizes.len()], &sizes, total_red);
            let dp = count_bounded(&vec![0; sizes.len()], &sizes, total_red);
            prop_assert_eq!(dp, expected);
            let streamed = enumerate_distributions(&p, total_red, DEFAULT_SEARCH_CAP)
                .unwrap()
                .count() as u128;
            prop_assert_eq!(streamed, expected);
        }

        #[test]
        fn streamed_items_are_valid_sorted_and_distinct(
            sizes in proptest::collection::vec(2u64..7, 2..4),
            n_frac in 0.0f64..=1.0,
        ) {
            let p = StratifiedPopulation::new(sizes.clone()).unwrap();
            let m = sizes.len() as u64;
            let n = m + (n_frac * (p.total() - m) as f64).floor() as u64;
            let items: Vec<Vec<u64>> =
                enumerate_allocations(&p, n, AllocationClass::All, DEFAULT_SEARCH_CAP)
                    .unwrap()
                    .map(|a| a.counts().to_vec())
                    .collect();
            for w in items.windows(2) {
                prop_assert!(w[0] < w[1]);
            }
            for item in &items {
                prop_assert!(Allocation::new(&p, item.clone()).is_ok());
                prop_assert_eq!(item.iter().sum::<u64>(), n);
            }
        }

        #[test]
        fn admissible_equals_filtered_all(
            sizes in proptest::collection::vec(2u64..7, 2..4),
            n_frac in 0.0f64..=1.0,
        ) {
            let p = StratifiedPopulation::new(sizes.clone()).unwrap();
            let m = sizes.len() as u64;
            let n = m + (n_frac * (p.total() - m) as f64).floor() as u64;
            let filtered: Vec<Vec<u64>> =
                enumerate_allocations(&p, n, AllocationClass::All, DEFAULT_SEARCH_CAP)
                    .unwrap()
                    .filter(|a| AllocationClass::Admissible.contains(&p, a))
                    .map(|a| a.counts().to_vec())
                    .collect();
            let streamed: Vec<Vec<u64>> =
                match enumerate_allocations(&p, n, AllocationClass::Admissible, DEFAULT_SEARCH_CAP) {
                    Ok(stream) => stream.map(|a| a.counts().to_vec()).collect(),
                    Err(ModelError::EmptyClass { .. }) => Vec::new(),
                    Err(e) => return Err(TestCaseError::fail(e.to_string())),
                };
            prop_assert_eq!(streamed, filtered);
        }

        #[test]
        fn red_black_swap_is_a_bijection(
            sizes in proptest::collection::vec(2u64..6, 2..4),
            frac in 0.0f64..=1.0,
        ) {
            let p = StratifiedPopulation::new(sizes.clone()).unwrap();
            let total_red = (frac * p.total() as f64).floor() as u64;
            let black = p.total() - total_red;
            let reds: Vec<Vec<u64>> = enumerate_distributions(&p, total_red, DEFAULT_SEARCH_CAP)
                .unwrap()
                .map(|d| d.counts().unwrap().to_vec())
                .collect();
            let mut swapped: Vec<Vec<u64>> = reds
                .iter()
                .map(|r| r.iter().zip(&sizes).map(|(&rj, &sj)| sj - rj).collect())
                .collect();
            swapped.sort();
            let blacks: Vec<Vec<u64>> = enumerate_distributions(&p, black, DEFAULT_SEARCH_CAP)
                .unwrap()
                .map(|d| d.counts().unwrap().to_vec())
                .collect();
            prop_assert_eq!(swapped, blacks);
        }
    }
}
