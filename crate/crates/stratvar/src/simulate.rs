//! Seeded Monte Carlo harness for the four estimators.
//!
//! Randomness comes from a counter-style generator: every (stratum, trial)
//! pair gets its own statelessly derived substream, so results depend only on
//! the master seed and the trial index, never on how trials are split across
//! workers. Per-trial estimates are scaled to a common integer denominator
//! and accumulated exactly; the floating-point summary is derived from the
//! exact power sums once at the end. Together these make a run bit-identical
//! for any worker count.

use crate::model::Scenario;
use crate::ratio::ExactRatio;
use crate::variance::{variance_report, EstimatorKind};
use num::bigint::{BigInt, BigUint};
use num::integer::gcd;
use num::traits::Zero;
use serde::Serialize;
use std::ops::Range;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("simulation needs integer red counts, not bare fractions")]
    FractionalCounts,
    #[error("trial count must be at least 1")]
    NoTrials,
    #[error("worker count must be at least 1")]
    NoWorkers,
    #[error("per-trial scale overflows 128 bits; instance is too large for exact accumulation")]
    ScaleOverflow,
}

const GAMMA: u64 = 0x9E3779B97F4A7C15;

fn mix(seed: u64) -> u64 {
    let mut z = seed;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Counter-based generator. Constructing one is cheap; a fresh substream per
/// (stratum, trial) pair is the intended use.
#[derive(Debug, Clone)]
pub struct CounterRng {
    state: u64,
}

impl CounterRng {
    pub fn new(key: u64) -> Self {
        CounterRng { state: key }
    }

    /// Derive the substream key for a path of indices under a master seed.
    /// The chain is order-sensitive, so `[a, b]` and `[b, a]` differ.
    pub fn substream(seed: u64, path: &[u64]) -> Self {
        let mut key = seed;
        for &step in path {
            key = mix(
                key.wrapping_mul(0x2545F4914F6CDD1D)
                    .wrapping_add(step)
                    .wrapping_add(GAMMA),
            );
        }
        CounterRng::new(key)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GAMMA);
        mix(self.state)
    }

    /// Uniform draw from `0..bound` without modulo bias, by widening
    /// multiplication with rejection on the low word.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound >= 1, "bound must be positive");
        let threshold = bound.wrapping_neg() % bound;
        loop {
            let wide = self.next_u64() as u128 * bound as u128;
            if wide as u64 >= threshold {
                return (wide >> 64) as u64;
            }
        }
    }
}

/// Number of red items in `sample` draws without replacement from an urn of
/// `total` items, `red` of them red. Updates the urn after every draw, so the
/// count is exactly hypergeometric.
pub fn draw_without_replacement(
    total: u64,
    red: u64,
    sample: u64,
    rng: &mut CounterRng,
) -> u64 {
    assert!(red <= total, "red count exceeds urn size");
    assert!(sample >= 1 && sample <= total, "sample must lie in [1, total]");
    let mut reds_left = red;
    let mut items_left = total;
    let mut hits = 0;
    for _ in 0..sample {
        if rng.below(items_left) < reds_left {
            hits += 1;
            reds_left -= 1;
        }
        items_left -= 1;
    }
    hits
}

/// Number of red items in `sample` independent draws from the same urn, so
/// the count is exactly binomial.
pub fn draw_with_replacement(total: u64, red: u64, sample: u64, rng: &mut CounterRng) -> u64 {
    assert!(total >= 1, "urn must be nonempty");
    assert!(red <= total, "red count exceeds urn size");
    assert!(sample >= 1, "sample must be positive");
    let mut hits = 0;
    for _ in 0..sample {
        if rng.below(total) < red {
            hits += 1;
        }
    }
    hits
}

/// Common denominator and per-stratum integer weights that turn each trial's
/// estimate into an integer numerator over a fixed scale.
#[derive(Debug, Clone)]
struct Scale {
    denominator: u128,
    weights: Option<Vec<u128>>,
}

impl Scale {
    fn for_config(scenario: &Scenario, kind: EstimatorKind) -> Result<Scale, SimError> {
        match kind {
            EstimatorKind::SimpleWith | EstimatorKind::SimpleWithout => Ok(Scale {
                denominator: scenario.sample_size() as u128,
                weights: None,
            }),
            EstimatorKind::StratWith | EstimatorKind::StratWithout => {
                let counts = scenario.allocation().counts();
                let mut scale: u128 = 1;
                for &n_j in counts {
                    let n_j = n_j as u128;
                    scale = (scale / gcd(scale, n_j))
                        .checked_mul(n_j)
                        .ok_or(SimError::ScaleOverflow)?;
                }
                let denominator = (scenario.population().total() as u128)
                    .checked_mul(scale)
                    .ok_or(SimError::ScaleOverflow)?;
                let weights = counts
                    .iter()
                    .zip(scenario.population().sizes())
                    .map(|(&n_j, &size)| (size as u128).checked_mul(scale / n_j as u128))
                    .collect::<Option<Vec<u128>>>()
                    .ok_or(SimError::ScaleOverflow)?;
                debug_assert_eq!(
                    weights
                        .iter()
                        .zip(counts)
                        .map(|(w, &n_j)| w * n_j as u128)
                        .sum::<u128>(),
                    denominator
                );
                Ok(Scale {
                    denominator,
                    weights: Some(weights),
                })
            }
        }
    }
}

/// A validated simulation request.
#[derive(Debug, Clone)]
pub struct SimConfig {
    scenario: Scenario,
    kind: EstimatorKind,
    trials: u64,
    seed: u64,
    workers: usize,
    scale: Scale,
}

impl SimConfig {
    pub fn new(
        scenario: Scenario,
        kind: EstimatorKind,
        trials: u64,
        seed: u64,
        workers: usize,
    ) -> Result<Self, SimError> {
        if !scenario.distribution().is_integer() {
            return Err(SimError::FractionalCounts);
        }
        if trials == 0 {
            return Err(SimError::NoTrials);
        }
        if workers == 0 {
            return Err(SimError::NoWorkers);
        }
        let scale = Scale::for_config(&scenario, kind)?;
        Ok(SimConfig {
            scenario,
            kind,
            trials,
            seed,
            workers,
            scale,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn kind(&self) -> EstimatorKind {
        self.kind
    }

    pub fn trials(&self) -> u64 {
        self.trials
    }
}

/// Exact power sums of the integer trial numerators. Fast path buffers whole
/// blocks in u128 and flushes into big integers; if even a single fourth
/// power does not fit in 128 bits, every trial goes straight to the big path.
struct Accumulator {
    denominator: u128,
    block_limit: u32,
    buffered: u32,
    b1: u128,
    b2: u128,
    b3: u128,
    b4: u128,
    s1: BigUint,
    s2: BigUint,
    s3: BigUint,
    s4: BigUint,
}

impl Accumulator {
    fn new(denominator: u128) -> Self {
        let fourth = denominator
            .checked_mul(denominator)
            .and_then(|sq| sq.checked_mul(sq));
        let block_limit = match fourth {
            Some(f) => ((u128::MAX >> 1) / f).min(1 << 16) as u32,
            None => 0,
        };
        Accumulator {
            denominator,
            block_limit,
            buffered: 0,
            b1: 0,
            b2: 0,
            b3: 0,
            b4: 0,
            s1: BigUint::zero(),
            s2: BigUint::zero(),
            s3: BigUint::zero(),
            s4: BigUint::zero(),
        }
    }

    fn push(&mut self, numerator: u128) {
        debug_assert!(numerator <= self.denominator);
        if self.block_limit > 0 {
            let sq = numerator * numerator;
            self.b1 += numerator;
            self.b2 += sq;
            self.b3 += sq * numerator;
            self.b4 += sq * sq;
            self.buffered += 1;
            if self.buffered >= self.block_limit {
                self.flush();
            }
        } else {
            let big = BigUint::from(numerator);
            let sq = &big * &big;
            self.s1 += &big;
            self.s2 += &sq;
            self.s3 += &sq * &big;
            self.s4 += &sq * &sq;
        }
    }

    fn flush(&mut self) {
        self.s1 += BigUint::from(self.b1);
        self.s2 += BigUint::from(self.b2);
        self.s3 += BigUint::from(self.b3);
        self.s4 += BigUint::from(self.b4);
        self.b1 = 0;
        self.b2 = 0;
        self.b3 = 0;
        self.b4 = 0;
        self.buffered = 0;
    }

    fn absorb(&mut self, mut other: Accumulator) {
        other.flush();
        self.s1 += other.s1;
        self.s2 += other.s2;
        self.s3 += other.s3;
        self.s4 += other.s4;
    }
}

/// Summary of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub kind: EstimatorKind,
    pub trials: u64,
    pub seed: u64,
    pub workers: usize,
    /// Empirical mean of the estimator.
    pub mean: f64,
    /// Standard error of the empirical mean.
    pub mean_stderr: f64,
    /// Empirical variance of the estimator (denominator `trials`).
    pub variance: f64,
    /// Standard error of the empirical variance.
    pub variance_stderr: f64,
    /// Analytic variance the run is checked against.
    pub exact: ExactRatio,
    pub exact_decimal: f64,
    /// Standardized gap between empirical and analytic variance.
    pub z_score: f64,
}

impl SimResult {
    pub const CSV_HEADER: &'static str =
        "kind,trials,seed,workers,mean,mean_stderr,variance,variance_stderr,exact,exact_decimal,z_score";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.kind,
            self.trials,
            self.seed,
            self.workers,
            self.mean,
            self.mean_stderr,
            self.variance,
            self.variance_stderr,
            self.exact,
            self.exact_decimal,
            self.z_score
        )
    }

    pub fn render_table(&self) -> String {
        [
            format!("kind: {}", self.kind),
            format!("trials: {}", self.trials),
            format!("seed: {}", self.seed),
            format!("workers: {}", self.workers),
            format!("mean: {}", self.mean),
            format!("mean stderr: {}", self.mean_stderr),
            format!("variance: {}", self.variance),
            format!("variance stderr: {}", self.variance_stderr),
            format!("exact: {}", self.exact),
            format!("exact decimal: {}", self.exact_decimal),
            format!("z-score: {}", self.z_score),
        ]
        .join("\n")
    }
}

fn run_range(config: &SimConfig, range: Range<u64>) -> Accumulator {
    let mut acc = Accumulator::new(config.scale.denominator);
    let scenario = &config.scenario;
    let counts = scenario
        .distribution()
        .counts()
        .expect("config validated integer counts");
    match config.kind {
        EstimatorKind::SimpleWith | EstimatorKind::SimpleWithout => {
            let total = scenario.population().total();
            let red: u64 = counts.iter().sum();
            let n = scenario.sample_size();
            let with = matches!(config.kind, EstimatorKind::SimpleWith);
            for trial in range {
                let mut rng = CounterRng::substream(config.seed, &[0, trial]);
                let hits = if with {
                    draw_with_replacement(total, red, n, &mut rng)
                } else {
                    draw_without_replacement(total, red, n, &mut rng)
                };
                acc.push(hits as u128);
            }
        }
        EstimatorKind::StratWith | EstimatorKind::StratWithout => {
            let weights = config.scale.weights.as_ref().expect("stratified scale");
            let sizes = scenario.population().sizes();
            let alloc = scenario.allocation().counts();
            let with = matches!(config.kind, EstimatorKind::StratWith);
            for trial in range {
                let mut numerator: u128 = 0;
                for j in 0..sizes.len() {
                    let mut rng = CounterRng::substream(config.seed, &[j as u64, trial]);
                    let hits = if with {
                        draw_with_replacement(sizes[j], counts[j], alloc[j], &mut rng)
                    } else {
                        draw_without_replacement(sizes[j], counts[j], alloc[j], &mut rng)
                    };
                    numerator += weights[j] * hits as u128;
                }
                acc.push(numerator);
            }
        }
    }
    acc.flush();
    acc
}

fn ratio_of(num: &BigUint, den: BigUint) -> ExactRatio {
    ExactRatio::new(BigInt::from(num.clone()), BigInt::from(den))
}

/// Run the simulation and compare the empirical variance with the analytic
/// one. Identical configurations give bit-identical results regardless of
/// `workers`.
pub fn estimate(config: &SimConfig) -> SimResult {
    let trials = config.trials;
    let workers = config.workers.min(trials as usize).max(1);
    let mut total = Accumulator::new(config.scale.denominator);
    if workers == 1 {
        total.absorb(run_range(config, 0..trials));
    } else {
        let base = trials / workers as u64;
        let extra = trials % workers as u64;
        let ranges: Vec<Range<u64>> = (0..workers as u64)
            .map(|w| {
                let start = w * base + w.min(extra);
                let end = start + base + (w < extra) as u64;
                start..end
            })
            .collect();
        let parts: Vec<Accumulator> = std::thread::scope(|scope| {
            let handles: Vec<_> = ranges
                .into_iter()
                .map(|range| scope.spawn(move || run_range(config, range)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("simulation worker panicked"))
                .collect()
        });
        for part in parts {
            total.absorb(part);
        }
    }

    let d = BigUint::from(config.scale.denominator);
    let t = BigUint::from(trials);
    let mean = ratio_of(&total.s1, &t * &d);
    let raw2 = ratio_of(&total.s2, &t * &d * &d);
    let raw3 = ratio_of(&total.s3, &t * &d * &d * &d);
    let raw4 = ratio_of(&total.s4, &t * &d * &d * &d * &d);
    let m2 = &raw2 - &mean.square();
    let m4 = &raw4 - ExactRatio::from(4u64) * &mean * raw3
        + ExactRatio::from(6u64) * mean.square() * &raw2
        - ExactRatio::from(3u64) * mean.square().square();
    let trials_ratio = ExactRatio::from(trials);
    let var_of_var = (&m4 - &m2.square()) / &trials_ratio;
    let mean_stderr = (&m2 / &trials_ratio).to_f64().max(0.0).sqrt();
    let variance_stderr = var_of_var.to_f64().max(0.0).sqrt();

    let report = variance_report(&config.scenario, config.kind);
    let gap = (&m2 - &report.exact).to_f64();
    let z_score = if variance_stderr == 0.0 {
        if m2 == report.exact {
            0.0
        } else {
            f64::INFINITY.copysign(gap)
        }
    } else {
        gap / variance_stderr
    };

    SimResult {
        kind: config.kind,
        trials,
        seed: config.seed,
        workers: config.workers,
        mean: mean.to_f64(),
        mean_stderr,
        variance: m2.to_f64(),
        variance_stderr,
        exact: report.exact,
        exact_decimal: report.decimal,
        z_score,
    }
}
