//! Command-line front end for the `stratvar` crate.
//!
//! Every subcommand prints to stdout in one of three formats (`--format
//! table|json|csv`) and exits 0 on success, 1 on any input or validation
//! error, and 2 when `theorems` finds a counterexample.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use stratvar::{
    best_allocation, check_theorem, enumerate_allocations, enumerate_distributions, minimax_value,
    proportional_decomposition, variance_report, worst_nature, Allocation, AllocationClass,
    EstimatorKind, ExactRatio, ModelError, RedDistribution, RedsDoc, Scenario, ScenarioDoc,
    SimConfig, SimResult, StratifiedPopulation, TheoremId, TheoremReport, TheoremSweep, Verdict,
    DEFAULT_SEARCH_CAP,
};

const CAP_ENV: &str = "STRATVAR_CAP";

#[derive(Parser)]
#[command(
    name = "stratvar",
    version,
    about = "Exact variances and minimax allocation for stratified two-color sampling"
)]
struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    format: Format,
    /// Cap on enumerated candidates; overrides the STRATVAR_CAP environment
    /// variable (default 10000000).
    #[arg(long, global = true)]
    cap: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Json,
    Csv,
}

/// Scenario given either inline or as a JSON file, never both.
#[derive(Args)]
struct ScenarioInput {
    /// Stratum sizes, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with = "scenario")]
    sizes: Option<Vec<u64>>,
    /// Red totals per stratum: counts like 2,3 or fractions like 1/2,1/2.
    #[arg(long, value_delimiter = ',', conflicts_with = "scenario")]
    reds: Option<Vec<String>>,
    /// Sample sizes per stratum, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with = "scenario")]
    alloc: Option<Vec<u64>>,
    /// Path to a scenario file: {"sizes": [..], "reds": [..], "alloc": [..]}.
    #[arg(long)]
    scenario: Option<PathBuf>,
}

impl ScenarioInput {
    fn resolve(&self) -> Result<Scenario> {
        let doc = if let Some(path) = &self.scenario {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))?;
            serde_json::from_str::<ScenarioDoc>(&text)
                .with_context(|| format!("cannot parse {}", path.display()))?
        } else {
            let sizes = self
                .sizes
                .clone()
                .ok_or_else(|| anyhow!("either --scenario or --sizes/--reds/--alloc is required"))?;
            let reds = self
                .reds
                .clone()
                .ok_or_else(|| anyhow!("--reds is required when --sizes is given"))?;
            let alloc = self
                .alloc
                .clone()
                .ok_or_else(|| anyhow!("--alloc is required when --sizes is given"))?;
            ScenarioDoc {
                sizes,
                reds: reds_doc(reds),
                alloc: Some(alloc),
            }
        };
        Ok(Scenario::from_doc(&doc)?)
    }
}

/// Plain integers mean counts; anything else is kept as a fraction string for
/// the scenario validator to parse.
fn reds_doc(raw: Vec<String>) -> RedsDoc {
    match raw.iter().map(|text| text.parse()).collect::<Result<Vec<u64>, _>>() {
        Ok(counts) => RedsDoc::Counts(counts),
        Err(_) => RedsDoc::Fractions(raw),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one estimator's exact variance on a scenario.
    Variance {
        #[command(flatten)]
        input: ScenarioInput,
        /// Estimator: simple-with, simple-without, strat-with, strat-without.
        #[arg(long)]
        kind: String,
    },
    /// Split the with-replacement variance of a proportional scenario into
    /// the simple term minus the heterogeneity penalty.
    Decompose {
        #[command(flatten)]
        input: ScenarioInput,
    },
    /// Exhaustively check one of the comparison statements.
    Theorems {
        /// Statement to check: 1, 2, 3, 4, 5, E2, or INC.
        #[arg(long)]
        id: String,
        /// Largest total population size to sweep.
        #[arg(long = "max-N", default_value_t = 12)]
        max_population: u64,
        /// Largest number of strata to sweep.
        #[arg(long = "max-m", default_value_t = 3)]
        max_strata: usize,
        /// Largest single stratum size; defaults to max-N.
        #[arg(long = "max-stratum")]
        max_stratum_size: Option<u64>,
        /// Red fractions to sweep where the statement fixes a common p,
        /// e.g. 1/4,1/2,3/4.
        #[arg(long = "p", value_delimiter = ',')]
        fractions: Option<Vec<String>>,
        /// Also probe instances outside the hypotheses and report breaches.
        #[arg(long)]
        adversarial: bool,
    },
    /// Best allocation against worst-case nature for a known red total.
    Minimax {
        /// Stratum sizes, comma separated.
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<u64>,
        /// Total sample size to allocate.
        #[arg(long)]
        n: u64,
        /// Total number of red items nature distributes.
        #[arg(long = "R")]
        total_red: u64,
        /// Allocation class: all, three-quarters, proportional, admissible.
        #[arg(long, default_value = "admissible")]
        class: String,
    },
    /// Worst red distribution for a fixed allocation.
    WorstNature {
        /// Stratum sizes, comma separated.
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<u64>,
        /// Sample sizes per stratum, comma separated.
        #[arg(long, value_delimiter = ',')]
        alloc: Vec<u64>,
        /// Total number of red items nature distributes.
        #[arg(long = "R")]
        total_red: u64,
    },
    /// Best allocation for a fixed red distribution.
    BestAlloc {
        /// Stratum sizes, comma separated.
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<u64>,
        /// Red totals per stratum: counts or fractions.
        #[arg(long, value_delimiter = ',')]
        reds: Vec<String>,
        /// Total sample size to allocate.
        #[arg(long)]
        n: u64,
        /// Allocation class: all, three-quarters, proportional, admissible.
        #[arg(long, default_value = "all")]
        class: String,
    },
    /// Monte Carlo check of an estimator against its exact variance.
    Simulate {
        #[command(flatten)]
        input: ScenarioInput,
        /// Estimator: simple-with, simple-without, strat-with, strat-without.
        #[arg(long)]
        kind: String,
        /// Number of samples to draw.
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        /// Master seed; equal seeds give bit-identical results.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Worker threads; the result does not depend on this.
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Tabulate exact variances over enumerated distributions and
    /// allocations.
    Sweep {
        /// Stratum sizes, comma separated.
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<u64>,
        /// Fix the total sample size; default sweeps every feasible value.
        #[arg(long)]
        n: Option<u64>,
        /// Fix the red total; default sweeps every feasible value.
        #[arg(long = "R")]
        total_red: Option<u64>,
        /// Estimator: simple-with, simple-without, strat-with, strat-without.
        #[arg(long)]
        kind: String,
        /// Allocation class: all, three-quarters, proportional, admissible.
        #[arg(long, default_value = "all")]
        class: String,
    },
}

#[derive(Serialize)]
struct DecomposeReport {
    simple: ExactRatio,
    simple_decimal: f64,
    heterogeneity: ExactRatio,
    heterogeneity_decimal: f64,
    stratified: ExactRatio,
    stratified_decimal: f64,
    inputs: ScenarioDoc,
}

#[derive(Serialize)]
struct SweepRow {
    sizes: String,
    reds: String,
    alloc: String,
    kind: EstimatorKind,
    exact: ExactRatio,
    decimal: f64,
}

/// Rust ignores SIGPIPE by default, turning writes to a closed pipe into
/// panics; restore the conventional silent death so `stratvar ... | head`
/// behaves.
fn reset_sigpipe() {
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
}

fn main() -> ExitCode {
    reset_sigpipe();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            if matches!(err.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{err}");
                return ExitCode::SUCCESS;
            }
            eprint!("{err}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    let cap = resolve_cap(cli.cap)?;
    let format = cli.format;
    match cli.command {
        Command::Variance { input, kind } => {
            let scenario = input.resolve()?;
            let kind: EstimatorKind = kind.parse()?;
            let report = variance_report(&scenario, kind);
            match format {
                Format::Table => println!("{}", report.render_table()),
                Format::Json => print_json(&report)?,
                Format::Csv => print_csv(&[variance_row(&report.inputs, kind, report.exact.clone(), report.decimal)])?,
            }
            Ok(0)
        }
        Command::Decompose { input } => {
            let scenario = input.resolve()?;
            let (simple, heterogeneity) = proportional_decomposition(&scenario)?;
            let stratified = &simple - &heterogeneity;
            let report = DecomposeReport {
                simple_decimal: simple.to_f64(),
                heterogeneity_decimal: heterogeneity.to_f64(),
                stratified_decimal: stratified.to_f64(),
                simple,
                heterogeneity,
                stratified,
                inputs: scenario.to_doc(),
            };
            match format {
                Format::Table => {
                    let mut lines = vec![
                        format!("simple: {} ({})", report.simple, report.simple_decimal),
                        format!(
                            "heterogeneity: {} ({})",
                            report.heterogeneity, report.heterogeneity_decimal
                        ),
                        format!(
                            "stratified: {} ({})",
                            report.stratified, report.stratified_decimal
                        ),
                        format!("sizes: {}", join(&report.inputs.sizes)),
                        format!("reds: {}", report.inputs.reds),
                    ];
                    if let Some(alloc) = &report.inputs.alloc {
                        lines.push(format!("alloc: {}", join(alloc)));
                    }
                    println!("{}", lines.join("\n"));
                }
                Format::Json => print_json(&report)?,
                Format::Csv => bail!("csv output is not supported for decompose"),
            }
            Ok(0)
        }
        Command::Theorems {
            id,
            max_population,
            max_strata,
            max_stratum_size,
            fractions,
            adversarial,
        } => {
            let id: TheoremId = id.parse()?;
            let mut sweep = TheoremSweep {
                max_population,
                max_strata,
                max_stratum_size: max_stratum_size.unwrap_or(max_population),
                include_violations: adversarial,
                cap,
                ..TheoremSweep::default()
            };
            if let Some(raw) = fractions {
                let mut parsed = Vec::with_capacity(raw.len());
                for text in &raw {
                    parsed.push(text.parse::<ExactRatio>()?);
                }
                sweep.fractions = parsed;
            }
            let report = check_theorem(id, &sweep)?;
            match format {
                Format::Table => println!("{}", report.render_table()),
                Format::Json => print_json(&report)?,
                Format::Csv => bail!("csv output is not supported for theorems"),
            }
            Ok(exit_for_verdict(&report))
        }
        Command::Minimax {
            sizes,
            n,
            total_red,
            class,
        } => {
            let population = StratifiedPopulation::new(sizes)?;
            let class: AllocationClass = class.parse()?;
            let result = minimax_value(&population, n, total_red, class, cap)?;
            match format {
                Format::Table => println!("{}", result.render_table()),
                Format::Json => print_json(&result)?,
                Format::Csv => bail!("csv output is not supported for minimax"),
            }
            Ok(0)
        }
        Command::WorstNature {
            sizes,
            alloc,
            total_red,
        } => {
            let population = StratifiedPopulation::new(sizes)?;
            let allocation = Allocation::new(&population, alloc)?;
            let result = worst_nature(&population, &allocation, total_red, cap)?;
            match format {
                Format::Table => println!("{}", result.render_table()),
                Format::Json => print_json(&result)?,
                Format::Csv => bail!("csv output is not supported for worst-nature"),
            }
            Ok(0)
        }
        Command::BestAlloc {
            sizes,
            reds,
            n,
            class,
        } => {
            let population = StratifiedPopulation::new(sizes)?;
            let distribution = parse_reds(&population, reds)?;
            let class: AllocationClass = class.parse()?;
            let result = best_allocation(&population, &distribution, n, class, cap)?;
            match format {
                Format::Table => println!("{}", result.render_table()),
                Format::Json => print_json(&result)?,
                Format::Csv => bail!("csv output is not supported for best-alloc"),
            }
            Ok(0)
        }
        Command::Simulate {
            input,
            kind,
            trials,
            seed,
            workers,
        } => {
            let scenario = input.resolve()?;
            let kind: EstimatorKind = kind.parse()?;
            let config = SimConfig::new(scenario, kind, trials, seed, workers)?;
            let result = stratvar::estimate(&config);
            match format {
                Format::Table => println!("{}", result.render_table()),
                Format::Json => print_json(&result)?,
                Format::Csv => {
                    println!("{}", SimResult::CSV_HEADER);
                    println!("{}", result.csv_row());
                }
            }
            Ok(0)
        }
        Command::Sweep {
            sizes,
            n,
            total_red,
            kind,
            class,
        } => {
            let population = StratifiedPopulation::new(sizes)?;
            let kind: EstimatorKind = kind.parse()?;
            let class: AllocationClass = class.parse()?;
            let rows = sweep_rows(&population, n, total_red, kind, class, cap)?;
            match format {
                Format::Table => print!("{}", render_sweep_table(&rows)),
                Format::Json => print_json(&rows)?,
                Format::Csv => print_csv(&rows)?,
            }
            Ok(0)
        }
    }
}

/// Flag beats environment beats the built-in default.
fn resolve_cap(flag: Option<u64>) -> Result<u64> {
    if let Some(cap) = flag {
        return Ok(cap);
    }
    match std::env::var(CAP_ENV) {
        Ok(text) => text
            .trim()
            .parse::<u64>()
            .map_err(|_| anyhow!("{CAP_ENV} must be an unsigned integer, got {text:?}")),
        Err(std::env::VarError::NotPresent) => Ok(DEFAULT_SEARCH_CAP),
        Err(err) => Err(anyhow!("cannot read {CAP_ENV}: {err}")),
    }
}

fn exit_for_verdict(report: &TheoremReport) -> u8 {
    match report.verdict {
        Verdict::Holds => 0,
        Verdict::Fails => 2,
    }
}

fn parse_reds(population: &StratifiedPopulation, raw: Vec<String>) -> Result<RedDistribution> {
    match reds_doc(raw) {
        RedsDoc::Counts(counts) => Ok(RedDistribution::from_counts(population, counts)?),
        RedsDoc::Fractions(strings) => {
            let mut fractions = Vec::with_capacity(strings.len());
            for text in &strings {
                fractions.push(text.parse::<ExactRatio>()?);
            }
            Ok(RedDistribution::from_fractions(population, fractions)?)
        }
    }
}

fn variance_row(inputs: &ScenarioDoc, kind: EstimatorKind, exact: ExactRatio, decimal: f64) -> SweepRow {
    SweepRow {
        sizes: join(&inputs.sizes),
        reds: inputs.reds.to_string(),
        alloc: inputs.alloc.as_deref().map(join).unwrap_or_default(),
        kind,
        exact,
        decimal,
    }
}

fn sweep_rows(
    population: &StratifiedPopulation,
    fixed_n: Option<u64>,
    fixed_red: Option<u64>,
    kind: EstimatorKind,
    class: AllocationClass,
    cap: u64,
) -> Result<Vec<SweepRow>> {
    let total = population.total();
    let strata = population.num_strata() as u64;
    let red_values: Vec<u64> = match fixed_red {
        Some(red) => vec![red],
        None => (0..=total).collect(),
    };
    let sample_values: Vec<u64> = match fixed_n {
        Some(n) => vec![n],
        None => (strata..=total).collect(),
    };
    let mut rows = Vec::new();
    for &red in &red_values {
        for distribution in enumerate_distributions(population, red, cap)? {
            for &n in &sample_values {
                let allocations = match enumerate_allocations(population, n, class, cap) {
                    Ok(stream) => stream,
                    Err(ModelError::EmptyClass { .. }) => continue,
                    Err(err) => return Err(err.into()),
                };
                for allocation in allocations {
                    if rows.len() as u64 >= cap {
                        bail!("sweep would emit more than {cap} rows; raise --cap or fix --n/--R");
                    }
                    let scenario =
                        Scenario::new(population.clone(), distribution.clone(), allocation)?;
                    let report = variance_report(&scenario, kind);
                    rows.push(variance_row(&report.inputs, kind, report.exact, report.decimal));
                }
            }
        }
    }
    Ok(rows)
}

fn render_sweep_table(rows: &[SweepRow]) -> String {
    let header = ["sizes", "reds", "alloc", "kind", "exact", "decimal"];
    let cells: Vec<[String; 6]> = rows
        .iter()
        .map(|row| {
            [
                row.sizes.clone(),
                row.reds.clone(),
                row.alloc.clone(),
                row.kind.to_string(),
                row.exact.to_string(),
                row.decimal.to_string(),
            ]
        })
        .collect();
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in &cells {
        for (width, cell) in widths.iter_mut().zip(row.iter()) {
            *width = (*width).max(cell.len());
        }
    }
    let mut out = String::new();
    let mut render = |row: &[&str]| {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(cell, &width)| format!("{cell:<width$}"))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    };
    render(&header);
    for row in &cells {
        let borrowed: Vec<&str> = row.iter().map(String::as_str).collect();
        render(&borrowed);
    }
    out
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let value = serde_json::to_value(value).context("cannot serialize output")?;
    println!(
        "{}",
        serde_json::to_string_pretty(&value).context("cannot render output")?
    );
    Ok(())
}

fn print_csv<T: Serialize>(rows: &[T]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row).context("cannot render csv")?;
    }
    let bytes = writer.into_inner().context("cannot flush csv")?;
    print!("{}", String::from_utf8(bytes).context("csv output is not utf-8")?);
    Ok(())
}

fn join(values: &[u64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}
