//! Experiment drivers behind the `plane-parking` binary.
//!
//! Each subcommand turns its arguments into a table of rows. Rows are built
//! by plain functions (`exact_rows`, `simulate_finite_rows`, ...) so tests can
//! run the same computations without going through the process boundary.
//!
//! Primary output is deterministic: a `# config:` line (CSV) or a
//! `{"config": ...}` line (JSON lines) followed by the rows. Wall-clock
//! metadata goes to a `.meta.json` sidecar next to `--out`.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::alpha::DecimalAlpha;
use crate::analytics::{self, alpha_profile, limit_parking_prob, ExtendedReal, Regime};
use crate::limit::{self, spine_survival_with_table, spine_walk_trace, YTable};
use crate::parking::estimate_finite_parking_prob;
use crate::rde::{
    conjecture_row, conjecture::conjectured_alpha_c, rde_fixed_point, ArrivalFamily, ArrivalSpec, FixedPointOptions,
    OffspringSpec, Pmf, RdeError,
};
use crate::rng::{cell_seed, trial_rng};
use crate::trees::DEFAULT_SIZE_CAP;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("I/O error on {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error(transparent)]
    Stdout(#[from] io::Error),
    #[error("CSV output failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid arguments: {0}")]
    Usage(String),
    #[error("thread pool: {0}")]
    Threads(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

/// Intensities given as `a,b,c` or as an inclusive range `start:end:step`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaGrid(pub Vec<DecimalAlpha>);

impl FromStr for AlphaGrid {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let parsed = if s.contains(':') { DecimalAlpha::parse_range(s) } else { DecimalAlpha::parse_list(s) };
        match parsed {
            Ok(v) if !v.is_empty() => Ok(Self(v)),
            Ok(_) => Err(format!("empty grid {s:?}")),
            Err(e) => Err(e.to_string()),
        }
    }
}

impl Serialize for AlphaGrid {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

/// Comma-separated tree sizes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SizeGrid(pub Vec<usize>);

impl FromStr for SizeGrid {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let v = s
            .split(',')
            .map(|x| match x.trim().parse::<usize>() {
                Ok(0) => Err("tree size must be at least 1".to_owned()),
                Ok(n) => Ok(n),
                Err(e) => Err(format!("{x:?}: {e}")),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self(v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "plane-parking", version, about = "Parking on uniform random plane trees and their limit")]
pub struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Csv, global = true)]
    pub format: Format,
    /// Write the primary output here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0, global = true)]
    pub threads: usize,
    /// Suppress progress messages on standard error.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form profile at each intensity.
    Exact(ExactArgs),
    /// Monte Carlo on uniform plane trees with floor(alpha n) cars.
    SimulateFinite(FiniteArgs),
    /// Monte Carlo survival of the spare-capacity walk of the limit model.
    SimulateLimit(LimitArgs),
    /// Fixed point of the distributional equation with a branch check.
    Rde(RdeArgs),
    /// Closed-form curve plus Monte Carlo points, written to a directory.
    PhaseDiagram(PhaseArgs),
    /// Compare the fixed-point mean with the conjectured closed form.
    Conjecture(ConjectureArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ExactArgs {
    /// Intensities: `a,b,c` or `start:end:step`.
    #[arg(long)]
    pub alpha: AlphaGrid,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FiniteArgs {
    /// Tree sizes, comma-separated.
    #[arg(long)]
    pub n: SizeGrid,
    #[arg(long)]
    pub alpha: AlphaGrid,
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    #[arg(long)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LimitArgs {
    #[arg(long)]
    pub alpha: AlphaGrid,
    #[arg(long, default_value_t = limit::DEFAULT_HORIZON)]
    pub horizon: u64,
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    #[arg(long)]
    pub seed: u64,
    /// Truncation of the tabulated law of Y.
    #[arg(long = "table-k", default_value_t = limit::DEFAULT_TABLE_K)]
    pub table_k: usize,
    #[arg(long = "size-cap", default_value_t = DEFAULT_SIZE_CAP)]
    pub size_cap: usize,
    /// Dump the walk of trial 0 as CSV (n, C_n); needs a single intensity.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RdeArgs {
    #[arg(long)]
    pub alpha: DecimalAlpha,
    #[arg(long = "k", default_value_t = crate::rde::DEFAULT_K)]
    pub k: usize,
    #[arg(long, default_value_t = crate::rde::DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long = "max-iter", default_value_t = crate::rde::DEFAULT_MAX_ITER)]
    pub max_iter: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PhaseArgs {
    /// Intensities of the Monte Carlo points.
    #[arg(long, default_value = "0:0.6:0.05")]
    pub alpha: AlphaGrid,
    #[arg(long, default_value = "1000")]
    pub n: SizeGrid,
    #[arg(long, default_value_t = 1000)]
    pub trials: u64,
    #[arg(long)]
    pub seed: u64,
    /// Points of the closed-form curve on [0, 0.6].
    #[arg(long = "curve-points", default_value_t = 601)]
    pub curve_points: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ConjectureArgs {
    /// JSON offspring law, e.g. {"kind": "explicit", "mass": [0.25, 0.5, 0.25]}.
    #[arg(long)]
    pub offspring: PathBuf,
    /// Arrival family: poisson or two-point.
    #[arg(long, default_value = "poisson")]
    pub family: String,
    #[arg(long)]
    pub alpha: AlphaGrid,
    #[arg(long = "k", default_value_t = crate::rde::DEFAULT_K)]
    pub k: usize,
    #[arg(long, default_value_t = crate::rde::DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long = "max-iter", default_value_t = crate::rde::DEFAULT_MAX_ITER)]
    pub max_iter: usize,
    /// Largest difference counted as agreement.
    #[arg(long = "agreement-tol", default_value_t = 1e-4)]
    pub agreement_tol: f64,
}

/// Rows plus the comment lines that precede them.
#[derive(Debug, Clone)]
pub struct Table<R> {
    pub preamble: Vec<(String, Value)>,
    pub rows: Vec<R>,
}

impl<R> Table<R> {
    fn new(rows: Vec<R>) -> Self {
        Self { preamble: Vec::new(), rows }
    }
}

/// Rows that can carry a per-row failure.
pub trait RowStatus {
    fn label(&self) -> String;
    fn error(&self) -> Option<&str>;
}

/// Writes `config`, the preamble and the rows in the chosen format.
pub fn write_table<R: Serialize>(
    w: &mut dyn Write,
    format: Format,
    config: &Value,
    table: &Table<R>,
) -> Result<(), CliError> {
    match format {
        Format::Csv => {
            writeln!(w, "# config: {}", serde_json::to_string(config)?)?;
            for (k, v) in &table.preamble {
                writeln!(w, "# {k}: {}", serde_json::to_string(v)?)?;
            }
            let mut cw = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
            for row in &table.rows {
                cw.serialize(row)?;
            }
            cw.flush()?;
        }
        Format::Json => {
            writeln!(w, "{}", json!({ "config": config }))?;
            for (k, v) in &table.preamble {
                let mut obj = serde_json::Map::new();
                obj.insert(k.clone(), v.clone());
                writeln!(w, "{}", Value::Object(obj))?;
            }
            for row in &table.rows {
                writeln!(w, "{}", serde_json::to_string(row)?)?;
            }
        }
    }
    Ok(())
}

fn progress(quiet: bool, msg: fmt::Arguments<'_>) {
    if !quiet {
        eprintln!("{msg}");
    }
}

// ---------------------------------------------------------------- exact

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactRow {
    pub alpha: DecimalAlpha,
    pub regime: Option<Regime>,
    pub p: Option<f64>,
    pub s_switch: Option<f64>,
    #[serde(rename = "mean_X")]
    pub mean_x: Option<ExtendedReal>,
    #[serde(rename = "mean_Y")]
    pub mean_y: Option<ExtendedReal>,
    pub limit_prob: Option<f64>,
    pub error: Option<String>,
}

impl RowStatus for ExactRow {
    fn label(&self) -> String {
        format!("alpha={}", self.alpha)
    }
    fn error(&self) -> Option<&str> {
        self.error.as_deref()
    }
}

pub fn exact_rows(args: &ExactArgs) -> Table<ExactRow> {
    let rows = args
        .alpha
        .0
        .iter()
        .map(|a| match alpha_profile(a.value()) {
            Ok(pr) => ExactRow {
                alpha: a.clone(),
                regime: Some(pr.regime),
                p: Some(pr.p),
                s_switch: pr.s_switch,
                mean_x: Some(pr.mean_x),
                mean_y: Some(pr.mean_y),
                limit_prob: Some(pr.limit_prob),
                error: None,
            },
            Err(e) => ExactRow {
                alpha: a.clone(),
                regime: None,
                p: None,
                s_switch: None,
                mean_x: None,
                mean_y: None,
                limit_prob: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    Table::new(rows)
}

// ------------------------------------------------------ simulate-finite

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiniteRow {
    pub n: usize,
    pub alpha: DecimalAlpha,
    pub cars: u64,
    pub estimate: Option<f64>,
    pub std_error: Option<f64>,
    pub successes: Option<u64>,
    pub trials: u64,
    pub limit_prob: Option<f64>,
    pub error: Option<String>,
}

impl RowStatus for FiniteRow {
    fn label(&self) -> String {
        format!("n={} alpha={}", self.n, self.alpha)
    }
    fn error(&self) -> Option<&str> {
        self.error.as_deref()
    }
}

/// Cell `i` of the `(n, alpha)` grid (n outer, alpha inner) uses master
/// seed `cell_seed(seed, i)`.
pub fn simulate_finite_rows(args: &FiniteArgs, quiet: bool) -> Table<FiniteRow> {
    let cells: Vec<(usize, &DecimalAlpha)> =
        args.n.0.iter().flat_map(|&n| args.alpha.0.iter().map(move |a| (n, a))).collect();
    let total = cells.len();
    let rows = cells
        .into_iter()
        .enumerate()
        .map(|(i, (n, a))| {
            progress(quiet, format_args!("simulate-finite: cell {}/{total} (n = {n}, alpha = {a})", i + 1));
            let est = estimate_finite_parking_prob(n, a, args.trials, cell_seed(args.seed, i as u64));
            let limit_prob = limit_parking_prob(a.value()).ok();
            let cars = a.floor_times(n as u64);
            match est {
                Ok(e) => FiniteRow {
                    n,
                    alpha: a.clone(),
                    cars,
                    estimate: Some(e.estimate),
                    std_error: Some(e.std_error),
                    successes: Some(e.successes),
                    trials: args.trials,
                    limit_prob,
                    error: None,
                },
                Err(e) => FiniteRow {
                    n,
                    alpha: a.clone(),
                    cars,
                    estimate: None,
                    std_error: None,
                    successes: None,
                    trials: args.trials,
                    limit_prob,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Table::new(rows)
}

// ------------------------------------------------------- simulate-limit

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitRow {
    pub alpha: DecimalAlpha,
    pub horizon: u64,
    pub estimate: Option<f64>,
    pub std_error: Option<f64>,
    pub successes: Option<u64>,
    pub trials: u64,
    pub limit_prob: Option<f64>,
    pub table_converged: Option<bool>,
    pub tail_resolutions: Option<u64>,
    pub tail_failures: Option<u64>,
    pub cap_restarts: Option<u64>,
    pub error: Option<String>,
}

impl RowStatus for LimitRow {
    fn label(&self) -> String {
        format!("alpha={}", self.alpha)
    }
    fn error(&self) -> Option<&str> {
        self.error.as_deref()
    }
}

fn limit_row(args: &LimitArgs, i: usize, a: &DecimalAlpha) -> Result<(LimitRow, YTable), limit::LimitError> {
    let table = YTable::new(a.value(), args.table_k)?;
    let est = spine_survival_with_table(&table, args.horizon, args.trials, cell_seed(args.seed, i as u64), args.size_cap)?;
    let row = LimitRow {
        alpha: a.clone(),
        horizon: args.horizon,
        estimate: Some(est.estimate),
        std_error: Some(est.std_error),
        successes: Some(est.successes),
        trials: args.trials,
        limit_prob: limit_parking_prob(a.value()).ok(),
        table_converged: Some(table.converged()),
        tail_resolutions: Some(est.tail.tail_resolutions),
        tail_failures: Some(est.tail.tail_failures),
        cap_restarts: Some(est.tail.cap_restarts),
        error: None,
    };
    Ok((row, table))
}

/// Row `i` uses master seed `cell_seed(seed, i)`.
pub fn simulate_limit_rows(args: &LimitArgs, quiet: bool) -> Table<LimitRow> {
    let total = args.alpha.0.len();
    let rows = args
        .alpha
        .0
        .iter()
        .enumerate()
        .map(|(i, a)| {
            progress(quiet, format_args!("simulate-limit: alpha {}/{total} ({a})", i + 1));
            limit_row(args, i, a).map(|(r, _)| r).unwrap_or_else(|e| LimitRow {
                alpha: a.clone(),
                horizon: args.horizon,
                estimate: None,
                std_error: None,
                successes: None,
                trials: args.trials,
                limit_prob: limit_parking_prob(a.value()).ok(),
                table_converged: None,
                tail_resolutions: None,
                tail_failures: None,
                cap_restarts: None,
                error: Some(e.to_string()),
            })
        })
        .collect();
    Table::new(rows)
}

fn write_trace(args: &LimitArgs, path: &Path) -> Result<(), CliError> {
    let [a] = args.alpha.0.as_slice() else {
        return Err(CliError::Usage("--trace needs exactly one intensity".into()));
    };
    let table = YTable::new(a.value(), args.table_k).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut rng = trial_rng(cell_seed(args.seed, 0), 0);
    let trace =
        spine_walk_trace(&table, args.horizon, &mut rng, args.size_cap).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut out = String::from("n,C_n\n");
    for (n, c) in trace.capacities.iter().enumerate() {
        out.push_str(&format!("{},{c}\n", n + 1));
    }
    fs::write(path, out).map_err(io_err(path))
}

// ------------------------------------------------------------------ rde

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchRow {
    pub s: f64,
    #[serde(rename = "G")]
    pub g: f64,
    pub tail_bound: f64,
    pub q_plus: f64,
    pub q_minus: f64,
    pub branch: &'static str,
    pub abs_error: f64,
}

/// Fixed-point summary placed in the preamble of the `rde` output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RdeSummary {
    pub alpha: DecimalAlpha,
    #[serde(rename = "K")]
    pub k: usize,
    pub p: f64,
    pub mean_lower: f64,
    pub diverged: bool,
    pub tail: f64,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    pub regime: Regime,
    pub s_switch: Option<f64>,
    pub max_branch_error: f64,
}

/// Result of the `rde` subcommand.
#[derive(Debug, Clone)]
pub struct RdeReport {
    pub summary: RdeSummary,
    pub pmf: Pmf,
    pub branches: Vec<BranchRow>,
}

/// Fixed point at one intensity and the comparison of its generating
/// function with the quadratic branches at `s = 0.1, ..., 0.9`, using the
/// fixed point's own `p`. Above criticality the expected branch is `Q+`
/// before the switching point and `Q-` after it.
pub fn rde_report(args: &RdeArgs) -> Result<RdeReport, CliError> {
    let alpha = args.alpha.value();
    let opts = FixedPointOptions { k: args.k, tol: args.tol, max_iter: args.max_iter };
    let (pmf, iterations, residual, converged) =
        match rde_fixed_point(&ArrivalSpec::poisson(alpha), &OffspringSpec::GeometricHalf, opts) {
            Ok(fp) => (fp.pmf, fp.iterations, fp.residual, true),
            Err(RdeError::NotConverged { last, iterations, residual }) => (*last, iterations, residual, false),
            Err(e) => return Err(CliError::Usage(e.to_string())),
        };
    let p = pmf.at(0);
    let regime = Regime::of(alpha);
    let s_switch = match regime {
        Regime::Supercritical => Some(analytics::s_switch(alpha, p).map_err(|e| CliError::Usage(e.to_string()))?),
        _ => None,
    };
    let mut branches = Vec::new();
    for i in 1..=9 {
        let s = i as f64 / 10.0;
        let g = pmf.pgf(s);
        let clamp = |r: Result<f64, analytics::AnalyticsError>| r.unwrap_or(f64::NAN);
        let (qp, qm) = (clamp(analytics::q_plus(s, alpha, p)), clamp(analytics::q_minus(s, alpha, p)));
        let minus = s_switch.is_some_and(|sp| s >= sp);
        let (branch, q) = if minus { ("minus", qm) } else { ("plus", qp) };
        branches.push(BranchRow {
            s,
            g: g.value,
            tail_bound: g.tail_bound,
            q_plus: qp,
            q_minus: qm,
            branch,
            abs_error: (g.value - q).abs(),
        });
    }
    let max_branch_error = branches.iter().map(|b| b.abs_error).fold(0.0, f64::max);
    let mean = pmf.mean();
    let summary = RdeSummary {
        alpha: args.alpha.clone(),
        k: pmf.truncation(),
        p,
        mean_lower: mean.mean_lower,
        diverged: mean.diverged,
        tail: pmf.tail(),
        iterations,
        residual,
        converged,
        regime,
        s_switch,
        max_branch_error,
    };
    Ok(RdeReport { summary, pmf, branches })
}

// -------------------------------------------------------- phase-diagram

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveRow {
    pub alpha: f64,
    pub limit_prob: f64,
    pub regime: Regime,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McRow {
    pub n: usize,
    pub alpha: DecimalAlpha,
    pub estimate: Option<f64>,
    pub std_error: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub limit_prob: Option<f64>,
    pub error: Option<String>,
}

impl RowStatus for McRow {
    fn label(&self) -> String {
        format!("n={} alpha={}", self.n, self.alpha)
    }
    fn error(&self) -> Option<&str> {
        self.error.as_deref()
    }
}

pub fn curve_rows(points: usize) -> Vec<CurveRow> {
    let last = points.max(2) - 1;
    (0..=last)
        .map(|i| {
            let alpha = 0.6 * i as f64 / last as f64;
            CurveRow { alpha, limit_prob: limit_parking_prob(alpha).unwrap_or(f64::NAN), regime: Regime::of(alpha) }
        })
        .collect()
}

pub fn phase_mc_rows(args: &PhaseArgs, quiet: bool) -> Vec<McRow> {
    let finite = FiniteArgs { n: args.n.clone(), alpha: args.alpha.clone(), trials: args.trials, seed: args.seed };
    simulate_finite_rows(&finite, quiet)
        .rows
        .into_iter()
        .map(|r| McRow {
            n: r.n,
            alpha: r.alpha,
            estimate: r.estimate,
            std_error: r.std_error,
            lower: r.estimate.zip(r.std_error).map(|(e, s)| e - 2.0 * s),
            upper: r.estimate.zip(r.std_error).map(|(e, s)| e + 2.0 * s),
            limit_prob: r.limit_prob,
            error: r.error,
        })
        .collect()
}

// ----------------------------------------------------------- conjecture

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConjectureCliRow {
    pub alpha: DecimalAlpha,
    pub nu: Option<f64>,
    pub p: Option<f64>,
    pub rde_mean: Option<f64>,
    pub rde_diverged: Option<bool>,
    pub conjectured_mean: Option<f64>,
    pub abs_diff: Option<f64>,
    pub agrees: Option<bool>,
    pub iterations: Option<usize>,
    pub residual: Option<f64>,
    pub error: Option<String>,
}

impl RowStatus for ConjectureCliRow {
    fn label(&self) -> String {
        format!("alpha={}", self.alpha)
    }
    fn error(&self) -> Option<&str> {
        self.error.as_deref()
    }
}

pub fn conjecture_rows(
    args: &ConjectureArgs,
    offspring: &OffspringSpec,
    quiet: bool,
) -> Result<Table<ConjectureCliRow>, CliError> {
    let family: ArrivalFamily = args.family.parse().map_err(CliError::Usage)?;
    offspring.validate_critical().map_err(|e| CliError::Usage(e.to_string()))?;
    let opts = FixedPointOptions { k: args.k, tol: args.tol, max_iter: args.max_iter };
    let total = args.alpha.0.len();
    let rows = args
        .alpha
        .0
        .iter()
        .enumerate()
        .map(|(i, a)| {
            progress(quiet, format_args!("conjecture: alpha {}/{total} ({a})", i + 1));
            match conjecture_row(offspring, family, a.value(), opts, args.agreement_tol) {
                Ok(r) => ConjectureCliRow {
                    alpha: a.clone(),
                    nu: Some(r.nu),
                    p: Some(r.p),
                    rde_mean: Some(r.rde_mean),
                    rde_diverged: Some(r.rde_diverged),
                    conjectured_mean: r.conjectured_mean,
                    abs_diff: r.abs_diff,
                    agrees: Some(r.agrees),
                    iterations: Some(r.iterations),
                    residual: Some(r.residual),
                    error: None,
                },
                Err(e) => ConjectureCliRow {
                    alpha: a.clone(),
                    nu: Some(family.nu(a.value())),
                    p: None,
                    rde_mean: None,
                    rde_diverged: None,
                    conjectured_mean: None,
                    abs_diff: None,
                    agrees: None,
                    iterations: None,
                    residual: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let variance = offspring.variance();
    let mut table = Table::new(rows);
    table.preamble.push(("offspring_variance".into(), json!(variance)));
    table.preamble.push(("conjectured_alpha_c".into(), json!(conjectured_alpha_c(variance, family))));
    Ok(table)
}

// -------------------------------------------------------------- driver

fn config_value<A: Serialize>(command: &str, format: Format, args: &A) -> Result<Value, CliError> {
    Ok(json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "format": format,
        "args": serde_json::to_value(args)?,
    }))
}

fn meta_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn write_meta(path: &Path, config: &Value) -> Result<(), CliError> {
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let meta = json!({ "config": config, "finished_unix_seconds": secs });
    fs::write(path, serde_json::to_string_pretty(&meta)? + "\n").map_err(io_err(path))
}

/// Writes a table to `--out` (plus sidecar) or standard output.
fn emit<R: Serialize>(cli: &Cli, config: &Value, table: &Table<R>) -> Result<(), CliError> {
    match &cli.out {
        Some(path) => {
            let mut buf = Vec::new();
            write_table(&mut buf, cli.format, config, table)?;
            fs::write(path, buf).map_err(io_err(path))?;
            write_meta(&meta_path(path), config)
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write_table(&mut lock, cli.format, config, table)?;
            lock.flush()?;
            Ok(())
        }
    }
}

fn failing_rows<R: RowStatus>(rows: &[R]) -> Vec<String> {
    rows.iter().filter_map(|r| r.error().map(|e| format!("{}: {e}", r.label()))).collect()
}

/// Runs a parsed command line. Returns the failing row descriptions; the
/// caller turns a non-empty list into a nonzero exit status.
pub fn run(cli: &Cli) -> Result<Vec<String>, CliError> {
    if cli.threads > 0 {
        // A second initialisation in the same process is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    }
    match &cli.command {
        Command::Exact(args) => {
            let config = config_value("exact", cli.format, args)?;
            let table = exact_rows(args);
            emit(cli, &config, &table)?;
            Ok(failing_rows(&table.rows))
        }
        Command::SimulateFinite(args) => {
            let config = config_value("simulate-finite", cli.format, args)?;
            let table = simulate_finite_rows(args, cli.quiet);
            emit(cli, &config, &table)?;
            Ok(failing_rows(&table.rows))
        }
        Command::SimulateLimit(args) => {
            let config = config_value("simulate-limit", cli.format, args)?;
            if let Some(path) = &args.trace {
                write_trace(args, path)?;
            }
            let table = simulate_limit_rows(args, cli.quiet);
            emit(cli, &config, &table)?;
            Ok(failing_rows(&table.rows))
        }
        Command::Rde(args) => {
            let config = config_value("rde", cli.format, args)?;
            let report = rde_report(args)?;
            let mut table = Table::new(report.branches);
            table.preamble.push(("summary".into(), serde_json::to_value(&report.summary)?));
            table.preamble.push(("pmf".into(), serde_json::to_value(&report.pmf)?));
            emit(cli, &config, &table)?;
            Ok(if report.summary.converged {
                Vec::new()
            } else {
                vec![format!(
                    "alpha={}: no convergence after {} iterations (residual {:e})",
                    args.alpha, report.summary.iterations, report.summary.residual
                )]
            })
        }
        Command::PhaseDiagram(args) => {
            let dir = cli
                .out
                .as_ref()
                .ok_or_else(|| CliError::Usage("phase-diagram needs --out DIR".into()))?;
            if cli.format != Format::Csv {
                return Err(CliError::Usage("phase-diagram writes CSV only".into()));
            }
            fs::create_dir_all(dir).map_err(io_err(dir))?;
            let config = config_value("phase-diagram", cli.format, args)?;
            let curve = Table::new(curve_rows(args.curve_points));
            let mc = Table::new(phase_mc_rows(args, cli.quiet));
            for (name, bytes) in [("curve.csv", to_csv(&config, &curve)?), ("mc.csv", to_csv(&config, &mc)?)] {
                let path = dir.join(name);
                fs::write(&path, bytes).map_err(io_err(&path))?;
            }
            write_meta(&dir.join("meta.json"), &config)?;
            Ok(failing_rows(&mc.rows))
        }
        Command::Conjecture(args) => {
            let text = fs::read_to_string(&args.offspring).map_err(io_err(&args.offspring))?;
            let offspring: OffspringSpec = serde_json::from_str(&text)?;
            let mut config = config_value("conjecture", cli.format, args)?;
            config["offspring_spec"] = serde_json::to_value(&offspring)?;
            let table = conjecture_rows(args, &offspring, cli.quiet)?;
            emit(cli, &config, &table)?;
            Ok(failing_rows(&table.rows))
        }
    }
}

fn to_csv<R: Serialize>(config: &Value, table: &Table<R>) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    write_table(&mut buf, Format::Csv, config, table)?;
    Ok(buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("plane-parking").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn grids_parse() {
        let g: AlphaGrid = "0.1,0.25".parse().unwrap();
        assert_eq!(g.0.len(), 2);
        let r: AlphaGrid = "0:0.6:0.05".parse().unwrap();
        assert_eq!(r.0.len(), 13);
        assert!("0.1,x".parse::<AlphaGrid>().is_err());
        assert_eq!("100,1000".parse::<SizeGrid>().unwrap().0, vec![100, 1000]);
        assert!("0".parse::<SizeGrid>().is_err());
    }

    #[test]
    fn seed_is_required_for_simulation() {
        let bad = Cli::try_parse_from(["plane-parking", "simulate-finite", "--n", "10", "--alpha", "0.3"]);
        assert!(bad.is_err());
        let ok = parse(&["simulate-finite", "--n", "10", "--alpha", "0.3", "--seed", "1", "--trials", "5"]);
        assert!(matches!(ok.command, Command::SimulateFinite(_)));
    }

    #[test]
    fn exact_table_values() {
        let args = ExactArgs { alpha: "0.2,0.4142135623730951,0.5,1.5".parse().unwrap() };
        let t = exact_rows(&args);
        assert!((t.rows[0].limit_prob.unwrap() - 0.957315).abs() < 1e-6);
        assert_eq!(t.rows[1].regime, Some(Regime::Critical));
        assert!((t.rows[1].mean_x.unwrap().finite().unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6);
        assert_eq!(t.rows[2].regime, Some(Regime::Supercritical));
        let p = t.rows[2].p.unwrap();
        assert!(p > 0.5 && p <= 0.510957);
        assert!(t.rows[3].error.is_some());
        assert_eq!(failing_rows(&t.rows).len(), 1);
    }

    #[test]
    fn csv_layout() {
        let args = ExactArgs { alpha: "0.20,0.5".parse().unwrap() };
        let config = config_value("exact", Format::Csv, &args).unwrap();
        let mut buf = Vec::new();
        write_table(&mut buf, Format::Csv, &config, &exact_rows(&args)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# config: {"));
        assert_eq!(lines[1], "alpha,regime,p,s_switch,mean_X,mean_Y,limit_prob,error");
        assert!(lines[2].starts_with("0.20,subcritical,"));
        assert!(lines[3].contains(",inf,inf,0.0,"));
        assert!(!text.contains('\r'));
    }

    #[test]
    fn json_lines_layout() {
        let args = ExactArgs { alpha: "0.3".parse().unwrap() };
        let config = config_value("exact", Format::Json, &args).unwrap();
        let mut buf = Vec::new();
        write_table(&mut buf, Format::Json, &config, &exact_rows(&args)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines[0]["config"]["args"]["alpha"][0], "0.3");
        assert_eq!(lines[1]["alpha"], "0.3");
        assert_eq!(lines[1]["regime"], "subcritical");
    }

    #[test]
    fn rde_branch_table() {
        let args = RdeArgs { alpha: "0.3".parse().unwrap(), k: 400, tol: 1e-12, max_iter: 100_000 };
        let r = rde_report(&args).unwrap();
        assert!((r.summary.p - 0.7).abs() < 1e-6);
        assert!(r.summary.max_branch_error < 1e-6);
        assert!(r.branches.iter().all(|b| b.branch == "plus"));
    }

    #[test]
    fn curve_spans_the_window() {
        let c = curve_rows(601);
        assert_eq!(c.first().unwrap().alpha, 0.0);
        assert!((c.last().unwrap().alpha - 0.6).abs() < 1e-15);
        assert!(c.iter().filter(|r| r.alpha >= 0.414214).all(|r| r.limit_prob == 0.0));
    }
}
