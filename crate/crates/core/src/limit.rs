//! The infinite limit model: a spine `1, 2, 3, ...` rooted at 1, with two
//! independent GGW(1/2) trees grafted onto every spine vertex and Po(alpha)
//! cars at every vertex.
//!
//! Parking happens in two steps. Cars inside each grafted tree park there if
//! they can; `Y_k` counts the cars then left demanding spine vertex `k`
//! (its own arrivals plus whatever reached the grafted roots). All cars park
//! iff the spare capacity `C_n = n - (Y_1 + ... + Y_n)` never goes negative.
//!
//! [`sample_y`] draws `Y` literally from grafted trees. That costs thousands
//! of vertices per draw, far too much for `10^9` walk steps, so the walk uses
//! [`YTable`]: the law of `Y` computed from the fixed point of the
//! distributional equation. Draws that land in the table's tail are resolved
//! exactly: when the walk cannot absorb any value above the truncation the
//! trial fails, otherwise a literal draw conditioned on exceeding the
//! truncation is taken by rejection.

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::parking::{park_flow, ArrivalConfig, ParkingError, PoissonArrivals};
use crate::rde::{rde_fixed_point, y_pmf, ArrivalSpec, FixedPointOptions, OffspringSpec, Pmf, RdeError};
use crate::rng::trial_rng;
use crate::trees::{sample_ggw, PlaneTree, TreeError, DEFAULT_SIZE_CAP};

/// Default walk horizon.
pub const DEFAULT_HORIZON: u64 = 100_000;
/// Default truncation of the tabulated law of `Y`.
pub const DEFAULT_TABLE_K: usize = 400;
/// Tail masses below this are numerical noise in the fixed point and are
/// treated as zero.
pub const TAIL_NOISE: f64 = 1e-12;

const TABLE_TOL: f64 = 1e-13;
const TABLE_MAX_ITER: usize = 20_000;

#[derive(Debug, Error)]
pub enum LimitError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Parking(#[from] ParkingError),
    #[error(transparent)]
    Rde(#[from] RdeError),
}

fn check_alpha(alpha: f64) -> Result<(), LimitError> {
    if alpha.is_finite() && (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(LimitError::InvalidArgument(format!("alpha = {alpha} outside [0, 1]")))
    }
}

/// Cars reaching the root of a GGW(1/2) tree grafted onto a spine vertex.
///
/// The grafted root is the spine vertex itself, so its own arrivals are
/// counted once, on the spine, and set to zero here.
fn grafted_demand<R: Rng + ?Sized>(
    rng: &mut R,
    arrivals: &PoissonArrivals,
    size_cap: usize,
) -> Result<(PlaneTree, ArrivalConfig, u64), LimitError> {
    let tree = sample_ggw(rng, size_cap)?;
    let mut counts: Vec<u32> = (0..tree.len()).map(|_| arrivals.draw(rng)).collect();
    counts[0] = 0;
    let config = ArrivalConfig::new(counts);
    let flow = park_flow(&tree, &config)?;
    Ok((tree, config, flow.root_visits))
}

/// One literal draw of `Y`: a Po(alpha) spine arrival plus the cars reaching
/// the roots of two independent grafted GGW(1/2) trees.
pub fn sample_y<R: Rng + ?Sized>(alpha: f64, rng: &mut R, size_cap: usize) -> Result<u64, LimitError> {
    check_alpha(alpha)?;
    let po = PoissonArrivals::new(alpha)?;
    let spine = u64::from(po.draw(rng));
    let (_, _, left) = grafted_demand(rng, &po, size_cap)?;
    let (_, _, right) = grafted_demand(rng, &po, size_cap)?;
    Ok(spine + left + right)
}

/// Inverse-CDF sampler for the law of `Y` on `{0, ..., K}` plus a tail
/// outcome.
#[derive(Debug, Clone)]
pub struct YTable {
    alpha: f64,
    pmf: Pmf,
    /// `thresholds[k] = floor(2^64 P(Y <= k))`.
    thresholds: Vec<u64>,
    tail_active: bool,
    /// Sup-norm residual of the fixed point behind the table.
    residual: f64,
    converged: bool,
}

/// Result of one table draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum YDraw {
    Value(u64),
    /// `Y > K`.
    Tail,
}

impl YTable {
    /// Tabulates the law of `Y` at truncation `k` from the fixed point of the
    /// distributional equation. Near criticality the fixed point may not
    /// reach its tolerance; the last iterate is used and the residual kept.
    pub fn new(alpha: f64, k: usize) -> Result<Self, LimitError> {
        check_alpha(alpha)?;
        let opts = FixedPointOptions { k, tol: TABLE_TOL, max_iter: TABLE_MAX_ITER };
        let (x, residual, converged) =
            match rde_fixed_point(&ArrivalSpec::poisson(alpha), &OffspringSpec::GeometricHalf, opts) {
                Ok(fp) => (fp.pmf, fp.residual, true),
                Err(RdeError::NotConverged { last, residual, .. }) => (*last, residual, false),
                Err(e) => return Err(e.into()),
            };
        let pmf = y_pmf(&x, alpha, k)?;
        Ok(Self::from_pmf(alpha, pmf, residual, converged))
    }

    fn from_pmf(alpha: f64, pmf: Pmf, residual: f64, converged: bool) -> Self {
        const SCALE: f64 = 18_446_744_073_709_551_616.0; // 2^64
        let thresholds = pmf.cdf().iter().map(|c| (c * SCALE) as u64).collect();
        let tail_active = pmf.tail() > TAIL_NOISE;
        Self { alpha, pmf, thresholds, tail_active, residual, converged }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn pmf(&self) -> &Pmf {
        &self.pmf
    }

    pub fn truncation(&self) -> usize {
        self.pmf.truncation()
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn draw<R: RngCore + ?Sized>(&self, rng: &mut R) -> YDraw {
        let u = rng.next_u64();
        // The mass is concentrated near 0, so a linear scan is fastest.
        match self.thresholds.iter().position(|&t| u < t) {
            Some(k) => YDraw::Value(k as u64),
            None if self.tail_active => YDraw::Tail,
            None => YDraw::Value(self.truncation() as u64),
        }
    }
}

/// Spare-capacity trajectory `C_1, ..., C_horizon`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpineWalkTrace {
    pub horizon: u64,
    pub capacities: Vec<i64>,
    pub survived: bool,
    /// First `n` with `C_n < 0`.
    pub first_failure: Option<u64>,
}

/// Counters from the tail handling of one or many walks.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct TailStats {
    /// Tail draws settled by a literal conditioned draw.
    pub tail_resolutions: u64,
    /// Tail draws that made `C_n` negative whatever their exact value.
    pub tail_failures: u64,
    /// Trials restarted because a literal draw exceeded the size cap.
    pub cap_restarts: u64,
}

impl TailStats {
    fn add(self, o: Self) -> Self {
        Self {
            tail_resolutions: self.tail_resolutions + o.tail_resolutions,
            tail_failures: self.tail_failures + o.tail_failures,
            cap_restarts: self.cap_restarts + o.cap_restarts,
        }
    }
}

/// Draws one `Y` for a walk currently at capacity `c`. `Ok(None)` means the
/// draw exceeds the truncation while `c + 1` does not, so the walk fails.
fn walk_step<R: Rng + ?Sized>(
    table: &YTable,
    c: i64,
    rng: &mut R,
    size_cap: usize,
    stats: &mut TailStats,
) -> Result<Option<u64>, LimitError> {
    match table.draw(rng) {
        YDraw::Value(y) => Ok(Some(y)),
        YDraw::Tail if c < table.truncation() as i64 => {
            stats.tail_failures += 1;
            Ok(None)
        }
        YDraw::Tail => {
            stats.tail_resolutions += 1;
            let k = table.truncation() as u64;
            loop {
                let y = sample_y(table.alpha(), rng, size_cap)?;
                if y > k {
                    return Ok(Some(y));
                }
            }
        }
    }
}

/// Runs the walk to `horizon` (or the first failure when `stop_early`).
/// Returns the first failure time, if any.
fn run_walk<R: Rng + ?Sized>(
    table: &YTable,
    horizon: u64,
    rng: &mut R,
    size_cap: usize,
    stats: &mut TailStats,
    mut record: Option<&mut Vec<i64>>,
    stop_early: bool,
) -> Result<Option<u64>, LimitError> {
    let mut c: i64 = 0;
    let mut first_failure = None;
    for n in 1..=horizon {
        let step = walk_step(table, c, rng, size_cap, stats)?;
        c = match step {
            Some(y) => c + 1 - y as i64,
            // Any value above the truncation: record the largest possible C_n.
            None => c - table.truncation() as i64,
        };
        if let Some(buf) = record.as_deref_mut() {
            buf.push(c);
        }
        if c < 0 && first_failure.is_none() {
            first_failure = Some(n);
            if stop_early {
                break;
            }
        }
    }
    Ok(first_failure)
}

/// Full trajectory of one walk.
///
/// After a tail draw that forces failure, the exact value of `Y` is not
/// drawn and the trace continues from the largest capacity consistent with
/// it.
pub fn spine_walk_trace<R: Rng + ?Sized>(
    table: &YTable,
    horizon: u64,
    rng: &mut R,
    size_cap: usize,
) -> Result<SpineWalkTrace, LimitError> {
    if horizon == 0 {
        return Err(LimitError::InvalidArgument("horizon must be at least 1".into()));
    }
    let mut stats = TailStats::default();
    let mut capacities = Vec::with_capacity(horizon as usize);
    let first_failure = run_walk(table, horizon, rng, size_cap, &mut stats, Some(&mut capacities), false)?;
    Ok(SpineWalkTrace { horizon, capacities, survived: first_failure.is_none(), first_failure })
}

/// Survival estimate with its tail bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpineEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub successes: u64,
    pub trials: u64,
    #[serde(flatten)]
    pub tail: TailStats,
}

/// Survival estimate from a prebuilt table. Trial `i` uses
/// [`trial_rng`]`(seed, i)`; a trial whose literal tail draw exceeds the size
/// cap restarts on the same generator and is counted.
pub fn spine_survival_with_table(
    table: &YTable,
    horizon: u64,
    trials: u64,
    seed: u64,
    size_cap: usize,
) -> Result<SpineEstimate, LimitError> {
    if horizon == 0 || trials == 0 {
        return Err(LimitError::InvalidArgument("horizon and trials must be at least 1".into()));
    }
    let (successes, tail) = (0..trials)
        .into_par_iter()
        .map(|i| -> Result<(u64, TailStats), LimitError> {
            let mut rng = trial_rng(seed, i);
            let mut stats = TailStats::default();
            loop {
                match run_walk(table, horizon, &mut rng, size_cap, &mut stats, None, true) {
                    Ok(fail) => return Ok((u64::from(fail.is_none()), stats)),
                    Err(LimitError::Tree(TreeError::CapExceeded { .. })) => stats.cap_restarts += 1,
                    Err(e) => return Err(e),
                }
            }
        })
        .try_reduce(|| (0, TailStats::default()), |a, b| Ok((a.0 + b.0, a.1.add(b.1))))?;
    let p = successes as f64 / trials as f64;
    Ok(SpineEstimate {
        estimate: p,
        std_error: (p * (1.0 - p) / trials as f64).sqrt(),
        successes,
        trials,
        tail,
    })
}

/// Monte Carlo estimate of `P(C_n >= 0 for all n <= horizon)`.
///
/// Truncating the horizon can only overestimate the infinite-horizon
/// survival probability, and the estimate is non-increasing in `horizon` for
/// a fixed seed.
pub fn spine_survival_estimate(alpha: f64, horizon: u64, trials: u64, seed: u64) -> Result<SpineEstimate, LimitError> {
    let table = YTable::new(alpha, DEFAULT_TABLE_K)?;
    spine_survival_with_table(&table, horizon, trials, seed, DEFAULT_SIZE_CAP)
}

/// Probability that every car parks on the limit tree, estimated through the
/// two-step reduction: it equals spine survival. [`prefix_reduction_check`]
/// tests the reduction against joint parking on a finite prefix.
pub fn limit_parking_estimate(alpha: f64, horizon: u64, trials: u64, seed: u64) -> Result<SpineEstimate, LimitError> {
    spine_survival_estimate(alpha, horizon, trials, seed)
}

/// Outcome of [`prefix_reduction_check`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrefixComparison {
    /// All cars park when the whole prefix tree is parked at once.
    pub joint_all_parked: bool,
    /// `C_n >= 0` for every `n` up to the prefix length, from the `Y_k`.
    pub walk_survived: bool,
    pub ys: Vec<u64>,
    pub tree_size: usize,
}

/// Builds the first `spine_len` spine vertices with their grafted trees,
/// parks every car jointly and, from the same randomness, runs the two-step
/// reduction.
pub fn prefix_reduction_check<R: Rng + ?Sized>(
    alpha: f64,
    spine_len: usize,
    rng: &mut R,
    size_cap: usize,
) -> Result<PrefixComparison, LimitError> {
    check_alpha(alpha)?;
    if spine_len == 0 {
        return Err(LimitError::InvalidArgument("spine length must be at least 1".into()));
    }
    let po = PoissonArrivals::new(alpha)?;
    // Preorder of the joint tree: spine vertex k, the non-root vertices of
    // its two grafted trees, then spine vertex k + 1.
    let mut counts = Vec::new();
    let mut cars = Vec::new();
    let mut ys = Vec::with_capacity(spine_len);
    for k in 0..spine_len {
        let spine_cars = po.draw(rng);
        let (left, left_cars, left_y) = grafted_demand(rng, &po, size_cap)?;
        let (right, right_cars, right_y) = grafted_demand(rng, &po, size_cap)?;
        ys.push(u64::from(spine_cars) + left_y + right_y);
        let onward = usize::from(k + 1 < spine_len);
        counts.push(left.child_count(0) + right.child_count(0) + onward);
        cars.push(spine_cars);
        for (t, a) in [(&left, &left_cars), (&right, &right_cars)] {
            counts.extend((1..t.len()).map(|v| t.child_count(v)));
            cars.extend_from_slice(&a.counts()[1..]);
        }
    }
    let tree = PlaneTree::from_child_counts(&counts)?;
    let joint = park_flow(&tree, &ArrivalConfig::new(cars))?;
    let mut c: i64 = 0;
    let mut walk_survived = true;
    for &y in &ys {
        c += 1 - y as i64;
        walk_survived &= c >= 0;
    }
    Ok(PrefixComparison { joint_all_parked: joint.all_parked, walk_survived, ys, tree_size: tree.len() })
}
