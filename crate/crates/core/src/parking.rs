//! Parking dynamics on a fixed tree, and the finite-`n` experiment.
//!
//! Every vertex has room for one car. A car parks where it arrives if the
//! space is free, and otherwise drives towards the root taking the first free
//! space; a car that passes the root without parking is lost. The final
//! outcome does not depend on the order in which cars arrive, so the
//! production path is the bottom-up flow computation [`park_flow`]:
//!
//! ```text
//! X_v = arrivals(v) + sum over children c of (X_c - 1)^+
//! ```
//!
//! where `X_v` counts the cars that visit `v`. [`park_sequential`] follows
//! the cars one by one and exists to check that equivalence.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::alpha::DecimalAlpha;
use crate::rng::trial_rng;
use crate::trees::{sample_uniform_plane_tree, PlaneTree, TreeError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParkingError {
    #[error("arrival vector has length {got}, tree has {expected} vertices")]
    LengthMismatch { expected: usize, got: usize },
    #[error("destination {index} out of range for a tree with {n} vertices")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("arrival intensity must be finite and non-negative, got {0}")]
    InvalidAlpha(f64),
    #[error("at least one trial is required")]
    NoTrials,
    #[error(transparent)]
    Tree(#[from] TreeError),
}

/// Number of cars arriving at each vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArrivalConfig {
    counts: Vec<u32>,
    total: u64,
}

impl ArrivalConfig {
    pub fn new(counts: Vec<u32>) -> Self {
        let total = counts.iter().map(|&c| u64::from(c)).sum();
        Self { counts, total }
    }

    /// Bins a list of destination vertices.
    pub fn from_destinations(n: usize, destinations: &[usize]) -> Result<Self, ParkingError> {
        let mut counts = vec![0u32; n];
        for &d in destinations {
            *counts.get_mut(d).ok_or(ParkingError::IndexOutOfRange { index: d, n })? += 1;
        }
        Ok(Self::new(counts))
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// One more car at `v`.
    pub fn add_car(&mut self, v: usize) {
        self.counts[v] += 1;
        self.total += 1;
    }
}

/// Output of [`park_flow`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParkingFlowResult {
    /// `X_v`: cars that visit vertex `v`, including those that park there.
    pub visits: Vec<u64>,
    pub root_visits: u64,
    /// `(root_visits - 1)^+`: cars that cannot park.
    pub overflow: u64,
    pub all_parked: bool,
}

impl ParkingFlowResult {
    pub fn parked(&self, arrivals: &ArrivalConfig) -> u64 {
        arrivals.total() - self.overflow
    }
}

/// Bottom-up parking flow, O(n).
///
/// Vertices are in preorder, so scanning indices downwards finishes every
/// child before its parent; no recursion is involved.
pub fn park_flow(t: &PlaneTree, a: &ArrivalConfig) -> Result<ParkingFlowResult, ParkingError> {
    if a.len() != t.len() {
        return Err(ParkingError::LengthMismatch { expected: t.len(), got: a.len() });
    }
    let mut visits: Vec<u64> = a.counts().iter().map(|&c| u64::from(c)).collect();
    for v in (1..t.len()).rev() {
        let passed_on = visits[v].saturating_sub(1);
        if passed_on > 0 {
            let p = t.parent(v).expect("non-root vertex has a parent");
            visits[p] += passed_on;
        }
    }
    let root_visits = visits[0];
    let overflow = root_visits.saturating_sub(1);
    Ok(ParkingFlowResult { visits, root_visits, overflow, all_parked: overflow == 0 })
}

/// Outcome of [`park_sequential`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SequentialOutcome {
    pub parked: u64,
    pub failed: u64,
}

/// Parks cars one at a time in the given order.
pub fn park_sequential(t: &PlaneTree, destinations: &[usize]) -> Result<SequentialOutcome, ParkingError> {
    let n = t.len();
    if let Some(&bad) = destinations.iter().find(|&&d| d >= n) {
        return Err(ParkingError::IndexOutOfRange { index: bad, n });
    }
    let mut occupied = vec![false; n];
    let mut out = SequentialOutcome { parked: 0, failed: 0 };
    for &d in destinations {
        let mut v = Some(d);
        loop {
            match v {
                Some(u) if !occupied[u] => {
                    occupied[u] = true;
                    out.parked += 1;
                    break;
                }
                Some(u) => v = t.parent(u),
                None => {
                    out.failed += 1;
                    break;
                }
            }
        }
    }
    Ok(out)
}

/// `m` cars at i.i.d. uniform vertices of an `n`-vertex tree.
pub fn sample_arrivals_fixed<R: Rng + ?Sized>(n: usize, m: u64, rng: &mut R) -> ArrivalConfig {
    assert!(n >= 1, "tree must have a vertex");
    let mut counts = vec![0u32; n];
    for _ in 0..m {
        counts[rng.random_range(0..n)] += 1;
    }
    ArrivalConfig { counts, total: m }
}

/// Po(alpha) sampler that also accepts `alpha = 0`.
#[derive(Debug, Clone, Copy)]
pub struct PoissonArrivals(Option<Poisson<f64>>);

impl PoissonArrivals {
    pub fn new(alpha: f64) -> Result<Self, ParkingError> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(ParkingError::InvalidAlpha(alpha));
        }
        if alpha == 0.0 {
            return Ok(Self(None));
        }
        Ok(Self(Some(Poisson::new(alpha).map_err(|_| ParkingError::InvalidAlpha(alpha))?)))
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        match &self.0 {
            None => 0,
            Some(p) => p.sample(rng) as u32,
        }
    }
}

/// Independent Po(alpha) car counts at each of `n` vertices.
pub fn sample_arrivals_poisson<R: Rng + ?Sized>(
    n: usize,
    alpha: f64,
    rng: &mut R,
) -> Result<ArrivalConfig, ParkingError> {
    let po = PoissonArrivals::new(alpha)?;
    Ok(ArrivalConfig::new((0..n).map(|_| po.draw(rng)).collect()))
}

/// Monte Carlo estimate of a probability with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub estimate: f64,
    pub std_error: f64,
    pub successes: u64,
    pub trials: u64,
}

impl Estimate {
    pub fn from_counts(successes: u64, trials: u64) -> Self {
        let p = successes as f64 / trials as f64;
        let std_error = (p * (1.0 - p) / trials as f64).sqrt();
        Self { estimate: p, std_error, successes, trials }
    }
}

/// Probability that all `floor(alpha * n)` cars park on a uniform plane tree
/// with `n` vertices.
///
/// Trial `i` uses the generator [`trial_rng`]`(seed, i)`, so the result is
/// independent of thread scheduling.
pub fn estimate_finite_parking_prob(
    n: usize,
    alpha: &DecimalAlpha,
    trials: u64,
    seed: u64,
) -> Result<Estimate, ParkingError> {
    if trials == 0 {
        return Err(ParkingError::NoTrials);
    }
    if n == 0 {
        return Err(TreeError::EmptyTree.into());
    }
    let cars = alpha.floor_times(n as u64);
    let successes = (0..trials)
        .into_par_iter()
        .map(|i| -> Result<u64, ParkingError> {
            let mut rng = trial_rng(seed, i);
            let tree = sample_uniform_plane_tree(n, &mut rng)?;
            let arrivals = sample_arrivals_fixed(n, cars, &mut rng);
            Ok(u64::from(park_flow(&tree, &arrivals)?.all_parked))
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(Estimate::from_counts(successes, trials))
}
