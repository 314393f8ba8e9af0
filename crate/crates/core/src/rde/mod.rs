//! Fixed-point engine for the recursive distributional equation
//!
//! ```text
//! X  =d  P + sum_{i=1}^{N} (X_i - 1)^+
//! ```
//!
//! on truncated probability mass functions. `N` is the offspring law of the
//! Galton–Watson tree, `P` the number of cars arriving at a vertex and the
//! `X_i` are independent copies of `X`. Iterating the right-hand side from
//! the point mass at 0 gives the laws of `X` for the tree cut at depth
//! 1, 2, ..., which increase stochastically to the minimal solution.
//!
//! All convolutions are direct `O(K^2)` sums. Mass that would land above
//! the truncation `K` is dropped into the tail, never renormalised.

pub mod conjecture;
mod pmf;

pub use conjecture::{conjecture_probe, conjecture_row, ArrivalFamily, ConjectureReport, ConjectureRow};
pub use pmf::{pmf_mean, pmf_pgf_eval, MeanEstimate, PgfValue, Pmf, DEFAULT_DIVERGENCE_THRESHOLD, MASS_SLACK};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default truncation.
pub const DEFAULT_K: usize = 400;
/// Default sup-norm convergence tolerance.
pub const DEFAULT_TOL: f64 = 1e-12;
/// Default iteration budget.
pub const DEFAULT_MAX_ITER: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RdeError {
    #[error("invalid pmf: {0}")]
    InvalidPmf(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("geometric sum denominator 2 - nu(0) = {0} is not positive")]
    DegenerateDenominator(f64),
    #[error("unsupported offspring law: {0}")]
    UnsupportedOffspring(String),
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NotConverged { last: Box<Pmf>, iterations: usize, residual: f64 },
}

/// Offspring law `N` of the Galton–Watson tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OffspringSpec {
    /// Geom(1/2): `P(N = i) = 2^{-(i+1)}`.
    GeometricHalf,
    /// Po(1).
    PoissonOne,
    /// Finite support `P(N = i) = mass[i]`.
    Explicit { mass: Vec<f64> },
}

impl OffspringSpec {
    pub fn validate(&self) -> Result<(), RdeError> {
        if let Self::Explicit { mass } = self {
            if mass.is_empty() {
                return Err(RdeError::UnsupportedOffspring("explicit law with empty support".into()));
            }
            if mass.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
                return Err(RdeError::UnsupportedOffspring("negative or non-finite mass".into()));
            }
            let total: f64 = mass.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(RdeError::UnsupportedOffspring(format!("masses sum to {total}")));
            }
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        match self {
            Self::GeometricHalf | Self::PoissonOne => 1.0,
            Self::Explicit { mass } => mass.iter().enumerate().map(|(i, m)| i as f64 * m).sum(),
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            Self::GeometricHalf => 2.0,
            Self::PoissonOne => 1.0,
            Self::Explicit { mass } => {
                let mean = self.mean();
                mass.iter().enumerate().map(|(i, m)| (i as f64 - mean).powi(2) * m).sum()
            }
        }
    }

    /// Valid and with mean within `1e-9` of 1.
    pub fn validate_critical(&self) -> Result<(), RdeError> {
        self.validate()?;
        let mean = self.mean();
        if (mean - 1.0).abs() > 1e-9 {
            return Err(RdeError::UnsupportedOffspring(format!("offspring mean {mean} is not 1")));
        }
        Ok(())
    }
}

/// Law of the number of cars `P` arriving at a vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ArrivalSpec {
    Poisson { alpha: f64 },
    Explicit { mass: Vec<f64> },
}

impl ArrivalSpec {
    pub fn poisson(alpha: f64) -> Self {
        Self::Poisson { alpha }
    }

    /// `alpha = E[P]`.
    pub fn mean(&self) -> f64 {
        match self {
            Self::Poisson { alpha } => *alpha,
            Self::Explicit { mass } => mass.iter().enumerate().map(|(i, m)| i as f64 * m).sum(),
        }
    }

    /// `nu = E[P(P - 1)]`.
    pub fn second_factorial_moment(&self) -> f64 {
        match self {
            Self::Poisson { alpha } => alpha * alpha,
            Self::Explicit { mass } => mass.iter().enumerate().map(|(i, m)| (i * i.saturating_sub(1)) as f64 * m).sum(),
        }
    }

    /// The law as a pmf on `{0, ..., k}`.
    pub fn pmf(&self, k: usize) -> Result<Pmf, RdeError> {
        match self {
            Self::Poisson { alpha } => Pmf::poisson(*alpha, k),
            Self::Explicit { mass } => {
                let total: f64 = mass.iter().sum();
                if mass.is_empty() || (total - 1.0).abs() > 1e-9 {
                    return Err(RdeError::InvalidParameter(format!("arrival masses sum to {total}")));
                }
                Pmf::from_mass(mass.clone()).map(|p| p.resized(k))
            }
        }
    }
}

/// Law of `(X - 1)^+`: masses at 0 and 1 merge, everything else shifts
/// down by one. The value at `K` would need `mu(K + 1)`, which is unknown, so
/// it is left at 0 and the tail keeps that mass.
pub fn pushdown(mu: &Pmf) -> Pmf {
    let m = mu.mass();
    let mut out = vec![0.0; m.len()];
    out[0] = m[0] + m[1];
    out[1..m.len() - 1].copy_from_slice(&m[2..]);
    Pmf::from_raw(out)
}

/// Law of `sum_{i=1}^{N} Z_i` with `N ~ Geom(1/2)` and `Z_i ~ nu` i.i.d.
///
/// From `W(s) = 1 / (2 - phi(s))`:
/// `w(k) (2 - nu(0)) = [k = 0] + sum_{j=1}^{k} nu(j) w(k - j)`.
pub fn geom_half_sum(nu: &Pmf, k: usize) -> Result<Pmf, RdeError> {
    let denom = 2.0 - nu.at(0);
    if denom <= 0.0 {
        return Err(RdeError::DegenerateDenominator(denom));
    }
    let nu_mass = nu.mass();
    let mut w = vec![0.0; k + 1];
    w[0] = 1.0 / denom;
    for i in 1..=k {
        let top = i.min(nu_mass.len() - 1);
        let acc: f64 = (1..=top).map(|j| nu_mass[j] * w[i - j]).sum();
        w[i] = acc / denom;
    }
    Ok(Pmf::from_raw(w))
}

/// Law of `sum_{i=1}^{N} Z_i` with `N ~ Po(1)`: `W = exp(phi - 1)`, so
/// `w(0) = e^{nu(0) - 1}` and `k w(k) = sum_{j=1}^{k} j nu(j) w(k - j)`.
pub fn poisson_one_sum(nu: &Pmf, k: usize) -> Pmf {
    let nu_mass = nu.mass();
    let mut w = vec![0.0; k + 1];
    w[0] = (nu.at(0) - 1.0).exp();
    for i in 1..=k {
        let top = i.min(nu_mass.len() - 1);
        let acc: f64 = (1..=top).map(|j| j as f64 * nu_mass[j] * w[i - j]).sum();
        w[i] = acc / i as f64;
    }
    Pmf::from_raw(w)
}

/// Law of `sum_{i=1}^{N} Z_i` for a finitely supported `N`:
/// `sum_n P(N = n) nu^{*n}`.
pub fn explicit_sum(nu: &Pmf, offspring: &[f64], k: usize) -> Pmf {
    let mut power = Pmf::delta_zero(k);
    let mut acc = vec![0.0; k + 1];
    for (n, &weight) in offspring.iter().enumerate() {
        if n > 0 {
            power = convolve(&power, nu, k);
        }
        for (a, p) in acc.iter_mut().zip(power.mass()) {
            *a += weight * p;
        }
    }
    Pmf::from_raw(acc)
}

/// Law of the sum of independent draws from `a` and `b`, truncated at `k`.
pub fn convolve(a: &Pmf, b: &Pmf, k: usize) -> Pmf {
    let (am, bm) = (trim(a.mass()), trim(b.mass()));
    let mut out = vec![0.0; k + 1];
    for (i, &x) in am.iter().enumerate().take(k + 1) {
        if x == 0.0 {
            continue;
        }
        for (o, &y) in out[i..].iter_mut().zip(bm) {
            *o += x * y;
        }
    }
    Pmf::from_raw(out)
}

/// Drops trailing exact zeros (e.g. underflowed Poisson masses).
fn trim(m: &[f64]) -> &[f64] {
    let end = m.iter().rposition(|x| *x != 0.0).map_or(1, |i| i + 1);
    &m[..end]
}

/// Offspring composition of `nu` at truncation `k`.
fn offspring_sum(nu: &Pmf, offspring: &OffspringSpec, k: usize) -> Result<Pmf, RdeError> {
    match offspring {
        OffspringSpec::GeometricHalf => geom_half_sum(nu, k),
        OffspringSpec::PoissonOne => Ok(poisson_one_sum(nu, k)),
        OffspringSpec::Explicit { mass } => {
            offspring.validate()?;
            Ok(explicit_sum(nu, mass, k))
        }
    }
}

/// One application of the right-hand side of the RDE.
pub fn rde_step(mu: &Pmf, arrivals: &ArrivalSpec, offspring: &OffspringSpec, k: usize) -> Result<Pmf, RdeError> {
    let arrival_pmf = arrivals.pmf(k)?;
    step_with(mu, &arrival_pmf, offspring, k)
}

fn step_with(mu: &Pmf, arrival_pmf: &Pmf, offspring: &OffspringSpec, k: usize) -> Result<Pmf, RdeError> {
    let nu = pushdown(&mu.resized(k));
    let children = offspring_sum(&nu, offspring, k)?;
    Ok(convolve(&children, arrival_pmf, k))
}

/// Iteration controls for [`rde_fixed_point`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointOptions {
    #[serde(rename = "K")]
    pub k: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self { k: DEFAULT_K, tol: DEFAULT_TOL, max_iter: DEFAULT_MAX_ITER }
    }
}

impl FixedPointOptions {
    pub fn with_k(k: usize) -> Self {
        Self { k, ..Self::default() }
    }
}

/// Converged fixed point.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPoint {
    pub pmf: Pmf,
    pub iterations: usize,
    pub residual: f64,
}

/// Iterates [`rde_step`] from the point mass at 0 until successive iterates
/// differ by less than `tol` in sup norm.
pub fn rde_fixed_point(
    arrivals: &ArrivalSpec,
    offspring: &OffspringSpec,
    opts: FixedPointOptions,
) -> Result<FixedPoint, RdeError> {
    if opts.tol.is_nan() || opts.tol <= 0.0 {
        return Err(RdeError::InvalidParameter(format!("tolerance {}", opts.tol)));
    }
    if opts.k < 1 {
        return Err(RdeError::InvalidParameter("truncation K must be at least 1".into()));
    }
    offspring.validate()?;
    let arrival_pmf = arrivals.pmf(opts.k)?;
    let mut mu = Pmf::delta_zero(opts.k);
    let mut residual = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let next = step_with(&mu, &arrival_pmf, offspring, opts.k)?;
        residual = next.sup_distance(&mu);
        mu = next;
        if residual < opts.tol {
            return Ok(FixedPoint { pmf: mu, iterations: it, residual });
        }
    }
    Err(RdeError::NotConverged { last: Box::new(mu), iterations: opts.max_iter, residual })
}

/// Law of the cars demanding the spine vertex in the infinite model,
/// `Y = P + sum_{i=1}^{N_1 + N_2} (X_i - 1)^+`, from the law of `X`.
pub fn y_pmf(x: &Pmf, alpha: f64, k: usize) -> Result<Pmf, RdeError> {
    let w = geom_half_sum(&pushdown(&x.resized(k)), k)?;
    let both = convolve(&w, &w, k);
    Ok(convolve(&both, &Pmf::poisson(alpha, k)?, k))
}
