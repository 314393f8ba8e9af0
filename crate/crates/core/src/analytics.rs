//! Closed-form quantities of the parking process on GGW(1/2) trees with
//! Po(alpha) arrivals, and the root finder for `p = P(X = 0)` above the
//! critical intensity.
//!
//! The generating function `G(s) = E[s^X]` solves
//! `G^2 - ((2 - p)s + p) G + s e^{alpha(s - 1)} = 0`, whose roots are
//! [`q_plus`] and [`q_minus`]. Below `alpha_c = sqrt(2) - 1` we have
//! `p = 1 - alpha` and `G = Q+` on `[0, 1]`. Above it `p` is larger, `G`
//! follows `Q+` up to the switching point `s_p` and `Q-` after it, and the
//! discriminant
//!
//! ```text
//! h(s) = ((2 - p)s + p)^2 - 4 s e^{alpha(s - 1)}
//! ```
//!
//! has a double root at `s_p`. Combining `h(s) = 0` with `h'(s) = 0` to
//! eliminate the exponential gives the quadratic
//! `f(s) = alpha(2 - p)s^2 + (alpha p + p - 2)s + p`, and `s_p` is its smaller
//! root. So `p` is the value for which `h` vanishes at the smaller root of `f`.

use std::fmt;

use serde::{Serialize, Serializer};
use thiserror::Error;

/// Half-width of the band around `alpha_c` classified as critical.
pub const CRITICAL_BAND: f64 = 1e-6;
/// Discriminants in `[-DISC_CLAMP, 0)` are treated as 0.
pub const DISC_CLAMP: f64 = 1e-10;

const P_SWEEP_POINTS: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticsError {
    #[error("alpha = {0} outside the domain {1}")]
    Domain(f64, &'static str),
    #[error("argument out of range: {0}")]
    InvalidArgument(String),
    #[error("discriminant {0:e} is negative beyond tolerance")]
    NegativeDiscriminant(f64),
    #[error(
        "p solver bracket [{lo}, {hi}] at alpha = {alpha} does not straddle a root \
         (residuals {r_lo:e}, {r_hi:e}; {sign_changes} sign changes in sweep)"
    )]
    BracketFailure { alpha: f64, lo: f64, hi: f64, r_lo: f64, r_hi: f64, sign_changes: usize },
    #[error("turning points of h not found: {0}")]
    NotFound(String),
}

/// A real number or `+infinity`, serialized as a JSON number or the string
/// `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedReal {
    Finite(f64),
    Infinite,
}

impl ExtendedReal {
    pub fn finite(self) -> Option<f64> {
        match self {
            Self::Finite(x) => Some(x),
            Self::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        self == Self::Infinite
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Finite(x) => write!(f, "{x}"),
            Self::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for ExtendedReal {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Self::Finite(x) => s.serialize_f64(*x),
            Self::Infinite => s.serialize_str("inf"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Subcritical,
    Critical,
    Supercritical,
}

impl Regime {
    pub fn of(alpha: f64) -> Self {
        let d = alpha - alpha_critical();
        if d.abs() < CRITICAL_BAND {
            Self::Critical
        } else if d < 0.0 {
            Self::Subcritical
        } else {
            Self::Supercritical
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Subcritical => "subcritical",
            Self::Critical => "critical",
            Self::Supercritical => "supercritical",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Every closed-form quantity at one intensity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaProfile {
    pub alpha: f64,
    pub regime: Regime,
    pub p: f64,
    pub s_switch: Option<f64>,
    #[serde(rename = "mean_X")]
    pub mean_x: ExtendedReal,
    #[serde(rename = "mean_Y")]
    pub mean_y: ExtendedReal,
    pub limit_prob: f64,
}

pub fn alpha_critical() -> f64 {
    std::f64::consts::SQRT_2 - 1.0
}

fn check_unit(alpha: f64) -> Result<(), AnalyticsError> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(AnalyticsError::Domain(alpha, "[0, 1]"))
    }
}

/// `1 - 2 alpha - alpha^2`, clamped at 0.
fn drift_sq(alpha: f64) -> f64 {
    (1.0 - 2.0 * alpha - alpha * alpha).max(0.0)
}

/// Limiting probability that every car parks on the uniform plane tree with
/// `n` vertices and `floor(alpha n)` cars as `n -> infinity`.
pub fn limit_parking_prob(alpha: f64) -> Result<f64, AnalyticsError> {
    check_unit(alpha)?;
    if Regime::of(alpha) == Regime::Supercritical {
        return Ok(0.0);
    }
    Ok(drift_sq(alpha).sqrt() / ((1.0 - alpha).powi(2) * alpha.exp()))
}

/// Upper bound on `p` above criticality.
pub fn p_upper_bound(alpha: f64) -> f64 {
    2.0 / ((3.0 + 2.0 * std::f64::consts::SQRT_2) * alpha + 1.0)
}

/// Root of the p-residual with diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PSolution {
    pub p: f64,
    /// `h(s_p)` at the returned `p`.
    pub residual: f64,
    pub bracket: (f64, f64),
    /// Sign changes of the residual seen by the sanity sweep over the
    /// bracket; more than one means the root may not be unique.
    pub sign_changes: usize,
}

/// `h(t(p))` with `t(p)` the smaller root of `f`.
fn p_residual(alpha: f64, p: f64) -> Result<f64, AnalyticsError> {
    let t = s_switch_unchecked(alpha, p)?;
    Ok(h_discriminant(t, alpha, p))
}

/// Bisection for `p` above criticality, after a sweep of the bracket.
pub fn solve_p_supercritical(alpha: f64) -> Result<PSolution, AnalyticsError> {
    if !(alpha > alpha_critical() && alpha <= 1.0) {
        return Err(AnalyticsError::Domain(alpha, "(sqrt(2) - 1, 1]"));
    }
    let (lo, hi) = (1.0 - alpha + 1e-9, p_upper_bound(alpha));
    let mut prev = p_residual(alpha, lo)?;
    let (r_lo, mut r_hi) = (prev, prev);
    let mut sign_changes = 0;
    for i in 1..=P_SWEEP_POINTS {
        let p = lo + (hi - lo) * i as f64 / P_SWEEP_POINTS as f64;
        let r = p_residual(alpha, p)?;
        if (r > 0.0) != (prev > 0.0) {
            sign_changes += 1;
        }
        prev = r;
        r_hi = r;
    }
    if (r_lo > 0.0) == (r_hi > 0.0) {
        return Err(AnalyticsError::BracketFailure { alpha, lo, hi, r_lo, r_hi, sign_changes });
    }
    let (mut a, mut b, mut fa) = (lo, hi, r_lo);
    while b - a > 1e-12 {
        let mid = 0.5 * (a + b);
        let fm = p_residual(alpha, mid)?;
        if (fm > 0.0) == (fa > 0.0) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    let p = 0.5 * (a + b);
    Ok(PSolution { p, residual: p_residual(alpha, p)?, bracket: (lo, hi), sign_changes })
}

/// `p = P(X = 0)`.
pub fn p_zero(alpha: f64) -> Result<f64, AnalyticsError> {
    check_unit(alpha)?;
    match Regime::of(alpha) {
        Regime::Supercritical => solve_p_supercritical(alpha).map(|s| s.p),
        _ => Ok(1.0 - alpha),
    }
}

pub fn h_discriminant(s: f64, alpha: f64, p: f64) -> f64 {
    ((2.0 - p) * s + p).powi(2) - 4.0 * s * (alpha * (s - 1.0)).exp()
}

fn h_prime(s: f64, alpha: f64, p: f64) -> f64 {
    2.0 * (2.0 - p) * ((2.0 - p) * s + p) - 4.0 * (alpha * (s - 1.0)).exp() * (1.0 + alpha * s)
}

fn h_second(s: f64, alpha: f64, p: f64) -> f64 {
    2.0 * (2.0 - p).powi(2) - 4.0 * alpha * (alpha * (s - 1.0)).exp() * (2.0 + alpha * s)
}

pub fn f_quadratic(s: f64, alpha: f64, p: f64) -> f64 {
    alpha * (2.0 - p) * s * s + (alpha * p + p - 2.0) * s + p
}

fn clamp_disc(d: f64) -> Result<f64, AnalyticsError> {
    if d >= 0.0 {
        Ok(d)
    } else if d >= -DISC_CLAMP {
        Ok(0.0)
    } else {
        Err(AnalyticsError::NegativeDiscriminant(d))
    }
}

pub fn q_plus(s: f64, alpha: f64, p: f64) -> Result<f64, AnalyticsError> {
    let d = clamp_disc(h_discriminant(s, alpha, p))?;
    Ok(0.5 * ((2.0 - p) * s + p + d.sqrt()))
}

pub fn q_minus(s: f64, alpha: f64, p: f64) -> Result<f64, AnalyticsError> {
    let d = clamp_disc(h_discriminant(s, alpha, p))?;
    Ok(0.5 * ((2.0 - p) * s + p - d.sqrt()))
}

fn s_switch_unchecked(alpha: f64, p: f64) -> Result<f64, AnalyticsError> {
    let b = 2.0 - p - alpha * p;
    let d = clamp_disc(b * b - 4.0 * alpha * p * (2.0 - p))?;
    Ok((b - d.sqrt()) / (2.0 * alpha * (2.0 - p)))
}

/// The branch switching point `s_p`: the smaller root of [`f_quadratic`].
pub fn s_switch(alpha: f64, p: f64) -> Result<f64, AnalyticsError> {
    if !(alpha > 0.0 && (0.0..2.0).contains(&p)) {
        return Err(AnalyticsError::InvalidArgument(format!("alpha = {alpha}, p = {p}")));
    }
    s_switch_unchecked(alpha, p)
}

/// `G(s) = E[s^X]` for `s` in `[0, 1]`.
pub fn gen_fn(s: f64, alpha: f64) -> Result<f64, AnalyticsError> {
    if !(0.0..=1.0).contains(&s) {
        return Err(AnalyticsError::InvalidArgument(format!("s = {s} outside [0, 1]")));
    }
    let p = p_zero(alpha)?;
    if Regime::of(alpha) != Regime::Supercritical {
        return q_plus(s, alpha, p);
    }
    if s < s_switch(alpha, p)? {
        q_plus(s, alpha, p)
    } else {
        q_minus(s, alpha, p)
    }
}

/// `E[X]`: `(1 + alpha - sqrt(1 - 2 alpha - alpha^2)) / 2` up to criticality,
/// infinite above.
pub fn mean_x(alpha: f64) -> Result<ExtendedReal, AnalyticsError> {
    check_unit(alpha)?;
    Ok(match Regime::of(alpha) {
        Regime::Supercritical => ExtendedReal::Infinite,
        _ => ExtendedReal::Finite((1.0 + alpha - drift_sq(alpha).sqrt()) / 2.0),
    })
}

/// `E[Y] = alpha + 2 E[X] - 2(1 - p)`, which is `1 - sqrt(1 - 2 alpha - alpha^2)`
/// up to criticality.
pub fn mean_y(alpha: f64) -> Result<ExtendedReal, AnalyticsError> {
    check_unit(alpha)?;
    Ok(match Regime::of(alpha) {
        Regime::Supercritical => ExtendedReal::Infinite,
        _ => ExtendedReal::Finite(1.0 - drift_sq(alpha).sqrt()),
    })
}

/// `P(Y = 0) = (1 - alpha)^2 e^{alpha}` at or below criticality.
///
/// One Po(alpha) arrival on the spine vertex and two independent copies of the
/// subtree sum, each vanishing with probability `(1 - alpha) e^{alpha}`:
/// `e^{-alpha} ((1 - alpha) e^{alpha})^2`.
pub fn y_zero_prob(alpha: f64) -> Result<f64, AnalyticsError> {
    check_unit(alpha)?;
    Ok((1.0 - alpha).powi(2) * alpha.exp())
}

/// Survival probability `m / q` of a walk with steps `1 - Y`, where
/// `m = E[1 - Y] >= 0` and `q = P(Y = 0)`.
pub fn skip_free_survival(m: f64, q: f64) -> Result<f64, AnalyticsError> {
    if !(m >= 0.0 && q > 0.0 && q <= 1.0 && m <= q) {
        return Err(AnalyticsError::InvalidArgument(format!("m = {m}, q = {q}")));
    }
    Ok(m / q)
}

/// Interior local minimum `t1` and local maximum `t2` of `h` on `(0, 1)`.
///
/// `h''` is decreasing in `s`, so `h'` is unimodal: it rises until the zero
/// of `h''` and falls afterwards. Each turning point is then a bisection of
/// `h'` on one side of that zero.
pub fn h_turning_points(alpha: f64, p: f64) -> Result<(f64, f64), AnalyticsError> {
    let not_found = |what: &str| AnalyticsError::NotFound(format!("{what} (alpha = {alpha}, p = {p})"));
    let (h2_0, h2_1) = (h_second(0.0, alpha, p), h_second(1.0, alpha, p));
    let s0 = if h2_1 >= 0.0 {
        1.0
    } else if h2_0 <= 0.0 {
        return Err(not_found("h is concave on [0, 1]"));
    } else {
        bisect(|s| h_second(s, alpha, p), 0.0, 1.0)
    };
    let (d0, dm, d1) = (h_prime(0.0, alpha, p), h_prime(s0, alpha, p), h_prime(1.0, alpha, p));
    if !(d0 < 0.0 && dm > 0.0 && d1 < 0.0) {
        return Err(not_found("h' lacks the sign pattern (-, +, -)"));
    }
    let t1 = bisect(|s| h_prime(s, alpha, p), 0.0, s0);
    let t2 = bisect(|s| h_prime(s, alpha, p), s0, 1.0);
    Ok((t1, t2))
}

/// Sign-change bisection to machine resolution; `g(a)` and `g(b)` must
/// differ in sign.
fn bisect(g: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let neg_at_a = g(a) < 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if (g(mid) < 0.0) == neg_at_a {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

pub fn alpha_profile(alpha: f64) -> Result<AlphaProfile, AnalyticsError> {
    check_unit(alpha)?;
    let regime = Regime::of(alpha);
    let p = p_zero(alpha)?;
    let s_switch = match regime {
        Regime::Supercritical => Some(s_switch(alpha, p)?),
        _ => None,
    };
    Ok(AlphaProfile {
        alpha,
        regime,
        p,
        s_switch,
        mean_x: mean_x(alpha)?,
        mean_y: mean_y(alpha)?,
        limit_prob: limit_parking_prob(alpha)?,
    })
}
