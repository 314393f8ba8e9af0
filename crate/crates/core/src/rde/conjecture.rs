//! Numerical probe of the conjectured mean formula for general critical
//! offspring laws `N` with `V = Var(N)` and arrival laws `P` with `E[P] = alpha`,
//! `nu(alpha) = E[P(P - 1)]`:
//!
//! ```text
//! E[X] = (1 - alpha + alpha V - sqrt((1 - alpha)^2 - V nu(alpha))) / V
//! alpha_c = inf { alpha : alpha = 1 - sqrt(V nu(alpha)) }
//! ```

use serde::Serialize;

use super::{rde_fixed_point, ArrivalSpec, FixedPointOptions, OffspringSpec, RdeError};

/// One-parameter arrival families indexed by their mean `alpha`. Both are
/// stochastically increasing in `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArrivalFamily {
    /// `P ~ Po(alpha)`, `nu = alpha^2`.
    Poisson,
    /// `P = 2` with probability `alpha / 2`, else 0; `nu = alpha`.
    TwoPoint,
}

impl ArrivalFamily {
    pub fn spec(self, alpha: f64) -> Result<ArrivalSpec, RdeError> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(RdeError::InvalidParameter(format!("arrival mean {alpha}")));
        }
        match self {
            Self::Poisson => Ok(ArrivalSpec::Poisson { alpha }),
            Self::TwoPoint if alpha <= 2.0 => Ok(ArrivalSpec::Explicit { mass: vec![1.0 - alpha / 2.0, 0.0, alpha / 2.0] }),
            Self::TwoPoint => Err(RdeError::InvalidParameter(format!("two-point family needs alpha <= 2, got {alpha}"))),
        }
    }

    /// `E[P(P - 1)]` as a function of the mean.
    pub fn nu(self, alpha: f64) -> f64 {
        match self {
            Self::Poisson => alpha * alpha,
            Self::TwoPoint => alpha,
        }
    }
}

impl std::str::FromStr for ArrivalFamily {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "poisson" => Ok(Self::Poisson),
            "two-point" => Ok(Self::TwoPoint),
            other => Err(format!("unknown arrival family {other:?} (expected poisson or two-point)")),
        }
    }
}

/// Conjectured `E[X]`, or `None` when the square root is undefined
/// (the conjecture then predicts an infinite mean).
pub fn conjectured_mean(variance: f64, alpha: f64, nu: f64) -> Option<f64> {
    let disc = (1.0 - alpha).powi(2) - variance * nu;
    if disc < 0.0 || alpha >= 1.0 {
        return None;
    }
    Some((1.0 - alpha + alpha * variance - disc.sqrt()) / variance)
}

/// Smallest root in `(0, 1]` of `alpha - 1 + sqrt(V nu(alpha))`: a scan on a
/// grid of 1000 cells locates the first sign change, bisection refines it.
pub fn conjectured_alpha_c(variance: f64, family: ArrivalFamily) -> Option<f64> {
    let g = |a: f64| a - 1.0 + (variance * family.nu(a)).sqrt();
    const CELLS: usize = 1000;
    let mut lo = 0.0;
    for i in 1..=CELLS {
        let hi = i as f64 / CELLS as f64;
        if g(hi) >= 0.0 {
            let (mut a, mut b) = (lo, hi);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if g(mid) >= 0.0 {
                    b = mid;
                } else {
                    a = mid;
                }
                if b - a < 1e-15 {
                    break;
                }
            }
            return Some(0.5 * (a + b));
        }
        lo = hi;
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConjectureRow {
    pub alpha: f64,
    pub nu: f64,
    pub p: f64,
    pub rde_mean: f64,
    pub rde_diverged: bool,
    pub conjectured_mean: Option<f64>,
    pub abs_diff: Option<f64>,
    /// Finite means agree within tolerance, or both sides say infinite.
    pub agrees: bool,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConjectureReport {
    pub offspring_variance: f64,
    pub family: ArrivalFamily,
    pub conjectured_alpha_c: Option<f64>,
    pub tolerance: f64,
    pub rows: Vec<ConjectureRow>,
}

/// Evaluates a single grid point.
pub fn conjecture_row(
    offspring: &OffspringSpec,
    family: ArrivalFamily,
    alpha: f64,
    opts: FixedPointOptions,
    tolerance: f64,
) -> Result<ConjectureRow, RdeError> {
    offspring.validate_critical()?;
    let variance = offspring.variance();
    let fp = rde_fixed_point(&family.spec(alpha)?, offspring, opts)?;
    let mean = fp.pmf.mean();
    let nu = family.nu(alpha);
    let conj = conjectured_mean(variance, alpha, nu);
    let abs_diff = conj.map(|c| (c - mean.mean_lower).abs());
    let agrees = match abs_diff {
        Some(d) => !mean.diverged && d < tolerance,
        None => mean.diverged,
    };
    Ok(ConjectureRow {
        alpha,
        nu,
        p: fp.pmf.at(0),
        rde_mean: mean.mean_lower,
        rde_diverged: mean.diverged,
        conjectured_mean: conj,
        abs_diff,
        agrees,
        iterations: fp.iterations,
        residual: fp.residual,
    })
}

/// Runs the fixed point at every grid value and compares with the conjectured
/// closed form. The offspring law must be critical; monotonicity of the
/// arrival family in `alpha` is assumed, not checked.
pub fn conjecture_probe(
    offspring: &OffspringSpec,
    family: ArrivalFamily,
    alpha_grid: &[f64],
    opts: FixedPointOptions,
    tolerance: f64,
) -> Result<ConjectureReport, RdeError> {
    offspring.validate_critical()?;
    let variance = offspring.variance();
    let rows = alpha_grid
        .iter()
        .map(|&a| conjecture_row(offspring, family, a, opts, tolerance))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ConjectureReport {
        offspring_variance: variance,
        family,
        conjectured_alpha_c: conjectured_alpha_c(variance, family),
        tolerance,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_c_for_the_three_reference_cases() {
        let geom = conjectured_alpha_c(2.0, ArrivalFamily::Poisson).unwrap();
        assert!((geom - (2f64.sqrt() - 1.0)).abs() < 1e-12);
        let pois = conjectured_alpha_c(1.0, ArrivalFamily::Poisson).unwrap();
        assert!((pois - 0.5).abs() < 1e-12);
        // alpha = 1 - sqrt(alpha / 2): with u = sqrt(alpha), u^2 + u / sqrt(2) - 1 = 0.
        let u = (-(0.5f64.sqrt()) + (0.5 + 4.0f64).sqrt()) / 2.0;
        let jones = conjectured_alpha_c(0.5, ArrivalFamily::TwoPoint).unwrap();
        assert!((jones - u * u).abs() < 1e-12);
        assert!((jones - 0.5).abs() < 1e-12);
    }

    #[test]
    fn formula_reduces_to_the_geometric_case() {
        let a: f64 = 0.3;
        let closed = (1.0 + a - (1.0 - 2.0 * a - a * a).sqrt()) / 2.0;
        assert!((conjectured_mean(2.0, a, a * a).unwrap() - closed).abs() < 1e-15);
        assert_eq!(conjectured_mean(2.0, 0.5, 0.25), None);
    }

    #[test]
    fn geometric_probe_agrees() {
        let report = conjecture_probe(
            &OffspringSpec::GeometricHalf,
            ArrivalFamily::Poisson,
            &[0.1, 0.3],
            FixedPointOptions::default(),
            1e-4,
        )
        .unwrap();
        assert!(report.rows.iter().all(|r| r.agrees), "{report:?}");
    }

    #[test]
    fn rejects_non_critical_offspring() {
        let off = OffspringSpec::Explicit { mass: vec![0.5, 0.0, 0.5, 0.0] };
        assert!(conjecture_probe(&off, ArrivalFamily::Poisson, &[0.1], FixedPointOptions::default(), 1e-4).is_ok());
        let sub = OffspringSpec::Explicit { mass: vec![0.6, 0.2, 0.2] };
        assert!(conjecture_probe(&sub, ArrivalFamily::Poisson, &[0.1], FixedPointOptions::default(), 1e-4).is_err());
    }
}
