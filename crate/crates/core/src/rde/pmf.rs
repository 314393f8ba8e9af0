use serde::{Deserialize, Serialize};

use super::RdeError;

/// Slack allowed on `sum(mass) <= 1` and `tail >= 0`.
pub const MASS_SLACK: f64 = 1e-12;

/// Default threshold for the divergence heuristic of [`Pmf::mean`].
pub const DEFAULT_DIVERGENCE_THRESHOLD: f64 = 1e-6;

/// Probability mass function on `{0, ..., K}` with the unrepresented mass
/// reported separately as `tail`.
///
/// The tail is never folded back into the represented values. Operations that
/// cannot place mass inside the window (for example a shift that would need
/// the unknown value at `K + 1`) leave it in the tail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PmfRepr", into = "PmfRepr")]
pub struct Pmf {
    mass: Vec<f64>,
    tail: f64,
}

#[derive(Serialize, Deserialize)]
struct PmfRepr {
    #[serde(rename = "K")]
    k: usize,
    mass: Vec<f64>,
    tail: f64,
}

impl TryFrom<PmfRepr> for Pmf {
    type Error = RdeError;

    fn try_from(r: PmfRepr) -> Result<Self, RdeError> {
        if r.mass.len() != r.k + 1 {
            return Err(RdeError::InvalidPmf(format!("K = {} but {} mass values", r.k, r.mass.len())));
        }
        let pmf = Pmf::from_mass(r.mass)?;
        if (pmf.tail - r.tail).abs() > 1e-9 {
            return Err(RdeError::InvalidPmf(format!("tail {} inconsistent with mass (expected {})", r.tail, pmf.tail)));
        }
        Ok(pmf)
    }
}

impl From<Pmf> for PmfRepr {
    fn from(p: Pmf) -> Self {
        PmfRepr { k: p.truncation(), tail: p.tail, mass: p.mass }
    }
}

/// Value of a truncated generating function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PgfValue {
    /// `sum_{k <= K} mass(k) s^k`
    pub value: f64,
    /// `tail * s^K`, an upper bound on the omitted terms.
    pub tail_bound: f64,
}

/// Truncated mean with the divergence heuristic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanEstimate {
    /// `sum_{k <= K} k mass(k)`, a lower bound for the true mean.
    pub mean_lower: f64,
    /// Set when the part of the sum above `K / 2` exceeds the threshold.
    pub diverged: bool,
}

impl Pmf {
    /// Wraps raw masses, computing `tail = 1 - sum(mass)`.
    pub fn from_mass(mass: Vec<f64>) -> Result<Self, RdeError> {
        if mass.len() < 2 {
            return Err(RdeError::InvalidPmf("truncation K must be at least 1".into()));
        }
        if let Some(bad) = mass.iter().find(|m| !(m.is_finite() && **m >= 0.0)) {
            return Err(RdeError::InvalidPmf(format!("mass value {bad} is not a probability")));
        }
        let total: f64 = mass.iter().sum();
        if total > 1.0 + MASS_SLACK {
            return Err(RdeError::InvalidPmf(format!("total mass {total} exceeds 1")));
        }
        Ok(Self { mass, tail: 1.0 - total })
    }

    /// Unit mass at 0.
    pub fn delta_zero(k: usize) -> Self {
        let mut mass = vec![0.0; k.max(1) + 1];
        mass[0] = 1.0;
        Self { mass, tail: 0.0 }
    }

    /// Po(alpha) truncated at `k`, by the upward recursion from `e^{-alpha}`.
    pub fn poisson(alpha: f64, k: usize) -> Result<Self, RdeError> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(RdeError::InvalidParameter(format!("Poisson mean {alpha}")));
        }
        let mut mass = Vec::with_capacity(k.max(1) + 1);
        let mut term = (-alpha).exp();
        mass.push(term);
        for j in 1..=k.max(1) {
            term *= alpha / j as f64;
            mass.push(term);
        }
        Self::from_mass(mass)
    }

    pub fn truncation(&self) -> usize {
        self.mass.len() - 1
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// Mass at `k`, zero outside the window.
    pub fn at(&self, k: usize) -> f64 {
        self.mass.get(k).copied().unwrap_or(0.0)
    }

    pub fn tail(&self) -> f64 {
        self.tail
    }

    /// `sum_{j <= k} mass(j)` for every `k` in the window.
    pub fn cdf(&self) -> Vec<f64> {
        self.mass
            .iter()
            .scan(0.0, |acc, m| {
                *acc += m;
                Some(*acc)
            })
            .collect()
    }

    /// Whether `self` is stochastically no larger than `other` on the common
    /// window: `cdf_self(k) >= cdf_other(k) - slack` for every `k`.
    pub fn stochastically_below(&self, other: &Pmf, slack: f64) -> bool {
        self.cdf().iter().zip(other.cdf()).all(|(a, b)| *a >= b - slack)
    }

    /// Largest absolute difference of masses, padding the shorter window
    /// with zeros.
    pub fn sup_distance(&self, other: &Pmf) -> f64 {
        let n = self.mass.len().max(other.mass.len());
        (0..n).map(|k| (self.at(k) - other.at(k)).abs()).fold(0.0, f64::max)
    }

    pub fn pgf(&self, s: f64) -> PgfValue {
        // Horner from the top.
        let value = self.mass.iter().rev().fold(0.0, |acc, m| acc * s + m);
        PgfValue { value, tail_bound: self.tail.max(0.0) * s.powi(self.truncation() as i32) }
    }

    pub fn mean(&self) -> MeanEstimate {
        self.mean_with_threshold(DEFAULT_DIVERGENCE_THRESHOLD)
    }

    /// Compares the truncated mean over the full window with the truncated
    /// mean over the lower half: the upper half's contribution is what
    /// doubling the truncation from `K / 2` to `K` added.
    pub fn mean_with_threshold(&self, threshold: f64) -> MeanEstimate {
        let half = self.truncation() / 2;
        let term = |(k, m): (usize, &f64)| k as f64 * m;
        let lower: f64 = self.mass[..=half].iter().enumerate().map(term).sum();
        let upper: f64 = self.mass.iter().enumerate().skip(half + 1).map(term).sum();
        MeanEstimate { mean_lower: lower + upper, diverged: upper > threshold }
    }

    /// `sum k mass(k)`, no heuristics.
    pub fn truncated_mean(&self) -> f64 {
        self.mass.iter().enumerate().map(|(k, m)| k as f64 * m).sum()
    }

    /// Same masses with the window cut or zero-padded to `k`; cut mass moves
    /// to the tail.
    pub fn resized(&self, k: usize) -> Pmf {
        let mut mass = self.mass.clone();
        mass.resize(k.max(1) + 1, 0.0);
        let total: f64 = mass.iter().sum();
        Pmf { mass, tail: 1.0 - total }
    }

    pub(crate) fn from_raw(mass: Vec<f64>) -> Self {
        let total: f64 = mass.iter().sum();
        debug_assert!(mass.iter().all(|m| *m >= 0.0));
        Pmf { mass, tail: 1.0 - total }
    }
}

/// `pmf_pgf_eval`: truncated generating function at `s` in `[0, 1]`.
pub fn pmf_pgf_eval(mu: &Pmf, s: f64) -> Result<PgfValue, RdeError> {
    if !(0.0..=1.0).contains(&s) {
        return Err(RdeError::InvalidParameter(format!("pgf argument {s} outside [0, 1]")));
    }
    Ok(mu.pgf(s))
}

/// `pmf_mean`: truncated mean with the default divergence threshold.
pub fn pmf_mean(mu: &Pmf) -> MeanEstimate {
    mu.mean()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(Pmf::from_mass(vec![0.5]).is_err());
        assert!(Pmf::from_mass(vec![0.5, -0.1]).is_err());
        assert!(Pmf::from_mass(vec![0.7, 0.7]).is_err());
        assert!(Pmf::from_mass(vec![f64::NAN, 0.0]).is_err());
        let p = Pmf::from_mass(vec![0.5, 0.3]).unwrap();
        assert!((p.tail() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn json_shape() {
        let p = Pmf::from_mass(vec![0.5, 0.25, 0.25]).unwrap();
        let js = serde_json::to_string(&p).unwrap();
        assert_eq!(js, r#"{"K":2,"mass":[0.5,0.25,0.25],"tail":0.0}"#);
        let back: Pmf = serde_json::from_str(&js).unwrap();
        assert_eq!(back, p);
        assert!(serde_json::from_str::<Pmf>(r#"{"K":3,"mass":[1.0,0.0],"tail":0.0}"#).is_err());
        assert!(serde_json::from_str::<Pmf>(r#"{"K":1,"mass":[0.5,0.0],"tail":0.0}"#).is_err());
    }

    #[test]
    fn pgf_endpoints() {
        let p = Pmf::from_mass(vec![0.2, 0.3, 0.4]).unwrap();
        let one = pmf_pgf_eval(&p, 1.0).unwrap();
        assert!((one.value - (1.0 - p.tail())).abs() < 1e-15);
        assert!((one.tail_bound - 0.1).abs() < 1e-15);
        assert_eq!(pmf_pgf_eval(&p, 0.0).unwrap().value, 0.2);
        assert!(pmf_pgf_eval(&p, 1.5).is_err());
        let vals: Vec<f64> = (0..=10).map(|i| p.pgf(i as f64 / 10.0).value).collect();
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn mean_of_delta_is_zero() {
        let m = pmf_mean(&Pmf::delta_zero(10));
        assert_eq!(m, MeanEstimate { mean_lower: 0.0, diverged: false });
    }

    #[test]
    fn poisson_pmf() {
        let p = Pmf::poisson(0.3, 50).unwrap();
        assert!((p.at(0) - (-0.3f64).exp()).abs() < 1e-16);
        assert!((p.at(2) - 0.045 * (-0.3f64).exp()).abs() < 1e-16);
        assert!(p.tail().abs() < 1e-15);
        assert!((p.truncated_mean() - 0.3).abs() < 1e-14);
        assert!(Pmf::poisson(-1.0, 5).is_err());
        assert_eq!(Pmf::poisson(0.0, 5).unwrap(), Pmf::delta_zero(5));
    }

    #[test]
    fn resizing_moves_mass_to_tail() {
        let p = Pmf::from_mass(vec![0.5, 0.25, 0.25]).unwrap();
        let q = p.resized(1);
        assert_eq!(q.mass(), &[0.5, 0.25]);
        assert!((q.tail() - 0.25).abs() < 1e-15);
        assert_eq!(p.resized(4).at(4), 0.0);
    }

    #[test]
    fn dominance() {
        let low = Pmf::from_mass(vec![0.8, 0.2, 0.0]).unwrap();
        let high = Pmf::from_mass(vec![0.5, 0.3, 0.2]).unwrap();
        assert!(low.stochastically_below(&high, 0.0));
        assert!(!high.stochastically_below(&low, 0.0));
        assert!((low.sup_distance(&high) - 0.3).abs() < 1e-15);
    }
}
