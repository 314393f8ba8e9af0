//! Arrival intensities given as exact decimal strings.
//!
//! The number of cars in the finite experiment is `floor(alpha * n)`. Doing
//! that in binary floating point misfires at values such as `alpha = 0.29,
//! n = 100`, so intensities are kept as `mantissa / 10^scale` and the floor is
//! taken in integer arithmetic.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const MAX_SCALE: u32 = 18;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AlphaParseError {
    #[error("not a plain non-negative decimal: {0:?}")]
    Syntax(String),
    #[error("too many fractional digits in {0:?} (at most {MAX_SCALE})")]
    TooPrecise(String),
    #[error("value out of range: {0:?}")]
    Overflow(String),
    #[error("invalid range {0:?}: expected start:end:step with step > 0")]
    Range(String),
}

/// A non-negative decimal number remembered exactly as it was written.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct DecimalAlpha {
    text: String,
    mantissa: u64,
    scale: u32,
}

impl DecimalAlpha {
    fn from_parts(mantissa: u64, scale: u32) -> Self {
        let text = if scale == 0 {
            mantissa.to_string()
        } else {
            let digits = format!("{:0width$}", mantissa, width = scale as usize + 1);
            let (int, frac) = digits.split_at(digits.len() - scale as usize);
            format!("{int}.{frac}")
        };
        Self { text, mantissa, scale }
    }

    /// The input text, unchanged.
    pub fn as_str(&self) -> &str {
        &self.text
    }

    /// Nearest double to the decimal value.
    pub fn value(&self) -> f64 {
        // Rust's float parser is correctly rounded.
        self.text.parse().expect("validated decimal")
    }

    /// `floor(self * n)` computed exactly.
    pub fn floor_times(&self, n: u64) -> u64 {
        let prod = u128::from(self.mantissa) * u128::from(n);
        let q = prod / 10u128.pow(self.scale);
        u64::try_from(q).expect("floor(alpha * n) fits in u64")
    }

    /// Inclusive arithmetic progression `start, start + step, ..., <= end`
    /// parsed from `start:end:step`.
    pub fn parse_range(spec: &str) -> Result<Vec<Self>, AlphaParseError> {
        let parts: Vec<&str> = spec.split(':').collect();
        let [start, end, step] = parts.as_slice() else {
            return Err(AlphaParseError::Range(spec.to_owned()));
        };
        let (start, end, step): (Self, Self, Self) = (start.parse()?, end.parse()?, step.parse()?);
        if step.mantissa == 0 {
            return Err(AlphaParseError::Range(spec.to_owned()));
        }
        let scale = start.scale.max(end.scale).max(step.scale);
        let widen = |a: &Self| -> Result<u64, AlphaParseError> {
            a.mantissa
                .checked_mul(10u64.pow(scale - a.scale))
                .ok_or_else(|| AlphaParseError::Overflow(spec.to_owned()))
        };
        let (mut cur, end, step) = (widen(&start)?, widen(&end)?, widen(&step)?);
        let mut out = Vec::new();
        while cur <= end {
            out.push(Self::from_parts(cur, scale));
            cur = match cur.checked_add(step) {
                Some(v) => v,
                None => break,
            };
        }
        Ok(out)
    }

    /// Comma-separated list of decimals.
    pub fn parse_list(spec: &str) -> Result<Vec<Self>, AlphaParseError> {
        spec.split(',').map(|s| s.trim().parse()).collect()
    }
}

impl FromStr for DecimalAlpha {
    type Err = AlphaParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let syntax = || AlphaParseError::Syntax(s.to_owned());
        let (int, frac) = match s.split_once('.') {
            Some((i, f)) => (i, f),
            None => (s, ""),
        };
        if int.is_empty() && frac.is_empty() {
            return Err(syntax());
        }
        if !int.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit()) {
            return Err(syntax());
        }
        if s.ends_with('.') {
            return Err(syntax());
        }
        let scale = frac.len() as u32;
        if scale > MAX_SCALE {
            return Err(AlphaParseError::TooPrecise(s.to_owned()));
        }
        let digits = format!("{int}{frac}");
        let mantissa = if digits.is_empty() {
            0
        } else {
            digits.parse::<u64>().map_err(|_| AlphaParseError::Overflow(s.to_owned()))?
        };
        Ok(Self { text: s.to_owned(), mantissa, scale })
    }
}

impl TryFrom<String> for DecimalAlpha {
    type Error = AlphaParseError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<DecimalAlpha> for String {
    fn from(a: DecimalAlpha) -> String {
        a.text
    }
}

impl fmt::Display for DecimalAlpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a(s: &str) -> DecimalAlpha {
        s.parse().unwrap()
    }

    #[test]
    fn floor_is_exact_at_binary_boundaries() {
        assert_eq!(a("0.25").floor_times(4), 1);
        assert_eq!(a("0.29").floor_times(100), 29);
        assert_eq!(a("0.3").floor_times(10), 3);
        assert_eq!(a("0.7").floor_times(10), 7);
        assert_eq!(a("1").floor_times(2), 2);
        assert_eq!(a("0.2").floor_times(1000), 200);
        assert_eq!(a("0").floor_times(1000), 0);
    }

    #[test]
    fn text_is_echoed() {
        assert_eq!(a("0.30").to_string(), "0.30");
        assert_eq!(a(".5").value(), 0.5);
        assert_eq!(a("0.30").value(), 0.3);
    }

    #[test]
    fn rejects_garbage() {
        for bad in ["", ".", "1.", "-0.1", "1e-3", "0.1.2", "abc", " 0.1"] {
            assert!(bad.parse::<DecimalAlpha>().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn ranges_are_exact() {
        let r = DecimalAlpha::parse_range("0:0.6:0.05").unwrap();
        assert_eq!(r.len(), 13);
        assert_eq!(r[0].as_str(), "0.00");
        assert_eq!(r[3].as_str(), "0.15");
        assert_eq!(r[12].as_str(), "0.60");
        assert!(DecimalAlpha::parse_range("0:1:0").is_err());
        assert!(DecimalAlpha::parse_range("0:1").is_err());
    }

    #[test]
    fn serde_uses_the_string() {
        let x = a("0.380");
        let js = serde_json::to_string(&x).unwrap();
        assert_eq!(js, "\"0.380\"");
        let back: DecimalAlpha = serde_json::from_str(&js).unwrap();
        assert_eq!(back, x);
    }
}
