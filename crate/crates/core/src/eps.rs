//! Exact rational accuracy parameter.
//!
//! Threshold recurrences take ceilings of `σ·(1+ε)`; doing that in floating
//! point turns `10·1.1` into `11.000000000000002` and the ceiling into 12, so
//! every ε in this crate is an exact fraction.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EpsError {
    #[error("epsilon must be strictly positive, got {0}")]
    NotPositive(String),
    #[error("cannot parse epsilon from {0:?}")]
    Parse(String),
}

/// A strictly positive rational number, usually the accuracy parameter ε.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Eps(Ratio<u64>);

impl Eps {
    pub fn new(numer: u64, denom: u64) -> Result<Self, EpsError> {
        if numer == 0 || denom == 0 {
            return Err(EpsError::NotPositive(format!("{numer}/{denom}")));
        }
        Ok(Eps(Ratio::new(numer, denom)))
    }

    /// `1/k`.
    pub fn reciprocal_of(k: u64) -> Self {
        Eps(Ratio::new(1, k.max(1)))
    }

    pub fn numer(&self) -> u64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> u64 {
        *self.0.denom()
    }

    pub fn as_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// `⌈1/ε⌉`.
    pub fn ceil_recip(&self) -> u64 {
        self.denom().div_ceil(self.numer())
    }

    /// `⌈x·(1+ε)⌉` for a non-negative integer `x`.
    pub fn ceil_grow(&self, x: u64) -> u64 {
        let (p, q) = (self.numer() as u128, self.denom() as u128);
        let v = (x as u128 * (p + q)).div_ceil(q);
        v.min(u64::MAX as u128) as u64
    }

    /// Is `lhs ≤ (1 + factor·ε)·rhs`? Evaluated exactly.
    pub fn within_factor(&self, factor: u64, lhs: u64, rhs: u64) -> bool {
        let (p, q) = (self.numer() as u128, self.denom() as u128);
        (lhs as u128) * q <= (rhs as u128) * (q + factor as u128 * p)
    }

    pub fn ratio(&self) -> Ratio<u64> {
        self.0
    }
}

impl fmt::Display for Eps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.denom() == 1 {
            write!(f, "{}", self.numer())
        } else {
            write!(f, "{}/{}", self.numer(), self.denom())
        }
    }
}

impl FromStr for Eps {
    type Err = EpsError;

    /// Accepts `0.5`, `1/3`, and plain integers.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || EpsError::Parse(s.to_string());
        let ratio = if let Some((n, d)) = s.split_once('/') {
            let n: u64 = n.trim().parse().map_err(|_| bad())?;
            let d: u64 = d.trim().parse().map_err(|_| bad())?;
            if d == 0 {
                return Err(bad());
            }
            Ratio::new(n, d)
        } else if let Some((int, frac)) = s.split_once('.') {
            if frac.is_empty() || frac.len() > 18 || !frac.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
            let int: u64 = if int.is_empty() {
                0
            } else {
                int.parse().map_err(|_| bad())?
            };
            let denom = 10u64.pow(frac.len() as u32);
            let frac: u64 = frac.parse().map_err(|_| bad())?;
            let numer = int
                .checked_mul(denom)
                .and_then(|x| x.checked_add(frac))
                .ok_or_else(bad)?;
            Ratio::new(numer, denom)
        } else {
            Ratio::from_integer(s.parse().map_err(|_| bad())?)
        };
        if ratio.is_zero() {
            return Err(EpsError::NotPositive(s.to_string()));
        }
        Ok(Eps(ratio))
    }
}

impl Serialize for Eps {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Eps {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Text(String),
            Number(f64),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Repr::Number(x) => format!("{x}").parse().map_err(serde::de::Error::custom),
        }
    }
}
