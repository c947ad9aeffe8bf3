//! Ball counts that are exact while they fit the bit budget and degrade to a
//! natural logarithm beyond it.

use crate::logspace::{ln_1m_exp, ln_big, log_add_exp};
use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use serde::ser::{SerializeMap, Serializer};
use serde::Serialize;
use std::cmp::Ordering;
use std::fmt;

#[derive(Clone, Debug, PartialEq)]
pub enum Count {
    Exact(BigUint),
    /// Natural log of a count too large to keep exactly.
    Approx(f64),
}

impl Count {
    pub fn zero() -> Self {
        Count::Exact(BigUint::zero())
    }

    pub fn from_u64(v: u64) -> Self {
        Count::Exact(BigUint::from(v))
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Count::Exact(_))
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Count::Exact(v) => v.is_zero(),
            Count::Approx(_) => false,
        }
    }

    pub fn exact(&self) -> Option<&BigUint> {
        match self {
            Count::Exact(v) => Some(v),
            Count::Approx(_) => None,
        }
    }

    pub fn to_u64(&self) -> Option<u64> {
        self.exact().and_then(|v| v.to_u64())
    }

    pub fn ln(&self) -> f64 {
        match self {
            Count::Exact(v) if v.is_zero() => f64::NEG_INFINITY,
            Count::Exact(v) => ln_big(v),
            Count::Approx(l) => *l,
        }
    }

    /// Value as `f64`; saturates to infinity.
    pub fn to_f64(&self) -> f64 {
        match self {
            Count::Exact(v) => v.to_f64().unwrap_or(f64::INFINITY),
            Count::Approx(l) => l.exp(),
        }
    }

    pub fn bits(&self) -> f64 {
        match self {
            Count::Exact(v) => v.bits() as f64,
            Count::Approx(l) => l / std::f64::consts::LN_2,
        }
    }

    pub fn add(&self, other: &Count) -> Count {
        match (self, other) {
            (Count::Exact(a), Count::Exact(b)) => Count::Exact(a + b),
            _ if other.is_zero() => self.clone(),
            _ if self.is_zero() => other.clone(),
            _ => Count::Approx(log_add_exp(self.ln(), other.ln())),
        }
    }

    pub fn add_assign(&mut self, other: &Count) {
        match (&mut *self, other) {
            (Count::Exact(a), Count::Exact(b)) => *a += b,
            _ => *self = self.add(other),
        }
    }

    /// `self - other`, assuming `other <= self`.
    pub fn saturating_sub(&self, other: &Count) -> Count {
        match (self, other) {
            (Count::Exact(a), Count::Exact(b)) => {
                if b >= a {
                    Count::zero()
                } else {
                    Count::Exact(a - b)
                }
            }
            _ if other.is_zero() => self.clone(),
            _ => {
                let d = other.ln() - self.ln();
                if d >= 0.0 {
                    Count::zero()
                } else {
                    Count::Approx(self.ln() + ln_1m_exp(d))
                }
            }
        }
    }

    pub fn cmp_value(&self, other: &Count) -> Ordering {
        match (self, other) {
            (Count::Exact(a), Count::Exact(b)) => a.cmp(b),
            _ => self.ln().total_cmp(&other.ln()),
        }
    }

    /// Decimal text for exact counts up to `max_bits`, otherwise `None`.
    pub fn decimal(&self, max_bits: u64) -> Option<String> {
        match self {
            Count::Exact(v) if v.bits() <= max_bits => Some(v.to_string()),
            _ => None,
        }
    }
}

impl From<BigUint> for Count {
    fn from(v: BigUint) -> Self {
        Count::Exact(v)
    }
}

impl fmt::Display for Count {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Count::Exact(v) => write!(f, "{v}"),
            Count::Approx(l) => write!(f, "exp({l:.17e})"),
        }
    }
}

impl Serialize for Count {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Count::Exact(v) => s.serialize_str(&v.to_string()),
            Count::Approx(l) => {
                let mut m = s.serialize_map(Some(1))?;
                m.serialize_entry("ln", l)?;
                m.end()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixed_arithmetic_stays_consistent() {
        let big = Count::Approx(5000.0);
        let small = Count::from_u64(3);
        let sum = big.add(&small);
        assert!(!sum.is_exact());
        assert!((sum.ln() - 5000.0).abs() < 1e-12);
        assert_eq!(sum.saturating_sub(&sum), Count::zero());
        let diff = Count::from_u64(10).saturating_sub(&Count::from_u64(4));
        assert_eq!(diff, Count::from_u64(6));
        let half = Count::Approx(1000.0).saturating_sub(&Count::Approx(1000.0 - 2f64.ln()));
        assert!((half.ln() - (1000.0 - 2f64.ln())).abs() < 1e-9);
    }

    #[test]
    fn serializes_exact_as_string() {
        let js = serde_json::to_string(&Count::from_u64(42)).unwrap();
        assert_eq!(js, "\"42\"");
        let js = serde_json::to_string(&Count::Approx(1.5)).unwrap();
        assert_eq!(js, "{\"ln\":1.5}");
    }
}
