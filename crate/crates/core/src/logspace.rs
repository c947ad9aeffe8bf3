//! Log-space helpers shared by the sequence tables, the kernel and the
//! estimators.
//!
//! Arbitrary-precision integers are reduced to their natural logarithm through
//! the leading 64 bits and the bit length, so values far beyond `f64::MAX` still
//! get a logarithm accurate to a few ulps.

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use std::f64::consts::LN_2;

/// Natural log of a big integer. Returns `-inf` for zero.
pub fn ln_big(x: &BigUint) -> f64 {
    if let Some(small) = x.to_u64() {
        return (small as f64).ln();
    }
    let split = LnSplit::of(x);
    split.bits as f64 * LN_2 + split.frac
}

/// `ln x = bits * ln 2 + frac` with `frac` in `[0, ln 2)`.
///
/// Keeping the integer part separate lets long sums of logarithms accumulate
/// the dominant binary exponent without rounding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LnSplit {
    pub bits: i64,
    pub frac: f64,
}

impl LnSplit {
    pub fn of(x: &BigUint) -> Self {
        assert!(!x.is_zero(), "logarithm of zero");
        let len = x.bits();
        // top 64 bits as a mantissa in [1, 2)
        let (top, shift) = if len > 64 {
            ((x >> (len - 64)).to_u64().unwrap(), len - 64)
        } else {
            (x.to_u64().unwrap(), 0)
        };
        let top_len = 64 - top.leading_zeros() as u64;
        let mantissa = top as f64 / 2f64.powi(top_len as i32 - 1);
        LnSplit {
            bits: (shift + top_len - 1) as i64,
            frac: mantissa.ln(),
        }
    }

    pub fn value(self) -> f64 {
        self.bits as f64 * LN_2 + self.frac
    }

    /// `ln(self / other)`.
    pub fn ratio(self, other: LnSplit) -> f64 {
        (self.bits - other.bits) as f64 * LN_2 + (self.frac - other.frac)
    }
}

/// `ln(e^a + e^b)`.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln Σ e^{x_i}`, stable for arbitrary magnitudes.
pub fn log_sum_exp<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let xs: Vec<f64> = xs.into_iter().collect();
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max.is_infinite() {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `ln(1 - e^x)` for `x <= 0`.
pub fn ln_1m_exp(x: f64) -> f64 {
    if x > -LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// `ln(1 + e^t)`.
pub fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// `floor(x * e^{ln_factor})` for `ln_factor <= 0`, done in integer arithmetic
/// with a 64-bit mantissa for the factor.
pub fn mul_exp_floor(x: &BigUint, ln_factor: f64) -> BigUint {
    debug_assert!(ln_factor <= 1e-12);
    if ln_factor == f64::NEG_INFINITY || x.is_zero() {
        return BigUint::zero();
    }
    // e^{ln_factor} = 2^{-k} * m / 2^63 with m in [2^63, 2^64)
    let log2 = ln_factor.min(0.0) / LN_2;
    let k = (-log2).ceil();
    let frac = log2 + k; // in [0, 1)
    let m = (2f64.powf(frac) * 2f64.powi(63)) as u64;
    let shift = k as u64 + 63;
    (x * BigUint::from(m)) >> shift
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;

    #[test]
    fn ln_big_matches_f64_in_range() {
        for v in [1u64, 2, 3, 1000, 123_456_789, u64::MAX] {
            let got = ln_big(&BigUint::from(v));
            assert!((got - (v as f64).ln()).abs() <= 1e-15 * (v as f64).ln().max(1.0));
        }
        let big = BigUint::one() << 5000u32;
        assert!((ln_big(&big) - 5000.0 * LN_2).abs() < 1e-10);
    }

    #[test]
    fn split_ratio_is_exact_for_powers_of_two() {
        let a = LnSplit::of(&(BigUint::one() << 100_000u32));
        let b = LnSplit::of(&(BigUint::from(3u32) << 99_998u32));
        assert!((a.ratio(b) - (4.0f64 / 3.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn log_helpers() {
        assert!((log_add_exp(0.0, 0.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(log_add_exp(f64::NEG_INFINITY, 3.0), 3.0);
        assert!((log_sum_exp([1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert!((ln_1m_exp(-1e-20) - (1e-20f64).ln()).abs() < 1e-12);
        assert!((softplus(800.0) - 800.0).abs() < 1e-12);
        assert!((softplus(-800.0)).abs() < 1e-300);
    }

    #[test]
    fn mul_exp_floor_halves() {
        let x = BigUint::from(1_000_000u32);
        assert_eq!(mul_exp_floor(&x, 0.5f64.ln()), BigUint::from(500_000u32));
        assert_eq!(mul_exp_floor(&x, 0.0), x);
    }
}
