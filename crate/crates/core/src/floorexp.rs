//! Exact evaluation of `⌊b^n · e^{θ₀·β^n}⌋` for `f64` parameters.
//!
//! Every finite `f64` is a dyadic rational, so the exponent `x = θ₀·β^n` is an
//! exact rational `M·2^{-k}`. We compute `C = e^{2^{-k}}` by binary splitting
//! of its Taylor series, raise it to the integer power `M` with truncating
//! arithmetic, and carry a rigorous relative error bound alongside. The floor is
//! accepted only when the lower and upper bounds share it; otherwise the working
//! precision grows and the evaluation is repeated. Since `b^n e^x` is
//! transcendental for `x ≠ 0`, the loop terminates.

use num_bigint::BigUint;
use std::f64::consts::LN_2;

use big::Big;

/// Integer backend for the floor evaluation: GMP when the `gmp` feature is on
/// (its FFT multiplication matters at 10⁵–10⁶ bits), `num-bigint` otherwise.
#[cfg(feature = "gmp")]
mod big {
    use num_bigint::BigUint;
    use rug::integer::Order;
    use rug::ops::Pow;
    use rug::Integer;

    pub type Big = Integer;

    pub fn from_u64(v: u64) -> Big {
        Integer::from(v)
    }

    pub fn pow(base: u64, n: u32) -> Big {
        Integer::from(base).pow(n)
    }

    pub fn bits(v: &Big) -> u64 {
        v.significant_bits() as u64
    }

    pub fn bit(v: &Big, i: u64) -> bool {
        v.get_bit(i as u32)
    }

    pub fn shl(v: &Big, k: u64) -> Big {
        Integer::from(v << k as u32)
    }

    pub fn shr(v: &Big, k: u64) -> Big {
        Integer::from(v >> k as u32)
    }

    pub fn mul(a: &Big, b: &Big) -> Big {
        Integer::from(a * b)
    }

    pub fn add(a: &Big, b: &Big) -> Big {
        Integer::from(a + b)
    }

    pub fn div(a: &Big, b: &Big) -> Big {
        Integer::from(a / b)
    }

    pub fn into_biguint(v: Big) -> BigUint {
        BigUint::from_bytes_le(&v.to_digits::<u8>(Order::Lsf))
    }
}

#[cfg(not(feature = "gmp"))]
mod big {
    use num_bigint::BigUint;

    pub type Big = BigUint;

    pub fn from_u64(v: u64) -> Big {
        BigUint::from(v)
    }

    pub fn pow(base: u64, n: u32) -> Big {
        BigUint::from(base).pow(n)
    }

    pub fn bits(v: &Big) -> u64 {
        v.bits()
    }

    pub fn bit(v: &Big, i: u64) -> bool {
        v.bit(i)
    }

    pub fn shl(v: &Big, k: u64) -> Big {
        v << k
    }

    pub fn shr(v: &Big, k: u64) -> Big {
        v >> k
    }

    pub fn mul(a: &Big, b: &Big) -> Big {
        a * b
    }

    pub fn add(a: &Big, b: &Big) -> Big {
        a + b
    }

    pub fn div(a: &Big, b: &Big) -> Big {
        a / b
    }

    pub fn into_biguint(v: Big) -> BigUint {
        v
    }
}

/// Split a positive finite `f64` into `(mantissa, exponent)` with
/// `x = mantissa · 2^exponent` and an odd mantissa.
pub(crate) fn dyadic(x: f64) -> (u64, i64) {
    assert!(x.is_finite() && x > 0.0, "dyadic() needs a positive finite value");
    let bits = x.to_bits();
    let exp_bits = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (mut m, mut e) = if exp_bits == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), exp_bits - 1075)
    };
    let tz = m.trailing_zeros();
    m >>= tz;
    e += tz as i64;
    (m, e)
}

/// Exact dyadic `x^n` as `(mantissa, exponent)`.
fn dyadic_pow(x: f64, n: u32) -> (Big, i64) {
    let (m, e) = dyadic(x);
    (big::pow(m, n), e * n as i64)
}

/// Truncated binary float: `man · 2^exp` with at most `width` mantissa bits.
#[derive(Clone, Debug)]
struct Trunc {
    man: Big,
    exp: i64,
}

impl Trunc {
    fn normalize(mut self, width: u64) -> Self {
        let len = big::bits(&self.man);
        if len > width {
            let drop = len - width;
            self.man = big::shr(&self.man, drop);
            self.exp += drop as i64;
        }
        self
    }

    fn mul(&self, other: &Trunc, width: u64) -> Trunc {
        Trunc {
            man: big::mul(&self.man, &other.man),
            exp: self.exp + other.exp,
        }
        .normalize(width)
    }
}

/// Sum of `Σ_{j=a+1}^{b} 1/((a+1)…j · 2^{k(j-a)})` as `(T, Q)` with the value
/// `T/Q`.
fn split(a: u64, b: u64, k: u64) -> (Big, Big) {
    if b - a == 1 {
        return (big::from_u64(1), big::shl(&big::from_u64(b), k));
    }
    let mid = (a + b) / 2;
    let (t1, q1) = split(a, mid, k);
    let (t2, q2) = split(mid, b, k);
    (big::add(&big::mul(&t1, &q2), &t2), big::mul(&q1, &q2))
}

/// Lower bound of `e^{2^{-k}}` with `width` fractional bits; the true value
/// lies below `lo + 2·2^{-width}`.
fn exp_pow2_inv(k: u64, width: u64) -> Trunc {
    // Number of terms so that the remainder is below 2^{-(width+2)}.
    let mut terms = 1u64;
    let mut log2_term = 0.0f64; // log2 of 1/(terms! 2^{k terms})
    while log2_term < (width + 4) as f64 {
        terms += 1;
        log2_term += (terms as f64).log2() + k as f64;
    }
    let (t, q) = split(0, terms, k);
    let num = big::div(&big::shl(&big::add(&q, &t), width), &q);
    Trunc {
        man: num,
        exp: -(width as i64),
    }
}

/// `⌊b^n · e^{θ₀ β^n}⌋` exactly. Panics on non-positive parameters.
pub fn floor_b_pow_exp(b: f64, n: u32, theta0: f64, base: f64) -> BigUint {
    assert!(b > 0.0 && theta0 > 0.0 && base > 0.0);
    // x = θ₀ β^n = xm · 2^{xe}
    let (tm, te) = dyadic(theta0);
    let (bm, be) = dyadic_pow(base, n);
    let xm = big::mul(&bm, &big::from_u64(tm));
    let xe = be + te;
    // e^x = C^power with C = e^{2^{-k}}
    let (k, power) = if xe >= 0 {
        (0u64, big::shl(&xm, xe as u64))
    } else {
        ((-xe) as u64, xm)
    };
    let (pm, pe) = dyadic_pow(b, n);

    let x_approx = theta0 * base.powi(n as i32);
    let log2_value = (n as f64 * b.ln() + x_approx) / LN_2;
    let power_bits = big::bits(&power);
    let mut width = log2_value.max(0.0) as u64 + power_bits + 96;

    loop {
        let c = exp_pow2_inv(k, width);
        // left-to-right exponentiation, truncating to `width` bits
        let mut acc = c.clone();
        let mut ops = 0u64;
        for i in (0..power_bits - 1).rev() {
            acc = acc.mul(&acc, width);
            ops += 1;
            if big::bit(&power, i) {
                acc = acc.mul(&c, width);
                ops += 1;
            }
        }
        // Each truncation loses < 2^{1-width} relative; C carries < 2^{2-width}
        // and its error is amplified by `power`. The bound below dominates both
        // with room to spare.
        let slack_bits = power_bits + 64 - (ops + 1).leading_zeros() as u64 + 8;
        let lo_man = big::mul(&acc.man, &pm);
        let lo_exp = acc.exp + pe;
        let hi_man = big::add(
            &big::add(&lo_man, &big::shr(&lo_man, width.saturating_sub(slack_bits))),
            &big::from_u64(1),
        );
        let (lo_floor, hi_floor) = if lo_exp >= 0 {
            (big::shl(&lo_man, lo_exp as u64), big::shl(&hi_man, lo_exp as u64))
        } else {
            let s = (-lo_exp) as u64;
            (big::shr(&lo_man, s), big::shr(&hi_man, s))
        };
        if lo_floor == hi_floor {
            return big::into_biguint(lo_floor);
        }
        width += width / 2 + 64;
    }
}

/// `log2` estimate of `b^n e^{θ₀β^n}`, used to decide whether exact evaluation
/// fits the bit budget.
pub fn log2_estimate(b: f64, n: u32, theta0: f64, base: f64) -> f64 {
    (n as f64 * b.ln() + theta0 * base.powi(n as i32)) / LN_2
}
