//! Exact reference computations used by `selftest` and the acceptance suite.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use pulsepair_core::quantfilter::{quant_accept, QuantSpec};

/// A probability held as an exact fraction `a / d`.
#[derive(Debug, Clone)]
pub struct Ratio {
    a: BigUint,
    d: BigUint,
}

impl Ratio {
    pub fn new(a: u64, d: u64) -> Self {
        assert!(a <= d && d > 0);
        Ratio { a: a.into(), d: d.into() }
    }

    /// The exact binary value of a normal f64 in (0, 1).
    pub fn from_f64(p: f64) -> Self {
        assert!(p > 0.0 && p < 1.0 && p.is_normal());
        let bits = p.to_bits();
        let exp = ((bits >> 52) & 0x7ff) as i64;
        let mantissa = (bits & ((1u64 << 52) - 1)) | (1u64 << 52);
        Ratio {
            a: mantissa.into(),
            d: BigUint::one() << (1075 - exp) as usize,
        }
    }
}

fn choose(n: u64, k: u64) -> BigUint {
    let mut c = BigUint::one();
    for i in 0..k {
        c = c * (n - i) / (i + 1);
    }
    c
}

fn exact_sum(n: u64, ks: impl Iterator<Item = u64>, p: &Ratio) -> BigUint {
    let q = &p.d - &p.a;
    let mut s = BigUint::zero();
    for j in ks {
        s += choose(n, j) * p.a.pow(j as u32) * q.pow((n - j) as u32);
    }
    s
}

fn log10_ratio(num: &BigUint, den: &BigUint) -> f64 {
    if num.is_zero() {
        return f64::NEG_INFINITY;
    }
    let shift = 160 + den.bits() as i64 - num.bits() as i64;
    let q = if shift >= 0 {
        (num << shift as usize) / den
    } else {
        num / (den << (-shift) as usize)
    };
    q.to_f64().expect("finite quotient").log10() - shift as f64 * 2f64.log10()
}

/// log10 P[X = k] for X ~ Binomial(n, p), summed exactly.
pub fn exact_log10_pmf(n: u64, k: u64, p: &Ratio) -> f64 {
    log10_ratio(&exact_sum(n, k..=k, p), &p.d.pow(n as u32))
}

/// log10 P[X >= k], summed exactly.
pub fn exact_log10_tail(n: u64, k: u64, p: &Ratio) -> f64 {
    log10_ratio(&exact_sum(n, k..=n, p), &p.d.pow(n as u32))
}

/// Relative error between two probabilities given as log10 values.
pub fn rel_err(log_a: f64, log_b: f64) -> f64 {
    if log_a == log_b {
        return 0.0;
    }
    (10f64.powf(log_a - log_b) - 1.0).abs()
}

pub fn one_sig_fig(x: f64) -> f64 {
    let e = x.log10().floor();
    (x / 10f64.powf(e)).round() * 10f64.powf(e)
}

/// Accepted share of |Δf| in `[lo, hi]`, scanned at `step_hz` midpoints.
pub fn grid_scan_fraction(q: &QuantSpec, step_hz: f64) -> f64 {
    let n = ((q.hi_hz - q.lo_hz) / step_hz).round() as u64;
    let hits = (0..n)
        .filter(|&i| quant_accept(q.lo_hz + (i as f64 + 0.5) * step_hz, q))
        .count();
    hits as f64 / n as f64
}
