//! The block operator `A_q`: eigenvalue `lambda_n = (n_{k+1} - n_k) / (2^{n_{k+1}} - 2^{n_k})`
//! for `2^{n_k} < n <= 2^{n_{k+1}}`, `n_k = 2^{kq}`, and the Cesàro means of
//! `sigma_{2^m} / ln 2^m` whose limit points are its Dixmier traces.
//!
//! Only block exponents are ever materialized; every dyadic ratio is formed
//! with non-positive powers of two.

use std::time::Instant;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::sum::NeumaierSum;

/// Largest `p` accepted by the term-by-term Cesàro path.
pub const DIRECT_GUARD: u64 = 1 << 26;
/// Below this argument harmonic numbers are summed, above it expanded.
const HARMONIC_DIRECT: u64 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AqParams {
    pub q: u32,
}

impl AqParams {
    pub fn new(q: u32) -> Result<Self> {
        if !(1..=30).contains(&q) {
            return Err(Error::Domain(format!("q must lie in 1..=30, got {q}")));
        }
        Ok(Self { q })
    }

    /// `n_k = 2^{kq}`, or `None` once it leaves `u64`.
    pub fn n(&self, k: u32) -> Option<u64> {
        let e = k.checked_mul(self.q)?;
        (e < 64).then(|| 1u64 << e)
    }

    /// The `k` with `n_k < m <= n_{k+1}` (`m >= 2`).
    pub fn block_of(&self, m: u64) -> u32 {
        block_of(self.q, m)
    }
}

pub(crate) fn block_edge(q: u32, k: u32) -> u64 {
    1u64 << (k * q)
}

pub(crate) fn block_of(q: u32, m: u64) -> u32 {
    debug_assert!(m >= 2);
    // ceil(log2(m)) / q rounded up, minus one
    let c = 64 - (m - 1).leading_zeros();
    c.div_ceil(q).saturating_sub(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Direct,
    Block,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Method::Direct),
            "block" => Ok(Method::Block),
            other => Err(Error::Domain(format!("unknown method `{other}` (direct|block)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Example4Report {
    pub q: u32,
    pub s: u32,
    /// `Some(r)` when `p = 2^{sq + r}`.
    pub r: Option<u32>,
    pub p: u64,
    pub method: Method,
    pub estimate: f64,
    pub t: f64,
    pub reference: f64,
    pub error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_ms: Option<f64>,
}

/// `sigma_{2^m} = sum_{3 <= j <= 2^m} lambda_j`, with `sigma_2 = 0`.
pub fn aq_sigma_pow2(q: u32, m: u64) -> f64 {
    if m <= 1 {
        return 0.0;
    }
    let k = block_of(q, m);
    let lo = block_edge(q, k);
    let hi = lo << q;
    // (2^m - 2^lo) / (2^hi - 2^lo) with every exponent <= 0
    let frac = (-((hi - m) as f64)).exp2() * one_minus_pow2(m - lo) / one_minus_pow2(hi - lo);
    lo as f64 + frac * (hi - lo) as f64 - 1.0
}

/// `1 - 2^{-e}`.
fn one_minus_pow2(e: u64) -> f64 {
    -(-(e as f64) * std::f64::consts::LN_2).exp_m1()
}

/// Exact `sigma_{2^m}` from the closed form.
pub fn aq_sigma_pow2_exact(q: u32, m: u64) -> BigRational {
    if m <= 1 {
        return BigRational::zero();
    }
    let k = block_of(q, m);
    let lo = block_edge(q, k);
    let hi = lo << q;
    let pow = |e: u64| BigInt::one() << e;
    let frac = BigRational::new(pow(m) - pow(lo), pow(hi) - pow(lo));
    BigRational::from_integer(BigInt::from(lo)) + frac * BigInt::from(hi - lo) - BigRational::one()
}

/// Exact block value `lambda_k`.
pub fn aq_lambda_exact(q: u32, k: u32) -> BigRational {
    let lo = block_edge(q, k);
    let hi = lo << q;
    BigRational::new(BigInt::from(hi - lo), (BigInt::one() << hi) - (BigInt::one() << lo))
}

/// `(1 / (p ln 2)) sum_{m=1}^{p} sigma_{2^m} / m`, term by term.
pub fn cesaro_direct(params: AqParams, p: u64) -> Result<f64> {
    if p < 2 {
        return Err(Error::Domain(format!("p must be >= 2, got {p}")));
    }
    if p > DIRECT_GUARD {
        return Err(Error::Domain(format!("p = {p} exceeds the direct-path guard {DIRECT_GUARD}")));
    }
    let mut acc = NeumaierSum::new();
    for m in 1..=p {
        acc.add(aq_sigma_pow2(params.q, m) / m as f64);
    }
    Ok(acc.value() / (p as f64 * std::f64::consts::LN_2))
}

/// `p = 2^{sq + r}` after range checks.
pub fn dyadic_p(params: AqParams, s: u32, r: u32) -> Result<u64> {
    if r < 1 || r > params.q {
        return Err(Error::Domain(format!("r must lie in 1..={}, got {r}", params.q)));
    }
    let e = s
        .checked_mul(params.q)
        .and_then(|e| e.checked_add(r))
        .filter(|&e| e < 64)
        .ok_or_else(|| Error::Overflow(format!("2^(s*q + r) with s = {s}, q = {}, r = {r}", params.q)))?;
    Ok(1u64 << e)
}

/// Block-accelerated evaluation at `p = 2^{sq + r}`.
pub fn cesaro_block(params: AqParams, s: u32, r: u32) -> Result<f64> {
    cesaro_block_p(params, dyadic_p(params, s, r)?)
}

/// Block-accelerated Cesàro mean at arbitrary `p >= 2`. Each block
/// `(n_k, n_{k+1}]` contributes
/// `(n_k - 1 - c d) (H_b - H_a) + c sum_{a < m <= b} 2^{m - n_{k+1}} / m / (1 - 2^{n_k - n_{k+1}})`
/// with `c = n_{k+1} - n_k`, `d = 2^{n_k - n_{k+1}} / (1 - 2^{n_k - n_{k+1}})`.
pub fn cesaro_block_p(params: AqParams, p: u64) -> Result<f64> {
    if p < 2 {
        return Err(Error::Domain(format!("p must be >= 2, got {p}")));
    }
    let q = params.q;
    let mut acc = NeumaierSum::new();
    let mut k = 0;
    loop {
        let lo = block_edge(q, k);
        if lo >= p {
            break;
        }
        let hi = lo.checked_shl(q).filter(|&h| h >> q == lo).unwrap_or(u64::MAX);
        let b = hi.min(p);
        let c = (hi - lo) as f64;
        let gap = (-((hi - lo) as f64)).exp2();
        let denom = one_minus_pow2(hi - lo);
        let flat = lo as f64 - 1.0 - c * gap / denom;
        acc.add(flat * harmonic_diff(lo, b));
        acc.add(c / denom * scaled_dyadic_harmonic(lo, b, hi));
        if hi >= p {
            break;
        }
        k += 1;
    }
    Ok(acc.value() / (p as f64 * std::f64::consts::LN_2))
}

/// `H_b - H_a`.
fn harmonic_diff(a: u64, b: u64) -> f64 {
    if b <= HARMONIC_DIRECT {
        return crate::sum::neumaier((a + 1..=b).map(|m| 1.0 / m as f64));
    }
    if a < HARMONIC_DIRECT {
        return harmonic_diff(a, HARMONIC_DIRECT) + harmonic_diff(HARMONIC_DIRECT, b);
    }
    // H_n = ln n + gamma + 1/(2n) - 1/(12n^2) + 1/(120n^4) - ...
    let tail = |n: f64| 1.0 / (2.0 * n) - 1.0 / (12.0 * n * n) + 1.0 / (120.0 * n.powi(4));
    let (af, bf) = (a as f64, b as f64);
    ((b - a) as f64 / af).ln_1p() + (tail(bf) - tail(af))
}

/// `sum_{a < m <= b} 2^{m - top} / m` (`b <= top`), summed from `m = b`
/// downward until the terms stop mattering.
fn scaled_dyadic_harmonic(a: u64, b: u64, top: u64) -> f64 {
    let mut terms = Vec::new();
    let mut w = 1.0;
    let mut m = b;
    while m > a && w > 1e-20 {
        terms.push(w / m as f64);
        w *= 0.5;
        m -= 1;
    }
    // ascending magnitude, so smallest first
    let scaled = crate::sum::neumaier(terms.into_iter().rev());
    scaled * (-((top - b) as f64)).exp2()
}

/// `2^{-r} (q / (2^q - 1) + r)`.
pub fn reference(q: u32, r: u32) -> f64 {
    (-(r as f64)).exp2() * (q as f64 / ((q as f64).exp2() - 1.0) + r as f64)
}

/// `t (q / (2^q - 1) - log2 t)` for `t` in `[2^{-q}, 1]`.
pub fn reference_t(q: u32, t: f64) -> Result<f64> {
    let lo = (-(q as f64)).exp2();
    if !(t >= lo && t <= 1.0) {
        return Err(Error::Domain(format!("t = {t} lies outside [{lo}, 1]")));
    }
    Ok(t * (q as f64 / ((q as f64).exp2() - 1.0) - t.log2()))
}

fn evaluate(params: AqParams, p: u64, method: Method) -> Result<f64> {
    match method {
        Method::Direct => cesaro_direct(params, p),
        Method::Block => cesaro_block_p(params, p),
    }
}

/// Report at `p = 2^{sq + r}` against the dyadic reference value.
pub fn reproduce(params: AqParams, s: u32, r: u32, method: Method) -> Result<Example4Report> {
    let p = dyadic_p(params, s, r)?;
    let start = Instant::now();
    let estimate = evaluate(params, p, method)?;
    let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    let reference = reference(params.q, r);
    Ok(Example4Report {
        q: params.q,
        s,
        r: Some(r),
        p,
        method,
        estimate,
        t: (-(r as f64)).exp2(),
        reference,
        error: (estimate - reference).abs(),
        runtime_ms: Some(runtime_ms),
    })
}

/// Report at arbitrary `p`, with `s` fixed by `n_s < p <= n_{s+1}` and the
/// reference taken from the general `t = n_s / p` curve.
pub fn reproduce_p(params: AqParams, p: u64, method: Method) -> Result<Example4Report> {
    if p < 3 {
        return Err(Error::Domain(format!("p must be >= 3 to fix s, got {p}")));
    }
    let q = params.q;
    let c = 64 - (p - 1).leading_zeros(); // ceil(log2 p)
    let s = (c - 1) / q;
    let t = ((s * q) as f64 - (p as f64).log2()).exp2();
    let r = (p.is_power_of_two() && c > s * q).then(|| c - s * q);
    let reference = match r {
        Some(r) => reference(q, r),
        None => reference_t(q, t)?,
    };
    let start = Instant::now();
    let estimate = evaluate(params, p, method)?;
    let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(Example4Report {
        q,
        s,
        r,
        p,
        method,
        estimate,
        t,
        reference,
        error: (estimate - reference).abs(),
        runtime_ms: Some(runtime_ms),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::ToPrimitive;

    #[test]
    fn closed_form_examples() {
        assert_eq!(aq_sigma_pow2(1, 1), 0.0);
        assert_eq!(aq_sigma_pow2(1, 2), 1.0);
        assert!((aq_sigma_pow2(1, 3) - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(aq_sigma_pow2(1, 4), 3.0);
        assert_eq!(aq_sigma_pow2_exact(1, 3), BigRational::new(5.into(), 3.into()));
    }

    #[test]
    fn blocks() {
        let p = AqParams::new(2).unwrap();
        assert_eq!(p.block_of(2), 0);
        assert_eq!(p.block_of(4), 0);
        assert_eq!(p.block_of(5), 1);
        assert_eq!(p.block_of(16), 1);
        assert_eq!(p.block_of(17), 2);
        assert_eq!(p.n(3), Some(64));
        assert_eq!(p.n(32), None);
        assert_eq!(aq_lambda_exact(1, 1), BigRational::new(1.into(), 6.into()));
    }

    #[test]
    fn float_closed_form_tracks_exact() {
        for q in 1..=3 {
            for m in 1..=40 {
                let exact = aq_sigma_pow2_exact(q, m).to_f64().unwrap();
                let got = aq_sigma_pow2(q, m);
                assert!((got - exact).abs() <= 1e-14 * exact.max(1.0), "q={q} m={m}");
            }
        }
    }

    #[test]
    fn direct_small_p() {
        let p1 = AqParams::new(1).unwrap();
        let ln2 = std::f64::consts::LN_2;
        let expect4 = (0.5 + (5.0 / 3.0) / 3.0 + 0.75) / (4.0 * ln2);
        assert!((cesaro_direct(p1, 4).unwrap() - expect4).abs() < 1e-15);
        assert!((cesaro_direct(p1, 4).unwrap() - 0.6512165).abs() < 1e-6);
        assert!((cesaro_direct(p1, 2).unwrap() - 0.360674).abs() < 1e-6);
        assert!(cesaro_direct(p1, 1).is_err());
        assert!(cesaro_direct(p1, DIRECT_GUARD + 1).is_err());
    }

    #[test]
    fn references() {
        assert_eq!(reference(1, 1), 1.0);
        assert!((reference(2, 1) - 5.0 / 6.0).abs() < 1e-15);
        assert!((reference(2, 2) - 2.0 / 3.0).abs() < 1e-15);
        assert!((reference_t(3, 1.0).unwrap() - 3.0 / 7.0).abs() < 1e-15);
        for q in 1..=4 {
            for r in 1..=q {
                let t = (-(r as f64)).exp2();
                assert!((reference_t(q, t).unwrap() - reference(q, r)).abs() < 1e-15);
            }
        }
        assert!(reference_t(2, 0.1).is_err());
    }

    #[test]
    fn block_path_matches_direct() {
        for (q, s, r) in [(1, 8, 1), (2, 5, 2), (3, 3, 1)] {
            let params = AqParams::new(q).unwrap();
            let p = dyadic_p(params, s, r).unwrap();
            let a = cesaro_direct(params, p).unwrap();
            let b = cesaro_block(params, s, r).unwrap();
            assert!(((a - b) / a).abs() <= 1e-9, "q={q}: {a} vs {b}");
        }
    }

    #[test]
    fn harmonic_expansion_continuity() {
        let direct = crate::sum::neumaier((1..=200_000u64).map(|m| 1.0 / m as f64));
        let split = harmonic_diff(0, 200_000);
        assert!((direct - split).abs() < 1e-13);
    }

    #[test]
    fn reproduce_general_p() {
        let params = AqParams::new(2).unwrap();
        let rep = reproduce_p(params, 1 << 15, Method::Block).unwrap();
        assert_eq!((rep.s, rep.r), (7, Some(1)));
        assert!((rep.reference - 5.0 / 6.0).abs() < 1e-15);
        let rep = reproduce_p(params, 3 << 13, Method::Block).unwrap();
        assert_eq!((rep.s, rep.r), (7, None));
        assert!((rep.t - 2.0 / 3.0).abs() < 1e-15);
        assert!(rep.error < 0.05);
    }
}
