//! Finite-cutoff trace estimates and the constructions used to test them:
//! window means of `S_n(A)/S_n(T)` along `n = 2^k` and along `n_k = k p_k`,
//! dilation and additivity defects, block averaging and k-dilation.

use serde::Serialize;

use crate::eccentric::extract_pk;
use crate::error::{Error, Result};
use crate::seqcore::{cross_ratio, Index, SpectralSequence, SummabilityClass};
use crate::sum::{mean, NeumaierSum};

/// Ratio samples kept in a report.
const TAIL_SAMPLES: usize = 5;
/// Fewer Varga witnesses than this mark the estimate as low-confidence.
pub const MIN_CONFIDENT_WITNESSES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TraceMethod {
    Dixmier { omega: u32 },
    Varga { k_max: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEstimate {
    /// `+inf` when `A` is not summable but `T` is.
    #[serde(serialize_with = "crate::float_serde::float")]
    pub value: f64,
    pub infinite: bool,
    pub method: TraceMethod,
    /// Sample indices: `2^k` exponents `1..=omega` for Dixmier estimates or
    /// the `n_k = k p_k` for Varga estimates.
    pub cutoff: Vec<u64>,
    #[serde(serialize_with = "crate::float_serde::float")]
    pub oscillation: f64,
    #[serde(serialize_with = "crate::float_serde::floats")]
    pub ratios_tail: Vec<f64>,
    pub low_confidence: bool,
    /// Every ratio sample, in order.
    #[serde(skip)]
    pub samples: Vec<f64>,
    /// Running means of the ratio samples.
    #[serde(skip)]
    pub running_means: Vec<f64>,
}

fn running_means(ratios: &[f64]) -> Vec<f64> {
    let mut acc = NeumaierSum::new();
    ratios
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            acc.add(r);
            acc.value() / (i + 1) as f64
        })
        .collect()
}

/// `max - min`; zero for an all-infinite verdict.
fn spread(values: &[f64]) -> f64 {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if lo == hi {
        0.0
    } else {
        hi - lo
    }
}

fn tail_of(ratios: &[f64]) -> Vec<f64> {
    ratios[ratios.len().saturating_sub(TAIL_SAMPLES)..].to_vec()
}

/// `(1/omega) sum_{k=1..omega} S_{2^k}(A) / S_{2^k}(T)`.
pub fn dixmier_estimate(a: &SpectralSequence, t: &SpectralSequence, omega: u32) -> Result<TraceEstimate> {
    if omega < 1 {
        return Err(Error::Domain("omega must be >= 1".into()));
    }
    let ratios = (1..=omega)
        .map(|k| cross_ratio(a, Index::Pow2(k), t, Index::Pow2(k)))
        .collect::<Result<Vec<_>>>()?;
    let infinite = ratios.iter().any(|r| r.is_infinite());
    let value = if infinite { f64::INFINITY } else { mean(&ratios) };
    let means = if infinite { vec![f64::INFINITY; ratios.len()] } else { running_means(&ratios) };
    let quarter = (omega as usize * 3) / 4;
    Ok(TraceEstimate {
        value,
        infinite,
        method: TraceMethod::Dixmier { omega },
        cutoff: (1..=omega as u64).collect(),
        oscillation: spread(&means[quarter..]),
        ratios_tail: tail_of(&ratios),
        low_confidence: false,
        samples: ratios,
        running_means: means,
    })
}

/// Mean of `S_{n_k}(A) / S_{n_k}(T)` over `n_k = k p_k`, `k <= k_max`.
pub fn varga_estimate(a: &SpectralSequence, t: &SpectralSequence, k_max: u32, horizon: u64) -> Result<TraceEstimate> {
    let witnesses = extract_pk(t, k_max, horizon)?;
    if witnesses.is_empty() {
        return Err(Error::NoWitness(horizon));
    }
    let samples: Vec<u64> = witnesses.iter().map(|w| w.k as u64 * w.p).collect();
    let ratios = samples
        .iter()
        .map(|&n| cross_ratio(a, Index::At(n), t, Index::At(n)))
        .collect::<Result<Vec<_>>>()?;
    let infinite = ratios.iter().any(|r| r.is_infinite());
    let value = if infinite { f64::INFINITY } else { mean(&ratios) };
    Ok(TraceEstimate {
        value,
        infinite,
        method: TraceMethod::Varga { k_max },
        cutoff: samples,
        oscillation: spread(&ratios),
        ratios_tail: tail_of(&ratios),
        low_confidence: witnesses.len() < MIN_CONFIDENT_WITNESSES,
        running_means: if infinite { vec![f64::INFINITY; ratios.len()] } else { running_means(&ratios) },
        samples: ratios,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DilationDefect {
    /// `phi_omega({a_{2n}}) - phi_omega({a_n})`
    #[serde(serialize_with = "crate::float_serde::float")]
    pub defect: f64,
    /// `(a_{2^{omega+1}} - a_2) / omega`
    #[serde(serialize_with = "crate::float_serde::float")]
    pub telescoped: f64,
    #[serde(serialize_with = "crate::float_serde::float")]
    pub sup: f64,
    /// `2 sup|a| / omega`
    #[serde(serialize_with = "crate::float_serde::float")]
    pub bound: f64,
    /// The second half of the window reaches at least 1.5 times the first
    /// half's supremum, suggesting `a` is unbounded.
    pub growing: bool,
}

/// Dilation defect of the window state `phi_omega(b) = (1/omega) sum_{k=1..omega} b_{2^k}`.
/// `a(k)` returns `a_{2^k}`.
pub fn dilation_invariance_defect<F>(a: F, omega: u32) -> Result<DilationDefect>
where
    F: Fn(u32) -> Result<f64>,
{
    if omega < 1 {
        return Err(Error::Domain("omega must be >= 1".into()));
    }
    let top = omega.checked_add(1).ok_or_else(|| Error::Overflow("2^(omega+1)".into()))?;
    let values = (1..=top).map(&a).collect::<Result<Vec<_>>>()?;
    let w = omega as usize;
    let base = mean(&values[..w]);
    let shifted = mean(&values[1..]);
    let sup = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let half = values.len() / 2;
    let first = values[..half].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let second = values[half..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(DilationDefect {
        defect: shifted - base,
        telescoped: (values[w] - values[0]) / omega as f64,
        sup,
        bound: 2.0 * sup / omega as f64,
        growing: second >= 1.5 * first && second > 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdditivityDefect {
    #[serde(serialize_with = "crate::float_serde::float")]
    pub defect: f64,
    #[serde(serialize_with = "crate::float_serde::float")]
    pub bound: f64,
    pub holds: bool,
    pub omega: u32,
}

/// `|est(A+B) - est(A) - est(B)|` under [`dixmier_estimate`], with `A + B`
/// the pointwise sum of the two spectra, against the slack of the two
/// inequality chains that make the limit additive.
pub fn additivity_defect(
    a: &SpectralSequence,
    b: &SpectralSequence,
    t: &SpectralSequence,
    omega: u32,
) -> Result<AdditivityDefect> {
    use SummabilityClass::*;
    let (ca, cb) = (a.summability().class, b.summability().class);
    if ca == Undetermined || cb == Undetermined {
        return Err(Error::UndeterminedSummability(if ca == Undetermined { a.descriptor() } else { b.descriptor() }));
    }
    let ab = SpectralSequence::sum(a.clone(), b.clone());
    let est_ab = dixmier_estimate(&ab, t, omega)?;
    let est_a = dixmier_estimate(a, t, omega)?;
    let est_b = dixmier_estimate(b, t, omega)?;
    let defect = (est_ab.value - est_a.value - est_b.value).abs();
    if !defect.is_finite() {
        // an infinite trace on either side leaves nothing to compare
        return Ok(AdditivityDefect { defect, bound: f64::INFINITY, holds: true, omega });
    }
    let ratio_norm = [&est_ab, &est_a, &est_b]
        .iter()
        .flat_map(|e| e.samples.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let mut growth = Vec::with_capacity(omega as usize);
    let mut drift = Vec::with_capacity(omega as usize);
    let mut mixed = Vec::new();
    // trace of the summable summand when the classes differ
    let mixed_trace = match (ca, cb) {
        (NonSummable, Summable) => b.summability().trace,
        (Summable, NonSummable) => a.summability().trace,
        _ => None,
    };
    for k in 1..=omega {
        let st = t.integral_pow2(k)?.abs();
        let st2 = t.integral_ratio(Index::Pow2(k + 1), Index::Pow2(k))?;
        let sab = cross_ratio(&ab, Index::Pow2(k + 1), t, Index::Pow2(k))?
            - cross_ratio(&ab, Index::Pow2(k), t, Index::Pow2(k))?;
        growth.push(sab.abs());
        drift.push((1.0 - st2).abs());
        if let Some(tr) = mixed_trace {
            mixed.push(tr / st);
        }
    }
    let mut bound = mean(&growth) + ratio_norm * mean(&drift);
    if !mixed.is_empty() {
        bound += mean(&mixed);
    }
    Ok(AdditivityDefect { defect, bound, holds: defect <= bound + 1e-10, omega })
}

/// Averages of `T` over the blocks `(k^{L-1}, k^L]`, evaluable for `n <= horizon`.
pub fn averaged_operator(t: &SpectralSequence, k: u64, horizon: u64) -> Result<SpectralSequence> {
    if k < 2 {
        return Err(Error::Domain(format!("k must be >= 2, got {k}")));
    }
    if horizon < 1 {
        return Err(Error::Domain("horizon must be >= 1".into()));
    }
    if t.summability().class == SummabilityClass::Undetermined {
        return Err(Error::UndeterminedSummability(t.descriptor()));
    }
    let s = SpectralSequence::block_averaged(t.clone(), k, horizon);
    s.probe(horizon.min(crate::seqcore::PROBE_LEN))?;
    Ok(s)
}

#[derive(Debug, Clone)]
pub struct DilationPair {
    pub s: SpectralSequence,
    pub s_tilde: SpectralSequence,
    pub k: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityChecks {
    pub checked: u64,
    pub all_hold: bool,
    pub failures: Vec<u64>,
}

impl InequalityChecks {
    fn new() -> Self {
        Self { checked: 0, all_hold: true, failures: Vec::new() }
    }

    fn record(&mut self, n: u64, ok: bool) {
        self.checked += 1;
        if !ok {
            self.all_hold = false;
            self.failures.push(n);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DilationChecks {
    /// `mu_n(S) >= 2k mu_{k(n-1)+1}(S)`, for `2 <= n <= horizon`
    pub eigenvalue_gap: InequalityChecks,
    /// `mu_{k(n-1)+j}(S~) >= 2 mu_{k(n-1)+j}(S)`, for `2 <= n <= horizon`
    pub dilation_gap: InequalityChecks,
    /// `k mu_{k(n-1)+j}(S~) = mu_n(S)` held exactly everywhere probed.
    pub construction_exact: bool,
    pub horizon: u64,
}

/// Builds the k-dilation `S~` of `S` and checks both eigenvalue estimates.
/// For `n = 1` neither estimate can hold, so checks start at `n = 2`.
pub fn k_dilation_with_checks(s: &SpectralSequence, k: u64, horizon: u64) -> Result<(DilationPair, DilationChecks)> {
    if k < 2 {
        return Err(Error::Domain(format!("k must be >= 2, got {k}")));
    }
    let tilde = SpectralSequence::dilated(s.clone(), k);
    let ln2k = (2.0 * k as f64).ln();
    let ln2 = std::f64::consts::LN_2;
    let mut gap = InequalityChecks::new();
    let mut dil = InequalityChecks::new();
    let mut exact = true;
    for n in 1..=horizon {
        let base = k
            .checked_mul(n - 1)
            .ok_or_else(|| Error::Overflow(format!("{k} * ({n} - 1)")))?;
        let ln_mu_n = s.ln_mu(n)?;
        let mu_n = s.mu(n).ok();
        for j in 1..=k {
            let idx = base + j;
            if let (Some(m), Ok(mt)) = (mu_n, tilde.mu(idx)) {
                exact &= mt * k as f64 == m || (mt - m / k as f64).abs() <= f64::EPSILON * mt;
            }
        }
        if n == 1 {
            continue;
        }
        let ln_head = s.ln_mu(base + 1)?;
        gap.record(n, ln_mu_n >= ln2k + ln_head - 1e-12);
        let mut ok = true;
        for j in 1..=k {
            let idx = base + j;
            ok &= tilde.ln_mu(idx)? >= ln2 + s.ln_mu(idx)? - 1e-12;
        }
        dil.record(n, ok);
    }
    Ok((
        DilationPair { s: s.clone(), s_tilde: tilde, k },
        DilationChecks { eigenvalue_gap: gap, dilation_gap: dil, construction_exact: exact, horizon },
    ))
}

/// Convenience: `a_{2^k}` for an index-based accessor, failing once `2^k`
/// leaves `u64`.
pub fn dyadic_accessor<F>(a: F) -> impl Fn(u32) -> Result<f64>
where
    F: Fn(u64) -> f64,
{
    move |k| {
        if k >= 64 {
            return Err(Error::Overflow(format!("index 2^{k}")));
        }
        Ok(a(1u64 << k))
    }
}

/// Running Cesàro means as `(omega, mean)` rows.
pub fn cesaro_rows(est: &TraceEstimate) -> Vec<(u64, f64)> {
    est.running_means.iter().enumerate().map(|(i, &m)| (i as u64 + 1, m)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1e-300)
    }

    #[test]
    fn self_trace_is_exactly_one() {
        let h = SpectralSequence::harmonic();
        let e = dixmier_estimate(&h, &h, 100).unwrap();
        assert_eq!(e.value, 1.0);
        assert_eq!(e.oscillation, 0.0);
        let g = SpectralSequence::geometric(0.5).unwrap();
        assert_eq!(dixmier_estimate(&g, &g, 40).unwrap().value, 1.0);
    }

    #[test]
    fn dixmier_homogeneity() {
        let h = SpectralSequence::harmonic();
        let l = SpectralSequence::logstep();
        let s = SpectralSequence::scaled(2.0, h.clone()).unwrap();
        let base = dixmier_estimate(&h, &l, 200).unwrap().value;
        assert!(close(dixmier_estimate(&s, &l, 200).unwrap().value, 2.0 * base, 1e-12));
    }

    #[test]
    fn harmonic_over_logstep() {
        let h = SpectralSequence::harmonic();
        let l = SpectralSequence::logstep();
        let e = dixmier_estimate(&h, &l, 1000).unwrap();
        assert!((e.value - 1.006).abs() < 5e-4, "{}", e.value);
        assert!(e.oscillation > 0.0 && e.oscillation < 5e-3, "{}", e.oscillation);
    }

    #[test]
    fn infinite_verdict_is_a_value() {
        let h = SpectralSequence::harmonic();
        let p = SpectralSequence::power(-2.0).unwrap();
        let e = dixmier_estimate(&h, &p, 20).unwrap();
        assert!(e.infinite && e.value == f64::INFINITY);
        let v = varga_estimate(&h, &p, 4, 1 << 10);
        assert!(matches!(v, Err(Error::NoWitness(_))));
    }

    #[test]
    fn varga_examples() {
        let h = SpectralSequence::harmonic();
        let e = varga_estimate(&h, &h, 4, 1 << 16).unwrap();
        assert_eq!((e.value, e.oscillation), (1.0, 0.0));
        assert!(!e.low_confidence);
        let p = SpectralSequence::power(-2.0).unwrap();
        assert!(varga_estimate(&p, &h, 4, 1 << 16).unwrap().value.abs() <= 0.02);
        let s = SpectralSequence::scaled(3.0, h.clone()).unwrap();
        let e = varga_estimate(&s, &h, 4, 1 << 16).unwrap();
        assert!(close(e.value, 3.0, 1e-14) && e.oscillation <= 1e-14);
        assert!(varga_estimate(&h, &h, 2, 1 << 16).unwrap().low_confidence);
    }

    #[test]
    fn dilation_defect_examples() {
        let d = dilation_invariance_defect(|_| Ok(1.0), 50).unwrap();
        assert_eq!((d.defect, d.telescoped), (0.0, 0.0));
        let alt = dyadic_accessor(|n| if n % 2 == 0 { 1.0 } else { -1.0 });
        let d = dilation_invariance_defect(alt, 10).unwrap();
        assert_eq!(d.defect, 0.0);
        let d = dilation_invariance_defect(|k| Ok(k as f64 * std::f64::consts::LN_2), 100).unwrap();
        assert!((d.defect - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((d.defect - d.telescoped).abs() < 1e-12);
        assert!(d.growing);
        assert!(dilation_invariance_defect(dyadic_accessor(|n| n as f64), 63).is_err());
    }

    #[test]
    fn additivity_examples() {
        let h = SpectralSequence::harmonic();
        let d = additivity_defect(&h, &h, &h, 50).unwrap();
        assert_eq!(d.defect, 0.0);
        let p = SpectralSequence::power(-2.0).unwrap();
        let l = SpectralSequence::logstep();
        let small = additivity_defect(&h, &p, &l, 100).unwrap();
        let large = additivity_defect(&h, &p, &l, 1000).unwrap();
        assert!(small.holds && large.holds);
        assert!(large.defect < small.defect && large.bound < small.bound);
        let g1 = SpectralSequence::geometric(0.5).unwrap();
        let g2 = SpectralSequence::geometric(0.7).unwrap();
        assert!(additivity_defect(&g1, &g2, &l, 200).unwrap().holds);
    }

    #[test]
    fn averaged_examples() {
        let g = SpectralSequence::geometric(0.25).unwrap();
        let s = averaged_operator(&g, 2, 1000).unwrap();
        let expect = (0.25f64.powi(3) + 0.25f64.powi(4)) / 2.0;
        assert!(close(s.mu(3).unwrap(), expect, 1e-14));
        let h = SpectralSequence::harmonic();
        let s = averaged_operator(&h, 2, 1000).unwrap();
        for n in 3..=4 {
            assert!(close(s.mu(n).unwrap(), 7.0 / 24.0, 1e-14));
        }
        assert_eq!(s.mu(1).unwrap(), 1.0);
        assert!(matches!(s.mu(1001), Err(Error::HorizonExceeded { .. })));
        // averaging is idempotent on block-constant sequences
        let twice = averaged_operator(&s, 2, 1000).unwrap();
        for n in 1..=1000 {
            assert!(close(twice.mu(n).unwrap(), s.mu(n).unwrap(), 1e-12), "n = {n}");
        }
        // the averaged sequence keeps the block sums
        assert!(close(s.sigma(64).unwrap(), h.sigma(64).unwrap(), 1e-14));
        let block: f64 = (17..=32).map(|n| s.mu(n).unwrap()).sum();
        assert!(close(block, h.sigma(32).unwrap() - h.sigma(16).unwrap(), 1e-13));
    }

    #[test]
    fn dilation_examples() {
        let g = SpectralSequence::geometric(0.25).unwrap();
        let s = averaged_operator(&g, 2, 4000).unwrap();
        let (pair, checks) = k_dilation_with_checks(&s, 2, 1000).unwrap();
        assert!(checks.eigenvalue_gap.all_hold && checks.dilation_gap.all_hold);
        assert!(checks.construction_exact);
        assert_eq!(pair.s_tilde.mu(3).unwrap() * 2.0, s.mu(2).unwrap());
        let h = SpectralSequence::harmonic();
        let s = averaged_operator(&h, 2, 4000).unwrap();
        let (_, checks) = k_dilation_with_checks(&s, 2, 1000).unwrap();
        assert!(!checks.eigenvalue_gap.failures.is_empty());
    }

    #[test]
    fn dilated_sums() {
        let h = SpectralSequence::harmonic();
        let d = SpectralSequence::dilated(h.clone(), 3);
        assert!(close(d.sigma(9).unwrap(), h.sigma(3).unwrap(), 1e-15));
        assert!(close(d.sigma(7).unwrap(), h.sigma(2).unwrap() + 1.0 / 9.0, 1e-15));
        let g = SpectralSequence::geometric(0.5).unwrap();
        let d = SpectralSequence::dilated(g.clone(), 2);
        assert!(close(d.integral(5).unwrap(), g.integral(3).unwrap() - g.mu(3).unwrap() / 2.0, 1e-14));
    }
}
