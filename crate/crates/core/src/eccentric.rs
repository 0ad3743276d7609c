//! Limit-point diagnostics for `S_{2n} / S_n`, the witnesses `p_k`, the
//! concavity bounds they rest on, and the ideal-membership and doubling
//! inequalities.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::seqcore::{eig_sym_small, DenseMatrix, Index, SpectralSequence};
use crate::sum::neumaier;

pub const DEFAULT_EPSILON: f64 = 0.05;
pub const DEFAULT_HORIZON: u64 = 1 << 20;
/// Witnesses collected alongside every eccentricity report.
pub const REPORT_K_MAX: u32 = 10;
/// Probe points per octave.
const GRID_DENSITY: u32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    EccentricWithinHorizon,
    NoWitnessFound,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Witness {
    pub k: u32,
    pub p: u64,
    /// `|1 - S_{2p}/S_p|`, at most `1/k^2`.
    pub deviation: f64,
    /// `|1 - S_{kp}/S_p|`, expected at most `(k-1)/k^2`.
    pub derived_deviation: f64,
    pub derived_holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EccentricityReport {
    pub horizon: u64,
    pub epsilon: f64,
    pub verdict: Verdict,
    #[serde(serialize_with = "crate::float_serde::float")]
    pub best_deviation: f64,
    pub best_n: u64,
    /// `(n, S_{2n}/S_n)` at the powers of two up to the horizon.
    pub trajectory: Vec<(u64, f64)>,
    pub witnesses: Vec<Witness>,
}

/// Probe indices: every `round(2^{j/4}) <= horizon`. Contains the dyadic
/// grid and only grows with the horizon.
pub fn probe_grid(horizon: u64) -> Vec<u64> {
    let mut grid: Vec<u64> = (0..)
        .map(|j: u32| (j as f64 / GRID_DENSITY as f64).exp2().round() as u64)
        .take_while(|&n| n <= horizon)
        .collect();
    grid.dedup();
    grid
}

fn ratio(seq: &SpectralSequence, num: u64, den: u64) -> Result<f64> {
    seq.integral_ratio(Index::At(num), Index::At(den))
}

pub fn analyze_eccentricity(seq: &SpectralSequence, horizon: u64, epsilon: f64) -> Result<EccentricityReport> {
    if horizon < 8 {
        return Err(Error::Domain(format!("horizon must be >= 8, got {horizon}")));
    }
    if !(epsilon >= 0.0) {
        return Err(Error::Domain(format!("epsilon must be non-negative, got {epsilon}")));
    }
    let mut best = (f64::INFINITY, 0);
    let mut trajectory = Vec::new();
    for n in probe_grid(horizon) {
        let r = ratio(seq, 2 * n, n)?;
        let dev = (1.0 - r).abs();
        if dev < best.0 {
            best = (dev, n);
        }
        if n.is_power_of_two() {
            trajectory.push((n, r));
        }
    }
    let verdict = if best.0 <= epsilon { Verdict::EccentricWithinHorizon } else { Verdict::NoWitnessFound };
    Ok(EccentricityReport {
        horizon,
        epsilon,
        verdict,
        best_deviation: best.0,
        best_n: best.1,
        trajectory,
        witnesses: extract_pk(seq, REPORT_K_MAX, horizon)?,
    })
}

/// Smallest `p <= horizon` with `|1 - S_{2p}/S_p| <= 1/k^2` for each
/// `k = 2..=k_max`; missing `k` had no such `p`.
pub fn extract_pk(seq: &SpectralSequence, k_max: u32, horizon: u64) -> Result<Vec<Witness>> {
    if k_max < 2 {
        return Err(Error::Domain(format!("k_max must be >= 2, got {k_max}")));
    }
    if horizon < 8 {
        return Err(Error::Domain(format!("horizon must be >= 8, got {horizon}")));
    }
    // thresholds shrink with k, so witnesses appear in order of k
    let mut out = Vec::new();
    let mut k = 2;
    for p in 1..=horizon {
        if k > k_max {
            break;
        }
        let dev = (1.0 - ratio(seq, 2 * p, p)?).abs();
        while k <= k_max && dev <= 1.0 / (k as f64 * k as f64) {
            let kp = p.checked_mul(k as u64).ok_or_else(|| Error::Overflow(format!("{k} * {p}")))?;
            let derived = (1.0 - ratio(seq, kp, p)?).abs();
            let kf = k as f64;
            out.push(Witness {
                k,
                p,
                deviation: dev,
                derived_deviation: derived,
                derived_holds: derived <= (kf - 1.0) / (kf * kf) * (1.0 + 1e-12),
            });
            k += 1;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConcavityCheck {
    pub holds: bool,
    /// `S_{2n} - ((k-2) S_n + S_{kn}) / (k-1)`
    pub residual: f64,
}

/// Chord inequality `((k-2)/(k-1)) S_n + (1/(k-1)) S_{kn} <= S_{2n}` for the
/// concave sequence `S`.
pub fn concavity_interpolation_check(seq: &SpectralSequence, n: u64, k: u64) -> Result<ConcavityCheck> {
    if k < 2 {
        return Err(Error::Domain(format!("k must be >= 2, got {k}")));
    }
    let kn = n.checked_mul(k).ok_or_else(|| Error::Overflow(format!("{k} * {n}")))?;
    let s_n = seq.integral(n)?;
    let s_2n = seq.integral(2 * n)?;
    let s_kn = seq.integral(kn)?;
    let kf = (k - 1) as f64;
    let residual = if k == 2 { 0.0 } else { s_2n - ((k - 2) as f64 * s_n + s_kn) / kf };
    Ok(ConcavityCheck { holds: residual >= -1e-12 * s_kn.abs().max(1.0), residual })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthCheck {
    pub holds: bool,
    /// `|S_{kn} - S_n|`
    pub lhs: f64,
    /// `(k-1) |S_{2n} - S_n|`
    pub rhs: f64,
}

/// `|S_{kn} - S_n| <= (k-1) |S_{2n} - S_n|`, the division-free form of the
/// bound on `S_{kn}/S_n` implied by concavity.
pub fn growth_bound_check(seq: &SpectralSequence, n: u64, k: u64) -> Result<GrowthCheck> {
    if k < 2 {
        return Err(Error::Domain(format!("k must be >= 2, got {k}")));
    }
    let kn = n.checked_mul(k).ok_or_else(|| Error::Overflow(format!("{k} * {n}")))?;
    let s_n = seq.integral(n)?;
    let lhs = (seq.integral(kn)? - s_n).abs();
    let rhs = (k - 1) as f64 * (seq.integral(2 * n)? - s_n).abs();
    Ok(GrowthCheck { holds: lhs <= rhs + 1e-12 * rhs.max(1.0), lhs, rhs })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DominationReport {
    pub r: u64,
    #[serde(serialize_with = "crate::float_serde::float")]
    pub k_estimate: f64,
    /// Index at which the maximum was attained.
    pub argmax: u64,
    pub horizon: u64,
    pub bounded: bool,
}

/// Running maximum of `mu_{r(n-1)+1}(A) / mu_n(T)` over `n <= horizon`.
/// Bounded means the maximum grew by at most 1% over the last decade.
pub fn domination_test(a: &SpectralSequence, t: &SpectralSequence, r: u64, horizon: u64) -> Result<DominationReport> {
    if r < 1 || horizon < 1 {
        return Err(Error::Domain(format!("need r >= 1 and horizon >= 1, got r = {r}, horizon = {horizon}")));
    }
    let decade = (horizon / 10).max(1);
    let mut best = (f64::NEG_INFINITY, 1);
    let mut at_decade = f64::NEG_INFINITY;
    for n in 1..=horizon {
        let lt = t.ln_mu(n)?;
        if lt == f64::NEG_INFINITY {
            return Err(Error::Underflow(n));
        }
        let idx = r
            .checked_mul(n - 1)
            .and_then(|x| x.checked_add(1))
            .ok_or_else(|| Error::Overflow(format!("{r} * ({n} - 1) + 1")))?;
        let v = a.ln_mu(idx)? - lt;
        if v > best.0 {
            best = (v, n);
        }
        if n == decade {
            at_decade = best.0;
        }
    }
    let k_estimate = best.0.exp();
    let bounded = k_estimate.is_finite() && best.0 - at_decade <= 1.01f64.ln();
    Ok(DominationReport { r, k_estimate, argmax: best.1, horizon, bounded })
}

#[derive(Debug, Clone, Copy)]
pub enum DoublingInput<'a> {
    /// Eigenvalue lists of two simultaneously diagonal operators, both
    /// non-increasing.
    Commuting { a: &'a [f64], b: &'a [f64] },
    /// Two positive semidefinite matrices.
    Matrix { a: &'a DenseMatrix, b: &'a DenseMatrix },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DoublingCheck {
    pub left: bool,
    pub right: bool,
    pub sigma_n_sum: f64,
    pub sigma_n_a_plus_b: f64,
    pub sigma_2n_sum: f64,
}

/// `sigma_n(A+B) <= sigma_n(A) + sigma_n(B) <= sigma_{2n}(A+B)`.
pub fn doubling_inequality_check(input: DoublingInput<'_>, n: usize) -> Result<DoublingCheck> {
    let (ea, eb, esum) = match input {
        DoublingInput::Commuting { a, b } => {
            if a.len() != b.len() {
                return Err(Error::DimensionMismatch(format!("lists of length {} and {}", a.len(), b.len())));
            }
            for list in [a, b] {
                if list.windows(2).any(|w| w[1] > w[0]) || list.iter().any(|&x| !(x >= 0.0)) {
                    return Err(Error::Domain("eigenvalue lists must be non-negative and non-increasing".into()));
                }
            }
            let sum: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + y).collect();
            (a.to_vec(), b.to_vec(), sum)
        }
        DoublingInput::Matrix { a, b } => {
            if a.dim() != b.dim() {
                return Err(Error::DimensionMismatch(format!("{} vs {}", a.dim(), b.dim())));
            }
            let ea = psd_spectrum(a)?;
            let eb = psd_spectrum(b)?;
            let es = psd_spectrum(&a.add(b)?)?;
            (ea, eb, es)
        }
    };
    if 2 * n > esum.len() {
        return Err(Error::DimensionMismatch(format!("2n = {} exceeds spectrum length {}", 2 * n, esum.len())));
    }
    let sigma = |v: &[f64], m: usize| neumaier(v[..m].iter().copied());
    let sigma_n_sum = sigma(&esum, n);
    let sigma_n_a_plus_b = sigma(&ea, n) + sigma(&eb, n);
    let sigma_2n_sum = sigma(&esum, 2 * n);
    let slack = 1e-10 * sigma_2n_sum.abs();
    Ok(DoublingCheck {
        left: sigma_n_sum <= sigma_n_a_plus_b + slack,
        right: sigma_n_a_plus_b <= sigma_2n_sum + slack,
        sigma_n_sum,
        sigma_n_a_plus_b,
        sigma_2n_sum,
    })
}

fn psd_spectrum(m: &DenseMatrix) -> Result<Vec<f64>> {
    let e = eig_sym_small(m)?;
    let tol = 1e-10 * m.frobenius().max(f64::MIN_POSITIVE);
    if let Some(&neg) = e.iter().find(|&&x| x < -tol) {
        return Err(Error::NotPositive(neg));
    }
    Ok(e.into_iter().map(|x| x.max(0.0)).collect())
}
