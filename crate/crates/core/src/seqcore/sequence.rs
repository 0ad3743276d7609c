use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::Serialize;

use super::asymptotic::Profile;
use super::partial::{PartialSumRow, PartialSumTable};
use crate::error::{Error, Result};
use crate::example4;
use crate::sum::NeumaierSum;

/// Indices up to this bound are summed term by term; beyond it the analytic
/// families switch to their Euler–Maclaurin expansion.
pub const DIRECT_LIMIT: u64 = 1 << 22;
/// Number of leading terms checked for monotonicity at construction.
pub const PROBE_LEN: u64 = 10_000;
/// Direct-summation cutoff used when certifying a trace by the integral test.
pub const TRACE_CUTOFF: u64 = 1 << 16;
/// Tails below this index are cached suffix sums; above it they come from the
/// expansion, whose truncation error there is far below one ulp.
const EM_ANCHOR: u64 = 1024;

/// Position in the sequence: either a machine integer or a power of two that
/// may exceed every fixed-width type.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Index {
    At(u64),
    Pow2(u32),
}

impl Index {
    fn normalize(self) -> Index {
        match self {
            Index::Pow2(k) if k < 64 => Index::At(1u64 << k),
            other => other,
        }
    }

    /// `ln n` of the (shifted) position.
    fn ln_shifted(self, shift: u64) -> f64 {
        match self {
            Index::At(n) => ((n + shift) as f64).ln(),
            Index::Pow2(k) => {
                k as f64 * std::f64::consts::LN_2 + (shift as f64 * (-(k as f64)).exp2()).ln_1p()
            }
        }
    }
}

impl fmt::Display for Index {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Index::At(n) => write!(f, "{n}"),
            Index::Pow2(k) => write!(f, "2^{k}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SummabilityClass {
    Summable,
    NonSummable,
    Undetermined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SummabilityInfo {
    pub class: SummabilityClass,
    pub trace: Option<f64>,
    pub trace_error_bound: f64,
}

impl SummabilityInfo {
    fn summable(trace: f64, bound: f64) -> Self {
        Self { class: SummabilityClass::Summable, trace: Some(trace), trace_error_bound: bound }
    }

    fn non_summable() -> Self {
        Self { class: SummabilityClass::NonSummable, trace: None, trace_error_bound: 0.0 }
    }

    fn undetermined() -> Self {
        Self { class: SummabilityClass::Undetermined, trace: None, trace_error_bound: 0.0 }
    }
}

/// Summability declared by the provider of an explicit list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeclaredClass {
    Summable { trace: f64 },
    NonSummable,
    Undetermined,
}

/// `(sigma_n, S_n)`; `integral` is `None` when the summability class is
/// undetermined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PartialSums {
    pub sigma: f64,
    pub integral: Option<f64>,
}

#[derive(Debug, Clone)]
pub enum Family {
    Harmonic,
    Power { alpha: f64 },
    /// `(ln(n + shift))^alpha / (n + shift)`
    PowLog { alpha: f64, shift: u64 },
    Geometric { r: f64 },
    /// `ln(1 + 1/n)`, so that `S_n = ln(n + 1)`
    LogStep,
    /// Block-constant eigenvalues on `(2^{2^{kq}}, 2^{2^{(k+1)q}}]`.
    Aq { q: u32 },
    Scaled { c: f64, inner: SpectralSequence },
    /// Pointwise sum of two simultaneously diagonal operators.
    Sum(SpectralSequence, SpectralSequence),
    Explicit { values: Arc<[f64]>, class: DeclaredClass },
    /// Averages of `source` over the blocks `(k^{L-1}, k^L]`, evaluable up to `horizon`.
    BlockAveraged { source: SpectralSequence, k: u64, horizon: u64 },
    /// Each eigenvalue of `source` repeated `k` times and divided by `k`.
    Dilated { source: SpectralSequence, k: u64 },
}

/// A positive non-increasing eigenvalue sequence `mu_1 >= mu_2 >= ... > 0`,
/// evaluated lazily. Cloning shares the partial-sum cache.
#[derive(Clone)]
pub struct SpectralSequence {
    inner: Arc<Inner>,
}

struct Inner {
    family: Family,
    table: PartialSumTable,
    summability: OnceLock<SummabilityInfo>,
    anchor: OnceLock<std::result::Result<Anchor, Error>>,
}

/// Constants fixed once per analytic sequence.
enum Anchor {
    /// `sigma_n = C + profile sum at n` for divergent profiles.
    Divergent { constant: f64 },
    /// `tails[n] = sum_{j > n} mu_j` for `n <= EM_ANCHOR`.
    Convergent { tails: Vec<f64> },
}

impl fmt::Debug for SpectralSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("SpectralSequence").field(&self.descriptor()).finish()
    }
}

impl SpectralSequence {
    fn from_family(family: Family) -> Self {
        Self {
            inner: Arc::new(Inner {
                family,
                table: PartialSumTable::new(),
                summability: OnceLock::new(),
                anchor: OnceLock::new(),
            }),
        }
    }

    fn probed(family: Family) -> Result<Self> {
        let seq = Self::from_family(family);
        seq.probe(PROBE_LEN)?;
        Ok(seq)
    }

    pub fn harmonic() -> Self {
        Self::from_family(Family::Harmonic)
    }

    pub fn power(alpha: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha > 0.0 {
            return Err(Error::Domain(format!("power exponent must be finite and <= 0, got {alpha}")));
        }
        if alpha == -1.0 {
            return Ok(Self::harmonic());
        }
        Self::probed(Family::Power { alpha })
    }

    /// `(ln n)^alpha / n` shifted to the first index from which it is
    /// non-increasing.
    pub fn powlog(alpha: f64) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(Error::Domain(format!("powlog exponent must be finite, got {alpha}")));
        }
        let shift = powlog_shift(alpha)?;
        Self::probed(Family::PowLog { alpha, shift })
    }

    pub fn geometric(r: f64) -> Result<Self> {
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::Domain(format!("geometric ratio must lie in (0, 1), got {r}")));
        }
        Self::probed(Family::Geometric { r })
    }

    pub fn logstep() -> Self {
        Self::from_family(Family::LogStep)
    }

    pub fn aq(q: u32) -> Result<Self> {
        if !(1..=30).contains(&q) {
            return Err(Error::Domain(format!("aq block parameter q must lie in 1..=30, got {q}")));
        }
        Self::probed(Family::Aq { q })
    }

    pub fn scaled(c: f64, inner: SpectralSequence) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Domain(format!("scale factor must be positive, got {c}")));
        }
        Ok(Self::from_family(Family::Scaled { c, inner }))
    }

    pub fn sum(a: SpectralSequence, b: SpectralSequence) -> Self {
        Self::from_family(Family::Sum(a, b))
    }

    pub fn explicit(values: Vec<f64>, class: DeclaredClass) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain("explicit sequence is empty".into()));
        }
        let mut prev = f64::INFINITY;
        for (i, &v) in values.iter().enumerate() {
            if !(v > 0.0 && v.is_finite()) || v > prev {
                return Err(Error::Monotonicity { n: i as u64 + 1, value: v });
            }
            prev = v;
        }
        if let DeclaredClass::Summable { trace } = class {
            let total = crate::sum::neumaier(values.iter().copied());
            if !(trace.is_finite() && trace >= total * (1.0 - 1e-12)) {
                return Err(Error::Domain(format!(
                    "declared trace {trace} is smaller than the sum {total} of the listed terms"
                )));
            }
        }
        Ok(Self::from_family(Family::Explicit { values: values.into(), class }))
    }

    pub(crate) fn block_averaged(source: SpectralSequence, k: u64, horizon: u64) -> Self {
        Self::from_family(Family::BlockAveraged { source, k, horizon })
    }

    pub(crate) fn dilated(source: SpectralSequence, k: u64) -> Self {
        Self::from_family(Family::Dilated { source, k })
    }

    pub fn family(&self) -> &Family {
        &self.inner.family
    }

    /// Canonical descriptor in the sequence DSL (or a bracketed tag for
    /// derived sequences that have no DSL form).
    pub fn descriptor(&self) -> String {
        match &self.inner.family {
            Family::Harmonic => "harmonic".into(),
            Family::Power { alpha } => format!("power:alpha={alpha}"),
            Family::PowLog { alpha, .. } => format!("powlog:alpha={alpha}"),
            Family::Geometric { r } => format!("geometric:r={r}"),
            Family::LogStep => "logstep".into(),
            Family::Aq { q } => format!("aq:q={q}"),
            Family::Scaled { c, inner } => format!("scale:c={c},({})", inner.descriptor()),
            Family::Sum(a, b) => format!("[sum {} + {}]", a.descriptor(), b.descriptor()),
            Family::Explicit { values, .. } => format!("[explicit len={}]", values.len()),
            Family::BlockAveraged { source, k, .. } => format!("[averaged k={k} {}]", source.descriptor()),
            Family::Dilated { source, k } => format!("[dilated k={k} {}]", source.descriptor()),
        }
    }

    fn too_large(&self, idx: Index) -> Error {
        Error::IndexTooLarge { family: self.descriptor(), index: idx.to_string() }
    }

    /// Checks positivity and monotonicity of the first `len` terms (bounded by
    /// the family's safe domain).
    pub fn probe(&self, len: u64) -> Result<()> {
        let len = match self.safe_limit() {
            Some(limit) => len.min(limit),
            None => len,
        };
        let mut prev = f64::INFINITY;
        for n in 1..=len {
            let m = self.ln_mu(n)?;
            if m == f64::NEG_INFINITY || m.is_nan() || m > prev {
                return Err(Error::Monotonicity { n, value: m.exp() });
            }
            prev = m;
        }
        Ok(())
    }

    /// Last index at which `mu_n` is a normal positive `f64`, if bounded.
    fn safe_limit(&self) -> Option<u64> {
        match &self.inner.family {
            Family::Geometric { r } => Some((f64::MIN_POSITIVE.ln() / r.ln()).floor() as u64),
            Family::Explicit { values, .. } => Some(values.len() as u64),
            Family::BlockAveraged { horizon, .. } => Some(*horizon),
            Family::Scaled { inner, .. } => inner.safe_limit(),
            Family::Dilated { source, k } => source.safe_limit().map(|l| l.saturating_mul(*k)),
            Family::Sum(a, b) => match (a.safe_limit(), b.safe_limit()) {
                (Some(x), Some(y)) => Some(x.max(y)),
                _ => None,
            },
            _ => None,
        }
    }

    pub fn mu(&self, n: u64) -> Result<f64> {
        self.check_horizon(n)?;
        self.mu_unbounded(n)
    }

    /// `ln mu_n`, finite even where `mu_n` itself underflows.
    pub fn ln_mu(&self, n: u64) -> Result<f64> {
        self.check_horizon(n)?;
        self.ln_mu_unbounded(n)
    }

    /// Averaged sequences are only published up to their horizon, although
    /// their block values exist everywhere.
    fn check_horizon(&self, n: u64) -> Result<()> {
        match &self.inner.family {
            Family::BlockAveraged { horizon, .. } if n > *horizon => {
                Err(Error::HorizonExceeded { horizon: *horizon, n })
            }
            _ => Ok(()),
        }
    }

    fn mu_unbounded(&self, n: u64) -> Result<f64> {
        if n == 0 {
            return Err(Error::Domain("eigenvalue index must be >= 1".into()));
        }
        let value = match &self.inner.family {
            Family::Harmonic => 1.0 / n as f64,
            Family::Power { alpha } => (n as f64).powf(*alpha),
            Family::PowLog { alpha, shift } => {
                let x = (n + shift) as f64;
                x.ln().powf(*alpha) / x
            }
            Family::Geometric { r } => r.powf(n as f64),
            Family::LogStep => (1.0 / n as f64).ln_1p(),
            Family::Aq { q } => aq_block_value(*q, aq_block_of_index(*q, n)).0,
            Family::Scaled { c, inner } => c * inner.mu(n)?,
            Family::Sum(a, b) => a.mu(n)? + b.mu(n)?,
            Family::Explicit { values, .. } => *values
                .get(n as usize - 1)
                .ok_or(Error::BeyondList { n, len: values.len() as u64 })?,
            Family::BlockAveraged { source, k, .. } => {
                if n == 1 {
                    source.mu(1)?
                } else {
                    let (lo, hi) = k_block(*k, n)?;
                    source.block_mass(lo, hi)? / (hi - lo) as f64
                }
            }
            Family::Dilated { source, k } => source.mu((n - 1) / k + 1)? / *k as f64,
        };
        if !(value > 0.0) || !value.is_finite() {
            return Err(self.too_large(Index::At(n)));
        }
        Ok(value)
    }

    fn ln_mu_unbounded(&self, n: u64) -> Result<f64> {
        if n == 0 {
            return Err(Error::Domain("eigenvalue index must be >= 1".into()));
        }
        match &self.inner.family {
            Family::Geometric { r } => Ok(n as f64 * r.ln()),
            Family::Aq { q } => Ok(aq_block_value(*q, aq_block_of_index(*q, n)).1),
            Family::Scaled { c, inner } => Ok(c.ln() + inner.ln_mu(n)?),
            Family::Sum(a, b) => Ok(log_add_exp(a.ln_mu(n)?, b.ln_mu(n)?)),
            Family::BlockAveraged { source, k, .. } => {
                if n == 1 {
                    return source.ln_mu(1);
                }
                let (lo, hi) = k_block(*k, n)?;
                Ok(source.ln_block_mass(lo, hi)? - ((hi - lo) as f64).ln())
            }
            Family::Dilated { source, k } => Ok(source.ln_mu((n - 1) / k + 1)? - (*k as f64).ln()),
            _ => Ok(self.mu_unbounded(n)?.ln()),
        }
    }

    /// `sum_{lo < j <= hi} mu_j`.
    fn block_mass(&self, lo: u64, hi: u64) -> Result<f64> {
        match self.summability().class {
            SummabilityClass::Summable => Ok(self.tail(Index::At(lo))? - self.tail(Index::At(hi))?),
            SummabilityClass::NonSummable => Ok(self.sigma(hi)? - self.sigma(lo)?),
            SummabilityClass::Undetermined => {
                Ok(crate::sum::neumaier((lo + 1..=hi).map(|j| self.mu(j).unwrap_or(0.0))))
            }
        }
    }

    fn ln_block_mass(&self, lo: u64, hi: u64) -> Result<f64> {
        match self.summability().class {
            SummabilityClass::Summable => {
                let a = self.ln_tail(Index::At(lo))?;
                let b = self.ln_tail(Index::At(hi))?;
                Ok(a + (-(b - a).exp_m1()).ln())
            }
            _ => Ok(self.block_mass(lo, hi)?.ln()),
        }
    }

    pub fn summability(&self) -> SummabilityInfo {
        *self.inner.summability.get_or_init(|| self.compute_summability())
    }

    fn compute_summability(&self) -> SummabilityInfo {
        match &self.inner.family {
            Family::Harmonic | Family::LogStep | Family::Aq { .. } => SummabilityInfo::non_summable(),
            Family::Power { .. } | Family::PowLog { .. } => {
                let (profile, shift) = self.profile().expect("analytic family");
                if !profile.summable() {
                    return SummabilityInfo::non_summable();
                }
                let mut acc = NeumaierSum::new();
                for n in 1..=TRACE_CUTOFF {
                    acc.add(self.mu(n).expect("analytic family in safe domain"));
                }
                let x = (TRACE_CUTOFF + shift) as f64;
                acc.add(profile.ln_tail(x.ln()).exp());
                SummabilityInfo::summable(acc.value(), profile.bracket_width(x))
            }
            Family::Geometric { r } => SummabilityInfo::summable(r / (1.0 - r), 0.0),
            Family::Scaled { c, inner } => {
                let info = inner.summability();
                SummabilityInfo {
                    class: info.class,
                    trace: info.trace.map(|t| c * t),
                    trace_error_bound: c * info.trace_error_bound,
                }
            }
            Family::Sum(a, b) => {
                let (ia, ib) = (a.summability(), b.summability());
                match (ia.class, ib.class) {
                    (SummabilityClass::NonSummable, _) | (_, SummabilityClass::NonSummable) => {
                        SummabilityInfo::non_summable()
                    }
                    (SummabilityClass::Summable, SummabilityClass::Summable) => SummabilityInfo::summable(
                        ia.trace.unwrap_or(0.0) + ib.trace.unwrap_or(0.0),
                        ia.trace_error_bound + ib.trace_error_bound,
                    ),
                    _ => SummabilityInfo::undetermined(),
                }
            }
            Family::Explicit { class, .. } => match *class {
                DeclaredClass::Summable { trace } => SummabilityInfo::summable(trace, 0.0),
                DeclaredClass::NonSummable => SummabilityInfo::non_summable(),
                DeclaredClass::Undetermined => SummabilityInfo::undetermined(),
            },
            Family::BlockAveraged { source, .. } | Family::Dilated { source, .. } => source.summability(),
        }
    }

    fn profile(&self) -> Option<(Profile, u64)> {
        match self.inner.family {
            Family::Harmonic => Some((Profile::Power { beta: -1.0 }, 0)),
            Family::Power { alpha } => Some((Profile::Power { beta: alpha }, 0)),
            Family::PowLog { alpha, shift } => Some((Profile::PowLog { alpha }, shift)),
            _ => None,
        }
    }

    fn anchor(&self) -> Result<&Anchor> {
        let anchor = self.inner.anchor.get_or_init(|| {
            let (profile, shift) = self.profile().expect("anchor requested for analytic family");
            let x = (EM_ANCHOR + shift) as f64;
            if profile.summable() {
                let mut tails = vec![0.0; EM_ANCHOR as usize + 1];
                let mut acc = NeumaierSum::starting_at(profile.ln_tail(x.ln()).exp());
                tails[EM_ANCHOR as usize] = acc.value();
                for n in (0..EM_ANCHOR).rev() {
                    acc.add(self.mu(n + 1)?);
                    tails[n as usize] = acc.value();
                }
                Ok(Anchor::Convergent { tails })
            } else {
                let direct = self.direct_sigma(EM_ANCHOR)?;
                Ok(Anchor::Divergent { constant: direct - profile.sum_profile(x.ln()) })
            }
        });
        anchor.as_ref().map_err(Clone::clone)
    }

    fn direct_sigma(&self, n: u64) -> Result<f64> {
        self.inner.table.sigma_with(n, |j| self.mu(j))
    }

    /// Cache backing the term-by-term partial sums.
    pub fn table(&self) -> &PartialSumTable {
        &self.inner.table
    }

    pub fn sigma(&self, n: u64) -> Result<f64> {
        self.sigma_at(Index::At(n))
    }

    pub fn sigma_pow2(&self, k: u32) -> Result<f64> {
        self.sigma_at(Index::Pow2(k))
    }

    pub fn sigma_at(&self, idx: Index) -> Result<f64> {
        let idx = idx.normalize();
        if idx == Index::At(0) {
            return Ok(0.0);
        }
        match &self.inner.family {
            Family::Harmonic | Family::Power { .. } | Family::PowLog { .. } => match idx {
                Index::At(n) if n <= DIRECT_LIMIT => self.direct_sigma(n),
                _ => {
                    let (profile, shift) = self.profile().expect("analytic family");
                    let value = match self.anchor()? {
                        Anchor::Divergent { constant } => constant + profile.sum_profile(idx.ln_shifted(shift)),
                        Anchor::Convergent { .. } => {
                            self.summability().trace.expect("summable") - self.tail(idx)?
                        }
                    };
                    if value.is_finite() {
                        Ok(value)
                    } else {
                        Err(Error::Overflow(format!("sigma of {} at {idx}", self.descriptor())))
                    }
                }
            },
            Family::Geometric { r } => {
                let n = match idx {
                    Index::At(n) => n as f64,
                    Index::Pow2(k) => (k as f64).exp2(),
                };
                Ok(r / (1.0 - r) * -(n * r.ln()).exp_m1())
            }
            Family::LogStep => Ok(match idx {
                Index::At(n) => (n as f64).ln() + (1.0 / n as f64).ln_1p(),
                Index::Pow2(k) => k as f64 * std::f64::consts::LN_2 + (-(k as f64)).exp2().ln_1p(),
            }),
            Family::Aq { q } => aq_sigma(*q, idx),
            Family::Scaled { c, inner } => Ok(c * inner.sigma_at(idx)?),
            Family::Sum(a, b) => Ok(a.sigma_at(idx)? + b.sigma_at(idx)?),
            Family::Explicit { values, .. } => match idx {
                Index::At(n) if n <= values.len() as u64 => self.direct_sigma(n),
                Index::At(n) => Err(Error::BeyondList { n, len: values.len() as u64 }),
                Index::Pow2(_) => Err(self.too_large(idx)),
            },
            Family::BlockAveraged { source, k, .. } => {
                let Index::At(n) = idx else { return Err(self.too_large(idx)) };
                if n == 1 {
                    return self.mu(1);
                }
                let (lo, _) = k_block(*k, n)?;
                Ok(source.sigma(lo)? + (n - lo) as f64 * self.mu_unbounded(n)?)
            }
            Family::Dilated { source, k } => {
                let Index::At(n) = idx else { return Err(self.too_large(idx)) };
                let m = (n - 1) / k + 1;
                let j = n - k * (m - 1);
                Ok(source.sigma(m - 1)? + j as f64 * self.mu_unbounded(n)?)
            }
        }
    }

    /// `sum_{j > n} mu_j` for summable sequences.
    fn tail(&self, idx: Index) -> Result<f64> {
        let idx = idx.normalize();
        match &self.inner.family {
            Family::Explicit { values, class: DeclaredClass::Summable { trace } } => match idx {
                Index::At(n) if n <= values.len() as u64 => Ok((trace - self.direct_sigma(n)?).max(0.0)),
                Index::At(n) => Err(Error::BeyondList { n, len: values.len() as u64 }),
                Index::Pow2(_) => Err(self.too_large(idx)),
            },
            Family::Scaled { c, inner } => Ok(c * inner.tail(idx)?),
            Family::Sum(a, b) => Ok(a.tail(idx)? + b.tail(idx)?),
            Family::Power { .. } | Family::PowLog { .. } => match idx {
                Index::At(n) if n <= EM_ANCHOR => match self.anchor()? {
                    Anchor::Convergent { tails } => Ok(tails[n as usize]),
                    Anchor::Divergent { .. } => Err(self.not_summable()),
                },
                _ => Ok(self.ln_tail(idx)?.exp()),
            },
            Family::BlockAveraged { source, k, .. } => {
                let Index::At(n) = idx else { return Err(self.too_large(idx)) };
                if n <= 1 {
                    return source.tail(idx);
                }
                let (_, hi) = k_block(*k, n)?;
                Ok(source.tail(Index::At(hi))? + (hi - n) as f64 * self.mu_unbounded(n)?)
            }
            Family::Dilated { source, k } => {
                let Index::At(n) = idx else { return Err(self.too_large(idx)) };
                if n == 0 {
                    return source.tail(idx);
                }
                let m = (n - 1) / k + 1;
                let j = n - k * (m - 1);
                Ok(source.tail(Index::At(m))? + (k - j) as f64 * self.mu_unbounded(n)?)
            }
            _ => Ok(self.ln_tail(idx)?.exp()),
        }
    }

    fn not_summable(&self) -> Error {
        Error::Domain(format!("{} is not summable; it has no tail", self.descriptor()))
    }

    /// `ln sum_{j > n} mu_j` for summable sequences; `-inf` when the tail is
    /// exactly zero.
    pub fn ln_tail(&self, idx: Index) -> Result<f64> {
        let idx = idx.normalize();
        if self.summability().class != SummabilityClass::Summable {
            return Err(self.not_summable());
        }
        match &self.inner.family {
            Family::Geometric { r } => {
                let n = match idx {
                    Index::At(n) => n as f64,
                    Index::Pow2(k) => (k as f64).exp2(),
                };
                Ok((n + 1.0) * r.ln() - (1.0 - r).ln())
            }
            Family::Power { .. } | Family::PowLog { .. } => match idx {
                Index::At(n) if n <= EM_ANCHOR => Ok(self.tail(idx)?.ln()),
                _ => {
                    let (profile, shift) = self.profile().expect("analytic family");
                    Ok(profile.ln_tail(idx.ln_shifted(shift)))
                }
            },
            Family::Scaled { c, inner } => Ok(c.ln() + inner.ln_tail(idx)?),
            Family::Sum(a, b) => Ok(log_add_exp(a.ln_tail(idx)?, b.ln_tail(idx)?)),
            Family::BlockAveraged { source, k, .. } => {
                let Index::At(n) = idx else { return Err(self.too_large(idx)) };
                if n <= 1 {
                    return source.ln_tail(idx);
                }
                let (_, hi) = k_block(*k, n)?;
                let rest = source.ln_tail(Index::At(hi))?;
                if hi == n {
                    return Ok(rest);
                }
                Ok(log_add_exp(rest, ((hi - n) as f64).ln() + self.ln_mu_unbounded(n)?))
            }
            Family::Dilated { source, k } => {
                let Index::At(n) = idx else { return Err(self.too_large(idx)) };
                if n == 0 {
                    return source.ln_tail(idx);
                }
                let m = (n - 1) / k + 1;
                let j = n - k * (m - 1);
                let rest = source.ln_tail(Index::At(m))?;
                if j == *k {
                    return Ok(rest);
                }
                Ok(log_add_exp(rest, ((k - j) as f64).ln() + self.ln_mu_unbounded(n)?))
            }
            _ => Ok(self.tail(idx)?.ln()),
        }
    }

    pub fn trace_value(&self) -> SummabilityInfo {
        self.summability()
    }

    /// Integral sequence `S_n`: `sigma_n` for non-summable sequences and
    /// `sigma_n - tr` (evaluated as minus the tail) for summable ones.
    pub fn integral_at(&self, idx: Index) -> Result<f64> {
        match self.summability().class {
            SummabilityClass::NonSummable => self.sigma_at(idx),
            SummabilityClass::Summable => Ok(-self.tail(idx)?),
            SummabilityClass::Undetermined => Err(Error::UndeterminedSummability(self.descriptor())),
        }
    }

    pub fn integral(&self, n: u64) -> Result<f64> {
        self.integral_at(Index::At(n))
    }

    pub fn integral_pow2(&self, k: u32) -> Result<f64> {
        self.integral_at(Index::Pow2(k))
    }

    pub fn sigma_and_integral(&self, n: u64) -> Result<PartialSums> {
        let sigma = self.sigma(n)?;
        let integral = match self.integral(n) {
            Ok(s) => Some(s),
            Err(Error::UndeterminedSummability(_)) => None,
            Err(e) => return Err(e),
        };
        Ok(PartialSums { sigma, integral })
    }

    /// `S_num / S_den`, formed in the log domain for summable sequences so
    /// that underflowing tails still give a finite ratio.
    pub fn integral_ratio(&self, num: Index, den: Index) -> Result<f64> {
        cross_ratio(self, num, self, den)
    }

    /// Partial-sum rows at the requested indices.
    pub fn partial_sum_rows(&self, indices: &[u64]) -> Result<Vec<PartialSumRow>> {
        indices
            .iter()
            .map(|&n| {
                let p = self.sigma_and_integral(n)?;
                Ok(PartialSumRow { n, sigma: p.sigma, integral: p.integral })
            })
            .collect()
    }
}

/// `S_i(A) / S_j(T)`. Returns `+inf` when `A` is not summable but `T` is.
pub fn cross_ratio(a: &SpectralSequence, ia: Index, t: &SpectralSequence, it: Index) -> Result<f64> {
    use SummabilityClass::*;
    match (a.summability().class, t.summability().class) {
        (Undetermined, _) => Err(Error::UndeterminedSummability(a.descriptor())),
        (_, Undetermined) => Err(Error::UndeterminedSummability(t.descriptor())),
        (NonSummable, Summable) => Ok(f64::INFINITY),
        (Summable, Summable) => {
            let den = t.ln_tail(it)?;
            if den == f64::NEG_INFINITY {
                return Err(Error::DegenerateIntegral(it.to_string()));
            }
            Ok((a.ln_tail(ia)? - den).exp())
        }
        (_, NonSummable) => {
            let den = t.sigma_at(it)?;
            if den == 0.0 {
                return Err(Error::DegenerateIntegral(it.to_string()));
            }
            Ok(a.integral_at(ia)? / den)
        }
    }
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `(k^{L-1}, k^L]` containing `n >= 2`.
fn k_block(k: u64, n: u64) -> Result<(u64, u64)> {
    let mut hi = k;
    while hi < n {
        hi = hi
            .checked_mul(k)
            .ok_or_else(|| Error::Overflow(format!("block of {n} for k = {k}")))?;
    }
    Ok((hi / k, hi))
}

/// Smallest shift `s >= 0` such that `(ln(n + s))^alpha / (n + s)` is finite,
/// positive and non-increasing from `n = 1`.
fn powlog_shift(alpha: f64) -> Result<u64> {
    if alpha == 0.0 {
        return Ok(0);
    }
    let g = |x: f64| x.ln().powf(alpha) / x;
    // the profile increases up to e^alpha and decreases after it
    let mut x: u64 = 2;
    while g(x as f64) < g((x + 1) as f64) {
        x += 1;
        if x > 1 << 40 {
            return Err(Error::Domain(format!("powlog exponent {alpha} needs an excessive shift")));
        }
    }
    Ok(x - 1)
}

/// Block `k` of the aq family containing eigenvalue index `n`
/// (`n` in `(2^{n_k}, 2^{n_{k+1}}]`, with indices 1 and 2 padded into block 0).
fn aq_block_of_index(q: u32, n: u64) -> u32 {
    if n <= 4 {
        return 0;
    }
    // ceil(log2 n)
    let c = 64 - (n - 1).leading_zeros();
    example4::block_of(q, c as u64)
}

/// `(lambda_k, ln lambda_k)` with `lambda_k = (n_{k+1} - n_k) / (2^{n_{k+1}} - 2^{n_k})`.
fn aq_block_value(q: u32, k: u32) -> (f64, f64) {
    let lo = example4::block_edge(q, k) as f64;
    let hi = example4::block_edge(q, k + 1) as f64;
    let ln = (hi - lo).ln() - hi * std::f64::consts::LN_2 - (-((lo - hi).exp2())).ln_1p();
    let value = (hi - lo) * (-hi).exp2() / (1.0 - (lo - hi).exp2());
    (value, ln)
}

fn aq_sigma(q: u32, idx: Index) -> Result<f64> {
    let lead = aq_block_value(q, 0).0;
    match idx {
        Index::At(0) => Ok(0.0),
        Index::At(n) if n <= 2 => Ok(n as f64 * lead),
        Index::At(n) => {
            let k = aq_block_of_index(q, n);
            let (value, _) = aq_block_value(q, k);
            let edge = example4::block_edge(q, k);
            // sigma_{2^{n_k}} summed from index 3 is n_k - 1
            let start = 2f64.powi(edge as i32);
            let within = (n as f64 - start) * value;
            Ok(2.0 * lead + (edge as f64 - 1.0) + within)
        }
        Index::Pow2(m) => Ok(2.0 * lead + example4::aq_sigma_pow2(q, m as u64)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn harmonic_values() {
        let h = SpectralSequence::harmonic();
        assert_eq!(h.mu(1).unwrap(), 1.0);
        assert_eq!(h.mu(4).unwrap(), 0.25);
        let p = h.sigma_and_integral(4).unwrap();
        assert!(close(p.sigma, 25.0 / 12.0, 1e-15));
        assert_eq!(p.integral, Some(p.sigma));
    }

    #[test]
    fn power_and_geometric_values() {
        let p = SpectralSequence::power(-2.0).unwrap();
        assert!(close(p.mu(3).unwrap(), 1.0 / 9.0, 1e-15));
        let g = SpectralSequence::geometric(0.5).unwrap();
        assert_eq!(g.mu(3).unwrap(), 0.125);
        assert_eq!(g.integral(0).unwrap(), -1.0);
        assert!(close(g.integral(3).unwrap(), -0.125, 1e-15));
        assert!(close(g.sigma(3).unwrap(), 0.875, 1e-15));
    }

    #[test]
    fn aq_values() {
        let a = SpectralSequence::aq(1).unwrap();
        assert_eq!(a.mu(3).unwrap(), 0.5);
        assert_eq!(a.mu(1).unwrap(), 0.5);
        assert!(close(a.mu(5).unwrap(), 1.0 / 6.0, 1e-15));
        assert!(close(a.mu(16).unwrap(), 1.0 / 6.0, 1e-15));
        assert!(close(a.mu(17).unwrap(), 4.0 / 240.0, 1e-15));
        // closed-form sigma agrees with direct summation over the padded indices
        let direct: f64 = crate::sum::neumaier((1..=300).map(|n| a.mu(n).unwrap()));
        assert!(close(a.sigma(300).unwrap(), direct, 1e-14));
        assert!(close(a.sigma_pow2(4).unwrap(), a.sigma(16).unwrap(), 1e-15));
    }

    #[test]
    fn power_trace_is_zeta_two() {
        let info = SpectralSequence::power(-2.0).unwrap().summability();
        assert_eq!(info.class, SummabilityClass::Summable);
        let zeta2 = std::f64::consts::PI.powi(2) / 6.0;
        assert!(info.trace_error_bound <= 1e-8);
        assert!((info.trace.unwrap() - zeta2).abs() <= info.trace_error_bound);
        assert!((info.trace.unwrap() - zeta2).abs() < 1e-14);
    }

    #[test]
    fn summability_classes() {
        use SummabilityClass::*;
        let cases: Vec<(SpectralSequence, SummabilityClass)> = vec![
            (SpectralSequence::harmonic(), NonSummable),
            (SpectralSequence::logstep(), NonSummable),
            (SpectralSequence::aq(2).unwrap(), NonSummable),
            (SpectralSequence::power(-0.5).unwrap(), NonSummable),
            (SpectralSequence::power(-1.5).unwrap(), Summable),
            (SpectralSequence::powlog(-1.0).unwrap(), NonSummable),
            (SpectralSequence::powlog(-2.0).unwrap(), Summable),
            (SpectralSequence::powlog(1.0).unwrap(), NonSummable),
        ];
        for (seq, class) in cases {
            assert_eq!(seq.summability().class, class, "{}", seq.descriptor());
        }
    }

    #[test]
    fn powlog_shift_makes_prefix_monotone() {
        assert_eq!(powlog_shift(0.0).unwrap(), 0);
        assert_eq!(powlog_shift(1.0).unwrap(), 2);
        assert_eq!(powlog_shift(-2.0).unwrap(), 1);
        let s = SpectralSequence::powlog(3.0).unwrap();
        s.probe(100_000).unwrap();
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(SpectralSequence::geometric(1.0), Err(Error::Domain(_))));
        assert!(matches!(SpectralSequence::geometric(0.0), Err(Error::Domain(_))));
        assert!(matches!(SpectralSequence::power(0.5), Err(Error::Domain(_))));
        assert!(matches!(SpectralSequence::aq(0), Err(Error::Domain(_))));
        let h = SpectralSequence::harmonic();
        assert!(matches!(SpectralSequence::scaled(-1.0, h), Err(Error::Domain(_))));
    }

    #[test]
    fn geometric_underflow_is_reported() {
        let g = SpectralSequence::geometric(0.5).unwrap();
        assert!(matches!(g.mu(2000), Err(Error::IndexTooLarge { .. })));
        assert_eq!(g.ln_mu(2000).unwrap(), 2000.0 * 0.5f64.ln());
        // the ratio of underflowed tails is still exact
        let r = g.integral_ratio(Index::At(4000), Index::At(2000)).unwrap();
        assert_eq!(r, 0.0);
        let r = g.integral_ratio(Index::At(8), Index::At(4)).unwrap();
        assert!(close(r, 0.0625, 1e-14));
    }

    #[test]
    fn tail_is_continuous_across_expansion_switch() {
        for seq in [SpectralSequence::power(-2.0).unwrap(), SpectralSequence::powlog(-2.0).unwrap()] {
            for n in [EM_ANCHOR - 1, EM_ANCHOR, EM_ANCHOR + 1, 5000] {
                let d = seq.integral(n + 1).unwrap() - seq.integral(n).unwrap();
                assert!(close(d, seq.mu(n + 1).unwrap(), 1e-9), "{} at {n}", seq.descriptor());
            }
        }
    }

    #[test]
    fn sigma_is_continuous_across_direct_limit() {
        for seq in [SpectralSequence::harmonic(), SpectralSequence::powlog(1.0).unwrap()] {
            let below = seq.sigma(DIRECT_LIMIT).unwrap();
            let above = seq.sigma(DIRECT_LIMIT + 1).unwrap();
            let mu = seq.mu(DIRECT_LIMIT + 1).unwrap();
            assert!(((above - below) - mu).abs() < 1e-12 * below, "{}", seq.descriptor());
        }
    }

    #[test]
    fn huge_dyadic_indices() {
        let h = SpectralSequence::harmonic();
        let gamma = 0.577_215_664_901_532_9;
        let v = h.sigma_pow2(5000).unwrap();
        assert!(close(v, 5000.0 * std::f64::consts::LN_2 + gamma, 1e-14));
        let l = SpectralSequence::logstep();
        assert!(close(l.integral_pow2(3000).unwrap(), 3000.0 * std::f64::consts::LN_2, 1e-15));
        let p = SpectralSequence::power(-2.0).unwrap();
        assert_eq!(p.integral_pow2(3000).unwrap(), 0.0);
        let r = p.integral_ratio(Index::Pow2(3001), Index::Pow2(3000)).unwrap();
        assert!(close(r, 0.5, 1e-12));
    }

    #[test]
    fn explicit_lists() {
        let e = SpectralSequence::explicit(vec![3.0, 2.0, 1.0], DeclaredClass::Summable { trace: 7.0 }).unwrap();
        assert_eq!(e.integral(0).unwrap(), -7.0);
        assert_eq!(e.integral(3).unwrap(), -1.0);
        assert!(matches!(e.mu(4), Err(Error::BeyondList { n: 4, len: 3 })));
        let u = SpectralSequence::explicit(vec![1.0, 0.5], DeclaredClass::Undetermined).unwrap();
        let p = u.sigma_and_integral(2).unwrap();
        assert_eq!(p.sigma, 1.5);
        assert_eq!(p.integral, None);
        assert!(SpectralSequence::explicit(vec![1.0, 2.0], DeclaredClass::NonSummable).is_err());
        assert!(SpectralSequence::explicit(vec![1.0, 1.0], DeclaredClass::Summable { trace: 1.0 }).is_err());
    }

    #[test]
    fn scaled_and_sum_compose() {
        let h = SpectralSequence::harmonic();
        let s = SpectralSequence::scaled(2.0, h.clone()).unwrap();
        assert_eq!(s.sigma(10).unwrap(), 2.0 * h.sigma(10).unwrap());
        let p = SpectralSequence::power(-2.0).unwrap();
        let sum = SpectralSequence::sum(h.clone(), p.clone());
        assert_eq!(sum.summability().class, SummabilityClass::NonSummable);
        assert!(close(sum.mu(2).unwrap(), 0.75, 1e-15));
        assert_eq!(sum.sigma(7).unwrap(), h.sigma(7).unwrap() + p.sigma(7).unwrap());
    }
}
