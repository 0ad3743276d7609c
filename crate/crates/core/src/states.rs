//! Finite-window averaging states on sequences over the positive integers,
//! the odd-part/exponent bijection, and structured subsets used to probe
//! ergodicity.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sum::NeumaierSum;

/// `eta(m, n) = (2m - 1) 2^{n-1}`.
pub fn eta(m: u64, n: u32) -> Result<u64> {
    if m < 1 || n < 1 {
        return Err(Error::Domain(format!("eta needs m, n >= 1, got ({m}, {n})")));
    }
    let odd = m
        .checked_mul(2)
        .map(|x| x - 1)
        .ok_or_else(|| Error::Overflow(format!("2 * {m} - 1")))?;
    let shift = n - 1;
    if shift >= 64 || odd.leading_zeros() < shift {
        return Err(Error::Overflow(format!("eta({m}, {n})")));
    }
    Ok(odd << shift)
}

/// Inverse of [`eta`].
pub fn eta_inv(j: u64) -> Result<(u64, u32)> {
    if j == 0 {
        return Err(Error::Domain("eta_inv needs j >= 1".into()));
    }
    let tz = j.trailing_zeros();
    Ok(((j >> tz) / 2 + 1, tz + 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowMode {
    Translation,
    Dyadic,
}

impl std::str::FromStr for WindowMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "translation" => Ok(WindowMode::Translation),
            "dyadic" => Ok(WindowMode::Dyadic),
            other => Err(Error::InvalidWindow(format!("unknown mode `{other}` (translation|dyadic)"))),
        }
    }
}

/// Average over `i = k+1..=k+n` of `a_i` (translation) or of
/// `a_{eta(m, i)}` (dyadic).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct WindowState {
    pub mode: WindowMode,
    pub k: u64,
    pub m: u64,
    pub n: u64,
}

impl WindowState {
    pub fn translation(k: u64, n: u64) -> Result<Self> {
        let w = Self { mode: WindowMode::Translation, k, m: 1, n };
        w.validate()?;
        Ok(w)
    }

    pub fn dyadic(k: u64, m: u64, n: u64) -> Result<Self> {
        let w = Self { mode: WindowMode::Dyadic, k, m, n };
        w.validate()?;
        Ok(w)
    }

    /// Window `((2r)^2, (2s)^2]` of the translation states.
    pub fn square(r: u64, s: u64) -> Result<Self> {
        if r >= s {
            return Err(Error::InvalidWindow(format!("square window needs r < s, got r = {r}, s = {s}")));
        }
        let lo = (2 * r).checked_mul(2 * r).ok_or_else(|| Error::Overflow(format!("(2 * {r})^2")))?;
        let hi = (2 * s).checked_mul(2 * s).ok_or_else(|| Error::Overflow(format!("(2 * {s})^2")))?;
        Self::translation(lo, hi - lo)
    }

    fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::InvalidWindow("window length must be >= 1".into()));
        }
        let last = self
            .k
            .checked_add(self.n)
            .ok_or_else(|| Error::Overflow(format!("k + n = {} + {}", self.k, self.n)))?;
        if self.mode == WindowMode::Dyadic {
            let e = u32::try_from(last).map_err(|_| Error::Overflow(format!("2^{last}")))?;
            eta(self.m, e)?;
        }
        Ok(())
    }

    /// The `i`-th addressed index, `i` in `1..=n`.
    pub fn index(&self, i: u64) -> u64 {
        match self.mode {
            WindowMode::Translation => self.k + i,
            WindowMode::Dyadic => (2 * self.m - 1) << (self.k + i - 1),
        }
    }

    /// The window with `k + 1`: one translation step, or one doubling of
    /// every addressed index in dyadic mode.
    pub fn shifted(&self) -> Result<Self> {
        let w = Self { k: self.k + 1, ..*self };
        w.validate()?;
        Ok(w)
    }
}

/// A real sequence `a_1, a_2, ...`; indicator sequences additionally expose
/// exact membership so window means can be formed from integer counts.
pub trait Accessor: Sync {
    fn at(&self, n: u64) -> f64;

    fn indicator(&self, _n: u64) -> Option<bool> {
        None
    }
}

/// Wraps a closure as an [`Accessor`].
pub struct FnAccessor<F>(pub F);

impl<F: Fn(u64) -> f64 + Sync> Accessor for FnAccessor<F> {
    fn at(&self, n: u64) -> f64 {
        (self.0)(n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StateEstimate {
    pub mean: f64,
    pub count: u64,
    /// Number of members hit, for indicator sequences.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hits: Option<u64>,
    /// `max - min` of the prefix means over the final quarter of the window.
    pub oscillation: f64,
}

pub fn window_mean(a: &dyn Accessor, w: &WindowState) -> Result<StateEstimate> {
    w.validate()?;
    let n = w.n;
    let quarter_start = n - n / 4;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut track = |i: u64, prefix: f64| {
        if i >= quarter_start {
            lo = lo.min(prefix);
            hi = hi.max(prefix);
        }
    };
    if a.indicator(w.index(1)).is_some() {
        let mut hits = 0u64;
        for i in 1..=n {
            if a.indicator(w.index(i)) == Some(true) {
                hits += 1;
            }
            track(i, hits as f64 / i as f64);
        }
        return Ok(StateEstimate { mean: hits as f64 / n as f64, count: n, hits: Some(hits), oscillation: hi - lo });
    }
    let mut acc = NeumaierSum::new();
    for i in 1..=n {
        acc.add(a.at(w.index(i)));
        track(i, acc.value() / i as f64);
    }
    Ok(StateEstimate { mean: acc.value() / n as f64, count: n, hits: None, oscillation: hi - lo })
}

/// Closed integer interval `[lo, hi]`; empty when `hi + 1 == lo`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Interval {
    pub lo: u64,
    pub hi: u64,
}

impl Interval {
    pub fn new(lo: u64, hi: u64) -> Result<Self> {
        if lo < 1 || hi + 1 < lo {
            return Err(Error::InvalidWindow(format!("bad interval [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn len(&self) -> u64 {
        self.hi + 1 - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum StructuredSet {
    /// `union_i [(2i-1)^2, (2i)^2]`, both endpoints included
    Squares,
    /// `union_q (2^{2q-1}, 2^{2q}]`
    DyadicBlocks,
    /// Sorted disjoint closed intervals.
    Intervals { intervals: Vec<Interval> },
}

impl StructuredSet {
    pub fn intervals(intervals: Vec<Interval>) -> Result<Self> {
        for w in intervals.windows(2) {
            if w[1].lo <= w[0].hi {
                return Err(Error::InvalidWindow(format!(
                    "intervals [{}, {}] and [{}, {}] overlap or are unsorted",
                    w[0].lo, w[0].hi, w[1].lo, w[1].hi
                )));
            }
        }
        if intervals.iter().any(Interval::is_empty) {
            return Err(Error::InvalidWindow("empty interval in set".into()));
        }
        Ok(StructuredSet::Intervals { intervals })
    }

    /// `squares | dyadicblocks | intervals:file=<path>`
    pub fn parse(spec: &str) -> Result<Self> {
        match spec.trim() {
            "squares" => Ok(StructuredSet::Squares),
            "dyadicblocks" => Ok(StructuredSet::DyadicBlocks),
            other => match other.strip_prefix("intervals:file=") {
                Some(path) if !path.is_empty() => Self::load_intervals(Path::new(path)),
                _ => Err(Error::Parse { spec: other.into(), reason: "expected squares|dyadicblocks|intervals:file=<path>".into() }),
            },
        }
    }

    /// One `lo,hi` pair per line.
    pub fn load_intervals(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse_intervals(&text)
    }

    pub fn parse_intervals(text: &str) -> Result<Self> {
        let mut out = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = || Error::Parse { spec: format!("line {}", i + 1), reason: format!("expected `lo,hi`, got `{line}`") };
            let (lo, hi) = line.split_once(',').ok_or_else(bad)?;
            let lo = lo.trim().parse::<u64>().map_err(|_| bad())?;
            let hi = hi.trim().parse::<u64>().map_err(|_| bad())?;
            if hi < lo {
                return Err(bad());
            }
            out.push(Interval::new(lo, hi)?);
        }
        Self::intervals(out)
    }

    pub fn contains(&self, n: u64) -> bool {
        if n == 0 {
            return false;
        }
        match self {
            StructuredSet::Squares => {
                let s = n.isqrt();
                s % 2 == 1 || s * s == n
            }
            StructuredSet::DyadicBlocks => {
                // n lies in (2^{c-1}, 2^c] with c = bit length of n - 1
                let c = 64 - (n - 1).leading_zeros();
                c >= 2 && c.is_multiple_of(2)
            }
            StructuredSet::Intervals { intervals } => {
                let i = intervals.partition_point(|iv| iv.hi < n);
                intervals.get(i).is_some_and(|iv| iv.lo <= n)
            }
        }
    }
}

impl Accessor for StructuredSet {
    fn at(&self, n: u64) -> f64 {
        if self.contains(n) {
            1.0
        } else {
            0.0
        }
    }

    fn indicator(&self, n: u64) -> Option<bool> {
        Some(self.contains(n))
    }
}

/// `(s + r + 1) / (2(s + r))` in lowest terms.
pub fn square_window_closed_form(r: u64, s: u64) -> (u64, u64) {
    let (num, den) = (s + r + 1, 2 * (s + r));
    let g = gcd(num, den);
    (num / g, den / g)
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeRow {
    pub window: WindowState,
    pub estimate: StateEstimate,
    /// `|mean(chi) - mean(shifted chi)|`
    pub invariance_defect: f64,
    /// Exact value predicted for square windows on the squares set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closed_form: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closed_form_exact: Option<bool>,
}

/// `(r, s)` with `k = (2r)^2` and `k + n = (2s)^2`, if the window has that shape.
pub fn square_parameters(w: &WindowState) -> Option<(u64, u64)> {
    if w.mode != WindowMode::Translation {
        return None;
    }
    let half_root = |x: u64| {
        let s = x.isqrt();
        (s * s == x && s.is_multiple_of(2)).then_some(s / 2)
    };
    Some((half_root(w.k)?, half_root(w.k + w.n)?)).filter(|(r, s)| r < s)
}

pub fn ergodicity_probe(set: &StructuredSet, windows: &[WindowState]) -> Result<Vec<ProbeRow>> {
    windows
        .iter()
        .map(|w| {
            let estimate = window_mean(set, w)?;
            let moved = window_mean(set, &w.shifted()?)?;
            let (closed_form, closed_form_exact) = match (set, square_parameters(w)) {
                (StructuredSet::Squares, Some((r, s))) => {
                    let (num, den) = square_window_closed_form(r, s);
                    let hits = estimate.hits.expect("indicator set");
                    (Some(num as f64 / den as f64), Some(hits as u128 * den as u128 == num as u128 * w.n as u128))
                }
                _ => (None, None),
            };
            Ok(ProbeRow {
                window: *w,
                estimate,
                invariance_defect: (estimate.mean - moved.mean).abs(),
                closed_form,
                closed_form_exact,
            })
        })
        .collect()
}

/// Doubles the window length from `w` until consecutive means differ by less
/// than `tol`, or `max_steps` doublings have been made.
pub fn doubling_sweep(a: &dyn Accessor, w: &WindowState, tol: f64, max_steps: u32) -> Result<Vec<StateEstimate>> {
    let mut out = vec![window_mean(a, w)?];
    let mut cur = *w;
    for _ in 0..max_steps {
        let n = cur.n.checked_mul(2).ok_or_else(|| Error::Overflow(format!("2 * {}", cur.n)))?;
        cur = WindowState { n, ..cur };
        cur.validate()?;
        let est = window_mean(a, &cur)?;
        let moved = (est.mean - out.last().expect("non-empty").mean).abs();
        out.push(est);
        if moved < tol {
            break;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquivalenceDefect {
    pub defect: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Translation windows `(k, n)` and `(l, p)` nearly agree when `k - l` and
/// `p - n` are small against the length.
pub fn window_equivalence_defect(w1: &WindowState, w2: &WindowState, a: &dyn Accessor) -> Result<EquivalenceDefect> {
    if w1.mode != WindowMode::Translation || w2.mode != WindowMode::Translation {
        return Err(Error::InvalidWindow("window equivalence needs two translation windows".into()));
    }
    let defect = (window_mean(a, w1)?.mean - window_mean(a, w2)?.mean).abs();
    let lo = w1.k.min(w2.k) + 1;
    let hi = (w1.k + w1.n).max(w2.k + w2.n);
    let sup = (lo..=hi).fold(0.0f64, |m, i| m.max(a.at(i).abs()));
    let shift = w1.k.abs_diff(w2.k) as f64;
    let stretch = w1.n.abs_diff(w2.n) as f64;
    let bound = sup * (2.0 * shift + 2.0 * stretch) / w1.n.min(w2.n) as f64;
    Ok(EquivalenceDefect { defect, bound, holds: defect <= bound + 1e-12 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplitCheck {
    pub residual: f64,
    pub holds: bool,
}

fn interval_mean(a: &dyn Accessor, iv: Interval) -> f64 {
    if iv.is_empty() {
        return 0.0;
    }
    if a.indicator(iv.lo).is_some() {
        let hits = (iv.lo..=iv.hi).filter(|&i| a.indicator(i) == Some(true)).count();
        return hits as f64 / iv.len() as f64;
    }
    crate::sum::neumaier((iv.lo..=iv.hi).map(|i| a.at(i))) / iv.len() as f64
}

/// `mean_I - sum |piece|/|I| mean_piece` for the partition `I = I0 + J + I1`.
pub fn interval_split_check(
    whole: Interval,
    parts: (Interval, Interval, Interval),
    a: &dyn Accessor,
) -> Result<SplitCheck> {
    let (i0, j, i1) = parts;
    let contiguous = i0.lo == whole.lo && j.lo == i0.hi + 1 && i1.lo == j.hi + 1 && i1.hi == whole.hi;
    if whole.is_empty() || !contiguous {
        return Err(Error::InvalidWindow(format!(
            "[{}, {}], [{}, {}], [{}, {}] do not partition [{}, {}] in order",
            i0.lo, i0.hi, j.lo, j.hi, i1.lo, i1.hi, whole.lo, whole.hi
        )));
    }
    let total = whole.len() as f64;
    let mut acc = NeumaierSum::new();
    for piece in [i0, j, i1] {
        acc.add(piece.len() as f64 / total * interval_mean(a, piece));
    }
    let residual = interval_mean(a, whole) - acc.value();
    let sup = (whole.lo..=whole.hi).fold(0.0f64, |m, i| m.max(a.at(i).abs()));
    Ok(SplitCheck { residual, holds: residual.abs() <= 1e-12 * sup.max(f64::MIN_POSITIVE) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eta_examples() {
        assert_eq!(eta(1, 1).unwrap(), 1);
        assert_eq!(eta(3, 2).unwrap(), 10);
        assert_eq!(eta_inv(12).unwrap(), (2, 3));
        assert!(eta(1, 65).is_err());
        assert!(eta(u64::MAX, 1).is_err());
        assert_eq!(eta(1, 64).unwrap(), 1 << 63);
        assert!(eta(2, 64).is_err());
    }

    #[test]
    fn membership() {
        let c = StructuredSet::Squares;
        assert!(c.contains(25) && !c.contains(24) && c.contains(16) && c.contains(1) && c.contains(4) && !c.contains(5));
        let a = StructuredSet::DyadicBlocks;
        assert!(a.contains(3) && a.contains(4) && !a.contains(5) && !a.contains(8) && a.contains(9));
        assert!(!a.contains(1) && !a.contains(2));
        let iv = StructuredSet::intervals(vec![Interval::new(10, 20).unwrap()]).unwrap();
        assert!(iv.contains(10) && iv.contains(20) && !iv.contains(21) && !iv.contains(9));
    }

    #[test]
    fn square_window_is_thirteen_twentyfourths() {
        let w = WindowState::square(2, 10).unwrap();
        assert_eq!((w.k, w.n), (16, 384));
        let e = window_mean(&StructuredSet::Squares, &w).unwrap();
        assert_eq!(e.hits, Some(208));
        assert_eq!(square_window_closed_form(2, 10), (13, 24));
        assert!((e.mean - 13.0 / 24.0).abs() < 1e-15);
    }

    #[test]
    fn window_basics() {
        let one = FnAccessor(|_| 1.0);
        let w = WindowState::dyadic(3, 5, 10).unwrap();
        assert_eq!(window_mean(&one, &w).unwrap().mean, 1.0);
        let alt = FnAccessor(|n| if n % 2 == 0 { 1.0 } else { -1.0 });
        assert_eq!(window_mean(&alt, &WindowState::translation(0, 1000).unwrap()).unwrap().mean, 0.0);
        let id = FnAccessor(|n| n as f64);
        assert_eq!(window_mean(&id, &WindowState::translation(6, 1).unwrap()).unwrap().mean, 7.0);
        assert!(WindowState::translation(0, 0).is_err());
        assert!(WindowState::dyadic(60, 2, 10).is_err());
    }

    #[test]
    fn dyadic_blocks_window_inside_one_block() {
        let p = 10;
        let top = 1u64 << (2 * p);
        let w = WindowState::translation(top - (1 << 18), 1 << 18).unwrap();
        let rows = ergodicity_probe(&StructuredSet::DyadicBlocks, &[w]).unwrap();
        assert_eq!(rows[0].estimate.mean, 1.0);
    }

    #[test]
    fn equivalence_and_split() {
        let c = StructuredSet::Squares;
        let d = window_equivalence_defect(
            &WindowState::translation(0, 1_000_000).unwrap(),
            &WindowState::translation(1, 1_000_000).unwrap(),
            &c,
        )
        .unwrap();
        assert!(d.holds && d.defect <= 4e-6);
        let one = FnAccessor(|_| 1.0);
        let d = window_equivalence_defect(
            &WindowState::translation(0, 1_000_000).unwrap(),
            &WindowState::translation(0, 1_001_000).unwrap(),
            &one,
        )
        .unwrap();
        assert_eq!(d.defect, 0.0);
        let dy = WindowState::dyadic(0, 1, 4).unwrap();
        assert!(window_equivalence_defect(&dy, &dy, &one).is_err());

        let iv = |lo, hi| Interval::new(lo, hi).unwrap();
        let s = interval_split_check(iv(1, 1000), (iv(1, 300), iv(301, 700), iv(701, 1000)), &c).unwrap();
        assert!(s.holds && s.residual.abs() <= 1e-12);
        let s = interval_split_check(iv(1, 1000), (iv(1, 300), iv(301, 300), iv(301, 1000)), &c).unwrap();
        assert!(s.holds);
        assert!(interval_split_check(iv(1, 1000), (iv(1, 300), iv(302, 700), iv(701, 1000)), &c).is_err());
    }

    #[test]
    fn interval_parsing() {
        let s = StructuredSet::parse_intervals("1,5\n# note\n8,9\n").unwrap();
        assert!(s.contains(5) && !s.contains(6) && s.contains(8));
        assert!(StructuredSet::parse_intervals("1,5\n4,9\n").is_err());
        assert!(StructuredSet::parse_intervals("5,1\n").is_err());
        assert!(StructuredSet::parse("circles").is_err());
    }

    #[test]
    fn sweep_stops_when_settled() {
        let rows = doubling_sweep(&StructuredSet::Squares, &WindowState::translation(0, 1000).unwrap(), 1e-3, 20).unwrap();
        assert!(rows.len() >= 2);
        let last = rows.len() - 1;
        assert!(last == 20 || (rows[last].mean - rows[last - 1].mean).abs() < 1e-3);
    }
}
