use std::sync::RwLock;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sum::NeumaierSum;

/// Dense prefix-sum cache: `sigma[n]` for `0 <= n < len`.
///
/// Extension continues the Neumaier accumulator from the last cached index,
/// so cached and fresh evaluations agree bit for bit. Readers share the lock;
/// extension takes it exclusively.
#[derive(Debug)]
pub struct PartialSumTable {
    inner: RwLock<Prefix>,
}

#[derive(Debug)]
struct Prefix {
    sigma: Vec<f64>,
    acc: NeumaierSum,
    last_mu: f64,
}

/// One row of a partial-sum report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PartialSumRow {
    pub n: u64,
    pub sigma: f64,
    pub integral: Option<f64>,
}

impl Default for PartialSumTable {
    fn default() -> Self {
        Self::new()
    }
}

impl PartialSumTable {
    pub fn new() -> Self {
        Self {
            inner: RwLock::new(Prefix {
                sigma: vec![0.0],
                acc: NeumaierSum::new(),
                last_mu: f64::INFINITY,
            }),
        }
    }

    /// Largest `n` whose `sigma_n` is cached.
    pub fn cached_upto(&self) -> u64 {
        let guard = self.inner.read().expect("partial-sum lock poisoned");
        guard.sigma.len() as u64 - 1
    }

    pub(crate) fn sigma_with<F>(&self, n: u64, mu: F) -> Result<f64>
    where
        F: Fn(u64) -> Result<f64>,
    {
        {
            let guard = self.inner.read().expect("partial-sum lock poisoned");
            if let Some(&s) = guard.sigma.get(n as usize) {
                return Ok(s);
            }
        }
        let mut guard = self.inner.write().expect("partial-sum lock poisoned");
        let start = guard.sigma.len() as u64;
        guard.sigma.reserve((n + 1 - start) as usize);
        for j in start..=n {
            let m = mu(j)?;
            if !(m > 0.0) || m > guard.last_mu {
                return Err(Error::Monotonicity { n: j, value: m });
            }
            guard.last_mu = m;
            guard.acc.add(m);
            let s = guard.acc.value();
            guard.sigma.push(s);
        }
        Ok(guard.sigma[n as usize])
    }

    /// Cached `(n, sigma_n)` pairs at powers of two.
    pub fn dyadic_entries(&self) -> Vec<(u64, f64)> {
        let guard = self.inner.read().expect("partial-sum lock poisoned");
        let len = guard.sigma.len() as u64;
        std::iter::successors(Some(1u64), |&n| n.checked_mul(2))
            .take_while(|&n| n < len)
            .map(|n| (n, guard.sigma[n as usize]))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extension_matches_fresh_summation() {
        let mu = |n: u64| Ok(1.0 / n as f64);
        let a = PartialSumTable::new();
        a.sigma_with(10, mu).unwrap();
        a.sigma_with(500, mu).unwrap();
        let b = PartialSumTable::new();
        assert_eq!(
            a.sigma_with(1000, mu).unwrap().to_bits(),
            b.sigma_with(1000, mu).unwrap().to_bits()
        );
        assert_eq!(a.cached_upto(), 1000);
        assert_eq!(a.dyadic_entries().len(), 10);
    }

    #[test]
    fn rejects_increasing_terms() {
        let t = PartialSumTable::new();
        let err = t.sigma_with(5, |n| Ok(if n == 4 { 2.0 } else { 1.0 / n as f64 })).unwrap_err();
        assert_eq!(err, Error::Monotonicity { n: 4, value: 2.0 });
    }
}
