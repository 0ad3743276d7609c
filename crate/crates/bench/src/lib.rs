//! Fixtures shared by the criterion benches.

use singtrace_core::{DenseMatrix, SpectralSequence};

/// The families the benches sweep over, by DSL name.
pub fn families() -> Vec<(&'static str, SpectralSequence)> {
    ["harmonic", "logstep", "powlog:alpha=1", "power:alpha=-2", "geometric:r=0.5", "aq:q=1"]
        .into_iter()
        .map(|s| (s, singtrace_core::make_family(s).expect("fixture spec parses")))
        .collect()
}

/// Deterministic PSD matrix `X X^T` from a small LCG, so benches need no RNG crate.
pub fn psd_matrix(dim: usize, seed: u64) -> DenseMatrix {
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let x: Vec<f64> = (0..dim * dim).map(|_| next()).collect();
    let mut m = DenseMatrix::zeros(dim);
    for i in 0..dim {
        for j in i..dim {
            let v: f64 = (0..dim).map(|l| x[i * dim + l] * x[j * dim + l]).sum();
            m.set(i, j, v);
            m.set(j, i, v);
        }
    }
    m
}

#[cfg(test)]
mod tests {
    #[test]
    fn fixtures_build() {
        assert_eq!(super::families().len(), 6);
        let m = super::psd_matrix(8, 1);
        assert!(singtrace_core::eig_sym_small(&m).unwrap().iter().all(|&e| e > -1e-12));
    }
}
