//! Cyclic Jacobi eigenvalues for small dense symmetric matrices.

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 64;
const MAX_SWEEPS: usize = 100;
const SYMMETRY_TOL: f64 = 1e-12;
const OFF_TOL: f64 = 1e-12;

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch(format!("{} entries for a {dim}x{dim} matrix", data.len())));
        }
        Ok(Self { dim, data })
    }

    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, d);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch("rows of unequal length".into()));
        }
        Self::new(dim, rows.concat())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn trace(&self) -> f64 {
        crate::sum::neumaier((0..self.dim).map(|i| self.get(i, i)))
    }

    pub fn frobenius(&self) -> f64 {
        crate::sum::neumaier(self.data.iter().map(|x| x * x)).sqrt()
    }

    pub fn add(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(format!("{} vs {}", self.dim, other.dim)));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(DenseMatrix { dim: self.dim, data })
    }

    /// `self * other`.
    pub fn mul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(format!("{} vs {}", self.dim, other.dim)));
        }
        let n = self.dim;
        let mut out = DenseMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.set(i, j, crate::sum::neumaier((0..n).map(|l| self.get(i, l) * other.get(l, j))));
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> DenseMatrix {
        let n = self.dim;
        let mut out = DenseMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    fn off_diagonal_norm(&self) -> f64 {
        let n = self.dim;
        let mut acc = crate::sum::NeumaierSum::new();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    acc.add(self.get(i, j).powi(2));
                }
            }
        }
        acc.value().sqrt()
    }
}

/// Eigenvalues of a symmetric matrix (dimension at most 64), sorted
/// non-increasing.
pub fn eig_sym_small(matrix: &DenseMatrix) -> Result<Vec<f64>> {
    let n = matrix.dim();
    if n > MAX_DIM {
        return Err(Error::DimensionTooLarge(n));
    }
    let frob = matrix.frobenius();
    for i in 0..n {
        for j in i + 1..n {
            let diff = (matrix.get(i, j) - matrix.get(j, i)).abs();
            if diff > SYMMETRY_TOL * frob.max(f64::MIN_POSITIVE) {
                return Err(Error::NotSymmetric { row: i, col: j, diff });
            }
        }
    }
    let mut a = matrix.clone();
    // symmetrize away any permitted asymmetry
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (a.get(i, j) + a.get(j, i));
            a.set(i, j, v);
            a.set(j, i, v);
        }
    }
    let target = OFF_TOL * frob;
    let mut converged = a.off_diagonal_norm() <= target;
    let mut sweeps = 0;
    while !converged {
        if sweeps == MAX_SWEEPS {
            return Err(Error::NoConvergence(MAX_SWEEPS));
        }
        for p in 0..n {
            for q in p + 1..n {
                rotate(&mut a, p, q);
            }
        }
        sweeps += 1;
        converged = a.off_diagonal_norm() <= target;
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
    eig.sort_by(|x, y| y.total_cmp(x));
    Ok(eig)
}

/// One Jacobi rotation annihilating `a[p][q]`.
fn rotate(a: &mut DenseMatrix, p: usize, q: usize) {
    let apq = a.get(p, q);
    if apq == 0.0 {
        return;
    }
    let app = a.get(p, p);
    let aqq = a.get(q, q);
    let theta = (aqq - app) / (2.0 * apq);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let n = a.dim();
    for r in 0..n {
        if r != p && r != q {
            let arp = a.get(r, p);
            let arq = a.get(r, q);
            let np = c * arp - s * arq;
            let nq = s * arp + c * arq;
            a.set(r, p, np);
            a.set(p, r, np);
            a.set(r, q, nq);
            a.set(q, r, nq);
        }
    }
    a.set(p, p, app - t * apq);
    a.set(q, q, aqq + t * apq);
    a.set(p, q, 0.0);
    a.set(q, p, 0.0);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_examples() {
        assert_eq!(eig_sym_small(&DenseMatrix::identity(2)).unwrap(), vec![1.0, 1.0]);
        let m = DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let e = eig_sym_small(&m).unwrap();
        assert!((e[0] - 3.0).abs() < 1e-14 && (e[1] - 1.0).abs() < 1e-14);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let rot = DenseMatrix::from_rows(&[vec![h, -h], vec![h, h]]).unwrap();
        let m = rot.mul(&DenseMatrix::from_diagonal(&[3.0, 1.0])).unwrap().mul(&rot.transpose()).unwrap();
        let e = eig_sym_small(&m).unwrap();
        assert!((e[0] - 3.0).abs() < 1e-14 && (e[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_input() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(eig_sym_small(&m), Err(Error::NotSymmetric { row: 0, col: 1, .. })));
        assert!(matches!(eig_sym_small(&DenseMatrix::zeros(65)), Err(Error::DimensionTooLarge(65))));
        assert!(DenseMatrix::new(2, vec![1.0; 3]).is_err());
    }

    #[test]
    fn empty_and_zero() {
        assert!(eig_sym_small(&DenseMatrix::zeros(0)).unwrap().is_empty());
        assert_eq!(eig_sym_small(&DenseMatrix::zeros(3)).unwrap(), vec![0.0; 3]);
    }
}
