//! Sparse `L D L^T` factorization of symmetric quasi-definite matrices
//! given by their upper triangle.

use super::csc::CscMatrix;
use super::order::{invert, permute_symmetric_upper, reverse_cuthill_mckee};
use crate::error::{Error, Result};

const NONE: usize = usize::MAX;

/// Elimination tree and column counts of `L`; depends only on the pattern.
#[derive(Debug, Clone)]
pub struct Symbolic {
    pub etree: Vec<usize>,
    pub col_counts: Vec<usize>,
    pub colptr: Vec<usize>,
}

impl Symbolic {
    pub fn analyze(upper: &CscMatrix) -> Result<Self> {
        let n = upper.ncols;
        if upper.nrows != n {
            return Err(Error::Solver("LDL needs a square matrix".into()));
        }
        let mut work = vec![NONE; n];
        let mut etree = vec![NONE; n];
        let mut col_counts = vec![0usize; n];
        for j in 0..n {
            work[j] = j;
            for p in upper.colptr[j]..upper.colptr[j + 1] {
                let mut i = upper.rowind[p];
                if i > j {
                    return Err(Error::Solver("LDL input must be upper triangular".into()));
                }
                while work[i] != j {
                    if etree[i] == NONE {
                        etree[i] = j;
                    }
                    col_counts[i] += 1;
                    work[i] = j;
                    i = etree[i];
                }
            }
        }
        let mut colptr = vec![0usize; n + 1];
        for i in 0..n {
            colptr[i + 1] = colptr[i] + col_counts[i];
        }
        Ok(Self { etree, col_counts, colptr })
    }

    pub fn nnz(&self) -> usize {
        *self.colptr.last().unwrap_or(&0)
    }
}

/// Numeric factor `A = L D L^T` with unit lower-triangular `L`.
#[derive(Debug, Clone)]
pub struct Factor {
    pub symbolic: Symbolic,
    pub rowind: Vec<usize>,
    pub values: Vec<f64>,
    pub d: Vec<f64>,
    pub d_inv: Vec<f64>,
}

impl Factor {
    pub fn new(upper: &CscMatrix, symbolic: Symbolic) -> Result<Self> {
        let n = upper.ncols;
        let nnz = symbolic.nnz();
        let mut f =
            Self { symbolic, rowind: vec![0; nnz], values: vec![0.0; nnz], d: vec![0.0; n], d_inv: vec![0.0; n] };
        f.refactor(upper)?;
        Ok(f)
    }

    /// Recomputes the numeric factor for a matrix with the same pattern.
    pub fn refactor(&mut self, upper: &CscMatrix) -> Result<()> {
        let n = upper.ncols;
        let sym = &self.symbolic;
        let mut y_vals = vec![0.0; n];
        let mut y_used = vec![false; n];
        let mut y_idx = vec![0usize; n];
        let mut elim = vec![0usize; n];
        let mut next_space: Vec<usize> = sym.colptr[..n].to_vec();
        for k in 0..n {
            let mut nnz_y = 0;
            self.d[k] = 0.0;
            for p in upper.colptr[k]..upper.colptr[k + 1] {
                let b = upper.rowind[p];
                if b == k {
                    self.d[k] = upper.values[p];
                    continue;
                }
                y_vals[b] = upper.values[p];
                if !y_used[b] {
                    y_used[b] = true;
                    elim[0] = b;
                    let mut nnz_e = 1;
                    let mut next = sym.etree[b];
                    while next != NONE && next < k {
                        if y_used[next] {
                            break;
                        }
                        y_used[next] = true;
                        elim[nnz_e] = next;
                        nnz_e += 1;
                        next = sym.etree[next];
                    }
                    while nnz_e > 0 {
                        nnz_e -= 1;
                        y_idx[nnz_y] = elim[nnz_e];
                        nnz_y += 1;
                    }
                }
            }
            for i in (0..nnz_y).rev() {
                let c = y_idx[i];
                let slot = next_space[c];
                let yc = y_vals[c];
                for j in sym.colptr[c]..slot {
                    y_vals[self.rowind[j]] -= self.values[j] * yc;
                }
                self.rowind[slot] = k;
                self.values[slot] = yc * self.d_inv[c];
                self.d[k] -= yc * self.values[slot];
                next_space[c] += 1;
                y_vals[c] = 0.0;
                y_used[c] = false;
            }
            if self.d[k] == 0.0 || !self.d[k].is_finite() {
                return Err(Error::Solver(format!("zero pivot at column {k} of LDL factorization")));
            }
            self.d_inv[k] = 1.0 / self.d[k];
        }
        Ok(())
    }

    /// Solves `A x = b` in place.
    pub fn solve(&self, x: &mut [f64]) {
        let n = self.d.len();
        let cp = &self.symbolic.colptr;
        for i in 0..n {
            let xi = x[i];
            for j in cp[i]..cp[i + 1] {
                x[self.rowind[j]] -= self.values[j] * xi;
            }
        }
        for i in 0..n {
            x[i] *= self.d_inv[i];
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in cp[i]..cp[i + 1] {
                acc -= self.values[j] * x[self.rowind[j]];
            }
            x[i] = acc;
        }
    }

    pub fn positive_pivots(&self) -> usize {
        self.d.iter().filter(|d| **d > 0.0).count()
    }
}

/// Fill-reducing permutation plus factorization of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct OrderedLdl {
    perm: Vec<usize>,
    pinv: Vec<usize>,
    factor: Factor,
}

impl OrderedLdl {
    pub fn new(upper: &CscMatrix) -> Result<Self> {
        let perm = reverse_cuthill_mckee(upper);
        let pinv = invert(&perm);
        let permuted = permute_symmetric_upper(upper, &pinv);
        let symbolic = Symbolic::analyze(&permuted)?;
        let factor = Factor::new(&permuted, symbolic)?;
        Ok(Self { perm, pinv, factor })
    }

    /// Refactors a matrix with the same pattern as the one given to `new`.
    pub fn refactor(&mut self, upper: &CscMatrix) -> Result<()> {
        let permuted = permute_symmetric_upper(upper, &self.pinv);
        self.factor.refactor(&permuted)
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        self.factor.solve(&mut x);
        let mut out = vec![0.0; b.len()];
        for (new, &old) in self.perm.iter().enumerate() {
            out[old] = x[new];
        }
        out
    }

    pub fn factor(&self) -> &Factor {
        &self.factor
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_mul(m: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        m.iter().map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    #[test]
    fn solves_quasi_definite_system() {
        // [[4, 1, 2], [1, 3, 0], [2, 0, -1]]
        let up = CscMatrix::from_triplets(3, 3, &[(0, 0, 4.0), (0, 1, 1.0), (1, 1, 3.0), (0, 2, 2.0), (2, 2, -1.0)]);
        let dense = vec![vec![4.0, 1.0, 2.0], vec![1.0, 3.0, 0.0], vec![2.0, 0.0, -1.0]];
        let b = [1.0, -2.0, 0.5];
        for ldl in [OrderedLdl::new(&up).unwrap()] {
            let x = ldl.solve(&b);
            let r = dense_mul(&dense, &x);
            for i in 0..3 {
                assert!((r[i] - b[i]).abs() < 1e-12);
            }
            assert_eq!(ldl.factor().positive_pivots(), 2);
        }
        let sym = Symbolic::analyze(&up).unwrap();
        let mut f = Factor::new(&up, sym).unwrap();
        let mut x = b.to_vec();
        f.solve(&mut x);
        let r = dense_mul(&dense, &x);
        assert!((r[1] - b[1]).abs() < 1e-12);
        // same pattern, new values
        let up2 = CscMatrix::from_triplets(3, 3, &[(0, 0, 5.0), (0, 1, 1.0), (1, 1, 3.0), (0, 2, 2.0), (2, 2, -2.0)]);
        f.refactor(&up2).unwrap();
        let mut x = b.to_vec();
        f.solve(&mut x);
        let d2 = vec![vec![5.0, 1.0, 2.0], vec![1.0, 3.0, 0.0], vec![2.0, 0.0, -2.0]];
        let r = dense_mul(&d2, &x);
        for i in 0..3 {
            assert!((r[i] - b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_pivot_reported() {
        let up = CscMatrix::from_triplets(2, 2, &[(0, 0, 0.0), (1, 1, 1.0)]);
        assert!(OrderedLdl::new(&up).is_err());
    }

    #[test]
    fn rejects_lower_entries() {
        let m = CscMatrix::from_triplets(2, 2, &[(1, 0, 1.0), (0, 0, 1.0), (1, 1, 1.0)]);
        assert!(Symbolic::analyze(&m).is_err());
    }
}
