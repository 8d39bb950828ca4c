//! Compressed sparse column storage.

/// Sparse matrix in compressed sparse column form with sorted, unique row
/// indices in every column.
#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub colptr: Vec<usize>,
    pub rowind: Vec<usize>,
    pub values: Vec<f64>,
}

impl CscMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, colptr: vec![0; ncols + 1], rowind: Vec::new(), values: Vec::new() }
    }

    /// Builds from `(row, col, value)` triplets; duplicates are summed and
    /// explicit zeros kept (they fix the sparsity pattern).
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; ncols + 1];
        for &(r, c, _) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) outside {nrows}x{ncols}");
            counts[c + 1] += 1;
        }
        for c in 0..ncols {
            counts[c + 1] += counts[c];
        }
        let mut next = counts.clone();
        let mut rows = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(r, c, v) in triplets {
            rows[next[c]] = r;
            vals[next[c]] = v;
            next[c] += 1;
        }
        let mut colptr = Vec::with_capacity(ncols + 1);
        let mut rowind = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        colptr.push(0);
        let mut order: Vec<usize> = Vec::new();
        for c in 0..ncols {
            order.clear();
            order.extend(counts[c]..counts[c + 1]);
            order.sort_by_key(|&p| rows[p]);
            let mut last: Option<usize> = None;
            for &p in &order {
                if last == Some(rows[p]) {
                    *values.last_mut().unwrap() += vals[p];
                } else {
                    rowind.push(rows[p]);
                    values.push(vals[p]);
                    last = Some(rows[p]);
                }
            }
            colptr.push(rowind.len());
        }
        Self { nrows, ncols, colptr, rowind, values }
    }

    pub fn nnz(&self) -> usize {
        self.rowind.len()
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for c in 0..self.ncols {
            for p in self.colptr[c]..self.colptr[c + 1] {
                out.push((self.rowind[p], c, self.values[p]));
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let t: Vec<_> = self.triplets().into_iter().map(|(r, c, v)| (c, r, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, &t)
    }

    /// `y = M x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        for c in 0..self.ncols {
            let xc = x[c];
            if xc == 0.0 {
                continue;
            }
            for p in self.colptr[c]..self.colptr[c + 1] {
                y[self.rowind[p]] += self.values[p] * xc;
            }
        }
        y
    }

    /// `y = M^T x`.
    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.ncols)
            .map(|c| (self.colptr[c]..self.colptr[c + 1]).map(|p| self.values[p] * x[self.rowind[p]]).sum())
            .collect()
    }

    /// `y = M x` for a symmetric matrix of which only the upper triangle is
    /// stored.
    pub fn sym_upper_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        for c in 0..self.ncols {
            for p in self.colptr[c]..self.colptr[c + 1] {
                let r = self.rowind[p];
                let v = self.values[p];
                y[r] += v * x[c];
                if r != c {
                    y[c] += v * x[r];
                }
            }
        }
        y
    }

    /// Keeps the entries with `row <= col`.
    pub fn upper_triangle(&self) -> Self {
        let t: Vec<_> = self.triplets().into_iter().filter(|&(r, c, _)| r <= c).collect();
        Self::from_triplets(self.nrows, self.ncols, &t)
    }

    /// `diag(left) M diag(right)` in place.
    pub fn scale(&mut self, left: &[f64], right: &[f64]) {
        for c in 0..self.ncols {
            for p in self.colptr[c]..self.colptr[c + 1] {
                self.values[p] *= left[self.rowind[p]] * right[c];
            }
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (r, c, v) in self.triplets() {
            d[r][c] += v;
        }
        d
    }
}

pub(crate) fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
