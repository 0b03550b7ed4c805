//! Sparse matrices: a small CSR type for operator application and a cached
//! sparse Cholesky factorization (faer) for the SPD systems assembled by the
//! solvers.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{Argsort, Pair, SparseColMat, SymbolicSparseColMat};
use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::par;

/// Compressed sparse row matrix.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_rows];
        for &(r, c, v) in triplets {
            debug_assert!(r < n_rows && c < n_cols);
            rows[r].push((c, v));
        }
        let mut indptr = Vec::with_capacity(n_rows + 1);
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        indptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                if last == Some(c) {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(c);
                    values.push(v);
                    last = Some(c);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            n_rows,
            n_cols,
            indptr,
            indices,
            values,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates over `(col, value)` of one row.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (lo, hi) = (self.indptr[r], self.indptr[r + 1]);
        self.indices[lo..hi]
            .iter()
            .copied()
            .zip(self.values[lo..hi].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(j, _)| j == c).map_or(0.0, |(_, v)| v)
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols);
        par::map_range(self.n_rows, |r| self.row(r).map(|(c, v)| v * x[c]).sum())
    }

    /// Row sums.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n_rows).map(|r| self.row(r).map(|(_, v)| v).sum()).collect()
    }
}

/// Fixed sparsity pattern of a symmetric positive definite matrix with its
/// symbolic Cholesky factorization. Only the lower triangle is stored.
///
/// The pattern is given as a list of `(row, col)` pairs with `row >= col`;
/// numeric values are later supplied in the same order (duplicates summed).
pub struct SpdPattern {
    n: usize,
    len: usize,
    symbolic: SymbolicSparseColMat<usize>,
    argsort: Argsort<usize>,
    llt: SymbolicLlt<usize>,
}

impl SpdPattern {
    pub fn new(n: usize, entries: &[(usize, usize)]) -> Result<Self> {
        let pairs: Vec<Pair<usize, usize>> = entries
            .iter()
            .map(|&(r, c)| {
                debug_assert!(r >= c, "lower triangle only");
                Pair::new(r, c)
            })
            .collect();
        let (symbolic, argsort) = SymbolicSparseColMat::try_new_from_indices(n, n, &pairs)
            .map_err(|e| Error::Solver(format!("pattern: {e:?}")))?;
        let llt = SymbolicLlt::try_new(symbolic.as_ref(), Side::Lower)
            .map_err(|e| Error::Solver(format!("symbolic factorization: {e:?}")))?;
        Ok(Self {
            n,
            len: entries.len(),
            symbolic,
            argsort,
            llt,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Numeric factorization for values listed in pattern order.
    pub fn factor(&self, values: &[f64]) -> Result<SpdFactor> {
        if values.len() != self.len {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a pattern of {} entries",
                values.len(),
                self.len
            )));
        }
        let mat = SparseColMat::new_from_argsort(self.symbolic.clone(), &self.argsort, values)
            .map_err(|e| Error::Solver(format!("assembly: {e:?}")))?;
        let llt = Llt::try_new_with_symbolic(self.llt.clone(), mat.as_ref(), Side::Lower)
            .map_err(|e| Error::Solver(format!("matrix not positive definite: {e:?}")))?;
        Ok(SpdFactor { n: self.n, llt })
    }
}

pub struct SpdFactor {
    n: usize,
    llt: Llt<usize, f64>,
}

impl SpdFactor {
    /// Solves for each right-hand side column in place.
    pub fn solve_many(&self, rhs: &mut [Vec<f64>]) {
        if rhs.is_empty() {
            return;
        }
        let mut b = Mat::<f64>::from_fn(self.n, rhs.len(), |i, j| rhs[j][i]);
        self.llt.solve_in_place(b.as_mut());
        for (j, col) in rhs.iter_mut().enumerate() {
            for (i, x) in col.iter_mut().enumerate() {
                *x = b[(i, j)];
            }
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut cols = vec![rhs.to_vec()];
        self.solve_many(&mut cols);
        cols.pop().unwrap()
    }
}

/// Relative residual `|A x - b| / |b|` for a symmetric matrix given by its
/// lower-triangle pattern entries and values.
pub fn relative_residual(
    n: usize,
    entries: &[(usize, usize)],
    values: &[f64],
    x: &[f64],
    b: &[f64],
) -> f64 {
    let mut ax = vec![0.0; n];
    for (&(r, c), &v) in entries.iter().zip(values) {
        ax[r] += v * x[c];
        if r != c {
            ax[c] += v * x[r];
        }
    }
    let num: f64 = ax.iter().zip(b).map(|(a, b)| (a - b).powi(2)).sum();
    let den: f64 = b.iter().map(|b| b * b).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csr_sums_duplicates() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 0, -1.0)]);
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.get(1, 0), -1.0);
        assert_eq!(a.get(1, 1), 0.0);
        assert_eq!(a.mul_vec(&[1.0, 5.0]), vec![3.0, -1.0]);
    }

    #[test]
    fn cholesky_solves_tridiagonal() {
        let n = 50;
        let mut entries = Vec::new();
        let mut values = Vec::new();
        for i in 0..n {
            entries.push((i, i));
            values.push(2.5);
            if i > 0 {
                entries.push((i, i - 1));
                values.push(-1.0);
            }
        }
        let pattern = SpdPattern::new(n, &entries).unwrap();
        let factor = pattern.factor(&values).unwrap();
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let x = factor.solve(&b);
        assert!(relative_residual(n, &entries, &values, &x, &b) < 1e-12);
    }

    #[test]
    fn indefinite_matrix_is_reported() {
        let pattern = SpdPattern::new(2, &[(0, 0), (1, 0), (1, 1)]).unwrap();
        assert!(pattern.factor(&[1.0, 3.0, 1.0]).is_err());
    }
}
