//! Compressed sparse row storage and the matrix-free kernels.
//!
//! Every product is accumulated in a fixed order (row-major, increasing column
//! index) so results are bit-for-bit reproducible across runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dense::norm2;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

/// Outcome of [`SparseMatrix::spectral_norm_estimate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralNormEstimate {
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
}

pub const DEFAULT_POWER_REL_TOL: f64 = 1e-4;
pub const DEFAULT_POWER_MAX_ITER: usize = 5000;

impl SparseMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        SparseMatrix {
            n_rows,
            n_cols,
            row_offsets: vec![0; n_rows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let triplets: Vec<_> = d.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        Self::from_triplets(d.len(), d.len(), &triplets).expect("diagonal indices are in range")
    }

    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are summed
    /// and exact zeros (after summation) are dropped.
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut sorted = triplets.to_vec();
        for &(r, c, v) in &sorted {
            if r >= n_rows || c >= n_cols {
                return Err(Error::InvalidArgument(format!(
                    "entry ({r}, {c}) outside a {n_rows}x{n_cols} matrix"
                )));
            }
            if !v.is_finite() {
                return Err(Error::NonFinite("matrix entry"));
            }
        }
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

        let mut row_offsets = vec![0; n_rows + 1];
        let mut col_indices = Vec::with_capacity(sorted.len());
        let mut values = Vec::with_capacity(sorted.len());
        let mut rows = Vec::with_capacity(sorted.len());
        let mut k = 0;
        while k < sorted.len() {
            let (r, c, mut v) = sorted[k];
            k += 1;
            while k < sorted.len() && sorted[k].0 == r && sorted[k].1 == c {
                v += sorted[k].2;
                k += 1;
            }
            if v != 0.0 {
                rows.push(r);
                col_indices.push(c);
                values.push(v);
            }
        }
        for &r in &rows {
            row_offsets[r + 1] += 1;
        }
        for i in 0..n_rows {
            row_offsets[i + 1] += row_offsets[i];
        }
        Ok(SparseMatrix {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Builds a matrix from dense rows; every row must have `n_cols` entries.
    pub fn from_dense(n_cols: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let mut triplets = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_cols {
                return Err(Error::DimensionMismatch {
                    context: "from_dense row",
                    expected: n_cols,
                    actual: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                triplets.push((i, j, v));
            }
        }
        Self::from_triplets(rows.len(), n_cols, &triplets)
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

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mutable access to stored values; the sparsity pattern stays fixed.
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Stored entries of row `i` as `(column, value)` pairs.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_offsets[i]..self.row_offsets[i + 1];
        self.col_indices[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.n_rows)
            .flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v)))
            .collect()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.n_cols]; self.n_rows];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        out
    }

    pub(crate) fn to_nalgebra(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n_rows, self.n_cols);
        for (i, j, v) in self.triplets() {
            m[(i, j)] = v;
        }
        m
    }

    /// `Ax`, with a dimension check.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_cols {
            return Err(Error::DimensionMismatch {
                context: "matvec",
                expected: self.n_cols,
                actual: x.len(),
            });
        }
        let mut out = vec![0.0; self.n_rows];
        self.matvec_into(x, &mut out);
        Ok(out)
    }

    /// `Aᵀy`, computed by scattering rows; `Aᵀ` is never stored.
    pub fn matvec_transpose(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.n_rows {
            return Err(Error::DimensionMismatch {
                context: "matvec_transpose",
                expected: self.n_rows,
                actual: y.len(),
            });
        }
        let mut out = vec![0.0; self.n_cols];
        self.matvec_transpose_into(y, &mut out);
        Ok(out)
    }

    /// Unchecked `out = Ax`; lengths are asserted in debug builds.
    pub fn matvec_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_cols);
        debug_assert_eq!(out.len(), self.n_rows);
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                acc += self.values[k] * x[self.col_indices[k]];
            }
            *o = acc;
        }
    }

    /// Unchecked `out = Aᵀy`.
    pub fn matvec_transpose_into(&self, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.n_rows);
        debug_assert_eq!(out.len(), self.n_cols);
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &yi) in y.iter().enumerate() {
            if yi == 0.0 {
                continue;
            }
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                out[self.col_indices[k]] += self.values[k] * yi;
            }
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm2(&self.values)
    }

    /// Power iteration on `AᵀA` from a seeded random start.
    ///
    /// The returned value is a Rayleigh-quotient lower bound on `‖A‖₂`; the
    /// iteration stops once the relative change per step drops below
    /// `rel_tol / 100`, which in practice leaves the estimate within a factor
    /// `1 + rel_tol` of the true norm.
    pub fn spectral_norm_estimate(&self, rel_tol: f64, max_iter: usize, seed: u64) -> SpectralNormEstimate {
        if self.values.iter().all(|&v| v == 0.0) {
            return SpectralNormEstimate {
                value: 0.0,
                converged: true,
                iterations: 0,
            };
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v: Vec<f64> = (0..self.n_cols).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut nv = norm2(&v);
        if nv == 0.0 {
            v = vec![1.0; self.n_cols];
            nv = norm2(&v);
        }
        v.iter_mut().for_each(|x| *x /= nv);

        let mut av = vec![0.0; self.n_rows];
        let mut atav = vec![0.0; self.n_cols];
        let mut sigma = 0.0;
        for it in 1..=max_iter {
            self.matvec_into(&v, &mut av);
            let next = norm2(&av);
            let change = (next - sigma).abs();
            sigma = sigma.max(next);
            if it > 1 && change <= 0.01 * rel_tol * sigma {
                return SpectralNormEstimate {
                    value: sigma,
                    converged: true,
                    iterations: it,
                };
            }
            self.matvec_transpose_into(&av, &mut atav);
            let n = norm2(&atav);
            if n == 0.0 {
                // v landed in the null space; Av = 0 so sigma is still a valid bound
                return SpectralNormEstimate {
                    value: sigma,
                    converged: false,
                    iterations: it,
                };
            }
            for (vi, &w) in v.iter_mut().zip(&atav) {
                *vi = w / n;
            }
        }
        SpectralNormEstimate {
            value: sigma,
            converged: false,
            iterations: max_iter,
        }
    }

    /// Default-parameter estimate (`rel_tol = 1e-4`, 5000 iterations, seed 0).
    pub fn spectral_norm(&self) -> f64 {
        self.spectral_norm_estimate(DEFAULT_POWER_REL_TOL, DEFAULT_POWER_MAX_ITER, 0)
            .value
    }

    pub fn transpose(&self) -> SparseMatrix {
        let triplets: Vec<_> = self.triplets().into_iter().map(|(i, j, v)| (j, i, v)).collect();
        Self::from_triplets(self.n_cols, self.n_rows, &triplets).expect("transpose indices are in range")
    }

    /// `diag(row_scale) · A · diag(col_scale)` with the same sparsity pattern.
    pub fn scaled(&self, row_scale: &[f64], col_scale: &[f64]) -> SparseMatrix {
        assert_eq!(row_scale.len(), self.n_rows);
        assert_eq!(col_scale.len(), self.n_cols);
        let mut out = self.clone();
        for i in 0..self.n_rows {
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                out.values[k] *= row_scale[i] * col_scale[self.col_indices[k]];
            }
        }
        out
    }

    pub fn row_inf_norms(&self) -> Vec<f64> {
        (0..self.n_rows)
            .map(|i| self.row(i).fold(0.0, |m, (_, v)| f64::max(m, v.abs())))
            .collect()
    }

    pub fn col_inf_norms(&self) -> Vec<f64> {
        let mut out = vec![0.0f64; self.n_cols];
        for (&j, &v) in self.col_indices.iter().zip(&self.values) {
            out[j] = out[j].max(v.abs());
        }
        out
    }

    pub fn row_l2_norms(&self) -> Vec<f64> {
        (0..self.n_rows)
            .map(|i| self.row(i).map(|(_, v)| v * v).sum::<f64>().sqrt())
            .collect()
    }

    pub fn col_l2_norms(&self) -> Vec<f64> {
        let mut out = vec![0.0f64; self.n_cols];
        for (&j, &v) in self.col_indices.iter().zip(&self.values) {
            out[j] += v * v;
        }
        out.iter_mut().for_each(|s| *s = s.sqrt());
        out
    }

    /// Submatrix made of the given columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> SparseMatrix {
        let mut position = vec![usize::MAX; self.n_cols];
        for (k, &j) in cols.iter().enumerate() {
            position[j] = k;
        }
        let triplets: Vec<_> = self
            .triplets()
            .into_iter()
            .filter(|&(_, j, _)| position[j] != usize::MAX)
            .map(|(i, j, v)| (i, position[j], v))
            .collect();
        Self::from_triplets(self.n_rows, cols.len(), &triplets).expect("selected indices are in range")
    }

    /// Submatrix made of the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> SparseMatrix {
        let mut triplets = Vec::new();
        for (k, &i) in rows.iter().enumerate() {
            triplets.extend(self.row(i).map(|(j, v)| (k, j, v)));
        }
        Self::from_triplets(rows.len(), self.n_cols, &triplets).expect("selected indices are in range")
    }

    /// Stacks matrices with equal column counts on top of each other.
    pub fn vstack(blocks: &[&SparseMatrix]) -> Result<SparseMatrix> {
        let n_cols = blocks.first().map_or(0, |b| b.n_cols);
        let mut triplets = Vec::new();
        let mut offset = 0;
        for b in blocks {
            if b.n_cols != n_cols {
                return Err(Error::DimensionMismatch {
                    context: "vstack",
                    expected: n_cols,
                    actual: b.n_cols,
                });
            }
            triplets.extend(b.triplets().into_iter().map(|(i, j, v)| (i + offset, j, v)));
            offset += b.n_rows;
        }
        Self::from_triplets(offset, n_cols, &triplets)
    }

    /// Places matrices with equal row counts side by side.
    pub fn hstack(blocks: &[&SparseMatrix]) -> Result<SparseMatrix> {
        let n_rows = blocks.first().map_or(0, |b| b.n_rows);
        let mut triplets = Vec::new();
        let mut offset = 0;
        for b in blocks {
            if b.n_rows != n_rows {
                return Err(Error::DimensionMismatch {
                    context: "hstack",
                    expected: n_rows,
                    actual: b.n_rows,
                });
            }
            triplets.extend(b.triplets().into_iter().map(|(i, j, v)| (i, j + offset, v)));
            offset += b.n_cols;
        }
        Self::from_triplets(n_rows, offset, &triplets)
    }

    /// Copy of the matrix with its column count enlarged by `extra` empty columns.
    pub fn with_extra_columns(&self, extra: usize) -> SparseMatrix {
        let mut out = self.clone();
        out.n_cols += extra;
        out
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Checks the CSR invariants.
    pub fn check_invariants(&self) -> bool {
        if self.row_offsets.len() != self.n_rows + 1 || self.row_offsets[0] != 0 {
            return false;
        }
        if *self.row_offsets.last().unwrap() != self.values.len() || self.col_indices.len() != self.values.len() {
            return false;
        }
        for i in 0..self.n_rows {
            let (s, e) = (self.row_offsets[i], self.row_offsets[i + 1]);
            if s > e {
                return false;
            }
            let cols = &self.col_indices[s..e];
            if cols.iter().any(|&j| j >= self.n_cols) || cols.windows(2).any(|w| w[0] >= w[1]) {
                return false;
            }
        }
        true
    }
}
