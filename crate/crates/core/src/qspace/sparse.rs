//! Compressed-column complex sparse matrices.
//!
//! Only the handful of operations the simulator needs: assembly from
//! triplets, products, Kronecker products, adjoints and mat-vec.

use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use faer::Mat;

use crate::C64;

#[derive(Clone, Debug, PartialEq)]
pub struct CscMatrix {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<C64>,
}

impl CscMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CscMatrix {
            nrows,
            ncols,
            col_ptr: vec![0; ncols + 1],
            row_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![C64::new(1.0, 0.0); n])
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        let n = diag.len();
        let mut m = CscMatrix::zeros(n, n);
        for (j, &v) in diag.iter().enumerate() {
            if v != C64::new(0.0, 0.0) {
                m.row_idx.push(j);
                m.values.push(v);
            }
            m.col_ptr[j + 1] = m.row_idx.len();
        }
        m
    }

    /// Assemble from `(row, col, value)` triplets. Duplicates are summed and
    /// exact zeros dropped; rows within a column end up sorted.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, C64)]) -> Self {
        let mut counts = vec![0usize; ncols + 1];
        for &(r, c, _) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            counts[c + 1] += 1;
        }
        for j in 0..ncols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut rows = vec![0usize; triplets.len()];
        let mut vals = vec![C64::new(0.0, 0.0); triplets.len()];
        for &(r, c, v) in triplets {
            let p = next[c];
            rows[p] = r;
            vals[p] = v;
            next[c] += 1;
        }

        let mut m = CscMatrix::zeros(nrows, ncols);
        let mut order: Vec<usize> = Vec::new();
        for j in 0..ncols {
            order.clear();
            order.extend(counts[j]..counts[j + 1]);
            order.sort_unstable_by_key(|&p| rows[p]);
            let mut k = 0;
            while k < order.len() {
                let r = rows[order[k]];
                let mut acc = vals[order[k]];
                k += 1;
                while k < order.len() && rows[order[k]] == r {
                    acc += vals[order[k]];
                    k += 1;
                }
                if acc != C64::new(0.0, 0.0) {
                    m.row_idx.push(r);
                    m.values.push(acc);
                }
            }
            m.col_ptr[j + 1] = m.row_idx.len();
        }
        m
    }

    pub fn from_dense(dense: &Mat<C64>) -> Self {
        let mut t = Vec::new();
        for j in 0..dense.ncols() {
            for i in 0..dense.nrows() {
                let v = dense[(i, j)];
                if v != C64::new(0.0, 0.0) {
                    t.push((i, j, v));
                }
            }
        }
        Self::from_triplets(dense.nrows(), dense.ncols(), &t)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    /// Iterate stored entries as `(row, col, value)`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.ncols).flat_map(move |j| {
            (self.col_ptr[j]..self.col_ptr[j + 1]).map(move |p| (self.row_idx[p], j, self.values[p]))
        })
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        let range = self.col_ptr[col]..self.col_ptr[col + 1];
        match self.row_idx[range.clone()].binary_search(&row) {
            Ok(k) => self.values[range.start + k],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    pub fn triplets(&self) -> Vec<(usize, usize, C64)> {
        self.iter().collect()
    }

    pub fn to_dense(&self) -> Mat<C64> {
        let mut d = Mat::<C64>::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.iter() {
            d[(i, j)] += v;
        }
        d
    }

    pub fn map_values(&self, f: impl Fn(C64) -> C64) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v = f(*v);
        }
        out
    }

    pub fn scale(&self, s: C64) -> Self {
        self.map_values(|v| v * s)
    }

    pub fn conj(&self) -> Self {
        self.map_values(|v| v.conj())
    }

    pub fn transpose(&self) -> Self {
        let t: Vec<_> = self.iter().map(|(i, j, v)| (j, i, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, &t)
    }

    pub fn adjoint(&self) -> Self {
        let t: Vec<_> = self.iter().map(|(i, j, v)| (j, i, v.conj())).collect();
        Self::from_triplets(self.ncols, self.nrows, &t)
    }

    pub fn add(&self, other: &CscMatrix) -> Self {
        self.axpby(C64::new(1.0, 0.0), other, C64::new(1.0, 0.0))
    }

    pub fn sub(&self, other: &CscMatrix) -> Self {
        self.axpby(C64::new(1.0, 0.0), other, C64::new(-1.0, 0.0))
    }

    /// `a * self + b * other`.
    pub fn axpby(&self, a: C64, other: &CscMatrix, b: C64) -> Self {
        assert_eq!(
            (self.nrows, self.ncols),
            (other.nrows, other.ncols),
            "shape mismatch in sum"
        );
        let mut t: Vec<_> = self.iter().map(|(i, j, v)| (i, j, a * v)).collect();
        t.extend(other.iter().map(|(i, j, v)| (i, j, b * v)));
        Self::from_triplets(self.nrows, self.ncols, &t)
    }

    /// Sum of many matrices with coefficients, assembled in one pass.
    pub fn linear_combination(nrows: usize, ncols: usize, terms: &[(C64, &CscMatrix)]) -> Self {
        let cap = terms.iter().map(|(_, m)| m.nnz()).sum();
        let mut t = Vec::with_capacity(cap);
        for (c, m) in terms {
            assert_eq!((m.nrows, m.ncols), (nrows, ncols), "shape mismatch in sum");
            t.extend(m.iter().map(|(i, j, v)| (i, j, *c * v)));
        }
        Self::from_triplets(nrows, ncols, &t)
    }

    /// Sparse product `self * other`.
    pub fn matmul(&self, other: &CscMatrix) -> Self {
        assert_eq!(self.ncols, other.nrows, "inner dimension mismatch in product");
        let n = self.nrows;
        let mut work = vec![C64::new(0.0, 0.0); n];
        let mut mark = vec![usize::MAX; n];
        let mut pattern = Vec::new();
        let mut out = CscMatrix::zeros(n, other.ncols);
        for j in 0..other.ncols {
            pattern.clear();
            for p in other.col_ptr[j]..other.col_ptr[j + 1] {
                let k = other.row_idx[p];
                let b = other.values[p];
                for q in self.col_ptr[k]..self.col_ptr[k + 1] {
                    let i = self.row_idx[q];
                    if mark[i] != j {
                        mark[i] = j;
                        work[i] = C64::new(0.0, 0.0);
                        pattern.push(i);
                    }
                    work[i] += self.values[q] * b;
                }
            }
            pattern.sort_unstable();
            for &i in &pattern {
                if work[i] != C64::new(0.0, 0.0) {
                    out.row_idx.push(i);
                    out.values.push(work[i]);
                }
            }
            out.col_ptr[j + 1] = out.row_idx.len();
        }
        out
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &CscMatrix) -> Self {
        let nr = self.nrows * other.nrows;
        let nc = self.ncols * other.ncols;
        let mut out = CscMatrix::zeros(nr, nc);
        out.row_idx.reserve(self.nnz() * other.nnz());
        out.values.reserve(self.nnz() * other.nnz());
        for ja in 0..self.ncols {
            for jb in 0..other.ncols {
                for p in self.col_ptr[ja]..self.col_ptr[ja + 1] {
                    let (ia, va) = (self.row_idx[p], self.values[p]);
                    for q in other.col_ptr[jb]..other.col_ptr[jb + 1] {
                        out.row_idx.push(ia * other.nrows + other.row_idx[q]);
                        out.values.push(va * other.values[q]);
                    }
                }
                out.col_ptr[ja * other.ncols + jb + 1] = out.row_idx.len();
            }
        }
        out
    }

    /// `y = self * x`.
    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `y = self * x`, overwriting `y`.
    pub fn mul_vec_into(&self, x: &[C64], y: &mut [C64]) {
        y.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        self.mul_vec_acc(C64::new(1.0, 0.0), x, y);
    }

    /// `y += s * self * x`.
    pub fn mul_vec_acc(&self, s: C64, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (j, &xj) in x.iter().enumerate() {
            if xj == C64::new(0.0, 0.0) {
                continue;
            }
            let sx = s * xj;
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                y[self.row_idx[p]] += self.values[p] * sx;
            }
        }
    }

    pub fn diagonal(&self) -> Vec<C64> {
        let n = self.nrows.min(self.ncols);
        (0..n).map(|i| self.get(i, i)).collect()
    }

    /// Copy with the main diagonal removed.
    pub fn without_diagonal(&self) -> Self {
        let t: Vec<_> = self.iter().filter(|&(i, j, _)| i != j).collect();
        Self::from_triplets(self.nrows, self.ncols, &t)
    }

    pub fn is_diagonal(&self) -> bool {
        self.iter().all(|(i, j, _)| i == j)
    }

    /// Largest absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        let mut rows = vec![0.0f64; self.nrows];
        for (i, _, v) in self.iter() {
            rows[i] += v.norm();
        }
        rows.into_iter().fold(0.0, f64::max)
    }

    /// Largest absolute column sum.
    pub fn norm_one(&self) -> f64 {
        (0..self.ncols)
            .map(|j| {
                self.values[self.col_ptr[j]..self.col_ptr[j + 1]]
                    .iter()
                    .map(|v| v.norm())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Elementwise `max |self - other|`.
    pub fn max_abs_diff(&self, other: &CscMatrix) -> f64 {
        self.sub(other).max_abs()
    }

    pub fn to_faer(&self) -> SparseColMat<usize, C64> {
        let sym =
            SymbolicSparseColMat::new_checked(self.nrows, self.ncols, self.col_ptr.clone(), None, self.row_idx.clone());
        SparseColMat::new(sym, self.values.clone())
    }
}
