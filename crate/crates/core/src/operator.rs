//! Compressed-row real operators on a Fock basis.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Square real operator in compressed-row form.
///
/// Assembled from coordinate triplets; duplicates are summed and exact zeros
/// dropped, so two assembly paths that produce the same matrix produce the
/// same storage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseOp {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl SparseOp {
    pub fn zeros(n: usize) -> Self {
        SparseOp {
            n,
            indptr: vec![0; n + 1],
            indices: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let trip: Vec<_> = d.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        Self::from_triplets(d.len(), trip)
    }

    /// Build from (row, col, value) triplets.
    pub fn from_triplets(n: usize, mut trip: Vec<(usize, usize, f64)>) -> Self {
        trip.sort_unstable_by_key(|t| (t.0, t.1));
        let mut indptr = vec![0usize; n + 1];
        let mut indices = Vec::with_capacity(trip.len());
        let mut data: Vec<f64> = Vec::with_capacity(trip.len());
        let mut rows = Vec::with_capacity(trip.len());
        for (r, c, v) in trip {
            debug_assert!(r < n && c < n);
            if let (Some(&lr), Some(&lc)) = (rows.last(), indices.last()) {
                if lr == r && lc == c {
                    *data.last_mut().unwrap() += v;
                    continue;
                }
            }
            rows.push(r);
            indices.push(c);
            data.push(v);
        }
        // drop exact cancellations
        let mut keep_r = Vec::with_capacity(rows.len());
        let mut keep_c = Vec::with_capacity(rows.len());
        let mut keep_v = Vec::with_capacity(rows.len());
        for ((r, c), v) in rows.into_iter().zip(indices).zip(data) {
            if v != 0.0 {
                keep_r.push(r);
                keep_c.push(c);
                keep_v.push(v);
            }
        }
        for &r in &keep_r {
            indptr[r + 1] += 1;
        }
        for i in 0..n {
            indptr[i + 1] += indptr[i];
        }
        SparseOp {
            n,
            indptr,
            indices: keep_c,
            data: keep_v,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    /// Iterate stored entries as (row, col, value) in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |r| {
            (self.indptr[r]..self.indptr[r + 1]).map(move |k| (r, self.indices[k], self.data[k]))
        })
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.indptr[r]..self.indptr[r + 1]).map(move |k| (self.indices[k], self.data[k]))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let lo = self.indptr[r];
        let hi = self.indptr[r + 1];
        match self.indices[lo..hi].binary_search(&c) {
            Ok(k) => self.data[lo + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.n);
        DVector::from_iterator(
            self.n,
            (0..self.n).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum::<f64>()),
        )
    }

    /// ⟨x, A y⟩
    pub fn bilinear(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        x.dot(&self.matvec(y))
    }

    pub fn transpose(&self) -> SparseOp {
        SparseOp::from_triplets(self.n, self.triplets().map(|(r, c, v)| (c, r, v)).collect())
    }

    pub fn scale(&self, s: f64) -> SparseOp {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= s);
        if s == 0.0 {
            return SparseOp::zeros(self.n);
        }
        out
    }

    /// self + s·other
    pub fn add_scaled(&self, other: &SparseOp, s: f64) -> SparseOp {
        assert_eq!(self.n, other.n);
        let trip = self
            .triplets()
            .chain(other.triplets().map(|(r, c, v)| (r, c, s * v)))
            .collect();
        SparseOp::from_triplets(self.n, trip)
    }

    pub fn add(&self, other: &SparseOp) -> SparseOp {
        self.add_scaled(other, 1.0)
    }

    pub fn sub(&self, other: &SparseOp) -> SparseOp {
        self.add_scaled(other, -1.0)
    }

    /// Sum of many operators of the same dimension.
    pub fn sum<'a, I: IntoIterator<Item = &'a SparseOp>>(n: usize, ops: I) -> SparseOp {
        let trip = ops.into_iter().flat_map(|o| o.triplets()).collect();
        SparseOp::from_triplets(n, trip)
    }

    /// Sparse product self·other.
    pub fn matmul(&self, other: &SparseOp) -> SparseOp {
        assert_eq!(self.n, other.n);
        let mut trip = Vec::new();
        let mut acc = vec![0.0; self.n];
        let mut touched = Vec::new();
        for r in 0..self.n {
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    if acc[c] == 0.0 {
                        touched.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            for &c in &touched {
                trip.push((r, c, acc[c]));
                acc[c] = 0.0;
            }
            touched.clear();
        }
        SparseOp::from_triplets(self.n, trip)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }

    /// Dense sub-block with the given row and column positions.
    pub fn block(&self, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        let mut colpos = vec![usize::MAX; self.n];
        for (j, &c) in cols.iter().enumerate() {
            colpos[c] = j;
        }
        let mut m = DMatrix::zeros(rows.len(), cols.len());
        for (i, &r) in rows.iter().enumerate() {
            for (c, v) in self.row(r) {
                let j = colpos[c];
                if j != usize::MAX {
                    m[(i, j)] += v;
                }
            }
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// max |A − Aᵀ| over entries.
    pub fn asymmetry(&self) -> f64 {
        self.triplets()
            .map(|(r, c, v)| (v - self.get(c, r)).abs())
            .fold(0.0, f64::max)
    }

    /// Symmetric to machine precision: max |A − Aᵀ| ≤ 1e−14·max|A|.
    pub fn is_symmetric(&self) -> bool {
        self.asymmetry() <= 1e-14 * self.max_abs().max(f64::MIN_POSITIVE)
    }

    /// Does any stored entry connect `rows` to `cols`?
    pub fn couples(&self, rows: &[usize], cols: &[usize]) -> bool {
        let mut is_col = vec![false; self.n];
        cols.iter().for_each(|&c| is_col[c] = true);
        rows.iter()
            .any(|&r| self.row(r).any(|(c, v)| is_col[c] && v != 0.0))
    }
}
