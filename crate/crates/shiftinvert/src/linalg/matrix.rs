//! Row-compressed data matrix.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;

use super::vector::pairwise_sum;
use crate::error::{Error, Result};

/// Borrowed view of one sparse row.
#[derive(Clone, Copy, Debug)]
pub struct RowView<'a> {
    pub indices: &'a [usize],
    pub values: &'a [f64],
}

impl RowView<'_> {
    pub fn dot(&self, x: &[f64]) -> f64 {
        // Columns are sorted and distinct, so a full row covers 0..d.
        if self.values.len() == x.len() {
            let mut acc = [0.0f64; 4];
            let mut vc = self.values.chunks_exact(4);
            let mut xc = x.chunks_exact(4);
            for (v, w) in (&mut vc).zip(&mut xc) {
                for k in 0..4 {
                    acc[k] += v[k] * w[k];
                }
            }
            let tail: f64 = vc.remainder().iter().zip(xc.remainder()).map(|(v, w)| v * w).sum();
            return (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail;
        }
        self.indices
            .iter()
            .zip(self.values)
            .map(|(&j, &v)| v * x[j])
            .sum()
    }

    /// y += alpha * row
    pub fn axpy_into(&self, alpha: f64, y: &mut [f64]) {
        if self.values.len() == y.len() {
            for (yi, v) in y.iter_mut().zip(self.values) {
                *yi += alpha * v;
            }
            return;
        }
        for (&j, &v) in self.indices.iter().zip(self.values) {
            y[j] += alpha * v;
        }
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }
}

/// Draws row `i` with probability proportional to `‖a_i‖²` by the alias
/// method. Rows of weight zero are never returned.
#[derive(Clone, Debug)]
pub struct RowSampler {
    alias: Option<WeightedAliasIndex<f64>>,
}

impl RowSampler {
    fn new(weights: &[f64]) -> Self {
        RowSampler {
            alias: WeightedAliasIndex::new(weights.to_vec()).ok(),
        }
    }

    /// Panics when every weight is zero; check [`RowSampler::is_empty`].
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.alias.as_ref().expect("sampler over an all-zero matrix").sample(rng)
    }

    pub fn is_empty(&self) -> bool {
        self.alias.is_none()
    }
}

/// n×d matrix stored as compressed rows, with cached row norms.
#[derive(Clone, Debug)]
pub struct RowMatrix {
    n: usize,
    d: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
    row_norms_sq: Vec<f64>,
    frob_sq: f64,
    zero_rows: usize,
    sampler: RowSampler,
}

impl RowMatrix {
    /// Builds from per-row `(column, value)` lists. Duplicate columns in a
    /// row are summed, explicit zeros dropped, and columns sorted.
    pub fn from_sparse_rows(d: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n = rows.len();
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for (r, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|&(j, _)| j);
            let mut k = 0;
            while k < row.len() {
                let (j, mut v) = row[k];
                if j >= d {
                    return Err(Error::InvalidInput(format!(
                        "row {r}: column {j} out of range for dimension {d}"
                    )));
                }
                k += 1;
                while k < row.len() && row[k].0 == j {
                    v += row[k].1;
                    k += 1;
                }
                if !v.is_finite() {
                    return Err(Error::NonFinite { row: r, col: j });
                }
                if v != 0.0 {
                    indices.push(j);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Ok(Self::assemble(n, d, indptr, indices, values))
    }

    pub fn from_dense_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, |r| r.len());
        let mut sparse = Vec::with_capacity(rows.len());
        for (r, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::InvalidInput(format!(
                    "row {r} has {} entries, expected {d}",
                    row.len()
                )));
            }
            let mut entries = Vec::new();
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite { row: r, col: j });
                }
                if v != 0.0 {
                    entries.push((j, v));
                }
            }
            sparse.push(entries);
        }
        Self::from_sparse_rows(d, sparse)
    }

    pub fn from_dmatrix(m: &DMatrix<f64>) -> Result<Self> {
        let rows: Vec<Vec<f64>> = (0..m.nrows())
            .map(|i| m.row(i).iter().copied().collect())
            .collect();
        let mut out = Self::from_dense_rows(&rows)?;
        out.d = m.ncols();
        Ok(out)
    }

    fn assemble(
        n: usize,
        d: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Self {
        let mut row_norms_sq = Vec::with_capacity(n);
        let mut scratch = Vec::new();
        let mut zero_rows = 0;
        for i in 0..n {
            scratch.clear();
            scratch.extend(values[indptr[i]..indptr[i + 1]].iter().map(|v| v * v));
            let s = pairwise_sum(&scratch);
            if s == 0.0 {
                zero_rows += 1;
            }
            row_norms_sq.push(s);
        }
        let frob_sq = pairwise_sum(&row_norms_sq);
        let sampler = RowSampler::new(&row_norms_sq);
        RowMatrix {
            n,
            d,
            indptr,
            indices,
            values,
            row_norms_sq,
            frob_sq,
            zero_rows,
            sampler,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> RowView<'_> {
        let (s, e) = (self.indptr[i], self.indptr[i + 1]);
        RowView {
            indices: &self.indices[s..e],
            values: &self.values[s..e],
        }
    }

    pub fn row_norm_sq(&self, i: usize) -> f64 {
        self.row_norms_sq[i]
    }

    pub fn row_norms_sq(&self) -> &[f64] {
        &self.row_norms_sq
    }

    pub fn frob_sq(&self) -> f64 {
        self.frob_sq
    }

    pub fn zero_row_count(&self) -> usize {
        self.zero_rows
    }

    pub fn is_zero_row(&self, i: usize) -> bool {
        self.row_norms_sq[i] == 0.0
    }

    /// Sampling probability `‖a_i‖² / ‖A‖_F²`.
    pub fn probability(&self, i: usize) -> f64 {
        if self.frob_sq == 0.0 {
            0.0
        } else {
            self.row_norms_sq[i] / self.frob_sq
        }
    }

    pub fn sampler(&self) -> &RowSampler {
        &self.sampler
    }

    /// Ax
    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        Error::check_dim(self.d, x.len())?;
        Ok((0..self.n).map(|i| self.row(i).dot(x)).collect())
    }

    /// Aᵀy
    pub fn tmul_vec(&self, y: &[f64]) -> Result<Vec<f64>> {
        Error::check_dim(self.n, y.len())?;
        let mut out = vec![0.0; self.d];
        for (i, &yi) in y.iter().enumerate() {
            if yi != 0.0 {
                self.row(i).axpy_into(yi, &mut out);
            }
        }
        Ok(out)
    }

    /// AᵀAx through two row passes.
    pub fn apply_sigma(&self, x: &[f64]) -> Result<Vec<f64>> {
        let y = self.mul_vec(x)?;
        self.tmul_vec(&y)
    }

    /// `‖Ax‖² / ‖x‖²`
    pub fn rayleigh_quotient(&self, x: &[f64]) -> Result<f64> {
        Error::check_dim(self.d, x.len())?;
        let xx: f64 = x.iter().map(|v| v * v).sum();
        if xx == 0.0 {
            return Err(Error::ZeroVector);
        }
        let ax = self.mul_vec(x)?;
        let sq: Vec<f64> = ax.iter().map(|v| v * v).collect();
        Ok(pairwise_sum(&sq) / xx)
    }

    pub fn scaled(&self, c: f64) -> RowMatrix {
        let values = self.values.iter().map(|v| v * c).collect();
        Self::assemble(
            self.n,
            self.d,
            self.indptr.clone(),
            self.indices.clone(),
            values,
        )
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.d);
        for i in 0..self.n {
            let r = self.row(i);
            for (&j, &v) in r.indices.iter().zip(r.values) {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Dense AᵀA.
    pub fn gram(&self) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(self.d, self.d);
        for i in 0..self.n {
            let r = self.row(i);
            for (&j, &vj) in r.indices.iter().zip(r.values) {
                for (&k, &vk) in r.indices.iter().zip(r.values) {
                    g[(j, k)] += vj * vk;
                }
            }
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn diag12() -> RowMatrix {
        RowMatrix::from_dense_rows(&[vec![1.0, 0.0], vec![0.0, 2.0]]).unwrap()
    }

    #[test]
    fn apply_sigma_identity_and_diag() {
        let id = RowMatrix::from_dense_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(id.apply_sigma(&[3.0, 4.0]).unwrap(), vec![3.0, 4.0]);
        assert_eq!(diag12().apply_sigma(&[1.0, 1.0]).unwrap(), vec![1.0, 4.0]);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(
            diag12().apply_sigma(&[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn rayleigh_basic() {
        let m = diag12();
        assert_eq!(m.rayleigh_quotient(&[0.0, 1.0]).unwrap(), 4.0);
        assert!(matches!(m.rayleigh_quotient(&[0.0, 0.0]), Err(Error::ZeroVector)));
        let s = 0.5f64.sqrt();
        assert!((m.rayleigh_quotient(&[s, s]).unwrap() - 2.5).abs() < 1e-14);
    }

    #[test]
    fn explicit_zeros_dropped_and_duplicates_summed() {
        let m = RowMatrix::from_sparse_rows(3, vec![vec![(2, 1.0), (0, 0.0), (2, 2.0)], vec![]])
            .unwrap();
        assert_eq!(m.row(0).indices, &[2]);
        assert_eq!(m.row(0).values, &[3.0]);
        assert_eq!(m.zero_row_count(), 1);
        assert!(m.is_zero_row(1));
        assert_eq!(m.frob_sq(), 9.0);
    }

    #[test]
    fn rejects_out_of_range_and_nan() {
        assert!(RowMatrix::from_sparse_rows(2, vec![vec![(2, 1.0)]]).is_err());
        assert!(matches!(
            RowMatrix::from_dense_rows(&[vec![1.0, f64::NAN]]),
            Err(Error::NonFinite { row: 0, col: 1 })
        ));
    }

    #[test]
    fn sampler_skips_zero_rows() {
        let m = RowMatrix::from_dense_rows(&[
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 0.0],
            vec![0.0, 3.0],
            vec![0.0, 0.0],
        ])
        .unwrap();
        let mut rng = seeded(3);
        let mut counts = [0usize; 5];
        for _ in 0..20000 {
            counts[m.sampler().sample(&mut rng)] += 1;
        }
        assert_eq!(counts[0] + counts[2] + counts[4], 0);
        let frac = counts[3] as f64 / 20000.0;
        assert!((frac - 0.9).abs() < 0.01);
    }
}
