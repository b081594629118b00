//! Matrices with a planted spectrum.
//!
//! `A = U·D^{1/2}·Qᵀ` with `Q` orthogonal and `U` having orthonormal
//! columns, so `AᵀA = Q·D·Qᵀ` exactly. For density below one, `U` and `Q`
//! are block diagonal over column groups, which keeps rows sparse.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::linalg::RowMatrix;
use crate::rng::{gaussian_vec, SeededRng};

#[derive(Clone, Debug)]
pub struct Planted {
    pub matrix: RowMatrix,
    /// Eigenvalues of AᵀA in decreasing order.
    pub eigenvalues: Vec<f64>,
    pub v1: Vec<f64>,
}

impl Planted {
    pub fn lambda1(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn gap(&self) -> f64 {
        if self.eigenvalues.len() < 2 {
            1.0
        } else {
            (self.eigenvalues[0] - self.eigenvalues[1]) / self.eigenvalues[0]
        }
    }
}

/// `{1, 1 − gap, (1 − gap)·decay, (1 − gap)·decay², …}`
pub fn planted_eigenvalues(d: usize, gap: f64, decay: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(d);
    for i in 0..d {
        out.push(match i {
            0 => 1.0,
            _ => (1.0 - gap) * decay.powi(i as i32 - 1),
        });
    }
    out
}

/// Haar-distributed orthogonal matrix from the QR factorization of a
/// Gaussian matrix, with column signs fixed by `diag(R) > 0`.
pub fn random_orthogonal(rows: usize, cols: usize, rng: &mut SeededRng) -> DMatrix<f64> {
    let g = DMatrix::from_column_slice(rows, cols, &gaussian_vec(rng, rows * cols));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..cols {
        if r[(j, j)] < 0.0 {
            for i in 0..rows {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

/// `A = diag(sqrt(λᵢ))`, so AᵀA = diag(λ) and vᵢ = eᵢ.
pub fn diag_spectrum(eigenvalues: &[f64]) -> Result<Planted> {
    if eigenvalues.iter().any(|&l| !(l >= 0.0) || !l.is_finite()) {
        return Err(Error::InvalidInput("eigenvalues must be finite and nonnegative".into()));
    }
    let d = eigenvalues.len();
    if d == 0 {
        return Err(Error::InvalidInput("empty spectrum".into()));
    }
    let rows: Vec<Vec<(usize, f64)>> = eigenvalues
        .iter()
        .enumerate()
        .map(|(i, &l)| vec![(i, l.sqrt())])
        .collect();
    let matrix = RowMatrix::from_sparse_rows(d, rows)?;
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eigenvalues[b].total_cmp(&eigenvalues[a]));
    let mut v1 = vec![0.0; d];
    v1[order[0]] = 1.0;
    Ok(Planted {
        matrix,
        eigenvalues: order.iter().map(|&i| eigenvalues[i]).collect(),
        v1,
    })
}

/// Planted matrix with `n ≥ d` rows, the given spectrum and approximate
/// row density.
pub fn planted_matrix(
    n: usize,
    eigenvalues: &[f64],
    density: f64,
    rng: &mut SeededRng,
) -> Result<Planted> {
    let d = eigenvalues.len();
    if d == 0 || n < d {
        return Err(Error::InvalidInput(format!(
            "planted matrix needs n ≥ d ≥ 1, got n = {n}, d = {d}"
        )));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::InvalidInput(format!("density must lie in (0, 1], got {density}")));
    }
    if eigenvalues.iter().any(|&l| !(l >= 0.0) || !l.is_finite()) {
        return Err(Error::InvalidInput("eigenvalues must be finite and nonnegative".into()));
    }
    let group = ((density * d as f64).round() as usize).clamp(1, d);
    let groups: Vec<(usize, usize)> = (0..d)
        .step_by(group)
        .map(|s| (s, (s + group).min(d)))
        .collect();

    let mut slot: Vec<usize> = (0..d).collect();
    if groups.len() > 1 {
        slot.shuffle(rng);
    }
    // slot[k] = column carrying eigenvalue k
    let mut lam_of_col = vec![0.0; d];
    for (k, &c) in slot.iter().enumerate() {
        lam_of_col[c] = eigenvalues[k];
    }
    let top = (0..d)
        .max_by(|&a, &b| eigenvalues[a].total_cmp(&eigenvalues[b]))
        .expect("d ≥ 1");
    let top_col = slot[top];

    let mut row_counts: Vec<usize> = groups.iter().map(|&(s, e)| e - s).collect();
    let mut extra = n - d;
    let mut gi = 0;
    while extra > 0 {
        row_counts[gi % groups.len()] += 1;
        extra -= 1;
        gi += 1;
    }

    let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    let mut v1 = vec![0.0; d];
    for (&(s, e), &r) in groups.iter().zip(&row_counts) {
        let size = e - s;
        let q = random_orthogonal(size, size, rng);
        let u = if r == size {
            DMatrix::<f64>::identity(size, size)
        } else {
            random_orthogonal(r, size, rng)
        };
        let mut scaled_qt = DMatrix::<f64>::zeros(size, size);
        for k in 0..size {
            let sl = lam_of_col[s + k].sqrt();
            for j in 0..size {
                scaled_qt[(k, j)] = sl * q[(j, k)];
            }
        }
        let block = &u * &scaled_qt;
        for i in 0..r {
            rows.push(
                (0..size)
                    .filter_map(|j| {
                        let v = block[(i, j)];
                        (v != 0.0).then_some((s + j, v))
                    })
                    .collect(),
            );
        }
        if (s..e).contains(&top_col) {
            let k = top_col - s;
            for j in 0..size {
                v1[s + j] = q[(j, k)];
            }
        }
    }
    let mut sorted = eigenvalues.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    Ok(Planted {
        matrix: RowMatrix::from_sparse_rows(d, rows)?,
        eigenvalues: sorted,
        v1,
    })
}
