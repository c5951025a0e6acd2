//! Snapshot compression by proper orthogonal decomposition.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};

/// Orthonormal reduced basis `r` (N_f × N_r).
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedBasis {
    r: DMatrix<f64>,
}

impl ReducedBasis {
    pub fn new(r: DMatrix<f64>) -> Result<Self> {
        if r.ncols() == 0 || r.nrows() < r.ncols() {
            return Err(invalid(format!(
                "basis shape {}×{} is not tall",
                r.nrows(),
                r.ncols()
            )));
        }
        let basis = Self { r };
        let err = basis.orthonormality_error();
        if err > 1e-8 {
            return Err(invalid(format!(
                "basis columns not orthonormal (‖rᵀr − I‖ = {err:e})"
            )));
        }
        Ok(basis)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            r: DMatrix::identity(n, n),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn n_full(&self) -> usize {
        self.r.nrows()
    }

    pub fn n_basis(&self) -> usize {
        self.r.ncols()
    }

    /// Max-entry norm of `rᵀr − I`.
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.r.tr_mul(&self.r) - DMatrix::identity(self.n_basis(), self.n_basis());
        g.amax()
    }

    /// Leading `n` columns (a nested sub-basis).
    pub fn truncated(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.n_basis() {
            return Err(invalid(format!(
                "cannot truncate {} vectors to {n}",
                self.n_basis()
            )));
        }
        Ok(Self {
            r: self.r.columns(0, n).into_owned(),
        })
    }

    pub fn lift(&self, coords: &DVector<f64>) -> DVector<f64> {
        &self.r * coords
    }

    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        self.r.tr_mul(v)
    }

    /// Orthonormalizes `v` against the basis with two modified Gram–Schmidt
    /// passes and appends it. Returns `false` (basis unchanged) if the
    /// remainder is below `1e-10` relative to `‖v‖`.
    pub fn try_append(&mut self, v: &DVector<f64>) -> Result<bool> {
        if v.len() != self.n_full() {
            return Err(Error::DimensionMismatch {
                context: "basis append",
                expected: self.n_full(),
                found: v.len(),
            });
        }
        let norm0 = v.norm();
        if norm0 == 0.0 || self.n_basis() == self.n_full() {
            return Ok(false);
        }
        let mut w = v.clone();
        for _ in 0..2 {
            for col in self.r.column_iter() {
                let c = col.dot(&w);
                w.axpy(-c, &col, 1.0);
            }
        }
        let rem = w.norm();
        if rem < 1e-10 * norm0 {
            return Ok(false);
        }
        w /= rem;
        let n = self.n_basis();
        self.r = self.r.clone().insert_column(n, 0.0);
        self.r.set_column(n, &w);
        Ok(true)
    }

    /// Basis holding the single normalized vector `v`.
    pub fn from_vector(v: &DVector<f64>) -> Result<Self> {
        let n = v.norm();
        if n == 0.0 {
            return Err(invalid("cannot start a basis from a zero vector"));
        }
        Ok(Self {
            r: DMatrix::from_column_slice(v.len(), 1, (v / n).as_slice()),
        })
    }
}

#[derive(Clone, Debug)]
pub struct PodResult {
    pub basis: ReducedBasis,
    /// All singular values of the snapshot matrix, descending.
    pub singular_values: Vec<f64>,
    /// Set when some returned vectors belong to (numerically) zero singular
    /// values, so they carry no snapshot information.
    pub padded: bool,
}

/// Stacks per-step vectors as the columns of a snapshot matrix.
pub fn snapshot_matrix(columns: &[DVector<f64>]) -> Result<DMatrix<f64>> {
    let first = columns.first().ok_or_else(|| invalid("no snapshots"))?;
    if columns.iter().any(|c| c.len() != first.len()) {
        return Err(invalid("snapshots differ in length"));
    }
    if columns.iter().any(|c| c.iter().any(|x| !x.is_finite())) {
        return Err(Error::NonFinite("snapshot".into()));
    }
    Ok(DMatrix::from_columns(columns))
}

/// First `n_basis` left singular vectors of `snapshots`, ordered by
/// descending singular value. Each vector's largest-magnitude entry is made
/// positive so the result is reproducible.
pub fn pod(snapshots: &DMatrix<f64>, n_basis: usize) -> Result<PodResult> {
    let (rows, cols) = snapshots.shape();
    if n_basis == 0 || n_basis > rows.min(cols) {
        return Err(invalid(format!(
            "{n_basis} POD vectors requested from a {rows}×{cols} snapshot matrix"
        )));
    }
    let scale = snapshots.amax();
    if scale == 0.0 {
        return Err(invalid("snapshot matrix is zero"));
    }
    // SVD is scale-equivariant; normalizing keeps tiny adjoint magnitudes well inside f64 range
    let svd = (snapshots / scale).svd(true, false);
    let u = svd.u.as_ref().expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sigma: Vec<f64> = order
        .iter()
        .map(|&i| svd.singular_values[i] * scale)
        .collect();

    let mut r = DMatrix::zeros(rows, n_basis);
    for (k, &i) in order.iter().take(n_basis).enumerate() {
        let mut col = u.column(i).into_owned();
        let imax = col.iamax();
        if col[imax] < 0.0 {
            col = -col;
        }
        r.set_column(k, &col);
    }
    let tol = sigma[0] * 1e-12 * rows.max(cols) as f64;
    let padded = sigma[n_basis - 1] <= tol;
    Ok(PodResult {
        basis: ReducedBasis { r },
        singular_values: sigma,
        padded,
    })
}
