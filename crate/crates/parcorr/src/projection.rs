//! Residualization of series against confounder column spaces.
//!
//! The projector onto the orthogonal complement of a confounder's column
//! space is applied implicitly as `y - q (q^T y)` where `q` is an orthonormal
//! basis of that space. Bases are rank-revealing: columns whose residual
//! contribution falls below a relative tolerance are dropped, so duplicated
//! or nearly dependent confounder columns are harmless. No T x T matrix is
//! ever formed.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Default relative tolerance for dropping dependent columns.
pub const DEFAULT_BASIS_TOL: f64 = 1e-10;

/// Orthonormal basis of a matrix's column space.
#[derive(Debug, Clone)]
pub struct OrthonormalBasis {
    q: DMatrix<f64>,
    tol_used: f64,
}

impl OrthonormalBasis {
    pub fn rank(&self) -> usize {
        self.q.ncols()
    }

    pub fn t_len(&self) -> usize {
        self.q.nrows()
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn tol_used(&self) -> f64 {
        self.tol_used
    }
}

/// Computes a rank-revealing orthonormal basis of `m`'s column space using
/// column-pivoted modified Gram-Schmidt with a re-orthogonalization pass.
///
/// Columns whose residual norm falls below `tol` times the largest original
/// column norm are treated as dependent and dropped. A zero-column input (or
/// an all-zero one) yields a rank-0 basis.
pub fn orthonormal_basis(m: &DMatrix<f64>, tol: f64) -> OrthonormalBasis {
    let t = m.nrows();
    let k = m.ncols();

    let mut work: Vec<DVector<f64>> = (0..k).map(|j| m.column(j).into_owned()).collect();
    let scale = work.iter().map(|c| c.norm()).fold(0.0_f64, f64::max);
    let threshold = tol * scale;

    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut remaining: Vec<usize> = (0..k).collect();

    if scale > 0.0 {
        while basis.len() < t.min(k) {
            // Pivot: the remaining column with the largest residual norm.
            let (pos, norm) = remaining
                .iter()
                .enumerate()
                .map(|(pos, &j)| (pos, work[j].norm()))
                .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if norm <= threshold {
                break;
            }
            let j = remaining.swap_remove(pos);
            let mut v = work[j].clone();
            // Second orthogonalization pass keeps q^T q at machine precision
            // even for nearly dependent pivots.
            for q in &basis {
                let c = q.dot(&v);
                v.axpy(-c, q, 1.0);
            }
            let vnorm = v.norm();
            if vnorm <= threshold {
                continue;
            }
            v /= vnorm;
            for &r in &remaining {
                let c = v.dot(&work[r]);
                let col = &mut work[r];
                col.axpy(-c, &v, 1.0);
            }
            basis.push(v);
        }
    }

    let rank = basis.len();
    let mut q = DMatrix::zeros(t, rank);
    for (idx, col) in basis.iter().enumerate() {
        q.set_column(idx, col);
    }
    OrthonormalBasis { q, tol_used: tol }
}

/// Removes from each column of `y` its projection onto the basis span:
/// `y - q (q^T y)`. A rank-0 basis returns `y` unchanged.
pub fn residualize(y: &DMatrix<f64>, basis: &OrthonormalBasis) -> Result<DMatrix<f64>> {
    if y.nrows() != basis.t_len() {
        return Err(Error::DimensionMismatch(format!(
            "residualize: y has {} rows but basis has {}",
            y.nrows(),
            basis.t_len()
        )));
    }
    if basis.rank() == 0 {
        return Ok(y.clone());
    }
    let coeffs = basis.q.transpose() * y;
    Ok(y - &basis.q * coeffs)
}

/// Stacks two matrices side by side.
pub fn hstack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.nrows(), b.nrows(), "hstack row mismatch");
    let ka = a.ncols();
    DMatrix::from_fn(a.nrows(), ka + b.ncols(), |i, j| {
        if j < ka {
            a[(i, j)]
        } else {
            b[(i, j - ka)]
        }
    })
}

/// Residualizes `y` against the union of the column spaces of `z_a` and
/// `z_b`. Symmetric in the two confounder blocks up to rounding.
pub fn joint_residualize(
    y: &DMatrix<f64>,
    z_a: &DMatrix<f64>,
    z_b: &DMatrix<f64>,
    tol: f64,
) -> Result<DMatrix<f64>> {
    if z_a.nrows() != y.nrows() || z_b.nrows() != y.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "joint_residualize: rows y={}, z_a={}, z_b={}",
            y.nrows(),
            z_a.nrows(),
            z_b.nrows()
        )));
    }
    let basis = orthonormal_basis(&hstack(z_a, z_b), tol);
    residualize(y, &basis)
}
