//! Dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{MppError, Result};

/// Eigenvalue floor, relative to the largest eigenvalue, used for
/// symmetric matrix functions.
pub const EIGEN_FLOOR: f64 = 1e-12;

/// Relative eigenvalue threshold below which a matrix is not considered
/// positive definite.
pub const SPD_TOL: f64 = 1e-10;

/// Symmetric eigendecomposition with eigenvalues sorted in descending order.
/// Columns of the returned matrix are the matching unit eigenvectors.
pub fn sym_eigen_desc(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    // stable, so exact ties keep nalgebra's order
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = DVector::from_iterator(order.len(), order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(m.nrows(), order.len());
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Flips `v` so that its first non-negligible component is positive.
pub fn canonical_sign(mut v: DVector<f64>) -> DVector<f64> {
    let scale = v.amax();
    if let Some(first) = v.iter().copied().find(|x| x.abs() > 1e-12 * scale) {
        if first < 0.0 {
            v.neg_mut();
        }
    }
    v
}

/// Leading eigenvector of a symmetric matrix, sign-normalized.
pub fn top_eigenvector(m: &DMatrix<f64>) -> DVector<f64> {
    let (_, vectors) = sym_eigen_desc(m);
    canonical_sign(vectors.column(0).into_owned())
}

pub fn is_symmetric(m: &DMatrix<f64>, rel_tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    (m - m.transpose()).amax() <= rel_tol * scale
}

/// Checks that `m` is a finite, symmetric positive definite matrix.
pub fn check_spd(m: &DMatrix<f64>, name: &str) -> Result<()> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(MppError::Parameter(format!("{name} must be a non-empty square matrix")));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(MppError::Parameter(format!("{name} has non-finite entries")));
    }
    if !is_symmetric(m, 1e-10) {
        return Err(MppError::Parameter(format!("{name} is not symmetric")));
    }
    let (values, _) = sym_eigen_desc(m);
    let largest = values[0];
    let smallest = values[values.len() - 1];
    if largest <= 0.0 || smallest <= SPD_TOL * largest {
        return Err(MppError::Parameter(format!(
            "{name} is not positive definite (eigenvalues in [{smallest:e}, {largest:e}])"
        )));
    }
    Ok(())
}

/// `m^power` for a symmetric positive (semi)definite matrix, via the
/// eigendecomposition with eigenvalues floored at `EIGEN_FLOOR · λ_max`.
pub fn sym_pow(m: &DMatrix<f64>, power: f64) -> DMatrix<f64> {
    let (values, vectors) = sym_eigen_desc(m);
    let floor = EIGEN_FLOOR * values[0].max(0.0);
    let scaled = DVector::from_iterator(values.len(), values.iter().map(|&l| l.max(floor).powf(power)));
    &vectors * DMatrix::from_diagonal(&scaled) * vectors.transpose()
}

pub fn sym_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    sym_pow(m, 0.5)
}

pub fn sym_inv_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    sym_pow(m, -0.5)
}

pub fn sym_inv(m: &DMatrix<f64>) -> DMatrix<f64> {
    sym_pow(m, -1.0)
}

pub fn normalized(v: &DVector<f64>) -> Result<DVector<f64>> {
    let norm = v.norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(MppError::Parameter("cannot normalize a zero or non-finite vector".into()));
    }
    Ok(v / norm)
}

/// Uniform draw from the unit sphere in `R^dim`.
pub fn random_unit<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_iterator(dim, (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let norm = v.norm();
        if norm > 1e-300 {
            return v / norm;
        }
    }
}

/// Haar-distributed random orthogonal matrix (QR of a Gaussian matrix with
/// the sign of `R`'s diagonal absorbed into `Q`).
pub fn random_orthogonal<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            let mut col = q.column_mut(j);
            col.neg_mut();
        }
    }
    q
}

/// Orthonormal basis of the orthogonal complement of `span(vectors)` in
/// `R^dim`, as the columns of a `dim × (dim − k)` matrix.
///
/// Computed by Householder QR of `[V | I]`; the trailing `dim − k` columns
/// of the full `Q` factor span the complement.
pub fn orthogonal_complement(vectors: &[DVector<f64>], dim: usize) -> Result<DMatrix<f64>> {
    let k = vectors.len();
    if k == 0 {
        return Ok(DMatrix::identity(dim, dim));
    }
    if vectors.iter().any(|v| v.len() != dim) {
        return Err(MppError::Dimension(format!("all vectors must have length {dim}")));
    }
    if k >= dim {
        return Err(MppError::Rank(format!("{k} constraint vectors leave no complement in R^{dim}")));
    }
    let mut padded = DMatrix::zeros(dim, k + dim);
    for (j, v) in vectors.iter().enumerate() {
        padded.set_column(j, v);
    }
    padded.view_mut((0, k), (dim, dim)).fill_with_identity();
    let qr = padded.qr();
    let r = qr.r();
    let scale = vectors.iter().map(|v| v.norm()).fold(0.0, f64::max);
    for j in 0..k {
        if !(r[(j, j)].abs() > 1e-10 * scale) {
            return Err(MppError::Rank(format!(
                "constraint vector {j} is linearly dependent on the previous ones"
            )));
        }
    }
    let q = qr.q();
    Ok(q.columns(k, dim - k).into_owned())
}

/// Relative residual `‖Ma − (a'Ma/‖a‖²)a‖ / ‖Ma‖` measuring how far `a` is
/// from being an eigenvector of `m`.
pub fn eigenvector_residual(m: &DMatrix<f64>, a: &DVector<f64>) -> f64 {
    let ma = m * a;
    let rayleigh = a.dot(&ma) / a.norm_squared();
    let denom = ma.norm();
    if denom == 0.0 {
        return 0.0;
    }
    (&ma - a * rayleigh).norm() / denom
}
