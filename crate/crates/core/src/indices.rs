//! Sample projection indices over centered data `Y_i = X_i − X̄`.
//!
//! Every index here assumes its input has already been centered with
//! [`center`]; none of them recompute the mean.

use nalgebra::{DMatrix, DVector};

use crate::error::{MppError, Result};
use crate::linalg;
use crate::model::MatrixSample;

/// Relative floor on the second moment of a projection, against the
/// squared data scale `(1/n)Σ‖Y_i‖²·‖u‖²‖v‖²`.
pub const DEGENERACY_TOL: f64 = 1e-14;

/// Condition-number ceiling for `S(u)` in the Mardia-type index.
pub const MAX_CONDITION: f64 = 1e12;

/// A pair of unit directions with the value of some index at the pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionPair {
    pub u: DVector<f64>,
    pub v: DVector<f64>,
    pub value: f64,
}

impl ProjectionPair {
    /// Normalizes `u` and `v` to unit length.
    pub fn new(u: &DVector<f64>, v: &DVector<f64>, value: f64) -> Result<Self> {
        Ok(Self { u: linalg::normalized(u)?, v: linalg::normalized(v)?, value })
    }

    /// `uv'`
    pub fn outer(&self) -> DMatrix<f64> {
        &self.u * self.v.transpose()
    }
}

/// Per-pair constraint matrices `G_{1k} = (1/n)Σ Y_i v_k v_k' Y_i'` and
/// `G_{2k} = (1/n)Σ Y_i' u_k u_k' Y_i`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConstraintSet {
    pub g1: Vec<DMatrix<f64>>,
    pub g2: Vec<DMatrix<f64>>,
}

impl ConstraintSet {
    pub fn len(&self) -> usize {
        self.g1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g1.is_empty()
    }
}

/// Subtracts the sample mean matrix from every observation.
pub fn center(sample: &MatrixSample) -> Result<MatrixSample> {
    if sample.n() < 2 {
        return Err(MppError::Parameter("centering needs at least two observations".into()));
    }
    let mean = sample.mean();
    let (p, q) = (sample.p(), sample.q());
    let mut data = sample.data().to_vec();
    for chunk in data.chunks_exact_mut(p * q) {
        for r in 0..p {
            for c in 0..q {
                chunk[r * q + c] -= mean[(r, c)];
            }
        }
    }
    MatrixSample::new(sample.n(), p, q, data, sample.labels().map(|l| l.to_vec()))
}

fn check_u(sample: &MatrixSample, u: &DVector<f64>) -> Result<()> {
    if u.len() != sample.p() {
        return Err(MppError::Dimension(format!("u has length {}, expected {}", u.len(), sample.p())));
    }
    Ok(())
}

fn check_v(sample: &MatrixSample, v: &DVector<f64>) -> Result<()> {
    if v.len() != sample.q() {
        return Err(MppError::Dimension(format!("v has length {}, expected {}", v.len(), sample.q())));
    }
    Ok(())
}

/// `Y v` into `out` for a row-major `p × q` observation.
fn mul_right(y: &[f64], v: &[f64], out: &mut [f64]) {
    let q = v.len();
    for (r, o) in out.iter_mut().enumerate() {
        *o = y[r * q..(r + 1) * q].iter().zip(v).map(|(a, b)| a * b).sum();
    }
}

/// `Y' u` into `out` for a row-major `p × q` observation.
fn mul_left(y: &[f64], u: &[f64], out: &mut [f64]) {
    let q = out.len();
    out.fill(0.0);
    for (r, &ur) in u.iter().enumerate() {
        for (o, a) in out.iter_mut().zip(&y[r * q..(r + 1) * q]) {
            *o += ur * a;
        }
    }
}

/// Scores `u'Y_i v` for every observation.
pub fn projections(sample: &MatrixSample, u: &DVector<f64>, v: &DVector<f64>) -> Result<Vec<f64>> {
    check_u(sample, u)?;
    check_v(sample, v)?;
    let mut yv = vec![0.0; sample.p()];
    Ok((0..sample.n())
        .map(|i| {
            mul_right(sample.obs(i), v.as_slice(), &mut yv);
            u.as_slice().iter().zip(&yv).map(|(a, b)| a * b).sum()
        })
        .collect())
}

/// `(1/n) Σ sⱼ^k` for the given scores.
pub fn moment(scores: &[f64], k: i32) -> f64 {
    scores.iter().map(|s| s.powi(k)).sum::<f64>() / scores.len() as f64
}

fn degeneracy_floor(sample: &MatrixSample, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
    DEGENERACY_TOL * sample.mean_square() * u.norm_squared() * v.norm_squared()
}

/// Sample kurtosis `κ_n(u, v) = m₄/m₂²` of the projections `u'Y_i v`.
pub fn kappa_sample(centered: &MatrixSample, u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
    let scores = projections(centered, u, v)?;
    let m2 = moment(&scores, 2);
    if !(m2 > degeneracy_floor(centered, u, v)) {
        return Err(MppError::DegenerateProjection(format!("second moment {m2:e} of u'Yv is negligible")));
    }
    Ok(moment(&scores, 4) / (m2 * m2))
}

/// `κ_n(u, v)` together with its ambient gradients in `u` and `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct KappaEval {
    pub value: f64,
    pub grad_u: DVector<f64>,
    pub grad_v: DVector<f64>,
}

/// Evaluates `κ_n` and its exact gradient in one pass. Since `κ_n` is
/// invariant to rescaling `u` and `v`, the gradients are orthogonal to `u`
/// and `v` respectively.
pub fn kappa_with_gradient(centered: &MatrixSample, u: &DVector<f64>, v: &DVector<f64>) -> Result<KappaEval> {
    check_u(centered, u)?;
    check_v(centered, v)?;
    let (p, q) = (centered.p(), centered.q());
    let (mut yv, mut ytu) = (vec![0.0; p], vec![0.0; q]);
    let (mut m2, mut m4) = (0.0, 0.0);
    let (mut g2u, mut g4u) = (vec![0.0; p], vec![0.0; p]);
    let (mut g2v, mut g4v) = (vec![0.0; q], vec![0.0; q]);
    for i in 0..centered.n() {
        let y = centered.obs(i);
        mul_right(y, v.as_slice(), &mut yv);
        mul_left(y, u.as_slice(), &mut ytu);
        let s: f64 = u.as_slice().iter().zip(&yv).map(|(a, b)| a * b).sum();
        let s2 = s * s;
        let s3 = s2 * s;
        m2 += s2;
        m4 += s2 * s2;
        for r in 0..p {
            g2u[r] += s * yv[r];
            g4u[r] += s3 * yv[r];
        }
        for c in 0..q {
            g2v[c] += s * ytu[c];
            g4v[c] += s3 * ytu[c];
        }
    }
    let inv_n = 1.0 / centered.n() as f64;
    m2 *= inv_n;
    m4 *= inv_n;
    if !(m2 > degeneracy_floor(centered, u, v)) {
        return Err(MppError::DegenerateProjection(format!("second moment {m2:e} of u'Yv is negligible")));
    }
    // ∇m₂ = (2/n)Σ s·y, ∇m₄ = (4/n)Σ s³·y, ∇κ = (∇m₄·m₂ − 2m₄·∇m₂)/m₂³
    let denom = m2 * m2 * m2;
    let grad = |g4: &[f64], g2: &[f64]| {
        DVector::from_iterator(
            g4.len(),
            g4.iter()
                .zip(g2)
                .map(|(a, b)| (4.0 * a * inv_n * m2 - 2.0 * m4 * 2.0 * b * inv_n) / denom),
        )
    };
    Ok(KappaEval { value: m4 / (m2 * m2), grad_u: grad(&g4u, &g2u), grad_v: grad(&g4v, &g2v) })
}

/// Ambient gradients `(∇_u κ_n, ∇_v κ_n)`.
pub fn kappa_gradient(
    centered: &MatrixSample,
    u: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let eval = kappa_with_gradient(centered, u, v)?;
    Ok((eval.grad_u, eval.grad_v))
}

/// Mardia-type kurtosis of the vectors `t_i` produced by `project`:
/// `(1/n) Σ (t_i' S⁻¹ t_i)²` with `S = (1/n) Σ t_i t_i'`.
fn mardia(n: usize, dim: usize, mut project: impl FnMut(usize, &mut [f64])) -> Result<f64> {
    let mut ts = vec![0.0; n * dim];
    for (i, t) in ts.chunks_exact_mut(dim).enumerate() {
        project(i, t);
    }
    let mut s = DMatrix::zeros(dim, dim);
    for t in ts.chunks_exact(dim) {
        for a in 0..dim {
            for b in 0..=a {
                s[(a, b)] += t[a] * t[b];
            }
        }
    }
    for a in 0..dim {
        for b in 0..a {
            s[(b, a)] = s[(a, b)];
        }
    }
    s /= n as f64;
    let (values, vectors) = linalg::sym_eigen_desc(&s);
    let (top, bottom) = (values[0], values[dim - 1]);
    if !(top > 0.0) || !(bottom * MAX_CONDITION > top) {
        return Err(MppError::DegenerateProjection(format!(
            "projected scatter is singular (eigenvalues {bottom:e} .. {top:e})"
        )));
    }
    // whitening rows: S⁻¹ = Σ e_k e_k' / λ_k
    let whiten = DMatrix::from_fn(dim, dim, |k, j| vectors[(j, k)] / values[k].sqrt());
    let mut acc = 0.0;
    let mut w = vec![0.0; dim];
    for t in ts.chunks_exact(dim) {
        for (k, wk) in w.iter_mut().enumerate() {
            *wk = (0..dim).map(|j| whiten[(k, j)] * t[j]).sum();
        }
        let d: f64 = w.iter().map(|x| x * x).sum();
        acc += d * d;
    }
    Ok(acc / n as f64)
}

/// Sample Mardia-type index `ψ_n(u)` of the vectors `Y_i'u`.
pub fn psi_sample(centered: &MatrixSample, u: &DVector<f64>) -> Result<f64> {
    check_u(centered, u)?;
    mardia(centered.n(), centered.q(), |i, t| mul_left(centered.obs(i), u.as_slice(), t))
}

/// `ψ_n` of the transposed observations, i.e. of the vectors `Y_i v`.
pub fn psi_transpose_sample(centered: &MatrixSample, v: &DVector<f64>) -> Result<f64> {
    check_v(centered, v)?;
    mardia(centered.n(), centered.p(), |i, t| mul_right(centered.obs(i), v.as_slice(), t))
}

/// MPCA index `(1/n) Σ (u'Y_i v)²`.
pub fn kappa2_sample(centered: &MatrixSample, u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
    Ok(moment(&projections(centered, u, v)?, 2))
}

/// Row index of (2D)²PCA: `(1/n) Σ u'Y_iY_i'u`.
pub fn psi2_sample(centered: &MatrixSample, u: &DVector<f64>) -> Result<f64> {
    check_u(centered, u)?;
    let mut t = vec![0.0; centered.q()];
    let mut acc = 0.0;
    for i in 0..centered.n() {
        mul_left(centered.obs(i), u.as_slice(), &mut t);
        acc += t.iter().map(|x| x * x).sum::<f64>();
    }
    Ok(acc / centered.n() as f64)
}

/// Column index of (2D)²PCA: `(1/n) Σ v'Y_i'Y_iv`.
pub fn psi2_transpose_sample(centered: &MatrixSample, v: &DVector<f64>) -> Result<f64> {
    check_v(centered, v)?;
    let mut t = vec![0.0; centered.p()];
    let mut acc = 0.0;
    for i in 0..centered.n() {
        mul_right(centered.obs(i), v.as_slice(), &mut t);
        acc += t.iter().map(|x| x * x).sum::<f64>();
    }
    Ok(acc / centered.n() as f64)
}

fn accumulate_outer(acc: &mut DMatrix<f64>, t: &[f64]) {
    for a in 0..t.len() {
        for b in 0..t.len() {
            acc[(a, b)] += t[a] * t[b];
        }
    }
}

/// `(1/n) Σ Y_i v v' Y_i'`
pub fn row_constraint_matrix(centered: &MatrixSample, v: &DVector<f64>) -> Result<DMatrix<f64>> {
    check_v(centered, v)?;
    let p = centered.p();
    let mut acc = DMatrix::zeros(p, p);
    let mut t = vec![0.0; p];
    for i in 0..centered.n() {
        mul_right(centered.obs(i), v.as_slice(), &mut t);
        accumulate_outer(&mut acc, &t);
    }
    Ok(acc / centered.n() as f64)
}

/// `(1/n) Σ Y_i' u u' Y_i`
pub fn column_constraint_matrix(centered: &MatrixSample, u: &DVector<f64>) -> Result<DMatrix<f64>> {
    check_u(centered, u)?;
    let q = centered.q();
    let mut acc = DMatrix::zeros(q, q);
    let mut t = vec![0.0; q];
    for i in 0..centered.n() {
        mul_left(centered.obs(i), u.as_slice(), &mut t);
        accumulate_outer(&mut acc, &t);
    }
    Ok(acc / centered.n() as f64)
}

/// `(1/n) Σ Y_i Y_i'`
pub fn row_scatter(centered: &MatrixSample) -> DMatrix<f64> {
    let (p, q) = (centered.p(), centered.q());
    let mut acc = DMatrix::zeros(p, p);
    for i in 0..centered.n() {
        let y = centered.obs(i);
        for a in 0..p {
            for b in 0..p {
                acc[(a, b)] += (0..q).map(|c| y[a * q + c] * y[b * q + c]).sum::<f64>();
            }
        }
    }
    acc / centered.n() as f64
}

/// `(1/n) Σ Y_i' Y_i`
pub fn column_scatter(centered: &MatrixSample) -> DMatrix<f64> {
    row_scatter(&centered.transpose())
}

pub fn constraint_matrices(centered: &MatrixSample, pairs: &[ProjectionPair]) -> Result<ConstraintSet> {
    if pairs.is_empty() {
        return Err(MppError::Parameter("no pairs to build constraints from".into()));
    }
    let mut set = ConstraintSet::default();
    for pair in pairs {
        set.g1.push(row_constraint_matrix(centered, &pair.v)?);
        set.g2.push(column_constraint_matrix(centered, &pair.u)?);
    }
    Ok(set)
}

/// The constraint directions `(G_{1k}u_k, G_{2k}v_k)` of one pair, computed
/// without forming the matrices: `(1/n) Σ (u'Y_iv) Y_iv` and
/// `(1/n) Σ (u'Y_iv) Y_i'u`.
pub fn constraint_vectors(
    centered: &MatrixSample,
    u: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    check_u(centered, u)?;
    check_v(centered, v)?;
    let (p, q) = (centered.p(), centered.q());
    let (mut yv, mut ytu) = (vec![0.0; p], vec![0.0; q]);
    let (mut gu, mut gv) = (DVector::zeros(p), DVector::zeros(q));
    for i in 0..centered.n() {
        let y = centered.obs(i);
        mul_right(y, v.as_slice(), &mut yv);
        mul_left(y, u.as_slice(), &mut ytu);
        let s: f64 = u.as_slice().iter().zip(&yv).map(|(a, b)| a * b).sum();
        for r in 0..p {
            gu[r] += s * yv[r];
        }
        for c in 0..q {
            gv[c] += s * ytu[c];
        }
    }
    let inv_n = 1.0 / centered.n() as f64;
    Ok((gu * inv_n, gv * inv_n))
}

/// Whether the `pq × pq` second-moment matrix of `vec(Y_i)` is positive
/// definite, with smallest eigenvalue above `1e-12` times the largest.
/// This guarantees that every projection `u'Y_iv` has positive variance.
pub fn well_definedness_check(centered: &MatrixSample) -> bool {
    let d = centered.p() * centered.q();
    if centered.n() <= d {
        return false;
    }
    let mut acc = DMatrix::zeros(d, d);
    for i in 0..centered.n() {
        let y = centered.obs(i);
        for a in 0..d {
            if y[a] == 0.0 {
                continue;
            }
            for b in 0..=a {
                acc[(a, b)] += y[a] * y[b];
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            acc[(b, a)] = acc[(a, b)];
        }
    }
    let (values, _) = linalg::sym_eigen_desc(&acc);
    values[0] > 0.0 && values[d - 1] > linalg::EIGEN_FLOOR * values[0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{self, MatrixNormalParams};
    use crate::seed;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn random_sample(seed: u64, n: usize, p: usize, q: usize) -> MatrixSample {
        let mut rng = seed::rng(seed);
        let data = (0..n * p * q).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        MatrixSample::new(n, p, q, data, None).unwrap()
    }

    fn gaussian(n: usize, p: usize, q: usize, seed: u64) -> MatrixSample {
        let params = MatrixNormalParams::new(DMatrix::zeros(p, q), DMatrix::identity(p, p), DMatrix::identity(q, q))
            .unwrap();
        center(&model::sample_matrix_normal(&params, n, seed).unwrap()).unwrap()
    }

    fn unit(v: &[f64]) -> DVector<f64> {
        linalg::normalized(&DVector::from_row_slice(v)).unwrap()
    }

    #[test]
    fn center_examples() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let pm = MatrixSample::from_matrices(&[m.clone(), -&m], None).unwrap();
        assert_eq!(center(&pm).unwrap(), pm);
        let constant = MatrixSample::from_matrices(&[m.clone(), m.clone(), m], None).unwrap();
        assert!(center(&constant).unwrap().data().iter().all(|&x| x == 0.0));
        let random = center(&random_sample(1, 50, 3, 2)).unwrap();
        assert!(random.mean().norm() < 1e-12);
    }

    #[test]
    fn two_point_kurtosis_is_one() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, -2.0, 0.5, 3.0]);
        let s = MatrixSample::from_matrices(&[m.clone(), -m], None).unwrap();
        let k = kappa_sample(&s, &unit(&[1.0, 1.0]), &unit(&[1.0, 0.0])).unwrap();
        assert!((k - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_projection_is_degenerate() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let s = MatrixSample::from_matrices(&[m.clone(), -m], None).unwrap();
        let err = kappa_sample(&s, &unit(&[0.0, 1.0]), &unit(&[1.0, 0.0])).unwrap_err();
        assert!(matches!(err, MppError::DegenerateProjection(_)));
    }

    #[test]
    fn gaussian_indices() {
        let s = gaussian(1_000_000, 4, 3, 2);
        let u = unit(&[1.0, -1.0, 0.5, 2.0]);
        let v = unit(&[0.3, 1.0, -1.0]);
        assert!((kappa_sample(&s, &u, &v).unwrap() - 3.0).abs() < 0.02);
        assert!((psi_sample(&s, &u).unwrap() - 15.0).abs() < 0.1);
        assert!((psi_transpose_sample(&s, &v).unwrap() - 24.0).abs() < 0.15);
        assert!((kappa2_sample(&s, &u, &v).unwrap() - 1.0).abs() < 0.01);
        assert!((psi2_sample(&s, &u).unwrap() - 3.0).abs() < 0.05);
        assert!((psi2_transpose_sample(&s, &v).unwrap() - 4.0).abs() < 0.05);
    }

    #[test]
    fn model_one_kappa_at_optimum() {
        let mix = model::model_one(0.3, 1).unwrap();
        let s = center(&model::sample_mixture(&mix, 1_000_000, 3).unwrap()).unwrap();
        let pair = &model::analytic_pairs(&mix).unwrap()[0];
        let k = kappa_sample(&s, &pair.u, &pair.v).unwrap();
        assert!((k - 2.2647).abs() < 0.02, "{k}");
        let k2 = kappa2_sample(&s, &pair.u, &pair.v).unwrap();
        let expected = model::population_kappa2(&mix, &pair.u, &pair.v).unwrap();
        assert!((k2 / expected - 1.0).abs() < 0.01);
        assert!(psi_sample(&s, &pair.u).unwrap() < 15.0);
    }

    #[test]
    fn zero_data_quadratic_indices() {
        let s = MatrixSample::new(3, 2, 2, vec![0.0; 12], None).unwrap();
        let (u, v) = (unit(&[1.0, 0.0]), unit(&[0.0, 1.0]));
        assert_eq!(kappa2_sample(&s, &u, &v).unwrap(), 0.0);
        assert_eq!(psi2_sample(&s, &u).unwrap(), 0.0);
        let set = constraint_matrices(&s, &[ProjectionPair::new(&u, &v, 0.0).unwrap()]).unwrap();
        assert_eq!(set.g1[0], DMatrix::zeros(2, 2));
        assert_eq!(set.g2[0], DMatrix::zeros(2, 2));
        assert!(constraint_matrices(&s, &[]).is_err());
    }

    #[test]
    fn single_centered_observation_gives_zero_constraints() {
        let s = MatrixSample::new(1, 2, 3, vec![0.0; 6], None).unwrap();
        let pair = ProjectionPair::new(&unit(&[1.0, 1.0]), &unit(&[1.0, 0.0, 1.0]), 0.0).unwrap();
        let set = constraint_matrices(&s, &[pair]).unwrap();
        assert_eq!(set.g1[0], DMatrix::zeros(2, 2));
        assert_eq!(set.g2[0], DMatrix::zeros(3, 3));
    }

    #[test]
    fn constraint_vectors_match_matrices() {
        let s = center(&random_sample(5, 40, 3, 4)).unwrap();
        let (u, v) = (unit(&[1.0, 2.0, -1.0]), unit(&[0.5, 0.0, 1.0, -1.0]));
        let pair = ProjectionPair::new(&u, &v, 0.0).unwrap();
        let set = constraint_matrices(&s, &[pair]).unwrap();
        let (gu, gv) = constraint_vectors(&s, &u, &v).unwrap();
        assert!((&set.g1[0] * &u - gu).amax() < 1e-12);
        assert!((&set.g2[0] * &v - gv).amax() < 1e-12);
        assert!(linalg::is_symmetric(&set.g1[0], 1e-14));
        assert!(linalg::sym_eigen_desc(&set.g2[0]).0.min() > -1e-12);
    }

    #[test]
    fn population_constraint_limit() {
        let mix = model::model_one(0.3, 4).unwrap();
        let s = center(&model::sample_mixture(&mix, 200_000, 6).unwrap()).unwrap();
        let pair = &model::analytic_pairs(&mix).unwrap()[0];
        let g1 = row_constraint_matrix(&s, &pair.v).unwrap();
        let expected = model::population_row_constraint(&mix, &pair.v);
        assert!((g1 - &expected).amax() < 0.05 * expected.amax());
    }

    #[test]
    fn well_definedness_examples() {
        assert!(!well_definedness_check(&center(&random_sample(1, 6, 2, 3)).unwrap()));
        assert!(well_definedness_check(&gaussian(12, 2, 3, 7)));
        let mut data = random_sample(2, 100, 2, 3).data().to_vec();
        for chunk in data.chunks_exact_mut(6) {
            chunk[2] = 0.0;
            chunk[5] = 0.0;
        }
        let s = center(&MatrixSample::new(100, 2, 3, data, None).unwrap()).unwrap();
        assert!(!well_definedness_check(&s));
        let err = kappa_sample(&s, &unit(&[1.0, 0.0]), &unit(&[0.0, 0.0, 1.0])).unwrap_err();
        assert!(matches!(err, MppError::DegenerateProjection(_)));
    }

    #[test]
    fn single_column_reduces_to_univariate_kurtosis() {
        let s = center(&random_sample(8, 300, 4, 1)).unwrap();
        let u = unit(&[1.0, 0.2, -0.7, 0.4]);
        let one = DVector::from_element(1, 1.0);
        let k = kappa_sample(&s, &u, &one).unwrap();
        assert!((psi_sample(&s, &u).unwrap() - k).abs() < 1e-10);

        let t = s.transpose();
        let kt = kappa_sample(&t, &one, &u).unwrap();
        assert!((psi_transpose_sample(&t, &u).unwrap() - kt).abs() < 1e-10);
    }

    #[test]
    fn transpose_index_matches_explicit_transpose() {
        let s = center(&random_sample(9, 200, 3, 4)).unwrap();
        let v = unit(&[0.1, 1.0, -2.0, 0.5]);
        let a = psi_transpose_sample(&s, &v).unwrap();
        let b = psi_sample(&s.transpose(), &v).unwrap();
        assert!((a - b).abs() < 1e-12 * a);
    }

    #[test]
    fn gradient_flips_with_u() {
        let s = center(&random_sample(10, 100, 3, 2)).unwrap();
        let (u, v) = (unit(&[1.0, -1.0, 2.0]), unit(&[1.0, 0.5]));
        let (gu, gv) = kappa_gradient(&s, &u, &v).unwrap();
        let (gu2, gv2) = kappa_gradient(&s, &-&u, &v).unwrap();
        assert!((gu + gu2).amax() < 1e-12);
        assert!((gv - gv2).amax() < 1e-12);
    }

    #[test]
    fn gradient_is_tangent() {
        let s = center(&random_sample(11, 100, 3, 4)).unwrap();
        let (u, v) = (unit(&[1.0, -1.0, 2.0]), unit(&[1.0, 0.5, 0.0, 2.0]));
        let (gu, gv) = kappa_gradient(&s, &u, &v).unwrap();
        assert!(gu.dot(&u).abs() < 1e-12);
        assert!(gv.dot(&v).abs() < 1e-12);
    }

    fn arb_vec(dim: usize) -> impl Strategy<Value = DVector<f64>> {
        proptest::collection::vec(-1.0f64..1.0, dim)
            .prop_filter("non-zero", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-2)
            .prop_map(DVector::from_vec)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn kappa_sign_and_scale_invariance(
            seed in 0u64..1000, u in arb_vec(3), v in arb_vec(4), c in 0.1f64..10.0, k in 0.1f64..10.0,
        ) {
            let s = center(&random_sample(seed, 60, 3, 4)).unwrap();
            let base = kappa_sample(&s, &u, &v).unwrap();
            prop_assert!((kappa_sample(&s, &-&u, &v).unwrap() - base).abs() < 1e-12 * base);
            prop_assert!((kappa_sample(&s, &u, &-&v).unwrap() - base).abs() < 1e-12 * base);
            prop_assert!((kappa_sample(&s, &(&u * c), &(&v * -k)).unwrap() - base).abs() < 1e-12 * base);
            let psi = psi_sample(&s, &u).unwrap();
            prop_assert!((psi_sample(&s, &-&u).unwrap() - psi).abs() < 1e-12 * psi);
        }

        #[test]
        fn affine_equivariance(seed in 0u64..1000, u in arb_vec(3), v in arb_vec(2)) {
            let mut rng = seed::rng(seed + 5000);
            let raw = random_sample(seed, 40, 3, 2);
            let m = DMatrix::from_fn(3, 3, |_, _| rng.sample::<f64, _>(StandardNormal)) + DMatrix::identity(3, 3) * 2.0;
            let nm = DMatrix::from_fn(2, 2, |_, _| rng.sample::<f64, _>(StandardNormal)) + DMatrix::identity(2, 2) * 2.0;
            prop_assume!(m.determinant().abs() > 0.1 && nm.determinant().abs() > 0.1);
            let shift = DMatrix::from_fn(3, 2, |_, _| rng.sample::<f64, _>(StandardNormal) * 5.0);
            let moved = center(&raw.transform(&m.transpose(), &nm, Some(&shift)).unwrap()).unwrap();
            let base = center(&raw).unwrap();
            let lhs = kappa_sample(&moved, &u, &v).unwrap();
            let rhs = kappa_sample(&base, &linalg::normalized(&(&m * &u)).unwrap(), &linalg::normalized(&(&nm * &v)).unwrap()).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-10 * rhs);
        }
    }
}
