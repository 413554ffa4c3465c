//! Metrics, one-dimensional clustering and second-moment baselines.

use nalgebra::{DMatrix, DVector};

use crate::error::{MppError, Result};
use crate::indices::{self, ProjectionPair};
use crate::linalg;
use crate::model::MatrixSample;

/// Floor for the squared Frobenius error before taking its logarithm.
const LOG_FLOOR: f64 = 1e-300;

/// Maximal similarity `|x'y|` of the normalized inputs.
pub fn msi(x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
    if x.len() != y.len() {
        return Err(MppError::Dimension(format!("vectors of length {} and {}", x.len(), y.len())));
    }
    let (x, y) = (linalg::normalized(x)?, linalg::normalized(y)?);
    Ok(x.dot(&y).abs().min(1.0))
}

/// [`msi`] of two matrices viewed as vectors.
pub fn matrix_msi(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(MppError::Dimension(format!("shapes {:?} and {:?}", a.shape(), b.shape())));
    }
    msi(&DVector::from_column_slice(a.as_slice()), &DVector::from_column_slice(b.as_slice()))
}

/// `ln ‖Ŵ − W‖_F²`, with the square floored at `1e-300`.
pub fn frobenius_log_error(w_hat: &DMatrix<f64>, w_true: &DMatrix<f64>) -> Result<f64> {
    if w_hat.shape() != w_true.shape() {
        return Err(MppError::Dimension(format!("shapes {:?} and {:?}", w_hat.shape(), w_true.shape())));
    }
    Ok((w_hat - w_true).norm_squared().max(LOG_FLOOR).ln())
}

/// A direction to score observations along.
#[derive(Debug, Clone, Copy)]
pub enum ScoreDirection<'a> {
    /// `u'X_i v`
    Pair(&'a ProjectionPair),
    /// `⟨W, X_i⟩ = tr(W'X_i)`
    Matrix(&'a DMatrix<f64>),
}

pub fn project_scores(sample: &MatrixSample, direction: ScoreDirection<'_>) -> Result<Vec<f64>> {
    match direction {
        ScoreDirection::Pair(pair) => indices::projections(sample, &pair.u, &pair.v),
        ScoreDirection::Matrix(w) => {
            if w.shape() != (sample.p(), sample.q()) {
                return Err(MppError::Dimension(format!(
                    "W is {:?} but observations are {}x{}",
                    w.shape(),
                    sample.p(),
                    sample.q()
                )));
            }
            let q = sample.q();
            Ok((0..sample.n())
                .map(|i| {
                    sample
                        .obs(i)
                        .iter()
                        .enumerate()
                        .map(|(k, x)| w[(k / q, k % q)] * x)
                        .sum()
                })
                .collect())
        }
    }
}

/// Fraction of disagreements under the better of the two label matchings.
pub fn misclassification(predicted: &[u8], truth: &[u8]) -> Result<f64> {
    if predicted.len() != truth.len() || truth.is_empty() {
        return Err(MppError::Dimension("label vectors differ in length or are empty".into()));
    }
    let wrong = predicted.iter().zip(truth).filter(|(a, b)| a != b).count() as f64 / truth.len() as f64;
    Ok(wrong.min(1.0 - wrong))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringResult {
    /// Posterior-argmax component per score, 1 for the lower mean.
    pub labels: Vec<u8>,
    pub means: [f64; 2],
    pub variances: [f64; 2],
    pub weights: [f64; 2],
    pub loglik: f64,
    /// Log-likelihood after each E-step.
    pub loglik_trace: Vec<f64>,
    pub converged: bool,
    pub misclassification: Option<f64>,
}

const EM_MAX_ITERS: usize = 500;
const EM_TOL: f64 = 1e-10;

fn log_normal(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * ((2.0 * std::f64::consts::PI * var).ln() + (x - mean).powi(2) / var)
}

/// Two-component univariate Gaussian mixture by EM, initialized by a split
/// at the median. With `equal_variance` the M-step pools the variance.
/// `truth`, if given, adds the misclassification rate.
pub fn gmm1d_em(scores: &[f64], equal_variance: bool, truth: Option<&[u8]>) -> Result<ClusteringResult> {
    let n = scores.len();
    if n < 4 {
        return Err(MppError::Parameter("EM needs at least four scores".into()));
    }
    let nf = n as f64;
    let mean = scores.iter().sum::<f64>() / nf;
    let total_var = scores.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / nf;
    if !(total_var > 0.0) {
        return Err(MppError::DegenerateProjection("scores are constant".into()));
    }
    let floor = 1e-12 * total_var;

    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let half = n / 2;
    let stats = |xs: &[f64]| {
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        (m, (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).max(floor))
    };
    let (m0, v0) = stats(&sorted[..half]);
    let (m1, v1) = stats(&sorted[half..]);
    let mut means = [m0, m1];
    let mut vars = if equal_variance { [(v0 + v1) / 2.0; 2] } else { [v0, v1] };
    let mut weights = [0.5f64, 0.5];

    let mut resp = vec![0.0; n];
    let mut trace: Vec<f64> = Vec::new();
    let mut converged = false;
    for _ in 0..EM_MAX_ITERS {
        // E-step: resp[i] = P(component 2 | x_i)
        let mut loglik = 0.0;
        for (r, &x) in resp.iter_mut().zip(scores) {
            let a = weights[0].ln() + log_normal(x, means[0], vars[0]);
            let b = weights[1].ln() + log_normal(x, means[1], vars[1]);
            let top = a.max(b);
            let lse = top + ((a - top).exp() + (b - top).exp()).ln();
            *r = (b - lse).exp();
            loglik += lse;
        }
        if let Some(&prev) = trace.last() {
            debug_assert!(
                loglik >= prev - 1e-9 * prev.abs().max(1.0),
                "EM log-likelihood decreased from {prev} to {loglik}"
            );
        }
        let done = trace.last().is_some_and(|&prev: &f64| (loglik - prev).abs() < EM_TOL);
        trace.push(loglik);
        if done {
            converged = true;
            break;
        }
        // M-step
        let n2: f64 = resp.iter().sum();
        let n1 = nf - n2;
        if !(n1 > 0.0 && n2 > 0.0) {
            break;
        }
        weights = [n1 / nf, n2 / nf];
        means = [
            scores.iter().zip(&resp).map(|(x, r)| (1.0 - r) * x).sum::<f64>() / n1,
            scores.iter().zip(&resp).map(|(x, r)| r * x).sum::<f64>() / n2,
        ];
        let ss = [
            scores.iter().zip(&resp).map(|(x, r)| (1.0 - r) * (x - means[0]).powi(2)).sum::<f64>(),
            scores.iter().zip(&resp).map(|(x, r)| r * (x - means[1]).powi(2)).sum::<f64>(),
        ];
        vars = if equal_variance {
            [((ss[0] + ss[1]) / nf).max(floor); 2]
        } else {
            [(ss[0] / n1).max(floor), (ss[1] / n2).max(floor)]
        };
    }

    let mut labels: Vec<u8> = resp.iter().map(|&r| if r > 0.5 { 2 } else { 1 }).collect();
    if means[0] > means[1] {
        means.swap(0, 1);
        vars.swap(0, 1);
        weights.swap(0, 1);
        for l in &mut labels {
            *l = 3 - *l;
        }
    }
    let misclassification = truth.map(|t| misclassification(&labels, t)).transpose()?;
    Ok(ClusteringResult {
        labels,
        means,
        variances: vars,
        weights,
        loglik: *trace.last().expect("at least one E-step"),
        loglik_trace: trace,
        converged,
        misclassification,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdaFit {
    /// `Â⁻¹(T̂₂ − T̂₁)B̂⁻¹`
    pub w: DMatrix<f64>,
    pub row_cov: DMatrix<f64>,
    /// Normalized to trace `q`.
    pub col_cov: DMatrix<f64>,
    pub sweeps: usize,
    pub converged: bool,
}

const LDA_MAX_SWEEPS: usize = 200;
const LDA_TOL: f64 = 1e-8;

/// Supervised plug-in discriminant: group means and the separable
/// covariance MLE of the within-group residuals, by alternating updates.
pub fn lda_baseline(sample: &MatrixSample) -> Result<LdaFit> {
    let labels = sample
        .labels()
        .ok_or_else(|| MppError::Parameter("LDA needs labels".into()))?;
    let (n, p, q) = (sample.n(), sample.p(), sample.q());
    let groups = [sample.group(1), sample.group(2)];
    if groups.iter().any(|g| g.len() < 2) {
        return Err(MppError::Parameter("each class needs at least two members".into()));
    }
    let group_mean = |idx: &[usize]| {
        let mut acc = DMatrix::zeros(p, q);
        for &i in idx {
            acc += sample.observation(i);
        }
        acc / idx.len() as f64
    };
    let means = [group_mean(&groups[0]), group_mean(&groups[1])];
    let residuals: Vec<DMatrix<f64>> =
        (0..n).map(|i| sample.observation(i) - &means[usize::from(labels[i] - 1)]).collect();

    let mut a = DMatrix::<f64>::identity(p, p);
    let mut b = DMatrix::<f64>::identity(q, q);
    let invert = |m: &DMatrix<f64>, name: &str| {
        m.clone()
            .cholesky()
            .map(|c| c.inverse())
            .ok_or_else(|| MppError::DegenerateProjection(format!("{name} update is singular")))
    };
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < LDA_MAX_SWEEPS {
        sweeps += 1;
        let b_inv = invert(&b, "column covariance")?;
        let mut a_new = DMatrix::zeros(p, p);
        for e in &residuals {
            a_new += e * &b_inv * e.transpose();
        }
        a_new /= (n * q) as f64;
        let a_inv = invert(&a_new, "row covariance")?;
        let mut b_new = DMatrix::zeros(q, q);
        for e in &residuals {
            b_new += e.transpose() * &a_inv * e;
        }
        b_new /= (n * p) as f64;
        let c = b_new.trace() / q as f64;
        b_new /= c;
        a_new *= c;
        let change = (&a_new - &a).norm() / a.norm() + (&b_new - &b).norm() / b.norm();
        a = a_new;
        b = b_new;
        if change < LDA_TOL {
            converged = true;
            break;
        }
    }
    let w = invert(&a, "row covariance")? * (&means[1] - &means[0]) * invert(&b, "column covariance")?;
    Ok(LdaFit { w, row_cov: a, col_cov: b, sweeps, converged })
}

const MPCA_TOL: f64 = 1e-10;
const MPCA_MAX_ITERS: usize = 1000;

/// Top eigenvector with ties broken towards the lexicographically largest
/// vector, so that the sign is canonical too.
fn top_eigenvector(m: &DMatrix<f64>) -> DVector<f64> {
    let (values, vectors) = linalg::sym_eigen_desc(m);
    let top = values[0];
    let mut best = linalg::canonical_sign(vectors.column(0).into_owned());
    for k in 1..values.len() {
        if (top - values[k]).abs() > 1e-12 * top.abs().max(1e-300) {
            break;
        }
        let cand = linalg::canonical_sign(vectors.column(k).into_owned());
        if cand.iter().partial_cmp(best.iter()) == Some(std::cmp::Ordering::Greater) {
            best = cand;
        }
    }
    best
}

/// MPCA pairs maximizing `(1/n)Σ(u'Y_iv)²` by alternating top-eigenvector
/// updates, each later pair restricted to the ordinary orthogonal
/// complement of the earlier `u`'s and `v`'s. The sample is centered here.
/// Pair values are the index values.
pub fn mpca_baseline(sample: &MatrixSample, n_pairs: usize) -> Result<Vec<ProjectionPair>> {
    let centered = indices::center(sample)?;
    let (p, q) = (centered.p(), centered.q());
    if n_pairs == 0 || n_pairs > p.min(q) {
        return Err(MppError::Parameter(format!("n_pairs = {n_pairs} must lie in 1..={}", p.min(q))));
    }
    let (mut us, mut vs): (Vec<DVector<f64>>, Vec<DVector<f64>>) = (Vec::new(), Vec::new());
    let mut pairs = Vec::new();
    for _ in 0..n_pairs {
        let bu = linalg::orthogonal_complement(&us, p)?;
        let bv = linalg::orthogonal_complement(&vs, q)?;
        let reduced = centered.transform(&bu.transpose(), &bv, None)?;
        let mut v = top_eigenvector(&indices::column_scatter(&reduced));
        let mut u = top_eigenvector(&indices::row_constraint_matrix(&reduced, &v)?);
        for _ in 0..MPCA_MAX_ITERS {
            let v_new = top_eigenvector(&indices::column_constraint_matrix(&reduced, &u)?);
            let u_new = top_eigenvector(&indices::row_constraint_matrix(&reduced, &v_new)?);
            let change = (&u_new - &u).norm_squared() + (&v_new - &v).norm_squared();
            u = u_new;
            v = v_new;
            if change < MPCA_TOL {
                break;
            }
        }
        let (u, v) = (linalg::canonical_sign(&bu * u), linalg::canonical_sign(&bv * v));
        let value = indices::kappa2_sample(&centered, &u, &v)?;
        us.push(u.clone());
        vs.push(v.clone());
        pairs.push(ProjectionPair { u, v, value });
    }
    Ok(pairs)
}

/// (2D)²PCA directions: top eigenvectors of `(1/n)ΣY_iY_i'` and
/// `(1/n)ΣY_i'Y_i` after centering.
pub fn twod2pca_baseline(sample: &MatrixSample) -> Result<(DVector<f64>, DVector<f64>)> {
    let centered = indices::center(sample)?;
    Ok((top_eigenvector(&indices::row_scatter(&centered)), top_eigenvector(&indices::column_scatter(&centered))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{self, MatrixNormalParams, MixtureParams};
    use crate::seed;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(x)
    }

    #[test]
    fn msi_examples() {
        assert_eq!(msi(&v(&[1.0, 0.0]), &v(&[1.0, 0.0])).unwrap(), 1.0);
        assert_eq!(msi(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap(), 0.0);
        let h = msi(&v(&[1.0, 0.0]), &v(&[1.0, 1.0])).unwrap();
        assert!((h - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(msi(&v(&[-2.0, 0.0]), &v(&[3.0, 0.0])).unwrap(), 1.0);
    }

    #[test]
    fn frobenius_examples() {
        let w = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(frobenius_log_error(&w, &w).unwrap(), 1e-300f64.ln());
        let e = DMatrix::from_row_slice(2, 2, &[0.6, 0.0, 0.0, 0.8]);
        assert!(frobenius_log_error(&(&w + e), &w).unwrap().abs() < 1e-15);
        let mut rng = seed::rng(3);
        let a = DMatrix::from_fn(3, 4, |_, _| rng.sample::<f64, _>(StandardNormal));
        let b = DMatrix::from_fn(3, 4, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut brute = 0.0;
        for i in 0..3 {
            for j in 0..4 {
                brute += (a[(i, j)] - b[(i, j)]) * (a[(i, j)] - b[(i, j)]);
            }
        }
        assert!((frobenius_log_error(&a, &b).unwrap() - f64::ln(brute)).abs() < 1e-12);
    }

    #[test]
    fn score_examples() {
        let mix = model::model_two(0.3, 1).unwrap();
        let s = model::sample_mixture(&mix, 20, 1).unwrap();
        let mut w = DMatrix::zeros(5, 3);
        w[(2, 1)] = 1.0;
        let scores = project_scores(&s, ScoreDirection::Matrix(&w)).unwrap();
        for (i, x) in scores.iter().enumerate() {
            assert_eq!(*x, s.observation(i)[(2, 1)]);
        }
        let pair = ProjectionPair::new(&v(&[1.0, 2.0, 0.0, -1.0, 0.5]), &v(&[0.3, 1.0, -1.0]), 0.0).unwrap();
        let a = project_scores(&s, ScoreDirection::Pair(&pair)).unwrap();
        let b = project_scores(&s, ScoreDirection::Matrix(&pair.outer())).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-12));
        let zero = project_scores(&s, ScoreDirection::Matrix(&DMatrix::zeros(5, 3))).unwrap();
        assert!(zero.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn em_separates_point_masses() {
        let mut rng = seed::rng(1);
        let truth: Vec<u8> = (0..1000).map(|i| if i % 3 == 0 { 2 } else { 1 }).collect();
        let scores: Vec<f64> = truth
            .iter()
            .map(|&g| if g == 1 { 0.0 } else { 10.0 } + 0.01 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        for equal in [true, false] {
            let fit = gmm1d_em(&scores, equal, Some(&truth)).unwrap();
            assert_eq!(fit.misclassification, Some(0.0));
            assert!((fit.weights[0] - 2.0 / 3.0).abs() < 1e-3);
            assert!(fit.loglik_trace.windows(2).all(|w| w[1] >= w[0] - 1e-9 * w[0].abs()));
        }
    }

    #[test]
    fn em_without_signal_is_a_coin_flip() {
        let mut rng = seed::rng(2);
        let scores: Vec<f64> = (0..4000).map(|_| rng.sample(StandardNormal)).collect();
        let truth: Vec<u8> = (0..4000).map(|_| if rng.random::<bool>() { 1 } else { 2 }).collect();
        let fit = gmm1d_em(&scores, true, Some(&truth)).unwrap();
        assert!(fit.misclassification.unwrap() > 0.45);
        assert!(gmm1d_em(&[1.0; 10], true, None).is_err());
        assert!(gmm1d_em(&[1.0, 2.0, 3.0], true, None).is_err());
    }

    #[test]
    fn lda_with_identity_covariances() {
        let h = DMatrix::from_row_slice(2, 3, &[2.0, 0.0, -1.0, 0.5, 1.0, 0.0]);
        let mix = MixtureParams::new(0.4, DMatrix::zeros(2, 3), h.clone(), DMatrix::identity(2, 2), DMatrix::identity(3, 3)).unwrap();
        let s = model::sample_mixture(&mix, 20_000, 4).unwrap();
        let fit = lda_baseline(&s).unwrap();
        assert!(fit.converged);
        assert!((fit.col_cov.trace() - 3.0).abs() < 1e-12);
        assert!((&fit.w - &h).amax() < 0.1);
        assert!(lda_baseline(&s.clone().with_labels(None).unwrap()).is_err());
    }

    #[test]
    fn lda_recovers_model_one_direction() {
        let mix = model::model_one(0.3, 5).unwrap();
        let s = model::sample_mixture(&mix, 16_000, 5).unwrap();
        let fit = lda_baseline(&s).unwrap();
        assert!(matrix_msi(&fit.w, &model::w_lda(&mix).unwrap()).unwrap() >= 0.99);
    }

    #[test]
    fn second_moment_baselines_follow_row_covariance() {
        let a = DMatrix::from_diagonal(&v(&[9.0, 1.0, 1.0]));
        let params = MatrixNormalParams::new(DMatrix::zeros(3, 2), a, DMatrix::identity(2, 2)).unwrap();
        let s = model::sample_matrix_normal(&params, 5000, 6).unwrap();
        let e1 = v(&[1.0, 0.0, 0.0]);
        assert!(msi(&mpca_baseline(&s, 1).unwrap()[0].u, &e1).unwrap() > 0.99);
        assert!(msi(&twod2pca_baseline(&s).unwrap().0, &e1).unwrap() > 0.99);
    }

    #[test]
    fn twod2pca_swaps_under_transpose() {
        let mix = model::model_two(0.3, 2).unwrap();
        let s = model::sample_mixture(&mix, 500, 7).unwrap();
        let (u, w) = twod2pca_baseline(&s).unwrap();
        let (u_t, w_t) = twod2pca_baseline(&s.transpose()).unwrap();
        assert!((u - w_t).amax() < 1e-10);
        assert!((w - u_t).amax() < 1e-10);
    }

    #[test]
    fn mpca_pairs_are_orthonormal() {
        let mix = model::model_two(0.3, 2).unwrap();
        let s = model::sample_mixture(&mix, 2000, 8).unwrap();
        let pairs = mpca_baseline(&s, 3).unwrap();
        for i in 0..3 {
            assert!((pairs[i].u.norm() - 1.0).abs() < 1e-12);
            for j in 0..i {
                assert!(pairs[i].u.dot(&pairs[j].u).abs() < 1e-10);
                assert!(pairs[i].v.dot(&pairs[j].v).abs() < 1e-10);
            }
        }
        assert!(pairs[0].value >= pairs[1].value);
    }
}
