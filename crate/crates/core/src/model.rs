//! Two-component matrix-normal mixtures: sampling and closed-form
//! population quantities.
//!
//! A matrix normal `N(T, A, B)` is the law of `T + A^{1/2} Z B^{1/2}` with
//! `Z` having i.i.d. standard normal entries, so `vec(X)` has covariance
//! `B ⊗ A`. The mixture `α₁ N(T₁, A, B) + α₂ N(T₂, A, B)` shares the
//! covariances between components; `H = T₂ − T₁`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{MppError, Result};
use crate::linalg;
use crate::seed;

/// Relative tolerance below which singular values count as zero.
const RANK_TOL: f64 = 1e-10;

/// Relative residual under which a vector counts as an eigenvector.
const EIGENVECTOR_TOL: f64 = 1e-8;

/// Absolute tolerance for matching the degenerate regime boundary.
const REGIME_TOL: f64 = 1e-12;

/// `1/√12`: the distance from 1/2 at which the mixing proportion makes
/// every projection mesokurtic.
pub fn regime_boundary() -> f64 {
    1.0 / 12f64.sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixNormalParams {
    pub mean: DMatrix<f64>,
    pub row_cov: DMatrix<f64>,
    pub col_cov: DMatrix<f64>,
}

impl MatrixNormalParams {
    pub fn new(mean: DMatrix<f64>, row_cov: DMatrix<f64>, col_cov: DMatrix<f64>) -> Result<Self> {
        let params = Self { mean, row_cov, col_cov };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let (p, q) = self.mean.shape();
        if p == 0 || q == 0 {
            return Err(MppError::Parameter("mean matrix must be non-empty".into()));
        }
        if self.row_cov.shape() != (p, p) || self.col_cov.shape() != (q, q) {
            return Err(MppError::Dimension(format!(
                "mean is {p}x{q} but covariances are {:?} and {:?}",
                self.row_cov.shape(),
                self.col_cov.shape()
            )));
        }
        if self.mean.iter().any(|x| !x.is_finite()) {
            return Err(MppError::Parameter("mean has non-finite entries".into()));
        }
        linalg::check_spd(&self.row_cov, "row covariance A")?;
        linalg::check_spd(&self.col_cov, "column covariance B")
    }

    pub fn p(&self) -> usize {
        self.mean.nrows()
    }

    pub fn q(&self) -> usize {
        self.mean.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureParams {
    pub alpha1: f64,
    pub t1: DMatrix<f64>,
    pub t2: DMatrix<f64>,
    pub row_cov: DMatrix<f64>,
    pub col_cov: DMatrix<f64>,
}

impl MixtureParams {
    pub fn new(
        alpha1: f64,
        t1: DMatrix<f64>,
        t2: DMatrix<f64>,
        row_cov: DMatrix<f64>,
        col_cov: DMatrix<f64>,
    ) -> Result<Self> {
        let mix = Self { alpha1, t1, t2, row_cov, col_cov };
        mix.validate()?;
        Ok(mix)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha1 > 0.0 && self.alpha1 < 1.0) {
            return Err(MppError::Parameter(format!("alpha1 = {} is not in (0, 1)", self.alpha1)));
        }
        if self.t1.shape() != self.t2.shape() {
            return Err(MppError::Dimension("T1 and T2 differ in shape".into()));
        }
        self.component(1).validate()?;
        if self.t2.iter().any(|x| !x.is_finite()) {
            return Err(MppError::Parameter("T2 has non-finite entries".into()));
        }
        if !((&self.t2 - &self.t1).norm() > 0.0) {
            return Err(MppError::Parameter("component means must differ".into()));
        }
        Ok(())
    }

    pub fn p(&self) -> usize {
        self.t1.nrows()
    }

    pub fn q(&self) -> usize {
        self.t1.ncols()
    }

    pub fn alpha2(&self) -> f64 {
        1.0 - self.alpha1
    }

    /// `α₁α₂`
    pub fn beta(&self) -> f64 {
        self.alpha1 * self.alpha2()
    }

    /// `α₁³ + α₂³`
    pub fn gamma(&self) -> f64 {
        self.alpha1.powi(3) + self.alpha2().powi(3)
    }

    /// `H = T₂ − T₁`
    pub fn mean_difference(&self) -> DMatrix<f64> {
        &self.t2 - &self.t1
    }

    /// Pooled mean `α₁T₁ + α₂T₂`.
    pub fn mean(&self) -> DMatrix<f64> {
        &self.t1 * self.alpha1 + &self.t2 * self.alpha2()
    }

    /// `R = A^{-1/2} H B^{-1/2}`, the mean difference of the standardized
    /// observations.
    pub fn standardized_difference(&self) -> DMatrix<f64> {
        linalg::sym_inv_sqrt(&self.row_cov) * self.mean_difference() * linalg::sym_inv_sqrt(&self.col_cov)
    }

    /// `d = rank(R)`.
    pub fn rank(&self) -> usize {
        let sv = self.standardized_difference().singular_values();
        let top = sv.max();
        sv.iter().filter(|&&s| s > RANK_TOL * top).count()
    }

    /// Component `k ∈ {1, 2}` as a stand-alone matrix normal.
    pub fn component(&self, k: u8) -> MatrixNormalParams {
        MatrixNormalParams {
            mean: if k == 1 { self.t1.clone() } else { self.t2.clone() },
            row_cov: self.row_cov.clone(),
            col_cov: self.col_cov.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixingRegime {
    /// `|α₁ − 1/2| < 1/√12`: separating directions minimize kurtosis.
    Minimize,
    /// `|α₁ − 1/2| > 1/√12`: separating directions maximize kurtosis.
    Maximize,
    /// On the boundary every projection has kurtosis 3.
    Degenerate,
}

pub fn mixing_regime(alpha1: f64) -> Result<MixingRegime> {
    if !(alpha1 > 0.0 && alpha1 < 1.0) {
        return Err(MppError::Parameter(format!("alpha1 = {alpha1} is not in (0, 1)")));
    }
    let offset = (alpha1 - 0.5).abs() - regime_boundary();
    Ok(if offset.abs() <= REGIME_TOL {
        MixingRegime::Degenerate
    } else if offset < 0.0 {
        MixingRegime::Minimize
    } else {
        MixingRegime::Maximize
    })
}

/// An `n × p × q` stack of real matrices, stored observation-major and
/// row-major within each observation.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSample {
    n: usize,
    p: usize,
    q: usize,
    data: Vec<f64>,
    labels: Option<Vec<u8>>,
}

impl MatrixSample {
    pub fn new(n: usize, p: usize, q: usize, data: Vec<f64>, labels: Option<Vec<u8>>) -> Result<Self> {
        if n == 0 || p == 0 || q == 0 {
            return Err(MppError::Parameter(format!("empty sample shape {n}x{p}x{q}")));
        }
        if data.len() != n * p * q {
            return Err(MppError::Dimension(format!(
                "expected {} values for {n}x{p}x{q}, got {}",
                n * p * q,
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(MppError::Parameter("sample has non-finite entries".into()));
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(MppError::Dimension(format!("{} labels for {n} observations", l.len())));
            }
            if l.iter().any(|&g| g != 1 && g != 2) {
                return Err(MppError::Parameter("labels must be 1 or 2".into()));
            }
        }
        Ok(Self { n, p, q, data, labels })
    }

    pub fn from_matrices(mats: &[DMatrix<f64>], labels: Option<Vec<u8>>) -> Result<Self> {
        let first = mats
            .first()
            .ok_or_else(|| MppError::Parameter("no observations".into()))?;
        let (p, q) = first.shape();
        let mut data = Vec::with_capacity(mats.len() * p * q);
        for m in mats {
            if m.shape() != (p, q) {
                return Err(MppError::Dimension("observations differ in shape".into()));
            }
            for r in 0..p {
                for c in 0..q {
                    data.push(m[(r, c)]);
                }
            }
        }
        Self::new(mats.len(), p, q, data, labels)
    }

    /// Wraps `n` vectors of length `m` as `m × 1` matrices.
    pub fn from_vectors(n: usize, m: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(n, m, 1, data, None)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    pub fn with_labels(mut self, labels: Option<Vec<u8>>) -> Result<Self> {
        let n = self.n;
        if let Some(l) = &labels {
            if l.len() != n || l.iter().any(|&g| g != 1 && g != 2) {
                return Err(MppError::Parameter("labels must be n values in {1, 2}".into()));
            }
        }
        self.labels = labels;
        Ok(self)
    }

    /// Row-major entries of observation `i`.
    pub fn obs(&self, i: usize) -> &[f64] {
        let len = self.p * self.q;
        &self.data[i * len..(i + 1) * len]
    }

    pub fn observation(&self, i: usize) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.p, self.q, self.obs(i))
    }

    pub fn observations(&self) -> impl Iterator<Item = DMatrix<f64>> + '_ {
        (0..self.n).map(move |i| self.observation(i))
    }

    /// Entrywise sample mean `X̄`.
    pub fn mean(&self) -> DMatrix<f64> {
        let len = self.p * self.q;
        let mut acc = vec![0.0; len];
        for i in 0..self.n {
            for (a, x) in acc.iter_mut().zip(self.obs(i)) {
                *a += x;
            }
        }
        let inv = 1.0 / self.n as f64;
        DMatrix::from_row_slice(self.p, self.q, &acc) * inv
    }

    /// Mean squared Frobenius norm `(1/n) Σ ‖X_i‖²`.
    pub fn mean_square(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>() / self.n as f64
    }

    pub fn transpose(&self) -> MatrixSample {
        let (p, q) = (self.p, self.q);
        let mut data = Vec::with_capacity(self.data.len());
        for i in 0..self.n {
            let x = self.obs(i);
            for c in 0..q {
                for r in 0..p {
                    data.push(x[r * q + c]);
                }
            }
        }
        MatrixSample { n: self.n, p: q, q: p, data, labels: self.labels.clone() }
    }

    /// Maps every observation `X_i ↦ L X_i R + C`.
    pub fn transform(
        &self,
        left: &DMatrix<f64>,
        right: &DMatrix<f64>,
        shift: Option<&DMatrix<f64>>,
    ) -> Result<MatrixSample> {
        if left.ncols() != self.p || right.nrows() != self.q {
            return Err(MppError::Dimension(format!(
                "cannot apply {:?} · ({}x{}) · {:?}",
                left.shape(),
                self.p,
                self.q,
                right.shape()
            )));
        }
        let (p2, q2) = (left.nrows(), right.ncols());
        if let Some(c) = shift {
            if c.shape() != (p2, q2) {
                return Err(MppError::Dimension("shift has the wrong shape".into()));
            }
        }
        let mut data = Vec::with_capacity(self.n * p2 * q2);
        for i in 0..self.n {
            let mut y = left * self.observation(i) * right;
            if let Some(c) = shift {
                y += c;
            }
            for r in 0..p2 {
                for c in 0..q2 {
                    data.push(y[(r, c)]);
                }
            }
        }
        MatrixSample::new(self.n, p2, q2, data, self.labels.clone())
    }

    /// Observations carrying label `g`.
    pub fn group(&self, g: u8) -> Vec<usize> {
        match &self.labels {
            Some(l) => (0..self.n).filter(|&i| l[i] == g).collect(),
            None => Vec::new(),
        }
    }
}

/// Writes `T + L Z R` for a fresh standard normal `Z` into `out` (row-major).
fn draw_into<G: Rng + ?Sized>(
    rng: &mut G,
    mean: &DMatrix<f64>,
    left: &DMatrix<f64>,
    right: &DMatrix<f64>,
    z: &mut [f64],
    lz: &mut [f64],
    out: &mut [f64],
) {
    let (p, q) = mean.shape();
    for x in z.iter_mut() {
        *x = rng.sample(StandardNormal);
    }
    for r in 0..p {
        for c in 0..q {
            let mut acc = 0.0;
            for k in 0..p {
                acc += left[(r, k)] * z[k * q + c];
            }
            lz[r * q + c] = acc;
        }
    }
    for r in 0..p {
        for c in 0..q {
            let mut acc = mean[(r, c)];
            for k in 0..q {
                acc += lz[r * q + k] * right[(k, c)];
            }
            out[r * q + c] = acc;
        }
    }
}

/// Draws `n` i.i.d. observations `T + A^{1/2} Z B^{1/2}`.
pub fn sample_matrix_normal(params: &MatrixNormalParams, n: usize, seed: u64) -> Result<MatrixSample> {
    params.validate()?;
    if n == 0 {
        return Err(MppError::Parameter("n must be positive".into()));
    }
    let (p, q) = (params.p(), params.q());
    let left = linalg::sym_sqrt(&params.row_cov);
    let right = linalg::sym_sqrt(&params.col_cov);
    let mut rng = seed::rng(seed);
    let mut data = vec![0.0; n * p * q];
    let (mut z, mut lz) = (vec![0.0; p * q], vec![0.0; p * q]);
    for chunk in data.chunks_exact_mut(p * q) {
        draw_into(&mut rng, &params.mean, &left, &right, &mut z, &mut lz, chunk);
    }
    MatrixSample::new(n, p, q, data, None)
}

/// Draws `n` observations from the mixture, recording the component label
/// (1 or 2) of each.
pub fn sample_mixture(mix: &MixtureParams, n: usize, seed: u64) -> Result<MatrixSample> {
    mix.validate()?;
    if n == 0 {
        return Err(MppError::Parameter("n must be positive".into()));
    }
    let (p, q) = (mix.p(), mix.q());
    let left = linalg::sym_sqrt(&mix.row_cov);
    let right = linalg::sym_sqrt(&mix.col_cov);
    let mut rng = seed::rng(seed);
    let mut data = vec![0.0; n * p * q];
    let mut labels = Vec::with_capacity(n);
    let (mut z, mut lz) = (vec![0.0; p * q], vec![0.0; p * q]);
    for chunk in data.chunks_exact_mut(p * q) {
        let first = rng.random::<f64>() < mix.alpha1;
        labels.push(if first { 1 } else { 2 });
        let mean = if first { &mix.t1 } else { &mix.t2 };
        draw_into(&mut rng, mean, &left, &right, &mut z, &mut lz, chunk);
    }
    MatrixSample::new(n, p, q, data, Some(labels))
}

/// AR(1) correlation matrix with entries `rho^|i−j|`.
pub fn ar1_covariance(dim: usize, rho: f64) -> Result<DMatrix<f64>> {
    if dim == 0 {
        return Err(MppError::Parameter("dimension must be positive".into()));
    }
    if !(rho.abs() < 1.0) {
        return Err(MppError::Parameter(format!("AR(1) coefficient {rho} must satisfy |rho| < 1")));
    }
    Ok(DMatrix::from_fn(dim, dim, |i, j| rho.powi(i.abs_diff(j) as i32)))
}

/// `W_LDA = A⁻¹ (T₂ − T₁) B⁻¹`.
pub fn w_lda(mix: &MixtureParams) -> Result<DMatrix<f64>> {
    mix.validate()?;
    let a_inv = mix
        .row_cov
        .clone()
        .cholesky()
        .ok_or_else(|| MppError::Parameter("A is not positive definite".into()))?
        .inverse();
    let b_inv = mix
        .col_cov
        .clone()
        .cholesky()
        .ok_or_else(|| MppError::Parameter("B is not positive definite".into()))?
        .inverse();
    Ok(a_inv * mix.mean_difference() * b_inv)
}

fn check_dims(mix: &MixtureParams, u: &DVector<f64>, v: Option<&DVector<f64>>) -> Result<()> {
    if u.len() != mix.p() {
        return Err(MppError::Dimension(format!("u has length {}, expected {}", u.len(), mix.p())));
    }
    if let Some(v) = v {
        if v.len() != mix.q() {
            return Err(MppError::Dimension(format!("v has length {}, expected {}", v.len(), mix.q())));
        }
    }
    Ok(())
}

/// `3 + β(γ−3β)·(z/(1+βz))²` as a function of the signal ratio `z`; with
/// `3` replaced by `base` this also gives the Mardia-type index.
fn kurtosis_from_ratio(base: f64, beta: f64, gamma: f64, z: f64) -> f64 {
    let g = z / (1.0 + beta * z);
    base + beta * (gamma - 3.0 * beta) * g * g
}

/// Signal-to-noise ratio `z = (u'Hv)² / (u'Au · v'Bv)` of a projection.
pub fn projection_ratio(mix: &MixtureParams, u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
    check_dims(mix, u, Some(v))?;
    let h = mix.mean_difference();
    let signal = u.dot(&(&h * v));
    let noise = u.dot(&(&mix.row_cov * u)) * v.dot(&(&mix.col_cov * v));
    if !(noise > 0.0) {
        return Err(MppError::DegenerateProjection("u'Au · v'Bv is not positive".into()));
    }
    Ok(signal * signal / noise)
}

/// Population kurtosis `κ_X(u, v)` of `u'Xv`. Scale-invariant in `u` and
/// `v`, so non-unit inputs are accepted.
pub fn population_kappa(mix: &MixtureParams, u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
    let z = projection_ratio(mix, u, v)?;
    Ok(kurtosis_from_ratio(3.0, mix.beta(), mix.gamma(), z))
}

/// Central moments `(m₂, m₃, m₄)` of the projection `u'Xv`.
pub fn population_moments(mix: &MixtureParams, u: &DVector<f64>, v: &DVector<f64>) -> Result<(f64, f64, f64)> {
    check_dims(mix, u, Some(v))?;
    let (a1, a2) = (mix.alpha1, mix.alpha2());
    let s2 = u.dot(&(&mix.row_cov * u)) * v.dot(&(&mix.col_cov * v));
    let m = u.dot(&(mix.mean_difference() * v));
    // component means relative to the pooled mean
    let (d1, d2) = (-a2 * m, a1 * m);
    let m2 = s2 + a1 * d1 * d1 + a2 * d2 * d2;
    let m3 = a1 * d1.powi(3) + a2 * d2.powi(3);
    let m4 = a1 * (d1.powi(4) + 6.0 * d1 * d1 * s2 + 3.0 * s2 * s2)
        + a2 * (d2.powi(4) + 6.0 * d2 * d2 * s2 + 3.0 * s2 * s2);
    Ok((m2, m3, m4))
}

/// MPCA index `E[(u'X̃v)²] = u'Au · v'Bv + α₁α₂(u'Hv)²`.
pub fn population_kappa2(mix: &MixtureParams, u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
    Ok(population_moments(mix, u, v)?.0)
}

/// Population Mardia-type index `ψ_X(u)`:
/// `q(q+2) + β(γ−3β)(z/(1+βz))²` with `z = u'HB⁻¹H'u / u'Au`, which equals
/// `u₀'RR'u₀/‖u₀‖²` for `u₀ = A^{1/2}u`.
pub fn population_psi(mix: &MixtureParams, u: &DVector<f64>) -> Result<f64> {
    check_dims(mix, u, None)?;
    let h = mix.mean_difference();
    let b_inv = linalg::sym_inv(&mix.col_cov);
    let htu = h.transpose() * u;
    let noise = u.dot(&(&mix.row_cov * u));
    if !(noise > 0.0) {
        return Err(MppError::DegenerateProjection("u'Au is not positive".into()));
    }
    let z = htu.dot(&(&b_inv * &htu)) / noise;
    let q = mix.q() as f64;
    Ok(kurtosis_from_ratio(q * (q + 2.0), mix.beta(), mix.gamma(), z))
}

/// `ψ_{X'}(v)`: [`population_psi`] of the transposed mixture.
pub fn population_psi_transpose(mix: &MixtureParams, v: &DVector<f64>) -> Result<f64> {
    population_psi(&transpose_mixture(mix), v)
}

/// The mixture of `X'`: means transposed, row and column covariances swapped.
pub fn transpose_mixture(mix: &MixtureParams) -> MixtureParams {
    MixtureParams {
        alpha1: mix.alpha1,
        t1: mix.t1.transpose(),
        t2: mix.t2.transpose(),
        row_cov: mix.col_cov.clone(),
        col_cov: mix.row_cov.clone(),
    }
}

/// Population constraint matrix `E[X̃ v v' X̃'] = v'Bv · A + α₁α₂ Hvv'H'`.
pub fn population_row_constraint(mix: &MixtureParams, v: &DVector<f64>) -> DMatrix<f64> {
    let hv = mix.mean_difference() * v;
    &mix.row_cov * v.dot(&(&mix.col_cov * v)) + &hv * hv.transpose() * mix.beta()
}

/// The population-optimal pairs: `(A^{-1/2}u₀ⱼ, B^{-1/2}v₀ⱼ)` normalized,
/// for the singular pairs `(u₀ⱼ, v₀ⱼ, σⱼ)` of `R = A^{-1/2}HB^{-1/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticPair {
    pub u: DVector<f64>,
    pub v: DVector<f64>,
    /// Singular value `σⱼ` of `R`.
    pub sigma: f64,
}

/// Analytic optimizers for every non-zero singular value of `R`, in
/// decreasing order of `σ`. Signs are fixed so that `u'Hv > 0`.
pub fn analytic_pairs(mix: &MixtureParams) -> Result<Vec<AnalyticPair>> {
    mix.validate()?;
    let a_is = linalg::sym_inv_sqrt(&mix.row_cov);
    let b_is = linalg::sym_inv_sqrt(&mix.col_cov);
    let r = &a_is * mix.mean_difference() * &b_is;
    let svd = r.svd(true, true);
    let u0 = svd.u.as_ref().expect("left singular vectors requested");
    let v0t = svd.v_t.as_ref().expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let top = svd.singular_values[order[0]];
    let mut pairs = Vec::new();
    for j in order {
        let sigma = svd.singular_values[j];
        if !(sigma > RANK_TOL * top) {
            break;
        }
        let u = linalg::normalized(&(&a_is * u0.column(j)))?;
        let v = linalg::normalized(&(&b_is * v0t.row(j).transpose()))?;
        pairs.push(AnalyticPair { u, v, sigma });
    }
    Ok(pairs)
}

/// Splits a rank-1 `H` into `a b'` with `‖b‖ = 1`.
fn rank_one_factors(mix: &MixtureParams) -> Result<(DVector<f64>, DVector<f64>)> {
    let h = mix.mean_difference();
    let svd = h.svd(true, true);
    let sv = &svd.singular_values;
    let (imax, top) = sv.argmax();
    let rank = sv.iter().filter(|&&s| s > RANK_TOL * top).count();
    if rank != 1 {
        return Err(MppError::Precondition(format!("T2 − T1 has rank {rank}, expected 1")));
    }
    let u = svd.u.as_ref().expect("requested").column(imax) * top;
    let v = svd.v_t.as_ref().expect("requested").row(imax).transpose();
    Ok((u, v))
}

/// Whether `(2D)²PCA`'s row index `u ↦ E[u'X̃X̃'u]` is uniquely maximized at
/// the LDA row direction for a rank-1 mean difference `H = ab'`: `a` must be
/// an eigenvector of `A` (eigenvalue `λ`) and the second-largest eigenvalue
/// `φ₂` of `tr(B)A + α₁α₂‖b‖²aa'` must satisfy
/// `φ₂ < λ(tr(B) + α₁α₂ a'A⁻¹a ‖b‖²)`.
pub fn second_order_psi2_condition(mix: &MixtureParams) -> Result<bool> {
    mix.validate()?;
    let (a, b) = rank_one_factors(mix)?;
    let amat = &mix.row_cov;
    if linalg::eigenvector_residual(amat, &a) >= EIGENVECTOR_TOL {
        return Ok(false);
    }
    let lambda = a.dot(&(amat * &a)) / a.norm_squared();
    let beta = mix.beta();
    let tr_b = mix.col_cov.trace();
    let m = amat * tr_b + &a * a.transpose() * (beta * b.norm_squared());
    let (values, _) = linalg::sym_eigen_desc(&m);
    if values.len() < 2 {
        return Ok(true);
    }
    let phi2 = values[1];
    let a_inv_a = a.dot(&(linalg::sym_inv(amat) * &a));
    let rhs = lambda * (tr_b + beta * a_inv_a * b.norm_squared());
    // rhs is the eigenvalue belonging to `a`; a tie with φ₂ is not strict
    Ok(phi2 < rhs - 1e-10 * rhs.abs())
}

/// Whether MPCA's index `E[(u'X̃v)²]` is uniquely maximized at the LDA pair
/// for a rank-1 mean difference `H = ab'`: `a`, `b` must be eigenvectors of
/// `A`, `B` with eigenvalues `σ_a`, `λ_b` and
/// `σ_a λ_b + α₁α₂‖a‖²‖b‖² > σ₁λ₁` for the largest eigenvalues `σ₁`, `λ₁`.
pub fn second_order_kappa2_condition(mix: &MixtureParams) -> Result<bool> {
    mix.validate()?;
    let (a, b) = rank_one_factors(mix)?;
    let (amat, bmat) = (&mix.row_cov, &mix.col_cov);
    if linalg::eigenvector_residual(amat, &a) >= EIGENVECTOR_TOL
        || linalg::eigenvector_residual(bmat, &b) >= EIGENVECTOR_TOL
    {
        return Ok(false);
    }
    let sigma_a = a.dot(&(amat * &a)) / a.norm_squared();
    let lambda_b = b.dot(&(bmat * &b)) / b.norm_squared();
    let sigma_1 = linalg::sym_eigen_desc(amat).0[0];
    let lambda_1 = linalg::sym_eigen_desc(bmat).0[0];
    Ok(sigma_a * lambda_b + mix.beta() * a.norm_squared() * b.norm_squared() > sigma_1 * lambda_1)
}

/// A mixture with `T₁ = 0` and `T₂ = A^{1/2} U Λ V' B^{1/2}`, where `U`, `V`
/// are random orthogonal matrices drawn from `seed` and `Λ` is `p × q` with
/// the given singular values on its diagonal. The standardized mean
/// difference then has exactly these singular values.
pub fn planted_mixture(
    alpha1: f64,
    row_cov: DMatrix<f64>,
    col_cov: DMatrix<f64>,
    singular_values: &[f64],
    seed: u64,
) -> Result<MixtureParams> {
    let (p, q) = (row_cov.nrows(), col_cov.nrows());
    if singular_values.is_empty() || singular_values.len() > p.min(q) {
        return Err(MppError::Parameter(format!(
            "need between 1 and {} singular values, got {}",
            p.min(q),
            singular_values.len()
        )));
    }
    if singular_values.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
        return Err(MppError::Parameter("singular values must be positive".into()));
    }
    linalg::check_spd(&row_cov, "row covariance A")?;
    linalg::check_spd(&col_cov, "column covariance B")?;
    let mut rng = seed::rng(seed);
    let u = linalg::random_orthogonal(&mut rng, p);
    let v = linalg::random_orthogonal(&mut rng, q);
    let mut lambda = DMatrix::zeros(p, q);
    for (j, &s) in singular_values.iter().enumerate() {
        lambda[(j, j)] = s;
    }
    let t2 = linalg::sym_sqrt(&row_cov) * u * lambda * v.transpose() * linalg::sym_sqrt(&col_cov);
    MixtureParams::new(alpha1, DMatrix::zeros(p, q), t2, row_cov, col_cov)
}

/// The 5 × 3 simulation design: AR(1) row covariance with ρ = 0.6, AR(1)
/// column covariance with ρ = 0.3, planted standardized singular values.
pub fn ar1_design(alpha1: f64, singular_values: &[f64], seed: u64) -> Result<MixtureParams> {
    planted_mixture(alpha1, ar1_covariance(5, 0.6)?, ar1_covariance(3, 0.3)?, singular_values, seed)
}

/// Rank-1 design with singular value 4.
pub fn model_one(alpha1: f64, seed: u64) -> Result<MixtureParams> {
    ar1_design(alpha1, &[4.0], seed)
}

/// Rank-2 design with singular values 5 and 3.
pub fn model_two(alpha1: f64, seed: u64) -> Result<MixtureParams> {
    ar1_design(alpha1, &[5.0, 3.0], seed)
}
