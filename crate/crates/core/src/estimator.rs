//! Assembly of the discriminant estimate from extracted pairs.
//!
//! Under the mixture model the kurtosis at the j-th optimal pair fixes the
//! standardized singular value `λ_j` of the mean difference, and the third
//! moment fixes its sign, so
//! `W = Σ_j s_j z_{j2}^{-1/2} λ_j √(1 + α₁α₂λ_j²) u_j v_j'`
//! where `z_{j2}` is the second moment of the j-th projection.

use nalgebra::DMatrix;

use crate::error::{MppError, Result};
use crate::indices::{self, ProjectionPair};
use crate::model::{self, MatrixSample, MixingRegime};

/// Default relative threshold for counting non-zero `λ̂`.
pub const DEFAULT_RANK_TOL: f64 = 0.05;

/// Third moments below this multiple of the cubed data scale give sign 0.
const SIGN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaTheta {
    pub theta: f64,
    pub lambda: f64,
    /// `1 − α₁α₂θ ≤ 0`, so `λ` used its absolute value.
    pub clamped: bool,
}

/// Inverts the population kurtosis formula:
/// `θ = √max{(κ−3)/(α₁α₂(1−6α₁α₂)), 0}` and `λ = √(θ/(1−α₁α₂θ))`.
/// When `1 − α₁α₂θ ≤ 0` the absolute value of the denominator is used and
/// the result is flagged.
pub fn lambda_theta(kappa: f64, alpha1: f64) -> Result<LambdaTheta> {
    if model::mixing_regime(alpha1)? == MixingRegime::Degenerate {
        return Err(MppError::Regime(format!("kurtosis carries no signal at alpha1 = {alpha1}")));
    }
    let beta = alpha1 * (1.0 - alpha1);
    let theta = ((kappa - 3.0) / (beta * (1.0 - 6.0 * beta))).max(0.0).sqrt();
    let denom = 1.0 - beta * theta;
    let clamped = denom <= 0.0;
    let lambda = if theta == 0.0 { 0.0 } else { (theta / denom.abs()).sqrt() };
    Ok(LambdaTheta { theta, lambda, clamped })
}

/// Third moment `(1/n) Σ (u'Y_i v)³`.
pub fn third_moment(centered: &MatrixSample, pair: &ProjectionPair) -> Result<f64> {
    Ok(indices::moment(&indices::projections(centered, &pair.u, &pair.v)?, 3))
}

/// Signs `s_j = sign((α₁ − α₂)⁻¹ z_{j3})`, or 0 when the third moment is
/// negligible. Undefined for balanced groups, where
/// [`sign_align_by_correlation`] takes over.
pub fn pair_signs(centered: &MatrixSample, pairs: &[ProjectionPair], alpha1: f64) -> Result<Vec<i8>> {
    if !(alpha1 > 0.0 && alpha1 < 1.0) {
        return Err(MppError::Parameter(format!("alpha1 = {alpha1} is not in (0, 1)")));
    }
    if (alpha1 - 0.5).abs() < 1e-10 {
        return Err(MppError::BalancedGroups);
    }
    let orientation = (alpha1 - (1.0 - alpha1)).signum();
    let scale = centered.mean_square().sqrt();
    pairs
        .iter()
        .map(|pair| {
            let z3 = third_moment(centered, pair)?;
            let floor = SIGN_TOL * scale.powi(3) * (pair.u.norm() * pair.v.norm()).powi(3);
            Ok(if z3.abs() <= floor { 0 } else { (orientation * z3).signum() as i8 })
        })
        .collect()
}

fn correlation(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if !(saa > 0.0 && sbb > 0.0) {
        return Err(MppError::DegenerateProjection("score vector has zero variance".into()));
    }
    Ok(sab / (saa * sbb).sqrt())
}

/// Flips `v_k` for `k ≥ 2` whenever the scores of pair `k` correlate
/// negatively with those of the first pair. A correlation of exactly zero
/// keeps the sign.
pub fn sign_align_by_correlation(centered: &MatrixSample, pairs: &[ProjectionPair]) -> Result<Vec<ProjectionPair>> {
    if pairs.len() < 2 {
        return Err(MppError::Parameter("sign alignment needs at least two pairs".into()));
    }
    let reference = indices::projections(centered, &pairs[0].u, &pairs[0].v)?;
    let mut out = vec![pairs[0].clone()];
    for pair in &pairs[1..] {
        let scores = indices::projections(centered, &pair.u, &pair.v)?;
        let mut pair = pair.clone();
        if correlation(&reference, &scores)? < 0.0 {
            pair.v = -pair.v;
        }
        out.push(pair);
    }
    Ok(out)
}

/// `#{j : λ̂_j > tol · max λ̂}`, and 0 when every `λ̂` is 0.
pub fn estimate_rank(lambda_hat: &[f64], tol: f64) -> Result<usize> {
    if !(tol > 0.0) {
        return Err(MppError::Parameter("rank tolerance must be positive".into()));
    }
    let top = lambda_hat.iter().cloned().fold(0.0, f64::max);
    if top <= 0.0 {
        return Ok(0);
    }
    Ok(lambda_hat.iter().filter(|&&l| l > tol * top).count())
}

/// Per-pair inputs of the reconstruction formula.
#[derive(Debug, Clone, PartialEq)]
pub struct PairTerm {
    pub pair: ProjectionPair,
    pub kappa: f64,
    /// Second moment `z_{j2}` of the projection.
    pub second_moment: f64,
    pub sign: i8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionResult {
    pub pairs: Vec<ProjectionPair>,
    pub kappa_hat: Vec<f64>,
    pub theta_hat: Vec<f64>,
    pub lambda_hat: Vec<f64>,
    pub signs: Vec<i8>,
    /// Pairs whose `λ̂` needed the absolute-value fallback.
    pub lambda_clamped: Vec<bool>,
    pub w_nlda: DMatrix<f64>,
    pub rank_estimate: usize,
}

/// Evaluates the reconstruction formula on given per-pair quantities.
pub fn assemble(terms: &[PairTerm], alpha1: f64, rank_tol: f64) -> Result<ExtractionResult> {
    let first = terms.first().ok_or_else(|| MppError::Parameter("no pairs to assemble".into()))?;
    let (p, q) = (first.pair.u.len(), first.pair.v.len());
    let beta = alpha1 * (1.0 - alpha1);
    let mut w = DMatrix::zeros(p, q);
    let mut out = ExtractionResult {
        pairs: Vec::new(),
        kappa_hat: Vec::new(),
        theta_hat: Vec::new(),
        lambda_hat: Vec::new(),
        signs: Vec::new(),
        lambda_clamped: Vec::new(),
        w_nlda: DMatrix::zeros(p, q),
        rank_estimate: 0,
    };
    for term in terms {
        if term.pair.u.len() != p || term.pair.v.len() != q {
            return Err(MppError::Dimension("pairs differ in dimension".into()));
        }
        if !(term.second_moment > 0.0) {
            return Err(MppError::DegenerateProjection("projection has zero second moment".into()));
        }
        let lt = lambda_theta(term.kappa, alpha1)?;
        let weight = f64::from(term.sign) * lt.lambda * (1.0 + beta * lt.lambda * lt.lambda).sqrt()
            / term.second_moment.sqrt();
        w += term.pair.outer() * weight;
        out.pairs.push(term.pair.clone());
        out.kappa_hat.push(term.kappa);
        out.theta_hat.push(lt.theta);
        out.lambda_hat.push(lt.lambda);
        out.signs.push(term.sign);
        out.lambda_clamped.push(lt.clamped);
    }
    out.w_nlda = w;
    out.rank_estimate = estimate_rank(&out.lambda_hat, rank_tol)?;
    Ok(out)
}

/// Builds `W_nLDA` from pairs extracted on `centered` data. For balanced
/// groups (`α₁ = 1/2`) the pairs should already be sign-aligned; every sign
/// is then taken as +1.
pub fn reconstruct_w_lda(
    centered: &MatrixSample,
    pairs: &[ProjectionPair],
    alpha1: f64,
    rank_tol: f64,
) -> Result<ExtractionResult> {
    let signs = match pair_signs(centered, pairs, alpha1) {
        Err(MppError::BalancedGroups) => vec![1; pairs.len()],
        other => other?,
    };
    let terms = pairs
        .iter()
        .zip(signs)
        .map(|(pair, sign)| {
            let scores = indices::projections(centered, &pair.u, &pair.v)?;
            let m2 = indices::moment(&scores, 2);
            if !(m2 > 0.0) {
                return Err(MppError::DegenerateProjection("projection has zero second moment".into()));
            }
            Ok(PairTerm { pair: pair.clone(), kappa: indices::moment(&scores, 4) / (m2 * m2), second_moment: m2, sign })
        })
        .collect::<Result<Vec<_>>>()?;
    assemble(&terms, alpha1, rank_tol)
}

/// Population version of [`reconstruct_w_lda`] at the analytic pairs, with
/// population kurtosis, second moments and third-moment signs.
pub fn population_reconstruction(mix: &model::MixtureParams, rank_tol: f64) -> Result<ExtractionResult> {
    let orientation = (mix.alpha1 - mix.alpha2()).signum();
    let terms = model::analytic_pairs(mix)?
        .into_iter()
        .map(|ap| {
            let (m2, m3, m4) = model::population_moments(mix, &ap.u, &ap.v)?;
            let sign = if (mix.alpha1 - 0.5).abs() < 1e-10 { 1 } else { (orientation * m3).signum() as i8 };
            Ok(PairTerm { pair: ProjectionPair { u: ap.u, v: ap.v, value: m4 / (m2 * m2) }, kappa: m4 / (m2 * m2), second_moment: m2, sign })
        })
        .collect::<Result<Vec<_>>>()?;
    assemble(&terms, mix.alpha1, rank_tol)
}
