//! Sequential extraction of kurtosis-optimal projection pairs.
//!
//! Each pair is found by multi-start Barzilai–Borwein descent on the
//! product of unit spheres. After a pair `(u_k, v_k)` is accepted, later
//! pairs are restricted to the orthogonal complements of the constraint
//! directions `G_{1k}u_k` and `G_{2k}v_k`, which makes the projections
//! `u_j'Y v_j` and `u_k'Y v_k` uncorrelated in the sample.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{MppError, Result};
use crate::indices::{self, ConstraintSet, ProjectionPair};
use crate::linalg;
use crate::model::{self, MatrixSample, MixingRegime};
use crate::seed;

/// Fresh draws allowed per start after hitting a degenerate projection.
const DEGENERATE_RETRIES: u64 = 5;

const MIN_STEP: f64 = 1e-12;
const MAX_STEP: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Direction {
    Minimize,
    Maximize,
    /// Maximize `(κ − 3)²`; needs no knowledge of the mixing proportion.
    SquaredExcess,
    /// Minimize or maximize according to the regime of `alpha1`.
    Auto(f64),
}

impl Direction {
    /// Resolves [`Direction::Auto`] into a concrete direction.
    pub fn resolve(self) -> Result<Direction> {
        match self {
            Direction::Auto(alpha1) => match model::mixing_regime(alpha1)? {
                MixingRegime::Minimize => Ok(Direction::Minimize),
                MixingRegime::Maximize => Ok(Direction::Maximize),
                MixingRegime::Degenerate => Err(MppError::Regime(format!(
                    "alpha1 = {alpha1} makes every projection mesokurtic"
                ))),
            },
            other => Ok(other),
        }
    }

    /// The loss minimized for a kurtosis value, and its derivative in `κ`.
    fn loss(self, kappa: f64) -> (f64, f64) {
        match self {
            Direction::Minimize => (kappa, 1.0),
            Direction::Maximize => (-kappa, -1.0),
            Direction::SquaredExcess => (-(kappa - 3.0).powi(2), -2.0 * (kappa - 3.0)),
            Direction::Auto(_) => unreachable!("resolved before use"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    /// Gradient-norm tolerance.
    pub epsilon: f64,
    /// Independent random starts per pair.
    pub restarts: usize,
    /// Iteration cap per start.
    pub max_iters: usize,
    /// Step size of the first iteration.
    pub gamma0: f64,
    pub direction: Direction,
    pub n_pairs: usize,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            restarts: 15,
            max_iters: 1000,
            gamma0: 0.1,
            direction: Direction::SquaredExcess,
            n_pairs: 1,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(MppError::Parameter("epsilon must be positive".into()));
        }
        if self.restarts == 0 {
            return Err(MppError::Parameter("restarts must be at least 1".into()));
        }
        if self.max_iters == 0 {
            return Err(MppError::Parameter("max_iters must be at least 1".into()));
        }
        if !(self.gamma0 > 0.0) {
            return Err(MppError::Parameter("gamma0 must be positive".into()));
        }
        self.direction.resolve().map(|_| ())
    }

    /// Checks `1 ≤ n_pairs ≤ min(p, q) − 1`.
    pub fn validate_for(&self, p: usize, q: usize) -> Result<()> {
        self.validate()?;
        let cap = p.min(q).saturating_sub(1);
        if self.n_pairs == 0 || self.n_pairs > cap {
            return Err(MppError::Parameter(format!(
                "n_pairs = {} must lie in 1..={cap} for {p}x{q} observations",
                self.n_pairs
            )));
        }
        Ok(())
    }
}

/// Column-orthonormal bases of the subspaces still available for `u` and `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeflationState {
    pub basis_u: DMatrix<f64>,
    pub basis_v: DMatrix<f64>,
    pub k: usize,
}

impl DeflationState {
    pub fn initial(p: usize, q: usize) -> Self {
        Self { basis_u: DMatrix::identity(p, p), basis_v: DMatrix::identity(q, q), k: 0 }
    }

    /// Complements of the accumulated constraint directions.
    pub fn from_constraints(cu: &[DVector<f64>], cv: &[DVector<f64>], p: usize, q: usize) -> Result<Self> {
        Ok(Self {
            basis_u: linalg::orthogonal_complement(cu, p)?,
            basis_v: linalg::orthogonal_complement(cv, q)?,
            k: cu.len(),
        })
    }

    /// The data `basis_u' Y_i basis_v` in the reduced coordinates.
    pub fn reduce(&self, centered: &MatrixSample) -> Result<MatrixSample> {
        if self.k == 0 {
            return Ok(centered.clone());
        }
        centered.transform(&self.basis_u.transpose(), &self.basis_v, None)
    }

    /// Maps reduced coordinates back to unit ambient vectors.
    pub fn lift(&self, u: &DVector<f64>, v: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        Ok((linalg::normalized(&(&self.basis_u * u))?, linalg::normalized(&(&self.basis_v * v))?))
    }
}

/// Result of one descent run.
#[derive(Debug, Clone)]
struct Run {
    blocks: Vec<DVector<f64>>,
    loss: f64,
    iterations: usize,
    converged: bool,
}

fn block_dot(a: &[DVector<f64>], b: &[DVector<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn block_norm2(a: &[DVector<f64>]) -> f64 {
    a.iter().map(|x| x.norm_squared()).sum()
}

/// Barzilai–Borwein descent of `f` over a product of unit spheres.
///
/// `f` returns the loss and its ambient gradient per block. Each step is
/// `x ← normalize(x − γ g)` blockwise, with `γ = |Δx'Δg| / ‖Δg‖²` after the
/// first step. Returns the final iterate on convergence and the best iterate
/// seen otherwise.
fn descend<F>(start: Vec<DVector<f64>>, f: &F, cfg: &OptimizerConfig) -> Result<Run>
where
    F: Fn(&[DVector<f64>]) -> Result<(f64, Vec<DVector<f64>>)>,
{
    let mut x = start;
    let (mut loss, mut grad) = f(&x)?;
    let mut best = (x.clone(), loss);
    let mut gamma = cfg.gamma0;
    for it in 0..cfg.max_iters {
        if block_norm2(&grad).sqrt() < cfg.epsilon {
            return Ok(Run { blocks: x, loss, iterations: it, converged: true });
        }
        let next: Vec<DVector<f64>> = x
            .iter()
            .zip(&grad)
            .map(|(xi, gi)| linalg::normalized(&(xi - gi * gamma)))
            .collect::<Result<_>>()
            .map_err(|_| MppError::DegenerateProjection("step collapsed an iterate to zero".into()))?;
        let (next_loss, next_grad) = f(&next)?;
        let dx: Vec<DVector<f64>> = next.iter().zip(&x).map(|(a, b)| a - b).collect();
        let dg: Vec<DVector<f64>> = next_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let dg2 = block_norm2(&dg);
        if dg2 > 0.0 {
            gamma = (block_dot(&dx, &dg).abs() / dg2).clamp(MIN_STEP, MAX_STEP);
        }
        x = next;
        loss = next_loss;
        grad = next_grad;
        if loss < best.1 {
            best = (x.clone(), loss);
        }
    }
    if block_norm2(&grad).sqrt() < cfg.epsilon {
        return Ok(Run { blocks: x, loss, iterations: cfg.max_iters, converged: true });
    }
    Ok(Run { blocks: best.0, loss: best.1, iterations: cfg.max_iters, converged: false })
}

/// Runs `descend` from the given start, redrawing a random start on
/// degenerate projections.
fn descend_with_retries<F>(
    first: Vec<DVector<f64>>,
    dims: &[usize],
    f: &F,
    cfg: &OptimizerConfig,
    stream: u64,
) -> Result<Run>
where
    F: Fn(&[DVector<f64>]) -> Result<(f64, Vec<DVector<f64>>)>,
{
    let mut start = first;
    let mut last_err = None;
    for attempt in 0..=DEGENERATE_RETRIES {
        if attempt > 0 {
            let mut rng = seed::rng(seed::derive(stream, &[attempt]));
            start = dims.iter().map(|&d| linalg::random_unit(&mut rng, d)).collect();
        }
        match descend(start.clone(), f, cfg) {
            Err(e @ MppError::DegenerateProjection(_)) => last_err = Some(e),
            other => return other,
        }
    }
    Err(last_err.expect("at least one attempt"))
}

/// Multi-start descent: one warm start if given, then random starts until
/// `cfg.restarts` runs are done. Picks the lowest final loss; ties keep the
/// earlier start.
fn multistart<F>(
    warm: Option<Vec<DVector<f64>>>,
    dims: &[usize],
    f: &F,
    cfg: &OptimizerConfig,
    stream: u64,
) -> Result<Run>
where
    F: Fn(&[DVector<f64>]) -> Result<(f64, Vec<DVector<f64>>)> + Sync,
{
    let runs: Vec<Result<Run>> = (0..cfg.restarts as u64)
        .into_par_iter()
        .map(|r| {
            let start_seed = seed::derive(stream, &[r]);
            let start = match (&warm, r) {
                (Some(w), 0) => w.clone(),
                _ => {
                    let mut rng = seed::rng(start_seed);
                    dims.iter().map(|&d| linalg::random_unit(&mut rng, d)).collect()
                }
            };
            descend_with_retries(start, dims, f, cfg, start_seed)
        })
        .collect();
    let mut best: Option<Run> = None;
    let mut last_err = None;
    for run in runs {
        match run {
            Ok(run) => {
                if best.as_ref().is_none_or(|b| run.loss < b.loss) {
                    best = Some(run);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or_else(|| MppError::DegenerateProjection("no start succeeded".into())))
}

type LossAndGradient = (f64, Vec<DVector<f64>>);

/// Loss and block gradients of `κ_n` on the pair `(u, v)`.
fn pair_objective(
    data: &MatrixSample,
    direction: Direction,
) -> impl Fn(&[DVector<f64>]) -> Result<LossAndGradient> + Sync + '_ {
    move |x: &[DVector<f64>]| {
        let eval = indices::kappa_with_gradient(data, &x[0], &x[1])?;
        let (loss, slope) = direction.loss(eval.value);
        Ok((loss, vec![eval.grad_u * slope, eval.grad_v * slope]))
    }
}

/// Loss and gradient of the kurtosis of `u'y_i` for vector data `y_i`
/// stored as an `m × 1` sample.
fn vector_objective(
    data: &MatrixSample,
    direction: Direction,
) -> impl Fn(&[DVector<f64>]) -> Result<LossAndGradient> + Sync + '_ {
    let one = DVector::from_element(1, 1.0);
    move |x: &[DVector<f64>]| {
        let eval = indices::kappa_with_gradient(data, &x[0], &one)?;
        let (loss, slope) = direction.loss(eval.value);
        Ok((loss, vec![eval.grad_u * slope]))
    }
}

/// A single optimized pair in ambient coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PairOutcome {
    /// The pair with `value = κ_n(u, v)` on the centered data.
    pub pair: ProjectionPair,
    /// Whether the selected start reached the gradient tolerance.
    pub converged: bool,
    pub iterations: usize,
}

/// Optimizes one pair inside the subspaces of `state`. `pair_index` selects
/// the random streams, so different pairs of one extraction draw different
/// starts.
pub fn optimize_pair_bb(
    centered: &MatrixSample,
    config: &OptimizerConfig,
    state: &DeflationState,
    pair_index: usize,
) -> Result<PairOutcome> {
    config.validate()?;
    let direction = config.direction.resolve()?;
    let dims = [state.basis_u.ncols(), state.basis_v.ncols()];
    if dims[0] == 0 || dims[1] == 0 || dims[0].max(dims[1]) < 2 {
        return Err(MppError::Rank(format!("deflated space {}x{} leaves nothing to optimize", dims[0], dims[1])));
    }
    let reduced = state.reduce(centered)?;
    let objective = pair_objective(&reduced, direction);
    let stream = seed::derive(config.seed, &[pair_index as u64]);
    let run = multistart(None, &dims, &objective, config, stream)?;
    let (u, v) = state.lift(&run.blocks[0], &run.blocks[1])?;
    let value = indices::kappa_sample(centered, &u, &v)?;
    Ok(PairOutcome { pair: ProjectionPair { u, v, value }, converged: run.converged, iterations: run.iterations })
}

/// Pairs from a sequential extraction.
#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub pairs: Vec<ProjectionPair>,
    /// Per-pair convergence flags.
    pub converged: Vec<bool>,
    pub constraints: ConstraintSet,
    /// Why extraction ended before `n_pairs`, if it did.
    pub stopped_early: Option<String>,
}

fn prepare(sample: &MatrixSample, config: &OptimizerConfig) -> Result<MatrixSample> {
    config.validate_for(sample.p(), sample.q())?;
    let centered = indices::center(sample)?;
    if !indices::well_definedness_check(&centered) {
        return Err(MppError::Precondition(
            "second-moment matrix of vec(Y_i) is not positive definite (need n > pq and non-degenerate data)".into(),
        ));
    }
    Ok(centered)
}

/// Drives per-pair optimization with deflation between pairs.
fn sequential<F>(sample: &MatrixSample, config: &OptimizerConfig, mut step: F) -> Result<Extraction>
where
    F: FnMut(&MatrixSample, &DeflationState, usize) -> Result<(ProjectionPair, bool)>,
{
    let centered = prepare(sample, config)?;
    let (p, q) = (centered.p(), centered.q());
    let mut state = DeflationState::initial(p, q);
    let (mut cu, mut cv) = (Vec::new(), Vec::new());
    let mut out = Extraction { pairs: Vec::new(), converged: Vec::new(), constraints: ConstraintSet::default(), stopped_early: None };
    for k in 0..config.n_pairs {
        let (pair, converged) = step(&centered, &state, k)?;
        let (gu, gv) = indices::constraint_vectors(&centered, &pair.u, &pair.v)?;
        out.constraints.g1.push(indices::row_constraint_matrix(&centered, &pair.v)?);
        out.constraints.g2.push(indices::column_constraint_matrix(&centered, &pair.u)?);
        out.pairs.push(pair);
        out.converged.push(converged);
        cu.push(gu);
        cv.push(gv);
        if k + 1 == config.n_pairs {
            break;
        }
        match DeflationState::from_constraints(&cu, &cv, p, q) {
            Ok(next) => state = next,
            Err(e) => {
                out.stopped_early = Some(format!("deflation failed after pair {}: {e}", k + 1));
                break;
            }
        }
    }
    Ok(out)
}

/// Extracts `config.n_pairs` pairs from `sample` by multi-start BB descent.
/// The sample is centered once up front.
pub fn extract_sequence(sample: &MatrixSample, config: &OptimizerConfig) -> Result<Extraction> {
    sequential(sample, config, |centered, state, k| {
        let outcome = optimize_pair_bb(centered, config, state, k)?;
        Ok((outcome.pair, outcome.converged))
    })
}

/// `min(‖a − b‖², ‖a + b‖²)`
pub fn sign_invariant_distance(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm_squared().min((a + b).norm_squared())
}

/// Wraps vectors `f(i)` of length `m` as an `m × 1` sample.
fn vector_sample(n: usize, m: usize, mut f: impl FnMut(usize, &mut [f64])) -> Result<MatrixSample> {
    let mut data = vec![0.0; n * m];
    for (i, chunk) in data.chunks_exact_mut(m).enumerate() {
        f(i, chunk);
    }
    MatrixSample::from_vectors(n, m, data)
}

/// One pair by alternating vector pursuits in the reduced space.
fn flipflop_pair(
    reduced: &MatrixSample,
    config: &OptimizerConfig,
    direction: Direction,
    v_start: DVector<f64>,
    first_restarts: usize,
    stream: u64,
) -> Result<(DVector<f64>, DVector<f64>, f64, bool)> {
    let (p, q, n) = (reduced.p(), reduced.q(), reduced.n());
    let mut rng = seed::rng(seed::derive(stream, &[u64::MAX]));
    let mut u = linalg::random_unit(&mut rng, p);
    let mut v = v_start;
    let mut best: Option<(DVector<f64>, DVector<f64>, f64)> = None;
    for sweep in 0..config.max_iters {
        // Random starts only on the first sweep; later sweeps warm-start.
        let inner = OptimizerConfig { restarts: if sweep == 0 { first_restarts } else { 1 }, ..config.clone() };

        let yv = vector_sample(n, p, |i, out| {
            let y = reduced.obs(i);
            for (r, o) in out.iter_mut().enumerate() {
                *o = (0..q).map(|c| y[r * q + c] * v[c]).sum();
            }
        })?;
        let run_u = multistart(Some(vec![u.clone()]), &[p], &vector_objective(&yv, direction), &inner, seed::derive(stream, &[sweep as u64, 0]))?;
        let new_u = run_u.blocks[0].clone();

        let yu = vector_sample(n, q, |i, out| {
            let y = reduced.obs(i);
            for (c, o) in out.iter_mut().enumerate() {
                *o = (0..p).map(|r| y[r * q + c] * new_u[r]).sum();
            }
        })?;
        let run_v = multistart(Some(vec![v.clone()]), &[q], &vector_objective(&yu, direction), &inner, seed::derive(stream, &[sweep as u64, 1]))?;
        let new_v = run_v.blocks[0].clone();

        let change = sign_invariant_distance(&new_u, &u) + sign_invariant_distance(&new_v, &v);
        u = new_u;
        v = new_v;
        if best.as_ref().is_none_or(|b| run_v.loss < b.2) {
            best = Some((u.clone(), v.clone(), run_v.loss));
        }
        if change < config.epsilon {
            return Ok((u, v, run_v.loss, true));
        }
    }
    let (u, v, loss) = best.expect("max_iters ≥ 1");
    Ok((u, v, loss, false))
}

/// Alternating (flip-flop) extraction: with `v` fixed, `u` maximizes the
/// index of the vectors `Y_i v`; with `u` fixed, `v` does so for `Y_i'u`.
/// Deflation between pairs is the same as in [`extract_sequence`]. `v0`, if
/// given, is the starting `v` of the first pair and gets a single run with
/// random `u` starts on the first sweep; otherwise each pair is the best of
/// `restarts` runs from random `v`.
pub fn flipflop_extract(sample: &MatrixSample, config: &OptimizerConfig, v0: Option<&DVector<f64>>) -> Result<Extraction> {
    let direction = config.direction.resolve()?;
    if let Some(v0) = v0 {
        if v0.len() != sample.q() {
            return Err(MppError::Dimension(format!("v0 has length {}, expected {}", v0.len(), sample.q())));
        }
    }
    sequential(sample, config, |centered, state, k| {
        let reduced = state.reduce(centered)?;
        let stream = seed::derive(config.seed, &[k as u64, 1 << 32]);
        let (u, v, converged) = match (v0, k) {
            (Some(v0), 0) => {
                let (u, v, _, converged) =
                    flipflop_pair(&reduced, config, direction, linalg::normalized(v0)?, config.restarts, stream)?;
                (u, v, converged)
            }
            _ => {
                // Independent v₀ draws, each run to a fixed point; the lowest loss wins.
                let runs = (0..config.restarts.max(1))
                    .into_par_iter()
                    .map(|r| {
                        let start_stream = seed::derive(stream, &[r as u64]);
                        let start = linalg::random_unit(&mut seed::rng(start_stream), state.basis_v.ncols());
                        flipflop_pair(&reduced, config, direction, start, 1, start_stream)
                    })
                    .collect::<Result<Vec<_>>>()?;
                let best = runs.into_iter().reduce(|a, b| if b.2 < a.2 { b } else { a }).expect("at least one start");
                (best.0, best.1, best.3)
            }
        };
        let (u, v) = state.lift(&u, &v)?;
        let value = indices::kappa_sample(centered, &u, &v)?;
        Ok((ProjectionPair { u, v, value }, converged))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{MatrixNormalParams, MixtureParams};

    fn msi(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        a.dot(b).abs() / (a.norm() * b.norm())
    }

    #[test]
    fn auto_direction_follows_regime() {
        assert_eq!(Direction::Auto(0.3).resolve().unwrap(), Direction::Minimize);
        assert_eq!(Direction::Auto(0.1).resolve().unwrap(), Direction::Maximize);
        assert!(matches!(Direction::Auto(0.5 - model::regime_boundary()).resolve(), Err(MppError::Regime(_))));
    }

    #[test]
    fn pair_cap_is_enforced() {
        let cfg = OptimizerConfig { n_pairs: 3, ..Default::default() };
        assert!(cfg.validate_for(5, 3).is_err());
        assert!(OptimizerConfig { n_pairs: 2, ..cfg.clone() }.validate_for(5, 3).is_ok());
        assert!(OptimizerConfig { n_pairs: 0, ..cfg.clone() }.validate_for(5, 3).is_err());
        assert!(OptimizerConfig { n_pairs: 1, ..cfg }.validate_for(1, 3).is_err());
    }

    #[test]
    fn descent_finds_minimum_of_quadratic_on_sphere() {
        // min x'Mx on S² is the smallest eigenvector
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, 2.0]));
        let f = |x: &[DVector<f64>]| -> Result<(f64, Vec<DVector<f64>>)> {
            let mx = &m * &x[0];
            let val = x[0].dot(&mx);
            // tangent gradient of the Rayleigh quotient
            Ok((val, vec![(mx - &x[0] * val) * 2.0]))
        };
        let cfg = OptimizerConfig { epsilon: 1e-10, ..Default::default() };
        let start = vec![linalg::normalized(&DVector::from_vec(vec![1.0, 1.0, 1.0])).unwrap()];
        let run = descend(start, &f, &cfg).unwrap();
        assert!(run.converged);
        assert!((run.loss - 1.0).abs() < 1e-12);
        assert!(msi(&run.blocks[0], &DVector::from_vec(vec![0.0, 1.0, 0.0])) > 1.0 - 1e-10);
    }

    #[test]
    fn gaussian_data_is_flat() {
        let params =
            MatrixNormalParams::new(DMatrix::zeros(3, 3), DMatrix::identity(3, 3), DMatrix::identity(3, 3)).unwrap();
        let s = model::sample_matrix_normal(&params, 50_000, 1).unwrap();
        let cfg = OptimizerConfig { restarts: 3, direction: Direction::Minimize, ..Default::default() };
        let ex = extract_sequence(&s, &cfg).unwrap();
        assert!((ex.pairs[0].value - 3.0).abs() < 0.1, "{}", ex.pairs[0].value);
    }

    #[test]
    fn toy_two_by_two_recovers_planted_pair() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let b = DMatrix::from_row_slice(2, 2, &[1.0, -0.3, -0.3, 1.5]);
        let mix = model::planted_mixture(0.3, a, b, &[4.0], 7).unwrap();
        let truth = &model::analytic_pairs(&mix).unwrap()[0];
        let s = model::sample_mixture(&mix, 16_000, 3).unwrap();
        let cfg = OptimizerConfig { direction: Direction::Auto(0.3), restarts: 5, ..Default::default() };
        let ex = extract_sequence(&s, &cfg).unwrap();
        assert!(msi(&ex.pairs[0].u, &truth.u) >= 0.99);
        assert!(msi(&ex.pairs[0].v, &truth.v) >= 0.99);
    }

    #[test]
    fn single_pair_matches_direct_optimization() {
        let mix = model::model_one(0.3, 2).unwrap();
        let s = model::sample_mixture(&mix, 2000, 4).unwrap();
        let cfg = OptimizerConfig { direction: Direction::Minimize, restarts: 4, seed: 9, ..Default::default() };
        let ex = extract_sequence(&s, &cfg).unwrap();
        let centered = indices::center(&s).unwrap();
        let direct = optimize_pair_bb(&centered, &cfg, &DeflationState::initial(5, 3), 0).unwrap();
        assert_eq!(ex.pairs[0], direct.pair);
    }

    #[test]
    fn extraction_is_deterministic_and_orthogonal() {
        let mix = model::model_two(0.3, 3).unwrap();
        let s = model::sample_mixture(&mix, 3000, 5).unwrap();
        let cfg = OptimizerConfig { direction: Direction::Minimize, restarts: 4, n_pairs: 2, seed: 1, ..Default::default() };
        let a = extract_sequence(&s, &cfg).unwrap();
        let b = extract_sequence(&s, &cfg).unwrap();
        assert_eq!(a, b);
        for pair in &a.pairs {
            assert!((pair.u.norm() - 1.0).abs() < 1e-10);
            assert!((pair.v.norm() - 1.0).abs() < 1e-10);
        }
        let centered = indices::center(&s).unwrap();
        let scale = centered.mean_square();
        let (u0, u1) = (&a.pairs[0].u, &a.pairs[1].u);
        let (v0, v1) = (&a.pairs[0].v, &a.pairs[1].v);
        assert!(u1.dot(&(&a.constraints.g1[0] * u0)).abs() < 1e-6 * scale);
        assert!(v1.dot(&(&a.constraints.g2[0] * v0)).abs() < 1e-6 * scale);
    }

    #[test]
    fn rejects_too_few_observations() {
        let mix = model::model_one(0.3, 2).unwrap();
        let s = model::sample_mixture(&mix, 10, 4).unwrap();
        let cfg = OptimizerConfig { direction: Direction::Minimize, ..Default::default() };
        assert!(matches!(extract_sequence(&s, &cfg), Err(MppError::Precondition(_))));
    }

    #[test]
    fn flipflop_agrees_on_symmetric_toy() {
        // X and X' have the same law, so the u and v solutions coincide
        let h = DMatrix::from_row_slice(3, 3, &[3.0, 1.0, 0.0, 1.0, 2.0, 0.0, 0.0, 0.0, 0.5]);
        let mix = MixtureParams::new(0.25, DMatrix::zeros(3, 3), h, DMatrix::identity(3, 3), DMatrix::identity(3, 3)).unwrap();
        let s = model::sample_mixture(&mix, 8000, 2).unwrap();
        let cfg = OptimizerConfig { direction: Direction::Auto(0.25), restarts: 3, ..Default::default() };
        let ex = flipflop_extract(&s, &cfg, None).unwrap();
        assert!(msi(&ex.pairs[0].u, &ex.pairs[0].v) > 0.98);
    }
}
