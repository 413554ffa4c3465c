//! JSON run configuration. Every section is optional and unknown keys are
//! rejected.

use std::path::{Path, PathBuf};

use mpp_core::estimator::DEFAULT_RANK_TOL;
use mpp_core::model::{self, MixtureParams};
use mpp_core::nalgebra::DMatrix;
use mpp_core::{Direction, OptimizerConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: Option<ModelSection>,
    pub optimizer: OptimizerSection,
    pub evaluation: EvaluationSection,
    pub io: IoSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub alpha1: f64,
    pub p: usize,
    pub q: usize,
    pub means: MeansSpec,
    pub row_cov: CovSpec,
    pub col_cov: CovSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MeansSpec {
    /// `T₁ = 0`, `T₂ = A^{1/2} U Λ V' B^{1/2}` with random orthogonal `U`, `V`.
    Planted { singular_values: Vec<f64>, seed: u64 },
    Explicit { t1: Vec<Vec<f64>>, t2: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CovSpec {
    Ar1 { rho: f64 },
    Explicit(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionSpec {
    Auto,
    Minimize,
    Maximize,
    SquaredExcess,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Bb,
    Flipflop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSection {
    pub epsilon: f64,
    pub restarts: usize,
    pub max_iters: usize,
    pub gamma0: f64,
    pub direction: DirectionSpec,
    pub n_pairs: usize,
    pub algorithm: Algorithm,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        let base = OptimizerConfig::default();
        Self {
            epsilon: base.epsilon,
            restarts: base.restarts,
            max_iters: base.max_iters,
            gamma0: base.gamma0,
            direction: DirectionSpec::Auto,
            n_pairs: base.n_pairs,
            algorithm: Algorithm::Bb,
        }
    }
}

impl OptimizerSection {
    /// The core configuration for a run at mixing proportion `alpha1`
    /// (needed only by the `auto` direction).
    pub fn to_config(&self, alpha1: Option<f64>, seed: u64) -> CliResult<OptimizerConfig> {
        let direction = match self.direction {
            DirectionSpec::Auto => Direction::Auto(alpha1.ok_or_else(|| {
                CliError::Usage("direction \"auto\" needs alpha1 (model.alpha1 or evaluation.alpha1)".into())
            })?),
            DirectionSpec::Minimize => Direction::Minimize,
            DirectionSpec::Maximize => Direction::Maximize,
            DirectionSpec::SquaredExcess => Direction::SquaredExcess,
        };
        Ok(OptimizerConfig {
            epsilon: self.epsilon,
            restarts: self.restarts,
            max_iters: self.max_iters,
            gamma0: self.gamma0,
            direction,
            n_pairs: self.n_pairs,
            seed,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationSection {
    /// Mixing proportion used for reconstruction when no model is given.
    pub alpha1: Option<f64>,
    pub replications: usize,
    pub alphas: Vec<f64>,
    pub sample_sizes: Vec<usize>,
    pub rank_tol: f64,
    pub gradcheck_pairs: usize,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        Self {
            alpha1: None,
            replications: 50,
            alphas: vec![0.3],
            sample_sizes: vec![500, 2000, 8000, 16000],
            rank_tol: DEFAULT_RANK_TOL,
            gradcheck_pairs: 20,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IoSection {
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    /// Simulation manifest holding the ground truth for an input file.
    pub manifest: Option<PathBuf>,
}

fn matrix(rows: &[Vec<f64>], name: &str) -> CliResult<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(CliError::Usage(format!("{name} must be a non-empty rectangular array of rows")));
    }
    Ok(DMatrix::from_row_iterator(rows.len(), ncols, rows.iter().flatten().copied()))
}

/// Row-major nested arrays.
pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn covariance(spec: &CovSpec, dim: usize, name: &str) -> CliResult<DMatrix<f64>> {
    let m = match spec {
        CovSpec::Ar1 { rho } => model::ar1_covariance(dim, *rho)?,
        CovSpec::Explicit(rows) => matrix(rows, name)?,
    };
    if m.shape() != (dim, dim) {
        return Err(CliError::Usage(format!("{name} must be {dim}x{dim}")));
    }
    Ok(m)
}

impl ModelSection {
    /// Builds the mixture, optionally at a different mixing proportion.
    pub fn build(&self, alpha1: Option<f64>) -> CliResult<MixtureParams> {
        let alpha1 = alpha1.unwrap_or(self.alpha1);
        let a = covariance(&self.row_cov, self.p, "model.row_cov")?;
        let b = covariance(&self.col_cov, self.q, "model.col_cov")?;
        let mix = match &self.means {
            MeansSpec::Planted { singular_values, seed } => {
                model::planted_mixture(alpha1, a, b, singular_values, *seed)?
            }
            MeansSpec::Explicit { t1, t2 } => {
                let (t1, t2) = (matrix(t1, "model.means.t1")?, matrix(t2, "model.means.t2")?);
                if t1.shape() != (self.p, self.q) || t2.shape() != (self.p, self.q) {
                    return Err(CliError::Usage(format!("means must be {}x{}", self.p, self.q)));
                }
                MixtureParams::new(alpha1, t1, t2, a, b)?
            }
        };
        Ok(mix)
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Usage(msg) => CliError::Usage(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn model(&self) -> CliResult<&ModelSection> {
        self.model.as_ref().ok_or_else(|| CliError::Usage("config has no model section".into()))
    }

    /// Mixing proportion for reconstruction: `evaluation.alpha1`, else
    /// `model.alpha1`.
    pub fn alpha1(&self) -> Option<f64> {
        self.evaluation.alpha1.or(self.model.as_ref().map(|m| m.alpha1))
    }
}
