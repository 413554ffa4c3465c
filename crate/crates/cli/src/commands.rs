//! Subcommand implementations. Each returns a serializable report; the
//! binary decides how to print it.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use mpp_core::eval::{self, ScoreDirection};
use mpp_core::indices::{self, ProjectionPair};
use mpp_core::model::{self, MatrixSample};
use mpp_core::nalgebra::{DMatrix, DVector};
use mpp_core::optimizer::Extraction;
use mpp_core::{estimator, linalg, seed, MppError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{matrix_rows, Algorithm, ModelSection, RunConfig};
use crate::csvio::{self, Dims};
use crate::error::{CliError, CliResult};
use crate::{fmt_f64, tensorfile};

/// Gradient checks fail above this relative error.
pub const GRADCHECK_LIMIT: f64 = 1e-4;

const FD_STEP: f64 = 1e-5;

/// Ground truth recorded next to a simulated tensor file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub n: usize,
    pub seed: u64,
    pub model: ModelSection,
    pub t1: Vec<Vec<f64>>,
    pub t2: Vec<Vec<f64>>,
    pub row_cov: Vec<Vec<f64>>,
    pub col_cov: Vec<Vec<f64>>,
    pub w_lda: Vec<Vec<f64>>,
    pub pairs: Vec<TruePair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruePair {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub sigma: f64,
}

impl Manifest {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::io(path, e))
    }

    pub fn w_lda(&self) -> DMatrix<f64> {
        rows_to_matrix(&self.w_lda)
    }
}

fn rows_to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let ncols = rows.first().map_or(0, Vec::len);
    DMatrix::from_row_iterator(rows.len(), ncols, rows.iter().flatten().copied())
}

/// Where the manifest of a tensor file lives by default.
pub fn manifest_path(tensor: &Path) -> PathBuf {
    tensor.with_extension("manifest.json")
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn require<'a>(path: Option<&'a Path>, what: &str) -> CliResult<&'a Path> {
    path.ok_or_else(|| CliError::Usage(format!("missing {what} path (flag or io section)")))
}

/// Draws a labeled sample from the configured model and writes it with its
/// manifest (`<output>.manifest.json` unless `io.manifest` is set).
pub fn simulate(cfg: &RunConfig, output: Option<&Path>, seed: Option<u64>) -> CliResult<Manifest> {
    let output = require(output.or(cfg.io.output.as_deref()), "output")?;
    let section = cfg.model()?;
    let mix = section.build(None)?;
    let n = cfg.io.n.ok_or_else(|| CliError::Usage("io.n is required for simulate".into()))?;
    let seed = seed.or(cfg.io.seed).unwrap_or(0);
    let sample = model::sample_mixture(&mix, n, seed)?;
    let manifest = Manifest {
        n,
        seed,
        model: section.clone(),
        t1: matrix_rows(&mix.t1),
        t2: matrix_rows(&mix.t2),
        row_cov: matrix_rows(&mix.row_cov),
        col_cov: matrix_rows(&mix.col_cov),
        w_lda: matrix_rows(&model::w_lda(&mix)?),
        pairs: model::analytic_pairs(&mix)?
            .into_iter()
            .map(|p| TruePair { u: p.u.iter().copied().collect(), v: p.v.iter().copied().collect(), sigma: p.sigma })
            .collect(),
    };
    tensorfile::write(output, &sample)?;
    let mpath = cfg.io.manifest.clone().unwrap_or_else(|| manifest_path(output));
    write_text(&mpath, &to_json(&manifest))?;
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub kappa: f64,
    pub theta: f64,
    pub lambda: f64,
    pub sign: i8,
    pub converged: bool,
    pub lambda_clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthComparison {
    pub msi_u: Vec<f64>,
    pub msi_v: Vec<f64>,
    pub log_frobenius_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractReport {
    pub alpha1: f64,
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub pairs: Vec<PairReport>,
    pub w_nlda: Vec<Vec<f64>>,
    pub rank_estimate: usize,
    pub stopped_early: Option<String>,
    pub truth: Option<TruthComparison>,
}

/// Extraction followed by the estimator pipeline on one sample.
pub struct Fitted {
    pub extraction: Extraction,
    pub result: estimator::ExtractionResult,
}

fn reconstruction_alpha(cfg: &RunConfig) -> CliResult<f64> {
    cfg.alpha1().ok_or_else(|| CliError::Usage("alpha1 is required (evaluation.alpha1 or model.alpha1)".into()))
}

/// Runs the configured extraction and reconstruction at `alpha1`.
pub fn fit(sample: &MatrixSample, cfg: &RunConfig, alpha1: f64, seed: u64) -> CliResult<Fitted> {
    let opt = cfg.optimizer.to_config(Some(alpha1), seed)?;
    let extraction = match cfg.optimizer.algorithm {
        Algorithm::Bb => mpp_core::extract_sequence(sample, &opt)?,
        Algorithm::Flipflop => mpp_core::flipflop_extract(sample, &opt, None)?,
    };
    let centered = indices::center(sample)?;
    let mut pairs = extraction.pairs.clone();
    if (alpha1 - 0.5).abs() < 1e-10 && pairs.len() >= 2 {
        pairs = estimator::sign_align_by_correlation(&centered, &pairs)?;
    }
    let result = estimator::reconstruct_w_lda(&centered, &pairs, alpha1, cfg.evaluation.rank_tol)?;
    Ok(Fitted { extraction, result })
}

fn compare(result: &estimator::ExtractionResult, manifest: &Manifest) -> CliResult<TruthComparison> {
    let (mut msi_u, mut msi_v) = (Vec::new(), Vec::new());
    for (pair, truth) in result.pairs.iter().zip(&manifest.pairs) {
        msi_u.push(eval::msi(&pair.u, &DVector::from_vec(truth.u.clone()))?);
        msi_v.push(eval::msi(&pair.v, &DVector::from_vec(truth.v.clone()))?);
    }
    Ok(TruthComparison { msi_u, msi_v, log_frobenius_error: eval::frobenius_log_error(&result.w_nlda, &manifest.w_lda())? })
}

fn scores_csv(sample: &MatrixSample, result: &estimator::ExtractionResult) -> CliResult<String> {
    let mut columns = Vec::new();
    for pair in &result.pairs {
        columns.push(eval::project_scores(sample, ScoreDirection::Pair(pair))?);
    }
    columns.push(eval::project_scores(sample, ScoreDirection::Matrix(&result.w_nlda))?);
    let mut out = String::from("obs,label");
    for j in 1..=result.pairs.len() {
        write!(out, ",score_pair{j}").expect("string write");
    }
    out.push_str(",score_w_nlda\n");
    for i in 0..sample.n() {
        write!(out, "{i},").expect("string write");
        if let Some(labels) = sample.labels() {
            write!(out, "{}", labels[i]).expect("string write");
        }
        for col in &columns {
            write!(out, ",{}", fmt_f64(col[i])).expect("string write");
        }
        out.push('\n');
    }
    Ok(out)
}

/// Extracts pairs from a tensor file, reconstructs `W_nLDA` and writes the
/// JSON report to `output` and per-observation scores to `output.csv`.
pub fn extract(cfg: &RunConfig, input: Option<&Path>, output: Option<&Path>, seed: Option<u64>) -> CliResult<ExtractReport> {
    let input = require(input.or(cfg.io.input.as_deref()), "input")?;
    let sample = tensorfile::read(input)?;
    let alpha1 = reconstruction_alpha(cfg)?;
    let seed = seed.or(cfg.io.seed).unwrap_or(0);
    let fitted = fit(&sample, cfg, alpha1, seed)?;
    let r = &fitted.result;
    let truth = match &cfg.io.manifest {
        Some(path) => Some(compare(r, &Manifest::load(path)?)?),
        None => None,
    };
    let report = ExtractReport {
        alpha1,
        n: sample.n(),
        p: sample.p(),
        q: sample.q(),
        seed,
        algorithm: cfg.optimizer.algorithm,
        pairs: (0..r.pairs.len())
            .map(|j| PairReport {
                u: r.pairs[j].u.iter().copied().collect(),
                v: r.pairs[j].v.iter().copied().collect(),
                kappa: r.kappa_hat[j],
                theta: r.theta_hat[j],
                lambda: r.lambda_hat[j],
                sign: r.signs[j],
                converged: fitted.extraction.converged[j],
                lambda_clamped: r.lambda_clamped[j],
            })
            .collect(),
        w_nlda: matrix_rows(&r.w_nlda),
        rank_estimate: r.rank_estimate,
        stopped_early: fitted.extraction.stopped_early.clone(),
        truth,
    };
    if let Some(output) = output.or(cfg.io.output.as_deref()) {
        write_text(output, &to_json(&report))?;
        write_text(&output.with_extension("csv"), &scores_csv(&sample, r)?)?;
    }
    Ok(report)
}

/// Header of campaign CSVs.
pub const CAMPAIGN_HEADER: &str = "alpha,n,replication,metric,value,status";

fn campaign_metrics(n_pairs: usize) -> Vec<String> {
    let mut names = Vec::new();
    for j in 1..=n_pairs {
        names.push(format!("msi_u{j}"));
        names.push(format!("msi_v{j}"));
    }
    names.push("log_frobenius_error".into());
    names
}

fn campaign_replication(
    section: &ModelSection,
    cfg: &RunConfig,
    alpha: f64,
    n: usize,
    rep_seed: u64,
) -> CliResult<Vec<(String, Option<f64>)>> {
    let mix = section.build(Some(alpha))?;
    let truth = model::analytic_pairs(&mix)?;
    let sample = model::sample_mixture(&mix, n, seed::derive(rep_seed, &[0]))?;
    let fitted = fit(&sample, cfg, alpha, seed::derive(rep_seed, &[1]))?;
    let mut values = Vec::new();
    for j in 0..cfg.optimizer.n_pairs {
        let found = fitted.result.pairs.get(j);
        let t = truth.get(j);
        let (mu, mv) = match (found, t) {
            (Some(p), Some(t)) => (Some(eval::msi(&p.u, &t.u)?), Some(eval::msi(&p.v, &t.v)?)),
            _ => (None, None),
        };
        values.push((format!("msi_u{}", j + 1), mu));
        values.push((format!("msi_v{}", j + 1), mv));
    }
    let err = eval::frobenius_log_error(&fitted.result.w_nlda, &model::w_lda(&mix)?)?;
    values.push(("log_frobenius_error".into(), Some(err)));
    Ok(values)
}

/// Replicated simulate-and-extract runs over the `(alpha, n)` grid, as
/// long-form CSV text. Replication seeds derive from the master seed and the
/// grid position, and rows come out in grid order whatever the thread count.
pub fn campaign(cfg: &RunConfig, output: Option<&Path>, seed: Option<u64>, threads: Option<usize>) -> CliResult<String> {
    let section = cfg.model()?;
    let ev = &cfg.evaluation;
    if ev.alphas.is_empty() || ev.sample_sizes.is_empty() {
        return Err(CliError::Usage("evaluation.alphas and evaluation.sample_sizes must be non-empty".into()));
    }
    let master = seed.or(cfg.io.seed).unwrap_or(0);
    let mut tasks = Vec::new();
    for (ai, &alpha) in ev.alphas.iter().enumerate() {
        for (ni, &n) in ev.sample_sizes.iter().enumerate() {
            for rep in 0..ev.replications {
                tasks.push((ai, alpha, ni, n, rep));
            }
        }
    }
    let metrics = campaign_metrics(cfg.optimizer.n_pairs);
    let run = || -> Vec<String> {
        tasks
            .par_iter()
            .map(|&(ai, alpha, ni, n, rep)| {
                let rep_seed = seed::derive(master, &[ai as u64, ni as u64, rep as u64]);
                let prefix = format!("{},{n},{rep}", fmt_f64(alpha));
                let mut rows = String::new();
                match campaign_replication(section, cfg, alpha, n, rep_seed) {
                    Ok(values) => {
                        for (name, value) in values {
                            match value {
                                Some(v) => writeln!(rows, "{prefix},{name},{},ok", fmt_f64(v)),
                                None => writeln!(rows, "{prefix},{name},,missing"),
                            }
                            .expect("string write");
                        }
                    }
                    Err(e) => {
                        let status = csv_escape(&format!("error: {e}"));
                        for name in &metrics {
                            writeln!(rows, "{prefix},{name},,{status}").expect("string write");
                        }
                    }
                }
                rows
            })
            .collect()
    };
    let blocks = match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    };
    let mut out = format!("{CAMPAIGN_HEADER}\n");
    for block in blocks {
        out.push_str(&block);
    }
    if let Some(path) = output.or(cfg.io.output.as_deref()) {
        write_text(path, &out)?;
    }
    Ok(out)
}

fn csv_escape(field: &str) -> String {
    if field.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// One row of the baseline comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRow {
    pub method: String,
    pub equal_variance: bool,
    pub misclassification: Option<f64>,
    pub loglik: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BaselineReport {
    pub rows: Vec<BaselineRow>,
    pub warnings: Vec<String>,
}

impl BaselineReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,variance,misclassification,loglik,status\n");
        for r in &self.rows {
            let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{}",
                r.method,
                if r.equal_variance { "equal" } else { "unequal" },
                opt(r.misclassification),
                opt(r.loglik),
                csv_escape(&r.status)
            )
            .expect("string write");
        }
        out
    }
}

/// Clusters the scores of every method with 1-D EM in both variance modes.
pub fn baselines(cfg: &RunConfig, input: Option<&Path>, output: Option<&Path>, seed: Option<u64>) -> CliResult<BaselineReport> {
    let input = require(input.or(cfg.io.input.as_deref()), "input")?;
    let sample = tensorfile::read(input)?;
    let alpha1 = reconstruction_alpha(cfg)?;
    let seed = seed.or(cfg.io.seed).unwrap_or(0);
    let mut report = BaselineReport::default();
    let labels = sample.labels().map(|l| l.to_vec());
    if labels.is_none() {
        report.warnings.push("input has no labels: LDA and misclassification omitted".into());
    }

    let mut methods: Vec<(String, CliResult<Vec<f64>>)> = Vec::new();
    match fit(&sample, cfg, alpha1, seed) {
        Ok(f) => {
            methods.push(("w_nlda".into(), eval::project_scores(&sample, ScoreDirection::Matrix(&f.result.w_nlda)).map_err(Into::into)));
            methods.push(("kappa_pair1".into(), eval::project_scores(&sample, ScoreDirection::Pair(&f.result.pairs[0])).map_err(Into::into)));
        }
        Err(e) => {
            methods.push(("w_nlda".into(), Err(CliError::Numerical(e.to_string()))));
            methods.push(("kappa_pair1".into(), Err(e)));
        }
    }
    if labels.is_some() {
        let scores = eval::lda_baseline(&sample)
            .and_then(|fit| eval::project_scores(&sample, ScoreDirection::Matrix(&fit.w)));
        methods.push(("lda".into(), scores.map_err(Into::into)));
    }
    let mpca = eval::mpca_baseline(&sample, 1)
        .and_then(|pairs| eval::project_scores(&sample, ScoreDirection::Pair(&pairs[0])));
    methods.push(("mpca".into(), mpca.map_err(Into::into)));
    let twod = eval::twod2pca_baseline(&sample).and_then(|(u, v)| {
        let pair = ProjectionPair { u, v, value: f64::NAN };
        eval::project_scores(&sample, ScoreDirection::Pair(&pair))
    });
    methods.push(("twod2pca".into(), twod.map_err(Into::into)));

    for (method, scores) in methods {
        for equal_variance in [true, false] {
            let row = match &scores {
                Ok(s) => match eval::gmm1d_em(s, equal_variance, labels.as_deref()) {
                    Ok(fit) => BaselineRow {
                        method: method.clone(),
                        equal_variance,
                        misclassification: fit.misclassification,
                        loglik: Some(fit.loglik),
                        status: if fit.converged { "ok".into() } else { "not converged".into() },
                    },
                    Err(e) => BaselineRow { method: method.clone(), equal_variance, misclassification: None, loglik: None, status: format!("error: {e}") },
                },
                Err(e) => BaselineRow { method: method.clone(), equal_variance, misclassification: None, loglik: None, status: format!("error: {e}") },
            };
            report.rows.push(row);
        }
    }
    if let Some(path) = output.or(cfg.io.output.as_deref()) {
        write_text(path, &report.to_csv())?;
    }
    Ok(report)
}

/// Converts a CSV file into a tensor file.
pub fn import_csv(input: &Path, output: &Path, dims: Dims) -> CliResult<MatrixSample> {
    let sample = csvio::read(input, dims)?;
    tensorfile::write(output, &sample)?;
    Ok(sample)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub pairs: usize,
    pub max_rel_error: f64,
    pub rel_errors: Vec<Option<f64>>,
    /// Indices of pairs skipped as nearly degenerate.
    pub excluded: Vec<usize>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error <= GRADCHECK_LIMIT
    }
}

/// Relative error between the analytic gradient of `κ_n` and central
/// finite differences at `(u, v)`.
pub fn gradient_rel_error(centered: &MatrixSample, u: &DVector<f64>, v: &DVector<f64>, step: f64) -> Result<f64, MppError> {
    let (gu, gv) = indices::kappa_gradient(centered, u, v)?;
    let analytic: Vec<f64> = gu.iter().chain(gv.iter()).copied().collect();
    let mut numeric = Vec::with_capacity(analytic.len());
    for k in 0..u.len() {
        let mut e = DVector::zeros(u.len());
        e[k] = step;
        let hi = indices::kappa_sample(centered, &(u + &e), v)?;
        let lo = indices::kappa_sample(centered, &(u - &e), v)?;
        numeric.push((hi - lo) / (2.0 * step));
    }
    for k in 0..v.len() {
        let mut e = DVector::zeros(v.len());
        e[k] = step;
        let hi = indices::kappa_sample(centered, u, &(v + &e))?;
        let lo = indices::kappa_sample(centered, u, &(v - &e))?;
        numeric.push((hi - lo) / (2.0 * step));
    }
    let diff: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = numeric.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(diff / scale.max(1e-8))
}

/// Compares analytic and finite-difference gradients at random unit pairs.
/// Pairs whose projection variance is below `1e-8` of the data scale are
/// excluded.
pub fn gradcheck(cfg: &RunConfig, input: Option<&Path>, seed: Option<u64>) -> CliResult<GradcheckReport> {
    let input = require(input.or(cfg.io.input.as_deref()), "input")?;
    let sample = tensorfile::read(input)?;
    let centered = indices::center(&sample)?;
    let k = cfg.evaluation.gradcheck_pairs;
    let mut rng = seed::rng(seed.or(cfg.io.seed).unwrap_or(0));
    let scale = centered.mean_square();
    let mut report = GradcheckReport { pairs: k, max_rel_error: 0.0, rel_errors: Vec::new(), excluded: Vec::new() };
    for j in 0..k {
        let u = linalg::random_unit(&mut rng, centered.p());
        let v = linalg::random_unit(&mut rng, centered.q());
        let m2 = indices::kappa2_sample(&centered, &u, &v)?;
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(m2 > 1e-8 * scale) {
            report.excluded.push(j);
            report.rel_errors.push(None);
            continue;
        }
        match gradient_rel_error(&centered, &u, &v, FD_STEP) {
            Ok(err) => {
                report.max_rel_error = report.max_rel_error.max(err);
                report.rel_errors.push(Some(err));
            }
            Err(MppError::DegenerateProjection(_)) => {
                report.excluded.push(j);
                report.rel_errors.push(None);
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(report)
}

pub fn report_json<T: Serialize>(value: &T) -> String {
    to_json(value)
}
