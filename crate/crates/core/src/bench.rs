//! Repeated-split evaluation of LFSG against the oracle.
//!
//! Every run `r` uses seed `seed + r` for its split, its clustering and
//! k-means restarts. In-sample labels come from the selected hyperparameters;
//! out-of-sample points are assigned with subspaces fitted to those labels
//! (linear for `lsr`, kernel coordinates for `kernel_lsr`, none for
//! `gf_lsr`). Aggregates use the sample standard deviation.

use std::fmt::Write as _;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algos::{AlgorithmKind, ScAlgorithmSpec};
use crate::data::{self, DataMatrix, LabelVector, MatrixFormat, SplitSpec};
use crate::error::{Error, Result};
use crate::lfsg::{
    self, ClusterEvaluator, ClusterEvaluator2, HpoResult, HpoResult2, HyperGrid, Hyperparameter,
    LfsgConfig, TraceRecord,
};
use crate::metrics::{self, MetricKind};
use crate::oos::{self, Kernel, KERNEL_RANK_TOL};

/// Tag written at the top of every report CSV.
pub const REPORT_SCHEMA: &str = "#schema=lfsgsc-bench-report/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Lfsg,
    Oracle,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Lfsg => "lfsg",
            Mode::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeSelection {
    Lfsg,
    Oracle,
    #[default]
    Both,
}

impl ModeSelection {
    pub fn modes(self) -> Vec<Mode> {
        match self {
            ModeSelection::Lfsg => vec![Mode::Lfsg],
            ModeSelection::Oracle => vec![Mode::Oracle],
            ModeSelection::Both => vec![Mode::Lfsg, Mode::Oracle],
        }
    }
}

impl std::str::FromStr for ModeSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lfsg" => Ok(ModeSelection::Lfsg),
            "oracle" => Ok(ModeSelection::Oracle),
            "both" => Ok(ModeSelection::Both),
            other => Err(Error::Parse(format!("unknown mode `{other}`"))),
        }
    }
}

/// Matrix and label files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSource {
    pub matrix: PathBuf,
    pub labels: Option<PathBuf>,
    /// Inferred from the extension when absent.
    #[serde(default)]
    pub format: Option<MatrixFormat>,
    #[serde(default)]
    pub transpose: bool,
}

impl DataSource {
    pub fn load(&self) -> Result<(DataMatrix, Option<LabelVector>)> {
        let format = self
            .format
            .unwrap_or_else(|| MatrixFormat::from_path(&self.matrix));
        let x = data::load_matrix(&self.matrix, format, self.transpose)?;
        let y = self
            .labels
            .as_ref()
            .map(|p| data::load_labels(p))
            .transpose()?;
        if let Some(y) = &y {
            if y.len() != x.samples() {
                return Err(Error::DimensionMismatch(format!(
                    "{} samples but {} labels",
                    x.samples(),
                    y.len()
                )));
            }
        }
        Ok((x, y))
    }
}

fn default_lambda_grid() -> HyperGrid {
    HyperGrid::decades(-5, 1).expect("static grid")
}

/// What to search and how.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpec {
    /// Base algorithm; the searched hyperparameters are overwritten.
    pub algorithm: ScAlgorithmSpec,
    /// Grid for `lambda`.
    #[serde(default = "default_lambda_grid")]
    pub grid: HyperGrid,
    /// Grid for the second hyperparameter (`sigma2` for kernel_lsr,
    /// `filter_order` for gf_lsr). Without it only `lambda` is searched.
    #[serde(default)]
    pub secondary_grid: Option<HyperGrid>,
    #[serde(default)]
    pub lfsg: LfsgConfig,
    #[serde(default)]
    pub mode: ModeSelection,
}

impl SearchSpec {
    pub fn secondary(&self) -> Option<(Hyperparameter, &HyperGrid)> {
        let param = Hyperparameter::secondary_for(self.algorithm.kind)?;
        self.secondary_grid.as_ref().map(|g| (param, g))
    }

    /// Names of the searched hyperparameters, in search order.
    pub fn parameter_names(&self) -> Vec<&'static str> {
        let mut names = vec![Hyperparameter::Lambda.name()];
        if let Some((p, _)) = self.secondary() {
            names.push(p.name());
        }
        names
    }
}

/// Result of one search in one mode.
#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub mode: Mode,
    /// Selected values, in the order of [`SearchSpec::parameter_names`].
    pub optimum: Vec<f64>,
    pub spec: ScAlgorithmSpec,
    pub labels: LabelVector,
    pub converged: bool,
    pub evaluations: usize,
    pub traces: Vec<Vec<TraceRecord>>,
    /// Oracle only: best grid value of the (first) parameter before refinement.
    pub grid_optimum: Option<f64>,
    pub warnings: Vec<String>,
}

impl SearchOutcome {
    fn from_1d(mode: Mode, spec: ScAlgorithmSpec, r: HpoResult) -> Self {
        Self {
            mode,
            optimum: vec![r.optimum],
            spec,
            labels: r.final_labels,
            converged: r.converged,
            evaluations: r.evaluations,
            traces: vec![r.trace],
            grid_optimum: r.grid_optimum,
            warnings: r.warnings,
        }
    }

    fn from_2d(mode: Mode, spec: ScAlgorithmSpec, r: HpoResult2) -> Self {
        let mut warnings = r.first.warnings;
        warnings.extend(r.second.warnings);
        Self {
            mode,
            optimum: vec![r.first.optimum, r.second.optimum],
            spec,
            converged: r.first.converged && r.second.converged,
            evaluations: r.first.evaluations + r.second.evaluations,
            traces: vec![r.first.trace, r.second.trace],
            grid_optimum: r.first.grid_optimum,
            labels: r.second.final_labels,
            warnings,
        }
    }
}

/// Runs the LFSG or oracle search on `x`. `truth` is required for the oracle.
pub fn run_search(
    x: &DataMatrix,
    truth: Option<&LabelVector>,
    search: &SearchSpec,
    clusters: usize,
    seed: u64,
    mode: Mode,
) -> Result<SearchOutcome> {
    search.algorithm.validate()?;
    let truth = match mode {
        Mode::Oracle => Some(
            truth.ok_or_else(|| Error::InvalidConfig("oracle mode needs true labels".into()))?,
        ),
        Mode::Lfsg => None,
    };
    let metric = search.lfsg.metric;
    match search.secondary() {
        None => {
            let ev = ClusterEvaluator {
                data: x,
                base: search.algorithm.clone(),
                param: Hyperparameter::Lambda,
                clusters,
                seed,
            };
            let r = match truth {
                Some(t) => lfsg::oracle_grid_search(&ev, &search.grid, t, metric, &search.lfsg)?,
                None => lfsg::lfsg_search_1d(&ev, &search.grid, &search.lfsg)?,
            };
            let mut spec = search.algorithm.clone();
            Hyperparameter::Lambda.apply(&mut spec, r.optimum);
            Ok(SearchOutcome::from_1d(mode, spec, r))
        }
        Some((param, grid_b)) => {
            let ev = ClusterEvaluator2 {
                data: x,
                base: search.algorithm.clone(),
                params: (Hyperparameter::Lambda, param),
                clusters,
                seed,
            };
            let r = match truth {
                Some(t) => {
                    lfsg::oracle_search_2d(&ev, &search.grid, grid_b, t, metric, &search.lfsg)?
                }
                None => lfsg::lfsg_search_2d(&ev, &search.grid, grid_b, &search.lfsg)?,
            };
            let mut spec = search.algorithm.clone();
            let (a, b) = r.optimum();
            Hyperparameter::Lambda.apply(&mut spec, a);
            param.apply(&mut spec, b);
            Ok(SearchOutcome::from_2d(mode, spec, r))
        }
    }
}

fn default_runs() -> usize {
    25
}

fn default_subspace_dim() -> usize {
    12
}

fn default_rank_tol() -> f64 {
    KERNEL_RANK_TOL
}

/// Configuration of a repeated-split benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub data: DataSource,
    #[serde(flatten)]
    pub search: SearchSpec,
    #[serde(default = "default_runs")]
    pub runs: usize,
    pub in_per_class: usize,
    #[serde(default)]
    pub out_per_class: usize,
    /// Subspace dimension for out-of-sample assignment.
    #[serde(default = "default_subspace_dim")]
    pub subspace_dim: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_rank_tol")]
    pub kernel_rank_tol: f64,
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::InvalidConfig("runs must be at least 1".into()));
        }
        if self.in_per_class == 0 {
            return Err(Error::InvalidConfig("in_per_class must be positive".into()));
        }
        if self.subspace_dim == 0 {
            return Err(Error::InvalidConfig("subspace_dim must be positive".into()));
        }
        self.search.algorithm.validate()
    }
}

/// Scores of one mode in one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeScores {
    pub mode: Mode,
    pub hyperparameters: Vec<f64>,
    pub in_sample: [f64; 3],
    pub out_sample: Option<[f64; 3]>,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Ok(Vec<ModeScores>),
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub run: usize,
    pub seed: u64,
    pub status: RunStatus,
}

/// Quantities reported per mode, in column order.
pub const QUANTITIES: [&str; 6] = ["in_acc", "in_nmi", "in_f1", "out_acc", "out_nmi", "out_f1"];

fn score_triplet(pred: &LabelVector, truth: &LabelVector) -> Result<[f64; 3]> {
    Ok([
        metrics::acc(pred, truth)?,
        metrics::nmi(pred, truth)?,
        metrics::pairwise_f1(pred, truth)?,
    ])
}

fn bench_run(config: &BenchConfig, x: &DataMatrix, y: &LabelVector, run: usize) -> RunRecord {
    let seed = config.seed.wrapping_add(run as u64);
    let status = match bench_run_inner(config, x, y, seed) {
        Ok(scores) => RunStatus::Ok(scores),
        Err(e) => {
            log::error!("run {run} failed: {e}");
            RunStatus::Failed(e.to_string())
        }
    };
    RunRecord { run, seed, status }
}

fn bench_run_inner(
    config: &BenchConfig,
    x: &DataMatrix,
    y: &LabelVector,
    seed: u64,
) -> Result<Vec<ModeScores>> {
    let split = data::split_in_out(
        x,
        y,
        &SplitSpec {
            in_per_class: config.in_per_class,
            out_per_class: config.out_per_class,
            seed,
        },
    )?;
    let train = &split.in_sample;
    let clusters = y.num_clusters();
    config
        .search
        .mode
        .modes()
        .into_iter()
        .map(|mode| {
            let outcome = run_search(
                &train.data,
                Some(&train.labels),
                &config.search,
                clusters,
                seed,
                mode,
            )?;
            let in_sample = score_triplet(&outcome.labels, &train.labels)?;
            let out_sample = match &split.out_sample {
                Some(test) => out_of_sample_labels(config, &train.data, &outcome, &test.data)?
                    .map(|pred| score_triplet(&pred, &test.labels))
                    .transpose()?,
                None => None,
            };
            Ok(ModeScores {
                mode,
                hyperparameters: outcome.optimum,
                in_sample,
                out_sample,
                evaluations: outcome.evaluations,
                converged: outcome.converged,
            })
        })
        .collect()
}

/// Out-of-sample labels for the selected model, or `None` for algorithms
/// without an out-of-sample rule.
pub fn out_of_sample_labels(
    config: &BenchConfig,
    train: &DataMatrix,
    outcome: &SearchOutcome,
    test: &DataMatrix,
) -> Result<Option<LabelVector>> {
    match outcome.spec.kind {
        AlgorithmKind::Lsr => {
            let model = oos::fit_subspace_model(train, &outcome.labels, config.subspace_dim)?;
            Ok(Some(oos::assign_all(&model, test)?))
        }
        AlgorithmKind::KernelLsr => {
            let kernel = Kernel::Gaussian {
                sigma2: outcome.spec.sigma2,
            };
            let model = oos::fit_kernel_oos(
                train,
                &outcome.labels,
                config.subspace_dim,
                kernel,
                config.kernel_rank_tol,
            )?;
            Ok(Some(oos::assign_kernel_all(&model, test)?))
        }
        _ => Ok(None),
    }
}

/// Runs the benchmark. With `parallel` the runs execute concurrently; the
/// report is identical either way.
pub fn run_bench(
    config: &BenchConfig,
    x: &DataMatrix,
    y: &LabelVector,
    parallel: bool,
) -> Result<BenchReport> {
    config.validate()?;
    if x.samples() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} samples but {} labels",
            x.samples(),
            y.len()
        )));
    }
    let runs: Vec<RunRecord> = if parallel {
        (0..config.runs)
            .into_par_iter()
            .map(|r| bench_run(config, x, y, r))
            .collect()
    } else {
        (0..config.runs)
            .map(|r| bench_run(config, x, y, r))
            .collect()
    };
    Ok(BenchReport {
        modes: config.search.mode.modes(),
        parameters: config.search.parameter_names(),
        metric: config.search.lfsg.metric,
        runs,
    })
}

/// Sample mean and standard deviation (`n - 1` denominator, 0 when `n < 2`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stats {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl Stats {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Some(Self { mean, std, n })
    }
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub modes: Vec<Mode>,
    pub parameters: Vec<&'static str>,
    pub metric: MetricKind,
    pub runs: Vec<RunRecord>,
}

impl BenchReport {
    fn mode_scores(&self, mode: Mode) -> impl Iterator<Item = &ModeScores> {
        self.runs.iter().filter_map(move |r| match &r.status {
            RunStatus::Ok(s) => s.iter().find(|m| m.mode == mode),
            RunStatus::Failed(_) => None,
        })
    }

    /// Per-run values of a quantity (`QUANTITIES` or a parameter name).
    pub fn values(&self, mode: Mode, quantity: &str) -> Vec<f64> {
        let q = QUANTITIES.iter().position(|&q| q == quantity);
        let p = self.parameters.iter().position(|&p| p == quantity);
        self.mode_scores(mode)
            .filter_map(|s| match (q, p) {
                (Some(i), _) if i < 3 => Some(s.in_sample[i]),
                (Some(i), _) => s.out_sample.map(|o| o[i - 3]),
                (None, Some(j)) => s.hyperparameters.get(j).copied(),
                (None, None) => None,
            })
            .collect()
    }

    pub fn stats(&self, mode: Mode, quantity: &str) -> Option<Stats> {
        Stats::of(&self.values(mode, quantity))
    }

    fn quantities(&self) -> Vec<&str> {
        QUANTITIES
            .iter()
            .copied()
            .chain(self.parameters.iter().copied())
            .collect()
    }

    /// Two-sided rank-sum p-value between LFSG and oracle for a quantity.
    pub fn ranksum(&self, quantity: &str) -> Option<f64> {
        let a = self.values(Mode::Lfsg, quantity);
        let b = self.values(Mode::Oracle, quantity);
        metrics::ranksum(&a, &b).ok()
    }

    pub fn failed_runs(&self) -> usize {
        self.runs
            .iter()
            .filter(|r| matches!(r.status, RunStatus::Failed(_)))
            .count()
    }

    /// Report as CSV with columns `record,mode,quantity,run,value`.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{REPORT_SCHEMA}\nrecord,mode,quantity,run,value\n");
        for &mode in &self.modes {
            for q in self.quantities() {
                if let Some(s) = self.stats(mode, q) {
                    let _ = writeln!(out, "mean,{},{q},,{:.6}", mode.name(), s.mean);
                    let _ = writeln!(out, "std,{},{q},,{:.6}", mode.name(), s.std);
                    let _ = writeln!(out, "count,{},{q},,{}", mode.name(), s.n);
                }
            }
        }
        if self.modes.len() == 2 {
            for q in self.quantities() {
                if let Some(p) = self.ranksum(q) {
                    let _ = writeln!(out, "ranksum_p,lfsg-vs-oracle,{q},,{p:.6}");
                }
            }
        }
        for r in &self.runs {
            match &r.status {
                RunStatus::Ok(scores) => {
                    for s in scores {
                        let m = s.mode.name();
                        let names = self.quantities();
                        for (i, v) in s.in_sample.iter().enumerate() {
                            let _ = writeln!(out, "raw,{m},{},{},{v:.6}", names[i], r.run);
                        }
                        if let Some(o) = s.out_sample {
                            for (i, v) in o.iter().enumerate() {
                                let _ = writeln!(out, "raw,{m},{},{},{v:.6}", names[3 + i], r.run);
                            }
                        }
                        for (name, v) in self.parameters.iter().zip(&s.hyperparameters) {
                            let _ = writeln!(out, "raw,{m},{name},{},{v:e}", r.run);
                        }
                        let _ = writeln!(out, "raw,{m},evaluations,{},{}", r.run, s.evaluations);
                        let _ =
                            writeln!(out, "raw,{m},converged,{},{}", r.run, u8::from(s.converged));
                    }
                }
                RunStatus::Failed(msg) => {
                    let clean = msg.replace([',', '\n'], ";");
                    let _ = writeln!(out, "failed,,status,{},{clean}", r.run);
                }
            }
        }
        out
    }

    /// Human-readable `mean ± std` table.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let ok = self.runs.len() - self.failed_runs();
        let _ = writeln!(
            out,
            "runs: {} ({} ok, {} failed); selection metric: {}",
            self.runs.len(),
            ok,
            self.failed_runs(),
            self.metric.name()
        );
        if ok == 1 {
            let _ = writeln!(out, "note: a single run gives std = 0 (degenerate sample)");
        }
        let _ = write!(out, "{:<8}", "mode");
        for q in self.quantities() {
            let _ = write!(out, " {q:>20}");
        }
        out.push('\n');
        for &mode in &self.modes {
            let _ = write!(out, "{:<8}", mode.name());
            for q in self.quantities() {
                let cell = match self.stats(mode, q) {
                    Some(s) if QUANTITIES.contains(&q) => format!("{:.2}±{:.2}", s.mean, s.std),
                    Some(s) => format!("{:.3e}±{:.1e}", s.mean, s.std),
                    None => "-".into(),
                };
                let _ = write!(out, " {cell:>20}");
            }
            out.push('\n');
        }
        if self.modes.len() == 2 {
            let _ = write!(out, "{:<8}", "p-value");
            for q in self.quantities() {
                let cell = self
                    .ranksum(q)
                    .map(|p| format!("{p:.4}"))
                    .unwrap_or_else(|| "-".into());
                let _ = write!(out, " {cell:>20}");
            }
            out.push('\n');
            let _ = write!(out, "{:<8}", "gap");
            for q in QUANTITIES {
                let gap = self
                    .stats(Mode::Oracle, q)
                    .zip(self.stats(Mode::Lfsg, q))
                    .map(|(o, l)| format!("{:+.2}", o.mean - l.mean))
                    .unwrap_or_else(|| "-".into());
                let _ = write!(out, " {gap:>20}");
            }
            out.push_str("  (oracle - lfsg)\n");
        }
        out
    }
}
