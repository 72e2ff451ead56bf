//! Label-free self-guided (LFSG) hyperparameter search.
//!
//! The clustering algorithm is run over a coarse grid of hyperparameter
//! values and the agreement (ACC or NMI) between the pseudo-labels of
//! neighbouring values is measured. The neighbouring pair with the highest
//! agreement brackets the starting interval, which is then repeatedly cut
//! into thirds (or halves) keeping the piece whose endpoints agree most,
//! until `(l4' - l1') / l1 <= epsilon`, where `l1` is the left end before the
//! cut. The result is the midpoint of the last interval.
//!
//! The oracle baseline runs the same refinement but scores each value
//! against the true labels.
//!
//! Pseudo-labels are cached by the exact bit pattern of the hyperparameter,
//! so an evaluator must be a pure function of its input.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algos::{self, AlgorithmKind, ScAlgorithmSpec};
use crate::data::{DataMatrix, LabelVector};
use crate::error::{Error, Result};
use crate::metrics::MetricKind;

/// Strictly increasing, positive hyperparameter values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct HyperGrid {
    values: Vec<f64>,
}

impl HyperGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidGrid(format!(
                "at least two values required, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidGrid(
                "values must be positive and finite".into(),
            ));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGrid(
                "values must be strictly increasing".into(),
            ));
        }
        Ok(Self { values })
    }

    /// `10^lo, 10^(lo+1), ..., 10^hi`.
    pub fn decades(lo: i32, hi: i32) -> Result<Self> {
        Self::new((lo..=hi).map(|e| 10f64.powi(e)).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// 0-based index of the value at 1-based position `ceil(L/2)`, used to
    /// hold the second hyperparameter fixed while the first is searched.
    pub fn preset_index(&self) -> usize {
        self.values.len().div_ceil(2) - 1
    }
}

impl TryFrom<Vec<f64>> for HyperGrid {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<HyperGrid> for Vec<f64> {
    fn from(g: HyperGrid) -> Self {
        g.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    /// Four points `[l1, (2 l1 + l4)/3, (l1 + 2 l4)/3, l4]`.
    #[default]
    Thirds,
    /// Three points `[l1, (l1 + l3)/2, l3]`.
    Halves,
}

impl SplitMode {
    /// Factor by which each refinement shrinks the interval.
    pub fn shrink(self) -> f64 {
        match self {
            SplitMode::Thirds => 3.0,
            SplitMode::Halves => 2.0,
        }
    }
}

/// The evaluation points of one refinement iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct Interval {
    pub points: Vec<f64>,
}

impl Interval {
    pub fn new(mode: SplitMode, lower: f64, upper: f64) -> Self {
        let points = match mode {
            SplitMode::Thirds => vec![
                lower,
                (2.0 * lower + upper) / 3.0,
                (lower + 2.0 * upper) / 3.0,
                upper,
            ],
            SplitMode::Halves => vec![lower, (lower + upper) / 2.0, upper],
        };
        Self { points }
    }

    pub fn lower(&self) -> f64 {
        self.points[0]
    }

    pub fn upper(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    pub fn width(&self) -> f64 {
        self.upper() - self.lower()
    }
}

fn default_epsilon() -> f64 {
    1e-3
}

fn default_max_iterations() -> usize {
    60
}

fn default_warn_ratio() -> f64 {
    2.0
}

fn default_metric() -> MetricKind {
    MetricKind::Acc
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LfsgConfig {
    #[serde(default = "default_metric")]
    pub metric: MetricKind,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub split_mode: SplitMode,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_warn_ratio")]
    pub spacing_warn_ratio: f64,
}

impl Default for LfsgConfig {
    fn default() -> Self {
        Self {
            metric: default_metric(),
            epsilon: default_epsilon(),
            split_mode: SplitMode::Thirds,
            max_iterations: default_max_iterations(),
            spacing_warn_ratio: default_warn_ratio(),
        }
    }
}

impl LfsgConfig {
    pub fn with_metric(metric: MetricKind) -> Self {
        Self {
            metric,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::InvalidConfig("epsilon must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig(
                "max_iterations must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// One refinement iteration: the evaluated points, the score of each
/// neighbouring segment and the interval kept for the next iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub points: Vec<f64>,
    pub scores: Vec<f64>,
    pub next: (f64, f64),
}

/// Outcome of a one-dimensional search.
#[derive(Debug, Clone)]
pub struct HpoResult {
    pub optimum: f64,
    pub final_labels: LabelVector,
    pub trace: Vec<TraceRecord>,
    /// Number of distinct hyperparameter values the evaluator was run on.
    pub evaluations: usize,
    pub iterations: usize,
    /// False when `max_iterations` was reached before the stop rule held.
    pub converged: bool,
    pub initial_interval: (f64, f64),
    pub final_interval: (f64, f64),
    /// Scores over the initial grid: `M - 1` neighbour agreements for LFSG,
    /// `M` truth scores for the oracle.
    pub grid_scores: Vec<f64>,
    /// Oracle only: the grid value with the best truth score.
    pub grid_optimum: Option<f64>,
    pub warnings: Vec<String>,
}

/// Outcome of the two-hyperparameter coordinate search.
#[derive(Debug, Clone)]
pub struct HpoResult2 {
    pub first: HpoResult,
    pub second: HpoResult,
    /// The value the second hyperparameter was held at during stage one.
    pub preset: f64,
}

impl HpoResult2 {
    pub fn optimum(&self) -> (f64, f64) {
        (self.first.optimum, self.second.optimum)
    }

    pub fn converged(&self) -> bool {
        self.first.converged && self.second.converged
    }
}

/// Maps a hyperparameter value to pseudo-labels. Must be pure.
pub trait Evaluator: Sync {
    fn evaluate(&self, value: f64) -> Result<LabelVector>;
}

impl<F> Evaluator for F
where
    F: Fn(f64) -> Result<LabelVector> + Sync,
{
    fn evaluate(&self, value: f64) -> Result<LabelVector> {
        self(value)
    }
}

/// Maps a pair of hyperparameter values to pseudo-labels. Must be pure.
pub trait Evaluator2: Sync {
    fn evaluate(&self, a: f64, b: f64) -> Result<LabelVector>;
}

impl<F> Evaluator2 for F
where
    F: Fn(f64, f64) -> Result<LabelVector> + Sync,
{
    fn evaluate(&self, a: f64, b: f64) -> Result<LabelVector> {
        self(a, b)
    }
}

/// Memoizes an evaluator by the bit pattern of its argument.
pub struct LabelCache<'a, E: Evaluator + ?Sized> {
    evaluator: &'a E,
    cache: Mutex<HashMap<u64, Arc<LabelVector>>>,
    calls: AtomicUsize,
}

impl<'a, E: Evaluator + ?Sized> LabelCache<'a, E> {
    pub fn new(evaluator: &'a E) -> Self {
        Self {
            evaluator,
            cache: Mutex::new(HashMap::new()),
            calls: AtomicUsize::new(0),
        }
    }

    /// Number of evaluator invocations so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    fn lookup(&self, value: f64) -> Option<Arc<LabelVector>> {
        self.cache.lock().unwrap().get(&value.to_bits()).cloned()
    }

    pub fn get(&self, value: f64) -> Result<Arc<LabelVector>> {
        if let Some(hit) = self.lookup(value) {
            return Ok(hit);
        }
        self.calls.fetch_add(1, Ordering::SeqCst);
        let labels = Arc::new(self.evaluator.evaluate(value)?);
        self.cache
            .lock()
            .unwrap()
            .insert(value.to_bits(), Arc::clone(&labels));
        Ok(labels)
    }

    /// Evaluates every uncached value, in parallel.
    pub fn prefetch(&self, values: &[f64]) -> Result<()> {
        let mut missing: Vec<f64> = values
            .iter()
            .copied()
            .filter(|v| self.lookup(*v).is_none())
            .collect();
        missing.sort_by(f64::total_cmp);
        missing.dedup_by(|a, b| a.to_bits() == b.to_bits());
        missing.par_iter().try_for_each(|&v| self.get(v).map(drop))
    }
}

/// `scores[j] = h(y(λ_j), y(λ_{j+1}))` for every neighbouring pair of the grid.
pub fn grid_scan<E: Evaluator + ?Sized>(
    cache: &LabelCache<'_, E>,
    grid: &HyperGrid,
    metric: MetricKind,
) -> Result<Vec<f64>> {
    cache.prefetch(grid.values())?;
    neighbour_scores(cache, grid.values(), metric)
}

fn neighbour_scores<E: Evaluator + ?Sized>(
    cache: &LabelCache<'_, E>,
    points: &[f64],
    metric: MetricKind,
) -> Result<Vec<f64>> {
    let labels = points
        .iter()
        .map(|&p| cache.get(p))
        .collect::<Result<Vec<_>>>()?;
    labels
        .windows(2)
        .map(|w| metric.score(&w[0], &w[1]))
        .collect()
}

/// 0-based index of the first maximal score.
pub fn locate_max_subinterval(scores: &[f64]) -> Result<usize> {
    if scores.is_empty() {
        return Err(Error::Empty);
    }
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Next interval from a thirds split `[l1, l2, l3, l4]` and its three
/// segment scores; earlier segments win ties.
pub fn refine_interval(iv: &Interval, h12: f64, h23: f64, h34: f64) -> (f64, f64) {
    let p = &iv.points;
    if h12 >= h23 && h12 >= h34 {
        (p[0], p[1])
    } else if h23 >= h12 && h23 >= h34 {
        (p[1], p[2])
    } else {
        (p[2], p[3])
    }
}

/// Next interval for any split: the first segment with the maximal score.
fn refine_points(points: &[f64], scores: &[f64]) -> (f64, f64) {
    let j = locate_max_subinterval(scores).expect("a split has at least one segment");
    (points[j], points[j + 1])
}

/// One warning for every neighbouring pair with `λ_{i+1} / λ_i < warn_ratio`.
pub fn grid_spacing_check(grid: &HyperGrid, warn_ratio: f64) -> Vec<String> {
    grid.values()
        .windows(2)
        .filter(|w| w[1] / w[0] < warn_ratio)
        .map(|w| {
            format!(
                "grid values {} and {} are close (ratio {:.3} < {warn_ratio}); pseudo-labels of close \
                 values agree trivially, inspect the trace before trusting the optimum",
                w[0],
                w[1],
                w[1] / w[0]
            )
        })
        .collect()
}

struct Refinement {
    trace: Vec<TraceRecord>,
    iterations: usize,
    converged: bool,
    interval: (f64, f64),
}

fn refine<F>(start: (f64, f64), config: &LfsgConfig, mut segment_scores: F) -> Result<Refinement>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let (mut lower, mut upper) = start;
    let mut trace = Vec::new();
    if (upper - lower) / lower <= config.epsilon {
        return Ok(Refinement {
            trace,
            iterations: 0,
            converged: true,
            interval: start,
        });
    }
    for t in 1..=config.max_iterations {
        let iv = Interval::new(config.split_mode, lower, upper);
        let scores = segment_scores(&iv.points)?;
        let next = match config.split_mode {
            SplitMode::Thirds => refine_interval(&iv, scores[0], scores[1], scores[2]),
            SplitMode::Halves => refine_points(&iv.points, &scores),
        };
        trace.push(TraceRecord {
            iteration: t,
            points: iv.points.clone(),
            scores,
            next,
        });
        let done = (next.1 - next.0) / lower <= config.epsilon;
        (lower, upper) = next;
        if done {
            return Ok(Refinement {
                trace,
                iterations: t,
                converged: true,
                interval: next,
            });
        }
    }
    log::warn!(
        "search stopped after {} iterations without meeting epsilon = {}",
        config.max_iterations,
        config.epsilon
    );
    Ok(Refinement {
        iterations: config.max_iterations,
        trace,
        converged: false,
        interval: (lower, upper),
    })
}

/// Label-free search over one hyperparameter.
pub fn lfsg_search_1d<E: Evaluator + ?Sized>(
    ev: &E,
    grid: &HyperGrid,
    config: &LfsgConfig,
) -> Result<HpoResult> {
    config.validate()?;
    let cache = LabelCache::new(ev);
    let warnings = grid_spacing_check(grid, config.spacing_warn_ratio);
    for w in &warnings {
        log::warn!("{w}");
    }
    let grid_scores = grid_scan(&cache, grid, config.metric)?;
    let i = locate_max_subinterval(&grid_scores)?;
    let start = (grid.values()[i], grid.values()[i + 1]);
    let refinement = refine(start, config, |points| {
        cache.prefetch(points)?;
        neighbour_scores(&cache, points, config.metric)
    })?;
    finish(&cache, start, refinement, grid_scores, None, warnings)
}

fn finish<E: Evaluator + ?Sized>(
    cache: &LabelCache<'_, E>,
    start: (f64, f64),
    refinement: Refinement,
    grid_scores: Vec<f64>,
    grid_optimum: Option<f64>,
    warnings: Vec<String>,
) -> Result<HpoResult> {
    let (lo, hi) = refinement.interval;
    let optimum = (lo + hi) / 2.0;
    let final_labels = (*cache.get(optimum)?).clone();
    Ok(HpoResult {
        optimum,
        final_labels,
        trace: refinement.trace,
        evaluations: cache.calls(),
        iterations: refinement.iterations,
        converged: refinement.converged,
        initial_interval: start,
        final_interval: refinement.interval,
        grid_scores,
        grid_optimum,
        warnings,
    })
}

/// Oracle search: each value is scored against `truth`, the start interval
/// is the grid neighbourhood of the best value, and each refinement segment
/// is scored by the mean of its endpoint scores.
pub fn oracle_grid_search<E: Evaluator + ?Sized>(
    ev: &E,
    grid: &HyperGrid,
    truth: &LabelVector,
    metric: MetricKind,
    config: &LfsgConfig,
) -> Result<HpoResult> {
    config.validate()?;
    let cache = LabelCache::new(ev);
    let truth_score = |v: f64| -> Result<f64> { metric.score(&*cache.get(v)?, truth) };
    cache.prefetch(grid.values())?;
    let grid_scores = grid
        .values()
        .iter()
        .map(|&v| truth_score(v))
        .collect::<Result<Vec<_>>>()?;
    let best = locate_max_subinterval(&grid_scores)?;
    let m = grid.len();
    let (lo_idx, hi_idx) = (best.saturating_sub(1), (best + 1).min(m - 1));
    let start = (grid.values()[lo_idx], grid.values()[hi_idx]);
    let refinement = refine(start, config, |points| {
        cache.prefetch(points)?;
        let s = points
            .iter()
            .map(|&p| truth_score(p))
            .collect::<Result<Vec<_>>>()?;
        Ok(s.windows(2).map(|w| (w[0] + w[1]) / 2.0).collect())
    })?;
    finish(
        &cache,
        start,
        refinement,
        grid_scores,
        Some(grid.values()[best]),
        Vec::new(),
    )
}

/// Coordinate search over two hyperparameters: search the first with the
/// second held at its preset grid value, then search the second with the
/// first fixed at its optimum.
pub fn lfsg_search_2d<E: Evaluator2 + ?Sized>(
    ev: &E,
    grid_a: &HyperGrid,
    grid_b: &HyperGrid,
    config: &LfsgConfig,
) -> Result<HpoResult2> {
    let preset = grid_b.values()[grid_b.preset_index()];
    let first = lfsg_search_1d(&|a: f64| ev.evaluate(a, preset), grid_a, config)?;
    let a_star = first.optimum;
    let second = lfsg_search_1d(&|b: f64| ev.evaluate(a_star, b), grid_b, config)?;
    Ok(HpoResult2 {
        first,
        second,
        preset,
    })
}

/// Two-hyperparameter oracle search with the same coordinate scheme.
pub fn oracle_search_2d<E: Evaluator2 + ?Sized>(
    ev: &E,
    grid_a: &HyperGrid,
    grid_b: &HyperGrid,
    truth: &LabelVector,
    metric: MetricKind,
    config: &LfsgConfig,
) -> Result<HpoResult2> {
    let preset = grid_b.values()[grid_b.preset_index()];
    let first = oracle_grid_search(
        &|a: f64| ev.evaluate(a, preset),
        grid_a,
        truth,
        metric,
        config,
    )?;
    let a_star = first.optimum;
    let second = oracle_grid_search(
        &|b: f64| ev.evaluate(a_star, b),
        grid_b,
        truth,
        metric,
        config,
    )?;
    Ok(HpoResult2 {
        first,
        second,
        preset,
    })
}

/// Header of the trace CSV.
pub const TRACE_HEADER: &str = "iter,l1,l2,l3,l4,h12,h23,h34";

/// Trace as CSV. Halves-mode rows leave `l4` and `h34` empty.
pub fn trace_csv(trace: &[TraceRecord]) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    let cell = |v: Option<&f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
    for r in trace {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.iteration,
            cell(r.points.first()),
            cell(r.points.get(1)),
            cell(r.points.get(2)),
            cell(r.points.get(3)),
            cell(r.scores.first()),
            cell(r.scores.get(1)),
            cell(r.scores.get(2)),
        );
    }
    out
}

/// Which hyperparameter of an algorithm a search varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hyperparameter {
    Lambda,
    Sigma2,
    /// Rounded to the nearest nonnegative integer.
    FilterOrder,
}

impl Hyperparameter {
    pub fn apply(self, spec: &mut ScAlgorithmSpec, value: f64) {
        match self {
            Hyperparameter::Lambda => spec.lambda = value,
            Hyperparameter::Sigma2 => spec.sigma2 = value,
            Hyperparameter::FilterOrder => spec.filter_order = value.round().max(0.0) as usize,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Hyperparameter::Lambda => "lambda",
            Hyperparameter::Sigma2 => "sigma2",
            Hyperparameter::FilterOrder => "filter_order",
        }
    }

    /// The second hyperparameter searched for a two-parameter algorithm.
    pub fn secondary_for(kind: AlgorithmKind) -> Option<Self> {
        match kind {
            AlgorithmKind::KernelLsr => Some(Hyperparameter::Sigma2),
            AlgorithmKind::GfLsr => Some(Hyperparameter::FilterOrder),
            _ => None,
        }
    }
}

/// Runs [`algos::cluster`] on fixed data, cluster count and seed, varying
/// one hyperparameter of `base`.
pub struct ClusterEvaluator<'a> {
    pub data: &'a DataMatrix,
    pub base: ScAlgorithmSpec,
    pub param: Hyperparameter,
    pub clusters: usize,
    pub seed: u64,
}

impl Evaluator for ClusterEvaluator<'_> {
    fn evaluate(&self, value: f64) -> Result<LabelVector> {
        let mut spec = self.base.clone();
        self.param.apply(&mut spec, value);
        Ok(algos::cluster(self.data, &spec, self.clusters, self.seed)?.labels)
    }
}

/// Two-hyperparameter counterpart of [`ClusterEvaluator`].
pub struct ClusterEvaluator2<'a> {
    pub data: &'a DataMatrix,
    pub base: ScAlgorithmSpec,
    pub params: (Hyperparameter, Hyperparameter),
    pub clusters: usize,
    pub seed: u64,
}

impl Evaluator2 for ClusterEvaluator2<'_> {
    fn evaluate(&self, a: f64, b: f64) -> Result<LabelVector> {
        let mut spec = self.base.clone();
        self.params.0.apply(&mut spec, a);
        self.params.1.apply(&mut spec, b);
        Ok(algos::cluster(self.data, &spec, self.clusters, self.seed)?.labels)
    }
}
