//! Least-squares subspace clustering algorithms.
//!
//! Every algorithm maps the data to an affinity `W`; [`cluster`] then runs
//! the normalized-Laplacian spectral clustering back end on it.
//!
//! * `lsr`: `Z = (X^T X + λI)^{-1} X^T X`, the closed-form minimizer of
//!   `||X - XZ||_F^2 + λ||Z||_F^2` (the zero-diagonal constraint is dropped).
//! * `kernel_lsr`: the same solve with `X^T X` replaced by a Gaussian Gram
//!   matrix. The exponent uses the squared distance `||x_i - x_j||^2 / 2σ²`.
//! * `gf_lsr`: LSR iterated on graph-filtered features until the affinity
//!   stops changing.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{DataMatrix, LabelVector};
use crate::error::{Error, Result};
use crate::graph::{self, KMeansOptions};

/// Maximum accepted relative residual of the regularized normal equations.
pub const RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmKind {
    Lsr,
    KernelLsr,
    GfLsr,
    /// Reserved; rejected with [`Error::NotImplemented`].
    Ssc,
    /// Reserved; rejected with [`Error::NotImplemented`].
    S0l0Lrssc,
}

impl AlgorithmKind {
    pub fn name(self) -> &'static str {
        match self {
            AlgorithmKind::Lsr => "lsr",
            AlgorithmKind::KernelLsr => "kernel_lsr",
            AlgorithmKind::GfLsr => "gf_lsr",
            AlgorithmKind::Ssc => "ssc",
            AlgorithmKind::S0l0Lrssc => "s0l0_lrssc",
        }
    }
}

impl std::str::FromStr for AlgorithmKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lsr" => Ok(AlgorithmKind::Lsr),
            "kernel_lsr" => Ok(AlgorithmKind::KernelLsr),
            "gf_lsr" => Ok(AlgorithmKind::GfLsr),
            "ssc" => Ok(AlgorithmKind::Ssc),
            "s0l0_lrssc" => Ok(AlgorithmKind::S0l0Lrssc),
            other => Err(Error::InvalidSpec(format!("unknown algorithm `{other}`"))),
        }
    }
}

fn default_gf_epsilon() -> f64 {
    1e-4
}

fn default_gf_max_iter() -> usize {
    50
}

fn default_sigma2() -> f64 {
    1.0
}

/// Algorithm choice plus its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScAlgorithmSpec {
    pub kind: AlgorithmKind,
    pub lambda: f64,
    /// Gaussian kernel variance (kernel_lsr only).
    #[serde(default = "default_sigma2")]
    pub sigma2: f64,
    /// Filter order `k` (gf_lsr only).
    #[serde(default)]
    pub filter_order: usize,
    #[serde(default = "default_gf_epsilon")]
    pub gf_epsilon: f64,
    #[serde(default = "default_gf_max_iter")]
    pub gf_max_iter: usize,
}

impl ScAlgorithmSpec {
    pub fn lsr(lambda: f64) -> Self {
        Self {
            kind: AlgorithmKind::Lsr,
            lambda,
            sigma2: default_sigma2(),
            filter_order: 0,
            gf_epsilon: default_gf_epsilon(),
            gf_max_iter: default_gf_max_iter(),
        }
    }

    pub fn kernel_lsr(lambda: f64, sigma2: f64) -> Self {
        Self {
            kind: AlgorithmKind::KernelLsr,
            sigma2,
            ..Self::lsr(lambda)
        }
    }

    pub fn gf_lsr(lambda: f64, filter_order: usize) -> Self {
        Self {
            kind: AlgorithmKind::GfLsr,
            filter_order,
            ..Self::lsr(lambda)
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            AlgorithmKind::Ssc | AlgorithmKind::S0l0Lrssc => {
                return Err(Error::NotImplemented(self.kind.name().into()))
            }
            _ => {}
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if self.kind == AlgorithmKind::KernelLsr && !(self.sigma2 > 0.0 && self.sigma2.is_finite())
        {
            return Err(Error::InvalidSpec(format!(
                "sigma2 must be positive, got {}",
                self.sigma2
            )));
        }
        if self.kind == AlgorithmKind::GfLsr && (self.gf_epsilon <= 0.0 || self.gf_max_iter == 0) {
            return Err(Error::InvalidSpec(
                "gf_epsilon and gf_max_iter must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Labels and the affinity they were computed from.
#[derive(Debug, Clone)]
pub struct ClusterResult {
    pub labels: LabelVector,
    pub affinity: DMatrix<f64>,
    pub representation: Option<DMatrix<f64>>,
    /// Graph-filtering iterations (gf_lsr), otherwise 1.
    pub iterations: usize,
}

/// Solves `(G + λI) Z = G` for symmetric PSD `G` by Cholesky with one step
/// of iterative refinement, and checks the relative residual.
fn regularized_solve(gram: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    if !gram.is_square() {
        return Err(Error::NonSquare {
            rows: gram.nrows(),
            cols: gram.ncols(),
        });
    }
    if lambda.is_nan() || lambda <= 0.0 {
        return Err(Error::InvalidSpec(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let n = gram.nrows();
    let mut system = gram.clone();
    for i in 0..n {
        system[(i, i)] += lambda;
    }
    let chol = system
        .clone()
        .cholesky()
        .ok_or_else(|| Error::SolveFailure("matrix is not positive definite".into()))?;
    let mut z = chol.solve(gram);
    let residual = gram - &system * &z;
    z += chol.solve(&residual);

    let scale = gram.norm();
    let res = (&system * &z - gram).norm();
    if !res.is_finite() || res > RESIDUAL_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::SolveFailure(format!(
            "relative residual {:.3e} exceeds {RESIDUAL_TOL:e}",
            res / scale
        )));
    }
    Ok(z)
}

/// LSR representation `Z = (X^T X + λI)^{-1} X^T X`.
pub fn lsr_representation(x: &DataMatrix, lambda: f64) -> Result<DMatrix<f64>> {
    let g = x.values().tr_mul(x.values());
    regularized_solve(&g, lambda)
}

/// Kernel LSR representation `Z = (K + λI)^{-1} K`.
pub fn kernel_lsr_representation(gram: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    regularized_solve(gram, lambda)
}

/// Gaussian Gram matrix `K_ij = exp(-||x_i - x_j||^2 / (2σ²))`.
pub fn gaussian_gram(x: &DataMatrix, sigma2: f64) -> DMatrix<f64> {
    let n = x.samples();
    let v = x.values();
    let mut k = DMatrix::from_element(n, n, 1.0);
    for j in 0..n {
        for i in 0..j {
            let d2 = (v.column(i) - v.column(j)).norm_squared();
            let e = (-d2 / (2.0 * sigma2)).exp();
            k[(i, j)] = e;
            k[(j, i)] = e;
        }
    }
    k
}

/// Gaussian kernel between one point and every column of `x`.
pub fn gaussian_kernel_vector(x: &DataMatrix, point: &[f64], sigma2: f64) -> Vec<f64> {
    x.values()
        .column_iter()
        .map(|c| {
            let d2: f64 = c.iter().zip(point).map(|(a, b)| (a - b) * (a - b)).sum();
            (-d2 / (2.0 * sigma2)).exp()
        })
        .collect()
}

/// Output of graph-filtering LSR.
#[derive(Debug, Clone)]
pub struct GfLsrOutput {
    pub affinity: DMatrix<f64>,
    pub iterations: usize,
    /// `||W_t - W_{t-1}||_F^2` for `t = 2..=iterations`.
    pub monitor: Vec<f64>,
    /// Whether the stop criterion was met before the iteration cap.
    pub converged: bool,
}

/// Graph-filtering LSR. Each iteration computes LSR on the current filtered
/// features, builds `W_t` and `L_t`, and filters the original `X` with
/// `(I - L_t/2)^k`. Stops once `||W_t - W_{t-1}||_F^2 <= epsilon` (checked
/// from the second iteration) or after `max_iter` iterations.
pub fn gf_lsr(
    x: &DataMatrix,
    lambda: f64,
    order: usize,
    epsilon: f64,
    max_iter: usize,
) -> Result<GfLsrOutput> {
    if max_iter == 0 {
        return Err(Error::InvalidSpec("gf_max_iter must be positive".into()));
    }
    let mut filtered = x.clone();
    let mut previous: Option<DMatrix<f64>> = None;
    let mut monitor = Vec::new();
    let mut t = 0;
    loop {
        t += 1;
        let z = lsr_representation(&filtered, lambda)?;
        let w = graph::affinity_from_representation(&z)?;
        let mut done = false;
        if let Some(prev) = &previous {
            let change = (&w - prev).norm_squared();
            monitor.push(change);
            done = change <= epsilon;
        }
        if done || t >= max_iter {
            return Ok(GfLsrOutput {
                affinity: w,
                iterations: t,
                monitor,
                converged: done,
            });
        }
        let l = graph::normalized_laplacian(&w)?.laplacian;
        filtered = graph::graph_filter(x, &l, order)?;
        previous = Some(w);
    }
}

/// Runs the selected algorithm and spectral clustering into `clusters` groups.
pub fn cluster(
    x: &DataMatrix,
    spec: &ScAlgorithmSpec,
    clusters: usize,
    seed: u64,
) -> Result<ClusterResult> {
    cluster_with(x, spec, clusters, seed, KMeansOptions::default())
}

pub fn cluster_with(
    x: &DataMatrix,
    spec: &ScAlgorithmSpec,
    clusters: usize,
    seed: u64,
    kmeans: KMeansOptions,
) -> Result<ClusterResult> {
    spec.validate()?;
    let n = x.samples();
    if clusters == 0 || clusters > n {
        return Err(Error::InvalidSpec(format!(
            "cannot split {n} samples into {clusters} clusters"
        )));
    }
    let (affinity, representation, iterations) = match spec.kind {
        AlgorithmKind::Lsr => {
            let z = lsr_representation(x, spec.lambda)?;
            (graph::affinity_from_representation(&z)?, Some(z), 1)
        }
        AlgorithmKind::KernelLsr => {
            let k = gaussian_gram(x, spec.sigma2);
            let z = kernel_lsr_representation(&k, spec.lambda)?;
            (graph::affinity_from_representation(&z)?, Some(z), 1)
        }
        AlgorithmKind::GfLsr => {
            let out = gf_lsr(
                x,
                spec.lambda,
                spec.filter_order,
                spec.gf_epsilon,
                spec.gf_max_iter,
            )?;
            (out.affinity, None, out.iterations)
        }
        AlgorithmKind::Ssc | AlgorithmKind::S0l0Lrssc => unreachable!("rejected by validate"),
    };
    let labels = if clusters == 1 {
        LabelVector::constant(n)
    } else {
        let g = graph::normalized_laplacian(&affinity)?;
        let embedding = graph::spectral_embed(&g.laplacian, clusters)?;
        graph::kmeans_with(&embedding.coords, clusters, seed, kmeans)?
    };
    Ok(ClusterResult {
        labels,
        affinity,
        representation,
        iterations,
    })
}
