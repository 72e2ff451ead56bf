//! Out-of-sample assignment.
//!
//! Each in-sample cluster is summarized by its mean and an orthonormal basis
//! of its centered members (leading left singular vectors). A new point goes
//! to the cluster with the smallest residual `||x̃ - U U^T x̃||`, where
//! `x̃ = x - mean`.
//!
//! The kernel variant first maps training data to coordinates
//! `Y = Λ^{1/2} U^T` from the eigendecomposition `K = U Λ U^T` of the
//! centered Gram matrix, and embeds a test point as
//! `y = Λ^{-1/2} U^T k(x)` with the centered kernel vector `k(x)`. The same
//! subspace assignment is then done in coordinate space, centering per
//! cluster there.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::algos;
use crate::data::{DataMatrix, LabelVector};
use crate::error::{Error, Result};
use crate::graph::sorted_symmetric_eigen;

/// Singular values at or below this fraction of the largest are dropped.
pub const SUBSPACE_RANK_TOL: f64 = 1e-10;
/// Default relative eigenvalue cut-off for the kernel coordinate system.
pub const KERNEL_RANK_TOL: f64 = 1e-12;

/// Affine subspace of one cluster.
#[derive(Debug, Clone)]
pub struct ClusterSubspace {
    pub mean: DVector<f64>,
    /// `D x d_c` with orthonormal columns.
    pub basis: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct SubspaceModel {
    /// Index `c - 1` holds cluster `c`.
    pub clusters: Vec<ClusterSubspace>,
}

impl SubspaceModel {
    pub fn dim(&self) -> usize {
        self.clusters[0].mean.len()
    }

    pub fn num_clusters(&self) -> usize {
        self.clusters.len()
    }
}

/// Left singular vectors and values of `m`, sorted by decreasing value.
pub(crate) fn sorted_svd(m: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .total_cmp(&svd.singular_values[a])
            .then(a.cmp(&b))
    });
    let values = order.iter().map(|&i| svd.singular_values[i]).collect();
    (u.select_columns(&order), values)
}

/// Number of leading singular values above `tol * σ_1`.
pub(crate) fn numerical_rank(values: &[f64], tol: f64) -> usize {
    match values.first() {
        Some(&top) if top > 0.0 => values.iter().take_while(|&&s| s > tol * top).count(),
        _ => 0,
    }
}

/// Fits a mean and an orthonormal basis of at most `d` directions per cluster.
pub fn fit_subspace_model(x: &DataMatrix, labels: &LabelVector, d: usize) -> Result<SubspaceModel> {
    if x.samples() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} samples but {} labels",
            x.samples(),
            labels.len()
        )));
    }
    if d == 0 {
        return Err(Error::InvalidSpec(
            "subspace dimension must be positive".into(),
        ));
    }
    let clusters = (1..=labels.num_clusters())
        .map(|c| {
            let members = labels.members(c);
            if members.is_empty() {
                return Err(Error::EmptyCluster(c));
            }
            let mut block = x.values().select_columns(&members);
            let mean = block.column_mean();
            for mut col in block.column_iter_mut() {
                col -= &mean;
            }
            let (u, s) = sorted_svd(&block);
            let keep = numerical_rank(&s, SUBSPACE_RANK_TOL).min(d);
            Ok(ClusterSubspace {
                mean,
                basis: u.columns(0, keep).into_owned(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SubspaceModel { clusters })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// 1-based cluster label.
    pub label: usize,
    /// Residual distance to each cluster subspace.
    pub distances: Vec<f64>,
}

impl Assignment {
    /// One-hot indicator of the assigned cluster.
    pub fn indicator(&self) -> Vec<u8> {
        (1..=self.distances.len())
            .map(|c| u8::from(c == self.label))
            .collect()
    }
}

/// Assigns `x` to the nearest cluster subspace; ties go to the smaller label.
pub fn assign_oos(model: &SubspaceModel, x: &[f64]) -> Result<Assignment> {
    if x.len() != model.dim() {
        return Err(Error::DimensionMismatch(format!(
            "point has {} features, model expects {}",
            x.len(),
            model.dim()
        )));
    }
    let point = DVector::from_column_slice(x);
    let distances: Vec<f64> = model
        .clusters
        .iter()
        .map(|c| {
            let centered = &point - &c.mean;
            let proj = &c.basis * c.basis.tr_mul(&centered);
            (centered - proj).norm()
        })
        .collect();
    let mut label = 1;
    for (i, &d) in distances.iter().enumerate() {
        if d < distances[label - 1] {
            label = i + 1;
        }
    }
    Ok(Assignment { label, distances })
}

/// Assigns every column of `x`.
pub fn assign_all(model: &SubspaceModel, x: &DataMatrix) -> Result<LabelVector> {
    let labels = x
        .values()
        .column_iter()
        .map(|c| assign_oos(model, c.as_slice()).map(|a| a.label))
        .collect::<Result<Vec<_>>>()?;
    LabelVector::new(labels, model.num_clusters())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Kernel {
    /// `exp(-||a - b||^2 / (2 sigma2))`.
    Gaussian { sigma2: f64 },
    /// `a^T b`.
    Linear,
}

impl Kernel {
    pub fn gram(&self, x: &DataMatrix) -> DMatrix<f64> {
        match *self {
            Kernel::Gaussian { sigma2 } => algos::gaussian_gram(x, sigma2),
            Kernel::Linear => x.values().tr_mul(x.values()),
        }
    }

    pub fn vector(&self, x: &DataMatrix, point: &[f64]) -> Vec<f64> {
        match *self {
            Kernel::Gaussian { sigma2 } => algos::gaussian_kernel_vector(x, point, sigma2),
            Kernel::Linear => x
                .values()
                .column_iter()
                .map(|c| c.iter().zip(point).map(|(a, b)| a * b).sum())
                .collect(),
        }
    }
}

/// Kernel coordinate system plus the subspace model fitted in it.
#[derive(Debug, Clone)]
pub struct KernelOosModel {
    pub training: DataMatrix,
    pub kernel: Kernel,
    /// `N x R`, eigenvectors of the centered Gram matrix.
    pub eigvecs: DMatrix<f64>,
    /// `R` positive eigenvalues, descending.
    pub eigvals: Vec<f64>,
    /// `R x N` training coordinates `Λ^{1/2} U^T`.
    pub coords: DMatrix<f64>,
    pub subspaces: SubspaceModel,
    /// Row means of the uncentered Gram matrix.
    pub row_means: DVector<f64>,
    pub grand_mean: f64,
    /// Centered Gram matrix.
    pub centered: DMatrix<f64>,
}

impl KernelOosModel {
    pub fn rank(&self) -> usize {
        self.eigvals.len()
    }
}

/// `K = H 𝒦 H` with `H = I - 11^T/N`, plus the row and grand means of `𝒦`.
pub fn center_gram(gram: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, f64) {
    let n = gram.nrows();
    let row_means = DVector::from_iterator(n, gram.row_iter().map(|r| r.sum() / n as f64));
    let grand = row_means.sum() / n as f64;
    let k = DMatrix::from_fn(n, n, |i, j| {
        gram[(i, j)] - row_means[i] - row_means[j] + grand
    });
    (k, row_means, grand)
}

/// Builds the kernel coordinate system from the in-sample data and fits the
/// per-cluster subspaces in it. The rank is `min(N - 1, #{λ > rank_tol λ_max})`.
pub fn fit_kernel_oos(
    x: &DataMatrix,
    labels: &LabelVector,
    d: usize,
    kernel: Kernel,
    rank_tol: f64,
) -> Result<KernelOosModel> {
    let n = x.samples();
    if n < 2 {
        return Err(Error::InvalidSpec(
            "kernel model needs at least two samples".into(),
        ));
    }
    if labels.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{n} samples but {} labels",
            labels.len()
        )));
    }
    let (centered, row_means, grand_mean) = center_gram(&kernel.gram(x));
    let (values, vectors) = sorted_symmetric_eigen(&centered)?;
    let top = values[n - 1];
    if top.is_nan() || top <= 0.0 {
        return Err(Error::InvalidSpec("centered kernel matrix is zero".into()));
    }
    let rank = values
        .iter()
        .rev()
        .take_while(|&&v| v > rank_tol * top)
        .count()
        .min(n - 1);
    let order: Vec<usize> = (0..rank).map(|j| n - 1 - j).collect();
    let eigvecs = vectors.select_columns(&order);
    let eigvals: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    let mut coords = eigvecs.transpose();
    for (mut row, &l) in coords.row_iter_mut().zip(&eigvals) {
        row *= l.sqrt();
    }
    let subspaces = fit_subspace_model(&DataMatrix::new(coords.clone())?, labels, d)?;
    Ok(KernelOosModel {
        training: x.clone(),
        kernel,
        eigvecs,
        eigvals,
        coords,
        subspaces,
        row_means,
        grand_mean,
        centered,
    })
}

/// Kernel coordinates of a test point.
pub fn kernel_embed_test(model: &KernelOosModel, x: &[f64]) -> Result<DVector<f64>> {
    if x.len() != model.training.dim() {
        return Err(Error::DimensionMismatch(format!(
            "point has {} features, model expects {}",
            x.len(),
            model.training.dim()
        )));
    }
    let kappa = DVector::from_vec(model.kernel.vector(&model.training, x));
    let mut k = kappa - &model.row_means;
    let mean = k.mean();
    k.add_scalar_mut(-mean);
    let mut y = model.eigvecs.tr_mul(&k);
    for (v, &l) in y.iter_mut().zip(&model.eigvals) {
        *v /= l.sqrt();
    }
    Ok(y)
}

pub fn assign_kernel_oos(model: &KernelOosModel, x: &[f64]) -> Result<Assignment> {
    let y = kernel_embed_test(model, x)?;
    assign_oos(&model.subspaces, y.as_slice())
}

pub fn assign_kernel_all(model: &KernelOosModel, x: &DataMatrix) -> Result<LabelVector> {
    let labels = x
        .values()
        .column_iter()
        .map(|c| assign_kernel_oos(model, c.as_slice()).map(|a| a.label))
        .collect::<Result<Vec<_>>>()?;
    LabelVector::new(labels, model.subspaces.num_clusters())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gaussian_matrix, generate_synthetic, seeded_rng, SyntheticSpec};

    #[test]
    fn line_cluster_has_rank_one() {
        let dir = [1.0, 2.0, -1.0];
        let x = DataMatrix::new(DMatrix::from_fn(3, 4, |i, j| dir[i] * (j as f64 - 1.0))).unwrap();
        let y = LabelVector::constant(4);
        let m = fit_subspace_model(&x, &y, 3).unwrap();
        let u = &m.clusters[0].basis;
        assert_eq!(u.ncols(), 1);
        let v = DVector::from_column_slice(&dir).normalize();
        assert!((u.column(0).dot(&v).abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_truncated_to_cluster_rank() {
        let x = DataMatrix::new(gaussian_matrix(&mut seeded_rng(1), 10, 3)).unwrap();
        let m = fit_subspace_model(&x, &LabelVector::constant(3), 8).unwrap();
        assert_eq!(m.clusters[0].basis.ncols(), 2);
    }

    #[test]
    fn empty_cluster_is_an_error() {
        let x = DataMatrix::new(gaussian_matrix(&mut seeded_rng(1), 3, 3)).unwrap();
        let y = LabelVector::new(vec![1, 1, 3], 3).unwrap();
        assert!(matches!(
            fit_subspace_model(&x, &y, 1),
            Err(Error::EmptyCluster(2))
        ));
    }

    #[test]
    fn in_subspace_residuals_vanish() {
        let (x, y) = generate_synthetic(&SyntheticSpec::uniform(3, 20, 3, 30, 0.0, 5)).unwrap();
        let m = fit_subspace_model(&x, &y, 3).unwrap();
        for c in &m.clusters {
            assert!((c.basis.tr_mul(&c.basis) - DMatrix::identity(3, 3)).amax() < 1e-10);
        }
        for n in 0..x.samples() {
            let a = assign_oos(&m, x.column(n).as_slice()).unwrap();
            assert_eq!(a.label, y.get(n));
            assert!(a.distances[a.label - 1] <= 1e-8);
            assert_eq!(a.indicator().iter().map(|&v| v as usize).sum::<usize>(), 1);
        }
    }

    #[test]
    fn single_cluster_always_wins() {
        let x = DataMatrix::new(gaussian_matrix(&mut seeded_rng(2), 4, 6)).unwrap();
        let m = fit_subspace_model(&x, &LabelVector::constant(6), 2).unwrap();
        assert_eq!(assign_oos(&m, &[100.0, -3.0, 2.0, 0.0]).unwrap().label, 1);
        assert!(assign_oos(&m, &[1.0]).is_err());
    }

    #[test]
    fn centered_kernel_annihilates_ones() {
        let x = DataMatrix::new(gaussian_matrix(&mut seeded_rng(3), 3, 12)).unwrap();
        let (k, _, _) = center_gram(&Kernel::Gaussian { sigma2: 2.0 }.gram(&x));
        let ones = DVector::from_element(12, 1.0);
        assert!((&k * &ones).norm() <= 1e-8 * k.norm());
        assert!(ones.dot(&(&k * &ones)).abs() <= 1e-8 * k.norm());
    }

    #[test]
    fn kernel_model_reconstructs_and_self_embeds() {
        let (x, y) = generate_synthetic(&SyntheticSpec::uniform(2, 6, 2, 15, 0.05, 4)).unwrap();
        let m =
            fit_kernel_oos(&x, &y, 3, Kernel::Gaussian { sigma2: 1.0 }, KERNEL_RANK_TOL).unwrap();
        assert!(m.rank() < x.samples());
        let rebuilt = m.coords.tr_mul(&m.coords);
        assert!((rebuilt - &m.centered).norm() <= 1e-8 * m.centered.norm());
        for n in 0..x.samples() {
            let e = kernel_embed_test(&m, x.column(n).as_slice()).unwrap();
            assert!((e - m.coords.column(n)).amax() <= 1e-6);
        }
    }

    #[test]
    fn wide_kernel_embeds_near_origin() {
        let x = DataMatrix::new(gaussian_matrix(&mut seeded_rng(6), 2, 10)).unwrap();
        let y = LabelVector::constant(10);
        let m =
            fit_kernel_oos(&x, &y, 2, Kernel::Gaussian { sigma2: 1e8 }, KERNEL_RANK_TOL).unwrap();
        let e = kernel_embed_test(&m, &[0.3, -0.2]).unwrap();
        assert!(e.norm() < 1e-3, "{}", e.norm());
        assert_eq!(assign_kernel_oos(&m, &[5.0, 5.0]).unwrap().label, 1);
    }

    #[test]
    fn linear_kernel_matches_linear_assignment() {
        let (x, y) = generate_synthetic(&SyntheticSpec::uniform(3, 8, 2, 12, 0.2, 9)).unwrap();
        let (test, _) = generate_synthetic(&SyntheticSpec::uniform(3, 8, 2, 10, 0.5, 10)).unwrap();
        let lin = fit_subspace_model(&x, &y, 2).unwrap();
        let ker = fit_kernel_oos(&x, &y, 2, Kernel::Linear, KERNEL_RANK_TOL).unwrap();
        assert_eq!(
            assign_all(&lin, &test).unwrap(),
            assign_kernel_all(&ker, &test).unwrap()
        );
    }
}
