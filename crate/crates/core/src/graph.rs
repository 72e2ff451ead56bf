//! Affinity graphs, normalized Laplacians, graph filtering and the spectral
//! clustering back end shared by every algorithm.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng as _;

use crate::data::{seeded_rng, DataMatrix, LabelVector, Rng};
use crate::error::{Error, Result};

/// Lower bound applied to node degrees before taking `D^{-1/2}`.
pub const DEGREE_FLOOR: f64 = 1e-12;
/// Lower bound applied to embedding row norms before normalization.
pub const ROW_NORM_FLOOR: f64 = 1e-12;

/// `W = (|Z| + |Z|^T) / 2`.
pub fn affinity_from_representation(z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !z.is_square() {
        return Err(Error::NonSquare {
            rows: z.nrows(),
            cols: z.ncols(),
        });
    }
    let n = z.nrows();
    // a + b == b + a in IEEE arithmetic, so the result is exactly symmetric.
    Ok(DMatrix::from_fn(n, n, |i, j| {
        (z[(i, j)].abs() + z[(j, i)].abs()) / 2.0
    }))
}

/// Affinity `W`, degrees and `L = I - D^{-1/2} W D^{-1/2}`.
#[derive(Debug, Clone)]
pub struct AffinityGraph {
    pub affinity: DMatrix<f64>,
    pub degrees: Vec<f64>,
    pub laplacian: DMatrix<f64>,
}

/// Builds the normalized Laplacian of a symmetric nonnegative affinity.
/// Degrees are clamped below by [`DEGREE_FLOOR`] so isolated nodes stay finite.
pub fn normalized_laplacian(w: &DMatrix<f64>) -> Result<AffinityGraph> {
    if !w.is_square() {
        return Err(Error::NonSquare {
            rows: w.nrows(),
            cols: w.ncols(),
        });
    }
    let n = w.nrows();
    let degrees: Vec<f64> = (0..n).map(|i| w.row(i).sum().max(DEGREE_FLOOR)).collect();
    let inv_sqrt: Vec<f64> = degrees.iter().map(|d| 1.0 / d.sqrt()).collect();
    let laplacian = DMatrix::from_fn(n, n, |i, j| {
        let off = w[(i, j)] * (inv_sqrt[i] * inv_sqrt[j]);
        if i == j {
            1.0 - off
        } else {
            -off
        }
    });
    Ok(AffinityGraph {
        affinity: w.clone(),
        degrees,
        laplacian,
    })
}

/// Low-pass filters the features over the graph: `X̄^T = (I - L/2)^k X^T`,
/// applied as `k` successive multiplications.
pub fn graph_filter(x: &DataMatrix, laplacian: &DMatrix<f64>, order: usize) -> Result<DataMatrix> {
    let n = x.samples();
    if laplacian.nrows() != n || laplacian.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "Laplacian is {}x{} but data has {n} samples",
            laplacian.nrows(),
            laplacian.ncols()
        )));
    }
    if order == 0 {
        return Ok(x.clone());
    }
    let smoother = DMatrix::<f64>::identity(n, n) - laplacian * 0.5;
    let mut xt = x.values().transpose();
    for _ in 0..order {
        xt = &smoother * xt;
    }
    DataMatrix::new(xt.transpose())
}

/// Row-normalized eigenvectors of the `C` smallest Laplacian eigenvalues.
#[derive(Debug, Clone)]
pub struct SpectralEmbedding {
    /// `N x C`, row `n` is sample `n`.
    pub coords: DMatrix<f64>,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
}

/// Eigenpairs of a symmetric matrix sorted ascending by eigenvalue, each
/// eigenvector signed so its largest-magnitude entry is positive.
pub fn sorted_symmetric_eigen(m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    if !m.is_square() {
        return Err(Error::NonSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    let n = m.nrows();
    let sym = (m + m.transpose()) * 0.5;
    let eig =
        SymmetricEigen::try_new(sym, f64::EPSILON, 1000 * n.max(10)).ok_or(Error::EigFailure)?;
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigFailure);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .total_cmp(&eig.eigenvalues[b])
            .then(a.cmp(&b))
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(src).into_owned();
        fix_sign(v.as_mut_slice());
        vectors.set_column(dst, &v);
    }
    Ok((values, vectors))
}

/// Flips `v` so that its first largest-magnitude entry is positive.
pub(crate) fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

pub fn spectral_embed(laplacian: &DMatrix<f64>, clusters: usize) -> Result<SpectralEmbedding> {
    let n = laplacian.nrows();
    if clusters == 0 || clusters > n {
        return Err(Error::InvalidSpec(format!(
            "cannot embed {n} samples into {clusters} clusters"
        )));
    }
    let (values, vectors) = sorted_symmetric_eigen(laplacian)?;
    let mut coords = vectors.columns(0, clusters).into_owned();
    for mut row in coords.row_iter_mut() {
        let norm = row.norm().max(ROW_NORM_FLOOR);
        row /= norm;
    }
    Ok(SpectralEmbedding {
        coords,
        eigenvalues: values[..clusters].to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KMeansOptions {
    pub restarts: usize,
    pub max_iter: usize,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self {
            restarts: 10,
            max_iter: 300,
        }
    }
}

/// k-means on the rows of `points`: best of `restarts` k-means++ seedings by
/// within-cluster sum of squares. Labels are numbered in order of first
/// appearance so equal partitions give equal vectors.
pub fn kmeans(
    points: &DMatrix<f64>,
    clusters: usize,
    seed: u64,
    restarts: usize,
) -> Result<LabelVector> {
    kmeans_with(
        points,
        clusters,
        seed,
        KMeansOptions {
            restarts,
            ..KMeansOptions::default()
        },
    )
}

pub fn kmeans_with(
    points: &DMatrix<f64>,
    clusters: usize,
    seed: u64,
    opts: KMeansOptions,
) -> Result<LabelVector> {
    let n = points.nrows();
    if clusters == 0 || n < clusters {
        return Err(Error::InvalidSpec(format!(
            "k-means needs at least {clusters} points, got {n}"
        )));
    }
    if clusters == 1 {
        return Ok(LabelVector::constant(n));
    }
    let rows: Vec<Vec<f64>> = points
        .row_iter()
        .map(|r| r.iter().copied().collect())
        .collect();
    let mut rng = seeded_rng(seed);
    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..opts.restarts.max(1) {
        let (inertia, assign) = lloyd(&rows, clusters, opts.max_iter, &mut rng);
        if best.as_ref().is_none_or(|(b, _)| inertia < *b) {
            best = Some((inertia, assign));
        }
    }
    let (_, assign) = best.expect("at least one restart");
    LabelVector::new(canonical_labels(&assign, clusters), clusters)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centers.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

fn plus_plus_seed(rows: &[Vec<f64>], k: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let n = rows.len();
    let mut centers = vec![rows[rng.random_range(0..n)].clone()];
    let mut dist: Vec<f64> = rows.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, d) in dist.iter().enumerate() {
                acc += d;
                if acc > target && *d > 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.push(rows[pick].clone());
        let c = centers.last().unwrap();
        for (d, p) in dist.iter_mut().zip(rows) {
            *d = d.min(sq_dist(p, c));
        }
    }
    centers
}

fn lloyd(rows: &[Vec<f64>], k: usize, max_iter: usize, rng: &mut Rng) -> (f64, Vec<usize>) {
    let dim = rows[0].len();
    let mut centers = plus_plus_seed(rows, k, rng);
    let mut assign = vec![usize::MAX; rows.len()];
    for _ in 0..max_iter {
        let mut changed = false;
        for (a, p) in assign.iter_mut().zip(rows) {
            let (c, _) = nearest(p, &centers);
            if *a != c {
                *a = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (&a, p) in assign.iter().zip(rows) {
            counts[a] += 1;
            sums[a].iter_mut().zip(p).for_each(|(s, v)| *s += v);
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        // Empty clusters take over the point farthest from its center.
        for c in 0..k {
            if counts[c] == 0 {
                let far = rows
                    .iter()
                    .enumerate()
                    .map(|(i, p)| (i, sq_dist(p, &centers[assign[i]])))
                    .fold((0, -1.0), |b, x| if x.1 > b.1 { x } else { b })
                    .0;
                centers[c] = rows[far].clone();
                counts[assign[far]] -= 1;
                assign[far] = c;
                counts[c] = 1;
            }
        }
    }
    let inertia = rows
        .iter()
        .zip(&assign)
        .map(|(p, &a)| sq_dist(p, &centers[a]))
        .sum();
    (inertia, assign)
}

/// Renumbers 0-based cluster ids to 1-based labels by order of first use.
fn canonical_labels(assign: &[usize], k: usize) -> Vec<usize> {
    let mut map = vec![0usize; k];
    let mut next = 1;
    assign
        .iter()
        .map(|&a| {
            if map[a] == 0 {
                map[a] = next;
                next += 1;
            }
            map[a]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::gaussian_matrix;
    use nalgebra::dmatrix;

    fn random_affinity(n: usize, seed: u64) -> DMatrix<f64> {
        let z = gaussian_matrix(&mut seeded_rng(seed), n, n);
        affinity_from_representation(&z).unwrap()
    }

    #[test]
    fn affinity_cases() {
        let id = DMatrix::<f64>::identity(3, 3);
        assert_eq!(affinity_from_representation(&id).unwrap(), id);
        let z = dmatrix![0.0, -2.0; 4.0, 0.0];
        assert_eq!(
            affinity_from_representation(&z).unwrap(),
            dmatrix![0.0, 3.0; 3.0, 0.0]
        );
        let w = random_affinity(7, 1);
        assert_eq!(w, w.transpose());
        assert!(w.iter().all(|&v| v >= 0.0));
        assert!(matches!(
            affinity_from_representation(&DMatrix::zeros(2, 3)),
            Err(Error::NonSquare { .. })
        ));
    }

    #[test]
    fn two_node_laplacian() {
        let g = normalized_laplacian(&dmatrix![0.0, 1.0; 1.0, 0.0]).unwrap();
        assert_eq!(g.degrees, vec![1.0, 1.0]);
        assert_eq!(g.laplacian, dmatrix![1.0, -1.0; -1.0, 1.0]);
        let (vals, _) = sorted_symmetric_eigen(&g.laplacian).unwrap();
        assert!(vals[0].abs() < 1e-12 && (vals[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn laplacian_scale_invariant() {
        let w = random_affinity(6, 2);
        let a = normalized_laplacian(&w).unwrap().laplacian;
        let b = normalized_laplacian(&(&w * 37.5)).unwrap().laplacian;
        assert!((a - b).amax() < 1e-12);
    }

    #[test]
    fn isolated_node_is_finite() {
        let mut w = random_affinity(5, 3);
        w.row_mut(2).fill(0.0);
        w.column_mut(2).fill(0.0);
        let g = normalized_laplacian(&w).unwrap();
        assert!(g.laplacian.iter().all(|v| v.is_finite()));
        assert_eq!(g.laplacian, g.laplacian.transpose());
    }

    #[test]
    fn filter_order_zero_and_composition() {
        let x = DataMatrix::new(gaussian_matrix(&mut seeded_rng(4), 3, 6)).unwrap();
        let l = normalized_laplacian(&random_affinity(6, 5))
            .unwrap()
            .laplacian;
        assert_eq!(graph_filter(&x, &l, 0).unwrap(), x);
        let twice = graph_filter(&graph_filter(&x, &l, 1).unwrap(), &l, 1).unwrap();
        let once = graph_filter(&x, &l, 2).unwrap();
        assert!((twice.values() - once.values()).amax() < 1e-12);
        assert!(graph_filter(&x, &DMatrix::zeros(5, 5), 1).is_err());
    }

    #[test]
    fn filter_averages_two_node_path() {
        let l = dmatrix![1.0, -1.0; -1.0, 1.0];
        let x = DataMatrix::new(dmatrix![1.0, 3.0; -2.0, 4.0]).unwrap();
        let f = graph_filter(&x, &l, 1).unwrap();
        assert_eq!(f.values(), &dmatrix![2.0, 2.0; 1.0, 1.0]);
    }

    #[test]
    fn zero_laplacian_embedding() {
        let e = spectral_embed(&DMatrix::zeros(4, 4), 4).unwrap();
        assert!(e.eigenvalues.iter().all(|v| v.abs() < 1e-15));
        for row in e.coords.row_iter() {
            assert!((row.norm() - 1.0).abs() < 1e-12);
        }
    }

    fn two_cliques(a: usize, b: usize) -> DMatrix<f64> {
        let n = a + b;
        DMatrix::from_fn(n, n, |i, j| {
            if (i < a) == (j < a) && i != j {
                1.0
            } else {
                0.0
            }
        })
    }

    #[test]
    fn disconnected_components_are_recovered() {
        let l = normalized_laplacian(&two_cliques(5, 7)).unwrap().laplacian;
        let e = spectral_embed(&l, 2).unwrap();
        assert!(e.eigenvalues[0] >= -1e-8 && e.eigenvalues[1] <= 1e-8);
        let y = kmeans(&e.coords, 2, 0, 10).unwrap();
        let first = y.get(0);
        assert!((0..5).all(|i| y.get(i) == first));
        assert!((5..12).all(|i| y.get(i) != first));
        assert!((5..12).all(|i| y.get(i) == y.get(5)));
    }

    #[test]
    fn embedding_eigenvalues_in_range() {
        let l = normalized_laplacian(&random_affinity(20, 6))
            .unwrap()
            .laplacian;
        let e = spectral_embed(&l, 20).unwrap();
        assert!(e.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        assert!(e
            .eigenvalues
            .iter()
            .all(|&v| (-1e-8..=2.0 + 1e-8).contains(&v)));
    }

    #[test]
    fn kmeans_single_cluster() {
        let p = gaussian_matrix(&mut seeded_rng(1), 9, 2);
        assert_eq!(kmeans(&p, 1, 0, 3).unwrap().as_slice(), &[1; 9]);
    }

    #[test]
    fn kmeans_separated_blobs() {
        let mut rng = seeded_rng(8);
        let noise = gaussian_matrix(&mut rng, 40, 2) * 0.1;
        let p = DMatrix::from_fn(40, 2, |i, j| {
            let centre = if j == 0 {
                if i < 20 {
                    10.0
                } else {
                    -10.0
                }
            } else {
                0.0
            };
            centre + noise[(i, j)]
        });
        let y = kmeans(&p, 2, 3, 10).unwrap();
        assert!((0..20).all(|i| y.get(i) == 1));
        assert!((20..40).all(|i| y.get(i) == 2));
        assert_eq!(y, kmeans(&p, 2, 3, 10).unwrap());
    }

    #[test]
    fn kmeans_handles_duplicates() {
        let p = DMatrix::from_element(6, 2, 1.0);
        let y = kmeans(&p, 3, 0, 2).unwrap();
        assert_eq!(y.len(), 6);
        assert!(kmeans(&p, 7, 0, 2).is_err());
    }

    #[test]
    fn sign_convention() {
        let mut v = [0.1, -0.9, 0.5];
        fix_sign(&mut v);
        assert_eq!(v, [-0.1, 0.9, -0.5]);
    }
}
