//! Data matrices, label vectors, file formats, synthetic data and splits.
//!
//! A [`DataMatrix`] holds one sample per column (`D x N`). Labels are
//! 1-based cluster indices in `{1..C}`.
//!
//! All randomness goes through [`seeded_rng`], a ChaCha8 stream keyed by a
//! 64-bit seed, so outputs are identical on every platform.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Magic bytes at the start of a binary matrix file.
pub const BIN_MAGIC: &[u8; 4] = b"LFSG";

/// The single PRNG used throughout the crate.
pub type Rng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A `D x N` real matrix with one sample per column and finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
}

impl DataMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::EmptyMatrix);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { values })
    }

    /// Builds a matrix from column-major values.
    pub fn from_column_slice(dim: usize, samples: usize, values: &[f64]) -> Result<Self> {
        if values.len() != dim * samples {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {dim}x{samples} matrix",
                values.len()
            )));
        }
        Self::new(DMatrix::from_column_slice(dim, samples, values))
    }

    /// Feature dimension `D`.
    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    /// Number of samples `N`.
    pub fn samples(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.values
    }

    pub fn column(&self, n: usize) -> DVector<f64> {
        self.values.column(n).into_owned()
    }

    /// Copies the given columns, in order, into a new matrix.
    pub fn select_columns(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::EmptyMatrix);
        }
        Ok(Self {
            values: self.values.select_columns(indices),
        })
    }

    pub fn transpose(&self) -> Self {
        Self {
            values: self.values.transpose(),
        }
    }
}

/// Cluster assignment of `N` samples into `{1..C}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelVector {
    labels: Vec<usize>,
    num_clusters: usize,
}

impl LabelVector {
    pub fn new(labels: Vec<usize>, num_clusters: usize) -> Result<Self> {
        if num_clusters == 0 {
            return Err(Error::InvalidLabels(
                "cluster count must be positive".into(),
            ));
        }
        if let Some(bad) = labels.iter().find(|&&l| l == 0 || l > num_clusters) {
            return Err(Error::InvalidLabels(format!(
                "label {bad} outside 1..={num_clusters}"
            )));
        }
        Ok(Self {
            labels,
            num_clusters,
        })
    }

    /// Builds labels with `C` equal to the largest label present.
    pub fn from_labels(labels: Vec<usize>) -> Result<Self> {
        let c = labels.iter().copied().max().unwrap_or(1);
        Self::new(labels, c)
    }

    /// Maps arbitrary integer class ids onto `1..=C` in ascending order of id.
    pub fn from_raw(raw: &[i64]) -> Result<Self> {
        let mut ids: Vec<i64> = raw.to_vec();
        ids.sort_unstable();
        ids.dedup();
        let map: BTreeMap<i64, usize> = ids.iter().enumerate().map(|(i, &v)| (v, i + 1)).collect();
        let labels = raw.iter().map(|v| map[v]).collect();
        Self::new(labels, ids.len().max(1))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_clusters(&self) -> usize {
        self.num_clusters
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.labels
    }

    pub fn get(&self, n: usize) -> usize {
        self.labels[n]
    }

    /// Member count per cluster, index `c - 1` for cluster `c`.
    pub fn histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.num_clusters];
        for &l in &self.labels {
            h[l - 1] += 1;
        }
        h
    }

    /// Column indices of the members of cluster `c` (1-based).
    pub fn members(&self, c: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, &l)| (l == c).then_some(i))
            .collect()
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            num_clusters: self.num_clusters,
        }
    }

    /// Constant labelling with every sample in cluster 1.
    pub fn constant(n: usize) -> Self {
        Self {
            labels: vec![1; n],
            num_clusters: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixFormat {
    Csv,
    Bin,
}

impl MatrixFormat {
    /// Guesses the format from a file extension, defaulting to binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => MatrixFormat::Csv,
            _ => MatrixFormat::Bin,
        }
    }
}

impl std::str::FromStr for MatrixFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(MatrixFormat::Csv),
            "bin" => Ok(MatrixFormat::Bin),
            other => Err(Error::Parse(format!("unknown matrix format `{other}`"))),
        }
    }
}

/// Loads a matrix. CSV rows are features and columns are samples; pass
/// `transpose` for sample-per-row files.
pub fn load_matrix(path: &Path, format: MatrixFormat, transpose: bool) -> Result<DataMatrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let m = match format {
        MatrixFormat::Csv => parse_csv(&bytes)?,
        MatrixFormat::Bin => parse_bin(&bytes)?,
    };
    Ok(if transpose { m.transpose() } else { m })
}

pub fn save_matrix(path: &Path, format: MatrixFormat, x: &DataMatrix) -> Result<()> {
    let bytes = match format {
        MatrixFormat::Csv => encode_csv(x).into_bytes(),
        MatrixFormat::Bin => encode_bin(x),
    };
    write_file(path, &bytes)
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

pub fn parse_csv(bytes: &[u8]) -> Result<DataMatrix> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|cell| {
                cell.trim().parse::<f64>().map_err(|_| {
                    Error::Parse(format!(
                        "line {}: non-numeric cell `{}`",
                        lineno + 1,
                        cell.trim()
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse(format!(
                    "line {}: ragged row ({} cells, expected {})",
                    lineno + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    let (d, n) = (rows.len(), rows[0].len());
    DataMatrix::new(DMatrix::from_fn(d, n, |i, j| rows[i][j]))
}

pub fn encode_csv(x: &DataMatrix) -> String {
    let mut out = String::new();
    for row in x.values().row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_bin(bytes: &[u8]) -> Result<DataMatrix> {
    if bytes.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    if bytes.len() < 12 || &bytes[..4] != BIN_MAGIC {
        return Err(Error::Parse("missing LFSG header".into()));
    }
    let d = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let n = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if d == 0 || n == 0 {
        return Err(Error::EmptyMatrix);
    }
    let body = &bytes[12..];
    if body.len() != d * n * 8 {
        return Err(Error::Parse(format!(
            "expected {} payload bytes for {d}x{n}, found {}",
            d * n * 8,
            body.len()
        )));
    }
    let values: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    DataMatrix::from_column_slice(d, n, &values)
}

pub fn encode_bin(x: &DataMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 8 * x.dim() * x.samples());
    out.extend_from_slice(BIN_MAGIC);
    out.extend_from_slice(&(x.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(x.samples() as u32).to_le_bytes());
    for v in x.values().as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Reads newline-separated integer labels. Distinct ids are mapped onto
/// `1..=C` in ascending order, so 0-based files load as well.
pub fn load_labels(path: &Path) -> Result<LabelVector> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let raw = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.parse::<i64>()
                .map_err(|_| Error::Parse(format!("non-integer label `{l}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    if raw.is_empty() {
        return Err(Error::InvalidLabels("label file is empty".into()));
    }
    LabelVector::from_raw(&raw)
}

pub fn save_labels(path: &Path, labels: &LabelVector) -> Result<()> {
    let mut out = String::with_capacity(labels.len() * 3);
    for l in labels.as_slice() {
        out.push_str(&l.to_string());
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

/// Parameters of a union-of-subspaces dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub num_clusters: usize,
    pub ambient_dim: usize,
    pub subspace_dims: Vec<usize>,
    pub points_per_cluster: Vec<usize>,
    pub noise_std: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Equal subspace dimension and cluster size for every cluster.
    pub fn uniform(
        num_clusters: usize,
        ambient_dim: usize,
        subspace_dim: usize,
        per_cluster: usize,
        noise_std: f64,
        seed: u64,
    ) -> Self {
        Self {
            num_clusters,
            ambient_dim,
            subspace_dims: vec![subspace_dim; num_clusters],
            points_per_cluster: vec![per_cluster; num_clusters],
            noise_std,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.num_clusters == 0 {
            return Err(Error::InvalidSpec("at least one cluster required".into()));
        }
        if self.subspace_dims.len() != self.num_clusters
            || self.points_per_cluster.len() != self.num_clusters
        {
            return Err(Error::InvalidSpec(
                "one subspace dimension and one count per cluster required".into(),
            ));
        }
        for (i, &d) in self.subspace_dims.iter().enumerate() {
            if d == 0 || d >= self.ambient_dim {
                return Err(Error::InvalidSpec(format!(
                    "cluster {}: subspace dimension {d} must be in 1..{}",
                    i + 1,
                    self.ambient_dim
                )));
            }
        }
        if let Some(i) = self.points_per_cluster.iter().position(|&n| n == 0) {
            return Err(Error::InvalidSpec(format!(
                "cluster {} has zero points",
                i + 1
            )));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::InvalidSpec(
                "noise_std must be a nonnegative number".into(),
            ));
        }
        Ok(())
    }
}

/// Samples `x = A_i z + noise` per cluster with an orthonormal basis `A_i`
/// (QR of a Gaussian matrix) and standard Gaussian coefficients `z`.
/// Columns are grouped by cluster in order. All bases are drawn before any
/// coefficients, so the subspaces depend only on the seed and the dimensions.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(DataMatrix, LabelVector)> {
    spec.validate()?;
    let mut rng = seeded_rng(spec.seed);
    let dim = spec.ambient_dim;
    let total: usize = spec.points_per_cluster.iter().sum();
    let mut x = DMatrix::zeros(dim, total);
    let mut labels = Vec::with_capacity(total);
    let mut col = 0;
    let bases: Vec<DMatrix<f64>> = spec
        .subspace_dims
        .iter()
        .map(|&d| gaussian_matrix(&mut rng, dim, d).qr().q())
        .collect();
    for (c, (basis, (&d, &count))) in bases
        .into_iter()
        .zip(spec.subspace_dims.iter().zip(&spec.points_per_cluster))
        .enumerate()
    {
        let coeffs = gaussian_matrix(&mut rng, d, count);
        let mut block = basis * coeffs;
        if spec.noise_std > 0.0 {
            block += gaussian_matrix(&mut rng, dim, count) * spec.noise_std;
        }
        x.columns_mut(col, count).copy_from(&block);
        labels.extend(std::iter::repeat_n(c + 1, count));
        col += count;
    }
    Ok((
        DataMatrix::new(x)?,
        LabelVector::new(labels, spec.num_clusters)?,
    ))
}

pub(crate) fn gaussian_matrix(rng: &mut Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    // Filled column by column so the draw order is fixed.
    let mut m = DMatrix::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            m[(i, j)] = StandardNormal.sample(rng);
        }
    }
    m
}

/// Per-class in-sample / out-of-sample counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub in_per_class: usize,
    pub out_per_class: usize,
    pub seed: u64,
}

/// One partition of a split. `indices` refer to columns of the original data.
#[derive(Debug, Clone)]
pub struct Partition {
    pub data: DataMatrix,
    pub labels: LabelVector,
    pub indices: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Split {
    pub in_sample: Partition,
    /// `None` when `out_per_class == 0`.
    pub out_sample: Option<Partition>,
}

/// Draws, per class and without replacement, `in_per_class` in-sample and
/// `out_per_class` out-of-sample columns. Indices within each partition are
/// kept in ascending column order.
pub fn split_in_out(x: &DataMatrix, y: &LabelVector, spec: &SplitSpec) -> Result<Split> {
    if x.samples() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} samples but {} labels",
            x.samples(),
            y.len()
        )));
    }
    if spec.in_per_class == 0 {
        return Err(Error::InvalidSpec("in_per_class must be positive".into()));
    }
    let need = spec.in_per_class + spec.out_per_class;
    let mut rng = seeded_rng(spec.seed);
    let mut in_idx = Vec::new();
    let mut out_idx = Vec::new();
    for c in 1..=y.num_clusters() {
        let members = y.members(c);
        if members.len() < need {
            return Err(Error::InsufficientClassSize {
                class: c,
                available: members.len(),
                required: need,
            });
        }
        let picked = index::sample(&mut rng, members.len(), need).into_vec();
        in_idx.extend(picked[..spec.in_per_class].iter().map(|&i| members[i]));
        out_idx.extend(picked[spec.in_per_class..].iter().map(|&i| members[i]));
    }
    in_idx.sort_unstable();
    out_idx.sort_unstable();
    let partition = |indices: Vec<usize>| -> Result<Partition> {
        Ok(Partition {
            data: x.select_columns(&indices)?,
            labels: y.select(&indices),
            indices,
        })
    };
    Ok(Split {
        in_sample: partition(in_idx)?,
        out_sample: if out_idx.is_empty() {
            None
        } else {
            Some(partition(out_idx)?)
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
        let mut s: Vec<f64> = m.clone().singular_values().iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }

    #[test]
    fn csv_three_by_two() {
        let x = parse_csv(b"1,2\n3,4\n5,6").unwrap();
        assert_eq!((x.dim(), x.samples()), (3, 2));
        assert_eq!(x.values()[(0, 1)], 2.0);
        assert_eq!(x.values()[(2, 0)], 5.0);
    }

    #[test]
    fn csv_errors() {
        assert!(matches!(parse_csv(b""), Err(Error::EmptyMatrix)));
        assert!(matches!(parse_csv(b"1,2\n3"), Err(Error::Parse(_))));
        assert!(matches!(parse_csv(b"1,x"), Err(Error::Parse(_))));
        assert!(matches!(parse_bin(b""), Err(Error::EmptyMatrix)));
        assert!(matches!(parse_bin(b"NOPE00000000"), Err(Error::Parse(_))));
    }

    #[test]
    fn files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let x = DataMatrix::from_column_slice(2, 3, &[0.1, -2.5, 1e-300, 7.0, 3.25, -0.0]).unwrap();
        for (name, fmt) in [("a.bin", MatrixFormat::Bin), ("a.csv", MatrixFormat::Csv)] {
            let p = dir.path().join(name);
            save_matrix(&p, fmt, &x).unwrap();
            assert_eq!(load_matrix(&p, fmt, false).unwrap(), x);
        }
        let t = load_matrix(&dir.path().join("a.csv"), MatrixFormat::Csv, true).unwrap();
        assert_eq!(t.dim(), 3);

        let y = LabelVector::new(vec![1, 3, 2, 2], 3).unwrap();
        let p = dir.path().join("labels.txt");
        save_labels(&p, &y).unwrap();
        assert_eq!(load_labels(&p).unwrap(), y);
        assert!(matches!(
            load_matrix(&dir.path().join("missing.bin"), MatrixFormat::Bin, false),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn zero_based_labels_are_remapped() {
        let y = LabelVector::from_raw(&[0, 9, 0, 4]).unwrap();
        assert_eq!(y.as_slice(), &[1, 3, 1, 2]);
        assert_eq!(y.num_clusters(), 3);
    }

    #[test]
    fn label_validation() {
        assert!(LabelVector::new(vec![1, 0], 2).is_err());
        assert!(LabelVector::new(vec![1, 3], 2).is_err());
        assert!(LabelVector::new(vec![], 0).is_err());
    }

    #[test]
    fn single_subspace_has_rank_two() {
        let (x, _) = generate_synthetic(&SyntheticSpec::uniform(1, 5, 2, 10, 0.0, 3)).unwrap();
        let s = singular_values(x.values());
        assert!(s[1] > 1e-6);
        assert!(s[2] <= 1e-10 * s[0]);
    }

    #[test]
    fn label_histogram_counts() {
        let (_, y) = generate_synthetic(&SyntheticSpec::uniform(3, 10, 2, 40, 0.1, 1)).unwrap();
        assert_eq!(y.histogram(), vec![40, 40, 40]);
    }

    #[test]
    fn class_blocks_have_subspace_rank() {
        let (x, y) = generate_synthetic(&SyntheticSpec::uniform(4, 30, 3, 40, 0.0, 11)).unwrap();
        for c in 1..=4 {
            let block = x.values().select_columns(&y.members(c));
            let s = singular_values(&block);
            assert!(s[2] > 1e-3 * s[0]);
            assert!(
                s[3..].iter().all(|&v| v <= 1e-10 * s[0]),
                "class {c}: {:?}",
                &s[..5]
            );
        }
    }

    #[test]
    fn synthetic_rejects_bad_specs() {
        assert!(generate_synthetic(&SyntheticSpec::uniform(2, 5, 5, 3, 0.0, 0)).is_err());
        assert!(generate_synthetic(&SyntheticSpec::uniform(2, 5, 2, 0, 0.0, 0)).is_err());
        assert!(generate_synthetic(&SyntheticSpec::uniform(2, 5, 0, 3, 0.0, 0)).is_err());
    }

    #[test]
    fn synthetic_is_deterministic() {
        let spec = SyntheticSpec::uniform(2, 6, 2, 5, 0.3, 99);
        assert_eq!(
            generate_synthetic(&spec).unwrap(),
            generate_synthetic(&spec).unwrap()
        );
    }

    #[test]
    fn subspaces_do_not_depend_on_point_count() {
        let (small, _) = generate_synthetic(&SyntheticSpec::uniform(2, 6, 2, 5, 0.0, 3)).unwrap();
        let (large, _) = generate_synthetic(&SyntheticSpec::uniform(2, 6, 2, 9, 0.0, 3)).unwrap();
        // every column of the small set lies in the span of the large set's cluster
        for (c, range) in [(0, 0..5), (1, 5..10)] {
            let span = large
                .values()
                .columns(9 * c, 9)
                .svd(true, false)
                .u
                .unwrap()
                .columns(0, 2)
                .into_owned();
            for j in range {
                let v = small.values().column(j);
                let residual = v - &span * (span.transpose() * v);
                assert!(residual.norm() < 1e-10 * v.norm());
            }
        }
    }

    fn ten_class_data(per_class: usize) -> (DataMatrix, LabelVector) {
        let n = 10 * per_class;
        let x = DataMatrix::new(DMatrix::from_fn(2, n, |i, j| (i * n + j) as f64)).unwrap();
        let y = LabelVector::new((0..n).map(|j| j % 10 + 1).collect(), 10).unwrap();
        (x, y)
    }

    #[test]
    fn usps_style_split() {
        let (x, y) = ten_class_data(110);
        let spec = SplitSpec {
            in_per_class: 50,
            out_per_class: 50,
            seed: 5,
        };
        let split = split_in_out(&x, &y, &spec).unwrap();
        let out = split.out_sample.as_ref().unwrap();
        assert_eq!(split.in_sample.data.samples(), 500);
        assert_eq!(out.data.samples(), 500);
        assert_eq!(split.in_sample.labels.histogram(), vec![50; 10]);
        assert_eq!(out.labels.histogram(), vec![50; 10]);
        assert!(split
            .in_sample
            .indices
            .iter()
            .all(|i| !out.indices.contains(i)));

        let again = split_in_out(&x, &y, &spec).unwrap();
        assert_eq!(again.in_sample.indices, split.in_sample.indices);
        assert_eq!(again.out_sample.unwrap().indices, out.indices);
    }

    #[test]
    fn split_without_out_sample() {
        let (x, y) = ten_class_data(5);
        let split = split_in_out(
            &x,
            &y,
            &SplitSpec {
                in_per_class: 3,
                out_per_class: 0,
                seed: 1,
            },
        )
        .unwrap();
        assert!(split.out_sample.is_none());
        assert_eq!(split.in_sample.data.samples(), 30);
    }

    #[test]
    fn split_insufficient_class() {
        let (x, y) = ten_class_data(5);
        let err = split_in_out(
            &x,
            &y,
            &SplitSpec {
                in_per_class: 3,
                out_per_class: 3,
                seed: 1,
            },
        );
        assert!(matches!(err, Err(Error::InsufficientClassSize { .. })));
    }
}
