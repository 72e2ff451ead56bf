//! Cluster representatives and grayscale image export.
//!
//! The representative of a cluster is `a_c = Σ_{j≤d} σ_j u_j` from the SVD of
//! the raw (uncentered) member block. Each `u_j` is signed so that its
//! entries sum to a nonnegative value; this fixes the output without
//! resolving the rotational ambiguity of the basis itself.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{write_file, DataMatrix, LabelVector};
use crate::error::{Error, Result};
use crate::oos::{numerical_rank, sorted_svd, SUBSPACE_RANK_TOL};

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterRepresentative {
    pub cluster: usize,
    pub vector: Vec<f64>,
    /// Singular values that contributed, descending.
    pub singular_values: Vec<f64>,
}

impl ClusterRepresentative {
    pub fn image(&self, dx: usize, dy: usize) -> Result<DMatrix<f64>> {
        matricize(&self.vector, dx, dy)
    }
}

pub fn cluster_representatives(
    x: &DataMatrix,
    labels: &LabelVector,
    d: usize,
) -> Result<Vec<ClusterRepresentative>> {
    if x.samples() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} samples but {} labels",
            x.samples(),
            labels.len()
        )));
    }
    (1..=labels.num_clusters())
        .map(|c| {
            let members = labels.members(c);
            if members.is_empty() {
                return Err(Error::EmptyCluster(c));
            }
            let block = x.values().select_columns(&members);
            let (u, s) = sorted_svd(&block);
            let keep = numerical_rank(&s, SUBSPACE_RANK_TOL).min(d);
            let mut vector = vec![0.0; x.dim()];
            for (j, &sigma) in s.iter().enumerate().take(keep) {
                let col = u.column(j);
                let sign = if col.sum() < 0.0 { -1.0 } else { 1.0 };
                for (a, &v) in vector.iter_mut().zip(col.iter()) {
                    *a += sign * sigma * v;
                }
            }
            Ok(ClusterRepresentative {
                cluster: c,
                vector,
                singular_values: s[..keep].to_vec(),
            })
        })
        .collect()
}

/// Column-major reshape of a length `dx * dy` vector into `dx` rows and
/// `dy` columns.
pub fn matricize(a: &[f64], dx: usize, dy: usize) -> Result<DMatrix<f64>> {
    if dx * dy != a.len() || a.is_empty() {
        return Err(Error::ShapeMismatch {
            dx,
            dy,
            len: a.len(),
        });
    }
    Ok(DMatrix::from_column_slice(dx, dy, a))
}

pub fn vectorize(image: &DMatrix<f64>) -> Vec<f64> {
    image.as_slice().to_vec()
}

/// Min-max maps an image to 8-bit gray, row-major. A constant image maps to
/// all zeros; rounding is half-up.
pub fn to_gray8(image: &DMatrix<f64>) -> Vec<u8> {
    let (lo, hi) = image
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let range = hi - lo;
    let mut out = Vec::with_capacity(image.len());
    for row in image.row_iter() {
        for &v in row.iter() {
            let p = if range > 0.0 {
                (255.0 * (v - lo) / range + 0.5).floor().clamp(0.0, 255.0)
            } else {
                0.0
            };
            out.push(p as u8);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageFormat {
    Pgm,
    Png,
}

impl ImageFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ImageFormat::Pgm => "pgm",
            ImageFormat::Png => "png",
        }
    }
}

impl std::str::FromStr for ImageFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pgm" => Ok(ImageFormat::Pgm),
            "png" => Ok(ImageFormat::Png),
            other => Err(Error::Parse(format!("unknown image format `{other}`"))),
        }
    }
}

/// Binary PGM (P5, maxval 255). Width is the column count.
pub fn encode_pgm(pixels: &[u8], width: usize, height: usize) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

/// Parses a binary PGM with maxval 255 into `(width, height, pixels)`.
pub fn decode_pgm(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Parse("truncated PGM header".into()));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    if fields[0] != "P5" {
        return Err(Error::Parse(format!(
            "unsupported PGM magic `{}`",
            fields[0]
        )));
    }
    let num = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::Parse(format!("bad PGM field `{s}`")))
    };
    let (w, h, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
    if maxval != 255 {
        return Err(Error::Parse(format!("unsupported PGM maxval {maxval}")));
    }
    let data = &bytes[pos + 1..];
    if data.len() != w * h {
        return Err(Error::Parse(format!(
            "expected {} pixel bytes, found {}",
            w * h,
            data.len()
        )));
    }
    Ok((w, h, data.to_vec()))
}

/// 8-bit grayscale PNG without alpha or interlacing.
pub fn encode_png(pixels: &[u8], width: usize, height: usize) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width as u32, height as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc
            .write_header()
            .map_err(|e| Error::Parse(e.to_string()))?;
        writer
            .write_image_data(pixels)
            .map_err(|e| Error::Parse(e.to_string()))?;
    }
    Ok(out)
}

/// Writes `cluster_<c>.<ext>` for every `(c, image)` and returns the paths.
pub fn export_images(
    images: &[(usize, DMatrix<f64>)],
    dir: &Path,
    format: ImageFormat,
) -> Result<Vec<PathBuf>> {
    if images.is_empty() {
        return Err(Error::InvalidSpec("no images to export".into()));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    images
        .iter()
        .map(|(c, image)| {
            let pixels = to_gray8(image);
            let (w, h) = (image.ncols(), image.nrows());
            let bytes = match format {
                ImageFormat::Pgm => encode_pgm(&pixels, w, h),
                ImageFormat::Png => encode_png(&pixels, w, h)?,
            };
            let path = dir.join(format!("cluster_{c}.{}", format.extension()));
            write_file(&path, &bytes)?;
            Ok(path)
        })
        .collect()
}
