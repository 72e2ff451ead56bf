//! Least-squares subspace clustering with label-free hyperparameter search.
//!
//! The crate is organised bottom-up:
//!
//! * [`data`]: data matrices, label vectors, file formats, synthetic
//!   union-of-subspaces generation and per-class in/out splits.
//! * [`graph`]: affinity, normalized Laplacian, graph filtering, spectral
//!   embedding and k-means.
//! * [`algos`]: LSR, Gaussian-kernel LSR and graph-filtering LSR behind one
//!   [`algos::cluster`] entry point.
//! * [`metrics`]: ACC, NMI, pairwise F1 and the Wilcoxon rank-sum test.
//! * [`lfsg`]: label-free self-guided hyperparameter search and the
//!   label-driven oracle baseline.
//! * [`oos`]: out-of-sample assignment by point-to-subspace distance, in
//!   input space or in kernel coordinates.
//! * [`interpret`]: cluster representatives and grayscale image export.
//! * [`bench`]: the repeated-split evaluation protocol.

pub mod algos;
pub mod bench;
pub mod data;
pub mod error;
pub mod graph;
pub mod interpret;
pub mod lfsg;
pub mod metrics;
pub mod oos;

pub use error::{Error, Result};
