//! Graph homotopy for Gaussian graphical models under dimension reduction.
//!
//! A Gaussian model on `d` coordinates carries two independence graphs: the
//! conditional graph (zero pattern of the precision matrix) and the marginal
//! graph (zero pattern of the covariance). When coordinates are grouped into
//! clusters and each cluster is collapsed to a single summary — a within-
//! cluster mean, a leading principal component, a factor score — the reduced
//! model has its own graph on the clusters. This crate decides how that
//! reduced graph relates to the raw one:
//!
//! * **homotopic** — the reduced graph equals the cluster quotient of the
//!   raw graph (an edge between clusters exactly when some raw edge crosses
//!   them);
//! * **weakly homotopic** — the reduced graph only loses edges, never
//!   invents them;
//! * **not homotopic** — the reduction manufactures spurious edges.
//!
//! The library provides exact population-level checkers for several model
//! families where the verdict is decidable (factor models with two
//! equivalent reduction routes, shared-eigenvector models, latent rotation
//! models, corner-structured precision matrices), invariance analysis under
//! per-coordinate and linear transformations, and a bit-reproducible
//! empirical pipeline (Gaussian sampling, per-node lasso neighborhood
//! selection, covariance thresholding, stability-based tuning, discrepancy
//! tables) for studying the same question on finite samples.
//!
//! Modules:
//!
//! * [`matrix`] — dense symmetric linear algebra: Cholesky, eigendecomposition
//!   by cyclic Jacobi, positive-definite inversion, low-rank-update precision.
//! * [`ggm`] — partitions, edge sets, models, and the three graphs.
//! * [`reduce`] — population and sample reductions plus a one-factor EM fit.
//! * [`homotopy`] — verdicts and model-family checkers with seeded generators.
//! * [`estimate`] — sampling, graph estimation, stability selection, tables.
//! * [`cli`] — the command-line front end (demo/analyze/simulate/estimate).

pub mod cli;
pub mod error;
pub mod estimate;
pub mod ggm;
pub mod homotopy;
pub mod matrix;
pub mod reduce;

pub use error::{GhomError, Result};
