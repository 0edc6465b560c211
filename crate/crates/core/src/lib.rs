//! Graph spectral denoising of a noisy stereo view, guided by a depth-warped
//! high-quality view.
//!
//! The crate builds a 4-connected bilateral pixel graph over each image patch,
//! exposes its symmetric normalized Laplacian as a sparse operator, and filters
//! the noisy view with polynomial and conjugate-gradient Krylov filters that only
//! need Laplacian-vector products. A dense eigendecomposition oracle is provided
//! for verification on small graphs.

pub mod dibr;
pub mod error;
pub mod filters;
pub mod graph;
pub mod image;
pub mod oracle;
pub mod pipeline;
pub mod pnm;
pub mod scene;

pub use error::{Error, Result};
pub use filters::{apply_filter, FilterKind, FilterSpec};
pub use graph::{build_graph, GraphSignal, LinearOperator, NormalizedLaplacian, PixelGraph, WeightParams};
pub use image::{HoleMask, ImageGray};
