//! Multilayer graph signal processing (M-GSP) for multi-frame images.
//!
//! A multi-frame image (RGB, hyperspectral) is modelled as a multilayer graph
//! with `M` layers (frames) sharing `N` entities (pixels or superpixels). The
//! graph is represented by a 4th-order tensor `F ∈ ℝ^{M×N×M×N}`; its spectral
//! and singular bases come from tensor decompositions and drive the transform,
//! sampling, and convolution tools used by the image pipelines.
//!
//! Indices are documented 1-based (α, i, β, j) to match the usual notation but
//! every API is 0-based.

pub mod builders;
pub mod convolution;
pub mod cube;
pub mod error;
pub mod imageio;
pub mod kmeans;
pub mod linalg;
pub mod mlg;
pub mod pipelines;
pub mod sampling;
pub mod spectra;
pub mod superpixel;
pub mod tensor;

pub use error::{MgspError, Result};
pub use mlg::{MultilayerGraph, Representation};
pub use spectra::{BasisKind, SpectralBasis};
pub use tensor::{MlgSignal, Tensor4};
