//! Synthesis, inversion, and scoring of low-resolution heavy-rain face images.
//!
//! The forward model maps a clean high-resolution face `H` to a degraded
//! low-resolution observation
//!
//! ```text
//! J = (H ⊗ K)↓s
//! I = T ⊙ (J + Σ Sᵢ) + (1 − T) ⊙ A
//! ```
//!
//! where `S` is a rain-streak layer, `T` a transmission map, and `A` the
//! atmospheric light. [`rainmodel`] implements both halves of the model along
//! with its exact inverse, [`losses`] and [`metrics`] provide the training
//! objectives and evaluation scores, [`facecrop`] handles facial-component
//! patches and parsing maps, and [`dataset`] builds reproducible corpora on
//! disk.
//!
//! With the default `parallel` feature, per-row and per-sample loops run on
//! rayon. Disabling it yields a purely sequential build with bit-identical
//! results.

pub mod dataset;
mod error;
pub mod facecrop;
pub mod imgcore;
pub mod losses;
pub mod metrics;
pub mod par;
pub mod rainmodel;

pub use error::{Error, Result};
pub use imgcore::{clamp01, convolve2d, gaussian_kernel, resize_bicubic, ImageTensor, Kernel2D};

/// Version string recorded in every manifest.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
