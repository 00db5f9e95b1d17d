//! Raster type plus the convolution and resampling primitives the rest of
//! the toolkit builds on.

mod filter;
pub mod io;
mod resize;
mod tensor;

pub use filter::{clamp01, convolve2d, gaussian_kernel, Kernel2D};
pub use resize::{cubic_weight, resize_bicubic};
pub use tensor::ImageTensor;
