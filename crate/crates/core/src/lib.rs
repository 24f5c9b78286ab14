//! Feed-forward image stylization with attention-guided multi-stroke fusion.
//!
//! The pipeline: a convolutional encoder with a self-attention block produces
//! content features and an attention map; style features are swapped in at
//! several patch scales; the attention map is clustered into stroke regions
//! that blend the per-scale results; a decoder with summary-statistic skip
//! connections renders the output image.

pub mod attention;
pub mod codec;
pub mod error;
pub mod fusion;
pub mod matrix;
pub mod metrics;
mod parallel;
pub mod pipeline;
pub mod swap;
pub mod tensor;
pub mod transforms;
pub mod weights;

pub use error::{Error, Result};
pub use tensor::Tensor;

pub use parallel::{set_thread_cap, thread_cap_from_env};
