//! Tensor-train (TT) compression for convolution layers.
//!
//! - [`tt`]: TT tensors, TT-SVD decomposition, reconstruction and parameter counts.
//! - [`tt_matrix`]: matrix TT format over factorized row/column indices.
//! - [`index`]: mixed-radix index bijections and channel factorization plans.
//! - [`conv`]: dense reference convolution, TT kernels and the TT forward pass,
//!   MAC accounting.
//! - [`net`]: layer manifests, weight files, network compression, rank sweeps,
//!   reports and the binary model format.
//! - [`cli`]: the `ttconv` command-line front end.

pub mod cli;
pub mod conv;
pub mod dense;
pub mod error;
pub mod index;
pub mod net;

mod svd;
pub mod tt;
pub mod tt_matrix;

pub use conv::{
    conv_flops, decompose_kernel, dense_conv_forward, kernel_to_matrix, reconstruct_kernel, tt_conv_forward,
    ConvLayerSpec, DenseConvKernel, FeatureMap, FlopMode, TtConvKernel,
};
pub use dense::DenseTensor;
pub use error::{Error, Result};
pub use index::{plan_factorization, FactorStrategy, FactorizationPlan, MultiIndex};
pub use tt::{tt_param_count, TtCore, TtTensor, Truncation};
pub use tt_matrix::TtMatrix;
