//! Weight-only quantization toolkit.
//!
//! Converts float weight matrices to 2-8 bit packed representations with
//! per-tensor, per-column, group-wise or adaptive scale granularity, executes
//! fused dequantize-matmul on the packed form, and provides analysis and
//! serving cost-model tooling.

pub mod analysis;
pub mod container;
pub mod cost;
pub mod error;
pub mod gemm;
pub mod granularity;
pub mod quant;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
pub use gemm::{gemm_fused, gemm_ref, Activation, GemmStats};
pub use granularity::{
    adapt_group_size, make_layout, AdaptiveReport, GroupLayout, LayoutKind, DEFAULT_MIN_GROUP,
};
pub use quant::{
    dequantize, quantize_linear, quantize_log, LogScaleMode, Mapping, PackedQuantTensor,
    QuantScheme,
};
pub use synth::{synth_weights, Distribution};
pub use tensor::{Item, Tensor, TensorBundle};
