//! Haplotype-copying hidden Markov model engine.
//!
//! A bit-packed haplotype cache feeds rescaled forward and backward
//! recursions over recipient windows. Posterior copying probabilities are
//! derived from matching forward/backward tables and folded into a symmetric
//! distance matrix.

#![allow(clippy::needless_range_loop)]

pub mod aligned;
pub mod bench;
pub mod decode;
pub mod error;
pub mod hap_cache;
pub mod io;
pub mod kernels;
pub mod model_params;
pub mod oracle;
pub mod tables;

pub use decode::{
    combine_slabs, dist_mat, post_probs, transpose_block, DistanceBlock, DistanceMatrix, PosteriorSlab, EPSILON,
};
pub use error::{Error, Result};
pub use hap_cache::{CacheStore, CacheSummary, HaplotypeCache};
pub use kernels::{backward, forward, select_kernel, KernelConfig, KernelKind, LaneWidth, Threads, Unroll};
pub use model_params::{make_parameters, ModelParameters, MuSpec, ParameterSpec};
pub use tables::{make_backward_table, make_forward_table, BackwardTable, ColumnStatus, ForwardTable};
