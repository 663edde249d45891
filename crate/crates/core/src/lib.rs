//! Graph convolutional networks whose convolution layers are MIMO graph
//! filters, in four parameterizations:
//!
//! - [`Structure::Full`]: one LSI graph filter per (output, input) feature pair, `P·Q·K` taps.
//! - [`Structure::AggregateInputs`]: inputs are summed, then `P` filters, `P·K` taps.
//! - [`Structure::ConsolidateOutputs`]: one filter per input, outputs summed into a
//!   single feature replicated `P` times, `Q·K` taps.
//! - [`Structure::Toeplitz`]: taps shared along feature offsets `p − q`, `(P+Q−1)·K` taps.
//!
//! Everything is 64-bit and hand-differentiated; there is no autodiff.
//!
//! # Signal layout
//!
//! A batch of `B` samples with `F` features on an `N`-node graph is an
//! `F × (B·N)` matrix: row `f` holds feature `f` of sample 0 in columns
//! `0..N`, of sample 1 in columns `N..2N`, and so on. A single sample is the
//! `B = 1` case.

pub mod data;
pub mod error;
pub mod filters;
pub mod graph;
pub mod gso;
pub mod nn;
pub mod optim;
pub mod rng;

pub use error::{Error, Result};
pub use filters::{FilterGradients, MimoFilterParams, Structure, Taps};
pub use graph::{Graph, SbmSpec};
pub use gso::{Gso, GsoKind};
