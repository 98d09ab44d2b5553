//! Tensor autograd, a RoBERTa-shaped encoder, parameter-efficient adapters
//! and their gated composition, plus training and evaluation utilities.

#![no_std]
// Index loops mirror the tensor math; negated float comparisons reject NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod adapters;
pub mod autograd;
pub mod census;
pub mod composition;
pub mod config;
pub mod data;
pub mod encoder;
pub mod error;
pub mod metrics;
pub mod optim;
pub mod params;
pub mod synthetic;
pub mod tensor;
pub mod tokenizer;
pub mod train;
pub mod verify;

pub use autograd::{Gradients, KeySegment, Tape, Var};
pub use composition::{attach, build_preset, AdaptedModel, CompositionSpec};
pub use config::{ModelConfig, TaskHead};
pub use encoder::{init_model, Batch, EncoderModel, ForwardOptions, Mode};
pub use error::{Error, Result};
pub use tensor::Tensor;
