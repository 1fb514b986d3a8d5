//! Visual concept extraction with fused CNN descriptors.
//!
//! The crate covers the whole pipeline: a small CPU inference engine with
//! named layer taps and dense (fully convolutional) evaluation, spatial
//! pooling of feature maps into descriptors, layer/model/dataset fusion,
//! one-vs-rest linear SVM classification, keyframe sampling for video, and
//! a throughput harness.

pub mod bench;
pub mod classifier;
pub mod descriptor;
mod error;
pub mod fusion;
pub mod io;
pub mod nn;
pub mod ops;
pub mod synthetic;
pub mod tensor;
pub mod video;

pub use error::{Error, Result};
pub use tensor::{Shape, Tensor};
