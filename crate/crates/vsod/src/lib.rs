//! Semi-supervised video salient object detection with pseudo-labels.
//!
//! The crate is a desk-scale, fully self-contained pipeline:
//!
//! - [`nn`] — a minimal differentiable numeric core (f64 tensors,
//!   convolution, bilinear resampling, softmax/attention primitives,
//!   reverse-mode gradients, finite-difference checking);
//! - [`spatial`] — the per-frame saliency network: a five-stage residual
//!   backbone at output stride 16, atrous spatial pyramid pooling, and a
//!   three-block refinement classifier fed by residual skip connections;
//! - [`temporal`] — the non-locally enhanced recurrent module (non-local
//!   attention, deep bidirectional ConvGRU) and the full video model;
//! - [`flow`] — optical-flow fields with pluggable estimation (analytic
//!   oracle for synthetic clips, exhaustive block matching) and backward
//!   mask warping;
//! - [`pseudo`] — flow-guided pseudo-label generation from sparse
//!   annotations and the (m / l) annotation schedules;
//! - [`train`] — the three-stage training pipeline (image pretraining,
//!   generator fine-tuning, joint video training) with deterministic
//!   seeding and Adam;
//! - [`metrics`] — precision-recall curves, maximum F-measure, S-measure,
//!   Jaccard index, and boundary contour accuracy;
//! - [`synth`] + [`data`] — a synthetic moving-shapes generator with exact
//!   masks and flow, dataset layout ingestion, and persistence;
//! - [`cli`] — the `vsod` command-line tool driving the whole pipeline.
//!
//! Everything is CPU-only, double precision, and bit-deterministic for a
//! fixed seed. See the `examples/` directory for one runnable example per
//! capability.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod flow;
pub mod imageio;
pub mod loss;
pub mod metrics;
pub mod nn;
pub mod optim;
pub mod pseudo;
pub mod rng;
pub mod spatial;
pub mod synth;
pub mod temporal;
pub mod train;

pub use error::{Error, Result};
