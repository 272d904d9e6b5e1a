// SPDX-License-Identifier: Apache-2.0

//! Robustness benchmark for deepfake detectors.
//!
//! Each video processing operation is applied to a complete copy of the
//! test set, every copy is scored by a detector, and AUC is reported per
//! operation and grouped by operation category.

pub mod codec;
pub mod config;
pub mod dataset;
pub mod error;
pub mod fixture;
pub mod metrics;
pub mod perturb;
pub mod pipeline;
pub mod report;
pub mod rng;
pub mod scorer;

pub use dataset::{FrameBuffer, Label, Manifest, Split, VideoRecord};
pub use error::{Error, Result};
pub use metrics::{auc, EvalCell, LabeledScores};
pub use perturb::{Category, OpId, PerturbationSpec};
