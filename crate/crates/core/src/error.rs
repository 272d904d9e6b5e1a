// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("manifest {path}: no videos")]
    EmptyManifest { path: PathBuf },

    #[error("manifest {path}, line {line}: {message}")]
    ManifestLine {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("manifest {path}: duplicate video id {id:?} (line {line})")]
    DuplicateVideoId {
        path: PathBuf,
        id: String,
        line: usize,
    },

    #[error("video {video_id}: missing frame file {path}")]
    MissingFrame { video_id: String, path: PathBuf },

    #[error("frame {path}: {message}")]
    FrameDecode { path: PathBuf, message: String },

    #[error("frame {path}: dimension mismatch, expected {expected_w}x{expected_h}, found {found_w}x{found_h}")]
    DimensionMismatch {
        path: PathBuf,
        expected_w: u32,
        expected_h: u32,
        found_w: u32,
        found_h: u32,
    },

    #[error("video {video_id}: frame index {index} out of range (n_frames = {n_frames})")]
    FrameOutOfRange {
        video_id: String,
        index: usize,
        n_frames: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid operation spec: {0}")]
    InvalidSpec(String),

    #[error("output directory {0} already exists and is not empty")]
    OutputExists(PathBuf),

    #[error("codec config: {0}")]
    CodecConfig(String),

    #[error("tool not found: {command}")]
    ToolNotFound { command: String },

    #[error("command `{command}` exited with status {status}: {stderr}")]
    ToolFailed {
        command: String,
        status: String,
        stderr: String,
    },

    #[error("command `{command}` timed out after {seconds} s")]
    ToolTimeout { command: String, seconds: u64 },

    #[error("codec round-trip of {video_id}: expected {expected} frames, decoder produced {found}")]
    FrameCountMismatch {
        video_id: String,
        expected: usize,
        found: usize,
    },

    #[error("scorer protocol violation: {message} (line: {line:?})")]
    Protocol { message: String, line: String },

    #[error("scorer error: {0}")]
    Scorer(String),

    #[error("scores {path}, line {line}: {message}")]
    ScoreRow {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("scores: unknown video id {0:?}")]
    UnknownVideoId(String),

    #[error("scores: op {op_id}, video {video_id} mixes per-frame rows with an aggregated (-1) row")]
    MixedAggregation { op_id: String, video_id: String },

    #[error("scores: duplicate row (op {op_id}, video {video_id}, frame {frame_index})")]
    DuplicateScore {
        op_id: String,
        video_id: String,
        frame_index: i64,
    },

    #[error("degenerate labels{}: need at least one real and one fake (real = {n_real}, fake = {n_fake})", context.as_deref().map(|c| format!(" for {c}")).unwrap_or_default())]
    DegenerateLabels {
        context: Option<String>,
        n_real: usize,
        n_fake: usize,
    },

    #[error("duplicate op id {0}")]
    DuplicateOp(String),

    #[error("missing ops: {0}")]
    MissingOps(String),

    #[error("report: {0}")]
    Report(String),

    #[error("config: {0}")]
    Config(String),

    #[error("{0}")]
    StageFailed(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status for the CLI: 2 for configuration and input
    /// validation problems, 1 for failures while a stage was running.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::EmptyManifest { .. }
            | Error::ManifestLine { .. }
            | Error::DuplicateVideoId { .. }
            | Error::InvalidArgument(_)
            | Error::InvalidSpec(_)
            | Error::CodecConfig(_)
            | Error::DuplicateOp(_)
            | Error::Config(_) => 2,
            _ => 1,
        }
    }
}
