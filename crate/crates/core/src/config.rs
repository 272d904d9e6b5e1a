// SPDX-License-Identifier: Apache-2.0

//! Run configuration: a TOML file plus command-line overrides.
//!
//! ```toml
//! manifest = "data/manifest.jsonl"
//! output_root = "runs/xception-c23"
//! global_seed = 42
//! frame_sample_k = 32
//! auc_level = "video"
//! detector_name = "XceptionNet"
//! trainset = "FFpp-C23"
//!
//! [[operations]]
//! op_id = "noise"
//! params = { sigma = 15.0 }
//!
//! [scorer]
//! kind = "protocol"
//! command = "python3 adapter.py --model xception.pt"
//!
//! [codec]
//! timeout = 600
//! ```
//!
//! Relative paths in the file are resolved against the file's directory.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::codec::CodecConfig;
use crate::dataset::DEFAULT_SAMPLE_K;
use crate::error::{Error, Result};
use crate::perturb::{OpId, PerturbationSpec};
use crate::report::AucLevel;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ScorerConfig {
    Baseline,
    Protocol { command: String },
    File { path: PathBuf },
}

impl ScorerConfig {
    pub fn describe(&self) -> String {
        match self {
            ScorerConfig::Baseline => "baseline".into(),
            ScorerConfig::Protocol { command } => format!("protocol: {command}"),
            ScorerConfig::File { path } => format!("file: {}", path.display()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub manifest: Option<PathBuf>,
    pub output_root: PathBuf,
    pub operations: Vec<PerturbationSpec>,
    pub global_seed: u64,
    pub frame_sample_k: usize,
    pub scorer: ScorerConfig,
    pub codec: CodecConfig,
    pub auc_level: AucLevel,
    pub workers: usize,
    /// Defaults to the scorer's self-reported name.
    pub detector_name: Option<String>,
    pub trainset: String,
    /// Seconds to wait for each scorer reply.
    pub scorer_timeout: u64,
    pub allow_partial: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            manifest: None,
            output_root: PathBuf::from("forgebench-out"),
            operations: PerturbationSpec::all_canonical(),
            global_seed: DEFAULT_SEED,
            frame_sample_k: DEFAULT_SAMPLE_K,
            scorer: ScorerConfig::Baseline,
            codec: CodecConfig::default(),
            auc_level: AucLevel::Video,
            workers: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            detector_name: None,
            trainset: "unspecified".into(),
            scorer_timeout: 300,
            allow_partial: false,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(m) = cfg.manifest.as_mut() {
            rebase(m);
        }
        rebase(&mut cfg.output_root);
        if let ScorerConfig::File { path } = &mut cfg.scorer {
            rebase(path);
        }
        Ok(cfg)
    }

    pub fn op_ids(&self) -> Vec<OpId> {
        self.operations.iter().map(|s| s.op_id).collect()
    }

    /// Keeps only the listed ops, preserving their configured parameters.
    pub fn restrict_ops(&mut self, ops: &[OpId]) {
        let mut specs = Vec::with_capacity(ops.len());
        for &op in ops {
            let spec = self
                .operations
                .iter()
                .find(|s| s.op_id == op)
                .cloned()
                .unwrap_or_else(|| PerturbationSpec::canonical(op));
            specs.push(spec);
        }
        self.operations = specs;
    }

    pub fn manifest_path(&self) -> Result<&Path> {
        self.manifest
            .as_deref()
            .ok_or_else(|| Error::Config("no manifest given (set `manifest` or pass --manifest)".into()))
    }

    /// Checks invariants and fills in default op parameters.
    pub fn validate(&mut self) -> Result<()> {
        if self.operations.is_empty() {
            return Err(Error::Config("operations list is empty".into()));
        }
        let mut seen = BTreeSet::new();
        for spec in &mut self.operations {
            if !seen.insert(spec.op_id) {
                return Err(Error::DuplicateOp(spec.op_id.to_string()));
            }
            *spec = spec.normalized()?;
        }
        if self.frame_sample_k == 0 {
            return Err(Error::Config("frame_sample_k must be >= 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be >= 1".into()));
        }
        if self.scorer_timeout == 0 {
            return Err(Error::Config("scorer_timeout must be >= 1".into()));
        }
        if self.trainset.is_empty() {
            return Err(Error::Config("trainset tag is empty".into()));
        }
        let manifest = self.manifest_path()?;
        if !manifest.is_file() {
            return Err(Error::Config(format!("manifest {} does not exist", manifest.display())));
        }
        match &self.scorer {
            ScorerConfig::File { path } if !path.is_file() => {
                return Err(Error::Config(format!("scores file {} does not exist", path.display())));
            }
            ScorerConfig::Protocol { command } if command.trim().is_empty() => {
                return Err(Error::Config("scorer command is empty".into()));
            }
            _ => {}
        }
        if self.operations.iter().any(|s| s.op_id.is_codec()) {
            self.codec = self.codec.with_env_override()?;
            self.codec.validate()?;
        }
        Ok(())
    }
}
