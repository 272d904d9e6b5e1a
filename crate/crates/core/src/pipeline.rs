// SPDX-License-Identifier: Apache-2.0

//! The benchmark stages: perturb every test video under every operation,
//! score every copy, then evaluate and report.
//!
//! Output tree under `output_root`:
//!
//! ```text
//! <op_id>/manifest.jsonl                 perturbed copy of the test split
//! <op_id>/<video_id>__<op_id>/000000.png
//! <op_id>/<video_id>__<op_id>.stamp      parameters the copy was made with
//! scores/<op_id>.csv                     per-frame scores (ingestion format)
//! scores/clean.csv                       scores on the unaltered test split
//! scores/scorer.json                     scorer identity
//! report/report.{csv,md,json}, report/category_means.csv
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Mutex;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec;
use crate::config::{RunConfig, ScorerConfig};
use crate::dataset::{self, LoadOptions, Manifest, VideoRecord};
use crate::error::{Error, Result};
use crate::metrics::EvalCell;
use crate::perturb::{self, ApplyOptions, OpId, PerturbationSpec};
use crate::report::{self, AucLevel, EvalReport, RunManifest};
use crate::scorer::{self, FrameScore, Provenance, ScoreRow, ScorerProcess};

/// Score key for the unaltered test split.
pub const CLEAN_KEY: &str = "clean";
pub const BASELINE_NAME: &str = "baseline-laplacian";
const STAMP_HEADER: &str = "forgebench-stamp v1";

#[derive(Debug, Clone)]
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn op_dir(&self, op: OpId) -> PathBuf {
        self.root.join(op.as_str())
    }

    pub fn video_dir(&self, op: OpId, video_id: &str) -> PathBuf {
        self.op_dir(op).join(format!("{video_id}__{op}"))
    }

    pub fn stamp(&self, op: OpId, video_id: &str) -> PathBuf {
        self.op_dir(op).join(format!("{video_id}__{op}.stamp"))
    }

    pub fn op_manifest(&self, op: OpId) -> PathBuf {
        self.op_dir(op).join("manifest.jsonl")
    }

    pub fn scores_dir(&self) -> PathBuf {
        self.root.join("scores")
    }

    pub fn score_csv(&self, key: &str) -> PathBuf {
        self.scores_dir().join(format!("{key}.csv"))
    }

    pub fn scorer_info(&self) -> PathBuf {
        self.scores_dir().join("scorer.json")
    }

    pub fn report_dir(&self) -> PathBuf {
        self.root.join("report")
    }
}

fn stamp_text(video: &VideoRecord, spec: &PerturbationSpec, cfg: &RunConfig) -> String {
    let mut s = format!(
        "{STAMP_HEADER}\nvideo_id={}\nop_id={}\nparams={}\nsource={}:{}:{}x{}:{}\n",
        video.id,
        spec.op_id,
        spec.params_string(),
        video.frames_dir.display(),
        video.n_frames,
        video.width,
        video.height,
        video.fps.as_str(),
    );
    if spec.seeded() {
        s.push_str(&format!("global_seed={}\n", cfg.global_seed));
    }
    if spec.op_id.is_codec() {
        s.push_str(&format!(
            "encode={}\ndecode={}\n",
            cfg.codec.encode_template, cfg.codec.decode_template
        ));
    }
    s
}

fn load_source(cfg: &RunConfig) -> Result<Manifest> {
    let m = dataset::load_manifest(cfg.manifest_path()?)?;
    if m.test_videos().next().is_none() {
        return Err(Error::Config(format!("manifest {} has no test videos", m.dataset_name)));
    }
    Ok(m)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct OpOutcome {
    pub op_id: String,
    pub written: usize,
    pub skipped: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PerturbSummary {
    pub ops: Vec<OpOutcome>,
}

impl PerturbSummary {
    pub fn written(&self) -> usize {
        self.ops.iter().map(|o| o.written).sum()
    }

    pub fn skipped(&self) -> usize {
        self.ops.iter().map(|o| o.skipped).sum()
    }

    pub fn outcome(&self, op: OpId) -> Option<&OpOutcome> {
        self.ops.iter().find(|o| o.op_id == op.as_str())
    }
}

impl fmt::Display for PerturbSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for o in &self.ops {
            match &o.error {
                None => writeln!(f, "{:<12} ok: {} written, {} up to date", o.op_id, o.written, o.skipped)?,
                Some(e) => writeln!(f, "{:<12} FAILED: {e}", o.op_id)?,
            }
        }
        Ok(())
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

enum TaskResult {
    Written(VideoRecord),
    Skipped(VideoRecord),
}

fn perturb_one(
    video: &VideoRecord,
    spec: &PerturbationSpec,
    cfg: &RunConfig,
    layout: &Layout,
) -> Result<TaskResult> {
    let out_dir = layout.video_dir(spec.op_id, &video.id);
    let stamp_path = layout.stamp(spec.op_id, &video.id);
    let stamp = stamp_text(video, spec, cfg);
    let (width, height) = perturb::output_dims(spec, video.width, video.height)?;
    let expected = VideoRecord {
        frames_dir: out_dir.clone(),
        width,
        height,
        ..video.clone()
    };

    let last_frame = dataset::frame_path(&out_dir, video.n_frames - 1);
    if fs::read_to_string(&stamp_path).ok().as_deref() == Some(stamp.as_str()) && last_frame.is_file() {
        return Ok(TaskResult::Skipped(expected));
    }
    match fs::remove_file(&stamp_path) {
        Ok(()) => {}
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
        Err(e) => return Err(Error::io(&stamp_path, e)),
    }

    let record = if spec.op_id.is_codec() {
        let log = layout.op_dir(spec.op_id).join("codec.log");
        codec::compress_roundtrip_logged(video, spec.crf()?, &cfg.codec, &out_dir, Some(&log))?
    } else {
        let opts = ApplyOptions {
            codec: &cfg.codec,
            force: true,
        };
        perturb::apply_operation(video, spec, cfg.global_seed, &out_dir, &opts)?
    };
    fs::write(&stamp_path, stamp).map_err(|e| Error::io(&stamp_path, e))?;
    Ok(TaskResult::Written(record))
}

/// Materializes a complete perturbed copy of the test split per op.
///
/// Completed videos whose stamp matches are skipped. A failure in one op
/// does not stop the others; all failures are reported at the end.
pub fn cmd_perturb(cfg: &RunConfig) -> Result<PerturbSummary> {
    let source = load_source(cfg)?;
    let layout = Layout::new(&cfg.output_root);
    let tests: Vec<&VideoRecord> = source.test_videos().collect();
    for spec in &cfg.operations {
        let dir = layout.op_dir(spec.op_id);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }

    let tasks: Vec<(usize, usize)> = (0..cfg.operations.len())
        .flat_map(|o| (0..tests.len()).map(move |v| (o, v)))
        .collect();
    let results: Vec<Result<TaskResult>> = pool(cfg.workers)?.install(|| {
        tasks
            .par_iter()
            .map(|&(o, v)| perturb_one(tests[v], &cfg.operations[o], cfg, &layout))
            .collect()
    });

    let mut summary = PerturbSummary::default();
    let mut results = results.into_iter();
    for spec in &cfg.operations {
        let mut outcome = OpOutcome {
            op_id: spec.op_id.to_string(),
            ..Default::default()
        };
        let mut records = Vec::with_capacity(tests.len());
        let mut errors = Vec::new();
        for _ in 0..tests.len() {
            match results.next().expect("one result per task") {
                Ok(TaskResult::Written(r)) => {
                    outcome.written += 1;
                    records.push(r);
                }
                Ok(TaskResult::Skipped(r)) => {
                    outcome.skipped += 1;
                    records.push(r);
                }
                Err(e) => errors.push(e.to_string()),
            }
        }
        let manifest_path = layout.op_manifest(spec.op_id);
        if errors.is_empty() {
            dataset::write_manifest(&manifest_path, &records)?;
        } else {
            let _ = fs::remove_file(&manifest_path);
            outcome.error = Some(format!("{} video(s) failed; first: {}", errors.len(), errors[0]));
        }
        summary.ops.push(outcome);
    }

    let failed: Vec<&OpOutcome> = summary.ops.iter().filter(|o| o.error.is_some()).collect();
    if !failed.is_empty() {
        return Err(Error::StageFailed(format!("perturb failed for {} op(s):\n{summary}", failed.len())));
    }
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditFinding {
    pub op_id: String,
    pub problem: String,
}

/// Checks that each op's perturbed manifest lists every test video exactly
/// once, with all of its frames on disk.
pub fn audit_whole_copy(cfg: &RunConfig) -> Result<Vec<AuditFinding>> {
    let source = load_source(cfg)?;
    let layout = Layout::new(&cfg.output_root);
    let mut findings = Vec::new();
    for spec in &cfg.operations {
        let op = spec.op_id;
        let mut flag = |problem: String| {
            findings.push(AuditFinding {
                op_id: op.to_string(),
                problem,
            })
        };
        let manifest = match dataset::load_manifest_with(&layout.op_manifest(op), LoadOptions { verify_frames: true }) {
            Ok(m) => m,
            Err(e) => {
                flag(e.to_string());
                continue;
            }
        };
        for v in source.test_videos() {
            let n = manifest.videos.iter().filter(|r| r.id == v.id).count();
            if n != 1 {
                flag(format!("test video {} appears {n} times", v.id));
            }
        }
        for r in &manifest.videos {
            match source.get(&r.id) {
                Some(src) if src.split == dataset::Split::Test => {
                    if r.n_frames != src.n_frames || r.label != src.label {
                        flag(format!("video {} does not match its source record", r.id));
                    }
                }
                _ => flag(format!("video {} is not a test video of the source manifest", r.id)),
            }
        }
    }
    Ok(findings)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ScorerInfo {
    pub name: String,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreSummary {
    pub scorer: String,
    pub rows_per_key: BTreeMap<String, usize>,
}

struct ScoreTask<'a> {
    key: String,
    video: &'a VideoRecord,
    indices: Vec<usize>,
}

fn score_tasks<'a>(cfg: &RunConfig, copies: &'a [(String, Vec<VideoRecord>)]) -> Result<Vec<ScoreTask<'a>>> {
    let mut tasks = Vec::new();
    for (key, videos) in copies {
        for video in videos {
            tasks.push(ScoreTask {
                key: key.clone(),
                video,
                indices: dataset::sample_frame_indices(video.n_frames, cfg.frame_sample_k)?,
            });
        }
    }
    Ok(tasks)
}

fn score_baseline(tasks: &[ScoreTask<'_>], workers: usize) -> Result<Vec<Vec<FrameScore>>> {
    pool(workers)?.install(|| {
        tasks
            .par_iter()
            .map(|t| {
                t.indices
                    .iter()
                    .map(|&i| {
                        let frame = dataset::read_frame(t.video, i)?;
                        Ok(FrameScore {
                            video_id: t.video.id.clone(),
                            frame_index: i,
                            score: scorer::baseline_score_frame(&frame)?,
                        })
                    })
                    .collect()
            })
            .collect()
    })
}

/// Runs `tasks` over a pool of scorer processes, one process per worker
/// thread and one request in flight per process.
fn score_protocol(
    tasks: &[ScoreTask<'_>],
    command: &str,
    workers: usize,
    timeout: Duration,
) -> Result<(String, Vec<Vec<FrameScore>>)> {
    let n_procs = workers.clamp(1, tasks.len().max(1));
    let next = Mutex::new(0usize);
    let abort = AtomicBool::new(false);
    let results: Mutex<Vec<Option<Vec<FrameScore>>>> = Mutex::new(vec![None; tasks.len()]);
    let first_error: Mutex<Option<Error>> = Mutex::new(None);
    let name: Mutex<Option<String>> = Mutex::new(None);

    std::thread::scope(|s| {
        for _ in 0..n_procs {
            s.spawn(|| {
                let run = || -> Result<()> {
                    let mut proc = ScorerProcess::spawn(command, timeout)?;
                    name.lock().unwrap().get_or_insert_with(|| proc.name().to_string());
                    loop {
                        if abort.load(Ordering::Relaxed) {
                            break;
                        }
                        let i = {
                            let mut n = next.lock().unwrap();
                            let i = *n;
                            *n += 1;
                            i
                        };
                        let Some(task) = tasks.get(i) else { break };
                        let scores = scorer::score_video_protocol(task.video, &task.indices, &i.to_string(), &mut proc)?;
                        results.lock().unwrap()[i] = Some(scores);
                    }
                    proc.close()
                };
                if let Err(e) = run() {
                    abort.store(true, Ordering::Relaxed);
                    first_error.lock().unwrap().get_or_insert(e);
                }
            });
        }
    });

    if let Some(e) = first_error.into_inner().unwrap() {
        return Err(e);
    }
    let results = results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.ok_or_else(|| Error::Scorer("scorer pool stopped before all videos were scored".into())))
        .collect::<Result<Vec<_>>>()?;
    let name = name.into_inner().unwrap().unwrap_or_else(|| "protocol".into());
    Ok((name, results))
}

fn load_copies(cfg: &RunConfig, source: &Manifest, layout: &Layout) -> Result<Vec<(String, Vec<VideoRecord>)>> {
    let mut copies = vec![(CLEAN_KEY.to_string(), source.test_videos().cloned().collect())];
    for spec in &cfg.operations {
        let path = layout.op_manifest(spec.op_id);
        if !path.is_file() {
            return Err(Error::StageFailed(format!(
                "no perturbed copy for op {} (missing {}); run `perturb` first",
                spec.op_id,
                path.display()
            )));
        }
        let m = dataset::load_manifest(&path)?;
        copies.push((spec.op_id.to_string(), m.videos));
    }
    Ok(copies)
}

fn write_scorer_info(layout: &Layout, info: &ScorerInfo) -> Result<()> {
    let path = layout.scorer_info();
    let text = serde_json::to_string_pretty(info).map_err(|e| Error::Report(e.to_string()))? + "\n";
    fs::create_dir_all(layout.scores_dir()).map_err(|e| Error::io(layout.scores_dir(), e))?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// Scores every perturbed copy (and the clean split) and writes one score
/// CSV per key.
pub fn cmd_score(cfg: &RunConfig) -> Result<ScoreSummary> {
    let source = load_source(cfg)?;
    let layout = Layout::new(&cfg.output_root);
    fs::create_dir_all(layout.scores_dir()).map_err(|e| Error::io(layout.scores_dir(), e))?;

    if let ScorerConfig::File { path } = &cfg.scorer {
        return score_from_file(cfg, &source, &layout, path);
    }

    let copies = load_copies(cfg, &source, &layout)?;
    let tasks = score_tasks(cfg, &copies)?;
    let (info, results) = match &cfg.scorer {
        ScorerConfig::Baseline => (
            ScorerInfo {
                name: BASELINE_NAME.into(),
                provenance: Provenance::Baseline,
            },
            score_baseline(&tasks, cfg.workers)?,
        ),
        ScorerConfig::Protocol { command } => {
            let (name, results) =
                score_protocol(&tasks, command, cfg.workers, Duration::from_secs(cfg.scorer_timeout))?;
            (
                ScorerInfo {
                    name,
                    provenance: Provenance::Protocol,
                },
                results,
            )
        }
        ScorerConfig::File { .. } => unreachable!("handled above"),
    };

    let mut by_key: BTreeMap<String, Vec<ScoreRow>> = BTreeMap::new();
    for (task, scores) in tasks.iter().zip(results) {
        let rows = by_key.entry(task.key.clone()).or_default();
        rows.extend(scores.into_iter().map(|s| ScoreRow {
            op_id: task.key.clone(),
            video_id: s.video_id,
            frame_index: s.frame_index as i64,
            score: s.score,
        }));
    }
    write_score_files(&layout, &info, by_key)
}

fn write_score_files(layout: &Layout, info: &ScorerInfo, by_key: BTreeMap<String, Vec<ScoreRow>>) -> Result<ScoreSummary> {
    let mut rows_per_key = BTreeMap::new();
    for (key, rows) in by_key {
        scorer::write_score_rows(&layout.score_csv(&key), &rows)?;
        rows_per_key.insert(key, rows.len());
    }
    write_scorer_info(layout, info)?;
    Ok(ScoreSummary {
        scorer: info.name.clone(),
        rows_per_key,
    })
}

fn score_from_file(cfg: &RunConfig, source: &Manifest, layout: &Layout, path: &Path) -> Result<ScoreSummary> {
    let rows = scorer::read_score_rows(path)?;
    // full validation up front: unknown ids, duplicates, mixed styles
    scorer::score_sets_from_rows(&rows, source, Provenance::File)?;
    let mut by_key: BTreeMap<String, Vec<ScoreRow>> = BTreeMap::new();
    for r in rows {
        by_key.entry(r.op_id.clone()).or_default().push(r);
    }
    let missing: Vec<String> = cfg
        .operations
        .iter()
        .map(|s| s.op_id.to_string())
        .filter(|op| !by_key.contains_key(op))
        .collect();
    if !missing.is_empty() && !cfg.allow_partial {
        return Err(Error::MissingOps(format!(
            "scores file {} has no rows for op(s) {}",
            path.display(),
            missing.join(", ")
        )));
    }
    let wanted: Vec<String> = cfg.operations.iter().map(|s| s.op_id.to_string()).collect();
    by_key.retain(|k, _| k == CLEAN_KEY || wanted.contains(k));
    let name = cfg.detector_name.clone().unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "file".into())
    });
    let info = ScorerInfo {
        name,
        provenance: Provenance::File,
    };
    write_score_files(layout, &info, by_key)
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn cell_for(key: &str, op: Option<OpId>, cfg: &RunConfig, source: &Manifest, rows: &[ScoreRow]) -> Result<(usize, usize, f64)> {
    let labeled = match cfg.auc_level {
        AucLevel::Video => {
            let sets = scorer::score_sets_from_rows(rows, source, Provenance::File)?;
            let set = sets
                .get(key)
                .ok_or_else(|| Error::MissingOps(format!("scores for {key} are empty")))?;
            set.check_covers(source)?;
            set.labeled()?
        }
        AucLevel::Frame => scorer::frame_level_scores(rows, key, source)?,
    };
    let cell = EvalCell::from_scores(op.unwrap_or(OpId::C23), &labeled).map_err(|e| match e {
        Error::DegenerateLabels { n_real, n_fake, .. } => Error::DegenerateLabels {
            context: Some(format!("op {key}")),
            n_real,
            n_fake,
        },
        other => other,
    })?;
    Ok((cell.n_real, cell.n_fake, cell.auc_percent))
}

/// Builds the report from the score CSVs alone and writes CSV, Markdown,
/// JSON and category means under `report/`.
pub fn cmd_evaluate(cfg: &RunConfig) -> Result<EvalReport> {
    let started = unix_now();
    let source = load_source(cfg)?;
    source.check_evaluable()?;
    let layout = Layout::new(&cfg.output_root);

    let mut cells = Vec::new();
    let mut missing = Vec::new();
    for spec in &cfg.operations {
        let op = spec.op_id;
        let path = layout.score_csv(op.as_str());
        if !path.is_file() {
            missing.push(op);
            continue;
        }
        let rows: Vec<ScoreRow> = scorer::read_score_rows(&path)?
            .into_iter()
            .filter(|r| r.op_id == op.as_str())
            .collect();
        if rows.is_empty() {
            missing.push(op);
            continue;
        }
        let (n_real, n_fake, auc_percent) = cell_for(op.as_str(), Some(op), cfg, &source, &rows)?;
        cells.push(EvalCell {
            op_id: op,
            auc_percent,
            n_real,
            n_fake,
        });
    }
    if !missing.is_empty() && !cfg.allow_partial {
        let names: Vec<&str> = missing.iter().map(|o| o.as_str()).collect();
        return Err(Error::MissingOps(format!(
            "no scores for {} (use --allow-partial to report gaps)",
            names.join(", ")
        )));
    }
    if cells.is_empty() {
        return Err(Error::MissingOps("no operation has scores".into()));
    }

    let clean_path = layout.score_csv(CLEAN_KEY);
    let reference = if clean_path.is_file() {
        let rows: Vec<ScoreRow> = scorer::read_score_rows(&clean_path)?
            .into_iter()
            .filter(|r| r.op_id == CLEAN_KEY)
            .collect();
        if rows.is_empty() {
            None
        } else {
            Some(cell_for(CLEAN_KEY, None, cfg, &source, &rows)?.2)
        }
    } else {
        None
    };

    let info: Option<ScorerInfo> = fs::read_to_string(layout.scorer_info())
        .ok()
        .and_then(|t| serde_json::from_str(&t).ok());
    let detector = cfg
        .detector_name
        .clone()
        .or_else(|| info.as_ref().map(|i| i.name.clone()))
        .unwrap_or_else(|| "detector".into());

    let run_manifest = run_manifest(cfg, &source, info.as_ref(), started);
    let mut report = EvalReport::new(detector, cfg.trainset.clone(), cfg.auc_level, cells, missing, run_manifest)?;
    report.reference_auc_percent = reference;

    let dir = layout.report_dir();
    report::emit_csv(&report, &dir.join("report.csv"))?;
    report::emit_markdown(std::slice::from_ref(&report), &dir.join("report.md"))?;
    report::emit_json(&report, &dir.join("report.json"))?;
    report::emit_category_means(&report, &dir.join("category_means.csv"))?;
    Ok(report)
}

fn run_manifest(cfg: &RunConfig, source: &Manifest, info: Option<&ScorerInfo>, started: u64) -> RunManifest {
    use serde_json::json;

    let uses_codec = cfg.operations.iter().any(|s| s.op_id.is_codec());
    let mut tools = serde_json::Map::new();
    tools.insert("forgebench".into(), json!(env!("CARGO_PKG_VERSION")));
    if uses_codec {
        let version = cfg
            .codec
            .program()
            .and_then(|p| codec::tool_version(&p, Path::new(".")))
            .unwrap_or_else(|e| format!("unavailable: {e}"));
        tools.insert("encoder".into(), json!(version));
    }
    let mut m = RunManifest::new();
    m.insert("auc_level".into(), json!(cfg.auc_level.as_str()));
    m.insert("codec_encode_template".into(), json!(cfg.codec.encode_template));
    m.insert("codec_decode_template".into(), json!(cfg.codec.decode_template));
    m.insert("codec_timeout".into(), json!(cfg.codec.timeout));
    m.insert(
        "dataset".into(),
        json!({
            "name": source.dataset_name,
            "manifest": cfg.manifest.as_ref().map(|p| p.display().to_string()),
            "test_videos": source.test_videos().count(),
        }),
    );
    m.insert("frame_sample_k".into(), json!(cfg.frame_sample_k));
    m.insert("global_seed".into(), json!(cfg.global_seed));
    m.insert("operations".into(), json!(cfg.operations));
    m.insert(
        "scorer".into(),
        json!({
            "config": cfg.scorer.describe(),
            "name": info.map(|i| i.name.clone()),
            "provenance": info.map(|i| i.provenance),
        }),
    );
    m.insert("tool_versions".into(), serde_json::Value::Object(tools));
    m.insert("trainset".into(), json!(cfg.trainset));
    m.insert("started_at".into(), json!(started));
    m.insert("finished_at".into(), json!(unix_now()));
    m
}

/// perturb, score, evaluate; the first failing stage aborts.
pub fn cmd_run(cfg: &RunConfig) -> Result<EvalReport> {
    cmd_perturb(cfg)?;
    cmd_score(cfg)?;
    cmd_evaluate(cfg)
}

#[derive(Debug, Clone, PartialEq)]
pub enum CheckStatus {
    Passed(String),
    Skipped(String),
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DoctorReport {
    pub checks: Vec<(String, CheckStatus)>,
}

impl DoctorReport {
    pub fn ok(&self) -> bool {
        !self.checks.iter().any(|(_, s)| matches!(s, CheckStatus::Failed(_)))
    }
}

impl fmt::Display for DoctorReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, status) in &self.checks {
            match status {
                CheckStatus::Passed(m) => writeln!(f, "[ ok ] {name}: {m}")?,
                CheckStatus::Skipped(m) => writeln!(f, "[skip] {name}: {m}")?,
                CheckStatus::Failed(m) => writeln!(f, "[FAIL] {name}: {m}")?,
            }
        }
        if self.ok() {
            writeln!(f, "all checks passed")
        } else {
            let n = self.checks.iter().filter(|(_, s)| matches!(s, CheckStatus::Failed(_))).count();
            writeln!(f, "{n} check(s) failed")
        }
    }
}

/// Environment diagnostics. Never fails itself; problems are listed.
pub fn cmd_doctor(cfg: &RunConfig) -> DoctorReport {
    let mut checks = Vec::new();

    let manifest = match cfg.manifest.as_deref() {
        None => CheckStatus::Skipped("no manifest configured".into()),
        Some(p) => match dataset::load_manifest_with(p, LoadOptions { verify_frames: true })
            .and_then(|m| m.check_evaluable().map(|_| m))
        {
            Ok(m) => CheckStatus::Passed(format!(
                "{} videos, {} in test split",
                m.videos.len(),
                m.test_videos().count()
            )),
            Err(e) => CheckStatus::Failed(e.to_string()),
        },
    };
    checks.push(("manifest".to_string(), manifest));

    let codec = match cfg.codec.with_env_override() {
        Err(e) => CheckStatus::Failed(e.to_string()),
        Ok(codec_cfg) => match codec::validate_codec(&codec_cfg) {
            Ok(diag) => CheckStatus::Passed(diag.summary()),
            Err(e) if !cfg.operations.iter().any(|s| s.op_id.is_codec()) => {
                CheckStatus::Skipped(format!("no compression ops configured ({e})"))
            }
            Err(e) => CheckStatus::Failed(e.to_string()),
        },
    };
    checks.push(("codec".to_string(), codec));

    let scorer = match &cfg.scorer {
        ScorerConfig::Baseline => CheckStatus::Passed(format!("built-in {BASELINE_NAME}")),
        ScorerConfig::File { path } => match scorer::read_score_rows(path) {
            Ok(rows) => CheckStatus::Passed(format!("{} rows in {}", rows.len(), path.display())),
            Err(e) => CheckStatus::Failed(e.to_string()),
        },
        ScorerConfig::Protocol { command } => {
            match ScorerProcess::spawn(command, Duration::from_secs(cfg.scorer_timeout.min(30)))
                .and_then(|p| {
                    let name = p.name().to_string();
                    p.close().map(|_| name)
                }) {
                Ok(name) => CheckStatus::Passed(format!("handshake ok, scorer {name:?}")),
                Err(e) => CheckStatus::Failed(format!("handshake failed: {e}")),
            }
        }
    };
    checks.push(("scorer".to_string(), scorer));

    DoctorReport { checks }
}
