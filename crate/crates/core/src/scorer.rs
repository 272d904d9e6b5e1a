// SPDX-License-Identifier: Apache-2.0

//! Detector side of the harness: the stdio scoring protocol client, the
//! score CSV format, per-video aggregation and a built-in baseline scorer.
//!
//! Scores follow one convention everywhere: 1 means fake, 0 means real.
//!
//! Protocol v1, UTF-8 lines terminated by LF:
//!
//! ```text
//! > HELLO forgebench/1
//! < READY <scorer-name>
//! > VIDEO <request-id> <n>
//! > FRAME <abs-path>            (n times)
//! < SCORES <request-id> <n>
//! < S <float>                   (n times, same order as the frames)
//! > BYE
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::dataset::{FrameBuffer, Label, Manifest, VideoRecord};
use crate::error::{Error, Result};
use crate::metrics::LabeledScores;
use crate::perturb::luma;

pub const PROTOCOL_HELLO: &str = "HELLO forgebench/1";
pub const SCORE_CSV_HEADER: [&str; 4] = ["op_id", "video_id", "frame_index", "score"];
/// `frame_index` value marking an already aggregated video score.
pub const AGGREGATED_INDEX: i64 = -1;

/// Logistic centre and width of the baseline scorer.
pub const BASELINE_CENTER: f64 = 6.0;
pub const BASELINE_WIDTH: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct FrameScore {
    pub video_id: String,
    pub frame_index: usize,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Protocol,
    File,
    Baseline,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Protocol => "protocol",
            Provenance::File => "file",
            Provenance::Baseline => "baseline",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoScore {
    pub video_id: String,
    pub label: Label,
    pub score: f64,
}

/// Video-level scores of one operation's copy, sorted by video id.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSet {
    pub op_id: String,
    pub entries: Vec<VideoScore>,
    pub provenance: Provenance,
}

impl ScoreSet {
    pub fn labeled(&self) -> Result<LabeledScores> {
        LabeledScores::new(self.entries.iter().map(|e| (e.score, e.label)).collect())
    }

    /// Every test video of `manifest` must have exactly one entry.
    pub fn check_covers(&self, manifest: &Manifest) -> Result<()> {
        let missing: Vec<&str> = manifest
            .test_videos()
            .filter(|v| self.entries.binary_search_by(|e| e.video_id.as_str().cmp(&v.id)).is_err())
            .map(|v| v.id.as_str())
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::Scorer(format!(
                "op {}: no scores for test video(s) {}",
                self.op_id,
                missing.join(", ")
            )))
        }
    }
}

/// Arithmetic mean of per-frame scores.
pub fn aggregate_video_score(frame_scores: &[f64]) -> Result<f64> {
    if frame_scores.is_empty() {
        return Err(Error::InvalidArgument("cannot aggregate an empty score list".into()));
    }
    if let Some(s) = frame_scores.iter().find(|s| !is_valid_score(**s)) {
        return Err(Error::InvalidArgument(format!("score {s} outside [0, 1]")));
    }
    Ok(frame_scores.iter().sum::<f64>() / frame_scores.len() as f64)
}

fn is_valid_score(s: f64) -> bool {
    s.is_finite() && (0.0..=1.0).contains(&s)
}

/// Parses a plain decimal float (`[+-]digits[.digits][e[+-]digits]`).
/// Locale forms, `inf`, `nan` and hex are rejected.
pub fn parse_decimal(s: &str) -> Option<f64> {
    let b = s.as_bytes();
    let mut i = 0;
    if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
        i += 1;
    }
    let int_start = i;
    while i < b.len() && b[i].is_ascii_digit() {
        i += 1;
    }
    let mut digits = i - int_start;
    if i < b.len() && b[i] == b'.' {
        i += 1;
        let frac_start = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        digits += i - frac_start;
    }
    if digits == 0 {
        return None;
    }
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        i += 1;
        if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
            i += 1;
        }
        let exp_start = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        if i == exp_start {
            return None;
        }
    }
    if i != b.len() {
        return None;
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Parses a score and checks it lies in [0, 1].
pub fn parse_score(s: &str) -> std::result::Result<f64, String> {
    let v = parse_decimal(s).ok_or_else(|| format!("not a decimal number: {s:?}"))?;
    if !(0.0..=1.0).contains(&v) {
        return Err(format!("score {s} outside [0, 1]"));
    }
    Ok(v)
}

/// A running scorer subprocess speaking protocol v1.
pub struct ScorerProcess {
    command: String,
    name: String,
    child: Child,
    stdin: Option<BufWriter<ChildStdin>>,
    lines: Receiver<std::io::Result<String>>,
    stderr: Arc<Mutex<String>>,
    timeout: Duration,
}

impl fmt::Debug for ScorerProcess {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScorerProcess")
            .field("command", &self.command)
            .field("name", &self.name)
            .finish_non_exhaustive()
    }
}

impl ScorerProcess {
    /// Starts `command` (split with shell quoting rules, no shell) and
    /// completes the handshake.
    pub fn spawn(command: &str, timeout: Duration) -> Result<Self> {
        let argv = shell_words::split(command)
            .map_err(|e| Error::Config(format!("scorer command {command:?}: {e}")))?;
        let (program, args) = argv
            .split_first()
            .ok_or_else(|| Error::Config("empty scorer command".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound | std::io::ErrorKind::PermissionDenied => Error::ToolNotFound {
                    command: program.clone(),
                },
                _ => Error::io(program, e),
            })?;

        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            let mut reader = BufReader::new(stdout);
            loop {
                let mut line = String::new();
                match reader.read_line(&mut line) {
                    Ok(0) => break,
                    Ok(_) => {
                        let trimmed = line.strip_suffix('\n').unwrap_or(&line).to_string();
                        if tx.send(Ok(trimmed)).is_err() {
                            break;
                        }
                    }
                    Err(e) => {
                        let _ = tx.send(Err(e));
                        break;
                    }
                }
            }
        });

        let stderr_buf = Arc::new(Mutex::new(String::new()));
        let mut stderr = child.stderr.take().expect("piped stderr");
        let sink = Arc::clone(&stderr_buf);
        thread::spawn(move || {
            let mut buf = [0u8; 4096];
            while let Ok(n) = stderr.read(&mut buf) {
                if n == 0 {
                    break;
                }
                let mut s = sink.lock().unwrap();
                if s.len() < 64 * 1024 {
                    s.push_str(&String::from_utf8_lossy(&buf[..n]));
                }
            }
        });

        let stdin = child.stdin.take().map(BufWriter::new);
        let mut proc = Self {
            command: command.to_string(),
            name: String::new(),
            child,
            stdin,
            lines: rx,
            stderr: stderr_buf,
            timeout,
        };
        proc.send(&[PROTOCOL_HELLO.to_string()])?;
        let line = proc.recv()?;
        match line.strip_prefix("READY ") {
            Some(name) if !name.trim().is_empty() => proc.name = name.trim().to_string(),
            _ => return Err(protocol("expected `READY <scorer-name>`", &line)),
        }
        Ok(proc)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    fn send(&mut self, lines: &[String]) -> Result<()> {
        let stdin = self
            .stdin
            .as_mut()
            .ok_or_else(|| Error::Scorer("scorer stdin already closed".into()))?;
        let res = lines
            .iter()
            .try_for_each(|l| writeln!(stdin, "{l}"))
            .and_then(|_| stdin.flush());
        res.map_err(|e| self.crashed(&format!("write failed: {e}")))
    }

    fn recv(&mut self) -> Result<String> {
        match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => Err(self.crashed(&format!("read failed: {e}"))),
            Err(RecvTimeoutError::Timeout) => {
                let _ = self.child.kill();
                Err(Error::Scorer(format!(
                    "scorer `{}` did not answer within {} s",
                    self.command,
                    self.timeout.as_secs_f64()
                )))
            }
            Err(RecvTimeoutError::Disconnected) => Err(self.crashed("scorer closed its output")),
        }
    }

    fn crashed(&mut self, what: &str) -> Error {
        let status = match self.child.try_wait() {
            Ok(Some(s)) => format!(", {s}"),
            _ => String::new(),
        };
        let stderr = self.stderr.lock().map(|s| s.trim().to_string()).unwrap_or_default();
        Error::Scorer(format!(
            "scorer `{}` crashed: {what}{status}{}",
            self.command,
            if stderr.is_empty() {
                String::new()
            } else {
                format!("; stderr: {stderr}")
            }
        ))
    }

    /// Sends one VIDEO request and returns one score per frame, in order.
    pub fn score_frames(&mut self, request_id: &str, frames: &[PathBuf]) -> Result<Vec<f64>> {
        if request_id.is_empty() || request_id.chars().any(char::is_whitespace) {
            return Err(Error::InvalidArgument(format!("bad request id {request_id:?}")));
        }
        let mut request = Vec::with_capacity(frames.len() + 1);
        request.push(format!("VIDEO {request_id} {}", frames.len()));
        for p in frames {
            let abs = if p.is_absolute() {
                p.clone()
            } else {
                std::env::current_dir().map_err(|e| Error::io(p, e))?.join(p)
            };
            let s = abs.to_string_lossy();
            if s.contains('\n') {
                return Err(Error::InvalidArgument(format!("frame path with newline: {s:?}")));
            }
            request.push(format!("FRAME {s}"));
        }
        self.send(&request)?;

        let header = self.recv()?;
        let mut parts = header.split(' ');
        let (tag, id, count) = (parts.next(), parts.next(), parts.next());
        if tag != Some("SCORES") || parts.next().is_some() {
            return Err(protocol("expected `SCORES <request-id> <n>`", &header));
        }
        if id != Some(request_id) {
            return Err(protocol(&format!("wrong request id, expected {request_id}"), &header));
        }
        let n: usize = count
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| protocol("bad score count", &header))?;
        if n != frames.len() {
            return Err(protocol(
                &format!("count mismatch: sent {} frames, scorer answered {n}", frames.len()),
                &header,
            ));
        }
        let mut scores = Vec::with_capacity(n);
        for _ in 0..n {
            let line = self.recv()?;
            let value = line
                .strip_prefix("S ")
                .ok_or_else(|| protocol("expected `S <float>`", &line))?;
            scores.push(parse_score(value).map_err(|m| protocol(&m, &line))?);
        }
        Ok(scores)
    }

    /// Sends BYE and waits for a zero exit status.
    pub fn close(mut self) -> Result<()> {
        self.send(&["BYE".to_string()])?;
        self.stdin = None;
        let deadline = std::time::Instant::now() + self.timeout;
        loop {
            match self.child.try_wait().map_err(|e| Error::io(&self.command, e))? {
                Some(status) if status.success() => return Ok(()),
                Some(status) => {
                    return Err(Error::Scorer(format!(
                        "scorer `{}` exited with {status} after BYE",
                        self.command
                    )))
                }
                None if std::time::Instant::now() > deadline => {
                    let _ = self.child.kill();
                    return Err(Error::Scorer(format!("scorer `{}` did not exit after BYE", self.command)));
                }
                None => thread::sleep(Duration::from_millis(10)),
            }
        }
    }
}

impl Drop for ScorerProcess {
    fn drop(&mut self) {
        if let Ok(None) = self.child.try_wait() {
            let _ = self.child.kill();
            let _ = self.child.wait();
        }
    }
}

fn protocol(message: &str, line: &str) -> Error {
    Error::Protocol {
        message: message.to_string(),
        line: line.to_string(),
    }
}

/// Scores the `sampled` frames of `video` through a scorer process.
pub fn score_video_protocol(
    video: &VideoRecord,
    sampled: &[usize],
    request_id: &str,
    scorer: &mut ScorerProcess,
) -> Result<Vec<FrameScore>> {
    let paths: Vec<PathBuf> = sampled.iter().map(|&i| video.frame_path(i)).collect();
    let scores = scorer.score_frames(request_id, &paths)?;
    Ok(sampled
        .iter()
        .zip(scores)
        .map(|(&frame_index, score)| FrameScore {
            video_id: video.id.clone(),
            frame_index,
            score,
        })
        .collect())
}

/// Mean magnitude of the 4-neighbour Laplacian of the BT.601 luma plane
/// over interior pixels.
pub fn laplacian_energy(frame: &FrameBuffer) -> Result<f64> {
    let (w, h) = (frame.width() as usize, frame.height() as usize);
    if w < 3 || h < 3 {
        return Err(Error::InvalidArgument(format!(
            "baseline scorer needs a frame of at least 3x3, got {w}x{h}"
        )));
    }
    let plane: Vec<f64> = frame
        .pixels()
        .chunks_exact(3)
        .map(|p| luma([p[0], p[1], p[2]]))
        .collect();
    let mut sum = 0.0;
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let c = y * w + x;
            let lap = 4.0 * plane[c] - plane[c - 1] - plane[c + 1] - plane[c - w] - plane[c + w];
            sum += lap.abs();
        }
    }
    Ok(sum / ((w - 2) * (h - 2)) as f64)
}

pub fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Reference detector: high-frequency energy squashed into [0, 1].
pub fn baseline_score_frame(frame: &FrameBuffer) -> Result<f64> {
    let g = laplacian_energy(frame)?;
    Ok(logistic((g - BASELINE_CENTER) / BASELINE_WIDTH))
}

/// One row of a score CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub op_id: String,
    pub video_id: String,
    pub frame_index: i64,
    pub score: f64,
}

#[derive(Debug, Deserialize)]
struct RawRow {
    op_id: String,
    video_id: String,
    frame_index: String,
    score: String,
}

pub fn read_score_rows(path: &Path) -> Result<Vec<ScoreRow>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.iter().collect::<Vec<_>>() != SCORE_CSV_HEADER {
        return Err(Error::ScoreRow {
            path: path.to_path_buf(),
            line: 1,
            message: format!("header must be `{}`", SCORE_CSV_HEADER.join(",")),
        });
    }
    let mut rows = Vec::new();
    for rec in rdr.deserialize::<RawRow>() {
        let raw = rec.map_err(|e| csv_error(path, e))?;
        rows.push(raw);
    }
    // line numbers: header is line 1, rows follow
    rows.into_iter()
        .enumerate()
        .map(|(i, raw)| {
            let line = i as u64 + 2;
            let bad = |message: String| Error::ScoreRow {
                path: path.to_path_buf(),
                line,
                message,
            };
            if raw.op_id.is_empty() || raw.video_id.is_empty() {
                return Err(bad("empty op_id or video_id".into()));
            }
            let frame_index: i64 = raw
                .frame_index
                .parse()
                .map_err(|_| bad(format!("bad frame_index {:?}", raw.frame_index)))?;
            if frame_index < AGGREGATED_INDEX {
                return Err(bad(format!("frame_index {frame_index} below -1")));
            }
            let score = parse_score(&raw.score).map_err(bad)?;
            Ok(ScoreRow {
                op_id: raw.op_id,
                video_id: raw.video_id,
                frame_index,
                score,
            })
        })
        .collect()
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        kind => Error::ScoreRow {
            path: path.to_path_buf(),
            line,
            message: format!("{kind:?}"),
        },
    }
}

/// Writes rows in canonical form: sorted by (op_id, video_id, frame_index),
/// scores in shortest round-trip notation.
pub fn write_score_rows(path: &Path, rows: &[ScoreRow]) -> Result<()> {
    let mut rows = rows.to_vec();
    rows.sort_by(|a, b| {
        (a.op_id.as_str(), a.video_id.as_str(), a.frame_index).cmp(&(
            b.op_id.as_str(),
            b.video_id.as_str(),
            b.frame_index,
        ))
    });
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(SCORE_CSV_HEADER).map_err(|e| csv_error(path, e))?;
    for r in &rows {
        w.write_record([
            r.op_id.as_str(),
            r.video_id.as_str(),
            &r.frame_index.to_string(),
            &format_score(r.score),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Shortest decimal that parses back to the same `f64`, never in
/// exponent form.
pub fn format_score(s: f64) -> String {
    let text = format!("{s:?}");
    let Some((mantissa, exp)) = text.split_once('e') else {
        return text;
    };
    let exp: i32 = exp.parse().expect("debug float exponent");
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => ("-", m),
        None => ("", mantissa),
    };
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    let point = mantissa.find('.').unwrap_or(mantissa.len()) as i32 + exp;
    if point <= 0 {
        format!("{sign}0.{}{digits}", "0".repeat((-point) as usize))
    } else if point as usize >= digits.len() {
        format!("{sign}{digits}{}.0", "0".repeat(point as usize - digits.len()))
    } else {
        let (int, frac) = digits.split_at(point as usize);
        format!("{sign}{int}.{frac}")
    }
}

enum Grouped {
    Frames(BTreeMap<i64, f64>),
    Aggregated(f64),
}

/// Rows grouped by op and video, checked for duplicates and mixed styles.
fn group_rows(rows: &[ScoreRow]) -> Result<BTreeMap<String, BTreeMap<String, Grouped>>> {
    let mut out: BTreeMap<String, BTreeMap<String, Grouped>> = BTreeMap::new();
    for r in rows {
        let slot = out.entry(r.op_id.clone()).or_default();
        let dup = || Error::DuplicateScore {
            op_id: r.op_id.clone(),
            video_id: r.video_id.clone(),
            frame_index: r.frame_index,
        };
        let mixed = || Error::MixedAggregation {
            op_id: r.op_id.clone(),
            video_id: r.video_id.clone(),
        };
        match (slot.get_mut(&r.video_id), r.frame_index) {
            (None, AGGREGATED_INDEX) => {
                slot.insert(r.video_id.clone(), Grouped::Aggregated(r.score));
            }
            (None, idx) => {
                slot.insert(r.video_id.clone(), Grouped::Frames(BTreeMap::from([(idx, r.score)])));
            }
            (Some(Grouped::Aggregated(_)), AGGREGATED_INDEX) => return Err(dup()),
            (Some(Grouped::Aggregated(_)), _) => return Err(mixed()),
            (Some(Grouped::Frames(_)), AGGREGATED_INDEX) => return Err(mixed()),
            (Some(Grouped::Frames(frames)), idx) => {
                if frames.insert(idx, r.score).is_some() {
                    return Err(dup());
                }
            }
        }
    }
    Ok(out)
}

/// Groups rows into one [`ScoreSet`] per op, aggregating per-frame rows by
/// their mean and taking labels from `manifest`.
pub fn score_sets_from_rows(
    rows: &[ScoreRow],
    manifest: &Manifest,
    provenance: Provenance,
) -> Result<BTreeMap<String, ScoreSet>> {
    let grouped = group_rows(rows)?;
    let mut sets = BTreeMap::new();
    for (op_id, videos) in grouped {
        let mut entries = Vec::with_capacity(videos.len());
        for (video_id, g) in videos {
            let label = manifest
                .get(&video_id)
                .ok_or_else(|| Error::UnknownVideoId(video_id.clone()))?
                .label;
            let score = match g {
                Grouped::Aggregated(s) => s,
                Grouped::Frames(frames) => aggregate_video_score(&frames.into_values().collect::<Vec<_>>())?,
            };
            entries.push(VideoScore {
                video_id,
                label,
                score,
            });
        }
        sets.insert(
            op_id.clone(),
            ScoreSet {
                op_id,
                entries,
                provenance,
            },
        );
    }
    Ok(sets)
}

/// Per-frame scores of one op as labeled data, for frame-level AUC.
/// Aggregated (-1) rows cannot be used at frame level.
pub fn frame_level_scores(rows: &[ScoreRow], op_id: &str, manifest: &Manifest) -> Result<LabeledScores> {
    let grouped = group_rows(rows)?;
    let videos = grouped
        .get(op_id)
        .ok_or_else(|| Error::MissingOps(op_id.to_string()))?;
    let mut pairs = Vec::new();
    for (video_id, g) in videos {
        let label = manifest
            .get(video_id)
            .ok_or_else(|| Error::UnknownVideoId(video_id.clone()))?
            .label;
        match g {
            Grouped::Frames(frames) => pairs.extend(frames.values().map(|&s| (s, label))),
            Grouped::Aggregated(_) => {
                return Err(Error::Scorer(format!(
                    "op {op_id}, video {video_id}: frame-level AUC needs per-frame rows, found an aggregated row"
                )))
            }
        }
    }
    LabeledScores::new(pairs)
}

pub fn ingest_scores_file(path: &Path, manifest: &Manifest) -> Result<BTreeMap<String, ScoreSet>> {
    let rows = read_score_rows(path)?;
    score_sets_from_rows(&rows, manifest, Provenance::File)
}
