// SPDX-License-Identifier: Apache-2.0

//! H.264 compression as a perturbation: frames are encoded by an external
//! tool at a given CRF and immediately decoded back to a PNG sequence.
//!
//! Command lines come from templates. A template is split into words with
//! shell quoting rules, then each placeholder is replaced by exact string
//! substitution inside each word, so paths with spaces stay one argument.
//! No shell is involved.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use wait_timeout::ChildExt;

use crate::dataset::{self, FrameBuffer, Fps, Label, Split, VideoRecord};
use crate::error::{Error, Result};
use crate::perturb::{commit_dir, prepare_out_dir};

/// Overrides the program (first word) of both templates.
pub const ENCODER_ENV: &str = "FORGEBENCH_ENCODER";

pub const ENCODE_PLACEHOLDERS: [&str; 4] = ["{input_pattern}", "{fps}", "{crf}", "{output_file}"];
pub const DECODE_PLACEHOLDERS: [&str; 2] = ["{input_file}", "{output_pattern}"];

pub const DEFAULT_ENCODE_TEMPLATE: &str = "ffmpeg -hide_banner -loglevel error -nostdin -y \
    -framerate {fps} -start_number 0 -i {input_pattern} \
    -c:v libx264 -preset medium -crf {crf} -pix_fmt yuv420p {output_file}";
pub const DEFAULT_DECODE_TEMPLATE: &str = "ffmpeg -hide_banner -loglevel error -nostdin -y \
    -i {input_file} -fps_mode passthrough -pix_fmt rgb24 -start_number 0 {output_pattern}";

const ENCODED_NAME: &str = "encoded.mp4";
const STDERR_LIMIT: usize = 4000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodecConfig {
    pub encode_template: String,
    pub decode_template: String,
    /// Per-subprocess limit in seconds.
    pub timeout: u64,
}

impl Default for CodecConfig {
    fn default() -> Self {
        Self {
            encode_template: squash(DEFAULT_ENCODE_TEMPLATE),
            decode_template: squash(DEFAULT_DECODE_TEMPLATE),
            timeout: 600,
        }
    }
}

fn squash(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

impl CodecConfig {
    /// Checks that each template parses and carries all of its placeholders.
    pub fn validate(&self) -> Result<()> {
        for (name, template, required) in [
            ("encode_template", &self.encode_template, &ENCODE_PLACEHOLDERS[..]),
            ("decode_template", &self.decode_template, &DECODE_PLACEHOLDERS[..]),
        ] {
            let words = shell_words::split(template)
                .map_err(|e| Error::CodecConfig(format!("{name}: {e}")))?;
            if words.is_empty() {
                return Err(Error::CodecConfig(format!("{name} is empty")));
            }
            let missing: Vec<&str> = required
                .iter()
                .copied()
                .filter(|p| !template.contains(p))
                .collect();
            if !missing.is_empty() {
                return Err(Error::CodecConfig(format!(
                    "{name} is missing placeholder(s) {}",
                    missing.join(" ")
                )));
            }
        }
        if self.timeout == 0 {
            return Err(Error::CodecConfig("timeout must be positive".into()));
        }
        Ok(())
    }

    /// Copy with the program word replaced by `$FORGEBENCH_ENCODER`, if set.
    pub fn with_env_override(&self) -> Result<Self> {
        match std::env::var(ENCODER_ENV) {
            Ok(tool) if !tool.trim().is_empty() => self.with_program(tool.trim()),
            _ => Ok(self.clone()),
        }
    }

    pub fn with_program(&self, program: &str) -> Result<Self> {
        let swap = |template: &str| -> Result<String> {
            let mut words =
                shell_words::split(template).map_err(|e| Error::CodecConfig(e.to_string()))?;
            if let Some(first) = words.first_mut() {
                *first = program.to_string();
            }
            Ok(shell_words::join(words))
        };
        Ok(Self {
            encode_template: swap(&self.encode_template)?,
            decode_template: swap(&self.decode_template)?,
            timeout: self.timeout,
        })
    }

    pub fn program(&self) -> Result<String> {
        shell_words::split(&self.encode_template)
            .map_err(|e| Error::CodecConfig(e.to_string()))?
            .into_iter()
            .next()
            .ok_or_else(|| Error::CodecConfig("encode_template is empty".into()))
    }

    pub fn encode_argv(&self, input_pattern: &Path, fps: &Fps, crf: u8, output_file: &Path) -> Result<Vec<String>> {
        if crf > 51 {
            return Err(Error::CodecConfig(format!("crf {crf} outside [0, 51]")));
        }
        expand(
            &self.encode_template,
            &[
                ("{input_pattern}", &input_pattern.to_string_lossy()),
                ("{fps}", fps.as_str()),
                ("{crf}", &crf.to_string()),
                ("{output_file}", &output_file.to_string_lossy()),
            ],
        )
    }

    pub fn decode_argv(&self, input_file: &Path, output_pattern: &Path) -> Result<Vec<String>> {
        expand(
            &self.decode_template,
            &[
                ("{input_file}", &input_file.to_string_lossy()),
                ("{output_pattern}", &output_pattern.to_string_lossy()),
            ],
        )
    }
}

fn expand(template: &str, values: &[(&str, &str)]) -> Result<Vec<String>> {
    let words = shell_words::split(template).map_err(|e| Error::CodecConfig(e.to_string()))?;
    if words.is_empty() {
        return Err(Error::CodecConfig("empty command template".into()));
    }
    Ok(words
        .into_iter()
        .map(|w| values.iter().fold(w, |acc, (k, v)| acc.replace(k, v)))
        .collect())
}

#[derive(Debug, Clone)]
pub struct ToolOutput {
    pub stdout: String,
    pub stderr: String,
}

/// Runs `argv` in `cwd`, killing it after `timeout`.
pub fn run_tool(argv: &[String], cwd: &Path, timeout: Duration) -> Result<ToolOutput> {
    let (program, args) = argv
        .split_first()
        .ok_or_else(|| Error::CodecConfig("empty command".into()))?;
    let command_line = shell_words::join(argv);
    let mut child = Command::new(program)
        .args(args)
        .current_dir(cwd)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound | std::io::ErrorKind::PermissionDenied => Error::ToolNotFound {
                command: program.clone(),
            },
            _ => Error::io(program, e),
        })?;

    let drain = |mut r: Box<dyn Read + Send>| {
        thread::spawn(move || {
            let mut buf = Vec::new();
            let _ = r.read_to_end(&mut buf);
            String::from_utf8_lossy(&buf).into_owned()
        })
    };
    let out_reader = drain(Box::new(child.stdout.take().expect("piped stdout")));
    let err_reader = drain(Box::new(child.stderr.take().expect("piped stderr")));

    let status = match child.wait_timeout(timeout).map_err(|e| Error::io(program, e))? {
        Some(status) => status,
        None => {
            let _ = child.kill();
            let _ = child.wait();
            return Err(Error::ToolTimeout {
                command: command_line,
                seconds: timeout.as_secs(),
            });
        }
    };
    let stdout = out_reader.join().unwrap_or_default();
    let stderr = err_reader.join().unwrap_or_default();
    if !status.success() {
        return Err(Error::ToolFailed {
            command: command_line,
            status: status.to_string(),
            stderr: tail(&stderr, STDERR_LIMIT),
        });
    }
    Ok(ToolOutput { stdout, stderr })
}

fn tail(s: &str, limit: usize) -> String {
    let s = s.trim();
    if s.len() <= limit {
        return s.to_string();
    }
    let mut start = s.len() - limit;
    while !s.is_char_boundary(start) {
        start += 1;
    }
    format!("...{}", &s[start..])
}

/// Encodes `video` at `crf` and decodes it back into `out_dir`.
pub fn compress_roundtrip(video: &VideoRecord, crf: u8, cfg: &CodecConfig, out_dir: &Path) -> Result<VideoRecord> {
    compress_roundtrip_logged(video, crf, cfg, out_dir, None)
}

/// As [`compress_roundtrip`], appending the tools' stderr to `log`.
pub fn compress_roundtrip_logged(
    video: &VideoRecord,
    crf: u8,
    cfg: &CodecConfig,
    out_dir: &Path,
    log: Option<&Path>,
) -> Result<VideoRecord> {
    cfg.validate()?;
    if crf > 51 {
        return Err(Error::CodecConfig(format!("crf {crf} outside [0, 51]")));
    }
    prepare_out_dir(out_dir, true)?;
    let parent = out_dir.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    let work = tempfile::Builder::new()
        .prefix(".codec-")
        .tempdir_in(parent)
        .map_err(|e| Error::io(parent, e))?;
    let staging = tempfile::Builder::new()
        .prefix(".staging-")
        .tempdir_in(parent)
        .map_err(|e| Error::io(parent, e))?;

    let source_dir = absolute(&video.frames_dir)?;
    let encoded = work.path().join(ENCODED_NAME);
    let timeout = Duration::from_secs(cfg.timeout);

    let enc = cfg.encode_argv(&source_dir.join("%06d.png"), &video.fps, crf, &encoded)?;
    let enc_out = run_tool(&enc, work.path(), timeout)?;
    let dec = cfg.decode_argv(&encoded, &staging.path().join("%06d.png"))?;
    let dec_out = run_tool(&dec, work.path(), timeout)?;

    if let Some(log) = log {
        append_log(log, &video.id, crf, &[(&enc, &enc_out), (&dec, &dec_out)])?;
    }

    let found = count_frames(staging.path())?;
    if found != video.n_frames {
        return Err(Error::FrameCountMismatch {
            video_id: video.id.clone(),
            expected: video.n_frames,
            found,
        });
    }
    for idx in 0..found {
        let path = dataset::frame_path(staging.path(), idx);
        let (w, h) = image::image_dimensions(&path).map_err(|e| Error::FrameDecode {
            path: path.clone(),
            message: e.to_string(),
        })?;
        if (w, h) != (video.width, video.height) {
            return Err(Error::DimensionMismatch {
                path,
                expected_w: video.width,
                expected_h: video.height,
                found_w: w,
                found_h: h,
            });
        }
    }

    commit_dir(staging, out_dir)?;
    Ok(VideoRecord {
        frames_dir: out_dir.to_path_buf(),
        ..video.clone()
    })
}

fn absolute(p: &Path) -> Result<PathBuf> {
    if p.is_absolute() {
        return Ok(p.to_path_buf());
    }
    std::env::current_dir()
        .map(|cwd| cwd.join(p))
        .map_err(|e| Error::io(p, e))
}

/// Counts `NNNNNN.png` files in `dir` and checks they are numbered
/// contiguously from zero.
fn count_frames(dir: &Path) -> Result<usize> {
    let mut indices = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let name = entry.map_err(|e| Error::io(dir, e))?.file_name();
        let name = name.to_string_lossy();
        if let Some(stem) = name.strip_suffix(".png") {
            if stem.len() == 6 && stem.bytes().all(|b| b.is_ascii_digit()) {
                indices.push(stem.parse::<usize>().expect("digits"));
            }
        }
    }
    indices.sort_unstable();
    Ok(indices
        .iter()
        .enumerate()
        .take_while(|(i, idx)| i == *idx)
        .count())
}

fn append_log(log: &Path, video_id: &str, crf: u8, runs: &[(&Vec<String>, &ToolOutput)]) -> Result<()> {
    let mut block = format!("== {video_id} crf={crf}\n");
    for (argv, out) in runs {
        block.push_str(&format!("$ {}\n", shell_words::join(argv.iter())));
        if !out.stderr.trim().is_empty() {
            block.push_str(out.stderr.trim_end());
            block.push('\n');
        }
    }
    let mut f = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(log)
        .map_err(|e| Error::io(log, e))?;
    f.write_all(block.as_bytes()).map_err(|e| Error::io(log, e))
}

/// Mean absolute per-channel difference between two equally sized frame
/// sequences.
pub fn mean_abs_error(a: &VideoRecord, b: &VideoRecord) -> Result<f64> {
    if a.n_frames != b.n_frames || a.width != b.width || a.height != b.height {
        return Err(Error::InvalidArgument(format!(
            "cannot compare {} ({}x{}x{}) with {} ({}x{}x{})",
            a.id, a.width, a.height, a.n_frames, b.id, b.width, b.height, b.n_frames
        )));
    }
    let mut total = 0u64;
    let mut count = 0u64;
    for idx in 0..a.n_frames {
        let fa = dataset::read_frame(a, idx)?;
        let fb = dataset::read_frame(b, idx)?;
        total += fa
            .pixels()
            .iter()
            .zip(fb.pixels())
            .map(|(&x, &y)| x.abs_diff(y) as u64)
            .sum::<u64>();
        count += fa.pixels().len() as u64;
    }
    Ok(total as f64 / count as f64)
}

#[derive(Debug, Clone, Serialize)]
pub struct CodecDiagnostic {
    pub program: String,
    pub version: String,
    pub frames: usize,
    pub crf: u8,
    pub mean_abs_error: f64,
}

impl CodecDiagnostic {
    pub fn summary(&self) -> String {
        format!(
            "ok: {} ({}), {}-frame round-trip at crf {} with mean abs error {:.3}",
            self.program, self.version, self.frames, self.crf, self.mean_abs_error
        )
    }
}

/// A 64x64 4-frame clip with texture and motion, used to probe the codec.
pub fn probe_clip(dir: &Path) -> Result<VideoRecord> {
    let (w, h, n) = (64u32, 64u32, 4usize);
    for t in 0..n {
        let frame = FrameBuffer::from_fn(w, h, |x, y| {
            let t = t as u32;
            let r = (x * 3 + t * 5) as u8;
            let g = (y * 3 + t * 2) as u8;
            let b = if (x / 8 + y / 8 + t).is_multiple_of(2) { 60 } else { 190 };
            [r, g, b]
        })?;
        dataset::write_frame(&frame, &dataset::frame_path(dir, t))?;
    }
    Ok(VideoRecord {
        id: "probe".into(),
        frames_dir: dir.to_path_buf(),
        n_frames: n,
        width: w,
        height: h,
        fps: Fps::parse("25")?,
        label: Label::Real,
        split: Split::Test,
    })
}

/// Runs the probe clip through encode and decode and reports the tool
/// version and measured distortion.
pub fn validate_codec(cfg: &CodecConfig) -> Result<CodecDiagnostic> {
    cfg.validate()?;
    let program = cfg.program()?;
    let tmp = tempfile::tempdir().map_err(|e| Error::io(std::env::temp_dir(), e))?;
    let version = tool_version(&program, tmp.path())?;
    let clip = probe_clip(&tmp.path().join("src"))?;
    let crf = crate::perturb::CRF_LIGHT;
    let out = compress_roundtrip(&clip, crf, cfg, &tmp.path().join("out"))?;
    let mean_abs_error = mean_abs_error(&clip, &out)?;
    Ok(CodecDiagnostic {
        program,
        version,
        frames: clip.n_frames,
        crf,
        mean_abs_error,
    })
}

/// First non-empty line of `<program> -version`.
pub fn tool_version(program: &str, cwd: &Path) -> Result<String> {
    let argv = vec![program.to_string(), "-version".to_string()];
    let out = match run_tool(&argv, cwd, Duration::from_secs(30)) {
        Ok(out) => out,
        Err(Error::ToolNotFound { command }) => return Err(Error::ToolNotFound { command }),
        Err(_) => return Ok("unknown".into()),
    };
    Ok(out
        .stdout
        .lines()
        .chain(out.stderr.lines())
        .map(str::trim)
        .find(|l| !l.is_empty())
        .unwrap_or("unknown")
        .to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_templates_are_valid() {
        CodecConfig::default().validate().unwrap();
        assert_eq!(CodecConfig::default().program().unwrap(), "ffmpeg");
    }

    #[test]
    fn missing_placeholder_is_rejected_before_running() {
        let cfg = CodecConfig {
            encode_template: "ffmpeg -i {input_pattern} -r {fps} {output_file}".into(),
            ..CodecConfig::default()
        };
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("{crf}"), "{err}");
        assert!(matches!(validate_codec(&cfg), Err(Error::CodecConfig(_))));
    }

    #[test]
    fn expansion_keeps_paths_with_spaces_whole() {
        let cfg = CodecConfig::default();
        let argv = cfg
            .encode_argv(
                Path::new("/tmp/my frames/%06d.png"),
                &Fps::parse("30000/1001").unwrap(),
                40,
                Path::new("/tmp/out dir/x.mp4"),
            )
            .unwrap();
        assert!(argv.contains(&"/tmp/my frames/%06d.png".to_string()));
        assert!(argv.contains(&"30000/1001".to_string()));
        assert!(argv.contains(&"40".to_string()));
        assert_eq!(argv.last().unwrap(), "/tmp/out dir/x.mp4");
        assert!(cfg
            .encode_argv(Path::new("a"), &Fps::parse("25").unwrap(), 52, Path::new("b"))
            .is_err());
    }

    #[test]
    fn program_override_replaces_first_word() {
        let cfg = CodecConfig::default().with_program("/opt/ff mpeg/bin/ffmpeg").unwrap();
        assert_eq!(cfg.program().unwrap(), "/opt/ff mpeg/bin/ffmpeg");
        cfg.validate().unwrap();
        assert!(cfg.decode_template.starts_with("'/opt/ff mpeg/bin/ffmpeg'"));
    }

    #[test]
    fn missing_binary_names_the_command() {
        let tmp = tempfile::tempdir().unwrap();
        let argv = vec!["forgebench-no-such-encoder".to_string(), "-version".to_string()];
        match run_tool(&argv, tmp.path(), Duration::from_secs(5)) {
            Err(Error::ToolNotFound { command }) => assert_eq!(command, "forgebench-no-such-encoder"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn failing_tool_surfaces_stderr() {
        let tmp = tempfile::tempdir().unwrap();
        let argv: Vec<String> = ["sh", "-c", "echo boom >&2; exit 3"].map(String::from).to_vec();
        match run_tool(&argv, tmp.path(), Duration::from_secs(5)) {
            Err(Error::ToolFailed { stderr, .. }) => assert_eq!(stderr, "boom"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn slow_tool_times_out() {
        let tmp = tempfile::tempdir().unwrap();
        let argv: Vec<String> = ["sleep", "5"].map(String::from).to_vec();
        assert!(matches!(
            run_tool(&argv, tmp.path(), Duration::from_millis(200)),
            Err(Error::ToolTimeout { .. })
        ));
    }

    #[test]
    fn frame_count_requires_contiguous_names() {
        let tmp = tempfile::tempdir().unwrap();
        for name in ["000000.png", "000001.png", "000003.png", "notes.txt"] {
            fs::write(tmp.path().join(name), b"").unwrap();
        }
        assert_eq!(count_frames(tmp.path()).unwrap(), 2);
    }
}
