// SPDX-License-Identifier: Apache-2.0

//! Dataset layout: JSON-lines manifests, lossless PNG frame sequences and
//! the deterministic frame-sampling rule.
//!
//! A manifest line looks like
//!
//! ```text
//! {"id":"v001","frames_dir":"frames/v001","n_frames":300,"width":1280,"height":720,"fps":"30000/1001","label":"fake","split":"test"}
//! ```
//!
//! Relative `frames_dir` values are resolved against the directory holding
//! the manifest. Frames are named `<index:06>.png`.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Frames sampled per video at scoring time.
pub const DEFAULT_SAMPLE_K: usize = 32;

/// One decoded frame as interleaved 8-bit RGB, row-major.
#[derive(Clone, PartialEq, Eq)]
pub struct FrameBuffer {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl fmt::Debug for FrameBuffer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FrameBuffer")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl FrameBuffer {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument(format!(
                "frame dimensions must be positive, got {width}x{height}"
            )));
        }
        let expected = width as usize * height as usize * 3;
        if pixels.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "frame {width}x{height} needs {expected} bytes, got {}",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// A frame where every pixel is `rgb`.
    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Result<Self> {
        let n = width as usize * height as usize;
        let mut pixels = Vec::with_capacity(n * 3);
        for _ in 0..n {
            pixels.extend_from_slice(&rgb);
        }
        Self::new(width, height, pixels)
    }

    /// Builds a frame by evaluating `f(x, y)` for every pixel.
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> [u8; 3]) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width as usize * height as usize * 3);
        for y in 0..height {
            for x in 0..width {
                pixels.extend_from_slice(&f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = self.offset(x, y);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set_pixel(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = self.offset(x, y);
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    /// Same dimensions, each channel byte mapped through `f`.
    pub fn map_channels(&self, mut f: impl FnMut(u8) -> u8) -> FrameBuffer {
        FrameBuffer {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Same dimensions, each pixel mapped through `f`.
    pub fn map_pixels(&self, mut f: impl FnMut([u8; 3]) -> [u8; 3]) -> FrameBuffer {
        let mut pixels = Vec::with_capacity(self.pixels.len());
        for px in self.pixels.chunks_exact(3) {
            pixels.extend_from_slice(&f([px[0], px[1], px[2]]));
        }
        FrameBuffer {
            width: self.width,
            height: self.height,
            pixels,
        }
    }

    #[inline]
    fn offset(&self, x: u32, y: u32) -> usize {
        debug_assert!(x < self.width && y < self.height);
        (y as usize * self.width as usize + x as usize) * 3
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Real,
    Fake,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Real => "real",
            Label::Fake => "fake",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// Frame rate. Accepts a JSON number, a decimal string or a `num/den`
/// rational string such as `"30000/1001"`; the original text is kept so
/// rewritten manifests and encoder command lines carry it unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct Fps {
    value: f64,
    text: String,
}

impl Fps {
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        let value = match text.split_once('/') {
            Some((num, den)) => {
                let num: f64 = parse_plain_decimal(num.trim())
                    .ok_or_else(|| Error::InvalidArgument(format!("bad fps {text:?}")))?;
                let den: f64 = parse_plain_decimal(den.trim())
                    .ok_or_else(|| Error::InvalidArgument(format!("bad fps {text:?}")))?;
                num / den
            }
            None => parse_plain_decimal(text)
                .ok_or_else(|| Error::InvalidArgument(format!("bad fps {text:?}")))?,
        };
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::InvalidArgument(format!("fps must be positive, got {text:?}")));
        }
        Ok(Self {
            value,
            text: text.to_string(),
        })
    }

    pub fn from_f64(value: f64) -> Result<Self> {
        Self::parse(&value.to_string())
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    /// The fps as written in the manifest.
    pub fn as_str(&self) -> &str {
        &self.text
    }
}

fn parse_plain_decimal(s: &str) -> Option<f64> {
    let ok = !s.is_empty()
        && s.chars().all(|c| c.is_ascii_digit() || c == '.')
        && s.chars().filter(|&c| c == '.').count() <= 1
        && s.chars().any(|c| c.is_ascii_digit());
    if ok {
        s.parse().ok()
    } else {
        None
    }
}

impl Serialize for Fps {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self.text.parse::<f64>() {
            // plain decimals go back out as numbers, rationals as strings
            Ok(v) if !self.text.contains('/') && v.to_string() == self.text => {
                serializer.serialize_f64(v)
            }
            _ => serializer.serialize_str(&self.text),
        }
    }
}

impl<'de> Deserialize<'de> for Fps {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        let fps = match Raw::deserialize(deserializer)? {
            Raw::Num(v) => Fps::from_f64(v),
            Raw::Text(s) => Fps::parse(&s),
        };
        fps.map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VideoRecord {
    pub id: String,
    pub frames_dir: PathBuf,
    pub n_frames: usize,
    pub width: u32,
    pub height: u32,
    pub fps: Fps,
    pub label: Label,
    pub split: Split,
}

impl VideoRecord {
    pub fn frame_path(&self, index: usize) -> PathBuf {
        frame_path(&self.frames_dir, index)
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.id.is_empty() {
            return Err("empty video id".into());
        }
        if self.id.contains(['/', '\\']) || self.id.chars().any(char::is_whitespace) {
            return Err(format!("video id {:?} contains path separators or whitespace", self.id));
        }
        if self.n_frames == 0 {
            return Err(format!("video {}: n_frames must be >= 1", self.id));
        }
        if self.width == 0 || self.height == 0 {
            return Err(format!("video {}: width and height must be positive", self.id));
        }
        Ok(())
    }
}

/// `<dir>/<index:06>.png`
pub fn frame_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("{index:06}.png"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub dataset_name: String,
    pub videos: Vec<VideoRecord>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Check that every frame file named by each record exists.
    pub verify_frames: bool,
}

impl Manifest {
    pub fn test_videos(&self) -> impl Iterator<Item = &VideoRecord> {
        self.videos.iter().filter(|v| v.split == Split::Test)
    }

    pub fn get(&self, id: &str) -> Option<&VideoRecord> {
        self.videos.iter().find(|v| v.id == id)
    }

    /// The test split must hold at least one real and one fake video,
    /// otherwise no AUC can be computed from it.
    pub fn check_evaluable(&self) -> Result<()> {
        let (mut n_real, mut n_fake) = (0, 0);
        for v in self.test_videos() {
            match v.label {
                Label::Real => n_real += 1,
                Label::Fake => n_fake += 1,
            }
        }
        if n_real == 0 || n_fake == 0 {
            return Err(Error::DegenerateLabels {
                context: Some(format!("test split of {}", self.dataset_name)),
                n_real,
                n_fake,
            });
        }
        Ok(())
    }
}

pub fn load_manifest(path: &Path) -> Result<Manifest> {
    load_manifest_with(path, LoadOptions::default())
}

pub fn load_manifest_with(path: &Path, opts: LoadOptions) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut videos = Vec::new();
    let mut seen = HashSet::new();

    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut rec: VideoRecord = serde_json::from_str(line).map_err(|e| Error::ManifestLine {
            path: path.to_path_buf(),
            line: line_no,
            message: e.to_string(),
        })?;
        rec.validate().map_err(|message| Error::ManifestLine {
            path: path.to_path_buf(),
            line: line_no,
            message,
        })?;
        if !seen.insert(rec.id.clone()) {
            return Err(Error::DuplicateVideoId {
                path: path.to_path_buf(),
                id: rec.id,
                line: line_no,
            });
        }
        if rec.frames_dir.is_relative() {
            rec.frames_dir = base.join(&rec.frames_dir);
        }
        if opts.verify_frames {
            for idx in 0..rec.n_frames {
                let p = rec.frame_path(idx);
                if !p.is_file() {
                    return Err(Error::MissingFrame {
                        video_id: rec.id.clone(),
                        path: p,
                    });
                }
            }
        }
        videos.push(rec);
    }

    if videos.is_empty() {
        return Err(Error::EmptyManifest {
            path: path.to_path_buf(),
        });
    }
    let dataset_name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    Ok(Manifest {
        dataset_name,
        videos,
    })
}

/// Writes `videos` as JSON lines. `frames_dir` entries under the manifest's
/// directory are written relative to it so the tree can be moved as a whole.
pub fn write_manifest(path: &Path, videos: &[VideoRecord]) -> Result<()> {
    let base = path.parent().unwrap_or(Path::new(""));
    if !base.as_os_str().is_empty() {
        fs::create_dir_all(base).map_err(|e| Error::io(base, e))?;
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for v in videos {
        let mut rec = v.clone();
        if let Ok(rel) = rec.frames_dir.strip_prefix(base) {
            rec.frames_dir = rel.to_path_buf();
        }
        let line = serde_json::to_string(&rec).map_err(|e| Error::Report(e.to_string()))?;
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Uniform-stride frame selection: `floor(i * n_frames / k)` for
/// `i in 0..k`, or every frame when `k >= n_frames`.
pub fn sample_frame_indices(n_frames: usize, k: usize) -> Result<Vec<usize>> {
    if n_frames == 0 || k == 0 {
        return Err(Error::InvalidArgument(format!(
            "sample_frame_indices needs n_frames >= 1 and k >= 1 (got n_frames={n_frames}, k={k})"
        )));
    }
    if k >= n_frames {
        return Ok((0..n_frames).collect());
    }
    let (n, k) = (n_frames as u128, k as u128);
    Ok((0..k).map(|i| (i * n / k) as usize).collect())
}

/// Decodes frame `index` of `video`, checking it against the record's
/// dimensions.
pub fn read_frame(video: &VideoRecord, index: usize) -> Result<FrameBuffer> {
    if index >= video.n_frames {
        return Err(Error::FrameOutOfRange {
            video_id: video.id.clone(),
            index,
            n_frames: video.n_frames,
        });
    }
    let path = video.frame_path(index);
    if !path.exists() {
        return Err(Error::MissingFrame {
            video_id: video.id.clone(),
            path,
        });
    }
    let frame = read_frame_file(&path)?;
    if frame.width != video.width || frame.height != video.height {
        return Err(Error::DimensionMismatch {
            path,
            expected_w: video.width,
            expected_h: video.height,
            found_w: frame.width,
            found_h: frame.height,
        });
    }
    Ok(frame)
}

/// Decodes an 8-bit RGB image file. Other bit depths and channel layouts
/// are rejected rather than converted.
pub fn read_frame_file(path: &Path) -> Result<FrameBuffer> {
    use image::ColorType;

    let decode_err = |message: String| Error::FrameDecode {
        path: path.to_path_buf(),
        message,
    };
    let img = image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|e| decode_err(e.to_string()))?;
    match img.color() {
        ColorType::Rgb8 => {}
        ColorType::Rgb16 | ColorType::Rgba16 | ColorType::L16 | ColorType::La16 | ColorType::Rgb32F | ColorType::Rgba32F => {
            return Err(decode_err(format!("bit depth must be 8, image is {:?}", img.color())));
        }
        other => return Err(decode_err(format!("expected 8-bit RGB, image is {other:?}"))),
    }
    let rgb = img.into_rgb8();
    let (w, h) = rgb.dimensions();
    FrameBuffer::new(w, h, rgb.into_raw())
}

/// Writes `frame` as a lossless 8-bit RGB PNG, creating parent directories.
pub fn write_frame(frame: &FrameBuffer, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let encoder = image::codecs::png::PngEncoder::new(BufWriter::new(file));
    use image::ImageEncoder;
    encoder
        .write_image(&frame.pixels, frame.width, frame.height, image::ExtendedColorType::Rgb8)
        .map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::FrameDecode {
                path: path.to_path_buf(),
                message: other.to_string(),
            },
        })
}
