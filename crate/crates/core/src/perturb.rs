// SPDX-License-Identifier: Apache-2.0

//! The twelve video processing operations, grouped into eight categories.
//!
//! Pixel operators are pure functions on [`FrameBuffer`]s. All of them
//! round half away from zero and clamp to `[0, 255]` after rounding.
//! Compression (`c23`, `c40`) is not a pixel transform and is handed to
//! [`crate::codec`].

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::{self, CodecConfig};
use crate::dataset::{self, FrameBuffer, VideoRecord};
use crate::error::{Error, Result};
use crate::rng::{derive_frame_seed, NormalStream};

pub const BRIGHTNESS_DELTA: i32 = 38;
pub const CONTRAST_SCALE: f64 = 1.3;
pub const NOISE_SIGMA: f64 = 15.0;
pub const CRF_LIGHT: u8 = 23;
pub const CRF_HEAVY: u8 = 40;

const LUMA: [f64; 3] = [0.299, 0.587, 0.114];
const SEPIA: [[f64; 3]; 3] = [
    [0.393, 0.769, 0.189],
    [0.349, 0.686, 0.168],
    [0.272, 0.534, 0.131],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    Compression,
    Brightness,
    Contrast,
    GaussianNoise,
    Flipping,
    Resolution,
    Grayscale,
    VintageFilter,
}

impl Category {
    /// Report column order.
    pub const ALL: [Category; 8] = [
        Category::Compression,
        Category::Brightness,
        Category::Contrast,
        Category::GaussianNoise,
        Category::Flipping,
        Category::Resolution,
        Category::Grayscale,
        Category::VintageFilter,
    ];

    /// Machine name used in CSV output.
    pub fn id(self) -> &'static str {
        match self {
            Category::Compression => "Compression",
            Category::Brightness => "Brightness",
            Category::Contrast => "Contrast",
            Category::GaussianNoise => "GaussianNoise",
            Category::Flipping => "Flipping",
            Category::Resolution => "Resolution",
            Category::Grayscale => "Grayscale",
            Category::VintageFilter => "VintageFilter",
        }
    }

    /// Header text used in Markdown tables.
    pub fn title(self) -> &'static str {
        match self {
            Category::GaussianNoise => "Gaussian Noise",
            Category::VintageFilter => "Vintage Filter",
            other => other.id(),
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OpId {
    C23,
    C40,
    BrightUp,
    BrightDown,
    Contrast,
    Noise,
    FlipH,
    FlipV,
    ResX2,
    ResX4,
    Grayscale,
    Vintage,
}

impl OpId {
    /// Canonical order, which is also the report column order.
    pub const ALL: [OpId; 12] = [
        OpId::C23,
        OpId::C40,
        OpId::BrightUp,
        OpId::BrightDown,
        OpId::Contrast,
        OpId::Noise,
        OpId::FlipH,
        OpId::FlipV,
        OpId::ResX2,
        OpId::ResX4,
        OpId::Grayscale,
        OpId::Vintage,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OpId::C23 => "c23",
            OpId::C40 => "c40",
            OpId::BrightUp => "bright_up",
            OpId::BrightDown => "bright_down",
            OpId::Contrast => "contrast",
            OpId::Noise => "noise",
            OpId::FlipH => "flip_h",
            OpId::FlipV => "flip_v",
            OpId::ResX2 => "res_x2",
            OpId::ResX4 => "res_x4",
            OpId::Grayscale => "grayscale",
            OpId::Vintage => "vintage",
        }
    }

    pub fn category(self) -> Category {
        match self {
            OpId::C23 | OpId::C40 => Category::Compression,
            OpId::BrightUp | OpId::BrightDown => Category::Brightness,
            OpId::Contrast => Category::Contrast,
            OpId::Noise => Category::GaussianNoise,
            OpId::FlipH | OpId::FlipV => Category::Flipping,
            OpId::ResX2 | OpId::ResX4 => Category::Resolution,
            OpId::Grayscale => Category::Grayscale,
            OpId::Vintage => Category::VintageFilter,
        }
    }

    /// Sub-column header under the category in Markdown tables.
    pub fn column_title(self) -> &'static str {
        match self {
            OpId::C23 => "C23",
            OpId::C40 => "C40",
            OpId::BrightUp => "Increase",
            OpId::BrightDown => "Decrease",
            OpId::Contrast => "Contrast",
            OpId::Noise => "Gaussian Noise",
            OpId::FlipH => "Horizontal",
            OpId::FlipV => "Vertical",
            OpId::ResX2 => "x2",
            OpId::ResX4 => "x4",
            OpId::Grayscale => "Grayscale",
            OpId::Vintage => "Vintage Filter",
        }
    }

    pub fn is_seeded(self) -> bool {
        self == OpId::Noise
    }

    pub fn is_codec(self) -> bool {
        matches!(self, OpId::C23 | OpId::C40)
    }

    /// Position in [`OpId::ALL`].
    pub fn rank(self) -> usize {
        OpId::ALL.iter().position(|&o| o == self).expect("op in ALL")
    }
}

impl fmt::Display for OpId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OpId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OpId::ALL
            .into_iter()
            .find(|o| o.as_str() == s)
            .ok_or_else(|| Error::InvalidSpec(format!("unknown op id {s:?}")))
    }
}

impl Serialize for OpId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for OpId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Parses a comma-separated list such as `flip_h,flip_v`.
pub fn parse_op_list(list: &str) -> Result<Vec<OpId>> {
    let ops = list
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(OpId::from_str)
        .collect::<Result<Vec<_>>>()?;
    if ops.is_empty() {
        return Err(Error::InvalidSpec("empty op list".into()));
    }
    Ok(ops)
}

/// One operation instance with its numeric parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    pub op_id: OpId,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl PerturbationSpec {
    /// The op with its default parameters.
    pub fn canonical(op_id: OpId) -> Self {
        let params: &[(&str, f64)] = match op_id {
            OpId::C23 => &[("crf", CRF_LIGHT as f64)],
            OpId::C40 => &[("crf", CRF_HEAVY as f64)],
            OpId::BrightUp => &[("delta", BRIGHTNESS_DELTA as f64)],
            OpId::BrightDown => &[("delta", -BRIGHTNESS_DELTA as f64)],
            OpId::Contrast => &[("scale", CONTRAST_SCALE)],
            OpId::Noise => &[("sigma", NOISE_SIGMA)],
            OpId::ResX2 => &[("factor", 2.0)],
            OpId::ResX4 => &[("factor", 4.0)],
            OpId::FlipH | OpId::FlipV | OpId::Grayscale | OpId::Vintage => &[],
        };
        Self {
            op_id,
            params: params.iter().map(|&(k, v)| (k.to_string(), v)).collect(),
        }
    }

    pub fn all_canonical() -> Vec<Self> {
        OpId::ALL.into_iter().map(Self::canonical).collect()
    }

    pub fn category(&self) -> Category {
        self.op_id.category()
    }

    pub fn seeded(&self) -> bool {
        self.op_id.is_seeded()
    }

    /// Fills in defaults for absent parameters and checks ranges.
    pub fn normalized(&self) -> Result<Self> {
        let canon = Self::canonical(self.op_id);
        for key in self.params.keys() {
            if !canon.params.contains_key(key) {
                return Err(Error::InvalidSpec(format!(
                    "{}: unknown parameter {key:?}",
                    self.op_id
                )));
            }
        }
        let mut params = canon.params;
        params.extend(self.params.iter().map(|(k, v)| (k.clone(), *v)));
        let spec = Self {
            op_id: self.op_id,
            params,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn param(&self, key: &str) -> Result<f64> {
        let v = self
            .params
            .get(key)
            .copied()
            .or_else(|| Self::canonical(self.op_id).params.get(key).copied())
            .ok_or_else(|| Error::InvalidSpec(format!("{}: missing parameter {key:?}", self.op_id)))?;
        if !v.is_finite() {
            return Err(Error::InvalidSpec(format!("{}: {key} must be finite", self.op_id)));
        }
        Ok(v)
    }

    fn integer_param(&self, key: &str) -> Result<i64> {
        let v = self.param(key)?;
        if v.fract() != 0.0 {
            return Err(Error::InvalidSpec(format!("{}: {key} must be an integer, got {v}", self.op_id)));
        }
        Ok(v as i64)
    }

    pub fn delta(&self) -> Result<i32> {
        let d = self.integer_param("delta")?;
        if !(-255..=255).contains(&d) {
            return Err(Error::InvalidSpec(format!("{}: delta {d} outside [-255, 255]", self.op_id)));
        }
        Ok(d as i32)
    }

    pub fn scale(&self) -> Result<f64> {
        let s = self.param("scale")?;
        if !(s > 0.0 && s <= 10.0) {
            return Err(Error::InvalidSpec(format!("{}: scale {s} outside (0, 10]", self.op_id)));
        }
        Ok(s)
    }

    pub fn sigma(&self) -> Result<f64> {
        let s = self.param("sigma")?;
        if s < 0.0 {
            return Err(Error::InvalidSpec(format!("{}: sigma must be >= 0, got {s}", self.op_id)));
        }
        Ok(s)
    }

    pub fn factor(&self) -> Result<u32> {
        let f = self.integer_param("factor")?;
        if f != 2 && f != 4 {
            return Err(Error::InvalidSpec(format!("{}: factor must be 2 or 4, got {f}", self.op_id)));
        }
        Ok(f as u32)
    }

    pub fn crf(&self) -> Result<u8> {
        let c = self.integer_param("crf")?;
        if !(0..=51).contains(&c) {
            return Err(Error::InvalidSpec(format!("{}: crf {c} outside [0, 51]", self.op_id)));
        }
        Ok(c as u8)
    }

    pub fn validate(&self) -> Result<()> {
        match self.op_id {
            OpId::C23 | OpId::C40 => self.crf().map(drop),
            OpId::BrightUp | OpId::BrightDown => self.delta().map(drop),
            OpId::Contrast => self.scale().map(drop),
            OpId::Noise => self.sigma().map(drop),
            OpId::ResX2 | OpId::ResX4 => self.factor().map(drop),
            OpId::FlipH | OpId::FlipV | OpId::Grayscale | OpId::Vintage => Ok(()),
        }
    }

    /// `key=value` pairs in key order, e.g. `delta=38`.
    pub fn params_string(&self) -> String {
        self.params
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(",")
    }
}

#[inline]
fn round_clamp(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

pub fn flip_horizontal(frame: &FrameBuffer) -> FrameBuffer {
    let (w, h) = (frame.width(), frame.height());
    FrameBuffer::from_fn(w, h, |x, y| frame.pixel(w - 1 - x, y)).expect("same dimensions")
}

pub fn flip_vertical(frame: &FrameBuffer) -> FrameBuffer {
    let (w, h) = (frame.width(), frame.height());
    let row = w as usize * 3;
    let src = frame.pixels();
    let mut pixels = Vec::with_capacity(src.len());
    for y in (0..h as usize).rev() {
        pixels.extend_from_slice(&src[y * row..(y + 1) * row]);
    }
    FrameBuffer::new(w, h, pixels).expect("same dimensions")
}

pub fn adjust_brightness(frame: &FrameBuffer, delta: i32) -> Result<FrameBuffer> {
    if !(-255..=255).contains(&delta) {
        return Err(Error::InvalidSpec(format!("brightness delta {delta} outside [-255, 255]")));
    }
    Ok(frame.map_channels(|v| (v as i32 + delta).clamp(0, 255) as u8))
}

pub fn adjust_contrast(frame: &FrameBuffer, scale: f64) -> Result<FrameBuffer> {
    if !(scale > 0.0 && scale <= 10.0) {
        return Err(Error::InvalidSpec(format!("contrast scale {scale} outside (0, 10]")));
    }
    let lut: Vec<u8> = (0..=255u8)
        .map(|v| round_clamp(scale * (v as f64 - 128.0) + 128.0))
        .collect();
    Ok(frame.map_channels(|v| lut[v as usize]))
}

/// BT.601 luma before rounding.
#[inline]
pub fn luma(rgb: [u8; 3]) -> f64 {
    LUMA[0] * rgb[0] as f64 + LUMA[1] * rgb[1] as f64 + LUMA[2] * rgb[2] as f64
}

pub fn to_grayscale(frame: &FrameBuffer) -> FrameBuffer {
    frame.map_pixels(|px| {
        let y = round_clamp(luma(px));
        [y, y, y]
    })
}

/// Sepia tone.
pub fn vintage(frame: &FrameBuffer) -> FrameBuffer {
    frame.map_pixels(|[r, g, b]| {
        let (r, g, b) = (r as f64, g as f64, b as f64);
        SEPIA.map(|row| round_clamp(row[0] * r + row[1] * g + row[2] * b))
    })
}

/// Adds i.i.d. N(0, sigma^2) noise to every channel, pixels row-major,
/// channels in R, G, B order, all drawn from one stream seeded by `seed`.
pub fn gaussian_noise(frame: &FrameBuffer, sigma: f64, seed: u64) -> Result<FrameBuffer> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidSpec(format!("noise sigma must be finite and >= 0, got {sigma}")));
    }
    let mut normals = NormalStream::new(seed);
    Ok(frame.map_channels(|v| round_clamp(v as f64 + sigma * normals.next_normal())))
}

/// Box-filter reduction by `factor`; trailing rows and columns that do not
/// fill a whole block are dropped.
pub fn downscale(frame: &FrameBuffer, factor: u32) -> Result<FrameBuffer> {
    if factor != 2 && factor != 4 {
        return Err(Error::InvalidSpec(format!("downscale factor must be 2 or 4, got {factor}")));
    }
    let (w, h) = (frame.width(), frame.height());
    if w < factor || h < factor {
        return Err(Error::InvalidArgument(format!(
            "frame {w}x{h} is smaller than downscale factor {factor}"
        )));
    }
    let (ow, oh) = (w / factor, h / factor);
    let area = (factor * factor) as f64;
    FrameBuffer::from_fn(ow, oh, |ox, oy| {
        let mut sums = [0u32; 3];
        for dy in 0..factor {
            for dx in 0..factor {
                let px = frame.pixel(ox * factor + dx, oy * factor + dy);
                for c in 0..3 {
                    sums[c] += px[c] as u32;
                }
            }
        }
        sums.map(|s| round_clamp(s as f64 / area))
    })
}

/// Applies a pixel-level spec to one frame. `seed` is only read by noise.
pub fn apply_to_frame(spec: &PerturbationSpec, frame: &FrameBuffer, seed: u64) -> Result<FrameBuffer> {
    match spec.op_id {
        OpId::FlipH => Ok(flip_horizontal(frame)),
        OpId::FlipV => Ok(flip_vertical(frame)),
        OpId::BrightUp | OpId::BrightDown => adjust_brightness(frame, spec.delta()?),
        OpId::Contrast => adjust_contrast(frame, spec.scale()?),
        OpId::Grayscale => Ok(to_grayscale(frame)),
        OpId::Vintage => Ok(vintage(frame)),
        OpId::Noise => gaussian_noise(frame, spec.sigma()?, seed),
        OpId::ResX2 | OpId::ResX4 => downscale(frame, spec.factor()?),
        OpId::C23 | OpId::C40 => Err(Error::InvalidSpec(format!(
            "{} is a codec operation and has no per-frame form",
            spec.op_id
        ))),
    }
}

/// Output dimensions of `spec` applied to a `width`x`height` video.
pub fn output_dims(spec: &PerturbationSpec, width: u32, height: u32) -> Result<(u32, u32)> {
    match spec.op_id {
        OpId::ResX2 | OpId::ResX4 => {
            let f = spec.factor()?;
            if width < f || height < f {
                return Err(Error::InvalidArgument(format!(
                    "video {width}x{height} is smaller than downscale factor {f}"
                )));
            }
            Ok((width / f, height / f))
        }
        _ => Ok((width, height)),
    }
}

pub struct ApplyOptions<'a> {
    pub codec: &'a CodecConfig,
    /// Replace an existing non-empty output directory.
    pub force: bool,
}

/// Transforms every frame of `video` into `out_dir`.
///
/// Frames are written to a private sibling directory which is renamed onto
/// `out_dir` once complete, so an interrupted run never leaves a partial
/// copy under the final name.
pub fn apply_operation(
    video: &VideoRecord,
    spec: &PerturbationSpec,
    global_seed: u64,
    out_dir: &Path,
    opts: &ApplyOptions<'_>,
) -> Result<VideoRecord> {
    spec.validate()?;
    if same_dir(out_dir, &video.frames_dir) {
        return Err(Error::InvalidArgument(format!(
            "output directory {} is the source frames directory",
            out_dir.display()
        )));
    }
    prepare_out_dir(out_dir, opts.force)?;

    if spec.op_id.is_codec() {
        return codec::compress_roundtrip(video, spec.crf()?, opts.codec, out_dir);
    }

    let (width, height) = output_dims(spec, video.width, video.height)?;
    let parent = out_dir.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    let staging = tempfile::Builder::new()
        .prefix(".staging-")
        .tempdir_in(parent)
        .map_err(|e| Error::io(parent, e))?;

    let op_name = spec.op_id.as_str();
    (0..video.n_frames).into_par_iter().try_for_each(|idx| -> Result<()> {
        let frame = dataset::read_frame(video, idx)?;
        let seed = derive_frame_seed(global_seed, &video.id, op_name, idx as u64);
        let out = apply_to_frame(spec, &frame, seed)?;
        dataset::write_frame(&out, &dataset::frame_path(staging.path(), idx))
    })?;

    commit_dir(staging, out_dir)?;
    Ok(VideoRecord {
        frames_dir: out_dir.to_path_buf(),
        width,
        height,
        ..video.clone()
    })
}

fn same_dir(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(a), Ok(b)) => a == b,
        _ => a == b,
    }
}

pub(crate) fn prepare_out_dir(out_dir: &Path, force: bool) -> Result<()> {
    match fs::read_dir(out_dir) {
        Ok(mut entries) => {
            if entries.next().is_some() && !force {
                return Err(Error::OutputExists(out_dir.to_path_buf()));
            }
            fs::remove_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(()),
        Err(e) => Err(Error::io(out_dir, e)),
    }
}

/// Moves a finished staging directory into place at `out_dir`.
pub(crate) fn commit_dir(staging: tempfile::TempDir, out_dir: &Path) -> Result<()> {
    let path = staging.keep();
    fs::rename(&path, out_dir).map_err(|e| {
        let _ = fs::remove_dir_all(&path);
        Error::io(out_dir, e)
    })
}
