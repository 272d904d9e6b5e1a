// SPDX-License-Identifier: Apache-2.0

//! Synthetic installation-check dataset.
//!
//! Real videos are smooth moving colour gradients. Fake videos are the
//! same kind of gradient with a low-amplitude one-pixel checkerboard patch
//! planted in one quadrant, which the baseline scorer's Laplacian
//! statistic picks up.

use std::fs;
use std::path::{Path, PathBuf};

use crate::dataset::{self, FrameBuffer, Fps, Label, Split, VideoRecord};
use crate::error::{Error, Result};
use crate::rng::{fnv1a64, splitmix64, Xoshiro256pp};

pub const PATCH_AMPLITUDE: i32 = 24;

#[derive(Debug, Clone)]
pub struct FixtureOptions {
    pub n_real: usize,
    pub n_fake: usize,
    pub seed: u64,
    pub n_frames: usize,
    pub width: u32,
    pub height: u32,
}

impl Default for FixtureOptions {
    fn default() -> Self {
        Self {
            n_real: 10,
            n_fake: 10,
            seed: 7,
            n_frames: 16,
            width: 64,
            height: 64,
        }
    }
}

struct Gradient {
    base: [i32; 3],
    dx: [i32; 3],
    dy: [i32; 3],
    dt: i32,
}

impl Gradient {
    fn draw(rng: &mut Xoshiro256pp) -> Self {
        let mut pick = |lo: i32, n: u64| lo + rng.below(n) as i32;
        Self {
            base: [pick(30, 21), pick(30, 21), pick(30, 21)],
            dx: [pick(0, 2), pick(0, 2), pick(0, 2)],
            dy: [pick(0, 2), pick(0, 2), pick(0, 2)],
            dt: pick(1, 2),
        }
    }

    fn at(&self, x: u32, y: u32, t: usize) -> [i32; 3] {
        let (x, y, t) = (x as i32, y as i32, t as i32);
        std::array::from_fn(|c| self.base[c] + self.dx[c] * x + self.dy[c] * y + self.dt * t)
    }
}

struct Patch {
    x0: u32,
    y0: u32,
    w: u32,
    h: u32,
}

impl Patch {
    fn in_quadrant(q: u64, width: u32, height: u32) -> Self {
        let (qw, qh) = (width / 2, height / 2);
        let (w, h) = ((qw * 3 / 4).max(1), (qh * 3 / 4).max(1));
        let (qx, qy) = ((q % 2) as u32 * qw, (q / 2) as u32 * qh);
        Self {
            x0: qx + (qw - w) / 2,
            y0: qy + (qh - h) / 2,
            w,
            h,
        }
    }

    fn offset(&self, x: u32, y: u32) -> i32 {
        if x < self.x0 || y < self.y0 || x >= self.x0 + self.w || y >= self.y0 + self.h {
            0
        } else if (x + y).is_multiple_of(2) {
            PATCH_AMPLITUDE
        } else {
            -PATCH_AMPLITUDE
        }
    }
}

fn render(grad: &Gradient, patch: Option<&Patch>, t: usize, width: u32, height: u32) -> Result<FrameBuffer> {
    FrameBuffer::from_fn(width, height, |x, y| {
        let off = patch.map_or(0, |p| p.offset(x, y));
        grad.at(x, y, t).map(|v| (v + off).clamp(0, 255) as u8)
    })
}

/// Writes the fixture videos and `manifest.jsonl` under `out_dir`, which
/// must be absent or empty. Returns the manifest path.
pub fn generate(out_dir: &Path, opts: &FixtureOptions) -> Result<PathBuf> {
    if opts.n_real == 0 || opts.n_fake == 0 {
        return Err(Error::InvalidArgument("fixture needs at least one real and one fake video".into()));
    }
    if opts.n_frames == 0 || opts.width < 8 || opts.height < 8 {
        return Err(Error::InvalidArgument("fixture videos need >= 1 frame and >= 8x8 pixels".into()));
    }
    if let Ok(mut entries) = fs::read_dir(out_dir) {
        if entries.next().is_some() {
            return Err(Error::OutputExists(out_dir.to_path_buf()));
        }
    }

    let ids = (0..opts.n_real)
        .map(|i| (format!("real_{i:03}"), Label::Real))
        .chain((0..opts.n_fake).map(|i| (format!("fake_{i:03}"), Label::Fake)));
    let mut videos = Vec::new();
    for (id, label) in ids {
        let mut rng = Xoshiro256pp::from_seed(splitmix64(opts.seed ^ fnv1a64(id.as_bytes())));
        let grad = Gradient::draw(&mut rng);
        let patch = (label == Label::Fake).then(|| Patch::in_quadrant(rng.below(4), opts.width, opts.height));
        let frames_dir = out_dir.join("frames").join(&id);
        for t in 0..opts.n_frames {
            let frame = render(&grad, patch.as_ref(), t, opts.width, opts.height)?;
            dataset::write_frame(&frame, &dataset::frame_path(&frames_dir, t))?;
        }
        videos.push(VideoRecord {
            id,
            frames_dir,
            n_frames: opts.n_frames,
            width: opts.width,
            height: opts.height,
            fps: Fps::parse("25")?,
            label,
            split: Split::Test,
        });
    }
    let manifest = out_dir.join("manifest.jsonl");
    dataset::write_manifest(&manifest, &videos)?;
    Ok(manifest)
}
