// SPDX-License-Identifier: Apache-2.0
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use forgebench::dataset::FrameBuffer;
use proptest::prelude::*;

pub fn frame_strategy(max_w: u32, max_h: u32) -> impl Strategy<Value = FrameBuffer> {
    (1..=max_w, 1..=max_h).prop_flat_map(|(w, h)| {
        proptest::collection::vec(any::<u8>(), (w * h * 3) as usize)
            .prop_map(move |px| FrameBuffer::new(w, h, px).unwrap())
    })
}

/// Brute-force AUC: fraction of (fake, real) pairs ordered correctly, ties
/// counted half.
pub fn pairwise_auc(fakes: &[f64], reals: &[f64]) -> f64 {
    let mut wins = 0.0;
    for &f in fakes {
        for &r in reals {
            if f > r {
                wins += 1.0;
            } else if f == r {
                wins += 0.5;
            }
        }
    }
    wins / (fakes.len() * reals.len()) as f64
}

/// Writes an executable `sh` script and returns its path.
pub fn script(dir: &Path, name: &str, body: &str) -> PathBuf {
    use std::os::unix::fs::PermissionsExt;
    let path = dir.join(name);
    std::fs::write(&path, format!("#!/bin/sh\n{body}")).unwrap();
    std::fs::set_permissions(&path, std::fs::Permissions::from_mode(0o755)).unwrap();
    path
}

/// Protocol scorer that answers 0.9 for frames whose path contains
/// `fake_` and 0.1 otherwise.
pub const PATH_SCORER: &str = r#"
read hello
[ "$hello" = "HELLO forgebench/1" ] || exit 3
echo "READY path-scorer"
while read cmd id n; do
  case "$cmd" in
    BYE) exit 0 ;;
    VIDEO)
      out=""
      i=0
      while [ $i -lt $n ]; do
        read tag path
        case "$path" in
          *fake_*) out="$out
S 0.9" ;;
          *) out="$out
S 0.1" ;;
        esac
        i=$((i+1))
      done
      echo "SCORES $id $n$out" ;;
    *) exit 4 ;;
  esac
done
"#;

pub fn ffmpeg_available() -> bool {
    std::process::Command::new("ffmpeg")
        .arg("-version")
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}
