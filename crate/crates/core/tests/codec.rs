// SPDX-License-Identifier: Apache-2.0

//! Round trips through the real external encoder. Skipped when `ffmpeg`
//! is not on PATH.

mod common;

use common::ffmpeg_available;
use forgebench::codec::{compress_roundtrip, mean_abs_error, validate_codec, CodecConfig};
use forgebench::dataset;
use forgebench::fixture::{self, FixtureOptions};

macro_rules! require_encoder {
    () => {
        if !ffmpeg_available() {
            println!("SKIPPED: ffmpeg not found on PATH");
            return;
        }
    };
}

#[test]
fn roundtrip_preserves_shape_and_degrades_with_crf() {
    require_encoder!();
    let dir = tempfile::tempdir().unwrap();
    let opts = FixtureOptions {
        n_real: 1,
        n_fake: 1,
        ..Default::default()
    };
    let m = dataset::load_manifest(&fixture::generate(&dir.path().join("data"), &opts).unwrap()).unwrap();
    let cfg = CodecConfig::default();
    for v in &m.videos {
        let light = compress_roundtrip(v, 23, &cfg, &dir.path().join(format!("{}_23", v.id))).unwrap();
        let heavy = compress_roundtrip(v, 40, &cfg, &dir.path().join(format!("{}_40", v.id))).unwrap();
        for out in [&light, &heavy] {
            assert_eq!((out.n_frames, out.width, out.height), (v.n_frames, v.width, v.height));
            for i in 0..out.n_frames {
                dataset::read_frame(out, i).unwrap();
            }
        }
        let (e23, e40) = (mean_abs_error(v, &light).unwrap(), mean_abs_error(v, &heavy).unwrap());
        assert!(e40 >= e23, "{}: mae(40) = {e40} < mae(23) = {e23}", v.id);
        assert!(e23 > 0.0);
    }
}

#[test]
fn diagnostic_reports_encoder() {
    require_encoder!();
    let d = validate_codec(&CodecConfig::default()).unwrap();
    assert!(d.summary().contains("ffmpeg"), "{}", d.summary());
}

#[test]
fn missing_encoder_is_a_clear_error() {
    let dir = tempfile::tempdir().unwrap();
    let m = dataset::load_manifest(
        &fixture::generate(
            &dir.path().join("data"),
            &FixtureOptions {
                n_real: 1,
                n_fake: 1,
                n_frames: 2,
                ..Default::default()
            },
        )
        .unwrap(),
    )
    .unwrap();
    let cfg = CodecConfig::default().with_program("/nonexistent/encoder").unwrap();
    let err = compress_roundtrip(&m.videos[0], 23, &cfg, &dir.path().join("out")).unwrap_err();
    assert!(matches!(err, forgebench::Error::ToolNotFound { .. }), "{err}");
    assert!(!dir.path().join("out").exists());
}
