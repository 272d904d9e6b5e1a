// SPDX-License-Identifier: Apache-2.0

//! Acceptance checks. Prints one PASS / FAIL / SKIPPED line per criterion
//! and exits non-zero if any criterion fails.

mod common;

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::{ffmpeg_available, pairwise_auc};
use forgebench::codec::{compress_roundtrip, mean_abs_error, CodecConfig};
use forgebench::config::RunConfig;
use forgebench::dataset::{self, FrameBuffer};
use forgebench::fixture::{self, FixtureOptions};
use forgebench::metrics::{auc, row_average, EvalCell, LabeledScores};
use forgebench::perturb::*;
use forgebench::pipeline;
use forgebench::rng::Xoshiro256pp;

enum Outcome {
    Pass(String),
    Skipped(String),
}

type Check = fn() -> Result<Outcome, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Published per-op cells (canonical op order) and row averages.
const ROWS: [(&str, &str, [f64; 12], f64); 8] = [
    ("CapsuleNet", "FFpp-Raw", [77.97, 54.14, 73.31, 70.62, 69.31, 54.14, 73.13, 63.20, 65.43, 56.99, 68.38, 72.94], 66.63),
    ("XceptionNet", "FFpp-Raw", [69.49, 55.70, 65.92, 66.40, 65.32, 50.50, 65.26, 57.36, 57.23, 55.90, 65.51, 66.90], 61.79),
    ("SBIs", "FFpp-Raw", [90.43, 76.27, 86.38, 86.47, 85.94, 71.52, 85.98, 79.28, 76.35, 63.62, 86.27, 86.54], 81.25),
    ("CapsuleNet", "FFpp-C23", [95.61, 66.03, 93.27, 92.31, 91.55, 53.50, 91.98, 71.49, 80.28, 67.56, 87.43, 88.86], 81.66),
    ("XceptionNet", "FFpp-C23", [98.34, 70.71, 97.07, 96.65, 96.34, 51.04, 96.20, 66.82, 83.42, 72.03, 93.17, 94.99], 84.73),
    ("SBIs", "FFpp-C23", [91.71, 75.43, 87.63, 86.51, 87.40, 57.06, 86.84, 81.22, 75.40, 64.31, 87.31, 86.28], 80.59),
    ("CapsuleNet", "FFpp-C40", [82.64, 78.33, 80.22, 80.77, 79.30, 52.78, 78.64, 61.53, 76.88, 71.91, 78.41, 75.82], 74.77),
    ("XceptionNet", "FFpp-C40", [83.25, 80.69, 80.85, 82.83, 80.65, 51.74, 81.39, 55.70, 80.62, 74.99, 71.30, 78.43], 75.20),
];

fn row_averages() -> Result<Outcome, String> {
    for (det, train, row, expected) in ROWS {
        let cells: Vec<EvalCell> = OpId::ALL
            .iter()
            .zip(row)
            .map(|(&op_id, auc_percent)| EvalCell {
                op_id,
                auc_percent,
                n_real: 1,
                n_fake: 1,
            })
            .collect();
        let avg = row_average(&cells).map_err(|e| e.to_string())?;
        ensure((avg - expected).abs() <= 0.005, || {
            format!("{det}/{train}: average {avg:.4}, published {expected}")
        })?;
    }
    Ok(Outcome::Pass("8 rows within 0.005".into()))
}

fn random_instance(rng: &mut Xoshiro256pp, tie_heavy: bool) -> (Vec<f64>, Vec<f64>) {
    let n_fake = 1 + rng.below(25) as usize;
    let n_real = 1 + rng.below(25) as usize;
    let mut draw = |n: usize| -> Vec<f64> {
        (0..n)
            .map(|_| {
                if tie_heavy {
                    rng.below(5) as f64 / 4.0
                } else {
                    rng.next_open_unit()
                }
            })
            .collect()
    };
    let fakes = draw(n_fake);
    (fakes, draw(n_real))
}

fn auc_oracle() -> Result<Outcome, String> {
    let mut rng = Xoshiro256pp::from_seed(2024);
    let instances = 2000;
    for i in 0..instances {
        let (fakes, reals) = random_instance(&mut rng, i % 2 == 0);
        let data = LabeledScores::from_classes(&fakes, &reals).map_err(|e| e.to_string())?;
        let a = auc(&data).map_err(|e| e.to_string())?;
        let oracle = pairwise_auc(&fakes, &reals);
        ensure((a - oracle).abs() <= 1e-12, || format!("instance {i}: {a} vs oracle {oracle}"))?;
        let inv = auc(&data.inverted()).map_err(|e| e.to_string())?;
        ensure(a + inv == 1.0, || format!("instance {i}: {a} + {inv} != 1"))?;
    }
    Ok(Outcome::Pass(format!("{instances} instances (half tie-heavy, n <= 50)")))
}

fn random_frame(rng: &mut Xoshiro256pp) -> FrameBuffer {
    let w = 1 + rng.below(24) as u32;
    let h = 1 + rng.below(24) as u32;
    let px = (0..w * h * 3).map(|_| rng.next_u64() as u8).collect();
    FrameBuffer::new(w, h, px).unwrap()
}

fn perturbation_suite() -> Result<Outcome, String> {
    let mut rng = Xoshiro256pp::from_seed(11);
    for i in 0..500 {
        let f = random_frame(&mut rng);
        let seed = rng.next_u64();
        ensure(flip_horizontal(&flip_horizontal(&f)) == f, || format!("frame {i}: flip_h not an involution"))?;
        ensure(flip_vertical(&flip_vertical(&f)) == f, || format!("frame {i}: flip_v not an involution"))?;
        let g = to_grayscale(&f);
        ensure(to_grayscale(&g) == g, || format!("frame {i}: grayscale not idempotent"))?;
        ensure(adjust_brightness(&f, 0).unwrap() == f, || format!("frame {i}: delta 0 changed pixels"))?;
        ensure(adjust_contrast(&f, 1.0).unwrap() == f, || format!("frame {i}: scale 1 changed pixels"))?;
        ensure(gaussian_noise(&f, 0.0, seed).unwrap() == f, || format!("frame {i}: sigma 0 changed pixels"))?;
        ensure(
            gaussian_noise(&f, 15.0, seed).unwrap() == gaussian_noise(&f, 15.0, seed).unwrap(),
            || format!("frame {i}: noise not seed-deterministic"),
        )?;
        for op in OpId::ALL.into_iter().filter(|o| !o.is_codec()) {
            let spec = PerturbationSpec::canonical(op);
            let expect = output_dims(&spec, f.width(), f.height());
            match (apply_to_frame(&spec, &f, seed), expect) {
                (Ok(out), Ok(dims)) => ensure(
                    (out.width(), out.height()) == dims && out.pixels().len() == (dims.0 * dims.1 * 3) as usize,
                    || format!("frame {i}, {op}: output shape"),
                )?,
                (Err(_), Err(_)) => {}
                _ => return Err(format!("frame {i}, {op}: apply and output_dims disagree")),
            }
        }
        for factor in [2, 4] {
            if f.width() >= factor && f.height() >= factor {
                let d = downscale(&f, factor).unwrap();
                ensure((d.width(), d.height()) == (f.width() / factor, f.height() / factor), || {
                    format!("frame {i}: downscale x{factor} dims")
                })?;
            }
        }
    }

    let flat = FrameBuffer::filled(1000, 1000, [128; 3]).unwrap();
    let noisy = gaussian_noise(&flat, 15.0, 42).unwrap();
    let n = noisy.pixels().len() as f64;
    let mean = noisy.pixels().iter().map(|&v| v as f64).sum::<f64>() / n;
    let var = noisy.pixels().iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    ensure((mean - 128.0).abs() <= 0.5, || format!("noise mean {mean}"))?;
    ensure((13.5..=15.5).contains(&sd), || format!("noise stddev {sd}"))?;
    Ok(Outcome::Pass(format!("500 random frames; noise mean {mean:.3}, stddev {sd:.3}")))
}

fn fixture_config(root: &std::path::Path, manifest: &std::path::Path, workers: usize, with_codec: bool) -> RunConfig {
    let mut cfg = RunConfig {
        manifest: Some(manifest.to_path_buf()),
        output_root: root.to_path_buf(),
        workers,
        ..RunConfig::default()
    };
    if !with_codec {
        let ops: Vec<OpId> = OpId::ALL.into_iter().filter(|o| !o.is_codec()).collect();
        cfg.restrict_ops(&ops);
    }
    cfg
}

fn end_to_end() -> Result<Outcome, String> {
    let with_codec = ffmpeg_available();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let manifest = fixture::generate(&dir.path().join("data"), &FixtureOptions::default()).map_err(|e| e.to_string())?;
    let mut reports = Vec::new();
    for workers in [1, 8] {
        let mut cfg = fixture_config(&dir.path().join(format!("w{workers}")), &manifest, workers, with_codec);
        cfg.validate().map_err(|e| e.to_string())?;
        let report = pipeline::cmd_run(&cfg).map_err(|e| format!("workers={workers}: {e}"))?;
        let csv = fs::read(cfg.output_root.join("report/report.csv")).map_err(|e| e.to_string())?;
        reports.push((report, csv));
    }
    ensure(reports[0].1 == reports[1].1, || "report.csv differs between workers=1 and workers=8".into())?;
    let report = &reports[0].0;
    let clean = report.reference_auc_percent.ok_or("no clean AUC")?;
    ensure(clean >= 95.0, || format!("clean AUC {clean} < 95"))?;
    let expected: Vec<OpId> = OpId::ALL.into_iter().filter(|o| with_codec || !o.is_codec()).collect();
    let got: Vec<OpId> = report.cells.iter().map(|c| c.op_id).collect();
    ensure(got == expected, || format!("cells {got:?}"))?;
    let csv = String::from_utf8(reports[0].1.clone()).unwrap();
    let csv_ops: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').nth(2).unwrap_or("")).collect();
    let mut expected_ops: Vec<&str> = expected.iter().map(|o| o.as_str()).collect();
    expected_ops.push("average");
    ensure(csv_ops == expected_ops, || format!("csv op order {csv_ops:?}"))?;
    let detail = format!("{} cells, identical CSVs, clean AUC {clean:.2}", got.len());
    if with_codec {
        Ok(Outcome::Pass(detail))
    } else {
        Ok(Outcome::Skipped(format!("compression ops skipped, ffmpeg not found; {detail}")))
    }
}

fn codec_properties() -> Result<Outcome, String> {
    if !ffmpeg_available() {
        return Ok(Outcome::Skipped("ffmpeg not found on PATH".into()));
    }
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let opts = FixtureOptions {
        n_real: 1,
        n_fake: 1,
        ..Default::default()
    };
    let m = dataset::load_manifest(&fixture::generate(&dir.path().join("data"), &opts).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let cfg = CodecConfig::default();
    let mut detail = Vec::new();
    for v in &m.videos {
        let mut mae = Vec::new();
        for crf in [23u8, 40] {
            let out = compress_roundtrip(v, crf, &cfg, &dir.path().join(format!("{}_{crf}", v.id)))
                .map_err(|e| e.to_string())?;
            ensure((out.n_frames, out.width, out.height) == (v.n_frames, v.width, v.height), || {
                format!("{} crf {crf}: shape changed", v.id)
            })?;
            for i in 0..out.n_frames {
                dataset::read_frame(&out, i).map_err(|e| e.to_string())?;
            }
            mae.push(mean_abs_error(v, &out).map_err(|e| e.to_string())?);
        }
        ensure(mae[1] >= mae[0], || format!("{}: mae(40) {} < mae(23) {}", v.id, mae[1], mae[0]))?;
        detail.push(format!("{} mae {:.2}/{:.2}", v.id, mae[0], mae[1]));
    }
    Ok(Outcome::Pass(detail.join(", ")))
}

fn whole_copy() -> Result<Outcome, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let opts = FixtureOptions {
        n_real: 4,
        n_fake: 4,
        n_frames: 4,
        ..Default::default()
    };
    let manifest = fixture::generate(&dir.path().join("data"), &opts).map_err(|e| e.to_string())?;
    let mut cfg = fixture_config(&dir.path().join("out"), &manifest, 4, ffmpeg_available());
    cfg.validate().map_err(|e| e.to_string())?;
    pipeline::cmd_perturb(&cfg).map_err(|e| e.to_string())?;
    let findings = pipeline::audit_whole_copy(&cfg).map_err(|e| e.to_string())?;
    ensure(findings.is_empty(), || format!("{findings:?}"))?;

    // the audit must notice a dropped video
    let victim = pipeline::Layout::new(&cfg.output_root).op_manifest(cfg.operations[0].op_id);
    let text = fs::read_to_string(&victim).map_err(|e| e.to_string())?;
    let kept: String = text.lines().skip(1).map(|l| format!("{l}\n")).collect();
    fs::write(&victim, kept).map_err(|e| e.to_string())?;
    let findings = pipeline::audit_whole_copy(&cfg).map_err(|e| e.to_string())?;
    ensure(findings.len() == 1, || format!("tampered manifest gave {findings:?}"))?;
    Ok(Outcome::Pass(format!(
        "{} ops x {} test videos, tampering detected",
        cfg.operations.len(),
        opts.n_real + opts.n_fake
    )))
}

fn main() {
    let checks: [(&str, Check, Duration); 6] = [
        ("row averaging arithmetic", row_averages, Duration::from_secs(1)),
        ("AUC oracle equivalence", auc_oracle, Duration::from_secs(10)),
        ("perturbation invariants", perturbation_suite, Duration::from_secs(60)),
        ("end-to-end determinism", end_to_end, Duration::from_secs(300)),
        ("codec bridge properties", codec_properties, Duration::from_secs(60)),
        ("whole-copy guarantee", whole_copy, Duration::from_secs(300)),
    ];
    let mut failed = 0;
    for (name, check, budget) in checks {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        let over = start.elapsed() > budget;
        match result {
            Ok(Outcome::Pass(d)) if !over => println!("PASS    {name} ({secs:.2} s): {d}"),
            Ok(Outcome::Skipped(d)) if !over => println!("SKIPPED {name} ({secs:.2} s): {d}"),
            Ok(_) => {
                failed += 1;
                println!("FAIL    {name}: took {secs:.2} s, budget {} s", budget.as_secs());
            }
            Err(e) => {
                failed += 1;
                println!("FAIL    {name} ({secs:.2} s): {e}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria met");
}
