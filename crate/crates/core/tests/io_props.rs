// SPDX-License-Identifier: Apache-2.0

mod common;

use common::frame_strategy;
use forgebench::dataset::{read_frame_file, write_frame};
use forgebench::perturb::{flip_horizontal, flip_vertical};
use forgebench::scorer::{baseline_score_frame, format_score, read_score_rows, write_score_rows, ScoreRow};
use proptest::prelude::*;

fn score_row() -> impl Strategy<Value = ScoreRow> {
    (
        prop_oneof![Just("clean"), Just("c23"), Just("noise")],
        "[a-z]{1,6}_[0-9]{3}",
        -1i64..64,
        prop_oneof![0.0f64..=1.0, Just(0.0), Just(1.0), Just(1e-300), Just(0.1 + 0.2)],
    )
        .prop_map(|(op, video_id, frame_index, score)| ScoreRow {
            op_id: op.to_string(),
            video_id,
            frame_index,
            score,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn png_roundtrip_is_lossless(f in frame_strategy(40, 40)) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/000000.png");
        write_frame(&f, &p).unwrap();
        prop_assert_eq!(read_frame_file(&p).unwrap(), f);
    }

    #[test]
    fn score_text_roundtrips(s in 0.0f64..=1.0) {
        let t = format_score(s);
        prop_assert!(!t.contains('e') && !t.contains('E'));
        prop_assert_eq!(t.parse::<f64>().unwrap(), s);
    }

    #[test]
    fn score_csv_is_a_fixed_point(rows in proptest::collection::vec(score_row(), 0..30)) {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
        write_score_rows(&a, &rows).unwrap();
        let back = read_score_rows(&a).unwrap();
        write_score_rows(&b, &back).unwrap();
        prop_assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        let mut sorted = rows.clone();
        sorted.sort_by(|x, y| (&x.op_id, &x.video_id, x.frame_index).cmp(&(&y.op_id, &y.video_id, y.frame_index)));
        prop_assert_eq!(back, sorted);
    }

    #[test]
    fn baseline_ignores_flips(f in frame_strategy(24, 24)) {
        prop_assume!(f.width() >= 3 && f.height() >= 3);
        let s = baseline_score_frame(&f).unwrap();
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert!((baseline_score_frame(&flip_horizontal(&f)).unwrap() - s).abs() < 1e-9);
        prop_assert!((baseline_score_frame(&flip_vertical(&f)).unwrap() - s).abs() < 1e-9);
    }
}
