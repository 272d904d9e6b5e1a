// SPDX-License-Identifier: Apache-2.0

mod common;

use common::frame_strategy;
use forgebench::dataset::FrameBuffer;
use forgebench::perturb::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn flips_are_involutions(f in frame_strategy(17, 13)) {
        prop_assert_eq!(flip_horizontal(&flip_horizontal(&f)), f.clone());
        prop_assert_eq!(flip_vertical(&flip_vertical(&f)), f);
    }

    #[test]
    fn flips_commute(f in frame_strategy(9, 9)) {
        prop_assert_eq!(flip_vertical(&flip_horizontal(&f)), flip_horizontal(&flip_vertical(&f)));
    }

    #[test]
    fn flip_moves_pixels(f in frame_strategy(11, 7)) {
        let (w, h) = (f.width(), f.height());
        let fh = flip_horizontal(&f);
        let fv = flip_vertical(&f);
        for y in 0..h {
            for x in 0..w {
                prop_assert_eq!(fh.pixel(w - 1 - x, y), f.pixel(x, y));
                prop_assert_eq!(fv.pixel(x, h - 1 - y), f.pixel(x, y));
            }
        }
    }

    #[test]
    fn grayscale_idempotent_and_neutral(f in frame_strategy(12, 12)) {
        let g = to_grayscale(&f);
        prop_assert_eq!(to_grayscale(&g), g.clone());
        for p in g.pixels().chunks_exact(3) {
            prop_assert!(p[0] == p[1] && p[1] == p[2]);
        }
    }

    #[test]
    fn identity_parameters_are_bit_exact(f in frame_strategy(12, 12), seed in any::<u64>()) {
        prop_assert_eq!(adjust_brightness(&f, 0).unwrap(), f.clone());
        prop_assert_eq!(adjust_contrast(&f, 1.0).unwrap(), f.clone());
        prop_assert_eq!(gaussian_noise(&f, 0.0, seed).unwrap(), f);
    }

    #[test]
    fn brightness_is_clamped_shift(f in frame_strategy(8, 8), delta in -255i32..=255) {
        let b = adjust_brightness(&f, delta).unwrap();
        for (o, n) in f.pixels().iter().zip(b.pixels()) {
            prop_assert_eq!(*n as i32, (*o as i32 + delta).clamp(0, 255));
        }
    }

    #[test]
    fn brightness_commutes_with_flips(f in frame_strategy(10, 10), delta in -100i32..=100) {
        let a = flip_horizontal(&adjust_brightness(&f, delta).unwrap());
        let b = adjust_brightness(&flip_horizontal(&f), delta).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn contrast_keeps_mid_gray(scale in 0.05f64..4.0) {
        let f = FrameBuffer::filled(3, 3, [128; 3]).unwrap();
        prop_assert_eq!(adjust_contrast(&f, scale).unwrap(), f);
    }

    #[test]
    fn contrast_is_monotone(a in any::<u8>(), b in any::<u8>(), scale in 0.05f64..4.0) {
        let f = FrameBuffer::new(2, 1, vec![a, a, a, b, b, b]).unwrap();
        let c = adjust_contrast(&f, scale).unwrap();
        let (ca, cb) = (c.pixels()[0], c.pixels()[3]);
        if a < b { prop_assert!(ca <= cb); } else { prop_assert!(ca >= cb); }
    }

    #[test]
    fn downscale_dimension_law(f in frame_strategy(33, 21), big in any::<bool>()) {
        let factor = if big { 4 } else { 2 };
        match downscale(&f, factor) {
            Ok(d) => {
                prop_assert_eq!((d.width(), d.height()), (f.width() / factor, f.height() / factor));
                prop_assert!(f.width() >= factor && f.height() >= factor);
            }
            Err(_) => prop_assert!(f.width() < factor || f.height() < factor),
        }
    }

    #[test]
    fn downscale_of_constant_is_constant(w in 4u32..40, h in 4u32..40, rgb in any::<[u8; 3]>()) {
        let f = FrameBuffer::filled(w, h, rgb).unwrap();
        let d = downscale(&f, 2).unwrap();
        prop_assert_eq!(d, FrameBuffer::filled(w / 2, h / 2, rgb).unwrap());
    }

    #[test]
    fn noise_is_seed_deterministic(f in frame_strategy(10, 10), seed in any::<u64>()) {
        let a = gaussian_noise(&f, 15.0, seed).unwrap();
        prop_assert_eq!(a.clone(), gaussian_noise(&f, 15.0, seed).unwrap());
        prop_assert_eq!((a.width(), a.height()), (f.width(), f.height()));
    }

    /// Every frame-level op accepts any frame and any in-range parameter,
    /// and keeps the size except for the resolution ops.
    #[test]
    fn fuzz_all_frame_ops(
        f in frame_strategy(20, 20),
        op_idx in 0usize..12,
        delta in -255i32..=255,
        scale in 0.01f64..10.0,
        sigma in 0.0f64..200.0,
        seed in any::<u64>(),
    ) {
        let op = OpId::ALL[op_idx];
        prop_assume!(!op.is_codec());
        let mut spec = PerturbationSpec::canonical(op);
        match op {
            OpId::BrightUp | OpId::BrightDown => { spec.params.insert("delta".into(), delta as f64); }
            OpId::Contrast => { spec.params.insert("scale".into(), scale); }
            OpId::Noise => { spec.params.insert("sigma".into(), sigma); }
            _ => {}
        }
        let spec = spec.normalized().unwrap();
        match apply_to_frame(&spec, &f, seed) {
            Ok(out) => {
                let dims = output_dims(&spec, f.width(), f.height()).unwrap();
                prop_assert_eq!((out.width(), out.height()), dims);
                prop_assert_eq!(out.pixels().len(), (dims.0 * dims.1 * 3) as usize);
            }
            Err(_) => {
                prop_assert!(matches!(op, OpId::ResX2 | OpId::ResX4));
            }
        }
    }
}

#[test]
fn canonical_values_match_hand_evaluation() {
    let v = |x: u8| FrameBuffer::filled(1, 1, [x; 3]).unwrap();
    assert_eq!(adjust_brightness(&v(200), 38).unwrap().pixel(0, 0), [238; 3]);
    assert_eq!(adjust_brightness(&v(230), 38).unwrap().pixel(0, 0), [255; 3]);
    assert_eq!(adjust_brightness(&v(20), -38).unwrap().pixel(0, 0), [0; 3]);
    assert_eq!(adjust_contrast(&v(100), 1.3).unwrap().pixel(0, 0), [92; 3]);
    assert_eq!(adjust_contrast(&v(128), 1.3).unwrap().pixel(0, 0), [128; 3]);
    // 1.3 * 127 + 128 = 293.1 -> clamp
    assert_eq!(adjust_contrast(&v(255), 1.3).unwrap().pixel(0, 0), [255; 3]);
}
