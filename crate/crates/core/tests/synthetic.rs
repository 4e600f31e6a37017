//! End-to-end behaviour on generated fingers.

use clfq::eval::{toy_matcher, MatcherConfig};
use clfq::filters::{gaussian_blur_gray, resize_gray, resize_mask};
use clfq::imaging::{preprocess, PreprocessConfig};
use clfq::sharpness::{ait_sharpness, SharpnessConfig};
use clfq::synthgen::{degrade, generate_base_pattern, params_from_quality};
use clfq::{ForegroundMask, GrayRaster, InputImage};

fn preprocessed(img: &GrayRaster) -> (GrayRaster, ForegroundMask) {
    let p = preprocess(&InputImage::Gray(img.clone()), &PreprocessConfig::default()).unwrap();
    (p.sample, p.mask)
}

#[test]
fn heavy_degradation_lowers_mated_similarity() {
    let cfg = MatcherConfig::default();
    let seeds = 50;
    let mut wins = 0;
    for seed in 0..seeds {
        let base = generate_base_pattern(5000 + seed);
        let (ref_img, ref_mask) = preprocessed(&base.image);
        let similarity = |c: f64| {
            let deg = degrade(&base.image, &base.mask, &params_from_quality(c, seed).unwrap()).unwrap();
            let (img, mask) = preprocessed(&deg);
            toy_matcher(&ref_img, &ref_mask, &img, &mask, &cfg).unwrap()
        };
        wins += (similarity(5.0) < similarity(90.0)) as usize;
    }
    // Paired ordering over every seed.
    assert_eq!(wins, seeds as usize, "{wins}/{seeds}");
}

#[test]
fn sharpness_blur_ladder_on_rendered_fingers() {
    let cfg = SharpnessConfig::default();
    for seed in 0..5 {
        let base = generate_base_pattern(700 + seed);
        let scores: Vec<u8> = [0.0, 1.0, 2.0, 4.0]
            .iter()
            .map(|&s| {
                let img = if s > 0.0 { gaussian_blur_gray(&base.image, s) } else { base.image.clone() };
                ait_sharpness(&img, &cfg).unwrap()
            })
            .collect();
        assert!(scores.windows(2).all(|w| w[1] <= w[0]), "seed {seed}: {scores:?}");
    }
}

#[test]
fn sharpness_is_stable_across_capture_resolution() {
    let cfg = SharpnessConfig::default();
    for seed in 0..5 {
        let base = generate_base_pattern(900 + seed);
        let (w, h) = (base.image.width(), base.image.height());
        let hi_res = resize_gray(&base.image, w * 3 / 2, h * 3 / 2);
        let (a, b) = (ait_sharpness(&base.image, &cfg).unwrap(), ait_sharpness(&hi_res, &cfg).unwrap());
        assert!((a as i32 - b as i32).abs() <= 5, "seed {seed}: {a} vs {b}");
    }
}

#[test]
fn preprocessing_keeps_masks_aligned_with_samples() {
    let base = generate_base_pattern(42);
    let big = resize_gray(&base.image, base.image.width() * 4 / 3, base.image.height() * 4 / 3);
    let big_mask = resize_mask(&base.mask, big.width(), big.height());
    for img in [base.image.clone(), big] {
        let (sample, mask) = preprocessed(&img);
        assert!(mask.matches(&sample));
        assert!(mask.count() > 0);
    }
    assert!(big_mask.count() > base.mask.count());
}
