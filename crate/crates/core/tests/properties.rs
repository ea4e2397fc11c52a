mod common;

use dbf_core::image::mirror_index;
use dbf_core::io::{decode_pgm, encode_pgm};
use dbf_core::sure::{filter_with_divergence, sure};
use dbf_core::tensor::{eigenvalues, orientation, orientation_field, TensorConfig};
use dbf_core::{apply_filter, FilterParams, GrayImage, OrientationField, Variant};
use proptest::prelude::*;

use common::{linear_operator, mat_vec, max_abs_diff, random_image, trace};

fn variant() -> impl Strategy<Value = Variant> {
    prop_oneof![Just(Variant::Gbf), Just(Variant::Adf), Just(Variant::Dbf)]
}

fn setup() -> impl Strategy<Value = (GrayImage, OrientationField, FilterParams)> {
    (
        3usize..10,
        3usize..10,
        any::<u64>(),
        variant(),
        0.4f64..3.0,
        5.0f64..120.0,
        0usize..4,
    )
        .prop_map(|(w, h, seed, v, d, r, radius)| {
            let img = random_image(w, h, seed);
            let field = orientation_field(&img, &TensorConfig::default()).unwrap();
            (img, field, FilterParams::new(v, d, r).with_window(radius))
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn output_lies_within_window_range((img, field, params) in setup()) {
        let out = apply_filter(&img, &params, Some(&field)).unwrap();
        let r = params.window_radius as isize;
        for y in 0..img.height() {
            for x in 0..img.width() {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for dy in -r..=r {
                    for dx in -r..=r {
                        let v = img.get(
                            mirror_index(x as isize + dx, img.width()),
                            mirror_index(y as isize + dy, img.height()),
                        );
                        lo = lo.min(v);
                        hi = hi.max(v);
                    }
                }
                let o = out.get(x, y);
                prop_assert!(o >= lo - 1e-9 && o <= hi + 1e-9, "{o} outside [{lo}, {hi}]");
            }
        }
    }

    #[test]
    fn adding_a_constant_commutes((img, field, params) in setup(), c in -100.0f64..100.0) {
        let a = apply_filter(&img, &params, Some(&field)).unwrap().map(|v| v + c);
        let b = apply_filter(&img.map(|v| v + c), &params, Some(&field)).unwrap();
        prop_assert!(max_abs_diff(&a, &b) < 1e-9);
    }

    #[test]
    fn scaling_intensities_and_range_commutes((img, field, params) in setup(), k in 0.1f64..10.0) {
        let a = apply_filter(&img, &params, Some(&field)).unwrap().map(|v| v * k);
        let scaled = FilterParams { range_scale: params.range_scale * k, ..params };
        let b = apply_filter(&img.map(|v| v * k), &scaled, Some(&field)).unwrap();
        prop_assert!(max_abs_diff(&a, &b) < 1e-9 * k.max(1.0) * 255.0);
    }

    #[test]
    fn identity_window_has_sure_equal_to_sigma_squared(
        (img, field, params) in setup(),
        sigma in 1.0f64..60.0,
    ) {
        let params = params.with_window(0);
        let (out, div) = filter_with_divergence(&img, &params, Some(&field)).unwrap();
        prop_assert_eq!(&out, &img);
        prop_assert_eq!(div, img.len() as f64);
        prop_assert_eq!(sure(&img, &out, div, sigma).unwrap(), sigma * sigma);
    }

    #[test]
    fn eigenvalues_preserve_trace_and_determinant(
        gx in prop::collection::vec(-50.0f64..50.0, 1..6),
        gy in prop::collection::vec(-50.0f64..50.0, 1..6),
    ) {
        // A sum of outer products is a valid (PSD) structure tensor.
        let (mut j11, mut j12, mut j22) = (0.0, 0.0, 0.0);
        for (a, b) in gx.iter().zip(&gy) {
            j11 += a * a;
            j12 += a * b;
            j22 += b * b;
        }
        let (l1, l2) = eigenvalues(j11, j12, j22);
        let scale = (j11 + j22).max(1.0);
        prop_assert!(l1 >= l2 && l2 >= -1e-9 * scale);
        prop_assert!((l1 + l2 - (j11 + j22)).abs() <= 1e-9 * scale);
        prop_assert!((l1 * l2 - (j11 * j22 - j12 * j12)).abs() <= 1e-9 * scale * scale);

        // The kernel's long axis is the minor eigenvector: the direction of
        // least intensity change.
        let theta = orientation(j11, j12, j22);
        prop_assert!((0.0..std::f64::consts::PI).contains(&theta));
        if l1 - l2 > 1e-6 * scale {
            let (c, s) = (theta.cos(), theta.sin());
            let (jx, jy) = (j11 * c + j12 * s, j12 * c + j22 * s);
            prop_assert!((jx - l2 * c).abs() <= 1e-7 * scale && (jy - l2 * s).abs() <= 1e-7 * scale);
        }
    }

    #[test]
    fn pgm_round_trips_quantized_images(w in 1usize..20, h in 1usize..20, seed in any::<u64>()) {
        let img = random_image(w, h, seed).map(|v| v.round());
        let back = decode_pgm(&encode_pgm(&img)).unwrap();
        prop_assert_eq!(back, img);
    }

    #[test]
    fn mirror_index_stays_in_bounds(i in -200isize..200, len in 1usize..30) {
        let m = mirror_index(i, len);
        prop_assert!(m < len);
        if len > 1 {
            prop_assert_eq!(m, mirror_index(-i, len));
            prop_assert_eq!(m, mirror_index(2 * (len as isize - 1) - i, len));
        }
    }
}

/// Without a range kernel the filter is a fixed linear operator, so its
/// divergence is the operator's trace.
#[test]
fn range_free_divergence_is_the_operator_trace() {
    for seed in 0..4 {
        let img = random_image(6, 6, 900 + seed);
        let field = orientation_field(&img, &TensorConfig::default()).unwrap();
        for radius in [1, 2, 3, 7] {
            let params = FilterParams::new(Variant::Adf, 1.2, 1.0).with_window(radius);
            let a = linear_operator(&img, &params, Some(&field));
            let (out, div) = filter_with_divergence(&img, &params, Some(&field)).unwrap();
            let direct = GrayImage::new(6, 6, mat_vec(&a, img.pixels())).unwrap();
            assert!(max_abs_diff(&out, &direct) < 1e-10, "seed {seed} radius {radius}");
            assert!((div - trace(&a)).abs() < 1e-12, "div {div} vs trace {}", trace(&a));
        }
    }
}
