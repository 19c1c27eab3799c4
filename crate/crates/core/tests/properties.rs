mod common;

use common::*;
use proptest::prelude::*;
use wdc::graph::{assemble_wdc_system, refinement_energy};
use wdc::image::min_channel;
use wdc::morphology::disk_offsets;
use wdc::transmission::{dark_pixel_mask, initial_transmission, lower_bound, weight_map};
use wdc::*;

fn image_strategy(max_side: usize) -> impl Strategy<Value = ImageRgb> {
    (1..=max_side, 1..=max_side).prop_flat_map(|(w, h)| {
        prop::collection::vec(0.0f64..=1.0, w * h * 3)
            .prop_map(move |d| ImageRgb::new(w, h, d).unwrap())
    })
}

fn map_strategy(max_side: usize) -> impl Strategy<Value = ScalarMap> {
    (1..=max_side, 1..=max_side).prop_flat_map(|(w, h)| {
        prop::collection::vec(0.0f64..=1.0, w * h)
            .prop_map(move |d| ScalarMap::new(w, h, d).unwrap())
    })
}

fn airlight_strategy() -> impl Strategy<Value = AirLight> {
    prop::array::uniform3(0.3f64..=1.0).prop_map(AirLight::new)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn resize_is_idempotent(img in image_strategy(40), max_side in 1usize..30) {
        let once = resize_max_side(&img, max_side);
        prop_assert!(once.width().max(once.height()) <= max_side.max(1));
        prop_assert_eq!(resize_max_side(&once, max_side), once);
    }

    #[test]
    fn min_channel_is_at_most_every_ratio(img in image_strategy(8), a in airlight_strategy()) {
        let m = min_channel(&img, &a);
        for (i, p) in img.pixels().enumerate() {
            for (v, a) in p.iter().zip(a.rgb()) {
                prop_assert!(m.data()[i] <= v / a);
            }
        }
    }

    #[test]
    fn dark_channel_shrinks_with_radius(img in image_strategy(16), r in 1usize..5) {
        let small = dark_channel(&img, r);
        let big = dark_channel(&img, r + 1);
        for (s, b) in small.data().iter().zip(big.data()) {
            prop_assert!(b <= s);
        }
    }

    #[test]
    fn estimated_airlight_is_a_pixel_color(img in image_strategy(16), r in 1usize..4, frac in 0.001f64..=1.0) {
        let a = estimate_airlight(&img, r, frac).unwrap();
        let hit = img.pixels().any(|p| AirLight::new(p) == a);
        prop_assert!(hit);
    }

    #[test]
    fn lower_bound_is_in_unit_interval(img in image_strategy(12), a in airlight_strategy()) {
        let b = lower_bound(&img, &a);
        prop_assert!(b.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn dilation_initializer_dominates_lower_bound(b in map_strategy(16), r in 1usize..5) {
        let t = initial_transmission(&b, &Initializer::dilation(r)).unwrap();
        for (t, b) in t.data().iter().zip(b.data()) {
            prop_assert!(t >= b);
        }
    }

    #[test]
    fn opening_initializer_is_below_dilation(b in map_strategy(16), r in 1usize..5) {
        let open = initial_transmission(&b, &Initializer::opening(r)).unwrap();
        let dil = initial_transmission(&b, &Initializer::dilation(r)).unwrap();
        for (o, d) in open.data().iter().zip(dil.data()) {
            prop_assert!(o <= d);
        }
    }

    #[test]
    fn dilation_grows_with_radius(b in map_strategy(16), r in 1usize..5) {
        let small = initial_transmission(&b, &Initializer::dilation(r)).unwrap();
        let big = initial_transmission(&b, &Initializer::dilation(r + 1)).unwrap();
        for (s, g) in small.data().iter().zip(big.data()) {
            prop_assert!(s <= g);
        }
    }

    #[test]
    fn weights_ignore_a_common_gap_scale(b in map_strategy(10), r in 1usize..3, k in 1.5f64..4.0) {
        let t = initial_transmission(&b, &Initializer::dilation(r)).unwrap();
        let w = weight_map(&t, &b, 1e-3).unwrap();
        // scaling every gap by k scales every raw weight by 1/k^2 as long as no gap hits the floor
        let bs = b.map(|v| v / k);
        let ts = t.map(|v| v / k);
        let ws = weight_map(&ts, &bs, 1e-3 / k).unwrap();
        prop_assert!((w.mean() - 1.0).abs() < 1e-9);
        prop_assert!(max_abs_diff(w.data(), ws.data()) < 1e-6 * w.max());
    }

    #[test]
    fn dark_mask_marks_patch_maxima(b in map_strategy(12), r in 1usize..4) {
        let t = initial_transmission(&b, &Initializer::dilation(r)).unwrap();
        let mask = dark_pixel_mask(&t, &b, 0.0).unwrap();
        let (w, h) = b.dims();
        let offsets = disk_offsets(r);
        for y in 0..h {
            for x in 0..w {
                let here = b.get(x, y);
                let is_max = offsets.iter().all(|&(dx, dy)| {
                    let (nx, ny) = (x as isize + dx, y as isize + dy);
                    nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize || b.get(nx as usize, ny as usize) <= here
                });
                prop_assert_eq!(mask.get(x, y), is_max, "pixel ({}, {})", x, y);
            }
        }
    }

    #[test]
    fn laplacian_is_psd_and_system_is_pd(
        img in image_strategy(8),
        x in prop::collection::vec(-1.0f64..1.0, 64),
        lambda in 0.0f64..5.0,
    ) {
        let n = img.len();
        let x = &x[..n];
        let l = build_laplacian(&img, 1e-4).unwrap();
        let scale = l.diagonal().iter().sum::<f64>() * x.iter().map(|v| v * v).sum::<f64>();
        prop_assert!(l.quad_form(x) >= -1e-12 * scale.max(1.0));

        let w = ScalarMap::filled(img.width(), img.height(), 1.0).unwrap();
        let (m, _) = assemble_wdc_system(&w, &w, &l, lambda).unwrap();
        if x.iter().any(|&v| v != 0.0) {
            prop_assert!(m.quad_form(x) > 0.0);
        }
    }

    #[test]
    fn refinement_energy_is_data_plus_pairwise(img in image_strategy(6), lambda in 0.0f64..3.0, seed in any::<u64>()) {
        let mut r = rng(seed);
        let t: Vec<f64> = (0..img.len()).map(|_| rand::Rng::random_range(&mut r, 0.0..1.0)).collect();
        let w = ScalarMap::filled(img.width(), img.height(), 1.0).unwrap();
        let t0 = ScalarMap::filled(img.width(), img.height(), 0.5).unwrap();
        let l = build_laplacian(&img, 1e-4).unwrap();
        let got = refinement_energy(&w, &t0, &l, lambda, &t);
        let data: f64 = t.iter().map(|v| (v - 0.5).powi(2)).sum();
        let want = data + lambda * pairwise_smoothness(&img, &t, 1e-4);
        prop_assert!((got - want).abs() <= 1e-9 * want.max(1.0));
    }

    #[test]
    fn mse_is_symmetric(a in map_strategy(6), seed in any::<u64>()) {
        let mut r = rng(seed);
        let b = ScalarMap::from_fn(a.width(), a.height(), |_, _| rand::Rng::random_range(&mut r, 0.0..1.0)).unwrap();
        prop_assert_eq!(mse(&a, &b).unwrap(), mse(&b, &a).unwrap());
        prop_assert_eq!(mse(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn synthesized_haze_stays_in_unit_range(
        kind in prop::sample::select(SceneKind::ALL.to_vec()),
        size in 16usize..40,
        beta in 0.0f64..2.0,
        a in airlight_strategy(),
    ) {
        let spec = make_test_scene(kind, size).unwrap().with_beta(beta).with_airlight(a);
        let (hazy, t) = synthesize_haze(&spec).unwrap();
        prop_assert!(hazy.data().iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert!(t.data().iter().all(|v| *v > 0.0 && *v <= 1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn nnqp_beats_zero_and_the_clamped_unconstrained_point(seed in any::<u64>(), w in 1usize..6, h in 1usize..6) {
        let mut r = rng(seed);
        let qp = random_qp(&mut r, w, h);
        let sol = solve_nnqp(&qp, &SolverConfig::default()).unwrap();
        prop_assert!(sol.x.iter().all(|&v| v >= 0.0));
        let slack = 1e-9 * (1.0 + sol.objective.abs());
        prop_assert!(sol.objective <= qp.objective(&vec![0.0; qp.dim()]) + slack);

        let neg_c: Vec<f64> = qp.c.iter().map(|v| -v).collect();
        let free = dense_solve(&qp.q, &neg_c);
        let clamped: Vec<f64> = free.iter().map(|v| v.max(0.0)).collect();
        prop_assert!(sol.objective <= qp.objective(&clamped) + slack);

        for pair in sol.outer_objectives.windows(2) {
            prop_assert!(pair[1] <= pair[0]);
        }
        check_kkt(&qp, &sol.x, 1e-5).map_err(TestCaseError::fail)?;
    }
}
