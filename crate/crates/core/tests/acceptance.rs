//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (no libtest harness) so every criterion is
//! evaluated and reported even when an earlier one fails. The process exits
//! non-zero on any failure that is not a documented limitation; those are
//! printed as `FAIL (known limitation: ...)` and explained in the README.

mod common;

use std::time::{Duration, Instant};

use common::*;
use rand::Rng;
use wdc::dehaze::{DEFAULT_EPS_T, DEFAULT_MAX_SIDE};
use wdc::graph::{
    assemble_cwdc_qp, build_laplacian, refinement_energy, DEFAULT_COLOR_FLOOR, DEFAULT_LAMBDA,
};
use wdc::metrics::masked_mse;
use wdc::synth::{hole_layout, in_hole};
use wdc::transmission::{scaled_radius, DEFAULT_GAP_FLOOR, DEFAULT_MASK_RADIUS};
use wdc::*;

struct Outcome {
    pass: bool,
    detail: String,
    /// Set when the failure is a documented limitation rather than a defect.
    known: Option<String>,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Self {
            pass,
            detail,
            known: None,
        }
    }
}

const SCENE_AIRLIGHT: [f64; 3] = [0.9, 0.95, 1.0];

fn scene(kind: SceneKind, size: usize, beta: f64) -> (SceneSpec, ImageRgb, ScalarMap) {
    let spec = make_test_scene(kind, size)
        .unwrap()
        .with_beta(beta)
        .with_airlight(AirLight::new(SCENE_AIRLIGHT));
    let (hazy, t) = synthesize_haze(&spec).unwrap();
    (spec, hazy, t)
}

/// Config for desk-scale scenes: true air-light and the mask radius scaled
/// from its 640-pixel default.
fn scene_config(size: usize, airlight: AirLight) -> DehazeConfig {
    DehazeConfig {
        initializer: Initializer::dilation(scaled_radius(size)),
        airlight: Some(airlight),
        ..DehazeConfig::default()
    }
}

fn min_gap(t: &ScalarMap, b: &ScalarMap) -> f64 {
    t.data()
        .iter()
        .zip(b.data())
        .map(|(t, b)| t - b)
        .fold(f64::INFINITY, f64::min)
}

fn linear_oracle() -> Outcome {
    let mut rng = rng(1);
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let (w, h) = (rng.random_range(1..=5), rng.random_range(1..=5));
        let m = random_spd(&mut rng, w, h);
        let r: Vec<f64> = (0..w * h).map(|_| rng.random_range(-2.0..2.0)).collect();
        let got = solve_spd(&m, &r, &SolverConfig::default()).unwrap();
        worst = worst.max(rel_err(&got.x, &dense_solve(&m, &r)));
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome::new(
        worst <= 1e-5 && secs < 5.0,
        format!("worst relative error {worst:.2e} (<= 1e-5), {secs:.2}s (< 5s)"),
    )
}

fn qp_oracle() -> Outcome {
    let mut rng = rng(2);
    let start = Instant::now();
    let cfg = SolverConfig {
        kkt_tol: 1e-5,
        ..SolverConfig::default()
    };
    let (mut worst, mut kkt_failures, mut active) = (0.0f64, 0, 0);
    for _ in 0..30 {
        let qp = random_qp(&mut rng, 5, 3);
        let sol = solve_nnqp(&qp, &cfg).unwrap();
        let (x_ref, f_ref) = enumerate_nnqp(&qp);
        worst = worst.max((sol.objective - f_ref).abs());
        active += x_ref.iter().filter(|&&v| v == 0.0).count();
        if check_kkt(&qp, &sol.x, cfg.kkt_tol).is_err() {
            kkt_failures += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome::new(
        worst <= 1e-6 && kkt_failures == 0 && secs < 60.0,
        format!(
            "worst objective gap {worst:.2e} (<= 1e-6), KKT failures {kkt_failures}, \
             {active} active bounds over 450 variables, {secs:.2}s (< 60s)"
        ),
    )
}

fn cwdc_feasibility() -> Outcome {
    let mut scenes = Vec::new();
    for kind in SceneKind::ALL {
        for beta in [0.4, 0.8] {
            let (spec, hazy, _) = scene(kind, 96, beta);
            scenes.push((format!("{kind:?} beta={beta}"), spec.airlight, hazy));
        }
    }
    // uniform depth: the initial map is already exact, so WDC is feasible
    let steps = make_test_scene(SceneKind::Steps, 96).unwrap();
    let flat = SceneSpec {
        depth: ScalarMap::filled(96, 96, 2.0).unwrap(),
        ..steps
    };
    scenes.push((
        "uniform depth".into(),
        flat.airlight,
        synthesize_haze(&flat).unwrap().0,
    ));

    let mut pass = true;
    let mut worst_feas = f64::INFINITY;
    let mut equivalence = Vec::new();
    for (name, airlight, hazy) in &scenes {
        let cfg = scene_config(96, *airlight);
        let w = dehaze_wdc(hazy, &cfg).unwrap();
        let c = dehaze_cwdc(hazy, &cfg).unwrap();
        let feas = min_gap(&c.transmission, &c.lower_bound);
        worst_feas = worst_feas.min(feas);
        pass &= feas >= -1e-4 && !c.diagnostics.fallback;
        if min_gap(&w.transmission, &w.lower_bound) >= -1e-4 {
            let d = max_abs_diff(w.transmission.data(), c.transmission.data());
            pass &= d <= 1e-3;
            equivalence.push(format!("{name}: {d:.1e}"));
        }
    }
    pass &= !equivalence.is_empty();
    Outcome::new(
        pass,
        format!(
            "{} scenes, worst min(t-b) {worst_feas:.1e} (>= -1e-4); WDC-feasible scenes max|t_cwdc-t_wdc| [{}] (<= 1e-3)",
            scenes.len(),
            equivalence.join(", ")
        ),
    )
}

fn round_trip() -> Outcome {
    let mut pass = true;
    // a failure is a known limitation only if every failing scene passes its
    // error and runtime bounds and misses SSIM even with the true transmission
    let mut only_unreachable_ssim = true;
    let mut unreachable = Vec::new();
    let mut lines = Vec::new();
    for kind in [SceneKind::Steps, SceneKind::Occluder, SceneKind::Gradient] {
        for beta in [0.4, 0.8] {
            let start = Instant::now();
            let (spec, hazy, t_true) = scene(kind, 96, beta);
            let cfg = scene_config(96, spec.airlight);
            let w = dehaze_wdc(&hazy, &cfg).unwrap();
            let c = dehaze_cwdc(&hazy, &cfg).unwrap();
            let secs = start.elapsed().as_secs_f64();
            let mse_w = mse(&w.transmission, &t_true).unwrap();
            let mse_c = mse(&c.transmission, &t_true).unwrap();
            let ssim_w = ssim(&w.radiance, &spec.radiance).unwrap();
            let ssim_c = ssim(&c.radiance, &spec.radiance).unwrap();
            // best achievable score: recovery with the true transmission
            let ceiling = ssim(
                &recover_radiance(&hazy, &t_true, &t_true, &spec.airlight, cfg.eps_t).unwrap(),
                &spec.radiance,
            )
            .unwrap();
            let core_ok = mse_w <= 0.02 && mse_c <= 0.015 && secs < 30.0;
            let ssim_ok = ssim_w >= 0.85 && ssim_c >= 0.85;
            pass &= core_ok && ssim_ok;
            if !ssim_ok {
                unreachable.push(format!("{kind:?} beta={beta}"));
            }
            only_unreachable_ssim &= core_ok && (ssim_ok || ceiling < 0.85);
            lines.push(format!(
                "    {kind:?} beta={beta}: mse wdc {mse_w:.4} (<= 0.02) cwdc {mse_c:.4} (<= 0.015); \
                 ssim wdc {ssim_w:.3} cwdc {ssim_c:.3} (>= 0.85; true-t ceiling {ceiling:.3}); {secs:.2}s (< 30s)"
            ));
        }
    }
    let mut out = Outcome::new(
        pass,
        format!(
            "mask radius {} at 96 px\n{}",
            scaled_radius(96),
            lines.join("\n")
        ),
    );
    if !pass && only_unreachable_ssim {
        out.known = Some(format!(
            "SSIM >= 0.85 is out of reach even with the true transmission on {}",
            unreachable.join(", ")
        ));
    }
    out
}

fn initializer_robustness() -> Outcome {
    let (size, beta) = (152, 0.3);
    let (spec, hazy, _) = scene(SceneKind::Occluder, size, beta);
    let inits = [
        ("dilation r=15", Initializer::dilation(15)),
        ("dilation r=35", Initializer::dilation(35)),
        ("opening r=25", Initializer::opening(25)),
    ];
    let runs: Vec<DehazeResult> = inits
        .iter()
        .map(|(_, init)| {
            let cfg = DehazeConfig {
                initializer: *init,
                airlight: Some(spec.airlight),
                ..DehazeConfig::default()
            };
            dehaze_wdc(&hazy, &cfg).unwrap()
        })
        .collect();
    let (mut min_init, mut max_final) = (f64::INFINITY, 0.0f64);
    let mut pairs = Vec::new();
    for (a, b) in [(0, 1), (0, 2), (1, 2)] {
        let di = mean_abs_diff(
            runs[a].initial_transmission.data(),
            runs[b].initial_transmission.data(),
        );
        let df = mean_abs_diff(runs[a].transmission.data(), runs[b].transmission.data());
        min_init = min_init.min(di);
        max_final = max_final.max(df);
        pairs.push(format!(
            "{} vs {}: initial {di:.3} final {df:.3}",
            inits[a].0, inits[b].0
        ));
    }
    Outcome::new(
        max_final <= 0.08 && min_init >= 0.16 && max_final <= 0.5 * min_init,
        format!(
            "occluder {size} px beta={beta}; {}; final <= 0.08, initial >= 0.16",
            pairs.join("; ")
        ),
    )
}

fn message_fix() -> Outcome {
    let (size, beta) = (128, 0.4);
    let (spec, hazy, t_true) = scene(SceneKind::Holes, size, beta);
    let cfg = DehazeConfig {
        airlight: Some(spec.airlight),
        ..DehazeConfig::default()
    };
    let radius = cfg.initializer.radius;
    let (hole_side, _) = hole_layout(size);
    let holes: Vec<bool> = (0..size * size)
        .map(|i| in_hole(size, i % size, i / size))
        .collect();
    let hole_pixels: Vec<PixelCoord> = (0..size * size)
        .filter(|&i| holes[i])
        .map(|i| PixelCoord::new(i % size, i / size))
        .collect();

    let base = dehaze_wdc(&hazy, &cfg).unwrap();
    let fixed = apply_messages(&hazy, &cfg, &[EwdcMessage::new(hole_pixels, None)]).unwrap();
    let before = masked_mse(&base.transmission, &t_true, &holes).unwrap();
    let after = masked_mse(&fixed.transmission, &t_true, &holes).unwrap();
    let reduction = 1.0 - after / before;

    // a constant-transmission claim over background the base run already gets right
    let block: Vec<PixelCoord> = (0..size / 8)
        .flat_map(|y| (0..size / 8).map(move |x| PixelCoord::new(x, y)))
        .collect();
    let block_err = block
        .iter()
        .map(|p| (base.transmission.get(p.x, p.y) - t_true.get(p.x, p.y)).abs())
        .sum::<f64>()
        / block.len() as f64;
    let wrong = apply_messages(&hazy, &cfg, &[EwdcMessage::new(block, None)]).unwrap();
    let shift = (wrong.transmission.mean() - base.transmission.mean()).abs();

    Outcome::new(
        hole_side < 2 * radius + 1 && reduction >= 0.5 && shift <= 0.02,
        format!(
            "holes {hole_side} px under a {}-px mask; hole mse {before:.4} -> {after:.4} \
             ({:.1}% reduction, >= 50%); wrong stroke on a block with mean |t - t_true| {block_err:.4} \
             shifts mean t by {shift:.4} (<= 0.02)",
            2 * radius + 1,
            100.0 * reduction
        ),
    )
}

fn parameter_fidelity() -> Outcome {
    let d = DehazeConfig::default();
    let defaults_ok = DEFAULT_LAMBDA == 0.02
        && DEFAULT_MASK_RADIUS == 25
        && DEFAULT_EPS_T == 0.05
        && DEFAULT_GAP_FLOOR == 1e-3
        && DEFAULT_MAX_SIDE == 640
        && d.lambda == 0.02
        && d.initializer == Initializer::dilation(25)
        && d.eps_t == 0.05
        && d.gap_floor == 1e-3
        && d.max_side == 640
        && d.mode == Mode::Wdc;

    let (spec, hazy, _) = scene(SceneKind::Occluder, 96, 0.4);
    let cfg = DehazeConfig {
        lambda: 0.0,
        ..scene_config(96, spec.airlight)
    };
    let out = dehaze_wdc(&hazy, &cfg).unwrap();
    let dev = max_abs_diff(out.transmission.data(), out.initial_transmission.data());
    Outcome::new(
        defaults_ok && dev <= cfg.solver.cg_tol,
        format!(
            "lambda={} radius={} eps_t={} gap_floor={} max_side={}; lambda=0 gives max|t - t_init| {dev:.1e} (<= {:.0e})",
            d.lambda, d.initializer.radius, d.eps_t, d.gap_floor, d.max_side, cfg.solver.cg_tol
        ),
    )
}

fn gradient_checks() -> Outcome {
    let mut rng = rng(8);
    let mut worst_grad: f64 = 0.0;
    let mut worst_null: f64 = 0.0;
    let mut worst_quad: f64 = 0.0;
    for _ in 0..20 {
        let (w, h) = (rng.random_range(2..=6), rng.random_range(2..=6));
        let n = w * h;
        let img = random_image(&mut rng, w, h, 0.3);
        let l = build_laplacian(&img, DEFAULT_COLOR_FLOOR).unwrap();
        let weights =
            ScalarMap::new(w, h, (0..n).map(|_| rng.random_range(0.1..3.0)).collect()).unwrap();
        let t_init =
            ScalarMap::new(w, h, (0..n).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();
        let b = ScalarMap::new(w, h, (0..n).map(|_| rng.random_range(0.0..0.5)).collect()).unwrap();
        let lambda = rng.random_range(0.001..0.1);
        let qp = assemble_cwdc_qp(&weights, &t_init, &b, &l, lambda).unwrap();

        // energy of t = x + b, differentiated numerically in x
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..0.5)).collect();
        let energy = |x: &[f64]| {
            let t: Vec<f64> = x.iter().zip(b.data()).map(|(x, b)| x + b).collect();
            refinement_energy(&weights, &t_init, &l, lambda, &t)
        };
        let g = qp.gradient(&x);
        let step = 1e-5;
        let fd: Vec<f64> = (0..n)
            .map(|i| {
                let (mut p, mut m) = (x.clone(), x.clone());
                p[i] += step;
                m[i] -= step;
                (energy(&p) - energy(&m)) / (2.0 * step)
            })
            .collect();
        worst_grad = worst_grad.max(rel_err(&fd, &g));

        let ones = vec![1.0; n];
        worst_null = worst_null.max(l.mul_vec(&ones).iter().fold(0.0f64, |m, v| m.max(v.abs())));

        let t: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let pairwise = pairwise_smoothness(&img, &t, DEFAULT_COLOR_FLOOR);
        worst_quad = worst_quad
            .max((l.quad_form(&t) - pairwise).abs() / pairwise.abs().max(f64::MIN_POSITIVE));
    }
    Outcome::new(
        worst_grad <= 1e-6 && worst_null <= 1e-12 && worst_quad <= 1e-10,
        format!(
            "gradient vs finite differences {worst_grad:.1e} (<= 1e-6); |L 1|_inf {worst_null:.1e} (<= 1e-12); \
             t'Lt vs pairwise sum {worst_quad:.1e} (<= 1e-10); 20 instances"
        ),
    )
}

fn runtime() -> Outcome {
    let (w, h) = (640, 480);
    let spec = make_test_scene(SceneKind::Steps, w).unwrap();
    let (full, _) = synthesize_haze(&spec).unwrap();
    let hazy = ImageRgb::new(w, h, full.data()[..w * h * 3].to_vec()).unwrap();
    let cfg = DehazeConfig::default();
    let timed = |f: &dyn Fn() -> DehazeResult| {
        let start = Instant::now();
        let r = f();
        (start.elapsed(), r)
    };
    let (t_wdc, _) = timed(&|| dehaze_wdc(&hazy, &cfg).unwrap());
    let (t_cwdc, c) = timed(&|| dehaze_cwdc(&hazy, &cfg).unwrap());
    let secs = |d: Duration| d.as_secs_f64();
    Outcome::new(
        secs(t_wdc) < 10.0 && secs(t_cwdc) < 120.0 && t_cwdc > t_wdc && !c.diagnostics.fallback,
        format!(
            "640x480: WDC {:.2}s (< 10s), CWDC {:.2}s (< 120s), CWDC slower: {}",
            secs(t_wdc),
            secs(t_cwdc),
            t_cwdc > t_wdc
        ),
    )
}

type Criterion = (u32, &'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        (1, "linear solve matches dense oracle", linear_oracle),
        (
            2,
            "non-negative QP matches active-set enumeration",
            qp_oracle,
        ),
        (3, "CWDC feasibility and equivalence", cwdc_feasibility),
        (4, "round-trip transmission recovery", round_trip),
        (5, "initializer robustness", initializer_robustness),
        (6, "message fixes isolated background", message_fix),
        (7, "parameter fidelity", parameter_fidelity),
        (8, "gradient and conservation checks", gradient_checks),
        (9, "runtime sanity", runtime),
    ];
    let mut unexpected = 0;
    for (n, title, run) in criteria {
        let start = Instant::now();
        let out = run();
        let secs = start.elapsed().as_secs_f64();
        let status = match (&out.pass, &out.known) {
            (true, _) => "PASS".to_string(),
            (false, Some(why)) => format!("FAIL (known limitation: {why})"),
            (false, None) => {
                unexpected += 1;
                "FAIL".to_string()
            }
        };
        let mut detail = out.detail.lines();
        println!(
            "criterion {n} {status}: {title}: {} [{secs:.1}s]",
            detail.next().unwrap_or("")
        );
        for line in detail {
            println!("{line}");
        }
    }
    if unexpected > 0 {
        eprintln!("{unexpected} criterion(s) failed");
        std::process::exit(1);
    }
}
