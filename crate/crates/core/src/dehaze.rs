//! End-to-end weighted dark channel dehazing.
//!
//! The pipeline resizes the input, fixes the air-light (given or estimated),
//! computes the lower bound `b`, the initial transmission and its weight map,
//! refines the transmission either with one linear solve (WDC) or as a
//! non-negative QP in `t - b` (CWDC), and finally inverts the haze model.

use serde::{Deserialize, Serialize};

use crate::airlight::{estimate_airlight, DEFAULT_TOP_FRACTION};
use crate::error::{DehazeError, Result};
use crate::graph::{
    assemble_cwdc_qp, assemble_wdc_system, build_laplacian, SparseSymmetric, DEFAULT_COLOR_FLOOR,
    DEFAULT_LAMBDA,
};
use crate::image::{resize_max_side, AirLight, ImageRgb, Mask, ScalarMap};
use crate::messages::EwdcMessage;
use crate::solver::{solve_nnqp_traced, solve_spd_traced, SolverConfig, Trace};
use crate::transmission::{
    dark_pixel_mask, initial_transmission, lower_bound, weight_map, Initializer, DEFAULT_GAP_FLOOR,
};

/// Transmission compensation in the radiance recovery.
pub const DEFAULT_EPS_T: f64 = 0.05;

/// Inputs are downscaled so their longer side is at most this many pixels.
pub const DEFAULT_MAX_SIDE: usize = 640;

/// Denominator floor of the recovery when `eps_t = 0` and `t = b = 0`.
const RECOVERY_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Unconstrained linear refinement.
    #[default]
    Wdc,
    /// Refinement with `t >= b` enforced exactly.
    Cwdc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DehazeConfig {
    pub initializer: Initializer,
    pub lambda: f64,
    pub eps_t: f64,
    pub gap_floor: f64,
    pub color_floor: f64,
    pub mode: Mode,
    /// Fixed air-light; estimated from the image when absent.
    pub airlight: Option<AirLight>,
    pub airlight_top_fraction: f64,
    pub max_side: usize,
    pub solver: SolverConfig,
}

impl Default for DehazeConfig {
    fn default() -> Self {
        Self {
            initializer: Initializer::default(),
            lambda: DEFAULT_LAMBDA,
            eps_t: DEFAULT_EPS_T,
            gap_floor: DEFAULT_GAP_FLOOR,
            color_floor: DEFAULT_COLOR_FLOOR,
            mode: Mode::Wdc,
            airlight: None,
            airlight_top_fraction: DEFAULT_TOP_FRACTION,
            max_side: DEFAULT_MAX_SIDE,
            solver: SolverConfig::default(),
        }
    }
}

fn invalid(name: &'static str, reason: String) -> DehazeError {
    DehazeError::InvalidParameter { name, reason }
}

impl DehazeConfig {
    pub fn validate(&self) -> Result<()> {
        self.initializer.validate()?;
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(invalid(
                "lambda",
                format!("must be finite and >= 0, got {}", self.lambda),
            ));
        }
        if !(self.eps_t >= 0.0 && self.eps_t.is_finite()) {
            return Err(invalid(
                "eps_t",
                format!("must be finite and >= 0, got {}", self.eps_t),
            ));
        }
        if !(self.gap_floor > 0.0) {
            return Err(invalid(
                "gap_floor",
                format!("must be > 0, got {}", self.gap_floor),
            ));
        }
        if !(self.color_floor > 0.0) {
            return Err(invalid(
                "color_floor",
                format!("must be > 0, got {}", self.color_floor),
            ));
        }
        if !(self.airlight_top_fraction > 0.0 && self.airlight_top_fraction <= 1.0) {
            return Err(invalid(
                "airlight_top_fraction",
                format!("must lie in (0, 1], got {}", self.airlight_top_fraction),
            ));
        }
        if self.max_side == 0 {
            return Err(invalid("max_side", "must be at least 1".into()));
        }
        self.solver.validate().map_err(|r| invalid("solver", r))
    }
}

/// Solver statistics of the constrained refinement.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QpStats {
    pub objective: f64,
    pub kkt_residual: f64,
    pub outer_iters: usize,
    pub inner_iters: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Diagnostics {
    pub mode: Mode,
    pub airlight_estimated: bool,
    /// Iterations of the unconstrained solve (WDC, or the CWDC fallback).
    pub cg_iterations: usize,
    pub cg_relative_residual: Option<f64>,
    pub qp: Option<QpStats>,
    /// CWDC failed and the clamped WDC solution was used instead.
    pub fallback: bool,
    pub messages_applied: usize,
    pub warnings: Vec<String>,
}

/// Everything the pipeline computed, on the (possibly resized) input frame.
#[derive(Clone, Debug, PartialEq)]
pub struct DehazeResult {
    /// The hazy input after resizing.
    pub hazy: ImageRgb,
    pub radiance: ImageRgb,
    pub transmission: ScalarMap,
    pub lower_bound: ScalarMap,
    pub initial_transmission: ScalarMap,
    pub weights: ScalarMap,
    pub airlight: AirLight,
    pub diagnostics: Diagnostics,
}

impl DehazeResult {
    /// Pixels whose initial estimate sits on their lower bound.
    pub fn dark_pixels(&self, tol: f64) -> Mask {
        dark_pixel_mask(&self.initial_transmission, &self.lower_bound, tol)
            .expect("maps share dimensions")
    }
}

/// `J = (I - A) / ((max(t, b) + eps_t) / (1 + eps_t)) + A`, clamped to `[0, 1]`.
pub fn recover_radiance(
    img: &ImageRgb,
    t: &ScalarMap,
    b: &ScalarMap,
    airlight: &AirLight,
    eps_t: f64,
) -> Result<ImageRgb> {
    t.ensure_same_dims(img.dims())?;
    b.ensure_same_dims(img.dims())?;
    if !(eps_t >= 0.0) {
        return Err(invalid("eps_t", format!("must be >= 0, got {eps_t}")));
    }
    let a = airlight.rgb();
    let mut data = Vec::with_capacity(img.len() * 3);
    for (i, p) in img.pixels().enumerate() {
        let denom = ((t.data()[i].max(b.data()[i]) + eps_t) / (1.0 + eps_t)).max(RECOVERY_FLOOR);
        for c in 0..3 {
            data.push((p[c] - a[c]) / denom + a[c]);
        }
    }
    ImageRgb::new(img.width(), img.height(), data)
}

/// Intermediate state shared by plain and message-driven runs.
struct Prepared {
    img: ImageRgb,
    airlight: AirLight,
    airlight_estimated: bool,
    b: ScalarMap,
    t_init: ScalarMap,
}

fn prepare(img: &ImageRgb, cfg: &DehazeConfig) -> Result<Prepared> {
    cfg.validate()?;
    let img = resize_max_side(img, cfg.max_side);
    let (airlight, airlight_estimated) = match cfg.airlight {
        Some(a) => (a, false),
        None => (
            estimate_airlight(&img, cfg.initializer.radius, cfg.airlight_top_fraction)?,
            true,
        ),
    };
    let b = lower_bound(&img, &airlight);
    let t_init = initial_transmission(&b, &cfg.initializer)?;
    Ok(Prepared {
        img,
        airlight,
        airlight_estimated,
        b,
        t_init,
    })
}

struct Refined {
    t: ScalarMap,
    cg_iterations: usize,
    cg_relative_residual: Option<f64>,
    qp: Option<QpStats>,
    fallback: bool,
    warnings: Vec<String>,
}

fn solve_wdc(
    weights: &ScalarMap,
    t_init: &ScalarMap,
    laplacian: &SparseSymmetric,
    cfg: &DehazeConfig,
    trace: &mut Trace,
) -> Result<(Vec<f64>, usize, f64)> {
    let (m, r) = assemble_wdc_system(weights, t_init, laplacian, cfg.lambda)?;
    let sol = solve_spd_traced(&m, &r, &cfg.solver, trace)?;
    Ok((sol.x, sol.iterations, sol.relative_residual))
}

fn refine(
    prep: &Prepared,
    t_init: &ScalarMap,
    weights: &ScalarMap,
    cfg: &DehazeConfig,
    trace: &mut Trace,
) -> Result<Refined> {
    let (w, h) = prep.img.dims();
    let laplacian = build_laplacian(&prep.img, cfg.color_floor)?;
    match cfg.mode {
        Mode::Wdc => {
            let (t, iters, res) = solve_wdc(weights, t_init, &laplacian, cfg, trace)?;
            Ok(Refined {
                t: ScalarMap::clamped(w, h, t)?,
                cg_iterations: iters,
                cg_relative_residual: Some(res),
                qp: None,
                fallback: false,
                warnings: Vec::new(),
            })
        }
        Mode::Cwdc => {
            let qp = assemble_cwdc_qp(weights, t_init, &prep.b, &laplacian, cfg.lambda)?;
            match solve_nnqp_traced(&qp, &cfg.solver, trace) {
                Ok(sol) => {
                    let t = sol
                        .x
                        .iter()
                        .zip(prep.b.data())
                        .map(|(x, b)| x + b)
                        .collect();
                    Ok(Refined {
                        t: ScalarMap::clamped(w, h, t)?,
                        cg_iterations: 0,
                        cg_relative_residual: None,
                        qp: Some(QpStats {
                            objective: sol.objective,
                            kkt_residual: sol.kkt_residual,
                            outer_iters: sol.outer_iters,
                            inner_iters: sol.inner_iters,
                        }),
                        fallback: false,
                        warnings: Vec::new(),
                    })
                }
                Err(err) => {
                    let warning =
                        format!("constrained solve failed ({err}); using clamped WDC estimate");
                    let (t, iters, res) = solve_wdc(weights, t_init, &laplacian, cfg, trace)?;
                    let t = t
                        .iter()
                        .zip(prep.b.data())
                        .map(|(t, b)| t.max(*b))
                        .collect();
                    Ok(Refined {
                        t: ScalarMap::clamped(w, h, t)?,
                        cg_iterations: iters,
                        cg_relative_residual: Some(res),
                        qp: None,
                        fallback: true,
                        warnings: vec![warning],
                    })
                }
            }
        }
    }
}

fn finish(
    prep: Prepared,
    t_init: ScalarMap,
    cfg: &DehazeConfig,
    messages_applied: usize,
    trace: &mut Trace,
) -> Result<DehazeResult> {
    let weights = weight_map(&t_init, &prep.b, cfg.gap_floor)?;
    let refined = refine(&prep, &t_init, &weights, cfg, trace)?;
    let radiance = recover_radiance(&prep.img, &refined.t, &prep.b, &prep.airlight, cfg.eps_t)?;
    Ok(DehazeResult {
        radiance,
        transmission: refined.t,
        lower_bound: prep.b,
        initial_transmission: t_init,
        weights,
        airlight: prep.airlight,
        hazy: prep.img,
        diagnostics: Diagnostics {
            mode: cfg.mode,
            airlight_estimated: prep.airlight_estimated,
            cg_iterations: refined.cg_iterations,
            cg_relative_residual: refined.cg_relative_residual,
            qp: refined.qp,
            fallback: refined.fallback,
            messages_applied,
            warnings: refined.warnings,
        },
    })
}

/// Runs the pipeline in the mode selected by `cfg.mode`.
pub fn dehaze(img: &ImageRgb, cfg: &DehazeConfig) -> Result<DehazeResult> {
    dehaze_traced(img, cfg, &mut Trace::disabled())
}

pub fn dehaze_traced(
    img: &ImageRgb,
    cfg: &DehazeConfig,
    trace: &mut Trace,
) -> Result<DehazeResult> {
    let prep = prepare(img, cfg)?;
    let t_init = prep.t_init.clone();
    finish(prep, t_init, cfg, 0, trace)
}

/// Weighted dark channel dehazing with the unconstrained refinement.
pub fn dehaze_wdc(img: &ImageRgb, cfg: &DehazeConfig) -> Result<DehazeResult> {
    let cfg = DehazeConfig {
        mode: Mode::Wdc,
        ..cfg.clone()
    };
    dehaze(img, &cfg)
}

/// Weighted dark channel dehazing with `t >= b` enforced by the QP solver.
pub fn dehaze_cwdc(img: &ImageRgb, cfg: &DehazeConfig) -> Result<DehazeResult> {
    let cfg = DehazeConfig {
        mode: Mode::Cwdc,
        ..cfg.clone()
    };
    dehaze(img, &cfg)
}

/// Re-runs the refinement after overriding the initial transmission with
/// external messages.
///
/// Messages are applied in order, so later messages win where pixel sets
/// overlap. The weight map is recomputed once from the edited initial
/// transmission; the lower bound is left untouched.
pub fn apply_messages(
    img: &ImageRgb,
    cfg: &DehazeConfig,
    messages: &[EwdcMessage],
) -> Result<DehazeResult> {
    apply_messages_traced(img, cfg, messages, &mut Trace::disabled())
}

pub fn apply_messages_traced(
    img: &ImageRgb,
    cfg: &DehazeConfig,
    messages: &[EwdcMessage],
    trace: &mut Trace,
) -> Result<DehazeResult> {
    let prep = prepare(img, cfg)?;
    let mut t_init = prep.t_init.clone();
    for message in messages {
        let target = message.resolve_target(&prep.b)?;
        let width = t_init.width();
        let data = t_init.data_mut();
        for p in &message.pixels {
            data[p.index(width)] = target;
        }
    }
    finish(prep, t_init, cfg, messages.len(), trace)
}
