//! Weighted dark channel single-image dehazing.
//!
//! The crate estimates a transmission map from a hazy RGB image by combining
//! a per-pixel lower bound with an edge-aware graph regularizer, then inverts
//! the haze model `I = t J + (1 - t) A` to recover the scene radiance.
//!
//! ```no_run
//! use wdc::{dehaze, load_image, save_image, DehazeConfig};
//!
//! let hazy = load_image("hazy.png")?;
//! let out = dehaze(&hazy, &DehazeConfig::default())?;
//! save_image(&out.radiance, "clear.png")?;
//! out.transmission.save_png16("t.png")?;
//! # Ok::<(), wdc::DehazeError>(())
//! ```

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod airlight;
pub mod dehaze;
pub mod error;
pub mod graph;
pub mod image;
pub mod messages;
pub mod metrics;
pub mod morphology;
pub mod solver;
pub mod synth;
pub mod transmission;

pub use airlight::{dark_channel, estimate_airlight};
pub use dehaze::{
    apply_messages, apply_messages_traced, dehaze, dehaze_cwdc, dehaze_traced, dehaze_wdc,
    recover_radiance, DehazeConfig, DehazeResult, Diagnostics, Mode, QpStats,
};
pub use error::{DehazeError, Result, SolverError};
pub use graph::{build_laplacian, SparseQuadratic, SparseSymmetric};
pub use image::{
    decode_max_side, load_image, resize_max_side, save_image, AirLight, ImageRgb, Mask, PixelCoord,
    ScalarMap,
};
pub use messages::{cluster_messages, EwdcMessage, MessageFile};
pub use metrics::{mse, ssim};
pub use solver::{solve_nnqp, solve_spd, QpSolution, SolverConfig, SpdSolution, Trace};
pub use synth::{make_test_scene, synthesize_haze, SceneKind, SceneSpec};
pub use transmission::{InitKind, Initializer};
