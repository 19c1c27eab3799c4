//! Dehaze an image file with the default settings.
//!
//! ```text
//! cargo run --release --example dehaze_image -- hazy.png out/
//! ```
//!
//! Without arguments a synthetic hazy scene is generated and processed.

use std::path::PathBuf;

use wdc::{
    dehaze, load_image, make_test_scene, save_image, synthesize_haze, DehazeConfig, SceneKind,
};

fn main() -> wdc::Result<()> {
    let mut args = std::env::args().skip(1);
    let hazy = match args.next() {
        Some(path) => load_image(path)?,
        None => synthesize_haze(&make_test_scene(SceneKind::Steps, 256)?)?.0,
    };
    let out_dir = PathBuf::from(args.next().unwrap_or_else(|| "target/example-out".into()));
    std::fs::create_dir_all(&out_dir).map_err(|source| wdc::DehazeError::Io {
        path: out_dir.clone(),
        source,
    })?;

    let result = dehaze(&hazy, &DehazeConfig::default())?;
    let d = &result.diagnostics;
    println!(
        "air-light {:?} (estimated: {})",
        result.airlight.rgb(),
        d.airlight_estimated
    );
    println!(
        "conjugate gradient: {} iterations, residual {:.1e}",
        d.cg_iterations,
        d.cg_relative_residual.unwrap_or(0.0)
    );
    println!(
        "transmission range [{:.3}, {:.3}]",
        result.transmission.min(),
        result.transmission.max()
    );

    save_image(&result.hazy, out_dir.join("hazy.png"))?;
    save_image(&result.radiance, out_dir.join("dehazed.png"))?;
    result
        .transmission
        .save_png16(out_dir.join("transmission.png"))?;
    println!("wrote {}", out_dir.display());
    Ok(())
}
