//! Write every intermediate map of one run: lower bound, initial estimate,
//! weights, dark-pixel mask, refined transmission and radiance.

use std::path::PathBuf;

use wdc::{dehaze, make_test_scene, save_image, synthesize_haze, DehazeConfig, SceneKind};

fn main() -> wdc::Result<()> {
    let out = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "target/example-out/intermediates".into()),
    );
    std::fs::create_dir_all(&out).map_err(|source| wdc::DehazeError::Io {
        path: out.clone(),
        source,
    })?;

    let spec = make_test_scene(SceneKind::Occluder, 200)?;
    let (hazy, _) = synthesize_haze(&spec)?;
    let r = dehaze(&hazy, &DehazeConfig::default())?;

    save_image(&r.hazy, out.join("hazy.png"))?;
    r.lower_bound.save_png16(out.join("lower_bound.png"))?;
    r.initial_transmission
        .save_png16(out.join("initial_transmission.png"))?;
    // weights span several decades, so store them rescaled to their maximum
    let wmax = r.weights.max();
    r.weights
        .map(|w| w / wmax)
        .save_png16(out.join("weights.png"))?;
    r.dark_pixels(1e-9)
        .save_png16(out.join("dark_pixels.png"))?;
    r.transmission.save_png16(out.join("transmission.png"))?;
    save_image(&r.radiance, out.join("radiance.png"))?;

    println!("dark pixels: {}", r.dark_pixels(1e-9).count());
    println!("weights: mean {:.3}, max {:.1}", r.weights.mean(), wmax);
    println!("wrote {}", out.display());
    Ok(())
}
