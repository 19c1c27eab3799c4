//! Synthesize haze over the bundled test scenes, dehaze with the true
//! air-light and score the result against the ground truth.

use wdc::transmission::scaled_radius;
use wdc::{
    dehaze, make_test_scene, mse, ssim, synthesize_haze, DehazeConfig, Initializer, Mode, SceneKind,
};

fn main() -> wdc::Result<()> {
    let size = 96;
    println!(
        "{:<9} {:>4} {:>5} {:>10} {:>10}",
        "scene", "beta", "mode", "mse(t)", "ssim(J)"
    );
    for kind in SceneKind::ALL {
        for beta in [0.4, 0.8] {
            let spec = make_test_scene(kind, size)?.with_beta(beta);
            let (hazy, t_true) = synthesize_haze(&spec)?;
            for mode in [Mode::Wdc, Mode::Cwdc] {
                let cfg = DehazeConfig {
                    mode,
                    initializer: Initializer::dilation(scaled_radius(size)),
                    airlight: Some(spec.airlight),
                    ..Default::default()
                };
                let out = dehaze(&hazy, &cfg)?;
                println!(
                    "{:<9} {:>4} {:>5} {:>10.4} {:>10.3}",
                    format!("{kind:?}"),
                    beta,
                    format!("{mode:?}"),
                    mse(&out.transmission, &t_true)?,
                    ssim(&out.radiance, &spec.radiance)?
                );
            }
        }
    }
    Ok(())
}
