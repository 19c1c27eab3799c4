//! Derive messages automatically by clustering pixels in RGB space and
//! apply them all at once.

use wdc::{
    apply_messages, cluster_messages, dehaze, make_test_scene, mse, synthesize_haze, DehazeConfig,
    SceneKind,
};

fn main() -> wdc::Result<()> {
    let spec = make_test_scene(SceneKind::Steps, 128)?.with_beta(0.6);
    let (hazy, t_true) = synthesize_haze(&spec)?;
    let cfg = DehazeConfig {
        airlight: Some(spec.airlight),
        ..Default::default()
    };

    let plain = dehaze(&hazy, &cfg)?;
    let messages = cluster_messages(&plain.hazy, &plain.lower_bound, 0.005)?;
    println!("{} clusters", messages.len());
    for m in messages.iter().take(5) {
        println!(
            "  {:>5} pixels, t_s = {:.3}",
            m.pixels.len(),
            m.resolve_target(&plain.lower_bound)?
        );
    }
    let clustered = apply_messages(&hazy, &cfg, &messages)?;
    println!("mse(t) plain {:.4}", mse(&plain.transmission, &t_true)?);
    println!(
        "mse(t) with clusters {:.4}",
        mse(&clustered.transmission, &t_true)?
    );
    Ok(())
}
