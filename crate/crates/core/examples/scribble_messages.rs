//! Fix an isolated background with a stroke message.
//!
//! Small holes in a foreground layer are invisible to a large mask, so the
//! initial estimate copies the foreground transmission into them. A stroke
//! over the holes resets their estimate to the largest lower bound under the
//! stroke and the refinement spreads the correction.

use wdc::metrics::masked_mse;
use wdc::synth::in_hole;
use wdc::{
    apply_messages, dehaze, make_test_scene, synthesize_haze, DehazeConfig, EwdcMessage,
    MessageFile, PixelCoord, SceneKind,
};

fn main() -> wdc::Result<()> {
    let size = 128;
    let spec = make_test_scene(SceneKind::Holes, size)?;
    let (hazy, t_true) = synthesize_haze(&spec)?;
    let cfg = DehazeConfig {
        airlight: Some(spec.airlight),
        ..Default::default()
    };

    let holes: Vec<bool> = (0..size * size)
        .map(|i| in_hole(size, i % size, i / size))
        .collect();
    let stroke: Vec<PixelCoord> = (0..size * size)
        .filter(|&i| holes[i])
        .map(|i| PixelCoord::new(i % size, i / size))
        .collect();
    let messages = vec![EwdcMessage::new(stroke, None)];

    let before = dehaze(&hazy, &cfg)?;
    let after = apply_messages(&hazy, &cfg, &messages)?;
    println!(
        "message target t_s = {:.3}",
        messages[0].resolve_target(&before.lower_bound)?
    );
    println!(
        "hole mse before {:.4}",
        masked_mse(&before.transmission, &t_true, &holes)?
    );
    println!(
        "hole mse after  {:.4}",
        masked_mse(&after.transmission, &t_true, &holes)?
    );

    let path = std::env::temp_dir().join("wdc-messages.json");
    MessageFile { messages }.save(&path)?;
    println!("message file written to {}", path.display());
    Ok(())
}
