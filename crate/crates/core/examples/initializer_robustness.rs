//! Run the refinement from three different initial estimates and show that
//! the refined maps agree far better than the initial ones.

use wdc::{
    dehaze, make_test_scene, synthesize_haze, DehazeConfig, Initializer, ScalarMap, SceneKind,
};

fn mean_abs(a: &ScalarMap, b: &ScalarMap) -> f64 {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).abs())
        .sum::<f64>()
        / a.len() as f64
}

fn main() -> wdc::Result<()> {
    let spec = make_test_scene(SceneKind::Occluder, 152)?.with_beta(0.3);
    let (hazy, _) = synthesize_haze(&spec)?;
    let inits = [
        ("dilation r=15", Initializer::dilation(15)),
        ("dilation r=35", Initializer::dilation(35)),
        ("opening r=25", Initializer::opening(25)),
    ];
    let runs = inits
        .iter()
        .map(|(_, init)| {
            let cfg = DehazeConfig {
                initializer: *init,
                airlight: Some(spec.airlight),
                ..Default::default()
            };
            dehaze(&hazy, &cfg)
        })
        .collect::<wdc::Result<Vec<_>>>()?;

    for i in 0..runs.len() {
        for j in i + 1..runs.len() {
            println!(
                "{} vs {}: initial {:.3}, refined {:.3}",
                inits[i].0,
                inits[j].0,
                mean_abs(&runs[i].initial_transmission, &runs[j].initial_transmission),
                mean_abs(&runs[i].transmission, &runs[j].transmission)
            );
        }
    }
    Ok(())
}
