//! Simulate a moving bar and look at the events one pixel emits.
//!
//! cargo run --example simulate_scene [out.evt]

use evsr::dvs_sim::{simulate, IntensityScene, SceneKind, SimConfig};
use evsr::Polarity;

fn main() -> evsr::Result<()> {
    let kind = SceneKind::MovingBar {
        speed: 128.0,
        bar_width: 6.0,
        contrast: 1.0,
    };
    let scene = IntensityScene::new(kind, 64, 64, 200_000)?;
    let stream = simulate(&scene, &SimConfig::default(), 0)?;
    let on = stream
        .events()
        .iter()
        .filter(|e| e.p == Polarity::On)
        .count();
    println!(
        "{} events ({on} ON, {} OFF)",
        stream.len(),
        stream.len() - on
    );

    // the bar passes pixel (20, 32): a burst of ON events, then OFF
    for e in stream.events().iter().filter(|e| e.x == 20 && e.y == 32) {
        println!("  t = {:>6} µs  {:?}", e.t, e.p);
    }

    if let Some(path) = std::env::args().nth(1) {
        std::fs::write(&path, stream.to_text())?;
        println!("wrote {path}");
    }
    Ok(())
}
