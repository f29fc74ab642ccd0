//! Count maps, block sums and the overlapping patch grid.
//!
//! cargo run --example count_maps [out.pgm]

use evsr::count_map::{assemble_patches, build_count_map, extract_patches, patch_offsets};
use evsr::dvs_sim::{simulate, IntensityScene, SceneKind, SimConfig};
use evsr::{Polarity, TimeWindow};

fn main() -> evsr::Result<()> {
    let kind = SceneKind::MovingDisk {
        speed: 100.0,
        radius: 6.0,
        contrast: 1.5,
    };
    let scene = IntensityScene::new(kind, 32, 32, 200_000)?;
    let stream = simulate(&scene, &SimConfig::default(), 0)?;
    let map = build_count_map(&stream, TimeWindow::new(50_000, 150_000)?, Polarity::On);
    println!(
        "ON counts in [50, 150) ms: total {}, max {}",
        map.total(),
        map.max()
    );

    let lr = map.block_sum(2)?;
    assert_eq!(lr.total(), map.total());
    println!("2x block sum: {}x{}", lr.width(), lr.height());

    println!(
        "3x3 patches with overlap 1 over 16 columns start at {:?}",
        patch_offsets(16, 3, 1)?
    );
    let grid = extract_patches(&lr, 3, 1)?;
    let back = assemble_patches(&grid, lr.width(), lr.height(), lr.polarity())?;
    assert_eq!(back, lr);
    println!("{} patches reassemble to the same map", grid.patches.len());

    if let Some(path) = std::env::args().nth(1) {
        std::fs::write(&path, map.to_pgm())?;
        println!("wrote {path}");
    }
    Ok(())
}
