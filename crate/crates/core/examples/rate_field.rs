//! Per-pixel PSTHs and the kernel-filtered rate a high-resolution pixel
//! inherits from its low-resolution neighbourhood.

use evsr::dvs_sim::{simulate, IntensityScene, SceneKind, SimConfig};
use evsr::rate_field::{build_psth, build_rate_field, default_kernel, hr_rate_function, Kernel};
use evsr::Polarity;

fn main() -> evsr::Result<()> {
    let psth = build_psth(&[5, 15, 15, 35], 40, 10)?;
    println!("PSTH of [5, 15, 15, 35] in 10 µs bins: {:?}", psth.values());

    let kind = SceneKind::MovingBar {
        speed: 60.0,
        bar_width: 3.0,
        contrast: 1.0,
    };
    let scene = IntensityScene::new(kind, 16, 16, 200_000)?;
    let lr = simulate(&scene, &SimConfig::default(), 0)?;
    let field = build_rate_field(&lr, Polarity::On, 5_000)?;
    println!(
        "{} of {} pixels active, {} bins",
        field.active_pixels(),
        16 * 16,
        field.n_bins()
    );

    let kernel = default_kernel();
    println!("default kernel {:?}", kernel.weights());
    let rate = hr_rate_function(&field, 15, 16, 2, &kernel)?;
    let peak = rate.values().iter().copied().fold(0.0, f64::max);
    let at = rate.values().iter().position(|&v| v == peak).unwrap_or(0);
    println!("high-resolution pixel (15, 16): peak {peak:.3} in bin {at}");

    let sharp = Kernel::parse("0,0,0,0,1,0,0,0,0")?;
    assert_eq!(sharp, Kernel::nearest());
    let own = hr_rate_function(&field, 15, 16, 2, &sharp)?;
    println!("with the nearest kernel: peak {:.3}", own.max());
    Ok(())
}
