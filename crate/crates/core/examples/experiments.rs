//! The evaluation experiments on one recording: rate-bin sweep, seed
//! robustness and magnification.
//!
//! cargo run --release --example experiments

use evsr::corpus::{evaluation_corpus, train_synthetic_dictionary};
use evsr::dvs_sim::SimConfig;
use evsr::pipeline::{experiment_bin_sweep, experiment_magnification, experiment_robustness};
use evsr::SrConfig;

fn main() -> evsr::Result<()> {
    let sim = SimConfig::default();
    let gt = evaluation_corpus(64, 64, 200_000, &sim)?.remove(0).stream;
    let dict = train_synthetic_dictionary(2, 32, 32, 200_000, 24, 0)?;
    let cfg = SrConfig::default();

    println!("rate bin sweep (RMSE against ground truth):");
    for (bin, rmse) in experiment_bin_sweep(&gt, &dict, &cfg, &[20, 1_000, 10_000, 80_000])? {
        println!("  {bin:>6} µs  {rmse:.4}");
    }

    let seeds: Vec<u64> = (0..5).collect();
    let r = experiment_robustness(&gt, &dict, &cfg, &seeds)?;
    println!(
        "robustness over {} seeds: mean {:.4}, std {:.5}, range [{:.4}, {:.4}]",
        r.seeds.len(),
        r.mean,
        r.std,
        r.min,
        r.max
    );

    // magnify the full-resolution recording itself
    let dict3 = train_synthetic_dictionary(3, 32, 32, 200_000, 12, 0)?;
    let out = experiment_magnification(&gt, &dict3, &SrConfig { factor: 3, ..cfg })?;
    print!("x3 magnification:\n{}", out.report.to_key_value());
    Ok(())
}
