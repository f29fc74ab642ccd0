//! Super-resolve a downsampled recording and score it against the original
//! and against the nearest-neighbour baseline.
//!
//! cargo run --release --example super_resolve

use evsr::corpus::{evaluation_corpus, train_synthetic_dictionary};
use evsr::dvs_sim::SimConfig;
use evsr::metrics::{dfrf, rmse_psth};
use evsr::pipeline::{baseline_super_resolve, run_pipeline, CountUpscaler, TimeModel};
use evsr::SrConfig;

fn main() -> evsr::Result<()> {
    let dict = train_synthetic_dictionary(2, 32, 32, 200_000, 24, 0)?;
    let cfg = SrConfig::default();
    println!("{cfg}");
    for rec in evaluation_corpus(64, 64, 200_000, &SimConfig::default())? {
        let lr = rec.stream.downsample_spatial(2)?;
        let run = run_pipeline(&lr, CountUpscaler::Sparse(&dict), TimeModel::Filtered, &cfg)?;
        let base = baseline_super_resolve(&lr, &cfg)?;
        let fallback: usize = run.windows.iter().map(|w| w.fallback_pixels).sum();
        println!(
            "{:<12} lr {:>6} -> hr {:>6} events  RMSE {:.4} (baseline {:.4})  DFRF {:.1}%  fallback pixels {fallback}",
            rec.name,
            lr.len(),
            run.stream.len(),
            rmse_psth(&run.stream, &rec.stream, cfg.metric_bin)?,
            rmse_psth(&base, &rec.stream, cfg.metric_bin)?,
            dfrf(&run.stream, &lr, cfg.metric_bin)?
        );
    }
    Ok(())
}
