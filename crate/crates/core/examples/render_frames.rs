//! Write grey-level frames and total-rate curves for a super-resolved
//! recording.
//!
//! cargo run --release --example render_frames [out_dir]

use std::fs;
use std::path::PathBuf;

use evsr::corpus::{dense_corpus, train_synthetic_dictionary};
use evsr::dvs_sim::SimConfig;
use evsr::metrics::{rate_curves_csv, reconstruct_frame};
use evsr::pipeline::window_bounds;
use evsr::{super_resolve, SrConfig};

fn main() -> evsr::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "frames".into()));
    fs::create_dir_all(&out)?;
    let dict = train_synthetic_dictionary(2, 16, 16, 200_000, 12, 0)?;
    let rec = dense_corpus(32, 32, 200_000, &SimConfig::default())?.remove(1);
    let lr = rec.stream.downsample_spatial(2)?;
    let cfg = SrConfig::default();
    let hr = super_resolve(&lr, &dict, &cfg)?;

    for (k, w) in window_bounds(hr.duration(), 50_000)?
        .into_iter()
        .enumerate()
    {
        let frames = [
            ("lr", reconstruct_frame(&lr, w).upscale_nearest(2)),
            ("sr", reconstruct_frame(&hr, w)),
            ("groundtruth", reconstruct_frame(&rec.stream, w)),
        ];
        for (name, frame) in frames {
            fs::write(out.join(format!("{name}_{k:04}.pgm")), frame.to_pgm())?;
        }
    }
    fs::write(
        out.join("curves.csv"),
        rate_curves_csv(&lr, &hr, cfg.metric_bin),
    )?;
    println!("wrote frames and curves.csv to {}", out.display());
    Ok(())
}
