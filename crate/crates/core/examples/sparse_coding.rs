//! Code low-resolution patches against a dictionary, then upscale a whole
//! count map.

use evsr::corpus::{random_recording, train_synthetic_dictionary};
use evsr::count_map::{build_full_count_map, extract_patches};
use evsr::dvs_sim::SimConfig;
use evsr::sparse_sr::{lasso_objective, upscale_count_map, Overlap, SparseCodeConfig, SparseCoder};
use evsr::Polarity;

fn main() -> evsr::Result<()> {
    let dict = train_synthetic_dictionary(2, 16, 16, 200_000, 8, 0)?;
    let cfg = SparseCodeConfig::default();
    let hr = random_recording(32, 32, 200_000, 99, &SimConfig::default())?;
    let lr_map = build_full_count_map(&hr.downsample_spatial(2)?, Polarity::On);

    let mut coder = SparseCoder::new(&dict, cfg)?;
    let grid = extract_patches(&lr_map, 3, 1)?;
    let busiest = grid
        .patches
        .iter()
        .max_by(|a, b| {
            a.values
                .iter()
                .sum::<f64>()
                .total_cmp(&b.values.iter().sum())
        })
        .expect("non-empty grid");
    let none = Overlap::none(dict.hr_len());
    let code = coder.code(&busiest.values, &none)?;
    println!(
        "patch at ({}, {}): {:?}",
        busiest.row, busiest.col, busiest.values
    );
    println!(
        "{} of {} coefficients non-zero after {} sweeps",
        code.nonzeros(),
        dict.atom_count(),
        code.objective_trace.len()
    );
    println!(
        "objective {:.4} (direct evaluation {:.4})",
        code.objective_trace.last().copied().unwrap_or(f64::NAN),
        lasso_objective(&busiest.values, &none, &dict, &cfg, &code.coefficients)
    );

    let up = upscale_count_map(&lr_map, &dict, &cfg)?;
    let truth = build_full_count_map(&hr, Polarity::On);
    let err: f64 = up
        .values()
        .iter()
        .zip(truth.values())
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / truth.total();
    println!(
        "upscaled {}x{} -> {}x{}: total {:.1} (truth {}), relative L1 error {err:.3}",
        lr_map.width(),
        lr_map.height(),
        up.width(),
        up.height(),
        up.total(),
        truth.total()
    );
    Ok(())
}
