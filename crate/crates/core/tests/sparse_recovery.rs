use evsr::corpus::{random_recording, train_synthetic_dictionary};
use evsr::count_map::{build_full_count_map, extract_patches, CountMap};
use evsr::dvs_sim::SimConfig;
use evsr::rng::seeded_rng;
use evsr::sparse_sr::{upscale_count_map, DictionaryPair, Overlap, SparseCodeConfig, SparseCoder};
use evsr::Polarity;
use rand::Rng;

fn block_sum(hr: &[f64], hp: usize, f: usize) -> Vec<f64> {
    let lp = hp / f;
    let mut out = vec![0.0; lp * lp];
    for y in 0..hp {
        for x in 0..hp {
            out[(y / f) * lp + x / f] += hr[y * hp + x];
        }
    }
    out
}

/// Atoms whose low-resolution half is the block sum of a random
/// high-resolution patch, as training would produce.
fn random_dictionary(k: usize, patch: usize, factor: usize, seed: u64) -> DictionaryPair {
    let mut rng = seeded_rng(seed);
    let hp = patch * factor;
    let atoms: Vec<(Vec<f64>, Vec<f64>)> = (0..k)
        .map(|_| {
            let h: Vec<f64> = (0..hp * hp).map(|_| rng.random_range(0.0..4.0)).collect();
            (block_sum(&h, hp, factor), h)
        })
        .collect();
    DictionaryPair::from_atoms(factor, patch, &atoms).unwrap()
}

fn centred(v: &[f64]) -> Vec<f64> {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| x - m).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[test]
fn single_atom_is_recovered() {
    // 4x4 patches: 12 atoms in a 15-dimensional mean-free space are
    // independent, so the exact representation is unique
    let dict = random_dictionary(12, 4, 2, 4);
    let cfg = SparseCodeConfig {
        lambda: 1e-6,
        max_iter: 20_000,
        tol: 1e-14,
        ..SparseCodeConfig::default()
    };
    let mut coder = SparseCoder::new(&dict, cfg).unwrap();
    for j in 0..dict.atom_count() {
        let atom = dict.lr_atom(j);
        let norm = dot(atom, atom).sqrt();
        let y: Vec<f64> = atom.iter().map(|v| v / norm).collect();
        let code = coder.code(&y, &Overlap::none(dict.hr_len())).unwrap();
        // oracle: least squares on the single active atom
        let (fj, fy) = (centred(atom), centred(&y));
        let ls = dot(&fj, &fy) / dot(&fj, &fj);
        let c = &code.coefficients;
        let dominant = (0..c.len())
            .max_by(|&a, &b| c[a].abs().total_cmp(&c[b].abs()))
            .unwrap();
        assert_eq!(dominant, j, "atom {j}: {c:?}");
        assert!(
            (c[j] - ls).abs() <= 1e-3 * ls.abs(),
            "atom {j}: {} vs {ls}",
            c[j]
        );
        let mut residual = fy.clone();
        for (k, &a) in c.iter().enumerate() {
            for (r, f) in residual.iter_mut().zip(centred(dict.lr_atom(k))) {
                *r -= a * f;
            }
        }
        assert!(dot(&residual, &residual).sqrt() <= 1e-3);
    }
}

#[test]
fn map_stitched_from_atoms_upscales_to_the_atoms() {
    let factor = 2;
    let mut rng = seeded_rng(11);
    let (hw, hh) = (14, 14);
    let hr_values: Vec<f64> = (0..hw * hh).map(|_| rng.random_range(1.0..6.0)).collect();
    let hr = CountMap::from_values(hw, hh, hr_values, Polarity::On).unwrap();
    let lr = hr.block_sum(factor).unwrap();
    // one atom per patch position, plus duplicates to reach a valid size
    let hr_grid = extract_patches(&hr, 6, 2).unwrap();
    let lr_grid = extract_patches(&lr, 3, 1).unwrap();
    let mut atoms: Vec<(Vec<f64>, Vec<f64>)> = lr_grid
        .patches
        .iter()
        .zip(&hr_grid.patches)
        .map(|(l, h)| (l.values.clone(), h.values.clone()))
        .collect();
    assert_eq!(atoms.len(), 9);
    atoms.extend(atoms.clone().into_iter().take(3));
    let dict = DictionaryPair::from_atoms(factor, 3, &atoms).unwrap();
    let cfg = SparseCodeConfig {
        lambda: 1e-7,
        max_iter: 20_000,
        tol: 1e-15,
        ..SparseCodeConfig::default()
    };
    let up = upscale_count_map(&lr, &dict, &cfg).unwrap();
    for (i, (a, b)) in up.values().iter().zip(hr.values()).enumerate() {
        assert!((a - b).abs() <= 1e-2 * b, "pixel {i}: {a} vs {b}");
    }
}

#[test]
fn codes_of_real_patches_are_sparse() {
    let dict = train_synthetic_dictionary(2, 16, 16, 100_000, 6, 0).unwrap();
    let k = dict.atom_count();
    let stream = random_recording(32, 32, 100_000, 777, &SimConfig::default()).unwrap();
    let lr = build_full_count_map(&stream.downsample_spatial(2).unwrap(), Polarity::On);
    let mut coder = SparseCoder::new(&dict, SparseCodeConfig::default()).unwrap();
    let grid = extract_patches(&lr, 3, 1).unwrap();
    let mut coded = 0;
    for p in grid
        .patches
        .iter()
        .filter(|p| p.values.iter().any(|v| *v != 0.0))
    {
        let code = coder
            .code(&p.values, &Overlap::none(dict.hr_len()))
            .unwrap();
        assert!(code.nonzeros() < k / 4, "{} nonzeros", code.nonzeros());
        coded += 1;
    }
    assert!(coded > 10);
}

#[test]
fn upscaling_keeps_the_total_close() {
    let dict = train_synthetic_dictionary(2, 16, 16, 100_000, 6, 0).unwrap();
    let stream = random_recording(32, 32, 100_000, 778, &SimConfig::default()).unwrap();
    let lr = build_full_count_map(&stream.downsample_spatial(2).unwrap(), Polarity::On);
    let up = upscale_count_map(&lr, &dict, &SparseCodeConfig::default()).unwrap();
    assert_eq!((up.width(), up.height()), (32, 32));
    assert!(up.values().iter().all(|v| *v >= 0.0));
    let ratio = up.total() / lr.total();
    assert!((0.8..1.25).contains(&ratio), "HR/LR total ratio {ratio}");
}
