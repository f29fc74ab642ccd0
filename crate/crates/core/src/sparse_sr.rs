//! Count-map super-resolution with coupled patch dictionaries.
//!
//! A [`DictionaryPair`] holds index-aligned low- and high-resolution patch
//! atoms sampled from training count maps. A low-resolution patch `y` is
//! coded by solving the Lasso problem
//!
//! ```text
//! min_a  ‖F·Dl·a − F·y‖² + β²‖P·(F·Dh·a) − P·(w − m)‖² + λ‖a‖₁
//! ```
//!
//! where `F` removes the patch mean, `P` selects the part of the candidate
//! high-resolution patch already reconstructed by earlier patches (with
//! values `w`), and `m = mean(y) / factor²` is the per-pixel mean carried
//! over to the high-resolution grid. The reconstructed patch is `F·Dh·a + m`.
//! Patches are processed in raster order and overlaps averaged.
//!
//! The solver is cyclic coordinate descent with soft-thresholding on the
//! Gram form of the problem. Gram matrices only depend on the overlap mask,
//! of which a raster scan produces a handful, so they are cached.

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;

use crate::count_map::{patch_offsets, CountMap};
use crate::error::{Error, Result};
use crate::rng::seeded_rng;

pub const DICT_MAGIC: [u8; 4] = *b"EVDC";
pub const DEFAULT_LR_PATCH: usize = 3;
pub const DEFAULT_ATOMS: usize = 512;

/// Coupled low/high-resolution dictionaries. Atom `k` is the stacked column
/// `[lr_k; hr_k]`, scaled to unit Euclidean norm.
#[derive(Debug, Clone, PartialEq)]
pub struct DictionaryPair {
    factor: usize,
    lr_patch_size: usize,
    /// Atom-major, `K × lr_patch_size²`.
    lr: Vec<f64>,
    /// Atom-major, `K × (factor·lr_patch_size)²`.
    hr: Vec<f64>,
}

impl DictionaryPair {
    /// Build from raw (unnormalized) atom pairs. Each stacked pair is scaled
    /// to unit norm; all-zero pairs are rejected.
    pub fn from_atoms(
        factor: usize,
        lr_patch_size: usize,
        atoms: &[(Vec<f64>, Vec<f64>)],
    ) -> Result<Self> {
        if factor < 2 {
            return Err(Error::arg(format!(
                "magnification factor must be >= 2, got {factor}"
            )));
        }
        if lr_patch_size == 0 {
            return Err(Error::arg("patch size must be positive"));
        }
        let n_l = lr_patch_size * lr_patch_size;
        let n_h = n_l * factor * factor;
        let mut lr = Vec::with_capacity(atoms.len() * n_l);
        let mut hr = Vec::with_capacity(atoms.len() * n_h);
        for (i, (l, h)) in atoms.iter().enumerate() {
            if l.len() != n_l || h.len() != n_h {
                return Err(Error::arg(format!(
                    "atom {i}: expected lengths {n_l}/{n_h}, got {}/{}",
                    l.len(),
                    h.len()
                )));
            }
            let norm = l.iter().chain(h).map(|v| v * v).sum::<f64>().sqrt();
            if !(norm.is_finite() && norm > 0.0) {
                return Err(Error::arg(format!("atom {i} is zero or non-finite")));
            }
            lr.extend(l.iter().map(|v| v / norm));
            hr.extend(h.iter().map(|v| v / norm));
        }
        Ok(DictionaryPair {
            factor,
            lr_patch_size,
            lr,
            hr,
        })
    }

    pub fn factor(&self) -> usize {
        self.factor
    }

    pub fn lr_patch_size(&self) -> usize {
        self.lr_patch_size
    }

    pub fn hr_patch_size(&self) -> usize {
        self.lr_patch_size * self.factor
    }

    pub fn lr_len(&self) -> usize {
        self.lr_patch_size * self.lr_patch_size
    }

    pub fn hr_len(&self) -> usize {
        self.hr_patch_size() * self.hr_patch_size()
    }

    pub fn atom_count(&self) -> usize {
        self.lr.len() / self.lr_len()
    }

    pub fn lr_atom(&self, k: usize) -> &[f64] {
        let n = self.lr_len();
        &self.lr[k * n..(k + 1) * n]
    }

    pub fn hr_atom(&self, k: usize) -> &[f64] {
        let n = self.hr_len();
        &self.hr[k * n..(k + 1) * n]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 8 * (self.lr.len() + self.hr.len()));
        out.extend_from_slice(&DICT_MAGIC);
        out.extend_from_slice(&(self.factor as u16).to_le_bytes());
        out.extend_from_slice(&(self.lr_patch_size as u16).to_le_bytes());
        out.extend_from_slice(&(self.atom_count() as u32).to_le_bytes());
        for k in 0..self.atom_count() {
            for v in self.lr_atom(k).iter().chain(self.hr_atom(k)) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 {
            return Err(Error::Format("truncated dictionary header".into()));
        }
        if bytes[0..4] != DICT_MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let factor = u16::from_le_bytes([bytes[4], bytes[5]]) as usize;
        let lr_patch_size = u16::from_le_bytes([bytes[6], bytes[7]]) as usize;
        let k = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        if factor < 2 || lr_patch_size == 0 {
            return Err(Error::Format(format!(
                "invalid geometry: factor {factor}, patch {lr_patch_size}"
            )));
        }
        let n_l = lr_patch_size * lr_patch_size;
        let n_h = n_l * factor * factor;
        let expected = 12 + k * (n_l + n_h) * 8;
        if bytes.len() != expected {
            return Err(Error::Format(format!(
                "dictionary payload has {} bytes, expected {expected}",
                bytes.len()
            )));
        }
        let mut lr = Vec::with_capacity(k * n_l);
        let mut hr = Vec::with_capacity(k * n_h);
        let mut vals = bytes[12..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        for _ in 0..k {
            lr.extend(vals.by_ref().take(n_l));
            hr.extend(vals.by_ref().take(n_h));
        }
        if lr.iter().chain(&hr).any(|v| !v.is_finite()) {
            return Err(Error::Format("non-finite atom value".into()));
        }
        Ok(DictionaryPair {
            factor,
            lr_patch_size,
            lr,
            hr,
        })
    }
}

/// Sample `k` coupled atoms from high-resolution training count maps.
///
/// Each draw picks a map and a low-resolution patch position uniformly; the
/// high-resolution atom is the raw `(factor·3)²` patch and the low-resolution
/// atom the matching `3×3` patch of the block-sum downsampled map. All-zero
/// draws are discarded.
pub fn train_dictionaries(
    hr_maps: &[CountMap],
    factor: usize,
    k: usize,
    seed: u64,
) -> Result<DictionaryPair> {
    let lp = DEFAULT_LR_PATCH;
    if factor < 2 {
        return Err(Error::arg(format!(
            "magnification factor must be >= 2, got {factor}"
        )));
    }
    if k < lp * lp {
        return Err(Error::arg(format!(
            "dictionary needs at least {} atoms to be overcomplete, got {k}",
            lp * lp
        )));
    }
    if hr_maps.is_empty() {
        return Err(Error::Training("no training maps".into()));
    }
    let lr_maps = hr_maps
        .iter()
        .map(|m| m.block_sum(factor))
        .collect::<Result<Vec<_>>>()?;
    let mut positions = 0usize;
    for m in &lr_maps {
        if m.width() < lp || m.height() < lp {
            return Err(Error::arg(format!(
                "training map {}x{} is too small for {lp}x{lp} patches at factor {factor}",
                m.width() * factor,
                m.height() * factor
            )));
        }
        positions += (m.width() - lp + 1) * (m.height() - lp + 1);
    }
    if k > positions {
        return Err(Error::arg(format!(
            "requested {k} atoms but only {positions} patch positions exist"
        )));
    }

    let hp = lp * factor;
    let mut rng = seeded_rng(seed);
    let mut atoms = Vec::with_capacity(k);
    let mut draws = 0usize;
    while atoms.len() < k {
        if draws >= 100 * k {
            return Err(Error::Training(format!(
                "only {} non-zero patches found in {draws} draws",
                atoms.len()
            )));
        }
        draws += 1;
        let i = rng.random_range(0..hr_maps.len());
        let (hr_map, lr_map) = (&hr_maps[i], &lr_maps[i]);
        let row = rng.random_range(0..=lr_map.height() - lp);
        let col = rng.random_range(0..=lr_map.width() - lp);
        let lr = patch(lr_map, row, col, lp);
        if lr.iter().all(|&v| v == 0.0) {
            continue;
        }
        let hr = patch(hr_map, row * factor, col * factor, hp);
        atoms.push((lr, hr));
    }
    DictionaryPair::from_atoms(factor, lp, &atoms)
}

fn patch(map: &CountMap, row: usize, col: usize, size: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(size * size);
    for dy in 0..size {
        for dx in 0..size {
            out.push(map.get(col + dx, row + dy));
        }
    }
    out
}

/// Lasso weights and stopping rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparseCodeConfig {
    /// L1 weight.
    pub lambda: f64,
    /// Weight of the overlap-consistency rows.
    pub beta: f64,
    /// Maximum number of full coordinate sweeps.
    pub max_iter: usize,
    /// Relative objective change below which sweeping stops.
    pub tol: f64,
}

impl Default for SparseCodeConfig {
    fn default() -> Self {
        SparseCodeConfig {
            lambda: 0.1,
            beta: 1.0,
            max_iter: 200,
            tol: 1e-5,
        }
    }
}

impl SparseCodeConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !(ok(self.lambda) && ok(self.beta) && ok(self.tol) && self.max_iter > 0) {
            return Err(Error::arg(format!(
                "sparse-code parameters must be positive: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Already-reconstructed high-resolution values inside the candidate patch.
#[derive(Debug, Clone, PartialEq)]
pub struct Overlap {
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
}

impl Overlap {
    pub fn none(len: usize) -> Self {
        Overlap {
            values: vec![0.0; len],
            mask: vec![false; len],
        }
    }
}

/// Result of one coding problem.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCode {
    pub coefficients: Vec<f64>,
    /// Objective after each full sweep.
    pub objective_trace: Vec<f64>,
}

impl SparseCode {
    pub fn nonzeros(&self) -> usize {
        self.coefficients.iter().filter(|c| **c != 0.0).count()
    }
}

fn remove_mean(v: &[f64]) -> Vec<f64> {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| x - m).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Reusable coding state for one dictionary: mean-removed atoms and a cache
/// of Gram matrices keyed by overlap mask.
pub struct SparseCoder<'a> {
    dict: &'a DictionaryPair,
    config: SparseCodeConfig,
    lr_features: Vec<f64>,
    hr_features: Vec<f64>,
    lr_gram: Vec<f64>,
    cache: HashMap<Vec<bool>, Arc<Vec<f64>>>,
}

impl<'a> SparseCoder<'a> {
    pub fn new(dict: &'a DictionaryPair, config: SparseCodeConfig) -> Result<Self> {
        config.validate()?;
        let k = dict.atom_count();
        let lr_features: Vec<f64> = (0..k).flat_map(|i| remove_mean(dict.lr_atom(i))).collect();
        let hr_features: Vec<f64> = (0..k).flat_map(|i| remove_mean(dict.hr_atom(i))).collect();
        let n_l = dict.lr_len();
        let mut lr_gram = vec![0.0; k * k];
        for i in 0..k {
            let fi = &lr_features[i * n_l..(i + 1) * n_l];
            for j in i..k {
                let g = dot(fi, &lr_features[j * n_l..(j + 1) * n_l]);
                lr_gram[i * k + j] = g;
                lr_gram[j * k + i] = g;
            }
        }
        Ok(SparseCoder {
            dict,
            config,
            lr_features,
            hr_features,
            lr_gram,
            cache: HashMap::new(),
        })
    }

    fn lr_feature(&self, k: usize) -> &[f64] {
        let n = self.dict.lr_len();
        &self.lr_features[k * n..(k + 1) * n]
    }

    /// Mean-removed high-resolution atom `k`.
    pub fn hr_feature(&self, k: usize) -> &[f64] {
        let n = self.dict.hr_len();
        &self.hr_features[k * n..(k + 1) * n]
    }

    fn gram(&mut self, mask: &[bool]) -> Arc<Vec<f64>> {
        if let Some(g) = self.cache.get(mask) {
            return Arc::clone(g);
        }
        let k = self.dict.atom_count();
        let n_h = self.dict.hr_len();
        let b2 = self.config.beta * self.config.beta;
        let rows: Vec<usize> = (0..n_h).filter(|&p| mask[p]).collect();
        let mut g = self.lr_gram.clone();
        if !rows.is_empty() {
            // gather masked rows once: atom-major, |rows| wide
            let masked: Vec<f64> = (0..k)
                .flat_map(|i| {
                    let f = self.hr_feature(i);
                    rows.iter().map(move |&p| f[p])
                })
                .collect();
            let m = rows.len();
            for i in 0..k {
                let fi = &masked[i * m..(i + 1) * m];
                for j in i..k {
                    let v = b2 * dot(fi, &masked[j * m..(j + 1) * m]);
                    g[i * k + j] += v;
                    if i != j {
                        g[j * k + i] += v;
                    }
                }
            }
        }
        let g = Arc::new(g);
        self.cache.insert(mask.to_vec(), Arc::clone(&g));
        g
    }

    /// Solve the coding problem for one low-resolution patch.
    pub fn code(&mut self, y: &[f64], overlap: &Overlap) -> Result<SparseCode> {
        let (n_l, n_h) = (self.dict.lr_len(), self.dict.hr_len());
        if y.len() != n_l || overlap.values.len() != n_h || overlap.mask.len() != n_h {
            return Err(Error::arg(format!(
                "patch lengths {}/{} do not match dictionary {n_l}/{n_h}",
                y.len(),
                overlap.values.len()
            )));
        }
        if y.iter().chain(&overlap.values).any(|v| !v.is_finite()) {
            return Err(Error::arg("non-finite value in patch or overlap"));
        }
        let k = self.dict.atom_count();
        let fy = remove_mean(y);
        let hr_mean =
            y.iter().sum::<f64>() / n_l as f64 / (self.dict.factor * self.dict.factor) as f64;
        let b2 = self.config.beta * self.config.beta;
        let target: Vec<(usize, f64)> = (0..n_h)
            .filter(|&p| overlap.mask[p])
            .map(|p| (p, overlap.values[p] - hr_mean))
            .collect();

        let mut yy = dot(&fy, &fy);
        yy += b2 * target.iter().map(|(_, v)| v * v).sum::<f64>();
        let b: Vec<f64> = (0..k)
            .map(|i| {
                let f = self.hr_feature(i);
                dot(self.lr_feature(i), &fy)
                    + b2 * target.iter().map(|&(p, v)| f[p] * v).sum::<f64>()
            })
            .collect();
        let gram = self.gram(&overlap.mask);
        Ok(coordinate_descent(&gram, &b, yy, &self.config))
    }

    /// Reconstruct the mean-free part of a high-resolution patch, `F·Dh·a`.
    pub fn hr_detail(&self, coefficients: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dict.hr_len()];
        for (k, &c) in coefficients.iter().enumerate() {
            if c != 0.0 {
                for (o, f) in out.iter_mut().zip(self.hr_feature(k)) {
                    *o += c * f;
                }
            }
        }
        out
    }
}

/// Cyclic coordinate descent on `‖ỹ‖² − 2aᵀb + aᵀGa + λ‖a‖₁`.
fn coordinate_descent(gram: &[f64], b: &[f64], yy: f64, config: &SparseCodeConfig) -> SparseCode {
    let k = b.len();
    let half_lambda = config.lambda / 2.0;
    let mut a = vec![0.0; k];
    // c = b − G·a, the correlation of every atom with the current residual
    let mut c = b.to_vec();
    let mut trace = Vec::new();
    let mut prev = yy;
    for _ in 0..config.max_iter {
        for i in 0..k {
            let gii = gram[i * k + i];
            if gii <= 1e-14 {
                continue;
            }
            let rho = c[i] + gii * a[i];
            let new = soft_threshold(rho, half_lambda) / gii;
            let delta = new - a[i];
            if delta != 0.0 {
                a[i] = new;
                let col = &gram[i * k..(i + 1) * k];
                for (cj, g) in c.iter_mut().zip(col) {
                    *cj -= g * delta;
                }
            }
        }
        let mut obj = yy;
        let mut l1 = 0.0;
        for i in 0..k {
            if a[i] != 0.0 {
                obj -= a[i] * (b[i] + c[i]);
                l1 += a[i].abs();
            }
        }
        obj += config.lambda * l1;
        debug_assert!(
            obj <= prev + 1e-9 * prev.abs().max(1.0),
            "objective increased from {prev} to {obj}"
        );
        trace.push(obj);
        let change = (prev - obj).abs();
        prev = obj;
        if change <= config.tol * obj.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    SparseCode {
        coefficients: a,
        objective_trace: trace,
    }
}

/// Code one low-resolution patch. See [`SparseCoder::code`].
pub fn sparse_code(
    y: &[f64],
    overlap: &Overlap,
    dict: &DictionaryPair,
    config: &SparseCodeConfig,
) -> Result<Vec<f64>> {
    Ok(SparseCoder::new(dict, *config)?
        .code(y, overlap)?
        .coefficients)
}

/// Upscale a low-resolution count map by `dict.factor()`.
///
/// Low-resolution patches (3×3, overlap 1) are coded in raster order; each
/// high-resolution patch (3α×3α, overlap α) is constrained by the values
/// already reconstructed in its overlap. Overlaps are averaged and negative
/// results clamped to zero.
pub fn upscale_count_map(
    lr_map: &CountMap,
    dict: &DictionaryPair,
    config: &SparseCodeConfig,
) -> Result<CountMap> {
    let lp = dict.lr_patch_size();
    if lp < 2 {
        return Err(Error::arg("dictionary patch size must be at least 2"));
    }
    if lr_map.width() < lp || lr_map.height() < lp {
        return Err(Error::arg(format!(
            "{}x{} map is smaller than the {lp}x{lp} dictionary patch",
            lr_map.width(),
            lr_map.height()
        )));
    }
    let f = dict.factor();
    let hp = dict.hr_patch_size();
    let (hw, hh) = (lr_map.width() * f, lr_map.height() * f);
    let rows = patch_offsets(lr_map.height(), lp, 1)?;
    let cols = patch_offsets(lr_map.width(), lp, 1)?;
    let mut coder = SparseCoder::new(dict, *config)?;
    let mut sum = vec![0.0; hw * hh];
    let mut hits = vec![0u32; hw * hh];
    let mut overlap = Overlap::none(dict.hr_len());
    for &r in &rows {
        for &c in &cols {
            let y = patch(lr_map, r, c, lp);
            let (hr0, hc0) = (r * f, c * f);
            let mut any_overlap = false;
            for dy in 0..hp {
                for dx in 0..hp {
                    let idx = (hr0 + dy) * hw + hc0 + dx;
                    let p = dy * hp + dx;
                    overlap.mask[p] = hits[idx] > 0;
                    overlap.values[p] = if hits[idx] > 0 {
                        any_overlap |= sum[idx] != 0.0;
                        sum[idx] / hits[idx] as f64
                    } else {
                        0.0
                    };
                }
            }
            let hr_mean = y.iter().sum::<f64>() / y.len() as f64 / (f * f) as f64;
            let detail = if hr_mean == 0.0 && !any_overlap {
                // silent region: the solution is exactly zero
                vec![0.0; dict.hr_len()]
            } else {
                let code = coder.code(&y, &overlap)?;
                coder.hr_detail(&code.coefficients)
            };
            for dy in 0..hp {
                for dx in 0..hp {
                    let idx = (hr0 + dy) * hw + hc0 + dx;
                    sum[idx] += hr_mean + detail[dy * hp + dx];
                    hits[idx] += 1;
                }
            }
        }
    }
    let values = sum
        .into_iter()
        .zip(hits)
        .map(|(s, h)| (s / h as f64).max(0.0))
        .collect();
    CountMap::from_values(hw, hh, values, lr_map.polarity())
}

/// Direct evaluation of the coding objective from the dictionary, without
/// the Gram-form shortcuts used by the solver.
pub fn lasso_objective(
    y: &[f64],
    overlap: &Overlap,
    dict: &DictionaryPair,
    config: &SparseCodeConfig,
    coefficients: &[f64],
) -> f64 {
    let fy = remove_mean(y);
    let hr_mean = y.iter().sum::<f64>() / y.len() as f64 / (dict.factor() * dict.factor()) as f64;
    let mut lr_fit = vec![0.0; dict.lr_len()];
    let mut hr_fit = vec![0.0; dict.hr_len()];
    for (k, &a) in coefficients.iter().enumerate() {
        for (o, v) in lr_fit.iter_mut().zip(remove_mean(dict.lr_atom(k))) {
            *o += a * v;
        }
        for (o, v) in hr_fit.iter_mut().zip(remove_mean(dict.hr_atom(k))) {
            *o += a * v;
        }
    }
    let mut obj: f64 = lr_fit.iter().zip(&fy).map(|(a, b)| (a - b).powi(2)).sum();
    for ((fit, &masked), value) in hr_fit.iter().zip(&overlap.mask).zip(&overlap.values) {
        if masked {
            let r = config.beta * (fit - (value - hr_mean));
            obj += r * r;
        }
    }
    obj + config.lambda * coefficients.iter().map(|a| a.abs()).sum::<f64>()
}
