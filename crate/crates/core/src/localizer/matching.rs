//! Masked cosine template matching, 2D softmax and soft-argmax.

use alloc::vec;
use alloc::vec::Vec;

use super::encoder::FeatureGrid;
use crate::fft::{split_pair, Complex, Fft2};
use crate::par;
use crate::{Error, Result};

/// Valid-mode similarity scores, row-major; entry `(i, j)` compares the
/// template with the tile window whose top-left cell is `(i, j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMap {
    pub width: usize,
    pub height: usize,
    pub scores: Vec<f64>,
}

impl SimilarityMap {
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.scores[i * self.width + j]
    }

    /// Row-major index of the maximum (first on ties).
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (k, &s) in self.scores.iter().enumerate() {
            if s > self.scores[best] {
                best = k;
            }
        }
        (best / self.width, best % self.width)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap {
    pub width: usize,
    pub height: usize,
    pub probs: Vec<f64>,
    pub tau: f64,
}

/// Products above which the FFT path is used.
const DIRECT_WORK_LIMIT: usize = 1 << 22;

/// Relative energy below which a window counts as empty (score 0).
const ENERGY_EPS: f64 = 1e-9;

/// Masked cosine similarity of `template` (unobserved cells excluded via
/// `mask`) against every valid placement inside `tile`.
pub fn match_template(template: &FeatureGrid, mask: &[bool], tile: &FeatureGrid) -> Result<SimilarityMap> {
    if template.channels != tile.channels {
        return Err(Error::ShapeMismatch("template and tile channel counts differ".into()));
    }
    if mask.len() != template.plane_len() {
        return Err(Error::ShapeMismatch("mask size must match the template".into()));
    }
    if template.width > tile.width || template.height > tile.height {
        return Err(Error::BevLargerThanTile {
            bev: template.width.max(template.height),
            tile: tile.width.min(tile.height),
        });
    }
    let work = (tile.width - template.width + 1)
        * (tile.height - template.height + 1)
        * template.plane_len()
        * template.channels;
    if work <= DIRECT_WORK_LIMIT {
        Ok(match_direct(template, mask, tile))
    } else {
        Ok(match_fft(template, mask, tile))
    }
}

fn template_norm(template: &FeatureGrid, mask: &[bool]) -> f64 {
    let mut e = 0.0;
    for c in 0..template.channels {
        for (v, &m) in template.channel(c).iter().zip(mask) {
            if m {
                e += v * v;
            }
        }
    }
    libm::sqrt(e)
}

#[inline]
fn cosine(num: f64, energy: f64, tnorm: f64, max_energy: f64) -> f64 {
    if !(tnorm > 0.0) || !(energy > ENERGY_EPS * max_energy) || !(energy > 0.0) {
        return 0.0;
    }
    (num / (tnorm * libm::sqrt(energy))).clamp(-1.0, 1.0)
}

pub(crate) fn match_direct(template: &FeatureGrid, mask: &[bool], tile: &FeatureGrid) -> SimilarityMap {
    let (sw, sh) = (template.width, template.height);
    let (ow, oh) = (tile.width - sw + 1, tile.height - sh + 1);
    let tnorm = template_norm(template, mask);
    let rows: Vec<Vec<(f64, f64)>> = par::map_range(oh, |i| {
        (0..ow)
            .map(|j| {
                let (mut num, mut energy) = (0.0, 0.0);
                for c in 0..template.channels {
                    let b = template.channel(c);
                    let t = tile.channel(c);
                    for p in 0..sh {
                        let trow = &t[(i + p) * tile.width + j..(i + p) * tile.width + j + sw];
                        let brow = &b[p * sw..(p + 1) * sw];
                        let mrow = &mask[p * sw..(p + 1) * sw];
                        for q in 0..sw {
                            if mrow[q] {
                                num += brow[q] * trow[q];
                                energy += trow[q] * trow[q];
                            }
                        }
                    }
                }
                (num, energy)
            })
            .collect()
    });
    let max_energy = rows.iter().flatten().fold(0.0f64, |m, &(_, e)| m.max(e));
    SimilarityMap {
        width: ow,
        height: oh,
        scores: rows
            .into_iter()
            .flatten()
            .map(|(n, e)| cosine(n, e, tnorm, max_energy))
            .collect(),
    }
}

pub(crate) fn match_fft(template: &FeatureGrid, mask: &[bool], tile: &FeatureGrid) -> SimilarityMap {
    let (sw, sh) = (template.width, template.height);
    let (lw, lh) = (tile.width, tile.height);
    let (ow, oh) = (lw - sw + 1, lh - sh + 1);
    // Circular correlation on an n ≥ L grid does not wrap for valid offsets.
    let n = lw.max(lh).next_power_of_two();
    let fft = Fft2::new(n);
    let nc = template.channels;

    let masked: Vec<Vec<f64>> = (0..nc)
        .map(|c| {
            template
                .channel(c)
                .iter()
                .zip(mask)
                .map(|(&v, &m)| if m { v } else { 0.0 })
                .collect()
        })
        .collect();
    let mask_f: Vec<f64> = mask.iter().map(|&m| f64::from(u8::from(m))).collect();
    let mut tile_sq = vec![0.0; lw * lh];
    for c in 0..nc {
        for (acc, v) in tile_sq.iter_mut().zip(tile.channel(c)) {
            *acc += v * v;
        }
    }

    // Real signals are transformed two at a time. Template-side signals go
    // at the end of the list so they pair up with each other.
    let mut tile_sigs: Vec<&[f64]> = (0..nc).map(|c| tile.channel(c)).collect();
    tile_sigs.push(&tile_sq);
    let mut tmpl_sigs: Vec<&[f64]> = masked.iter().map(|v| v.as_slice()).collect();
    tmpl_sigs.push(&mask_f);
    let tile_spec = transform_all(&fft, &tile_sigs, lh, lw);
    let tmpl_spec = transform_all(&fft, &tmpl_sigs, sh, sw);

    // Σ_c conj(B̂_c)·T̂_c  +  i · conj(M̂)·Ŝ, whose inverse is num + i·energy.
    let mut acc = vec![Complex::ZERO; n * n];
    for c in 0..nc {
        for ((a, b), t) in acc.iter_mut().zip(&tmpl_spec[c]).zip(&tile_spec[c]) {
            *a = *a + b.conj() * *t;
        }
    }
    let i_unit = Complex::new(0.0, 1.0);
    for ((a, m), s) in acc.iter_mut().zip(&tmpl_spec[nc]).zip(&tile_spec[nc]) {
        *a = *a + i_unit * (m.conj() * *s);
    }
    fft.inverse(&mut acc);

    let tnorm = template_norm(template, mask);
    let mut max_energy = 0.0f64;
    for i in 0..oh {
        for j in 0..ow {
            max_energy = max_energy.max(acc[i * n + j].im);
        }
    }
    let mut scores = Vec::with_capacity(ow * oh);
    for i in 0..oh {
        for j in 0..ow {
            let v = acc[i * n + j];
            scores.push(cosine(v.re, v.im, tnorm, max_energy));
        }
    }
    SimilarityMap {
        width: ow,
        height: oh,
        scores,
    }
}

fn transform_all(fft: &Fft2, sigs: &[&[f64]], rows: usize, cols: usize) -> Vec<Vec<Complex>> {
    let n = fft.size();
    let mut out = Vec::with_capacity(sigs.len());
    for pair in sigs.chunks(2) {
        let mut z = fft.embed_pair(pair[0], pair.get(1).copied(), rows, cols);
        fft.forward(&mut z);
        if pair.len() == 2 {
            let (a, b) = split_pair(&z, n);
            out.push(a);
            out.push(b);
        } else {
            out.push(z);
        }
    }
    out
}

/// `exp(M/τ) / Σ exp(M/τ)` with max-subtraction.
pub fn softmax2d(sim: &SimilarityMap, tau: f64) -> Result<ProbabilityMap> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidConfig("temperature must be positive".into()));
    }
    if sim.scores.is_empty() {
        return Err(Error::ShapeMismatch("empty similarity map".into()));
    }
    let max = sim.scores.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let mut probs: Vec<f64> = sim.scores.iter().map(|&v| libm::exp((v - max) / tau)).collect();
    let total = neumaier_sum(&probs);
    for p in &mut probs {
        *p /= total;
    }
    Ok(ProbabilityMap {
        width: sim.width,
        height: sim.height,
        probs,
        tau,
    })
}

fn neumaier_sum(values: &[f64]) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for &v in values {
        let t = sum + v;
        if libm::fabs(sum) >= libm::fabs(v) {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Probability-weighted mean of the index grid, `(row, col)`.
///
/// Marginals are reduced symmetrically about the grid centre, so that
/// symmetric distributions give the centre exactly.
pub fn soft_argmax(prob: &ProbabilityMap) -> [f64; 2] {
    let (w, h) = (prob.width, prob.height);
    let mut rows = vec![0.0; h];
    let mut cols = vec![0.0; w];
    for i in 0..h {
        for j in 0..w {
            let p = prob.probs[i * w + j];
            rows[i] += p;
            cols[j] += p;
        }
    }
    [centroid(&rows), centroid(&cols)]
}

fn centroid(marginal: &[f64]) -> f64 {
    let n = marginal.len();
    let center = (n as f64 - 1.0) * 0.5;
    let mass = neumaier_sum(marginal);
    if !(mass > 0.0) {
        return center;
    }
    let mut moment = 0.0;
    for i in 0..n / 2 {
        moment += (i as f64 - center) * (marginal[i] - marginal[n - 1 - i]);
    }
    center + moment / mass
}
