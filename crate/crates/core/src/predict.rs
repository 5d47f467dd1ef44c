//! Band symbols, eigenvalue expansions and Weyl counts.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::birkhoff::{well_reduce, williamson, FStar, NormalForm, WellNormalForm};
use crate::error::{Error, Result};
use crate::field::MagneticSystem;
use crate::jet::{Jet, Mono};

/// `F^(n)(w, hbar)` for a fixed band index.
#[derive(Clone, Debug)]
pub struct BandSymbol {
    pub n: Vec<u32>,
    pub symbol: Jet,
}

pub fn band_symbol(fstar: &FStar, beta_hat: &[Jet], n: &[u32]) -> Result<BandSymbol> {
    if n.len() != beta_hat.len() || n.len() != fstar.vars.nz {
        return Err(Error::Incompatible("band index length does not match the phase pairs".into()));
    }
    Ok(BandSymbol { n: n.to_vec(), symbol: fstar.band_symbol(beta_hat, n)? })
}

/// Lower bound `b0 + c |n|` for the bottom of band `n`.
pub fn band_floor(b0: f64, n: &[u32], c: f64) -> f64 {
    b0 + c * n.iter().sum::<u32>() as f64
}

/// All `n` with `b0 + c |n| <= b1`, in lexicographic order.
pub fn enumerate_bands(b0: f64, c: f64, b1: f64, pairs: usize) -> Vec<Vec<u32>> {
    if b1 < b0 || pairs == 0 {
        return Vec::new();
    }
    let nmax = if c > 0.0 { ((b1 - b0) / c + 1e-12).floor() as u32 } else { 0 };
    let mut out = Vec::new();
    let mut cur = vec![0u32; pairs];
    fn rec(k: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if k == cur.len() {
            out.push(cur.clone());
            return;
        }
        for v in 0..=left {
            cur[k] = v;
            rec(k + 1, left - v, cur, out);
        }
        cur[k] = 0;
    }
    rec(0, nmax, &mut cur, &mut out);
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HarmonicLevel {
    pub energy: f64,
    pub multiplicity: usize,
    pub indices: Vec<Vec<u32>>,
}

/// Levels `E = sum (2 m_j + 1) nu_j`, ascending, with at least `count` states counted
/// with multiplicity.
pub fn harmonic_levels(nu: &[f64], count: usize) -> Vec<HarmonicLevel> {
    assert!(nu.iter().all(|&v| v > 0.0), "frequencies must be positive");
    let base: f64 = nu.iter().sum();
    let numin = nu.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut top = base + 2.0 * numin * count.max(1) as f64;
    loop {
        let mut states: Vec<(f64, Vec<u32>)> = Vec::new();
        let mut cur = vec![0u32; nu.len()];
        enumerate_states(nu, 0, base, top, &mut cur, &mut states);
        if states.len() >= count {
            states.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then_with(|| a.1.cmp(&b.1)));
            let mut levels: Vec<HarmonicLevel> = Vec::new();
            let mut total = 0;
            for (e, m) in states {
                match levels.last_mut() {
                    Some(l) if (e - l.energy).abs() <= 1e-12 * e.abs().max(1.0) => {
                        l.multiplicity += 1;
                        l.indices.push(m);
                        total += 1;
                    }
                    _ => {
                        if total >= count {
                            break;
                        }
                        levels.push(HarmonicLevel { energy: e, multiplicity: 1, indices: vec![m] });
                        total += 1;
                    }
                }
            }
            return levels;
        }
        top *= 2.0;
    }
}

fn enumerate_states(nu: &[f64], k: usize, e: f64, top: f64, cur: &mut Vec<u32>, out: &mut Vec<(f64, Vec<u32>)>) {
    if k == nu.len() {
        out.push((e, cur.clone()));
        return;
    }
    let mut m = 0;
    let mut ek = e;
    while ek <= top {
        cur[k] = m;
        enumerate_states(nu, k + 1, ek, top, cur, out);
        m += 1;
        ek += 2.0 * nu[k];
    }
    cur[k] = 0;
}

/// Expansion of one eigenvalue, `lambda(hbar) = sum_k coeffs[k] hbar^(k/2)`.
#[derive(Clone, Debug, Serialize)]
pub struct LevelPrediction {
    pub j: usize,
    pub m: Vec<u32>,
    pub energy: f64,
    pub coeffs: BTreeMap<u32, f64>,
}

impl LevelPrediction {
    pub fn eval(&self, hbar: f64) -> f64 {
        self.coeffs.iter().map(|(k, c)| c * hbar.powf(*k as f64 / 2.0)).sum()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectralPrediction {
    pub b0: f64,
    pub nu: Vec<f64>,
    /// Constant from the normal-form corrections, without any fitted offset.
    pub c0: f64,
    /// Offset added to the `hbar^2` coefficients (a fit parameter, 0 by default).
    pub c0_offset: f64,
    pub c0_includes_quantization_remainder: bool,
    /// Largest half-power index `k` that the normal-form order makes exact.
    pub max_k: u32,
    pub levels: Vec<LevelPrediction>,
}

/// `F^(0)/hbar`: the lowest band symbol divided by `hbar`.
pub fn lowest_band_over_hbar(nf: &NormalForm, fstar: &FStar) -> Result<Jet> {
    let n0 = vec![0; nf.beta_hat.len()];
    band_symbol(fstar, &nf.beta_hat, &n0)?.symbol.hbar_shift(-1)
}

/// Second stage at the bottom of the lowest band.
pub fn lowest_band_well(nf: &NormalForm, fstar: &FStar) -> Result<WellNormalForm> {
    if nf.r < 5 {
        return Err(Error::Invalid(format!(
            "normal form order {} is too low for eigenvalue expansions (need at least 5)",
            nf.r
        )));
    }
    well_reduce(&lowest_band_over_hbar(nf, fstar)?, nf.r - 2)
}

/// Expansions of the `count` lowest eigenvalues (all in the lowest band).
///
/// Coefficients are reported for `k <= r - 1`; below `r = 5` only `c_{j,2} = b0` and the
/// vanishing `c_{j,3}` are available.
pub fn predict_eigenvalues(nf: &NormalForm, fstar: &FStar, count: usize, c0_offset: f64) -> Result<SpectralPrediction> {
    if nf.r >= 5 {
        let wn = lowest_band_well(nf, fstar)?;
        return Ok(predict_from_well(&wn, count, c0_offset, nf.r - 1));
    }
    let band = lowest_band_over_hbar(nf, fstar)?;
    let vars = band.vars();
    let b0 = band.constant_term().re;
    let d = vars.nw;
    let mut q = DMatrix::zeros(d, d);
    for (m, c) in band.filter(|m| m.hbar() == 0 && m.wdeg(&vars) == 2).terms() {
        let w = m.w_part(&vars);
        let idx: Vec<usize> = (0..d).filter(|&i| w[i] > 0).collect();
        if idx.len() == 1 {
            q[(idx[0], idx[0])] = c.re;
        } else {
            q[(idx[0], idx[1])] = c.re / 2.0;
            q[(idx[1], idx[0])] = c.re / 2.0;
        }
    }
    let nu = williamson(&q)?.nu;
    let levels = harmonic_levels(&nu, count)
        .into_iter()
        .flat_map(|l| l.indices.into_iter().map(move |m| (l.energy, m)))
        .take(count)
        .enumerate()
        .map(|(j, (energy, m))| {
            let coeffs = (2..nf.r).map(|k| (k, if k == 2 { b0 } else { 0.0 })).collect();
            LevelPrediction { j: j + 1, m, energy, coeffs }
        })
        .collect();
    Ok(SpectralPrediction {
        b0,
        nu,
        c0: band.coeff(&Mono::hbar_pow(1)).re,
        c0_offset,
        c0_includes_quantization_remainder: false,
        max_k: nf.r - 1,
        levels,
    })
}

/// Level expansions from a second-stage normal form, coefficients up to `hbar^(max_k/2)`.
pub fn predict_from_well(wn: &WellNormalForm, count: usize, c0_offset: f64, max_k: u32) -> SpectralPrediction {
    let nu = wn.williamson.nu.clone();
    let max_k = max_k.min(2 * wn.max_power + 3);
    // a few extra states so that ties at order hbar^2 are ordered by higher terms
    let levels = harmonic_levels(&nu, count + 4);
    let mut cands: Vec<(Vec<f64>, f64, Vec<u32>)> = levels
        .iter()
        .flat_map(|l| l.indices.iter().map(move |m| (l.energy, m.clone())))
        .map(|(e, m)| (wn.level(&m), e, m))
        .collect();
    cands.sort_by(|a, b| {
        for (x, y) in a.0.iter().zip(&b.0) {
            if (x - y).abs() > 1e-12 * x.abs().max(1.0) {
                return x.partial_cmp(y).unwrap();
            }
        }
        a.2.cmp(&b.2)
    });
    let out = cands
        .into_iter()
        .take(count)
        .enumerate()
        .map(|(j, (a, energy, m))| {
            let mut coeffs = BTreeMap::new();
            for k in 2..=max_k {
                let v = if k % 2 == 0 { a[(k / 2 - 1) as usize] } else { 0.0 };
                coeffs.insert(k, v);
            }
            if let Some(c4) = coeffs.get_mut(&4) {
                *c4 += c0_offset;
            }
            LevelPrediction { j: j + 1, m, energy, coeffs }
        })
        .collect();
    SpectralPrediction {
        b0: wn.b0,
        nu,
        c0: wn.c0,
        c0_offset,
        c0_includes_quantization_remainder: false,
        max_k,
        levels: out,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct WeylBand {
    pub n: Vec<u32>,
    pub integral: f64,
    pub contribution: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct WeylTable {
    pub b1: f64,
    pub hbar: f64,
    pub points_per_axis: usize,
    pub region: Vec<(f64, f64)>,
    pub total: f64,
    pub bands: Vec<WeylBand>,
}

#[derive(Clone, Debug, Default)]
pub struct WeylOptions {
    /// Midpoint points per axis; defaults to 400 in 2D and 40 otherwise.
    pub points: Option<usize>,
    /// Integration box; defaults to the bounding box of `{b <= b1}`.
    pub region: Option<Vec<(f64, f64)>>,
}

fn default_points(d: usize) -> usize {
    if d <= 2 {
        400
    } else {
        40
    }
}

/// Bounding box of `{b <= b1}` from a scan of the domain, padded by one scan cell.
/// `None` for an empty sublevel set.
pub fn sublevel_box(sys: &MagneticSystem, b1: f64) -> Result<Option<Vec<(f64, f64)>>> {
    let d = sys.dim();
    let n = if d <= 2 { 201 } else { 25 };
    let dom = sys.domain();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    let mut any = false;
    for q in crate::field::box_grid(dom, n) {
        if sys.intensity(&q) <= b1 {
            any = true;
            for k in 0..d {
                let (a, b) = dom[k];
                if (q[k] - a).abs() < 1e-12 || (q[k] - b).abs() < 1e-12 {
                    return Err(Error::Boundary(format!(
                        "sublevel set {{b <= {b1}}} reaches the domain boundary at {q:?}"
                    )));
                }
                lo[k] = lo[k].min(q[k]);
                hi[k] = hi[k].max(q[k]);
            }
        }
    }
    if !any {
        return Ok(None);
    }
    Ok(Some(
        (0..d)
            .map(|k| {
                let (a, b) = dom[k];
                let cell = (b - a) / (n - 1) as f64;
                ((lo[k] - cell).max(a), (hi[k] + cell).min(b))
            })
            .collect(),
    ))
}

/// Weyl-law prediction of the number of eigenvalues below `b1 hbar`.
pub fn weyl_count(sys: &MagneticSystem, b1: f64, hbar: f64, opts: &WeylOptions) -> Result<WeylTable> {
    let d = sys.dim();
    let pairs = d / 2;
    let points = opts.points.unwrap_or_else(|| default_points(d));
    if points == 0 || !(hbar > 0.0) {
        return Err(Error::Invalid("Weyl count needs positive hbar and grid size".into()));
    }
    let region = match &opts.region {
        Some(r) => Some(r.clone()),
        None => sublevel_box(sys, b1)?,
    };
    let Some(region) = region else {
        return Ok(WeylTable { b1, hbar, points_per_axis: points, region: Vec::new(), total: 0.0, bands: Vec::new() });
    };
    let cell: Vec<f64> = region.iter().map(|(a, b)| (b - a) / points as f64).collect();
    let vol: f64 = cell.iter().product();
    let total_pts = points.pow(d as u32);
    let mut samples: Vec<Vec<f64>> = Vec::new();
    let mut b0 = f64::INFINITY;
    let mut bmin = f64::INFINITY;
    for mut idx in 0..total_pts {
        let q: Vec<f64> = (0..d)
            .map(|k| {
                let i = idx % points;
                idx /= points;
                region[k].0 + (i as f64 + 0.5) * cell[k]
            })
            .collect();
        let beta = sys.frequencies(&q);
        let b: f64 = beta.iter().sum();
        b0 = b0.min(b);
        if b <= b1 {
            bmin = bmin.min(beta[0]);
            samples.push(beta);
        }
    }
    let c = 2.0 * bmin;
    let mut bands = Vec::new();
    let scale = (2.0 * PI * hbar).powi(pairs as i32);
    for n in enumerate_bands(b0, c, b1, pairs) {
        let mut integral = 0.0;
        for beta in &samples {
            let bn: f64 = beta.iter().zip(&n).map(|(b, nj)| b * (2 * nj + 1) as f64).sum();
            if bn <= b1 {
                integral += beta.iter().product::<f64>() * vol;
            }
        }
        if integral > 0.0 {
            bands.push(WeylBand { n, integral, contribution: integral / scale });
        }
    }
    let total = bands.iter().map(|b| b.contribution).sum();
    Ok(WeylTable { b1, hbar, points_per_axis: points, region, total, bands })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oscillator_levels() {
        let l = harmonic_levels(&[1.0], 4);
        let e: Vec<f64> = l.iter().map(|x| x.energy).collect();
        assert_eq!(e, vec![1.0, 3.0, 5.0, 7.0]);
        let l = harmonic_levels(&[1.0, 1.0], 6);
        let m: Vec<usize> = l.iter().map(|x| x.multiplicity).collect();
        assert_eq!(m, vec![1, 2, 3]);
        let s2 = 2f64.sqrt();
        let l = harmonic_levels(&[1.0, s2], 3);
        assert!((l[0].energy - (1.0 + s2)).abs() < 1e-12);
        assert!((l[1].energy - (3.0 + s2)).abs() < 1e-12);
        assert!((l[2].energy - (1.0 + 3.0 * s2)).abs() < 1e-12);
    }

    #[test]
    fn band_enumeration() {
        assert_eq!(band_floor(1.0, &[0], 1.0), 1.0);
        let b = enumerate_bands(1.0, 1.0, 3.0, 1);
        assert_eq!(b, vec![vec![0], vec![1], vec![2]]);
        assert!(enumerate_bands(1.0, 1.0, 0.5, 2).is_empty());
    }
}
