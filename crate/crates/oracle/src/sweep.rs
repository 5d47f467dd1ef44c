use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use magwell::field::MagneticSystem;

use crate::banded::BandLdl;
use crate::error::{OracleError, Result};
use crate::lanczos::{lowest_eigenvalues, SolverOptions};
use crate::lattice::{build_operator, DiscretizationSpec, LinkRule, Operator};

/// How the grid is chosen for each `hbar`: spacing at most `factor * sqrt(hbar)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridRule {
    pub region: Vec<(f64, f64)>,
    pub factor: f64,
    #[serde(default = "min_points")]
    pub min_points: usize,
    #[serde(default)]
    pub link_rule: LinkRule,
    #[serde(default = "stencil")]
    pub stencil: u8,
}

fn min_points() -> usize {
    16
}

fn stencil() -> u8 {
    2
}

pub fn grid_points_for(rule: &GridRule, hbar: f64) -> usize {
    let hmax = rule.factor * hbar.sqrt();
    let need = rule
        .region
        .iter()
        .map(|(a, b)| ((b - a) / hmax - 1e-9).ceil() as usize + 1)
        .max()
        .unwrap_or(16);
    need.max(rule.min_points).max(16)
}

impl GridRule {
    pub fn spec(&self, hbar: f64) -> DiscretizationSpec {
        DiscretizationSpec {
            region: self.region.clone(),
            points: grid_points_for(self, hbar),
            hbar,
            link_rule: self.link_rule,
            stencil: self.stencil,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleSpectrum {
    pub spec: DiscretizationSpec,
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub method: &'static str,
}

/// Lowest eigenvalues on one grid.
pub fn spectrum(sys: &MagneticSystem, spec: &DiscretizationSpec, opts: &SolverOptions, mem_cap: u64) -> Result<OracleSpectrum> {
    let op = build_operator(sys, spec, mem_cap, opts.max_dim)?;
    let r = lowest_eigenvalues(&op.matrix, opts, spec.region.len() == 2)?;
    Ok(OracleSpectrum {
        spec: spec.clone(),
        eigenvalues: r.values,
        residuals: r.residuals,
        iterations: r.iterations,
        method: r.method,
    })
}

/// One spectrum per `hbar`, in input order.
pub fn hbar_sweep(
    sys: &MagneticSystem,
    rule: &GridRule,
    hbars: &[f64],
    opts: &SolverOptions,
    mem_cap: u64,
) -> Result<Vec<OracleSpectrum>> {
    hbars.par_iter().map(|&h| spectrum(sys, &rule.spec(h), opts, mem_cap)).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct CountResult {
    pub threshold: f64,
    pub count: usize,
    /// Counts at the edges of the tolerance band around the threshold.
    pub count_low: usize,
    pub count_high: usize,
    /// Independent count from extracted eigenvalues.
    pub lanczos_count: usize,
    pub eigenvalues: Vec<f64>,
}

/// Number of eigenvalues below `threshold`, with multiplicity.
pub fn count_below(op: &Operator, threshold: f64, opts: &SolverOptions) -> Result<CountResult> {
    let a = &op.matrix;
    let band = 1e-6 * threshold.abs().max(1e-300);
    let banded = op.spec.region.len() == 2;
    let (count, low, high) = if banded {
        let at = |t: f64| BandLdl::factor(a, t).map(|f| f.negative_count());
        (at(threshold)?, at(threshold - band)?, at(threshold + band)?)
    } else {
        (0, 0, 0)
    };
    if banded && count == 0 {
        return Ok(CountResult { threshold, count, count_low: low, count_high: high, lanczos_count: 0, eigenvalues: vec![] });
    }
    // extract until an eigenvalue above the threshold shows up
    let mut k = if banded { count + 2 } else { 8 };
    loop {
        let k_eff = k.min(a.n);
        let o = SolverOptions { k: k_eff, max_dim: opts.max_dim.max(3 * k_eff + 40), ..opts.clone() };
        let r = lowest_eigenvalues(a, &o, banded)?;
        let below = r.values.iter().filter(|&&v| v < threshold).count();
        if below < k_eff || k_eff == a.n {
            let (c, l, h) = if banded {
                (count, low, high)
            } else {
                let cnt = |t: f64| r.values.iter().filter(|&&v| v < t).count();
                (below, cnt(threshold - band), cnt(threshold + band))
            };
            return Ok(CountResult { threshold, count: c, count_low: l, count_high: h, lanczos_count: below, eigenvalues: r.values });
        }
        if banded {
            return Err(OracleError::Invalid("eigenvalue extraction disagrees with the inertia count".into()));
        }
        k *= 2;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use magwell::field::PotentialTerm;

    fn landau() -> MagneticSystem {
        MagneticSystem::new(
            vec![vec![], vec![PotentialTerm { coeff: 1.0, powers: vec![1, 0] }]],
            vec![(-3.0, 3.0); 2],
        )
        .unwrap()
    }

    #[test]
    fn grid_rule_respects_spacing() {
        let rule = GridRule { region: vec![(-3.0, 3.0); 2], factor: 0.15, min_points: 16, link_rule: LinkRule::Midpoint, stencil: 2 };
        for h in [0.1, 0.05, 0.025] {
            let spec = rule.spec(h);
            assert!(spec.max_spacing() <= 0.15 * h.sqrt() + 1e-12);
        }
    }

    #[test]
    fn count_matches_extracted_eigenvalues() {
        let spec = DiscretizationSpec { region: vec![(-2.0, 2.0); 2], points: 41, hbar: 0.3, link_rule: LinkRule::Midpoint, stencil: 2 };
        let op = build_operator(&landau(), &spec, u64::MAX, 300).unwrap();
        let opts = SolverOptions { k: 10, ..Default::default() };
        let r = lowest_eigenvalues(&op.matrix, &opts, true).unwrap();
        let t = 0.5 * (r.values[5] + r.values[6]);
        let c = count_below(&op, t, &opts).unwrap();
        assert_eq!(c.count, 6);
        assert_eq!(c.lanczos_count, 6);
        assert_eq!(count_below(&op, 0.5 * r.values[0], &opts).unwrap().count, 0);
    }

    #[test]
    fn empty_sweep() {
        let rule = GridRule { region: vec![(-3.0, 3.0); 2], factor: 0.15, min_points: 16, link_rule: LinkRule::Midpoint, stencil: 2 };
        assert!(hbar_sweep(&landau(), &rule, &[], &SolverOptions::default(), u64::MAX).unwrap().is_empty());
    }
}
