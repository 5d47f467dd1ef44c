use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{OracleError, Result};

/// Least-squares fit `y(hbar) ~ sum_k c_k hbar^(k/2)`.
#[derive(Clone, Debug, Serialize)]
pub struct Fit {
    /// Half-integer powers `k`, meaning `hbar^(k/2)`.
    pub powers: Vec<u32>,
    pub coeffs: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub rss: f64,
    pub condition: f64,
    /// Exponent `p` of the best extra term `C hbar^p`; `None` when the model is exact.
    pub residual_exponent: Option<f64>,
    pub residual_coeff: Option<f64>,
}

struct Solved {
    coeffs: Vec<f64>,
    rss: f64,
    cond: f64,
    cov_diag: Vec<f64>,
}

fn solve(x: &[f64], y: &[f64], exps: &[f64]) -> Solved {
    let (n, p) = (x.len(), exps.len());
    let mut a = DMatrix::from_fn(n, p, |i, j| x[i].powf(exps[j]));
    let scales: Vec<f64> = (0..p).map(|j| a.column(j).norm().max(1e-300)).collect();
    for j in 0..p {
        a.column_mut(j).scale_mut(1.0 / scales[j]);
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let b = DVector::from_column_slice(y);
    let sol = svd.solve(&b, 1e-300).unwrap_or_else(|_| DVector::zeros(p));
    let r = &a * &sol - &b;
    let rss = r.norm_squared();
    let vt = svd.v_t.as_ref().unwrap();
    let cov_diag = (0..p)
        .map(|j| {
            let v: f64 = (0..p).map(|k| (vt[(k, j)] / svd.singular_values[k]).powi(2)).sum();
            v / (scales[j] * scales[j])
        })
        .collect();
    Solved { coeffs: (0..p).map(|j| sol[j] / scales[j]).collect(), rss, cond, cov_diag }
}

/// Fit over the requested powers, then locate the exponent of the leading neglected
/// term by scanning an augmented model `sum c_k hbar^(k/2) + C hbar^p` for the `p`
/// with smallest residual.
pub fn fit_expansion(hbars: &[f64], values: &[f64], powers: &[u32]) -> Result<Fit> {
    let n = hbars.len();
    if n != values.len() {
        return Err(OracleError::Invalid("sample and value counts differ".into()));
    }
    if powers.is_empty() {
        return Err(OracleError::Invalid("no powers requested".into()));
    }
    let mut distinct: Vec<f64> = hbars.to_vec();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    if distinct.len() < powers.len() + 2 {
        return Err(OracleError::Invalid(format!(
            "need at least {} distinct hbar values, got {}",
            powers.len() + 2,
            distinct.len()
        )));
    }
    if distinct[0] <= 0.0 || distinct[distinct.len() - 1] < 4.0 * distinct[0] {
        return Err(OracleError::Invalid("hbar samples must be positive and span a factor of 4".into()));
    }
    let exps: Vec<f64> = powers.iter().map(|&k| k as f64 / 2.0).collect();
    let base = solve(hbars, values, &exps);
    if base.cond > 1e12 {
        return Err(OracleError::IllConditioned(base.cond));
    }
    let dof = n - powers.len();
    let sigma2 = base.rss / dof as f64;
    let std_errors = base.cov_diag.iter().map(|v| (sigma2 * v).sqrt()).collect();
    let scale: f64 = values.iter().map(|v| v * v).sum();
    let (mut best_p, mut best_rss, mut best_c) = (None, f64::INFINITY, None);
    if base.rss > 1e-26 * scale.max(1e-300) {
        let top = exps.iter().cloned().fold(0.0, f64::max) + 4.0;
        let mut p = 0.25;
        while p <= top + 1e-12 {
            if exps.iter().all(|e| (e - p).abs() > 0.02) {
                let mut aug = exps.clone();
                aug.push(p);
                let s = solve(hbars, values, &aug);
                if s.cond < 1e12 && s.rss < best_rss {
                    best_rss = s.rss;
                    best_p = Some(p);
                    best_c = s.coeffs.last().copied();
                }
            }
            p += 0.005;
        }
    }
    Ok(Fit {
        powers: powers.to_vec(),
        coeffs: base.coeffs,
        std_errors,
        rss: base.rss,
        condition: base.cond,
        residual_exponent: best_p,
        residual_coeff: best_c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const H: [f64; 6] = [0.1, 0.07, 0.05, 0.035, 0.025, 0.018];

    #[test]
    fn exact_model() {
        let y: Vec<f64> = H.iter().map(|h| h + 3.0 * h * h).collect();
        let f = fit_expansion(&H, &y, &[2, 4]).unwrap();
        assert!((f.coeffs[0] - 1.0).abs() < 1e-10 && (f.coeffs[1] - 3.0).abs() < 1e-8);
        assert!(f.rss < 1e-28);
    }

    #[test]
    fn half_power_residual() {
        let y: Vec<f64> = H.iter().map(|h| h + 3.0 * h * h + 0.5 * h.powf(2.5)).collect();
        let f = fit_expansion(&H, &y, &[2, 4]).unwrap();
        let p = f.residual_exponent.unwrap();
        assert!((p - 2.5).abs() < 0.1, "{p}");
    }

    #[test]
    fn preconditions() {
        assert!(fit_expansion(&H[..3], &[1.0, 2.0, 3.0], &[2, 4]).is_err());
        assert!(fit_expansion(&[0.1, 0.09, 0.08, 0.07], &[1.0; 4], &[2]).is_err());
    }
}
