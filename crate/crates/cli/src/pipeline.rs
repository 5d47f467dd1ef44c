//! The computational stages shared by the commands.

use serde::Serialize;

use magwell::birkhoff::{add_quantization_remainder, birkhoff_reduce, star_rewrite, FStar, NormalForm};
use magwell::classical::{reduce_hamiltonian, ReducedSymbol};
use magwell::field::{find_well, validate_assumptions, AssumptionReport, MagneticSystem, ResonanceOrder, WellData};
use magwell::predict::{predict_eigenvalues, SpectralPrediction};
use magwell_oracle::{fit_expansion, hbar_sweep, OracleSpectrum};

use crate::config::RunConfig;
use crate::error::CliError;

pub struct Analysis {
    pub sys: MagneticSystem,
    pub well: WellData,
    pub report: AssumptionReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct WellReport {
    pub q0: Vec<f64>,
    pub b0: f64,
    pub hessian: Vec<Vec<f64>>,
    pub beta: Vec<f64>,
    pub resonance: ResonanceOrder,
    pub assumptions: AssumptionReport,
}

impl Analysis {
    pub fn well_report(&self) -> WellReport {
        let h = &self.well.hessian;
        WellReport {
            q0: self.well.q0.clone(),
            b0: self.well.b0,
            hessian: (0..h.nrows()).map(|i| (0..h.ncols()).map(|j| h[(i, j)]).collect()).collect(),
            beta: self.well.beta.clone(),
            resonance: self.well.resonance.clone(),
            assumptions: self.report.clone(),
        }
    }

    /// Error when a hypothesis needed by the symbolic stages fails.
    pub fn require(&self) -> Result<(), CliError> {
        let f = self.report.failures();
        if f.is_empty() {
            Ok(())
        } else {
            let names: Vec<String> = f.iter().map(|c| format!("{} ({})", c.name, c.detail)).collect();
            Err(CliError::Assumption(names.join("; ")))
        }
    }
}

pub fn system(cfg: &RunConfig) -> Result<MagneticSystem, CliError> {
    cfg.system().map_err(|e| CliError::Config(vec![format!("system: {e}")]))
}

pub fn analyze(cfg: &RunConfig) -> Result<Analysis, CliError> {
    let sys = system(cfg)?;
    let well = find_well(&sys, &cfg.initial_guess(), cfg.system.well_tol)?;
    let report = validate_assumptions(&sys, &well, cfg.prediction.b1, Some(cfg.truncation.r));
    Ok(Analysis { sys, well, report })
}

pub fn reduce(cfg: &RunConfig, a: &Analysis) -> Result<ReducedSymbol, CliError> {
    a.require()?;
    Ok(reduce_hamiltonian(&a.sys, &a.well, cfg.truncation.order(), &cfg.chart.options())?)
}

pub fn normal_form(cfg: &RunConfig, red: &ReducedSymbol) -> Result<(NormalForm, FStar), CliError> {
    let symbol = add_quantization_remainder(&red.symbol, &cfg.remainder)?;
    let nf = birkhoff_reduce(&symbol, cfg.truncation.r)?;
    let fs = star_rewrite(&nf.kappa)?;
    Ok((nf, fs))
}

pub fn predict(cfg: &RunConfig, nf: &NormalForm, fs: &FStar, count: usize) -> Result<SpectralPrediction, CliError> {
    let mut p = predict_eigenvalues(nf, fs, count, cfg.prediction.c0_offset)?;
    p.c0_includes_quantization_remainder = !cfg.remainder.is_empty();
    Ok(p)
}

/// Analysis through prediction in one call.
pub fn full_prediction(cfg: &RunConfig, count: usize) -> Result<(Analysis, SpectralPrediction), CliError> {
    let a = analyze(cfg)?;
    let red = reduce(cfg, &a)?;
    let (nf, fs) = normal_form(cfg, &red)?;
    let p = predict(cfg, &nf, &fs, count)?;
    Ok((a, p))
}

pub fn sweep(cfg: &RunConfig, sys: &MagneticSystem) -> Result<Vec<OracleSpectrum>, CliError> {
    let rule = cfg.oracle.grid_rule(&cfg.system);
    Ok(hbar_sweep(sys, &rule, &cfg.oracle.hbars, &cfg.oracle.solver(), cfg.oracle.memory_cap())?)
}

/// Per-level summary of the comparison.
#[derive(Clone, Debug, Serialize)]
pub struct LevelFit {
    pub j: usize,
    pub m: Vec<u32>,
    /// Fitted `hbar^2` coefficient of `lambda_j - hbar b0 - hbar^2 E_j`.
    pub c0_fit: Option<f64>,
    pub c0_std_error: Option<f64>,
    pub residual_exponent: Option<f64>,
    pub residual_coeff: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CompareRow {
    pub hbar: f64,
    pub j: usize,
    pub oracle: f64,
    pub predicted: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Comparison {
    /// Offset added to the predicted `hbar^2` coefficients (fitted from `j = 1` when possible).
    pub c0_offset: f64,
    pub offset_fitted: bool,
    pub levels: Vec<LevelFit>,
    pub rows: Vec<CompareRow>,
}

/// Join oracle spectra with the through-`hbar^2` predictions and fit the `c0` offset.
pub fn compare(cfg: &RunConfig, pred: &SpectralPrediction, spectra: &[OracleSpectrum]) -> Result<Comparison, CliError> {
    let hbars: Vec<f64> = spectra.iter().map(|s| s.spec.hbar).collect();
    let k = spectra.iter().map(|s| s.eigenvalues.len()).min().unwrap_or(0).min(pred.levels.len());
    let base = |j: usize, h: f64| {
        let l = &pred.levels[j];
        l.coeffs.iter().filter(|(k, _)| **k <= 4).map(|(k, c)| c * h.powf(*k as f64 / 2.0)).sum::<f64>()
            - pred.c0_offset * h * h
    };
    let mut levels = Vec::new();
    for j in 0..k {
        let res: Vec<f64> = spectra.iter().map(|s| s.eigenvalues[j] - base(j, s.spec.hbar)).collect();
        let fit = fit_expansion(&hbars, &res, &[4]).ok();
        levels.push(LevelFit {
            j: j + 1,
            m: pred.levels[j].m.clone(),
            c0_fit: fit.as_ref().map(|f| f.coeffs[0]),
            c0_std_error: fit.as_ref().map(|f| f.std_errors[0]),
            residual_exponent: fit.as_ref().and_then(|f| f.residual_exponent),
            residual_coeff: fit.as_ref().and_then(|f| f.residual_coeff),
        });
    }
    let fitted = levels.first().and_then(|l| l.c0_fit);
    let offset = fitted.unwrap_or(cfg.prediction.c0_offset);
    let mut rows = Vec::new();
    for s in spectra {
        for j in 0..k {
            let h = s.spec.hbar;
            let predicted = base(j, h) + offset * h * h;
            rows.push(CompareRow { hbar: h, j: j + 1, oracle: s.eigenvalues[j], predicted, residual: s.eigenvalues[j] - predicted });
        }
    }
    Ok(Comparison { c0_offset: offset, offset_fitted: fitted.is_some(), levels, rows })
}
