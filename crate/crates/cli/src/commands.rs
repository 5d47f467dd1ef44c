//! Subcommands: each writes its artifacts and returns a short human summary.

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::json;

use magwell::jet::{JetDocument, JetMap};
use magwell::predict::{weyl_count, WeylOptions};
use magwell_oracle::{build_operator, count_below, OracleSpectrum};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{fmt, Output};
use crate::pipeline;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Analyze,
    Reduce,
    NormalForm,
    Predict,
    Oracle,
    Compare,
    Weyl,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Flags {
    pub dump_jets: bool,
    pub dump_matrix: bool,
}

pub fn run(cmd: Command, cfg: &RunConfig, flags: Flags) -> Result<String, CliError> {
    let mut out = Output::new(cfg)?;
    match cmd {
        Command::Analyze => analyze(cfg, &mut out),
        Command::Reduce => reduce(cfg, flags, &mut out),
        Command::NormalForm => normal_form(cfg, flags, &mut out),
        Command::Predict => predict(cfg, flags, &mut out),
        Command::Oracle => oracle(cfg, flags, &mut out),
        Command::Compare => compare(cfg, flags, &mut out),
        Command::Weyl => weyl(cfg, &mut out),
    }
}

fn analyze(cfg: &RunConfig, out: &mut Output) -> Result<String, CliError> {
    let a = pipeline::analyze(cfg)?;
    let rep = a.well_report();
    out.json("well.json", &rep)?;
    let mut s = String::new();
    writeln!(s, "well q0      {:?}", rep.q0).unwrap();
    writeln!(s, "b0           {}", fmt(rep.b0)).unwrap();
    writeln!(s, "beta         {:?}", rep.beta).unwrap();
    writeln!(s, "resonance    {:?}", rep.resonance).unwrap();
    for c in &rep.assumptions.checks {
        writeln!(s, "{:<22} {:<4} {}", c.name, if c.passed { "ok" } else { "FAIL" }, c.detail).unwrap();
    }
    a.require()?;
    Ok(s)
}

fn dump_map(out: &mut Output, name: &str, map: &JetMap) -> Result<(), CliError> {
    let docs: Vec<JetDocument> = map.components.iter().map(|j| j.to_document()).collect();
    out.json(&format!("jets/{name}.json"), &docs)?;
    Ok(())
}

#[derive(Serialize)]
struct ReduceReport {
    z_order: u32,
    w_order: u32,
    form_residual: f64,
    low_order_defect: f64,
    quadratic_defect: f64,
    beta_hat_at_well: Vec<f64>,
    beta_at_well: Vec<f64>,
    beta_mismatch: f64,
    symbol_terms: usize,
}

fn reduce_stage(
    cfg: &RunConfig,
    flags: Flags,
    out: &mut Output,
) -> Result<(pipeline::Analysis, magwell::classical::ReducedSymbol), CliError> {
    let a = pipeline::analyze(cfg)?;
    let red = pipeline::reduce(cfg, &a)?;
    let bh: Vec<f64> = red.beta_hat.iter().map(|b| b.constant_term().re).collect();
    let mismatch = bh.iter().zip(&a.well.beta).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let order = cfg.truncation.order();
    out.json(
        "reduce.json",
        &ReduceReport {
            z_order: order.z_order,
            w_order: order.w_order,
            form_residual: red.chart.form_residual,
            low_order_defect: red.low_order_defect,
            quadratic_defect: red.quadratic_defect,
            beta_hat_at_well: bh,
            beta_at_well: a.well.beta.clone(),
            beta_mismatch: mismatch,
            symbol_terms: red.symbol.len(),
        },
    )?;
    if flags.dump_jets {
        dump_map(out, "phi", &red.chart.phi)?;
        dump_map(out, "psi", &red.psi)?;
        out.json("jets/h_hat_real.json", &red.real.to_document())?;
        out.json("jets/h_hat.json", &red.symbol.to_document())?;
    }
    Ok((a, red))
}

fn reduce(cfg: &RunConfig, flags: Flags, out: &mut Output) -> Result<String, CliError> {
    let (a, red) = reduce_stage(cfg, flags, out)?;
    Ok(format!(
        "form residual {}\nlow-order defect {}\noff-diagonal quadratic defect {}\nbeta_hat(0) {:?} vs beta {:?}\n",
        fmt(red.chart.form_residual),
        fmt(red.low_order_defect),
        fmt(red.quadratic_defect),
        red.beta_hat.iter().map(|b| b.constant_term().re).collect::<Vec<_>>(),
        a.well.beta
    ))
}

#[derive(Serialize)]
struct NormalFormReport {
    r: u32,
    defect: f64,
    kappa_terms: usize,
    rho_valuation: Option<u32>,
    fstar_records: usize,
}

fn normal_form_stage(
    cfg: &RunConfig,
    flags: Flags,
    out: &mut Output,
) -> Result<(magwell::birkhoff::NormalForm, magwell::birkhoff::FStar), CliError> {
    let (_, red) = reduce_stage(cfg, flags, out)?;
    let (nf, fs) = pipeline::normal_form(cfg, &red)?;
    out.json(
        "normal_form.json",
        &NormalFormReport {
            r: nf.r,
            defect: nf.defect,
            kappa_terms: nf.kappa.len(),
            rho_valuation: nf.rho.valuation(),
            fstar_records: fs.table.len(),
        },
    )?;
    out.json("fstar.json", &fs.to_document())?;
    if flags.dump_jets {
        for (name, j) in [("tau", &nf.tau), ("gamma", &nf.gamma), ("kappa", &nf.kappa), ("rho", &nf.rho)] {
            out.json(&format!("jets/{name}.json"), &j.to_document())?;
        }
    }
    Ok((nf, fs))
}

fn normal_form(cfg: &RunConfig, flags: Flags, out: &mut Output) -> Result<String, CliError> {
    let (nf, fs) = normal_form_stage(cfg, flags, out)?;
    Ok(format!("normal form r = {}, defect {}, {} f* records\n", nf.r, fmt(nf.defect), fs.table.len()))
}

fn predict(cfg: &RunConfig, flags: Flags, out: &mut Output) -> Result<String, CliError> {
    let (nf, fs) = normal_form_stage(cfg, flags, out)?;
    let p = pipeline::predict(cfg, &nf, &fs, cfg.prediction.count)?;
    let rows: Vec<Vec<String>> = p
        .levels
        .iter()
        .flat_map(|l| l.coeffs.iter().map(move |(k, c)| vec![l.j.to_string(), k.to_string(), fmt(*c)]))
        .collect();
    out.csv("predict.csv", &["j", "k", "coefficient"], &rows)?;
    out.json("predict.json", &p)?;
    let mut s = format!("b0 {}  nu {:?}  c0 {}\n", fmt(p.b0), p.nu, fmt(p.c0));
    for l in &p.levels {
        let c: Vec<String> = l.coeffs.iter().map(|(k, c)| format!("{k}:{c:.6}")).collect();
        writeln!(s, "j={} m={:?} {}", l.j, l.m, c.join(" ")).unwrap();
    }
    Ok(s)
}

fn half_width(s: &OracleSpectrum) -> f64 {
    s.spec.region.iter().map(|(a, b)| 0.5 * (b - a)).fold(0.0, f64::max)
}

fn oracle_rows(spectra: &[OracleSpectrum]) -> Vec<Vec<String>> {
    spectra
        .iter()
        .flat_map(|s| {
            s.eigenvalues.iter().zip(&s.residuals).enumerate().map(move |(j, (l, r))| {
                vec![fmt(s.spec.hbar), s.spec.points.to_string(), fmt(half_width(s)), (j + 1).to_string(), fmt(*l), fmt(*r)]
            })
        })
        .collect()
}

fn dump_matrices(cfg: &RunConfig, sys: &magwell::field::MagneticSystem, out: &mut Output) -> Result<(), CliError> {
    let rule = cfg.oracle.grid_rule(&cfg.system);
    for (i, h) in cfg.oracle.hbars.iter().enumerate() {
        let op = build_operator(sys, &rule.spec(*h), cfg.oracle.memory_cap(), cfg.oracle.max_dim)?;
        out.text(&format!("matrices/matrix_{i}.txt"), &op.matrix.triplets())?;
    }
    Ok(())
}

#[derive(Serialize)]
struct LandauError {
    hbar: f64,
    j: usize,
    eigenvalue: f64,
    level: f64,
    relative_error: f64,
}

fn oracle(cfg: &RunConfig, flags: Flags, out: &mut Output) -> Result<String, CliError> {
    let sys = pipeline::system(cfg)?;
    let spectra = pipeline::sweep(cfg, &sys)?;
    out.csv("oracle.csv", &["hbar", "n_grid", "L", "j", "lambda", "residual"], &oracle_rows(&spectra))?;
    let mut landau = Vec::new();
    if let Some(b) = cfg.oracle.landau_field {
        for s in &spectra {
            for (j, &l) in s.eigenvalues.iter().enumerate() {
                let unit = b * s.spec.hbar;
                let k = ((l / unit - 1.0) / 2.0).round().max(0.0);
                let level = unit * (2.0 * k + 1.0);
                landau.push(LandauError { hbar: s.spec.hbar, j: j + 1, eigenvalue: l, level, relative_error: (l - level).abs() / level });
            }
        }
    }
    out.json("oracle.json", &json!({"spectra": spectra, "landau": landau}))?;
    if flags.dump_matrix {
        dump_matrices(cfg, &sys, out)?;
    }
    let mut s = String::new();
    for sp in &spectra {
        writeln!(s, "hbar {} n {} ({}): {:?}", fmt(sp.spec.hbar), sp.spec.points, sp.method, sp.eigenvalues).unwrap();
    }
    for e in &landau {
        writeln!(s, "hbar {} j {} level {} relative error {:.3e}", fmt(e.hbar), e.j, fmt(e.level), e.relative_error).unwrap();
    }
    Ok(s)
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt).unwrap_or_default()
}

fn compare(cfg: &RunConfig, flags: Flags, out: &mut Output) -> Result<String, CliError> {
    let (a, pred) = pipeline::full_prediction(cfg, cfg.oracle.k)?;
    let spectra = pipeline::sweep(cfg, &a.sys)?;
    let cmp = pipeline::compare(cfg, &pred, &spectra)?;
    let exp_of = |j: usize| cmp.levels.get(j - 1).and_then(|l| l.residual_exponent);
    let rows: Vec<Vec<String>> = cmp
        .rows
        .iter()
        .map(|r| vec![fmt(r.hbar), r.j.to_string(), fmt(r.oracle), fmt(r.predicted), fmt(r.residual), opt(exp_of(r.j))])
        .collect();
    out.csv("compare.csv", &["hbar", "j", "oracle", "predicted", "residual", "residual_exponent"], &rows)?;
    let long: Vec<Vec<String>> = cmp
        .rows
        .iter()
        .flat_map(|r| {
            [("oracle", r.oracle), ("predicted", r.predicted), ("residual", r.residual)]
                .into_iter()
                .map(move |(name, v)| vec![fmt(r.hbar), r.j.to_string(), name.to_string(), fmt(v)])
        })
        .collect();
    out.csv("compare_long.csv", &["hbar", "j", "series", "value"], &long)?;
    let fits: Vec<Vec<String>> = cmp
        .levels
        .iter()
        .map(|l| vec![l.j.to_string(), opt(l.c0_fit), opt(l.c0_std_error), opt(l.residual_exponent), opt(l.residual_coeff)])
        .collect();
    out.csv("compare_fit.csv", &["j", "c0_fit", "c0_std_error", "residual_exponent", "residual_coeff"], &fits)?;
    out.json("compare.json", &json!({"prediction": pred, "comparison": cmp}))?;
    if flags.dump_matrix {
        dump_matrices(cfg, &a.sys, out)?;
    }
    let mut s = format!("c0 offset {} ({})\n", fmt(cmp.c0_offset), if cmp.offset_fitted { "fitted" } else { "configured" });
    for l in &cmp.levels {
        writeln!(s, "j={} c0_fit {} residual exponent {}", l.j, opt(l.c0_fit), opt(l.residual_exponent)).unwrap();
    }
    Ok(s)
}

fn weyl(cfg: &RunConfig, out: &mut Output) -> Result<String, CliError> {
    let sys = pipeline::system(cfg)?;
    let opts = WeylOptions { points: cfg.weyl.points, region: None };
    let rule = cfg.oracle.grid_rule(&cfg.system);
    let mut rows = Vec::new();
    let mut bands = Vec::new();
    let mut s = String::new();
    for &b1 in &cfg.weyl.b1 {
        for &h in &cfg.weyl.hbars {
            let t = weyl_count(&sys, b1, h, &opts)?;
            for b in &t.bands {
                let n: Vec<String> = b.n.iter().map(|x| x.to_string()).collect();
                bands.push(vec![fmt(b1), fmt(h), n.join(";"), fmt(b.integral), fmt(b.contribution)]);
            }
            let (count, low, high) = if cfg.weyl.oracle {
                let op = build_operator(&sys, &rule.spec(h), cfg.oracle.memory_cap(), cfg.oracle.max_dim)?;
                let c = count_below(&op, b1 * h, &cfg.oracle.solver())?;
                (c.count.to_string(), c.count_low.to_string(), c.count_high.to_string())
            } else {
                Default::default()
            };
            writeln!(s, "b1 {b1} hbar {h}: predicted {:.3} oracle {count}", t.total).unwrap();
            rows.push(vec![fmt(b1), fmt(h), fmt(t.total), count, low, high]);
        }
    }
    out.csv("weyl.csv", &["b1", "hbar", "predicted", "oracle", "oracle_low", "oracle_high"], &rows)?;
    out.csv("weyl_bands.csv", &["b1", "hbar", "n", "integral", "contribution"], &bands)?;
    Ok(s)
}
