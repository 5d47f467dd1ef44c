//! Acceptance criteria 1-8. Prints one PASS/FAIL line per criterion.
//!
//! The process exits with status 0 unless `MAGWELL_STRICT_ACCEPTANCE=1` is set, in which
//! case any failure makes it exit with status 1. `MAGWELL_ACCEPTANCE_ONLY=1,4` runs a subset.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use magwell::birkhoff::birkhoff_reduce;
use magwell::classical::{reduce_hamiltonian, ChartOptions, ReductionOrder};
use magwell::field::{find_well, resonance_order, MagneticSystem, PotentialTerm, ResonanceOrder};
use magwell::jet::{exp_ad, moyal_bracket, moyal_star, scaled_ad, Basis, Coeff, Exact, GradeBound, Jet, Mono, Vars};
use magwell::predict::{weyl_count, SpectralPrediction, WeylOptions};
use magwell::Error;
use magwell_cli::config::PolyTerm;
use magwell_cli::{pipeline, presets, RunConfig};
use magwell_oracle::{build_operator, count_below, fit_expansion, spectrum, DiscretizationSpec, LinkRule, SolverOptions};
use num_complex::Complex64;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn term(c: f64, p: &[u32]) -> PotentialTerm {
    PotentialTerm { coeff: c, powers: p.to_vec() }
}

fn reference_2d() -> MagneticSystem {
    MagneticSystem::new(
        vec![vec![], vec![term(1.0, &[1, 0]), term(1.0 / 3.0, &[3, 0]), term(1.0, &[1, 2])]],
        vec![(-3.0, 3.0); 2],
    )
    .unwrap()
}

/// beta(0) = (1, sqrt 2), exact 2-form.
fn reference_4d() -> MagneticSystem {
    let s2 = 2f64.sqrt();
    MagneticSystem::new(
        vec![
            vec![],
            vec![term(1.0, &[1, 0, 0, 0]), term(1.0 / 3.0, &[3, 0, 0, 0]), term(1.0, &[1, 2, 0, 0]), term(0.1, &[1, 0, 2, 0])],
            vec![],
            vec![term(s2, &[0, 0, 1, 0]), term(s2 / 3.0, &[0, 0, 3, 0]), term(s2, &[0, 0, 1, 2])],
        ],
        vec![(-3.0, 3.0); 4],
    )
    .unwrap()
}

fn guess(d: usize) -> Vec<f64> {
    if d == 2 {
        vec![0.05, -0.05]
    } else {
        vec![0.02, 0.0, -0.02, 0.01]
    }
}

fn rational(rng: &mut ChaCha8Rng) -> Exact {
    let re = <Exact as Coeff>::ratio(rng.gen_range(-9..=9), rng.gen_range(1..=7));
    let im = <Exact as Coeff>::ratio(rng.gen_range(-9..=9), rng.gen_range(1..=7));
    Coeff::add(&re, &Coeff::mul(&im, &<Exact as Coeff>::imag_unit()))
}

fn random_mono(rng: &mut ChaCha8Rng, vars: &Vars, max_phase: u32, min_phase: u32) -> Mono {
    loop {
        let w: Vec<u32> = (0..vars.nw).map(|_| rng.gen_range(0..=1)).collect();
        let a: Vec<u32> = (0..vars.nz).map(|_| rng.gen_range(0..=2)).collect();
        let g: Vec<u32> = (0..vars.nz).map(|_| rng.gen_range(0..=2)).collect();
        let l = rng.gen_range(0..=1);
        let phase: u32 = a.iter().chain(&g).sum::<u32>() + 2 * l;
        if phase <= max_phase && phase >= min_phase {
            return Mono::from_parts(vars, &w, &a, &g, l);
        }
    }
}

fn criterion_1() -> Outcome {
    let vars = Vars::new(2, 2).unwrap();
    let bound = GradeBound::new(8, 2);
    let cb = Basis::Complex;
    let one = <Exact as Coeff>::one();
    let mut failures = Vec::new();
    let intensities: Vec<Jet<Exact>> = (0..2)
        .map(|j| {
            let e: Vec<u32> = (0..2).map(|i| (i == j) as u32).collect();
            Jet::monomial(vars, cb, bound, Mono::from_parts(&vars, &[0, 0], &e, &e, 0), one.clone())
        })
        .collect();
    for (j, i) in intensities.iter().enumerate() {
        let lhs = moyal_star(i, i).unwrap();
        let rhs = i.mul(i).unwrap().sub(&Jet::monomial(vars, cb, bound, Mono::hbar_pow(2), one.clone())).unwrap();
        if !lhs.sub(&rhs).unwrap().is_empty() {
            failures.push(format!("I_{} * I_{} != I^2 - hbar^2", j + 1, j + 1));
        }
    }
    // (i/hbar) ad_{|z_j|^2} on monomials; the bracket convention gives the factor -2i
    let mut rng = ChaCha8Rng::seed_from_u64(20240601);
    let minus_2i = Coeff::mul(&<Exact as Coeff>::ratio(-2, 1), &<Exact as Coeff>::imag_unit());
    let mut worst_ad: f64 = 0.0;
    for _ in 0..200 {
        let m = random_mono(&mut rng, &vars, 6, 0);
        let f = Jet::monomial(vars, cb, bound, m, rational(&mut rng));
        for (j, i) in intensities.iter().enumerate() {
            let got = scaled_ad(i, &f).unwrap();
            let k = m.get(&vars, vars.alpha(j)) as i64 - m.get(&vars, vars.gamma(j)) as i64;
            let want = f.scale(&Coeff::mul(&<Exact as Coeff>::ratio(k, 1), &minus_2i));
            let diff = got.sub(&want).unwrap();
            worst_ad = worst_ad.max(diff.to_float().max_abs());
            if !diff.is_empty() {
                failures.push(format!("ad identity fails for {:?}", m));
            }
        }
    }
    let random_jet = |rng: &mut ChaCha8Rng| {
        let mut j = Jet::zero(vars, cb, bound);
        for _ in 0..3 {
            let m = random_mono(rng, &vars, 3, 1);
            j.add_term(m, rational(rng));
        }
        j.canonicalize();
        j
    };
    let (mut worst_assoc, mut worst_jacobi): (f64, f64) = (0.0, 0.0);
    for _ in 0..50 {
        let (a, b, c) = (random_jet(&mut rng), random_jet(&mut rng), random_jet(&mut rng));
        let assoc = moyal_star(&moyal_star(&a, &b).unwrap(), &c)
            .unwrap()
            .sub(&moyal_star(&a, &moyal_star(&b, &c).unwrap()).unwrap())
            .unwrap();
        let br = |x: &Jet<Exact>, y: &Jet<Exact>| moyal_bracket(x, y).unwrap();
        let jacobi = br(&a, &br(&b, &c)).add(&br(&b, &br(&c, &a))).unwrap().add(&br(&c, &br(&a, &b))).unwrap();
        worst_assoc = worst_assoc.max(assoc.to_float().max_abs());
        worst_jacobi = worst_jacobi.max(jacobi.to_float().max_abs());
        if !assoc.is_empty() || !jacobi.is_empty() {
            failures.push("associativity or Jacobi".into());
        }
    }
    let pass = failures.is_empty() && worst_ad <= 1e-12 && worst_assoc <= 1e-12 && worst_jacobi <= 1e-12;
    outcome(
        pass,
        format!(
            "exact rationals; I*I = I^2 - hbar^2 for 2 pairs; (i/hbar)ad_|z_j|^2 = -2i(a_j - g_j) on 200 monomials \
             (max deviation {worst_ad:.1e}); associativity {worst_assoc:.1e}, Jacobi {worst_jacobi:.1e} over 50 triples{}",
            if failures.is_empty() { String::new() } else { format!("; failures: {}", failures.len()) }
        ),
    )
}

fn intensity_jet(j: &Jet, k: usize) -> Jet {
    let vars = j.vars();
    let e: Vec<u32> = (0..vars.nz).map(|i| (i == k) as u32).collect();
    let w = vec![0; vars.nw];
    Jet::monomial(vars, Basis::Complex, j.bound(), Mono::from_parts(&vars, &w, &e, &e, 0), Complex64::new(1.0, 0.0))
}

fn reconstruction(sys: &MagneticSystem, r: u32, w_order: u32) -> (bool, String) {
    let d = sys.dim();
    let w = find_well(sys, &guess(d), 1e-13).unwrap();
    let red = reduce_hamiltonian(sys, &w, ReductionOrder { z_order: r, w_order }, &ChartOptions::default()).unwrap();
    let nf = birkhoff_reduce(&red.symbol, r).unwrap();
    let order = red.symbol.bound().total() as usize + 1;
    let start = nf.h0.add(&nf.gamma).unwrap();
    let end = nf.h0.add(&nf.kappa).unwrap().add(&nf.rho).unwrap();
    let forward = exp_ad(&nf.tau, &start, order).unwrap().dist(&end);
    let back = exp_ad(&nf.tau.neg(), &end, order).unwrap().dist(&start);
    let commute = (0..d / 2)
        .map(|k| scaled_ad(&intensity_jet(&nf.kappa, k), &nf.kappa).unwrap().max_abs())
        .fold(0.0, f64::max);
    let val = nf.rho.valuation();
    let ok = forward < 1e-10 && back < 1e-10 && commute < 1e-10 && val.map_or(true, |v| v >= r);
    (ok, format!("{d}D r={r}: forward {forward:.1e}, inverse {back:.1e}, [|z|^2, kappa] {commute:.1e}, rho valuation {val:?}"))
}

fn criterion_2() -> Outcome {
    let runs = [reconstruction(&reference_2d(), 4, 2), reconstruction(&reference_2d(), 6, 2), reconstruction(&reference_4d(), 4, 1)];
    outcome(runs.iter().all(|r| r.0), runs.iter().map(|r| r.1.clone()).collect::<Vec<_>>().join("; "))
}

fn criterion_3() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (sys, w_order) in [(reference_2d(), 4), (reference_4d(), 2)] {
        let d = sys.dim();
        let w = find_well(&sys, &guess(d), 1e-13).unwrap();
        let red = reduce_hamiltonian(&sys, &w, ReductionOrder { z_order: 4, w_order }, &ChartOptions::default()).unwrap();
        let mismatch = red.beta_hat.iter().zip(&w.beta).map(|(b, x)| (b.constant_term().re - x).abs()).fold(0.0, f64::max);
        let good = red.chart.form_residual < 1e-10 && red.low_order_defect < 1e-10 && red.quadratic_defect < 1e-10 && mismatch < 1e-10;
        ok &= good;
        parts.push(format!(
            "{d}D: form residual {:.1e}, z-constant/linear {:.1e}, off-diagonal quadratic {:.1e}, beta_hat(0) vs beta {:.1e}",
            red.chart.form_residual, red.low_order_defect, red.quadratic_defect, mismatch
        ));
    }
    outcome(ok, parts.join("; "))
}

fn criterion_4() -> Outcome {
    let sys = MagneticSystem::new(vec![vec![], vec![term(1.0, &[1, 0])]], vec![(-3.0, 3.0); 2]).unwrap();
    let hbar = 0.1;
    let mut errs = Vec::new();
    let mut vals = Vec::new();
    for n in [101, 201] {
        let spec = DiscretizationSpec { region: vec![(-3.0, 3.0); 2], points: n, hbar, link_rule: LinkRule::Midpoint, stencil: 2 };
        let s = spectrum(&sys, &spec, &SolverOptions { k: 3, ..Default::default() }, u64::MAX).unwrap();
        // the lowest Landau level is highly degenerate on this box, so all three sit near hbar
        errs.push(s.eigenvalues.iter().map(|l| (l - hbar).abs() / hbar).fold(0.0, f64::max));
        vals.push(s.eigenvalues);
    }
    let order = (errs[0] / errs[1]).ln() / 2f64.ln();
    outcome(
        errs[1] < 1e-2 && (order - 2.0).abs() < 0.3,
        format!(
            "n=201 eigenvalues {:?}, max relative error {:.2e} (n=101: {:.2e}), observed order {order:.2}",
            vals[1].iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>(),
            errs[1],
            errs[0]
        ),
    )
}

fn coeff4(p: &SpectralPrediction, j: usize) -> f64 {
    p.levels[j].coeffs[&4]
}

fn criterion_5() -> Outcome {
    let cfg = presets::preset("quadratic-well-2d").unwrap();
    let (a, pred) = pipeline::full_prediction(&cfg, 3).unwrap();
    let spectra = pipeline::sweep(&cfg, &a.sys).unwrap();
    let cmp = pipeline::compare(&cfg, &pred, &spectra).unwrap();
    let hbars: Vec<f64> = spectra.iter().map(|s| s.spec.hbar).collect();
    let b0 = pred.b0;

    let ratio: Vec<f64> = spectra.iter().map(|s| s.eigenvalues[0] / s.spec.hbar).collect();
    let slope: Vec<f64> = ratio.iter().zip(&hbars).map(|(r, h)| (r - b0) / h).collect();
    let lin = fit_expansion(&hbars, &ratio, &[0, 2]).unwrap();
    let spread = slope.iter().cloned().fold(f64::NEG_INFINITY, f64::max) / slope.iter().cloned().fold(f64::INFINITY, f64::min);
    let pass_a = (lin.coeffs[0] - b0).abs() < 0.02 && spread < 2.0 && slope.iter().all(|s| *s > 0.0);

    let (imin, hmin) = hbars.iter().cloned().enumerate().fold((0, f64::INFINITY), |acc, (i, h)| if h < acc.1 { (i, h) } else { acc });
    let gap = (spectra[imin].eigenvalues[1] - spectra[imin].eigenvalues[0]) / (hmin * hmin);
    let predicted_gap = coeff4(&pred, 1) - coeff4(&pred, 0);
    let two_nu = 2.0 * pred.nu[0];
    let dev = (gap - predicted_gap).abs() / predicted_gap;
    let pass_b = dev < 0.05 && (predicted_gap - two_nu).abs() < 1e-10;
    let gaps: Vec<String> = spectra
        .iter()
        .map(|s| format!("{:.3}", (s.eigenvalues[1] - s.eigenvalues[0]) / (s.spec.hbar * s.spec.hbar)))
        .collect();

    // context for (b): the order-hbar^3 gap term from an r = 8 normal form
    let mut deep = cfg.clone();
    deep.truncation.r = 8;
    let p8 = pipeline::full_prediction(&deep, 2).unwrap().1;
    let gap3 = p8.levels[1].coeffs[&6] - p8.levels[0].coeffs[&6];
    let gap_r8 = predicted_gap + gap3 * hmin;

    let exponent = cmp.levels[0].residual_exponent;
    let pass_c = exponent.map_or(false, |p| p >= 2.3);

    outcome(
        pass_a && pass_b && pass_c,
        format!(
            "(a) {}: lambda_1/hbar = {:?}, extrapolated {:.4} vs b0 = {b0}, (lambda_1/hbar - b0)/hbar in [{:.3}, {:.3}]; \
             (b) {}: gap/hbar^2 = {:?}, at hbar = {hmin}: {gap:.4} vs 2 nu = {two_nu:.4} ({:.1}% off, limit 5%); \
             the r = 8 normal form adds {gap3:.3} hbar to the gap, giving {gap_r8:.4} at that hbar; \
             (c) {}: c0 offset {:.4}, fitted residual exponent {}",
            if pass_a { "PASS" } else { "FAIL" },
            ratio.iter().map(|r| format!("{r:.5}")).collect::<Vec<_>>(),
            lin.coeffs[0],
            slope.iter().cloned().fold(f64::INFINITY, f64::min),
            slope.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            if pass_b { "PASS" } else { "FAIL" },
            gaps,
            100.0 * dev,
            if pass_c { "PASS" } else { "FAIL" },
            cmp.c0_offset,
            exponent.map_or("none".into(), |p| format!("{p:.3}")),
        ),
    )
}

fn criterion_6() -> Outcome {
    let cfg = presets::preset("quadratic-well-2d").unwrap();
    let sys = cfg.system().unwrap();
    let (b1, hbar) = (3.0, 0.05);
    let exact = 4.0 * std::f64::consts::PI / (2.0 * std::f64::consts::PI * hbar);
    let t = weyl_count(&sys, b1, hbar, &WeylOptions::default()).unwrap();
    let qerr = (t.total - exact).abs() / exact;
    let only_lowest = t.bands.len() == 1 && t.bands[0].n == vec![0];
    let rule = cfg.oracle.grid_rule(&cfg.system);
    let op = build_operator(&sys, &rule.spec(hbar), cfg.oracle.memory_cap(), cfg.oracle.max_dim).unwrap();
    let c = count_below(&op, b1 * hbar, &cfg.oracle.solver()).unwrap();
    let oerr = (c.count as f64 - 40.0).abs() / 40.0;
    outcome(
        qerr < 0.01 && oerr < 0.15 && only_lowest,
        format!(
            "closed form 2/hbar = {exact:.3}; quadrature {:.4} ({:.3}% off, bands {:?}); oracle count below {:.3} = {} \
             (tolerance band {}..{}, {:.1}% from 40)",
            t.total,
            100.0 * qerr,
            t.bands.iter().map(|b| b.n.clone()).collect::<Vec<_>>(),
            b1 * hbar,
            c.count,
            c.count_low,
            c.count_high,
            100.0 * oerr
        ),
    )
}

fn max_gap(a: &SpectralPrediction, b: &SpectralPrediction) -> f64 {
    let mut d: f64 = 0.0;
    for (x, y) in a.levels.iter().zip(&b.levels) {
        if x.m != y.m {
            return f64::INFINITY;
        }
        for k in 2..=4 {
            d = d.max((x.coeffs[&k] - y.coeffs[&k]).abs());
        }
    }
    d
}

fn poly(c: f64, p: &[u32]) -> PolyTerm {
    PolyTerm { coeff: c, powers: p.to_vec() }
}

fn criterion_7() -> Outcome {
    let mut base = presets::preset("quadratic-well-2d").unwrap();
    // an anisotropic well: b = 1 + 1.5 q1^2 + 2 q2^2
    base.system.potential = vec![vec![], vec![term(1.0, &[1, 0]), term(0.5, &[3, 0]), term(2.0, &[1, 2])]];
    let predict = |c: &RunConfig| pipeline::full_prediction(c, 3).unwrap();
    let (wa, reference) = predict(&base);
    let mut worst_chart: f64 = 0.0;
    let mut charts = 0;
    for rotate in [false, true] {
        for shear in [false, true] {
            let mut c = base.clone();
            if rotate {
                c.chart.frame_rotation = vec![vec![poly(0.4, &[1, 0]), poly(-0.3, &[1, 1]), poly(0.2, &[0, 2])]];
            }
            if shear {
                c.chart.shear = Some(vec![0.7]);
                c.chart.twist = vec![poly(0.3, &[2, 1]), poly(-0.2, &[0, 3])];
            }
            if rotate || shear {
                worst_chart = worst_chart.max(max_gap(&reference, &predict(&c).1));
                charts += 1;
            }
        }
    }
    // A + grad chi with chi = q1 q2 - q1^3 q2 / 4
    let mut shifted = base.clone();
    shifted.system.potential[0].extend([term(1.0, &[0, 1]), term(-0.75, &[2, 1])]);
    shifted.system.potential[1].extend([term(1.0, &[1, 0]), term(-0.25, &[3, 0])]);
    let (wb, gauged) = predict(&shifted);
    let well_diff = wa
        .well
        .q0
        .iter()
        .zip(&wb.well.q0)
        .chain(wa.well.beta.iter().zip(&wb.well.beta))
        .map(|(x, y)| (x - y).abs())
        .fold((wa.well.b0 - wb.well.b0).abs(), f64::max);
    let gauge_gap = max_gap(&reference, &gauged);
    outcome(
        worst_chart < 1e-8 && well_diff < 1e-12 && gauge_gap < 1e-8,
        format!(
            "{charts} alternative charts (rotated frames, sheared and twisted Darboux, both): max coefficient \
             difference through hbar^2 {worst_chart:.1e}; gauge shift: well data difference {well_diff:.1e}, \
             prediction difference {gauge_gap:.1e}"
        ),
    )
}

fn criterion_8() -> Outcome {
    let r11 = resonance_order(&[1.0, 1.0], 12);
    let r12 = resonance_order(&[1.0, 2.0], 12);
    let rs2 = resonance_order(&[1.0, 2f64.sqrt()], 12);
    let vars = Vars::new(0, 2).unwrap();
    let mut s = Jet::zero(vars, Basis::Complex, GradeBound::new(4, 0));
    let c = |x: f64| Complex64::new(x, 0.0);
    s.add_term(Mono::from_parts(&vars, &[], &[1, 0], &[1, 0], 0), c(1.0));
    s.add_term(Mono::from_parts(&vars, &[], &[0, 1], &[0, 1], 0), c(2.0));
    s.add_term(Mono::from_parts(&vars, &[], &[2, 0], &[0, 1], 0), c(1.0));
    s.add_term(Mono::from_parts(&vars, &[], &[0, 1], &[2, 0], 0), c(1.0));
    let named = match birkhoff_reduce(&s, 4) {
        Err(Error::Resonance { vector, .. }) => Some(vector),
        _ => None,
    };
    let pass = r11.order() == Some(2)
        && r12.order() == Some(3)
        && matches!(rs2, ResonanceOrder::Beyond { cap: 12 })
        && named.as_deref() == Some(&[2, -1][..]);
    outcome(pass, format!("(1,1): {r11:?}; (1,2): {r12:?}; (1,sqrt 2): {rs2:?}; beta = (1,2), r = 4 error names {named:?}"))
}

fn main() {
    let strict = std::env::var("MAGWELL_STRICT_ACCEPTANCE").map_or(false, |v| v == "1");
    let only: Option<Vec<u32>> = std::env::var("MAGWELL_ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let criteria: [(u32, &str, f64, fn() -> Outcome); 8] = [
        (1, "algebra identities", 10.0, criterion_1),
        (2, "normal-form reconstruction", 60.0, criterion_2),
        (3, "classical-reduction invariants", 60.0, criterion_3),
        (4, "oracle calibration (Landau)", 120.0, criterion_4),
        (5, "end-to-end expansion", 900.0, criterion_5),
        (6, "Weyl count", 600.0, criterion_6),
        (7, "chart and gauge invariance", 120.0, criterion_7),
        (8, "resonance machinery", 5.0, criterion_8),
    ];
    let mut failed = 0;
    for (n, name, budget, f) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            continue;
        }
        let t = Instant::now();
        let res = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let secs = t.elapsed().as_secs_f64();
        let pass = res.pass && secs < budget;
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {n} ({name}): {} [{secs:.1}s of {budget:.0}s] {}",
            if pass { "PASS" } else { "FAIL" },
            res.detail
        );
    }
    println!("acceptance: {failed} failing");
    if strict && failed > 0 {
        std::process::exit(1);
    }
}
