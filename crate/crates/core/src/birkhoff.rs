//! Semiclassical Birkhoff normal form in the phase pairs, with slow parameters w.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::classical::standard_form;
use crate::error::{Error, Result};
use crate::field::{integer_vectors, skew_frequencies, RESONANCE_TOL};
use crate::jet::{exp_ad, moyal_star, Basis, GradeBound, Jet, JetDocument, JetMap, Mono, TermRecord, Vars};

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Split into the part with `alpha = gamma` and the rest.
pub fn resonant_split(j: &Jet) -> (Jet, Jet) {
    let vars = j.vars();
    (j.filter(|m| m.is_resonant(&vars)), j.filter(|m| !m.is_resonant(&vars)))
}

/// Monomial with the w exponents cleared.
fn phase_key(vars: &Vars, m: &Mono) -> Mono {
    Mono::from_parts(vars, &vec![0; vars.nw], &m.alpha(vars), &m.gamma(vars), m.hbar())
}

fn w_only(vars: &Vars, m: &Mono) -> Mono {
    Mono::from_parts(vars, &m.w_part(vars), &vec![0; vars.nz], &vec![0; vars.nz], 0)
}

/// Normalize an integer vector so that its first nonzero entry is positive.
fn normalized(k: &[i64]) -> Vec<i64> {
    match k.iter().find(|&&x| x != 0) {
        Some(&x) if x < 0 => k.iter().map(|v| -v).collect(),
        _ => k.to_vec(),
    }
}

/// Solve `(i/hbar)[sum beta_hat_j |z_j|^2, tau] = rhs` to leading order, i.e. divide each
/// monomial by `-2i <alpha - gamma, beta_hat(w)>` as a w-jet.
pub fn homological_solve(rhs: &Jet, beta_hat: &[Jet]) -> Result<Jet> {
    let vars = rhs.vars();
    let bound = rhs.bound();
    let scale = beta_hat.iter().map(|b| b.constant_term().norm()).fold(0.0, f64::max);
    let mut groups: BTreeMap<Mono, Jet> = BTreeMap::new();
    for (m, coef) in rhs.terms() {
        if m.is_resonant(&vars) {
            return Err(Error::Invalid("homological equation with a resonant right-hand side".into()));
        }
        groups
            .entry(phase_key(&vars, m))
            .or_insert_with(|| Jet::zero(vars, rhs.basis(), bound))
            .add_term(w_only(&vars, m), *coef);
    }
    let mut tau = Jet::zero(vars, rhs.basis(), bound);
    for (key, poly) in groups {
        let k = key.winding(&vars);
        let mut div = Jet::zero(vars, rhs.basis(), bound);
        for (j, b) in beta_hat.iter().enumerate() {
            if k[j] != 0 {
                div = div.add(&b.with_bound(bound).scale(&Complex64::new(0.0, -2.0 * k[j] as f64)))?;
            }
        }
        let d0 = div.constant_term().norm();
        if d0 <= RESONANCE_TOL * scale.max(1e-300) {
            return Err(Error::Resonance { vector: normalized(&k), divisor: d0 });
        }
        let q = poly.mul(&div.invert()?)?;
        let mono = Jet::monomial(vars, rhs.basis(), bound, key, c(1.0));
        tau = tau.add(&q.mul(&mono)?)?;
    }
    Ok(tau)
}

/// Result of the normal form reduction `exp((i/hbar) ad_tau)(H0 + gamma) = H0 + kappa + rho`.
#[derive(Clone, Debug)]
pub struct NormalForm {
    pub r: u32,
    pub h0: Jet,
    pub beta_hat: Vec<Jet>,
    pub gamma: Jet,
    pub tau: Jet,
    pub kappa: Jet,
    pub rho: Jet,
    /// Largest non-resonant coefficient left below phase degree `r`.
    pub defect: f64,
}

/// Split a complex-basis symbol into `H0 = sum beta_hat_j(w) |z_j|^2` and the rest.
pub fn harmonic_part(symbol: &Jet) -> Result<(Jet, Vec<Jet>)> {
    let vars = symbol.vars();
    let n = vars.nz;
    let low = symbol.filter(|m| m.phase() < 2);
    if low.max_abs() > 1e-10 * symbol.max_abs().max(1.0) {
        return Err(Error::Invalid(format!(
            "symbol has terms of phase degree below 2 (size {:.3e})",
            low.max_abs()
        )));
    }
    let quad = symbol.filter(|m| m.zsum() == 2 && m.hbar() == 0);
    let mut h0 = Jet::zero(vars, symbol.basis(), symbol.bound());
    let mut beta = Vec::with_capacity(n);
    for j in 0..n {
        let part = quad.filter(|m| {
            (0..n).all(|i| {
                let want = (i == j) as u32;
                m.get(&vars, vars.alpha(i)) == want && m.get(&vars, vars.gamma(i)) == want
            })
        });
        h0 = h0.add(&part)?;
        beta.push(part.relabel(vars, symbol.basis(), symbol.bound(), |m| Some(w_only(&vars, m))));
    }
    Ok((h0, beta))
}

/// `symbol + hbar^2 u` for a table of terms of `u` given in the symbol's layout.
/// Terms that fall outside the grade bound are dropped since they cannot affect the result.
pub fn add_quantization_remainder(symbol: &Jet, u: &[TermRecord]) -> Result<Jet> {
    let vars = symbol.vars();
    let mut out = symbol.clone();
    for (k, t) in u.iter().enumerate() {
        if t.w.len() != vars.nw || t.alpha.len() != vars.nz || t.gamma.len() != vars.nz {
            return Err(Error::Invalid(format!("remainder term {k}: exponent lengths do not match the layout")));
        }
        if !t.re.is_finite() || !t.im.is_finite() || t.w.iter().chain(&t.alpha).chain(&t.gamma).any(|&e| e > 255) {
            return Err(Error::Invalid(format!("remainder term {k}: bad coefficient or exponent")));
        }
        let phase = t.alpha.iter().chain(&t.gamma).map(|&e| e as u64).sum::<u64>() + 2 * (t.l as u64 + 2);
        if phase > symbol.bound().total() as u64 {
            continue;
        }
        let m = Mono::from_parts(&vars, &t.w, &t.alpha, &t.gamma, t.l + 2);
        if out.admits(&m) {
            out.add_term(m, Complex64::new(t.re, t.im));
        }
    }
    out.canonicalize();
    Ok(out)
}

/// Birkhoff normal form below phase degree `r`.
pub fn birkhoff_reduce(symbol: &Jet, r: u32) -> Result<NormalForm> {
    if symbol.basis() != Basis::Complex {
        return Err(Error::Invalid("normal form needs a complex-basis symbol".into()));
    }
    let vars = symbol.vars();
    if r < 3 {
        return Err(Error::Invalid(format!("normal form order must be at least 3, got {r}")));
    }
    if r > symbol.bound().max_phase_degree + 1 {
        return Err(Error::Invalid(format!(
            "order {r} exceeds the symbol truncation (phase degree {})",
            symbol.bound().max_phase_degree
        )));
    }
    let (h0, beta_hat) = harmonic_part(symbol)?;
    let beta0: Vec<f64> = beta_hat.iter().map(|b| b.constant_term().re).collect();
    let scale = beta0.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    for len in 1..r {
        for k in integer_vectors(vars.nz, len) {
            let s: f64 = k.iter().zip(&beta0).map(|(a, b)| *a as f64 * b).sum();
            if s.abs() <= RESONANCE_TOL * scale {
                return Err(Error::Resonance { vector: k, divisor: s.abs() });
            }
        }
    }
    let gamma = symbol.sub(&h0)?;
    let p2 = gamma.phase_part(2);
    let (_, off2) = resonant_split(&p2);
    if off2.max_abs() > 1e-10 * symbol.max_abs().max(1.0) {
        return Err(Error::Invalid("phase-2 part of the symbol is not in normal form".into()));
    }
    let order = symbol.bound().total() as usize + 1;
    let mut tau = Jet::zero(vars, Basis::Complex, symbol.bound());
    for n in 3..r {
        let t = exp_ad(&tau, symbol, order)?;
        let rn = t.sub(&h0)?.phase_part(n);
        let (_, off) = resonant_split(&rn);
        if off.is_empty() {
            continue;
        }
        let step = homological_solve(&off, &beta_hat)?;
        tau = tau.add(&step)?;
    }
    let t = exp_ad(&tau, symbol, order)?;
    let rest = t.sub(&h0)?;
    let (below, rho) = rest.grade_split(r);
    let (kappa, off) = resonant_split(&below);
    Ok(NormalForm {
        r,
        h0,
        beta_hat,
        gamma,
        tau,
        kappa,
        rho,
        defect: off.max_abs(),
    })
}

/// Coefficients `c*_{l,m}(w)` with `kappa = sum c*_{l,m}(w) |z_1|^{2 m_1} * ... * hbar^l`
/// (Moyal powers).
#[derive(Clone, Debug)]
pub struct FStar {
    pub vars: Vars,
    pub bound: GradeBound,
    pub table: BTreeMap<(u32, Vec<u32>), Jet>,
}

/// Moyal power product `|z_1|^{2m_1} * ... * |z_n|^{2m_n}`.
pub fn star_power(vars: Vars, bound: GradeBound, m: &[u32]) -> Result<Jet> {
    let mut s = Jet::constant(vars, Basis::Complex, bound, c(1.0));
    for (j, &mj) in m.iter().enumerate() {
        let mono = Mono::from_parts(
            &vars,
            &vec![0; vars.nw],
            &(0..vars.nz).map(|i| (i == j) as u32).collect::<Vec<_>>(),
            &(0..vars.nz).map(|i| (i == j) as u32).collect::<Vec<_>>(),
            0,
        );
        let ij = Jet::monomial(vars, Basis::Complex, bound, mono, c(1.0));
        for _ in 0..mj {
            s = moyal_star(&s, &ij)?;
        }
    }
    Ok(s)
}

/// Rewrite a resonant normal form in Moyal powers of the `|z_j|^2`.
pub fn star_rewrite(kappa: &Jet) -> Result<FStar> {
    let vars = kappa.vars();
    let bound = kappa.bound();
    let (_, off) = resonant_split(kappa);
    if off.max_abs() > 1e-10 * kappa.max_abs().max(1.0) {
        return Err(Error::Invalid("star rewrite needs a resonant jet".into()));
    }
    let mut rem = kappa.filter(|m| m.is_resonant(&vars));
    let mut table = BTreeMap::new();
    let mut cache: BTreeMap<Vec<u32>, Jet> = BTreeMap::new();
    while let Some(top) = rem.terms().map(|(m, _)| m.zsum() / 2).max() {
        // all (l, m) groups at the current |m|
        let mut groups: BTreeMap<(u32, Vec<u32>), Jet> = BTreeMap::new();
        for (m, coef) in rem.terms() {
            if m.zsum() / 2 != top {
                continue;
            }
            groups
                .entry((m.hbar(), m.alpha(&vars)))
                .or_insert_with(|| Jet::zero(vars, Basis::Complex, bound))
                .add_term(w_only(&vars, m), *coef);
        }
        for ((l, mm), poly) in groups {
            if !cache.contains_key(&mm) {
                cache.insert(mm.clone(), star_power(vars, bound, &mm)?);
            }
            let sp = cache[&mm].hbar_shift(l as i32)?;
            rem = rem.sub(&poly.mul(&sp)?)?;
            // remove roundoff left on the leading monomials
            let lead = Mono::from_parts(&vars, &vec![0; vars.nw], &mm, &mm, l);
            rem = rem.filter(|m| phase_key(&vars, m) != lead);
            table.insert((l, mm), poly);
        }
    }
    Ok(FStar { vars, bound, table })
}

impl FStar {
    /// Reassemble `sum c*_{l,m}(w) (star powers) hbar^l`.
    pub fn reconstruct(&self) -> Result<Jet> {
        let mut out = Jet::zero(self.vars, Basis::Complex, self.bound);
        for ((l, m), poly) in &self.table {
            let sp = star_power(self.vars, self.bound, m)?.hbar_shift(*l as i32)?;
            out = out.add(&poly.mul(&sp)?)?;
        }
        Ok(out)
    }

    /// Band symbol `F^(n)(w, hbar)`: the `|z_j|^2` replaced by `hbar (2 n_j + 1)`, plus
    /// `hbar sum beta_hat_j(w)(2 n_j + 1)`. Returned as a phase-free jet on the same layout.
    pub fn band_symbol(&self, beta_hat: &[Jet], n: &[u32]) -> Result<Jet> {
        let vars = self.vars;
        let mut out = Jet::zero(vars, Basis::Complex, self.bound);
        for (j, b) in beta_hat.iter().enumerate() {
            out = out.add(&b.with_bound(self.bound).hbar_shift(1)?.scale(&c((2 * n[j] + 1) as f64)))?;
        }
        for ((l, m), poly) in &self.table {
            let mut f = 1.0;
            for (j, &mj) in m.iter().enumerate() {
                f *= ((2 * n[j] + 1) as f64).powi(mj as i32);
            }
            let total: u32 = m.iter().sum::<u32>() + l;
            out = out.add(&poly.hbar_shift(total as i32)?.scale(&c(f)))?;
        }
        Ok(out)
    }
}

/// One entry of a serialized normal-form table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FStarRecord {
    pub l: u32,
    pub m: Vec<u32>,
    pub coeffs: JetDocument,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FStarDocument {
    pub nw: usize,
    pub nz: usize,
    pub bound: GradeBound,
    pub records: Vec<FStarRecord>,
}

impl FStar {
    pub fn to_document(&self) -> FStarDocument {
        FStarDocument {
            nw: self.vars.nw,
            nz: self.vars.nz,
            bound: self.bound,
            records: self
                .table
                .iter()
                .map(|((l, m), j)| FStarRecord { l: *l, m: m.clone(), coeffs: j.to_document() })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("tables always serialize")
    }

    pub fn from_document(doc: &FStarDocument) -> Result<Self> {
        let vars = Vars::new(doc.nw, doc.nz).ok_or_else(|| Error::Parse("layout too large".into()))?;
        if !doc.bound.is_valid() {
            return Err(Error::Parse("grade bound too large".into()));
        }
        let mut table = BTreeMap::new();
        for (k, rec) in doc.records.iter().enumerate() {
            if rec.m.len() != vars.nz {
                return Err(Error::Parse(format!("record {k}: index length does not match layout")));
            }
            let phase = rec.m.iter().map(|&x| 2 * x as u64).sum::<u64>() + 2 * rec.l as u64;
            if phase > doc.bound.max_phase_degree as u64 {
                return Err(Error::Parse(format!("record {k}: outside the grade bound")));
            }
            if rec.coeffs.nw != vars.nw || rec.coeffs.nz != vars.nz || rec.coeffs.bound != doc.bound {
                return Err(Error::Parse(format!("record {k}: coefficient layout mismatch")));
            }
            let j = Jet::from_document(&rec.coeffs).map_err(|e| Error::Parse(format!("record {k}: {e}")))?;
            if j.terms().any(|(m, _)| m.zsum() > 0 || m.hbar() > 0) {
                return Err(Error::Parse(format!("record {k}: coefficients must depend on w only")));
            }
            if table.insert((rec.l, rec.m.clone()), j).is_some() {
                return Err(Error::Parse(format!("record {k}: duplicate index")));
            }
        }
        Ok(FStar { vars, bound: doc.bound, table })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: FStarDocument = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_document(&doc)
    }
}

/// Symplectic diagonalization of a positive definite quadratic form.
#[derive(Clone, Debug, Serialize)]
pub struct Williamson {
    /// Symplectic frequencies, ascending.
    pub nu: Vec<f64>,
    /// `M^T Q M = diag(nu, nu)` and `M^T J M = J`.
    #[serde(skip)]
    pub map: DMatrix<f64>,
}

/// Williamson normal form of `q(w) = w^T Q w` for the form `sum d eta ^ d y`.
pub fn williamson(q: &DMatrix<f64>) -> Result<Williamson> {
    let d = q.nrows();
    if d == 0 || d % 2 != 0 || q.ncols() != d {
        return Err(Error::Invalid("Williamson form needs an even square matrix".into()));
    }
    let sym = (q + q.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym.clone());
    if eig.eigenvalues.min() <= 0.0 {
        return Err(Error::Invalid(format!(
            "quadratic form is not positive definite (eigenvalues {:?})",
            eig.eigenvalues.as_slice()
        )));
    }
    let isq = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()))
        * eig.eigenvectors.transpose();
    let n = d / 2;
    let j = standard_form(n);
    let k = &isq * &j * &isq;
    let k = (&k - k.transpose()) * 0.5;
    let fr = skew_frequencies(&k)?;
    // frequencies of K are 1/nu; ascending nu means descending index
    let mut map = DMatrix::zeros(d, d);
    let mut nu = Vec::with_capacity(n);
    for (slot, idx) in (0..n).rev().enumerate() {
        let nuj = 1.0 / fr.beta[idx];
        let a = &isq * &fr.u[idx] * nuj.sqrt();
        let b = &isq * (-&fr.v[idx]) * nuj.sqrt();
        map.set_column(slot, &a);
        map.set_column(n + slot, &b);
        nu.push(nuj);
    }
    Ok(Williamson { nu, map })
}

/// Second-stage normal form around the minimum of a band symbol.
#[derive(Clone, Debug)]
pub struct WellNormalForm {
    pub b0: f64,
    pub williamson: Williamson,
    /// Constant `hbar^1` coefficient of the band symbol at the minimum.
    pub c0: f64,
    pub fstar: FStar,
    /// Largest hbar power of the level expansion that is exact.
    pub max_power: u32,
    pub defect: f64,
}

impl WellNormalForm {
    /// Coefficients of `mu_m(hbar) = sum_p a_p hbar^p`, `p = 0..=max_power`.
    pub fn level(&self, m: &[u32]) -> Vec<f64> {
        let mut a = vec![0.0; self.max_power as usize + 1];
        a[0] = self.b0;
        if a.len() > 1 {
            a[1] += self
                .williamson
                .nu
                .iter()
                .zip(m)
                .map(|(nu, mj)| nu * (2 * mj + 1) as f64)
                .sum::<f64>();
        }
        for ((l, k), coef) in &self.fstar.table {
            let p = (k.iter().sum::<u32>() + l) as usize;
            if p >= a.len() {
                continue;
            }
            let mut f = coef.constant_term().re;
            for (j, &kj) in k.iter().enumerate() {
                f *= ((2 * m[j] + 1) as f64).powi(kj as i32);
            }
            a[p] += f;
        }
        a
    }
}

/// Reduce a band symbol `F(w, hbar)/hbar` (phase-free, with w first-stage slow variables)
/// to a harmonic normal form at its minimum `w = 0`.
///
/// `r2` is the second-stage normal-form order; the symbol must be exact for
/// `deg_w + 2 deg_hbar < r2`.
pub fn well_reduce(band: &Jet, r2: u32) -> Result<WellNormalForm> {
    let vars = band.vars();
    let d = vars.nw;
    let n = d / 2;
    if band.filter(|m| m.zsum() > 0).max_abs() > 0.0 {
        return Err(Error::Invalid("band symbol must not depend on the phase pairs".into()));
    }
    let b0 = band.constant_term().re;
    let classical = band.filter(|m| m.hbar() == 0);
    let grad = classical.filter(|m| m.wdeg(&vars) == 1).max_abs();
    if grad > 1e-8 * b0.abs().max(1.0) {
        return Err(Error::Invalid(format!("band symbol has a gradient {grad:.3e} at the well")));
    }
    let mut q = DMatrix::zeros(d, d);
    for (m, coef) in classical.filter(|m| m.wdeg(&vars) == 2).terms() {
        let w = m.w_part(&vars);
        let idx: Vec<usize> = (0..d).filter(|&i| w[i] > 0).collect();
        if idx.len() == 1 {
            q[(idx[0], idx[0])] = coef.re;
        } else {
            q[(idx[0], idx[1])] = coef.re / 2.0;
            q[(idx[1], idx[0])] = coef.re / 2.0;
        }
    }
    let will = williamson(&q)?;
    // relabel w = (y, eta) as the real phase pairs of a w-free layout
    let nv = Vars::new(0, n).expect("dimension checked");
    let nb = GradeBound::new(r2, 0);
    let shifted = band.sub(&Jet::constant(vars, band.basis(), band.bound(), c(b0)))?;
    let relabeled = shifted.relabel(nv, Basis::Real, nb, |m| {
        let w = m.w_part(&vars);
        Some(Mono::from_parts(&nv, &[], &w[..n], &w[n..], m.hbar()))
    });
    let lin = JetMap {
        components: (0..d)
            .map(|a| {
                let mut acc = Jet::zero(nv, Basis::Real, nb);
                for i in 0..d {
                    let v = if i < n { nv.alpha(i) } else { nv.gamma(i - n) };
                    acc.add_term(Mono::var(&nv, v, 1), c(will.map[(a, i)]));
                }
                acc
            })
            .collect(),
    };
    let sym = crate::jet::compose(&relabeled, &lin)?.complex_convert(Basis::Complex);
    let c0 = sym.coeff(&Mono::hbar_pow(1)).re;
    let nf = birkhoff_reduce(&sym, r2)?;
    let fstar = star_rewrite(&nf.kappa)?;
    Ok(WellNormalForm {
        b0,
        williamson: will,
        c0,
        fstar,
        max_power: (r2 - 1) / 2,
        defect: nf.defect,
    })
}
