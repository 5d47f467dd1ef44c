//! Classical reduction near the zero-energy surface `Sigma = {p = A(q)}`.
//!
//! Coordinates are recentered: `q = q0 + s`, `p = A(q0) + pi`. Slow variables are
//! `w = (y_1..y_n, eta_1..eta_n)` with form `d eta ^ d y`; the phase pairs are `(x_j, xi_j)`
//! with form `d xi ^ d x` and `z_j = x_j + i xi_j`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{skew_frequencies, MagneticSystem, SkewFrames, WellData};
use crate::jet::{compose, poisson, Basis, GradeBound, Jet, JetMap, Mono, Vars};

pub type JetMatrix = Vec<Vec<Jet>>;

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Truncation orders of the classical reduction: phase degree and w-degree budget.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReductionOrder {
    pub z_order: u32,
    pub w_order: u32,
}

impl ReductionOrder {
    pub fn bound(&self) -> GradeBound {
        GradeBound::new(self.z_order, self.w_order)
    }

    /// Degree needed for jets in the base variables alone.
    pub fn base_degree(&self) -> u32 {
        self.z_order + self.w_order
    }
}

/// Jets in `d` real base variables with total degree `k`.
fn base_layout(d: usize, k: u32) -> (Vars, GradeBound) {
    (Vars::new(d, 0).expect("dimension checked"), GradeBound::new(0, k))
}

/// Re-express a jet on `nw` w-variables in a wider layout with phase pairs.
pub fn embed(j: &Jet, vars: Vars, basis: Basis, bound: GradeBound) -> Jet {
    let jv = j.vars();
    assert_eq!(jv.nz, 0, "embed expects a w-only jet");
    assert_eq!(jv.nw, vars.nw, "embed keeps the w block");
    let zeros = vec![0; vars.nz];
    j.relabel(vars, basis, bound, |m| {
        Some(Mono::from_parts(&vars, &m.w_part(&jv), &zeros, &zeros, m.hbar()))
    })
}

/// `H(s, pi) = sum_i (pi_i + A_i(c) - A_i(c + s))^2` on `2d` variables `(s, pi)`.
pub fn hamiltonian_jet(sys: &MagneticSystem, center: &[f64], degree: u32) -> Jet {
    let d = sys.dim();
    let deg = degree.max(2 * sys.degree());
    let vars = Vars::new(2 * d, 0).expect("dimension checked");
    let bound = GradeBound::new(0, deg);
    let a = sys.recentered_potential(center, GradeBound::new(0, sys.degree()));
    let mut h = Jet::zero(vars, Basis::Real, bound);
    for (i, ai) in a.iter().enumerate() {
        let a0 = ai.constant_term();
        let ai2 = ai.relabel(vars, Basis::Real, bound, |m| {
            let mut w = m.w_part(&ai.vars());
            w.extend(std::iter::repeat(0).take(d));
            Some(Mono::from_parts(&vars, &w, &[], &[], 0))
        });
        let term = Jet::var(vars, Basis::Real, bound, d + i)
            .add(&Jet::constant(vars, Basis::Real, bound, a0))
            .unwrap()
            .sub(&ai2)
            .unwrap();
        h = h.add(&term.mul(&term).unwrap()).unwrap();
    }
    h.with_bound(GradeBound::new(0, degree.max(2)))
}

/// Optional phase rotation of the frames, `c_j -> exp(i theta_j(s)) c_j`.
#[derive(Clone, Debug, Default, PartialEq)]
pub enum FrameGauge {
    #[default]
    Canonical,
    /// `theta_j` as polynomials in `s` (one list of `(coeff, powers)` per frequency).
    Rotated(Vec<Vec<(f64, Vec<u32>)>>),
}

/// Frame jets along `Sigma` expanded in `s`.
#[derive(Clone, Debug)]
pub struct FrameJets {
    pub beta: Vec<Jet>,
    pub u: Vec<Vec<Jet>>,
    pub v: Vec<Vec<Jet>>,
    /// Symplectic frame fields on `T*R^d`, components `(dq, dp)`.
    pub e: Vec<Vec<Jet>>,
    pub f: Vec<Vec<Jet>>,
}

/// Matrix of the operator field `B^T` as jets around `center`.
fn field_operator_jets(sys: &MagneticSystem, center: &[f64], k: u32) -> JetMatrix {
    let (_, bound) = base_layout(sys.dim(), k);
    let form = sys.field_form();
    let shift = shift_map(sys.dim(), center, sys.degree());
    (0..sys.dim())
        .map(|a| {
            (0..sys.dim())
                .map(|b| compose(&form[b][a], &shift).unwrap().with_bound(bound))
                .collect()
        })
        .collect()
}

fn shift_map(d: usize, center: &[f64], deg: u32) -> JetMap {
    let (vars, bound) = base_layout(d, deg);
    JetMap {
        components: (0..d)
            .map(|k| {
                Jet::var(vars, Basis::Real, bound, k)
                    .add(&Jet::constant(vars, Basis::Real, bound, c(center[k])))
                    .unwrap()
            })
            .collect(),
    }
}

/// Eigen-frames of `i B(q0 + s)` by Rayleigh-Schroedinger expansion, to degree `k`.
pub fn frame_jets(
    sys: &MagneticSystem,
    center: &[f64],
    at_center: &SkewFrames,
    gauge: &FrameGauge,
    k: u32,
) -> Result<FrameJets> {
    let d = sys.dim();
    let n = d / 2;
    let (vars, bound) = base_layout(d, k);
    let op = field_operator_jets(sys, center, k);
    let iu = Complex64::i();
    let h: JetMatrix = op.iter().map(|row| row.iter().map(|x| x.scale(&iu)).collect()).collect();
    // eigenvectors of i B(q0): c_j = u_j + i v_j (eigenvalue -beta_j) and conjugates
    let cvec = |j: usize| -> DVector<Complex64> {
        DVector::from_fn(d, |a, _| Complex64::new(at_center.u[j][a], at_center.v[j][a]))
    };
    let mut beta = Vec::with_capacity(n);
    let mut us = Vec::with_capacity(n);
    let mut vs = Vec::with_capacity(n);
    let mut es = Vec::with_capacity(n);
    let mut fs = Vec::with_capacity(n);
    let rec_a = sys.recentered_potential(center, bound);
    let ta: JetMatrix = rec_a
        .iter()
        .map(|ai| (0..d).map(|kk| crate::field::exact_derivative(ai, kk)).collect())
        .collect();
    for j in 0..n {
        let c0 = cvec(j);
        let lam0 = -at_center.beta[j];
        // reduced resolvent on the complement of c_j
        let mut res = DMatrix::<Complex64>::zeros(d, d);
        for i in 0..n {
            let ci = cvec(i) / c(2f64.sqrt());
            let cb = ci.map(|x| x.conj());
            if i != j {
                res += &ci * ci.adjoint() / c(-at_center.beta[i] - lam0);
            }
            res += &cb * cb.adjoint() / c(at_center.beta[i] - lam0);
        }
        let mut cj: Vec<Jet> = (0..d).map(|a| Jet::constant(vars, Basis::Real, bound, c0[a])).collect();
        let mut lam = Jet::constant(vars, Basis::Real, bound, c(lam0));
        for deg in 1..=k {
            // r = degree-deg part of (H - lambda) c
            let mut r: Vec<Jet> = Vec::with_capacity(d);
            for a in 0..d {
                let mut acc = cj[a].mul(&lam)?.neg();
                for b in 0..d {
                    acc = acc.add(&h[a][b].mul(&cj[b])?)?;
                }
                r.push(acc.total_part(deg));
            }
            // lambda_deg = <c0, r> / |c0|^2, then c_deg = -R (r - lambda_deg c0)
            let mut lam_k = Jet::zero(vars, Basis::Real, bound);
            for a in 0..d {
                lam_k = lam_k.add(&r[a].scale(&(c0[a].conj() / 2.0)))?;
            }
            let mut rhs = Vec::with_capacity(d);
            for a in 0..d {
                rhs.push(r[a].sub(&lam_k.scale(&c0[a]))?);
            }
            for a in 0..d {
                let mut corr = Jet::zero(vars, Basis::Real, bound);
                for b in 0..d {
                    corr = corr.add(&rhs[b].scale(&(-res[(a, b)])))?;
                }
                cj[a] = cj[a].add(&corr)?;
            }
            lam = lam.add(&lam_k)?;
        }
        let bj = lam.neg().re();
        // normalize |c|^2 = 2 with a real factor
        let mut norm = Jet::zero(vars, Basis::Real, bound);
        for a in 0..d {
            norm = norm.add(&cj[a].conj().mul(&cj[a])?)?;
        }
        let fac = norm.re().scale(&c(0.5)).sqrt()?.invert()?;
        for a in 0..d {
            cj[a] = cj[a].mul(&fac)?;
        }
        if let FrameGauge::Rotated(thetas) = gauge {
            if let Some(terms) = thetas.get(j) {
                let mut th = Jet::zero(vars, Basis::Real, bound);
                for (coef, p) in terms {
                    if p.len() != d {
                        return Err(Error::Invalid("gauge polynomial has wrong arity".into()));
                    }
                    th.add_term(Mono::from_parts(&vars, p, &[], &[], 0), c(*coef));
                }
                let rot = th.exp_i()?;
                for a in 0..d {
                    cj[a] = cj[a].mul(&rot)?;
                }
            }
        }
        let u: Vec<Jet> = cj.iter().map(|x| x.re()).collect();
        let v: Vec<Jet> = cj.iter().map(|x| x.im()).collect();
        let isb = bj.sqrt()?.invert()?;
        let lift = |x: &[Jet]| -> Result<Vec<Jet>> {
            let mut out = Vec::with_capacity(2 * d);
            for a in 0..d {
                out.push(x[a].mul(&isb)?);
            }
            for kk in 0..d {
                let mut acc = Jet::zero(vars, Basis::Real, bound);
                for i in 0..d {
                    acc = acc.add(&ta[i][kk].mul(&x[i])?)?;
                }
                out.push(acc.mul(&isb)?);
            }
            Ok(out)
        };
        es.push(lift(&u)?);
        fs.push(lift(&v)?);
        beta.push(bj);
        us.push(u);
        vs.push(v);
    }
    Ok(FrameJets { beta, u: us, v: vs, e: es, f: fs })
}

/// Gradient and Hessian of the intensity at `q`, from second-order frame jets.
/// Falls back to finite differences when the frequencies at `q` are not simple.
pub fn intensity_derivatives(sys: &MagneticSystem, q: &[f64]) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let d = sys.dim();
    let frames = match skew_frequencies(&sys.magnetic_matrix(q)) {
        Ok(f) => f,
        Err(Error::Degeneracy(_)) => return Ok(fd_derivatives(sys, q)),
        Err(e) => return Err(e),
    };
    let fj = frame_jets(sys, q, &frames, &FrameGauge::Canonical, 2)?;
    let vars = Vars::new(d, 0).unwrap();
    let mut g = DVector::zeros(d);
    let mut h = DMatrix::zeros(d, d);
    for b in &fj.beta {
        for k in 0..d {
            g[k] += b.coeff(&Mono::var(&vars, k, 1)).re;
            for l in 0..d {
                let m = Mono::var(&vars, k, 1).times(&Mono::var(&vars, l, 1));
                let f = if k == l { 2.0 } else { 1.0 };
                h[(k, l)] += f * b.coeff(&m).re;
            }
        }
    }
    Ok((g, h))
}

fn fd_derivatives(sys: &MagneticSystem, q: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
    let d = q.len();
    let h = 1e-4;
    let f = |x: &[f64]| sys.intensity(x);
    let at = |i: usize, a: f64, j: usize, b: f64| {
        let mut x = q.to_vec();
        x[i] += a;
        x[j] += b;
        f(&x)
    };
    let f0 = f(q);
    let mut g = DVector::zeros(d);
    let mut hs = DMatrix::zeros(d, d);
    for i in 0..d {
        let (fp, fm) = (at(i, h, i, 0.0), at(i, -h, i, 0.0));
        g[i] = (fp - fm) / (2.0 * h);
        hs[(i, i)] = (fp - 2.0 * f0 + fm) / (h * h);
        for j in 0..i {
            let v = (at(i, h, j, h) - at(i, h, j, -h) - at(i, -h, j, h) + at(i, -h, j, -h)) / (4.0 * h * h);
            hs[(i, j)] = v;
            hs[(j, i)] = v;
        }
    }
    (g, hs)
}

/// Symplectic frame of the normal bundle at a point of `Sigma`.
#[derive(Clone, Debug)]
pub struct PointFrames {
    pub beta: Vec<f64>,
    pub e: Vec<DVector<f64>>,
    pub f: Vec<DVector<f64>>,
}

/// `e_j = (u_j, TA^T u_j)/sqrt(beta_j)`, `f_j = (v_j, TA^T v_j)/sqrt(beta_j)` at `j(q)`.
pub fn sigma_frames(sys: &MagneticSystem, q: &[f64]) -> Result<PointFrames> {
    let frames = skew_frequencies(&sys.magnetic_matrix(q))?;
    let t = sys.potential_jacobian(q);
    let d = sys.dim();
    let lift = |x: &DVector<f64>, b: f64| {
        let top = x.clone();
        let bottom = t.transpose() * x;
        DVector::from_fn(2 * d, |i, _| if i < d { top[i] } else { bottom[i - d] }) / b.sqrt()
    };
    let e = frames.u.iter().zip(&frames.beta).map(|(u, b)| lift(u, *b)).collect();
    let f = frames.v.iter().zip(&frames.beta).map(|(v, b)| lift(v, *b)).collect();
    Ok(PointFrames { beta: frames.beta, e, f })
}

/// `omega(X, Y)` for `omega = sum dp ^ dq` on vectors `(dq, dp)`.
pub fn omega(x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    let d = x.len() / 2;
    (0..d).map(|i| x[d + i] * y[i] - y[d + i] * x[i]).sum()
}

/// Matrix of the standard form `sum d mom_j ^ d pos_j` on `(pos_1..pos_k, mom_1..mom_k)`.
pub fn standard_form(k: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * k, 2 * k);
    for i in 0..k {
        j[(k + i, i)] = 1.0;
        j[(i, k + i)] = -1.0;
    }
    j
}

/// Pullback of a 2-form with coefficient jets `form[i][j]` by a polynomial map.
pub fn pullback_form(form: &JetMatrix, map: &JetMap) -> Result<JetMatrix> {
    let dst = map.len();
    let nvar = map.components[0].vars().count();
    let fm: JetMatrix = form
        .iter()
        .map(|row| row.iter().map(|x| compose(x, map)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let dmap: JetMatrix = map
        .components
        .iter()
        .map(|m| (0..nvar).map(|a| m.derivative(a)).collect())
        .collect();
    let mut out: JetMatrix = Vec::with_capacity(nvar);
    for a in 0..nvar {
        let mut row = Vec::with_capacity(nvar);
        for b in 0..nvar {
            let mut acc = Jet::zero(dmap[0][0].vars(), dmap[0][0].basis(), dmap[0][0].bound());
            for i in 0..dst {
                if dmap[i][a].is_empty() {
                    continue;
                }
                let mut inner = Jet::zero(acc.vars(), acc.basis(), acc.bound());
                for j in 0..dst {
                    if dmap[j][b].is_empty() || fm[i][j].is_empty() {
                        continue;
                    }
                    inner = inner.add(&fm[i][j].mul(&dmap[j][b])?)?;
                }
                acc = acc.add(&dmap[i][a].mul(&inner)?)?;
            }
            row.push(acc);
        }
        out.push(row);
    }
    Ok(out)
}

/// Pullback of `omega = sum d pi ^ d s` by a map with components `(s_1..s_d, pi_1..pi_d)`.
pub fn pullback_omega(map: &JetMap) -> Result<JetMatrix> {
    let d = map.len() / 2;
    let nvar = map.components[0].vars().count();
    let ds: JetMatrix = (0..2 * d)
        .map(|i| (0..nvar).map(|a| map.components[i].derivative(a)).collect())
        .collect();
    let mut out: JetMatrix = Vec::with_capacity(nvar);
    for a in 0..nvar {
        let mut row = Vec::with_capacity(nvar);
        for b in 0..nvar {
            let mut acc = Jet::zero(ds[0][0].vars(), ds[0][0].basis(), ds[0][0].bound());
            if a != b {
                for i in 0..d {
                    acc = acc
                        .add(&ds[d + i][a].mul(&ds[i][b])?)?
                        .sub(&ds[d + i][b].mul(&ds[i][a])?)?;
                }
            }
            row.push(acc);
        }
        out.push(row);
    }
    Ok(out)
}

/// Largest coefficient of `form - constant` over all entries.
pub fn form_defect(form: &JetMatrix, target: &DMatrix<f64>) -> f64 {
    let mut d: f64 = 0.0;
    for (a, row) in form.iter().enumerate() {
        for (b, x) in row.iter().enumerate() {
            let t = Jet::constant(x.vars(), x.basis(), x.bound(), c(target[(a, b)]));
            d = d.max(x.dist(&t));
        }
    }
    d
}

/// Choice among Darboux charts of `(Sigma, B)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DarbouxVariant {
    /// Symmetric shear `eta -> eta + S y` applied to the linear part (row-major `n x n`).
    pub shear: Option<Vec<f64>>,
    /// Hamiltonian `F(w)` whose time-one flow is composed after the homotopy chart.
    pub twist: Vec<(f64, Vec<u32>)>,
}

/// Darboux chart `s = psi(w)` with `psi^* B = d eta ^ d y`, as jets of total degree `k`.
pub fn darboux_jet(sys: &MagneticSystem, well: &WellData, variant: &DarbouxVariant, k: u32) -> Result<JetMap> {
    let d = sys.dim();
    let n = d / 2;
    let (vars, bound) = base_layout(d, k);
    let mut m0 = DMatrix::<f64>::zeros(d, d);
    for j in 0..n {
        let sb = well.frames.beta[j].sqrt();
        for a in 0..d {
            m0[(a, j)] = well.frames.u[j][a] / sb;
            m0[(a, n + j)] = well.frames.v[j][a] / sb;
        }
    }
    if let Some(sh) = &variant.shear {
        if sh.len() != n * n {
            return Err(Error::Invalid("shear must be n x n".into()));
        }
        let mut s = DMatrix::<f64>::identity(d, d);
        for i in 0..n {
            for j in 0..n {
                if (sh[i * n + j] - sh[j * n + i]).abs() > 1e-14 {
                    return Err(Error::Invalid("shear must be symmetric".into()));
                }
                s[(n + i, j)] = sh[i * n + j];
            }
        }
        m0 *= s;
    }
    let lin = |x: &[Jet]| -> Result<Vec<Jet>> {
        (0..d)
            .map(|a| {
                let mut acc = Jet::zero(vars, Basis::Real, bound);
                for (i, xi) in x.iter().enumerate() {
                    if m0[(a, i)] != 0.0 {
                        acc = acc.add(&xi.scale(&c(m0[(a, i)])))?;
                    }
                }
                Ok(acc)
            })
            .collect()
    };
    let ws: Vec<Jet> = (0..d).map(|a| Jet::var(vars, Basis::Real, bound, a)).collect();
    let mut psi = JetMap { components: lin(&ws)? };
    let form: JetMatrix = {
        let f = sys.field_form();
        let shift = shift_map(d, &well.q0, sys.degree());
        f.iter()
            .map(|row| row.iter().map(|x| compose(x, &shift).unwrap().with_bound(bound)).collect())
            .collect()
    };
    let jmat = standard_form(n);
    for deg in 2..=k {
        let pb = pullback_form(&form, &psi)?;
        // homogeneous part of degree deg-1 of the defect
        let e: JetMatrix = pb
            .iter()
            .enumerate()
            .map(|(a, row)| {
                row.iter()
                    .enumerate()
                    .map(|(b, x)| {
                        let t = Jet::constant(vars, Basis::Real, x.bound(), c(jmat[(a, b)]));
                        x.sub(&t).unwrap().total_part(deg - 1)
                    })
                    .collect()
            })
            .collect();
        // theta = iota_R E / (deg + 1); X solves iota_X J = -theta
        let mut theta = Vec::with_capacity(d);
        for b in 0..d {
            let mut acc = Jet::zero(vars, Basis::Real, bound);
            for a in 0..d {
                acc = acc.add(&ws[a].mul(&e[a][b].with_bound(bound))?)?;
            }
            theta.push(acc.scale(&c(1.0 / (deg as f64 + 1.0))));
        }
        let x: Vec<Jet> = (0..d)
            .map(|a| if a < n { theta[a + n].clone() } else { theta[a - n].neg() })
            .collect();
        let dx = lin(&x)?;
        for a in 0..d {
            psi.components[a] = psi.components[a].add(&dx[a])?;
        }
    }
    if !variant.twist.is_empty() {
        let mut f = Jet::zero(vars, Basis::Real, bound);
        for (coef, p) in &variant.twist {
            if p.len() != d || p.iter().sum::<u32>() < 3 {
                return Err(Error::Invalid("twist Hamiltonian terms need arity d and degree >= 3".into()));
            }
            f.add_term(Mono::from_parts(&vars, p, &[], &[], 0), c(*coef));
        }
        let flow = hamiltonian_flow(&f, &ws)?;
        psi = psi.compose(&flow)?;
    }
    Ok(psi)
}

/// Time-one flow of `g -> {g, F}` applied to coordinate jets (Lie series).
pub fn hamiltonian_flow(f: &Jet, coords: &[Jet]) -> Result<JetMap> {
    let nmax = f.bound().total() as usize + 1;
    let comps = coords
        .iter()
        .map(|x| {
            let mut sum = x.clone();
            let mut term = x.clone();
            for k in 1..=nmax {
                term = poisson(&term, f)?.with_bound(x.bound()).scale(&c(1.0 / k as f64));
                if term.is_empty() {
                    break;
                }
                sum = sum.add(&term)?;
            }
            Ok(sum)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(JetMap { components: comps })
}

/// Residual of the Darboux condition over the exact region of the pullback.
pub fn darboux_defect(sys: &MagneticSystem, well: &WellData, psi: &JetMap) -> Result<f64> {
    let d = sys.dim();
    let bound = psi.components[0].bound();
    let shift = shift_map(d, &well.q0, sys.degree());
    let form: JetMatrix = sys
        .field_form()
        .iter()
        .map(|row| row.iter().map(|x| compose(x, &shift).unwrap().with_bound(bound)).collect())
        .collect();
    let pb = pullback_form(&form, psi)?;
    Ok(form_defect(&pb, &standard_form(d / 2)))
}

/// Tubular chart `Phi(w, x, xi)` into recentered `(s, pi)`.
#[derive(Clone, Debug)]
pub struct TubularChart {
    pub phi: JetMap,
    /// Largest coefficient of `Phi^* omega - omega_0` on the exact region.
    pub form_residual: f64,
}

/// Layout of the `(w, x, xi)` jets for a `d`-dimensional system.
pub fn phase_layout(d: usize) -> Vars {
    Vars::new(d, d / 2).expect("dimension checked")
}

/// Flow of a field with base-dependent components, applied with time variable `t`
/// to the point `(sigma, pi)`.
fn apply_flow(
    field_q: &[Jet],
    field_p: &[Jet],
    point: &[Jet],
    t: usize,
) -> Result<Vec<Jet>> {
    let d = field_q.len();
    let bvars = field_q[0].vars();
    let top = point[0].bound().total();
    let vars = point[0].vars();
    let bound = point[0].bound();
    let lie = |g: &Jet| -> Result<Jet> {
        let mut acc = Jet::zero(bvars, Basis::Real, g.bound().lowered());
        for a in 0..d {
            let dg = g.derivative(a);
            if !dg.is_empty() {
                acc = acc.add(&field_q[a].mul(&dg)?)?;
            }
        }
        Ok(acc)
    };
    let sigma_map = JetMap { components: point[..d].to_vec() };
    let tv = Jet::var(vars, Basis::Real, bound, t);
    let mut out = Vec::with_capacity(2 * d);
    let mut tpow = vec![Jet::constant(vars, Basis::Real, bound, c(1.0))];
    for k in 1..=top as usize {
        let p = tpow[k - 1].mul(&tv)?.scale(&c(1.0 / k as f64));
        tpow.push(p);
    }
    for i in 0..d {
        // sigma_i -> sum_k t^k/k! (L^k s_i) o sigma
        let mut g = Jet::var(bvars, Basis::Real, field_q[0].bound(), i);
        let mut acc = point[i].clone();
        for k in 1..=top as usize {
            g = lie(&g)?;
            if g.is_empty() || tpow[k].is_empty() {
                break;
            }
            acc = acc.add(&compose(&g, &sigma_map)?.mul(&tpow[k])?)?;
        }
        out.push(acc);
    }
    for i in 0..d {
        let mut g = field_p[i].clone();
        let mut acc = point[d + i].clone();
        for k in 1..=top as usize {
            if g.is_empty() || tpow[k].is_empty() {
                break;
            }
            acc = acc.add(&compose(&g, &sigma_map)?.mul(&tpow[k])?)?;
            g = lie(&g)?;
        }
        out.push(acc);
    }
    Ok(out)
}

/// Build the tubular chart: frame flows from `j(psi(w))` followed by the
/// Weinstein-type correction making `Phi^* omega = d eta ^ d y + d xi ^ d x` in the bound.
pub fn tubular_map_jet(
    sys: &MagneticSystem,
    well: &WellData,
    frames: &FrameJets,
    psi: &JetMap,
    order: ReductionOrder,
) -> Result<TubularChart> {
    let d = sys.dim();
    let n = d / 2;
    let vars = phase_layout(d);
    let bound = order.bound();
    let (xs, xis): (Vec<usize>, Vec<usize>) = ((0..n).map(|j| vars.alpha(j)).collect(), (0..n).map(|j| vars.gamma(j)).collect());
    // base point j(q0 + s) - (q0, A(q0)) in (s, x, xi)
    let rec_a = sys.recentered_potential(&well.q0, GradeBound::new(0, order.base_degree()));
    let mut point: Vec<Jet> = (0..d).map(|i| Jet::var(vars, Basis::Real, bound, i)).collect();
    for a in &rec_a {
        let a0 = Jet::constant(a.vars(), Basis::Real, a.bound(), a.constant_term());
        point.push(embed(&a.sub(&a0)?, vars, Basis::Real, bound));
    }
    for j in (0..n).rev() {
        // innermost: xi_j along -f_j, then x_j along e_j
        let fq: Vec<Jet> = frames.f[j][..d].iter().map(|x| x.neg()).collect();
        let fp: Vec<Jet> = frames.f[j][d..].iter().map(|x| x.neg()).collect();
        point = apply_flow(&fq, &fp, &point, xis[j])?;
        point = apply_flow(&frames.e[j][..d], &frames.e[j][d..], &point, xs[j])?;
    }
    // substitute s = psi(w)
    let mut sub = Vec::with_capacity(d + 2 * n);
    for comp in &psi.components {
        sub.push(embed(comp, vars, Basis::Real, bound));
    }
    for v in d..vars.count() {
        sub.push(Jet::var(vars, Basis::Real, bound, v));
    }
    let sub = JetMap { components: sub };
    let mut phi = JetMap {
        components: point.iter().map(|p| compose(p, &sub)).collect::<Result<_>>()?,
    };
    // correction on (w, z): kill the dilation-degree-k part of the defect
    let nv = vars.count();
    let omega0 = omega0_matrix(d);
    let is_z = |a: usize| a >= d;
    for k in 1..=(order.z_order + 1) {
        let pb = pullback_omega(&phi)?;
        let mut theta: Vec<Jet> = (0..nv).map(|_| Jet::zero(vars, Basis::Real, bound)).collect();
        let mut any = false;
        for a in 0..nv {
            if !is_z(a) {
                continue;
            }
            for b in 0..nv {
                let extra = 1 + is_z(b) as u32;
                if k < extra {
                    continue;
                }
                let t = Jet::constant(vars, Basis::Real, pb[a][b].bound(), c(omega0[(a, b)]));
                let e = pb[a][b].sub(&t)?.filter(|m| m.zsum() + extra == k);
                if e.is_empty() {
                    continue;
                }
                any = true;
                let za = Jet::var(vars, Basis::Real, bound, a);
                theta[b] = theta[b].add(&za.mul(&e.with_bound(bound))?.scale(&c(1.0 / k as f64)))?;
            }
        }
        if !any {
            continue;
        }
        // X = -Omega0 theta
        let mut xmap = Vec::with_capacity(nv);
        for a in 0..nv {
            let mut xa = Jet::zero(vars, Basis::Real, bound);
            for b in 0..nv {
                if omega0[(a, b)] != 0.0 {
                    xa = xa.add(&theta[b].scale(&c(-omega0[(a, b)])))?;
                }
            }
            xmap.push(Jet::var(vars, Basis::Real, bound, a).add(&xa)?);
        }
        phi = phi.compose(&JetMap { components: xmap })?;
    }
    let pb = pullback_omega(&phi)?;
    let residual = form_defect(&pb, &omega0);
    Ok(TubularChart { phi, form_residual: residual })
}

/// Matrix of `omega_0` on the `(w, x, xi)` layout.
pub fn omega0_matrix(d: usize) -> DMatrix<f64> {
    let n = d / 2;
    let vars = phase_layout(d);
    let nv = vars.count();
    let mut o = DMatrix::<f64>::zeros(nv, nv);
    let wblk = standard_form(n);
    for a in 0..d {
        for b in 0..d {
            o[(a, b)] = wblk[(a, b)];
        }
    }
    for j in 0..n {
        o[(vars.gamma(j), vars.alpha(j))] = 1.0;
        o[(vars.alpha(j), vars.gamma(j))] = -1.0;
    }
    o
}

/// Options selecting the chart used by the reduction.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ChartOptions {
    pub gauge: FrameGauge,
    pub darboux: DarbouxVariant,
}

/// Output of the classical reduction.
#[derive(Clone, Debug)]
pub struct ReducedSymbol {
    /// `H o Phi` in the real basis.
    pub real: Jet,
    /// `H o Phi` in the complex basis.
    pub symbol: Jet,
    /// `beta_hat_j(w)`: coefficient of `|z_j|^2`, as phase-free jets on the same layout.
    pub beta_hat: Vec<Jet>,
    pub chart: TubularChart,
    pub psi: JetMap,
    /// Largest coefficient of the z-constant and z-linear parts.
    pub low_order_defect: f64,
    /// Largest off-diagonal z-quadratic coefficient.
    pub quadratic_defect: f64,
}

/// Full classical pipeline: frames, Darboux chart, tubular chart and `H o Phi`.
pub fn reduce_hamiltonian(
    sys: &MagneticSystem,
    well: &WellData,
    order: ReductionOrder,
    opts: &ChartOptions,
) -> Result<ReducedSymbol> {
    let d = sys.dim();
    let n = d / 2;
    let k = order.base_degree();
    let frames = frame_jets(sys, &well.q0, &well.frames, &opts.gauge, k)?;
    let psi = darboux_jet(sys, well, &opts.darboux, k)?;
    let chart = tubular_map_jet(sys, well, &frames, &psi, order)?;
    let h = hamiltonian_jet(sys, &well.q0, k);
    let real = compose(&h, &chart.phi)?;
    let symbol = real.complex_convert(Basis::Complex);
    let vars = symbol.vars();
    let low = symbol.filter(|m| m.zsum() < 2).max_abs();
    let quad = symbol.filter(|m| m.zsum() == 2 && m.hbar() == 0);
    let mut beta_hat = Vec::with_capacity(n);
    for j in 0..n {
        let bj = quad.filter(|m| {
            (0..n).all(|i| {
                let want = (i == j) as u32;
                m.get(&vars, vars.alpha(i)) == want && m.get(&vars, vars.gamma(i)) == want
            })
        });
        beta_hat.push(bj.relabel(vars, Basis::Complex, bj.bound(), |m| {
            Some(Mono::from_parts(&vars, &m.w_part(&vars), &vec![0; n], &vec![0; n], 0))
        }));
    }
    let off = quad.filter(|m| !m.is_resonant(&vars)).max_abs();
    let cross = quad
        .filter(|m| m.is_resonant(&vars))
        .filter(|m| (0..n).filter(|&i| m.get(&vars, vars.alpha(i)) > 0).count() > 1)
        .max_abs();
    Ok(ReducedSymbol {
        real,
        symbol,
        beta_hat,
        chart,
        psi,
        low_order_defect: low,
        quadratic_defect: off.max(cross),
    })
}
