//! Weyl-Moyal calculus on jets.
//!
//! With the bidifferential operator `B = sum (d_xi' d_x'' - d_x' d_xi'')` (and the same for
//! the slow pairs `(y, eta)`), `a * b = sum_k (hbar/2i)^k B^k(a, b)/k!`. In the complex
//! basis `B` has the entries `2i d_z' d_zb'' - 2i d_zb' d_z''`.

use super::{Acc, Basis, Coeff, GradeBound, Jet, Mono, Vars, MAX_SLOTS};
use crate::error::{Error, Result};

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    Star,
    Commutator,
    /// `(i/hbar)[a, b]`
    ScaledAd,
    Poisson,
}

struct Entry<C> {
    u: usize,
    v: usize,
    c: C,
    slow: bool,
}

fn entries<C: Coeff>(vars: &Vars, basis: Basis) -> Result<Vec<Entry<C>>> {
    if vars.nw % 2 != 0 {
        return Err(Error::Incompatible(format!(
            "Moyal calculus needs an even number of w variables, got {}",
            vars.nw
        )));
    }
    let k = vars.nw / 2;
    let mut out = Vec::new();
    for j in 0..k {
        out.push(Entry { u: k + j, v: j, c: C::one(), slow: true });
        out.push(Entry { u: j, v: k + j, c: C::one().neg(), slow: true });
    }
    for j in 0..vars.nz {
        let (a, g) = (vars.alpha(j), vars.gamma(j));
        match basis {
            Basis::Real => {
                out.push(Entry { u: g, v: a, c: C::one(), slow: false });
                out.push(Entry { u: a, v: g, c: C::one().neg(), slow: false });
            }
            Basis::Complex => {
                let two_i = C::imag_unit().mul(&C::ratio(2, 1));
                out.push(Entry { u: a, v: g, c: two_i.clone(), slow: false });
                out.push(Entry { u: g, v: a, c: two_i.neg(), slow: false });
            }
        }
    }
    Ok(out)
}

struct Ctx<'a, C: Coeff> {
    vars: Vars,
    kind: Kind,
    bound: GradeBound,
    entries: &'a [Entry<C>],
    /// `entry_pow[i][n] = c_i^n / n!`
    entry_pow: Vec<Vec<C>>,
    /// `level[k]` = scalar in front of `B^k/k!`
    level: Vec<C>,
    acc: Acc<C>,
}

struct Pair<'a, C> {
    ma: Mono,
    mb: Mono,
    coef: &'a C,
    base_phase: i64,
}

impl<'a, C: Coeff> Ctx<'a, C> {
    fn rec(
        &mut self,
        pair: &Pair<C>,
        i: usize,
        da: &mut [u32; MAX_SLOTS],
        db: &mut [u32; MAX_SLOTS],
        k: u32,
        kw: u32,
        coef: C,
    ) {
        if pair.base_phase + 2 * kw as i64 > self.bound.max_phase_degree as i64 {
            return;
        }
        if i == self.entries.len() {
            self.leaf(pair, da, db, k, coef);
            return;
        }
        let (u, v, slow) = (self.entries[i].u, self.entries[i].v, self.entries[i].slow);
        let ea = pair.ma.get(&self.vars, u) - da[u];
        let eb = pair.mb.get(&self.vars, v) - db[v];
        let mut nmax = ea.min(eb);
        if self.kind == Kind::Poisson {
            nmax = nmax.min(1 - k.min(1));
        }
        for n in 0..=nmax {
            let c = if n == 0 { coef.clone() } else { coef.mul(&self.entry_pow[i][n as usize]) };
            da[u] += n;
            db[v] += n;
            self.rec(pair, i + 1, da, db, k + n, kw + if slow { n } else { 0 }, c);
            da[u] -= n;
            db[v] -= n;
        }
    }

    fn leaf(&mut self, pair: &Pair<C>, da: &[u32; MAX_SLOTS], db: &[u32; MAX_SLOTS], k: u32, coef: C) {
        let (scale, hpow) = match self.kind {
            Kind::Star => (self.level[k as usize].clone(), k),
            Kind::Commutator => {
                if k % 2 == 0 {
                    return;
                }
                (self.level[k as usize].clone(), k)
            }
            Kind::ScaledAd => {
                if k % 2 == 0 {
                    return;
                }
                (self.level[k as usize].clone(), k - 1)
            }
            Kind::Poisson => {
                if k != 1 {
                    return;
                }
                (C::one(), 0)
            }
        };
        let vars = self.vars;
        let mut ma = pair.ma;
        let mut mb = pair.mb;
        let mut f: i64 = 1;
        for v in 0..vars.count() {
            if da[v] > 0 {
                let e = ma.get(&vars, v);
                f *= falling(e, da[v]);
                ma = ma.lowered(&vars, v, da[v]);
            }
            if db[v] > 0 {
                let e = mb.get(&vars, v);
                f *= falling(e, db[v]);
                mb = mb.lowered(&vars, v, db[v]);
            }
        }
        let m = ma.times(&mb).times(&Mono::hbar_pow(hpow));
        if !self.bound.admits(m.phase(), m.wdeg(&vars)) {
            return;
        }
        let c = coef.mul(&scale).mul(&C::ratio(f, 1)).mul(pair.coef);
        if c.is_zero() {
            return;
        }
        self.acc
            .entry(m)
            .and_modify(|x| x.add_assign(&c))
            .or_insert(c);
    }
}

fn falling(e: u32, d: u32) -> i64 {
    (0..d).map(|i| (e - i) as i64).product()
}

fn bidiff<C: Coeff>(a: &Jet<C>, b: &Jet<C>, kind: Kind) -> Result<Jet<C>> {
    a.check(b, "Moyal")?;
    let vars = a.vars();
    let ents = entries::<C>(&vars, a.basis())?;
    let bound = a.bound().min(&b.bound());
    let maxk = bound.total() as usize + 2;
    let entry_pow = ents
        .iter()
        .map(|e| {
            let mut v = vec![C::one()];
            let mut p = C::one();
            for n in 1..=maxk {
                p = p.mul(&e.c).mul(&C::ratio(1, n as i64));
                v.push(p.clone());
            }
            v
        })
        .collect();
    // (hbar / 2i)^k = hbar^k (-i/2)^k
    let mi2 = C::imag_unit().neg().mul(&C::ratio(1, 2));
    let level = (0..=maxk)
        .map(|k| {
            let base = mi2.powi(k as u32);
            match kind {
                Kind::Star | Kind::Poisson => base,
                Kind::Commutator => base.mul(&C::ratio(2, 1)),
                Kind::ScaledAd => base.mul(&C::ratio(2, 1)).mul(&C::imag_unit()),
            }
        })
        .collect();
    let mut ctx = Ctx {
        vars,
        kind,
        bound,
        entries: &ents,
        entry_pow,
        level,
        acc: Acc::default(),
    };
    let tb: Vec<(Mono, u32, u32, &C)> = b
        .terms()
        .map(|(m, c)| (*m, m.phase(), m.wdeg(&vars), c))
        .collect();
    for (ma, ca) in a.terms() {
        let (pa, wa) = (ma.phase(), ma.wdeg(&vars));
        for (mb, pb, wb, cb) in &tb {
            let total = pa + wa + pb + wb;
            let (base_phase, total) = match kind {
                Kind::Star | Kind::Commutator => ((pa + pb) as i64, total),
                Kind::ScaledAd | Kind::Poisson => ((pa + pb) as i64 - 2, total.saturating_sub(2)),
            };
            if total > bound.total() || base_phase > bound.max_phase_degree as i64 {
                continue;
            }
            let prod = ca.mul(cb);
            let pair = Pair { ma: *ma, mb: *mb, coef: &prod, base_phase };
            let mut da = [0u32; MAX_SLOTS];
            let mut db = [0u32; MAX_SLOTS];
            ctx.rec(&pair, 0, &mut da, &mut db, 0, 0, C::one());
        }
    }
    let acc = std::mem::take(&mut ctx.acc);
    Ok(Jet::from_acc(vars, a.basis(), bound, acc))
}

/// Weyl-Moyal product `a * b`.
pub fn moyal_star<C: Coeff>(a: &Jet<C>, b: &Jet<C>) -> Result<Jet<C>> {
    bidiff(a, b, Kind::Star)
}

/// Commutator `a * b - b * a`.
pub fn moyal_bracket<C: Coeff>(a: &Jet<C>, b: &Jet<C>) -> Result<Jet<C>> {
    bidiff(a, b, Kind::Commutator)
}

/// `(i/hbar)[a, b]`, computed without dividing by hbar.
pub fn scaled_ad<C: Coeff>(a: &Jet<C>, b: &Jet<C>) -> Result<Jet<C>> {
    bidiff(a, b, Kind::ScaledAd)
}

/// Poisson bracket `{a, b} = sum (d_xi a d_x b - d_x a d_xi b) + (same for (y, eta))`.
pub fn poisson<C: Coeff>(a: &Jet<C>, b: &Jet<C>) -> Result<Jet<C>> {
    bidiff(a, b, Kind::Poisson)
}

/// `exp((i/hbar) ad_tau) a`, summed up to `order` nested brackets.
///
/// `tau` must have phase valuation at least 3.
pub fn exp_ad<C: Coeff>(tau: &Jet<C>, a: &Jet<C>, order: usize) -> Result<Jet<C>> {
    if let Some(v) = tau.valuation() {
        if v < 3 {
            return Err(Error::Grading(format!(
                "generator must have phase valuation >= 3, found {v}"
            )));
        }
    }
    let mut sum = a.clone();
    let mut term = a.clone();
    for n in 1..=order {
        term = scaled_ad(tau, &term)?.scale(&C::ratio(1, n as i64));
        if term.is_empty() {
            break;
        }
        sum = sum.add(&term)?;
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::Exact;
    use num_complex::Complex64;

    fn real_pair(bound: GradeBound) -> (Jet<Exact>, Jet<Exact>) {
        let vars = Vars::new(0, 1).unwrap();
        (
            Jet::var(vars, Basis::Real, bound, 0),
            Jet::var(vars, Basis::Real, bound, 1),
        )
    }

    #[test]
    fn canonical_commutator() {
        let (x, xi) = real_pair(GradeBound::new(4, 0));
        let c = moyal_bracket(&x, &xi).unwrap();
        // x * xi - xi * x = i hbar
        let expect = Jet::monomial(x.vars(), Basis::Real, x.bound(), Mono::hbar_pow(1), Exact::imag_unit());
        assert_eq!(c, expect);
        // {x, xi} = -1
        let p = poisson(&x, &xi).unwrap();
        assert_eq!(p, Jet::constant(x.vars(), Basis::Real, x.bound(), Exact::one().neg()));
    }

    #[test]
    fn harmonic_square() {
        let b = GradeBound::new(8, 0);
        let (x, xi) = real_pair(b);
        let i = x.mul(&x).unwrap().add(&xi.mul(&xi).unwrap()).unwrap();
        let ii = moyal_star(&i, &i).unwrap();
        let expect = i
            .mul(&i)
            .unwrap()
            .sub(&Jet::monomial(i.vars(), Basis::Real, b, Mono::hbar_pow(2), Exact::one()))
            .unwrap();
        assert_eq!(ii, expect);
        // same identity in the complex basis
        let iz = i.complex_convert(Basis::Complex);
        let iiz = moyal_star(&iz, &iz).unwrap();
        assert_eq!(iiz, expect.complex_convert(Basis::Complex));
    }

    #[test]
    fn scaled_ad_matches_bracket() {
        let b = GradeBound::new(8, 0);
        let (x, xi) = real_pair(b);
        let a = x.pow(3).unwrap().add(&x.mul(&xi).unwrap()).unwrap();
        let c = xi.pow(3).unwrap().add(&x.pow(2).unwrap()).unwrap();
        let br = moyal_bracket(&a, &c).unwrap();
        let ad = scaled_ad(&a, &c).unwrap();
        // (i/hbar) [a, c] times hbar equals i [a, c]
        let lhs = ad.hbar_shift(1).unwrap();
        let rhs = br.scale(&Exact::imag_unit());
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn exp_ad_rejects_low_valuation() {
        let (x, xi) = real_pair(GradeBound::new(6, 0));
        let tau = x.mul(&xi).unwrap();
        assert!(matches!(exp_ad(&tau, &x, 4), Err(Error::Grading(_))));
    }

    #[test]
    fn slow_pairs_commute_canonically() {
        let vars = Vars::new(2, 0).unwrap();
        let b = GradeBound::new(2, 2);
        let y = Jet::<Complex64>::var(vars, Basis::Complex, b, 0);
        let eta = Jet::<Complex64>::var(vars, Basis::Complex, b, 1);
        let p = poisson(&y, &eta).unwrap();
        assert!((p.constant_term() - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
    }
}
