use super::{Basis, Coeff, GradeBound, Jet, Mono, Vars};
use crate::error::{Error, Result};

/// Tuple of jets on a common domain, read as a polynomial map.
#[derive(Clone, Debug, PartialEq)]
pub struct JetMap<C: Coeff = num_complex::Complex64> {
    pub components: Vec<Jet<C>>,
}

impl<C: Coeff> JetMap<C> {
    pub fn new(components: Vec<Jet<C>>) -> Result<Self> {
        if let Some(first) = components.first() {
            for c in &components[1..] {
                first.check(c, "jet map")?;
            }
        }
        Ok(JetMap { components })
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Identity map on a layout.
    pub fn identity(vars: Vars, basis: Basis, bound: GradeBound) -> Self {
        JetMap {
            components: (0..vars.count()).map(|v| Jet::var(vars, basis, bound, v)).collect(),
        }
    }

    /// Componentwise composition `self o inner`.
    pub fn compose(&self, inner: &JetMap<C>) -> Result<JetMap<C>> {
        let comps = self
            .components
            .iter()
            .map(|f| compose(f, inner))
            .collect::<Result<Vec<_>>>()?;
        Ok(JetMap { components: comps })
    }
}

/// Substitute the components of `inner` for the variables of `f` (in flat order);
/// powers of hbar pass through.
///
/// `f` is treated as an exact polynomial, so components may have nonzero constant terms.
pub fn compose<C: Coeff>(f: &Jet<C>, inner: &JetMap<C>) -> Result<Jet<C>> {
    let n = f.vars().count();
    if inner.len() != n {
        return Err(Error::Incompatible(format!(
            "compose: jet has {n} variables but map has {} components",
            inner.len()
        )));
    }
    let target = match inner.components.first() {
        Some(c) => c,
        None => {
            return Ok(Jet::constant(f.vars(), f.basis(), f.bound(), f.constant_term()));
        }
    };
    let (vars, basis, bound) = (target.vars(), target.basis(), target.bound());
    let fv = f.vars();
    let mut powers: Vec<Vec<Jet<C>>> = (0..n)
        .map(|_| vec![Jet::constant(vars, basis, bound, C::one())])
        .collect();
    let mut out = Jet::zero(vars, basis, bound);
    for (m, c) in f.terms() {
        let mut t = Jet::monomial(vars, basis, bound, Mono::hbar_pow(m.hbar()), c.clone());
        for v in 0..n {
            let e = m.get(&fv, v) as usize;
            if e == 0 {
                continue;
            }
            while powers[v].len() <= e {
                let next = powers[v].last().unwrap().mul(&inner.components[v])?;
                powers[v].push(next);
            }
            t = t.mul(&powers[v][e])?;
            if t.is_empty() {
                break;
            }
        }
        for (tm, tc) in t.terms() {
            out.add_term(*tm, tc.clone());
        }
    }
    out.canonicalize();
    Ok(out)
}

fn binom(n: u32, k: u32) -> i64 {
    let mut r: i64 = 1;
    for i in 0..k {
        r = r * (n - i) as i64 / (i + 1) as i64;
    }
    r
}

impl<C: Coeff> Jet<C> {
    /// Change the phase-pair basis between `(x, xi)` and `(z, zbar)`, with `z = x + i xi`.
    pub fn complex_convert(&self, target: Basis) -> Jet<C> {
        if target == self.basis() {
            return self.clone();
        }
        let vars = self.vars();
        let nz = vars.nz;
        let half = C::ratio(1, 2);
        let i = C::imag_unit();
        let mut out = Jet::zero(vars, target, self.bound());
        for (m, c) in self.terms() {
            // expand pair by pair into a list of (alpha, gamma, coefficient) choices
            let mut partial: Vec<(Vec<u32>, Vec<u32>, C)> = vec![(vec![0; nz], vec![0; nz], c.clone())];
            for j in 0..nz {
                let a = m.get(&vars, vars.alpha(j));
                let g = m.get(&vars, vars.gamma(j));
                if a == 0 && g == 0 {
                    continue;
                }
                let mut opts: Vec<(u32, u32, C)> = Vec::new();
                for s in 0..=a {
                    for t in 0..=g {
                        let k = C::ratio(binom(a, s) * binom(g, t), 1);
                        let (p, q, f) = match target {
                            // x = (z + zb)/2, xi = -i (z - zb)/2
                            Basis::Complex => {
                                let sign = if (g - t) % 2 == 1 { C::one().neg() } else { C::one() };
                                let f = k
                                    .mul(&sign)
                                    .mul(&half.powi(a + g))
                                    .mul(&i.neg().powi(g));
                                (s + t, (a - s) + (g - t), f)
                            }
                            // z = x + i xi, zb = x - i xi
                            Basis::Real => {
                                let f = k.mul(&i.powi(a - s)).mul(&i.neg().powi(g - t));
                                (s + t, (a - s) + (g - t), f)
                            }
                        };
                        opts.push((p, q, f));
                    }
                }
                let mut next = Vec::with_capacity(partial.len() * opts.len());
                for (al, ga, cc) in &partial {
                    for (p, q, f) in &opts {
                        let mut al2 = al.clone();
                        let mut ga2 = ga.clone();
                        al2[j] = *p;
                        ga2[j] = *q;
                        next.push((al2, ga2, cc.mul(f)));
                    }
                }
                partial = next;
            }
            let w = m.w_part(&vars);
            for (al, ga, cc) in partial {
                out.add_term(Mono::from_parts(&vars, &w, &al, &ga, m.hbar()), cc);
            }
        }
        out.canonicalize();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn x_squared_plus_xi_squared_is_z_zbar() {
        let vars = Vars::new(0, 1).unwrap();
        let b = GradeBound::new(4, 0);
        let x = Jet::<Complex64>::var(vars, Basis::Real, b, 0);
        let xi = Jet::<Complex64>::var(vars, Basis::Real, b, 1);
        let i = x.mul(&x).unwrap().add(&xi.mul(&xi).unwrap()).unwrap();
        let z = i.complex_convert(Basis::Complex);
        assert_eq!(z.len(), 1);
        assert_eq!(z.coeff(&Mono::from_parts(&vars, &[], &[1], &[1], 0)), c(1.0, 0.0));
        let back = z.complex_convert(Basis::Real);
        assert!(back.dist(&i) < 1e-15);
    }

    #[test]
    fn compose_recenters_polynomial() {
        // (1 + w)^2 evaluated through w -> w - 1 gives w^2
        let vars = Vars::new(1, 0).unwrap();
        let b = GradeBound::new(0, 4);
        let w = Jet::<Complex64>::var(vars, Basis::Real, b, 0);
        let one = Jet::constant(vars, Basis::Real, b, c(1.0, 0.0));
        let f = one.add(&w).unwrap().pow(2).unwrap();
        let shift = JetMap::new(vec![w.sub(&one).unwrap()]).unwrap();
        let g = compose(&f, &shift).unwrap();
        assert!(g.dist(&w.mul(&w).unwrap()) < 1e-15);
    }
}
