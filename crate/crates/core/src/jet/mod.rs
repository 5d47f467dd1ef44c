//! Truncated polynomial jets in slow variables w, phase pairs and the semiclassical parameter.

mod algebra;
mod coeff;
mod mono;
mod moyal;
mod serial;

use std::collections::{BTreeMap, HashMap};
use std::hash::{BuildHasherDefault, Hasher};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub use algebra::{compose, JetMap};
pub use coeff::{Coeff, Exact};
pub use mono::{Basis, GradeBound, Mono, Vars, MAX_SLOTS, MAX_TOTAL_DEGREE};
pub use moyal::{exp_ad, moyal_bracket, moyal_star, poisson, scaled_ad};
pub use serial::{JetDocument, TermRecord};

/// Multiplicative hasher for packed monomials.
#[derive(Default)]
pub(crate) struct MonoHasher(u64);

impl Hasher for MonoHasher {
    fn finish(&self) -> u64 {
        self.0
    }
    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 = (self.0.rotate_left(5) ^ b as u64).wrapping_mul(0x51_7c_c1_b7_27_22_0a_95);
        }
    }
    fn write_u128(&mut self, x: u128) {
        let lo = x as u64;
        let hi = (x >> 64) as u64;
        let h = (lo ^ hi.rotate_left(29)).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        self.0 = h ^ (h >> 31);
    }
}

pub(crate) type Acc<C> = HashMap<Mono, C, BuildHasherDefault<MonoHasher>>;

/// Truncated polynomial in `(w, alpha-vars, gamma-vars, hbar)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet<C: Coeff = Complex64> {
    vars: Vars,
    basis: Basis,
    bound: GradeBound,
    terms: BTreeMap<Mono, C>,
}

pub type ExactJet = Jet<Exact>;

impl<C: Coeff> Jet<C> {
    pub fn zero(vars: Vars, basis: Basis, bound: GradeBound) -> Self {
        assert!(bound.is_valid(), "grade bound exceeds {MAX_TOTAL_DEGREE}");
        Jet {
            vars,
            basis,
            bound,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(vars: Vars, basis: Basis, bound: GradeBound, c: C) -> Self {
        let mut j = Self::zero(vars, basis, bound);
        j.add_term(Mono::ONE, c);
        j
    }

    /// Coordinate function of flat variable `v`.
    pub fn var(vars: Vars, basis: Basis, bound: GradeBound, v: usize) -> Self {
        let mut j = Self::zero(vars, basis, bound);
        j.add_term(Mono::var(&vars, v, 1), C::one());
        j
    }

    pub fn monomial(vars: Vars, basis: Basis, bound: GradeBound, m: Mono, c: C) -> Self {
        let mut j = Self::zero(vars, basis, bound);
        j.add_term(m, c);
        j
    }

    pub fn vars(&self) -> Vars {
        self.vars
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn bound(&self) -> GradeBound {
        self.bound
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms in canonical order.
    pub fn terms(&self) -> impl Iterator<Item = (&Mono, &C)> {
        self.terms.iter()
    }

    pub fn coeff(&self, m: &Mono) -> C {
        self.terms.get(m).cloned().unwrap_or_else(C::zero)
    }

    pub fn admits(&self, m: &Mono) -> bool {
        self.bound.admits(m.phase(), m.wdeg(&self.vars))
    }

    /// Accumulate `c` into monomial `m`; silently drops monomials outside the bound.
    pub fn add_term(&mut self, m: Mono, c: C) {
        if !self.admits(&m) || c.is_zero() {
            return;
        }
        let mut remove = false;
        match self.terms.get_mut(&m) {
            Some(x) => {
                x.add_assign(&c);
                remove = x.is_zero();
            }
            None => {
                self.terms.insert(m, c);
            }
        }
        if remove {
            self.terms.remove(&m);
        }
    }

    pub(crate) fn from_acc(vars: Vars, basis: Basis, bound: GradeBound, acc: Acc<C>) -> Self {
        let mut j = Self::zero(vars, basis, bound);
        j.terms = acc.into_iter().filter(|(m, _)| bound.admits(m.phase(), m.wdeg(&vars))).collect();
        j.canonicalize();
        j
    }

    /// Drop zeros and, for floating coefficients, entries below `1e-14 * max|c|`.
    pub fn canonicalize(&mut self) {
        if C::EXACT {
            self.terms.retain(|_, c| !c.is_zero());
        } else {
            let max = self.max_abs();
            let tol = 1e-14 * max;
            self.terms.retain(|_, c| !c.is_zero() && c.magnitude() >= tol);
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.terms.values().map(|c| c.magnitude()).fold(0.0, f64::max)
    }

    pub(crate) fn check(&self, o: &Self, what: &str) -> Result<()> {
        if self.vars != o.vars {
            return Err(Error::Incompatible(format!(
                "{what}: variable layouts {:?} and {:?}",
                self.vars, o.vars
            )));
        }
        if self.basis != o.basis {
            return Err(Error::Incompatible(format!(
                "{what}: bases {:?} and {:?}",
                self.basis, o.basis
            )));
        }
        Ok(())
    }

    /// Same jet re-truncated to a (smaller) bound.
    pub fn with_bound(&self, bound: GradeBound) -> Self {
        let mut j = Self::zero(self.vars, self.basis, bound);
        for (m, c) in &self.terms {
            j.add_term(*m, c.clone());
        }
        j
    }

    pub fn add(&self, o: &Self) -> Result<Self> {
        self.check(o, "add")?;
        let mut r = self.with_bound(self.bound.min(&o.bound));
        for (m, c) in &o.terms {
            r.add_term(*m, c.clone());
        }
        r.canonicalize();
        Ok(r)
    }

    pub fn sub(&self, o: &Self) -> Result<Self> {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> Self {
        self.map(|c| c.neg())
    }

    pub fn scale(&self, s: &C) -> Self {
        let mut r = self.map(|c| c.mul(s));
        r.canonicalize();
        r
    }

    /// Coefficientwise complex conjugate.
    pub fn conj(&self) -> Self {
        self.map(|c| c.conj())
    }

    pub fn map(&self, f: impl Fn(&C) -> C) -> Self {
        let mut r = Self::zero(self.vars, self.basis, self.bound);
        r.terms = self
            .terms
            .iter()
            .map(|(m, c)| (*m, f(c)))
            .filter(|(_, c)| !c.is_zero())
            .collect();
        r
    }

    /// Keep only the terms whose monomial satisfies `pred`.
    pub fn filter(&self, pred: impl Fn(&Mono) -> bool) -> Self {
        let mut r = Self::zero(self.vars, self.basis, self.bound);
        r.terms = self
            .terms
            .iter()
            .filter(|(m, _)| pred(m))
            .map(|(m, c)| (*m, c.clone()))
            .collect();
        r
    }

    /// Commutative product, truncated to the smaller bound.
    pub fn mul(&self, o: &Self) -> Result<Self> {
        self.check(o, "mul")?;
        let bound = self.bound.min(&o.bound);
        let vars = self.vars;
        let b: Vec<(Mono, u32, u32, &C)> = o
            .terms
            .iter()
            .map(|(m, c)| (*m, m.phase(), m.wdeg(&vars), c))
            .collect();
        let mut acc: Acc<C> = Acc::default();
        for (ma, ca) in &self.terms {
            let (pa, wa) = (ma.phase(), ma.wdeg(&vars));
            if !bound.admits(pa, wa) {
                continue;
            }
            for (mb, pb, wb, cb) in &b {
                if !bound.admits(pa + pb, wa + wb) {
                    continue;
                }
                acc.entry(ma.times(mb))
                    .and_modify(|x| x.add_assign(&ca.mul(cb)))
                    .or_insert_with(|| ca.mul(cb));
            }
        }
        Ok(Self::from_acc(vars, self.basis, bound, acc))
    }

    pub fn pow(&self, k: u32) -> Result<Self> {
        let mut r = Self::constant(self.vars, self.basis, self.bound, C::one());
        for _ in 0..k {
            r = r.mul(self)?;
        }
        Ok(r)
    }

    /// Partial derivative in flat variable `v`; the bound drops to the region where the
    /// result is exact.
    pub fn derivative(&self, v: usize) -> Self {
        let mut r = Self::zero(self.vars, self.basis, self.bound.lowered());
        for (m, c) in &self.terms {
            let e = m.get(&self.vars, v);
            if e > 0 {
                r.add_term(m.lowered(&self.vars, v, 1), c.mul(&C::ratio(e as i64, 1)));
            }
        }
        r
    }

    /// Minimum phase degree over the nonzero terms.
    pub fn valuation(&self) -> Option<u32> {
        self.terms.keys().map(|m| m.phase()).min()
    }

    /// Part of phase degree exactly `k`.
    pub fn phase_part(&self, k: u32) -> Self {
        self.filter(|m| m.phase() == k)
    }

    /// Split into phase degree `< n` and `>= n`.
    pub fn grade_split(&self, n: u32) -> (Self, Self) {
        (self.filter(|m| m.phase() < n), self.filter(|m| m.phase() >= n))
    }

    /// Part of total (w plus phase) degree exactly `k`.
    pub fn total_part(&self, k: u32) -> Self {
        let vars = self.vars;
        self.filter(|m| m.phase() + m.wdeg(&vars) == k)
    }

    /// Multiply by `hbar^delta`; negative shifts require every term to carry enough hbar.
    pub fn hbar_shift(&self, delta: i32) -> Result<Self> {
        let mut r = Self::zero(self.vars, self.basis, self.bound);
        for (m, c) in &self.terms {
            let l = m.hbar() as i32 + delta;
            if l < 0 {
                return Err(Error::Grading(format!("hbar power {} shifted by {delta}", m.hbar())));
            }
            let nm = Mono(m.0 - Mono::hbar_pow(m.hbar()).0 + Mono::hbar_pow(l as u32).0);
            r.add_term(nm, c.clone());
        }
        Ok(r)
    }

    pub fn constant_term(&self) -> C {
        self.coeff(&Mono::ONE)
    }

    /// Largest coefficientwise distance to another jet of the same layout.
    pub fn dist(&self, o: &Self) -> f64 {
        let mut d: f64 = 0.0;
        for (m, c) in &self.terms {
            d = d.max(c.sub(&o.coeff(m)).magnitude());
        }
        for (m, c) in &o.terms {
            if !self.terms.contains_key(m) {
                d = d.max(c.magnitude());
            }
        }
        d
    }

    /// Real symbol in the complex basis: the coefficient of `z^a zb^g` is the conjugate
    /// of the coefficient of `z^g zb^a`. Returns the largest violation.
    pub fn reality_defect(&self) -> f64 {
        let vars = self.vars;
        let mut d: f64 = 0.0;
        for (m, c) in &self.terms {
            let swapped = Mono::from_parts(&vars, &m.w_part(&vars), &m.gamma(&vars), &m.alpha(&vars), m.hbar());
            let mirror = match self.basis {
                Basis::Complex => self.coeff(&swapped).conj(),
                Basis::Real => c.conj(),
            };
            d = d.max(c.sub(&mirror).magnitude());
        }
        d
    }

    /// Series `sum_k a_k t^k` where `t = self - self(0)`; nilpotency of `t` makes the sum
    /// finite within the bound.
    pub fn apply_series(&self, a: &[C]) -> Result<Self> {
        let c0 = self.constant_term();
        let t = self.sub(&Self::constant(self.vars, self.basis, self.bound, c0))?;
        // Horner from the top.
        let mut r = Self::zero(self.vars, self.basis, self.bound);
        for ak in a.iter().rev() {
            r = r.mul(&t)?;
            r.add_term(Mono::ONE, ak.clone());
        }
        Ok(r)
    }

    /// Number of series terms needed for a function of a jet to be exact in the bound.
    pub fn series_len(&self) -> usize {
        self.bound.total() as usize + 1
    }

    /// Multiplicative inverse; fails on a zero constant term.
    pub fn invert(&self) -> Result<Self> {
        let c0 = self.constant_term();
        let inv0 = c0.inv().ok_or(Error::ZeroConstant)?;
        // 1/(c0 + t) = sum (-1)^k t^k / c0^(k+1)
        let n = self.series_len();
        let mut a = Vec::with_capacity(n);
        let mut p = inv0.clone();
        for _ in 0..n {
            a.push(p.clone());
            p = p.mul(&inv0).neg();
        }
        self.apply_series(&a)
    }

    pub fn convert<D: Coeff>(&self, f: impl Fn(&C) -> D) -> Jet<D> {
        let mut r = Jet::<D>::zero(self.vars, self.basis, self.bound);
        for (m, c) in &self.terms {
            r.add_term(*m, f(c));
        }
        r
    }

    /// Rebuild on a different layout, mapping each monomial through `f`.
    pub fn relabel(
        &self,
        vars: Vars,
        basis: Basis,
        bound: GradeBound,
        f: impl Fn(&Mono) -> Option<Mono>,
    ) -> Self {
        let mut r = Self::zero(vars, basis, bound);
        for (m, c) in &self.terms {
            if let Some(nm) = f(m) {
                r.add_term(nm, c.clone());
            }
        }
        r
    }
}

impl Jet<Complex64> {
    /// Evaluate at a point given in flat variable order.
    pub fn eval(&self, point: &[Complex64], hbar: f64) -> Complex64 {
        let n = self.vars.count();
        let mut s = Complex64::new(0.0, 0.0);
        for (m, c) in &self.terms {
            let mut t = *c * hbar.powi(m.hbar() as i32);
            for (v, x) in point.iter().enumerate().take(n) {
                let e = m.get(&self.vars, v);
                if e > 0 {
                    t *= x.powu(e);
                }
            }
            s += t;
        }
        s
    }

    pub fn eval_real(&self, point: &[f64]) -> f64 {
        let p: Vec<Complex64> = point.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.eval(&p, 0.0).re
    }

    /// Square root of a jet with positive real constant term.
    pub fn sqrt(&self) -> Result<Self> {
        let c0 = self.constant_term();
        if !(c0.re > 0.0) {
            return Err(Error::ZeroConstant);
        }
        let n = self.series_len();
        let mut a = Vec::with_capacity(n);
        let mut binom = 1.0f64;
        for k in 0..n {
            a.push(Complex64::new(binom * c0.re.powf(0.5 - k as f64), 0.0));
            binom *= (0.5 - k as f64) / (k as f64 + 1.0);
        }
        self.apply_series(&a)
    }

    /// `exp(i * self)`.
    pub fn exp_i(&self) -> Result<Self> {
        let c0 = self.constant_term();
        let e0 = (Complex64::i() * c0).exp();
        let n = self.series_len();
        let mut a = Vec::with_capacity(n);
        let mut p = e0;
        for k in 0..n {
            a.push(p);
            p = p * Complex64::i() / (k as f64 + 1.0);
        }
        self.apply_series(&a)
    }

    /// Real part of every coefficient.
    pub fn re(&self) -> Self {
        let mut r = self.map(|c| Complex64::new(c.re, 0.0));
        r.canonicalize();
        r
    }

    pub fn im(&self) -> Self {
        let mut r = self.map(|c| Complex64::new(c.im, 0.0));
        r.canonicalize();
        r
    }

    pub fn to_exact(&self) -> ExactJet {
        self.convert(|c| Exact::from_c64(*c))
    }
}

impl ExactJet {
    pub fn to_float(&self) -> Jet {
        self.convert(|c| c.to_c64())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn product_respects_bound() {
        let vars = Vars::new(1, 1).unwrap();
        let b = GradeBound::new(2, 1);
        let x = Jet::<Complex64>::var(vars, Basis::Real, b, 1);
        let w = Jet::<Complex64>::var(vars, Basis::Real, b, 0);
        let x3 = x.pow(3).unwrap();
        assert!(x3.is_empty());
        let wx = w.mul(&x).unwrap();
        assert_eq!(wx.len(), 1);
        let w3x = w.pow(3).unwrap().mul(&x).unwrap();
        assert!(w3x.is_empty());
    }

    #[test]
    fn invert_geometric_series() {
        let vars = Vars::new(1, 0).unwrap();
        let b = GradeBound::new(0, 6);
        let w = Jet::<Complex64>::var(vars, Basis::Real, b, 0);
        let one = Jet::constant(vars, Basis::Real, b, c(1.0));
        let u = one.sub(&w).unwrap();
        let inv = u.invert().unwrap();
        for k in 0..=6 {
            assert_eq!(inv.coeff(&Mono::var(&vars, 0, k)), c(1.0));
        }
        let prod = inv.mul(&u).unwrap();
        assert!(prod.dist(&one) < 1e-15);
    }

    #[test]
    fn invert_zero_constant_fails() {
        let vars = Vars::new(1, 0).unwrap();
        let w = Jet::<Complex64>::var(vars, Basis::Real, GradeBound::new(0, 3), 0);
        assert_eq!(w.invert(), Err(Error::ZeroConstant));
    }

    #[test]
    fn sqrt_squares_back() {
        let vars = Vars::new(2, 0).unwrap();
        let b = GradeBound::new(0, 5);
        let x = Jet::<Complex64>::var(vars, Basis::Real, b, 0);
        let y = Jet::<Complex64>::var(vars, Basis::Real, b, 1);
        let u = Jet::constant(vars, Basis::Real, b, c(4.0))
            .add(&x.scale(&c(0.3)))
            .unwrap()
            .add(&x.mul(&y).unwrap())
            .unwrap();
        let s = u.sqrt().unwrap();
        assert!(s.mul(&s).unwrap().dist(&u) < 1e-13);
    }

    #[test]
    fn derivative_lowers_bound() {
        let vars = Vars::new(1, 1).unwrap();
        let b = GradeBound::new(3, 2);
        let x = Jet::<Complex64>::var(vars, Basis::Real, b, 1);
        let d = x.pow(3).unwrap().derivative(1);
        assert_eq!(d.bound(), GradeBound::new(2, 2));
        assert_eq!(d.coeff(&Mono::var(&vars, 1, 2)), c(3.0));
    }

    #[test]
    fn mismatched_layouts_are_rejected() {
        let b = GradeBound::new(2, 2);
        let a = Jet::<Complex64>::var(Vars::new(1, 1).unwrap(), Basis::Real, b, 0);
        let e = Jet::<Complex64>::var(Vars::new(2, 1).unwrap(), Basis::Real, b, 0);
        assert!(matches!(a.mul(&e), Err(Error::Incompatible(_))));
        let f = Jet::<Complex64>::var(Vars::new(1, 1).unwrap(), Basis::Complex, b, 0);
        assert!(matches!(a.add(&f), Err(Error::Incompatible(_))));
    }
}
