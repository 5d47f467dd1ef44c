use serde::{Deserialize, Serialize};

/// Number of exponent bytes available for w, alpha and gamma slots.
pub const MAX_SLOTS: usize = 14;
/// Largest degree budget accepted by a [`GradeBound`]; keeps packed exponents below 256.
pub const MAX_TOTAL_DEGREE: u32 = 120;

const HBAR_SHIFT: u32 = 120;
const ZSUM_SHIFT: u32 = 112;

/// Variable layout of a jet: `nw` real slow variables and `nz` phase pairs.
///
/// Flat variable index: `0..nw` are w, then `nz` alpha slots, then `nz` gamma slots.
/// When `nw` is even the w block is read as positions `y_1..y_k` followed by momenta
/// `eta_1..eta_k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Vars {
    pub nw: usize,
    pub nz: usize,
}

impl Vars {
    pub fn new(nw: usize, nz: usize) -> Option<Self> {
        (nw + 2 * nz <= MAX_SLOTS).then_some(Vars { nw, nz })
    }

    pub fn count(&self) -> usize {
        self.nw + 2 * self.nz
    }

    pub fn alpha(&self, j: usize) -> usize {
        self.nw + j
    }

    pub fn gamma(&self, j: usize) -> usize {
        self.nw + self.nz + j
    }

    pub fn is_phase(&self, v: usize) -> bool {
        v >= self.nw
    }

    fn shift(&self, v: usize) -> u32 {
        let byte = if v < self.nw {
            13 - 2 * self.nz - v
        } else if v < self.nw + self.nz {
            13 - (v - self.nw)
        } else {
            13 - self.nz - (v - self.nw - self.nz)
        };
        8 * byte as u32
    }

    fn w_mask(&self) -> u128 {
        let mut m = 0u128;
        for v in 0..self.nw {
            m |= 0xffu128 << self.shift(v);
        }
        m
    }
}

/// Interpretation of the phase pairs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    /// alpha counts powers of z, gamma powers of z-bar.
    Complex,
    /// alpha counts powers of x, gamma powers of xi.
    Real,
}

/// Truncation rule shared by every jet operation.
///
/// A monomial of phase degree `k = |alpha| + |gamma| + 2l` and w-degree `m` is kept iff
/// `k <= max_phase_degree` and `m + k <= max_phase_degree + max_w_degree`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GradeBound {
    pub max_phase_degree: u32,
    pub max_w_degree: u32,
}

impl GradeBound {
    pub fn new(max_phase_degree: u32, max_w_degree: u32) -> Self {
        GradeBound {
            max_phase_degree,
            max_w_degree,
        }
    }

    pub fn total(&self) -> u32 {
        self.max_phase_degree + self.max_w_degree
    }

    pub fn admits(&self, phase: u32, wdeg: u32) -> bool {
        phase <= self.max_phase_degree && wdeg + phase <= self.total()
    }

    pub fn min(&self, o: &GradeBound) -> GradeBound {
        GradeBound {
            max_phase_degree: self.max_phase_degree.min(o.max_phase_degree),
            max_w_degree: self.max_w_degree.min(o.max_w_degree),
        }
    }

    /// Region on which a first derivative of a jet with this bound is still exact.
    pub fn lowered(&self) -> GradeBound {
        if self.max_phase_degree > 0 {
            GradeBound::new(self.max_phase_degree - 1, self.max_w_degree)
        } else {
            GradeBound::new(0, self.max_w_degree.saturating_sub(1))
        }
    }

    pub fn is_valid(&self) -> bool {
        self.total() <= MAX_TOTAL_DEGREE
    }
}

/// Packed exponent vector. Integer order is the canonical order
/// `(l, |alpha|+|gamma|, alpha, gamma, w)`, and multiplication of monomials is addition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Mono(pub(crate) u128);

impl Mono {
    pub const ONE: Mono = Mono(0);

    pub fn hbar(&self) -> u32 {
        (self.0 >> HBAR_SHIFT) as u32 & 0xff
    }

    pub fn zsum(&self) -> u32 {
        (self.0 >> ZSUM_SHIFT) as u32 & 0xff
    }

    pub fn phase(&self) -> u32 {
        self.zsum() + 2 * self.hbar()
    }

    pub fn get(&self, vars: &Vars, v: usize) -> u32 {
        (self.0 >> vars.shift(v)) as u32 & 0xff
    }

    pub fn wdeg(&self, vars: &Vars) -> u32 {
        let mut x = self.0 & vars.w_mask();
        let mut s = 0u32;
        while x != 0 {
            s += (x & 0xff) as u32;
            x >>= 8;
        }
        s
    }

    pub fn times(&self, o: &Mono) -> Mono {
        Mono(self.0 + o.0)
    }

    pub fn var(vars: &Vars, v: usize, k: u32) -> Mono {
        let mut m = (k as u128) << vars.shift(v);
        if vars.is_phase(v) {
            m += (k as u128) << ZSUM_SHIFT;
        }
        Mono(m)
    }

    pub fn hbar_pow(l: u32) -> Mono {
        Mono((l as u128) << HBAR_SHIFT)
    }

    /// Lower the exponent of `v` by `k`; caller guarantees `get(v) >= k`.
    pub fn lowered(&self, vars: &Vars, v: usize, k: u32) -> Mono {
        Mono(self.0 - Mono::var(vars, v, k).0)
    }

    pub fn without_hbar(&self) -> Mono {
        Mono(self.0 & !(0xffu128 << HBAR_SHIFT))
    }

    pub fn from_parts(vars: &Vars, w: &[u32], alpha: &[u32], gamma: &[u32], l: u32) -> Mono {
        let mut m = Mono::hbar_pow(l);
        for (i, &e) in w.iter().enumerate() {
            m = m.times(&Mono::var(vars, i, e));
        }
        for (j, &e) in alpha.iter().enumerate() {
            m = m.times(&Mono::var(vars, vars.alpha(j), e));
        }
        for (j, &e) in gamma.iter().enumerate() {
            m = m.times(&Mono::var(vars, vars.gamma(j), e));
        }
        m
    }

    pub fn w_part(&self, vars: &Vars) -> Vec<u32> {
        (0..vars.nw).map(|v| self.get(vars, v)).collect()
    }

    pub fn alpha(&self, vars: &Vars) -> Vec<u32> {
        (0..vars.nz).map(|j| self.get(vars, vars.alpha(j))).collect()
    }

    pub fn gamma(&self, vars: &Vars) -> Vec<u32> {
        (0..vars.nz).map(|j| self.get(vars, vars.gamma(j))).collect()
    }

    pub fn is_resonant(&self, vars: &Vars) -> bool {
        (0..vars.nz).all(|j| self.get(vars, vars.alpha(j)) == self.get(vars, vars.gamma(j)))
    }

    /// alpha - gamma.
    pub fn winding(&self, vars: &Vars) -> Vec<i64> {
        (0..vars.nz)
            .map(|j| self.get(vars, vars.alpha(j)) as i64 - self.get(vars, vars.gamma(j)) as i64)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packing_round_trip() {
        let vars = Vars::new(2, 2).unwrap();
        let m = Mono::from_parts(&vars, &[1, 4], &[2, 0], &[0, 3], 1);
        assert_eq!(m.w_part(&vars), vec![1, 4]);
        assert_eq!(m.alpha(&vars), vec![2, 0]);
        assert_eq!(m.gamma(&vars), vec![0, 3]);
        assert_eq!(m.hbar(), 1);
        assert_eq!(m.zsum(), 5);
        assert_eq!(m.phase(), 7);
        assert_eq!(m.wdeg(&vars), 5);
        assert_eq!(m.winding(&vars), vec![2, -3]);
    }

    #[test]
    fn integer_order_is_canonical() {
        let vars = Vars::new(1, 1).unwrap();
        let a = Mono::from_parts(&vars, &[9], &[1], &[0], 0);
        let b = Mono::from_parts(&vars, &[0], &[1], &[1], 0);
        let c = Mono::from_parts(&vars, &[0], &[0], &[0], 1);
        let d = Mono::from_parts(&vars, &[0], &[0], &[1], 0);
        assert!(d < a && a < b && b < c);
    }

    #[test]
    fn product_adds_exponents() {
        let vars = Vars::new(2, 1).unwrap();
        let a = Mono::from_parts(&vars, &[1, 0], &[1], &[0], 1);
        let b = Mono::from_parts(&vars, &[0, 2], &[0], &[3], 0);
        let p = a.times(&b);
        assert_eq!(p, Mono::from_parts(&vars, &[1, 2], &[1], &[3], 1));
    }

    #[test]
    fn bound_is_an_ideal_for_degree_addition() {
        let b = GradeBound::new(4, 2);
        assert!(b.admits(4, 2));
        assert!(!b.admits(4, 3));
        assert!(b.admits(0, 6));
        assert!(!b.admits(5, 0));
    }
}
