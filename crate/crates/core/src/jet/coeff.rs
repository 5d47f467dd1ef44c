use std::fmt::Debug;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Exact complex rational coefficient, used for algebra checks.
pub type Exact = num_complex::Complex<BigRational>;

/// Coefficient ring of a [`Jet`](super::Jet).
pub trait Coeff: Clone + PartialEq + Debug + Send + Sync + 'static {
    /// Exact rings only drop exact zeros; floating rings drop relative noise.
    const EXACT: bool;

    fn zero() -> Self;
    fn one() -> Self;
    fn ratio(num: i64, den: i64) -> Self;
    fn imag_unit() -> Self;
    fn from_c64(z: Complex64) -> Self;
    fn to_c64(&self) -> Complex64;
    fn is_zero(&self) -> bool;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn conj(&self) -> Self;
    fn inv(&self) -> Option<Self>;
    fn magnitude(&self) -> f64;

    fn add_assign(&mut self, o: &Self) {
        *self = Coeff::add(self, o);
    }

    fn powi(&self, k: u32) -> Self {
        let mut r = Self::one();
        for _ in 0..k {
            r = Coeff::mul(&r, self);
        }
        r
    }
}

impl Coeff for Complex64 {
    const EXACT: bool = false;

    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn ratio(num: i64, den: i64) -> Self {
        Complex64::new(num as f64 / den as f64, 0.0)
    }
    fn imag_unit() -> Self {
        Complex64::new(0.0, 1.0)
    }
    fn from_c64(z: Complex64) -> Self {
        z
    }
    fn to_c64(&self) -> Complex64 {
        *self
    }
    fn is_zero(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn conj(&self) -> Self {
        Complex64::conj(self)
    }
    fn inv(&self) -> Option<Self> {
        if Coeff::is_zero(self) {
            None
        } else {
            Some(Complex64::inv(self))
        }
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
    fn add_assign(&mut self, o: &Self) {
        *self += o;
    }
}

impl Coeff for Exact {
    const EXACT: bool = true;

    fn zero() -> Self {
        Exact::new(BigRational::zero(), BigRational::zero())
    }
    fn one() -> Self {
        Exact::new(BigRational::one(), BigRational::zero())
    }
    fn ratio(num: i64, den: i64) -> Self {
        Exact::new(
            BigRational::new(BigInt::from(num), BigInt::from(den)),
            BigRational::zero(),
        )
    }
    fn imag_unit() -> Self {
        Exact::new(BigRational::zero(), BigRational::one())
    }
    /// Exact conversion of the binary value of each part.
    fn from_c64(z: Complex64) -> Self {
        let cvt = |x: f64| BigRational::from_float(x).unwrap_or_else(BigRational::zero);
        Exact::new(cvt(z.re), cvt(z.im))
    }
    fn to_c64(&self) -> Complex64 {
        Complex64::new(
            self.re.to_f64().unwrap_or(f64::NAN),
            self.im.to_f64().unwrap_or(f64::NAN),
        )
    }
    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn neg(&self) -> Self {
        -self.clone()
    }
    fn conj(&self) -> Self {
        Exact::new(self.re.clone(), -self.im.clone())
    }
    fn inv(&self) -> Option<Self> {
        if Coeff::is_zero(self) {
            return None;
        }
        let n = &self.re * &self.re + &self.im * &self.im;
        Some(Exact::new(&self.re / &n, -(&self.im / &n)))
    }
    fn magnitude(&self) -> f64 {
        let a = self.re.abs().to_f64().unwrap_or(f64::INFINITY);
        let b = self.im.abs().to_f64().unwrap_or(f64::INFINITY);
        a.hypot(b)
    }
}
