use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use magwell::field::MagneticSystem;

use crate::error::{OracleError, Result};

/// How link integrals `int A.dl` are evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LinkRule {
    /// Length times the value at the link midpoint.
    #[default]
    Midpoint,
    /// Exact integral of the polynomial potential.
    Exact,
}

/// Grid on a box, Dirichlet data on the box boundary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationSpec {
    pub region: Vec<(f64, f64)>,
    /// Points per axis, boundary included.
    pub points: usize,
    pub hbar: f64,
    #[serde(default)]
    pub link_rule: LinkRule,
    /// Order of the finite-difference stencil along each axis: 2 or 4.
    #[serde(default = "default_stencil")]
    pub stencil: u8,
}

fn default_stencil() -> u8 {
    2
}

impl DiscretizationSpec {
    pub fn spacing(&self, k: usize) -> f64 {
        let (lo, hi) = self.region[k];
        (hi - lo) / (self.points - 1) as f64
    }

    pub fn max_spacing(&self) -> f64 {
        (0..self.region.len()).map(|k| self.spacing(k)).fold(0.0, f64::max)
    }

    /// Number of interior nodes per axis.
    pub fn interior(&self) -> usize {
        self.points - 2
    }

    pub fn unknowns(&self) -> usize {
        self.interior().pow(self.region.len() as u32)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.region.len();
        if d == 0 || d % 2 != 0 {
            return Err(OracleError::Invalid(format!("dimension {d} must be positive and even")));
        }
        if d > 4 {
            return Err(OracleError::Invalid("the oracle handles dimensions 2 and 4 only".into()));
        }
        if self.points < 16 {
            return Err(OracleError::Invalid(format!("need at least 16 points per axis, got {}", self.points)));
        }
        if d == 4 && self.points > 24 {
            return Err(OracleError::Invalid(format!("4D grids are limited to 24 points per axis, got {}", self.points)));
        }
        if !(self.hbar > 0.0 && self.hbar.is_finite()) {
            return Err(OracleError::Invalid(format!("hbar must be positive, got {}", self.hbar)));
        }
        if self.stencil != 2 && self.stencil != 4 {
            return Err(OracleError::Invalid(format!("stencil order must be 2 or 4, got {}", self.stencil)));
        }
        if self.region.iter().any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
            return Err(OracleError::Invalid("region bounds must be finite with lo < hi".into()));
        }
        Ok(())
    }
}

/// Hermitian matrix in compressed rows (full pattern, both triangles).
#[derive(Clone, Debug)]
pub struct SparseHermitian {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<Complex64>,
}

impl SparseHermitian {
    pub fn from_rows(rows: Vec<Vec<(usize, Complex64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut r in rows {
            r.sort_by_key(|e| e.0);
            for (c, v) in r {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        SparseHermitian { n, row_ptr, cols, vals }
    }

    pub fn matvec(&self, x: &[Complex64], y: &mut [Complex64]) {
        for i in 0..self.n {
            let mut s = Complex64::new(0.0, 0.0);
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[p] * x[self.cols[p]];
            }
            y[i] = s;
        }
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        let row = &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]];
        match row.binary_search(&j) {
            Ok(p) => self.vals[self.row_ptr[i] + p],
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    /// Largest `|i - j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.n)
            .flat_map(|i| self.cols[self.row_ptr[i]..self.row_ptr[i + 1]].iter().map(move |&j| i.abs_diff(j)))
            .max()
            .unwrap_or(0)
    }

    /// Largest absolute row sum, an upper bound for the spectral radius.
    pub fn gershgorin(&self) -> f64 {
        (0..self.n)
            .map(|i| self.vals[self.row_ptr[i]..self.row_ptr[i + 1]].iter().map(|v| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn hermitian_defect(&self) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..self.n {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.cols[p];
                d = d.max((self.vals[p] - self.get(j, i).conj()).norm());
            }
        }
        d
    }

    /// Coordinate triplets `i j re im`, one per line, 0-based.
    pub fn triplets(&self) -> String {
        let mut s = String::new();
        for i in 0..self.n {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let v = self.vals[p];
                s.push_str(&format!("{} {} {:.17e} {:.17e}\n", i, self.cols[p], v.re, v.im));
            }
        }
        s
    }
}

/// Assembled lattice operator with its grid data.
#[derive(Clone, Debug)]
pub struct Operator {
    pub spec: DiscretizationSpec,
    pub matrix: SparseHermitian,
    /// Node coordinates in flat index order.
    pub strides: Vec<usize>,
}

impl Operator {
    pub fn node(&self, idx: usize) -> Vec<f64> {
        let m = self.spec.interior();
        let mut idx = idx;
        (0..self.spec.region.len())
            .map(|k| {
                let i = idx % m;
                idx /= m;
                self.spec.region[k].0 + (i + 1) as f64 * self.spec.spacing(k)
            })
            .collect()
    }
}

/// Monomials of one potential component: coefficient and exponents.
type Poly = Vec<(f64, Vec<u32>)>;

fn polys(sys: &MagneticSystem) -> Vec<Poly> {
    sys.potential()
        .iter()
        .map(|a| {
            let vars = a.vars();
            a.terms().map(|(m, c)| (c.re, m.w_part(&vars))).collect()
        })
        .collect()
}

fn eval_poly(p: &Poly, x: &[f64]) -> f64 {
    p.iter()
        .map(|(c, e)| c * x.iter().zip(e).map(|(xi, &ei)| xi.powi(ei as i32)).product::<f64>())
        .sum()
}

/// `int_0^len A_k(x + t e_k) dt` for a polynomial `A_k`.
fn line_integral(p: &Poly, x: &[f64], k: usize, len: f64, rule: LinkRule) -> f64 {
    match rule {
        LinkRule::Midpoint => {
            let mut mid = x.to_vec();
            mid[k] += 0.5 * len;
            len * eval_poly(p, &mid)
        }
        LinkRule::Exact => {
            let a = x[k];
            let b = x[k] + len;
            p.iter()
                .map(|(c, e)| {
                    let rest: f64 = x
                        .iter()
                        .zip(e)
                        .enumerate()
                        .filter(|(i, _)| *i != k)
                        .map(|(_, (xi, &ei))| xi.powi(ei as i32))
                        .product();
                    // (b^(n+1) - a^(n+1)) / (n+1) without cancellation
                    let n = e[k] as i32;
                    let mut s = 0.0;
                    for j in 0..=n {
                        s += b.powi(j) * a.powi(n - j);
                    }
                    c * rest * len * s / (n + 1) as f64
                })
                .sum()
        }
    }
}

/// Bytes needed for the matrix, a banded factorization and `krylov` work vectors.
pub fn memory_estimate(spec: &DiscretizationSpec, krylov: usize) -> u64 {
    let n = spec.unknowns() as u64;
    let d = spec.region.len() as u64;
    let steps = if spec.stencil == 4 { 2 } else { 1 };
    let nnz = n * (1 + 2 * d * steps);
    let band = if d == 2 { n * (steps * spec.interior() as u64 + 1) * 16 } else { 0 };
    nnz * 24 + band + n * krylov as u64 * 16
}

/// Discrete `(i hbar d + A)^* (i hbar d + A)` with Peierls phases on a Dirichlet grid.
///
/// Hopping from `x` to `x + s h e_k` carries `exp(-(i/hbar) int_x^{x + s h e_k} A.dl)`.
pub fn build_operator(sys: &MagneticSystem, spec: &DiscretizationSpec, mem_cap: u64, krylov: usize) -> Result<Operator> {
    spec.validate()?;
    let d = spec.region.len();
    if sys.dim() != d {
        return Err(OracleError::Invalid(format!("system dimension {} but grid dimension {d}", sys.dim())));
    }
    let needed = memory_estimate(spec, krylov);
    if needed > mem_cap {
        return Err(OracleError::MemoryCap { needed, cap: mem_cap });
    }
    let a = polys(sys);
    let m = spec.interior();
    let n = spec.unknowns();
    let strides: Vec<usize> = (0..d).map(|k| m.pow(k as u32)).collect();
    let hb2 = spec.hbar * spec.hbar;
    // (step, weight) per axis in units of hbar^2 / h^2
    let taps: &[(usize, f64)] = if spec.stencil == 4 {
        &[(1, -16.0 / 12.0), (2, 1.0 / 12.0)]
    } else {
        &[(1, -1.0)]
    };
    let center = if spec.stencil == 4 { 30.0 / 12.0 } else { 2.0 };
    let mut rows: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); n];
    let mut idx = vec![0usize; d];
    for flat in 0..n {
        let x: Vec<f64> = (0..d).map(|k| spec.region[k].0 + (idx[k] + 1) as f64 * spec.spacing(k)).collect();
        let mut diag: f64 = (0..d).map(|k| center * hb2 / spec.spacing(k).powi(2)).sum();
        if spec.stencil == 4 {
            // the wide tap next to a wall lands on a ghost node, taken as the odd reflection
            for k in 0..d {
                let walls = (idx[k] == 0) as u32 + (idx[k] + 1 == m) as u32;
                diag -= walls as f64 * hb2 / (12.0 * spec.spacing(k).powi(2));
            }
        }
        rows[flat].push((flat, Complex64::new(diag, 0.0)));
        for k in 0..d {
            let h = spec.spacing(k);
            for &(s, w) in taps {
                if idx[k] + s >= m {
                    continue;
                }
                let phase = -line_integral(&a[k], &x, k, s as f64 * h, spec.link_rule) / spec.hbar;
                let v = Complex64::from_polar(w * hb2 / (h * h), phase);
                let other = flat + s * strides[k];
                rows[flat].push((other, v));
                rows[other].push((flat, v.conj()));
            }
        }
        for k in 0..d {
            idx[k] += 1;
            if idx[k] < m {
                break;
            }
            idx[k] = 0;
        }
    }
    Ok(Operator { spec: spec.clone(), matrix: SparseHermitian::from_rows(rows), strides })
}
