//! Magnetic potential, field matrix, intensity and well location.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::{Basis, GradeBound, Jet, Mono, Vars};

/// Polynomial vector potential on a box.
#[derive(Clone, Debug)]
pub struct MagneticSystem {
    dim: usize,
    potential: Vec<Jet>,
    domain: Vec<(f64, f64)>,
    /// `da[i][k] = d_k A_i`
    da: Vec<Vec<Jet>>,
}

/// One monomial `coeff * q^powers` of a potential component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialTerm {
    pub coeff: f64,
    pub powers: Vec<u32>,
}

impl MagneticSystem {
    pub fn new(potential: Vec<Vec<PotentialTerm>>, domain: Vec<(f64, f64)>) -> Result<Self> {
        let dim = potential.len();
        if dim == 0 || dim % 2 != 0 {
            return Err(Error::Invalid(format!("dimension must be even and positive, got {dim}")));
        }
        if 2 * dim > crate::jet::MAX_SLOTS {
            return Err(Error::Invalid(format!("dimension {dim} exceeds the supported maximum of 6")));
        }
        if domain.len() != dim {
            return Err(Error::Invalid(format!(
                "domain has {} intervals for dimension {dim}",
                domain.len()
            )));
        }
        for (lo, hi) in &domain {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Invalid(format!("bad domain interval [{lo}, {hi}]")));
            }
        }
        let mut deg = 1;
        for comp in &potential {
            for t in comp {
                if t.powers.len() != dim {
                    return Err(Error::Invalid(format!(
                        "potential term has {} powers for dimension {dim}",
                        t.powers.len()
                    )));
                }
                if !t.coeff.is_finite() {
                    return Err(Error::Invalid("non-finite potential coefficient".into()));
                }
                deg = deg.max(t.powers.iter().sum::<u32>());
            }
        }
        if deg > 40 {
            return Err(Error::Invalid(format!("potential degree {deg} is too large")));
        }
        let vars = Vars::new(dim, 0).expect("checked above");
        let bound = GradeBound::new(0, deg);
        let jets: Vec<Jet> = potential
            .iter()
            .map(|comp| {
                let mut j = Jet::zero(vars, Basis::Real, bound);
                for t in comp {
                    j.add_term(Mono::from_parts(&vars, &t.powers, &[], &[], 0), Complex64::new(t.coeff, 0.0));
                }
                j
            })
            .collect();
        Self::from_jets(jets, domain)
    }

    /// Build from real polynomial jets on `dim` w-variables.
    pub fn from_jets(potential: Vec<Jet>, domain: Vec<(f64, f64)>) -> Result<Self> {
        let dim = potential.len();
        let da = potential
            .iter()
            .map(|a| (0..dim).map(|k| exact_derivative(a, k)).collect())
            .collect();
        Ok(MagneticSystem { dim, potential, domain, da })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> &[(f64, f64)] {
        &self.domain
    }

    pub fn potential(&self) -> &[Jet] {
        &self.potential
    }

    pub fn degree(&self) -> u32 {
        self.potential.iter().map(|a| a.bound().total()).max().unwrap_or(1)
    }

    pub fn potential_at(&self, q: &[f64]) -> Vec<f64> {
        self.potential.iter().map(|a| a.eval_real(q)).collect()
    }

    /// Jacobian `T[i][k] = d_k A_i(q)`.
    pub fn potential_jacobian(&self, q: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, k| self.da[i][k].eval_real(q))
    }

    /// Coefficients of the field 2-form, `B_ij = d_i A_j - d_j A_i`, as exact polynomials.
    pub fn field_form(&self) -> Vec<Vec<Jet>> {
        (0..self.dim)
            .map(|i| {
                (0..self.dim)
                    .map(|j| self.da[j][i].sub(&self.da[i][j]).expect("same layout"))
                    .collect()
            })
            .collect()
    }

    /// Operator matrix of the field at `q` (transpose of the form matrix).
    pub fn magnetic_matrix(&self, q: &[f64]) -> DMatrix<f64> {
        let t = self.potential_jacobian(q);
        // B_ij = T[j][i] - T[i][j]; operator = B^T
        DMatrix::from_fn(self.dim, self.dim, |i, j| t[(i, j)] - t[(j, i)])
    }

    /// Sum of the positive eigenvalues of `i B(q)`.
    pub fn intensity(&self, q: &[f64]) -> f64 {
        let m = self.magnetic_matrix(q);
        0.5 * m.singular_values().iter().sum::<f64>()
    }

    /// Sorted frequencies `beta_j(q)` (no simplicity check).
    pub fn frequencies(&self, q: &[f64]) -> Vec<f64> {
        let m = self.magnetic_matrix(q);
        let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        s.chunks(2).map(|c| 0.5 * (c[0] + c[c.len() - 1])).collect()
    }

    pub fn contains(&self, q: &[f64]) -> bool {
        q.iter().zip(&self.domain).all(|(x, (lo, hi))| *x >= *lo && *x <= *hi)
    }

    /// Polynomial jets of `A` re-expanded around `center`.
    pub fn recentered_potential(&self, center: &[f64], bound: GradeBound) -> Vec<Jet> {
        let vars = Vars::new(self.dim, 0).unwrap();
        let big = GradeBound::new(0, self.degree());
        let shift = crate::jet::JetMap {
            components: (0..self.dim)
                .map(|k| {
                    Jet::var(vars, Basis::Real, big, k)
                        .add(&Jet::constant(vars, Basis::Real, big, Complex64::new(center[k], 0.0)))
                        .unwrap()
                })
                .collect(),
        };
        self.potential
            .iter()
            .map(|a| crate::jet::compose(&a.with_bound(big), &shift).unwrap().with_bound(bound))
            .collect()
    }

    /// Copy with `A` replaced by `A + grad chi`.
    pub fn gauge_shifted(&self, chi: &Jet) -> Result<Self> {
        let pot = (0..self.dim)
            .map(|k| {
                let g = exact_derivative(chi, k);
                let b = GradeBound::new(0, self.potential[k].bound().total().max(g.bound().total()));
                self.potential[k].with_bound(b).add(&g.with_bound(b))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_jets(pot, self.domain.clone())
    }
}

/// Derivative of an exact polynomial (keeps the full bound).
pub(crate) fn exact_derivative(a: &Jet, k: usize) -> Jet {
    let d = a.derivative(k);
    let mut out = Jet::zero(a.vars(), a.basis(), a.bound());
    for (m, c) in d.terms() {
        out.add_term(*m, *c);
    }
    out
}

/// Frequencies and frame vectors of a real skew matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SkewFrames {
    pub beta: Vec<f64>,
    /// `M u_j = -beta_j v_j`, `M v_j = beta_j u_j`
    pub u: Vec<DVector<f64>>,
    pub v: Vec<DVector<f64>>,
}

/// Canonical frames of an invertible real skew matrix with simple frequencies.
///
/// `u_j` is the normalized projection of the first standard basis vector with a nonzero
/// component in the `j`-th invariant plane.
pub fn skew_frequencies(m: &DMatrix<f64>) -> Result<SkewFrames> {
    let d = m.nrows();
    if d == 0 || d % 2 != 0 || m.ncols() != d {
        return Err(Error::Invalid(format!("skew matrix must be square of even size, got {}x{}", d, m.ncols())));
    }
    let skew_err = (m + m.transpose()).amax();
    if skew_err > 1e-12 * m.amax().max(1.0) {
        return Err(Error::Invalid(format!("matrix is not skew (defect {skew_err:.2e})")));
    }
    let g = m.transpose() * m;
    let eig = SymmetricEigen::new(g.clone());
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0).sqrt()).collect();
    let vmax = vals[d - 1];
    if vmax == 0.0 || vals[0] < 1e-10 * vmax {
        return Err(Error::DegenerateField(format!(
            "smallest singular value {:.3e} vs largest {:.3e}",
            vals[0], vmax
        )));
    }
    let n = d / 2;
    let mut beta = Vec::with_capacity(n);
    for j in 0..n {
        beta.push(0.5 * (vals[2 * j] + vals[2 * j + 1]));
        if j > 0 && (beta[j] - beta[j - 1]).abs() < 1e-8 * vmax {
            return Err(Error::Degeneracy(format!(
                "beta_{} = {:.12} and beta_{} = {:.12}",
                j,
                beta[j - 1],
                j + 1,
                beta[j]
            )));
        }
    }
    let mut u = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    for j in 0..n {
        let p1 = eig.eigenvectors.column(order[2 * j]).into_owned();
        let p2 = eig.eigenvectors.column(order[2 * j + 1]).into_owned();
        let mut chosen = None;
        for k in 0..d {
            // projection of e_k onto span(p1, p2)
            let proj = &p1 * p1[k] + &p2 * p2[k];
            let nrm = proj.norm();
            if nrm > 1e-6 {
                chosen = Some(proj / nrm);
                break;
            }
        }
        let uj = chosen.ok_or_else(|| Error::DegenerateField("empty invariant plane".into()))?;
        let vj = -(m * &uj) / beta[j];
        u.push(uj);
        v.push(vj);
    }
    Ok(SkewFrames { beta, u, v })
}

/// Minimal resonance order of a frequency vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ResonanceOrder {
    /// Smallest `|k|_1` with `<k, beta> = 0`, with a witness normalized to a positive
    /// leading entry.
    Finite { order: u32, witness: Vec<i64> },
    /// No resonance up to the cap.
    Beyond { cap: u32 },
}

impl ResonanceOrder {
    pub fn order(&self) -> Option<u32> {
        match self {
            ResonanceOrder::Finite { order, .. } => Some(*order),
            ResonanceOrder::Beyond { .. } => None,
        }
    }

    /// True when no resonance of order `< r` exists.
    pub fn allows(&self, r: u32) -> bool {
        match self {
            ResonanceOrder::Finite { order, .. } => *order >= r,
            ResonanceOrder::Beyond { cap } => r <= *cap + 1,
        }
    }
}

pub const RESONANCE_TOL: f64 = 1e-9;

/// Enumerate integer vectors with `|k|_1 = len` and a positive leading nonzero entry.
pub fn integer_vectors(n: usize, len: u32) -> Vec<Vec<i64>> {
    fn rec(n: usize, i: usize, left: i64, lead: bool, cur: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if i == n {
            if left == 0 {
                out.push(cur.clone());
            }
            return;
        }
        for a in 0..=left {
            let signs: &[i64] = if a == 0 { &[1] } else if lead { &[1] } else { &[1, -1] };
            for &s in signs {
                cur.push(s * a);
                rec(n, i + 1, left - a, lead && a == 0, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(n, 0, len as i64, true, &mut Vec::new(), &mut out);
    out
}

pub fn resonance_order(beta: &[f64], cap: u32) -> ResonanceOrder {
    let scale = beta.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    for len in 1..=cap {
        for k in integer_vectors(beta.len(), len) {
            let s: f64 = k.iter().zip(beta).map(|(a, b)| *a as f64 * b).sum();
            if s.abs() <= RESONANCE_TOL * scale {
                return ResonanceOrder::Finite { order: len, witness: k };
            }
        }
    }
    ResonanceOrder::Beyond { cap }
}

/// Everything known about the well point.
#[derive(Clone, Debug, PartialEq)]
pub struct WellData {
    pub q0: Vec<f64>,
    pub b0: f64,
    pub hessian: DMatrix<f64>,
    pub beta: Vec<f64>,
    pub frames: SkewFrames,
    pub resonance: ResonanceOrder,
}

/// Cap used when computing the resonance order of a well.
pub const RESONANCE_CAP: u32 = 24;

/// Locate a minimum of the intensity and collect its data, without assumption checks.
pub fn locate_minimum(sys: &MagneticSystem, q_init: &[f64], tol: f64) -> Result<WellData> {
    let d = sys.dim();
    if q_init.len() != d {
        return Err(Error::Invalid(format!("initial point has {} coordinates, expected {d}", q_init.len())));
    }
    let mut q = q_init.to_vec();
    let mut converged = false;
    for _ in 0..200 {
        let (g, h) = crate::classical::intensity_derivatives(sys, &q)?;
        if g.norm() <= tol {
            converged = true;
            break;
        }
        let eig = SymmetricEigen::new(h.clone());
        let step = if eig.eigenvalues.iter().all(|&l| l > 1e-12) {
            -h.clone().cholesky().map(|c| c.solve(&g)).unwrap_or_else(|| g.clone())
        } else {
            -&g
        };
        // backtracking on the intensity
        let f0 = sys.intensity(&q);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand: Vec<f64> = q.iter().zip(step.iter()).map(|(a, s)| a + t * s).collect();
            if sys.contains(&cand) && sys.intensity(&cand) <= f0 + 1e-14 * f0.abs().max(1.0) {
                q = cand;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if !converged {
        let (g, _) = crate::classical::intensity_derivatives(sys, &q)?;
        if g.norm() > tol {
            return Err(Error::NoConvergence(format!(
                "intensity gradient {:.3e} at {:?} after Newton iterations",
                g.norm(),
                q
            )));
        }
    }
    let (_, hessian) = crate::classical::intensity_derivatives(sys, &q)?;
    let frames = skew_frequencies(&sys.magnetic_matrix(&q))?;
    let beta = frames.beta.clone();
    Ok(WellData {
        b0: beta.iter().sum(),
        q0: q,
        hessian,
        resonance: resonance_order(&beta, RESONANCE_CAP),
        beta,
        frames,
    })
}

/// Fraction of the box width that the well must keep from the boundary.
pub const BOUNDARY_MARGIN: f64 = 0.05;

/// Newton search for a non-degenerate minimum of the intensity.
pub fn find_well(sys: &MagneticSystem, q_init: &[f64], tol: f64) -> Result<WellData> {
    let well = locate_minimum(sys, q_init, tol)?;
    let eig = SymmetricEigen::new(well.hessian.clone());
    let lmin = eig.eigenvalues.min();
    let lmax = eig.eigenvalues.amax().max(1.0);
    if lmin <= 1e-8 * lmax {
        return Err(Error::Assumption(format!(
            "intensity Hessian is not positive definite at {:?} (smallest eigenvalue {lmin:.3e})",
            well.q0
        )));
    }
    for (k, (lo, hi)) in sys.domain().iter().enumerate() {
        let margin = BOUNDARY_MARGIN * (hi - lo);
        if well.q0[k] - lo < margin || hi - well.q0[k] < margin {
            return Err(Error::Boundary(format!(
                "q0[{k}] = {:.6} lies within {margin:.3} of [{lo}, {hi}]",
                well.q0[k]
            )));
        }
    }
    Ok(well)
}

/// One checked hypothesis.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub margin: f64,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub checks: Vec<Check>,
}

impl AssumptionReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

/// Grid points of the domain box, `n` per axis.
pub fn box_grid(domain: &[(f64, f64)], n: usize) -> Vec<Vec<f64>> {
    let d = domain.len();
    let total = n.pow(d as u32);
    (0..total)
        .map(|mut idx| {
            (0..d)
                .map(|k| {
                    let i = idx % n;
                    idx /= n;
                    let (lo, hi) = domain[k];
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                })
                .collect()
        })
        .collect()
}

/// Check the standing hypotheses at a located well.
///
/// `b1`, when given, also checks that the sublevel set `{b <= b1}` stays inside the box.
/// `order`, when given, checks that no resonance below it exists.
pub fn validate_assumptions(
    sys: &MagneticSystem,
    well: &WellData,
    b1: Option<f64>,
    order: Option<u32>,
) -> AssumptionReport {
    let d = sys.dim();
    let mut checks = Vec::new();

    let eig = SymmetricEigen::new(well.hessian.clone());
    let lmin = eig.eigenvalues.min();
    let lmax = eig.eigenvalues.amax().max(1e-300);
    checks.push(Check {
        name: "nondegenerate-minimum".into(),
        passed: lmin > 1e-8 * lmax.max(1.0),
        margin: lmin / lmax.max(1.0),
        detail: format!("intensity Hessian eigenvalues {:?}", eig.eigenvalues.as_slice()),
    });

    let n = if d <= 2 { 41 } else if d <= 4 { 13 } else { 7 };
    let grid = box_grid(sys.domain(), n);
    let mut grid_min = f64::INFINITY;
    let mut arg = vec![0.0; d];
    let mut min_sigma = f64::INFINITY;
    let mut boundary_min = f64::INFINITY;
    for q in &grid {
        let m = sys.magnetic_matrix(q);
        let sv = m.singular_values();
        let b = 0.5 * sv.iter().sum::<f64>();
        min_sigma = min_sigma.min(sv.min() / sv.max().max(1e-300));
        if b < grid_min {
            grid_min = b;
            arg = q.clone();
        }
        let on_edge = q
            .iter()
            .zip(sys.domain())
            .any(|(x, (lo, hi))| (x - lo).abs() < 1e-12 || (x - hi).abs() < 1e-12);
        if on_edge {
            boundary_min = boundary_min.min(b);
        }
    }
    let cell: f64 = sys.domain().iter().map(|(lo, hi)| (hi - lo) / (n - 1) as f64).fold(0.0, f64::max);
    let dist = arg.iter().zip(&well.q0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let unique = grid_min >= well.b0 - 1e-9 * well.b0.abs().max(1.0) || dist <= 2.0 * cell * (d as f64).sqrt();
    checks.push(Check {
        name: "unique-minimum".into(),
        passed: unique,
        margin: grid_min - well.b0,
        detail: format!("grid minimum {grid_min:.6e} at {arg:?}, well value {:.6e}", well.b0),
    });
    checks.push(Check {
        name: "field-invertible".into(),
        passed: min_sigma > 1e-10,
        margin: min_sigma,
        detail: format!("smallest relative singular value of the field over the box grid {min_sigma:.3e}"),
    });

    let beta = &well.beta;
    let bmax = beta.iter().fold(0.0f64, |a, b| a.max(*b));
    let gap = beta.windows(2).map(|w| (w[1] - w[0]).abs() / bmax).fold(f64::INFINITY, f64::min);
    checks.push(Check {
        name: "simple-frequencies".into(),
        passed: gap > 1e-8,
        margin: if gap.is_finite() { gap } else { 1.0 },
        detail: format!("frequencies at the well {beta:?}"),
    });

    let (passed, detail) = match (&well.resonance, order) {
        (res, Some(r)) => (
            res.allows(r),
            format!("resonance {:?} against requested order {r}", res),
        ),
        (res, None) => (true, format!("resonance {res:?}")),
    };
    checks.push(Check {
        name: "non-resonance".into(),
        passed,
        margin: well.resonance.order().map(|o| o as f64).unwrap_or(f64::INFINITY),
        detail,
    });

    let mut near = f64::INFINITY;
    for (k, (lo, hi)) in sys.domain().iter().enumerate() {
        near = near.min((well.q0[k] - lo) / (hi - lo)).min((hi - well.q0[k]) / (hi - lo));
    }
    checks.push(Check {
        name: "interior-well".into(),
        passed: near >= BOUNDARY_MARGIN,
        margin: near,
        detail: format!("relative distance of the well to the box boundary {near:.3}"),
    });

    if let Some(b1) = b1 {
        checks.push(Check {
            name: "confined-sublevel".into(),
            passed: boundary_min > b1 && b1 > well.b0,
            margin: boundary_min - b1,
            detail: format!("threshold {b1}, minimum intensity on the box boundary {boundary_min:.6e}"),
        });
    }
    AssumptionReport { checks }
}
