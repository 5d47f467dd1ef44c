//! Run configuration: JSON schema, defaults and validation.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use magwell::classical::{ChartOptions, DarbouxVariant, FrameGauge, ReductionOrder};
use magwell::field::{MagneticSystem, PotentialTerm, RESONANCE_CAP};
use magwell::jet::TermRecord;
use magwell_oracle::{GridRule, LinkRule, SolverOptions};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemConfig,
    #[serde(default)]
    pub truncation: TruncationConfig,
    #[serde(default)]
    pub chart: ChartConfig,
    /// Terms of `u` in `H_hat + hbar^2 u`, in the reduced complex layout.
    #[serde(default)]
    pub remainder: Vec<TermRecord>,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub prediction: PredictionConfig,
    #[serde(default)]
    pub weyl: WeylConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub dimension: usize,
    /// One list of `{coeff, powers}` terms per component `A_i`.
    pub potential: Vec<Vec<PotentialTerm>>,
    pub domain: Vec<(f64, f64)>,
    /// Start of the Newton search; the domain centre when absent.
    #[serde(default)]
    pub initial_guess: Option<Vec<f64>>,
    #[serde(default = "well_tol")]
    pub well_tol: f64,
}

fn well_tol() -> f64 {
    1e-13
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationConfig {
    #[serde(default = "default_r")]
    pub r: u32,
    /// Phase degree of the classical reduction; `r` when absent.
    #[serde(default)]
    pub z_order: Option<u32>,
    #[serde(default = "default_w_order")]
    pub w_order: u32,
}

fn default_r() -> u32 {
    6
}

fn default_w_order() -> u32 {
    4
}

impl Default for TruncationConfig {
    fn default() -> Self {
        TruncationConfig { r: default_r(), z_order: None, w_order: default_w_order() }
    }
}

impl TruncationConfig {
    pub fn order(&self) -> ReductionOrder {
        ReductionOrder { z_order: self.z_order.unwrap_or(self.r), w_order: self.w_order }
    }
}

/// A polynomial `coeff * q^powers` as used by chart options.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyTerm {
    pub coeff: f64,
    pub powers: Vec<u32>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartConfig {
    /// Frame phase rotation `theta_j(s)`, one polynomial per frequency; canonical frames when empty.
    #[serde(default)]
    pub frame_rotation: Vec<Vec<PolyTerm>>,
    /// Row-major `n x n` symmetric shear of the linear Darboux map.
    #[serde(default)]
    pub shear: Option<Vec<f64>>,
    /// Hamiltonian `F(w)` whose time-one flow twists the Darboux chart.
    #[serde(default)]
    pub twist: Vec<PolyTerm>,
}

impl ChartConfig {
    pub fn options(&self) -> ChartOptions {
        let conv = |v: &[PolyTerm]| v.iter().map(|t| (t.coeff, t.powers.clone())).collect::<Vec<_>>();
        ChartOptions {
            gauge: if self.frame_rotation.is_empty() {
                FrameGauge::Canonical
            } else {
                FrameGauge::Rotated(self.frame_rotation.iter().map(|p| conv(p)).collect())
            },
            darboux: DarbouxVariant { shear: self.shear.clone(), twist: conv(&self.twist) },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    #[serde(default)]
    pub hbars: Vec<f64>,
    /// Grid spacing bound `factor * sqrt(hbar)`.
    #[serde(default = "grid_factor")]
    pub grid_factor: f64,
    /// Fixed points per axis, overriding the spacing rule.
    #[serde(default)]
    pub points: Option<usize>,
    #[serde(default = "min_points")]
    pub min_points: usize,
    /// Dirichlet box; the system domain when absent.
    #[serde(default)]
    pub region: Option<Vec<(f64, f64)>>,
    #[serde(default)]
    pub link_rule: LinkRule,
    #[serde(default = "stencil")]
    pub stencil: u8,
    #[serde(default = "oracle_k")]
    pub k: usize,
    #[serde(default = "tol")]
    pub tol: f64,
    #[serde(default = "seed")]
    pub seed: u64,
    #[serde(default = "max_dim")]
    pub max_dim: usize,
    #[serde(default = "memory_cap_mb")]
    pub memory_cap_mb: u64,
    /// Constant field strength: report errors against the levels `b hbar (2k + 1)`.
    #[serde(default)]
    pub landau_field: Option<f64>,
}

fn grid_factor() -> f64 {
    0.15
}
fn min_points() -> usize {
    16
}
fn stencil() -> u8 {
    2
}
fn oracle_k() -> usize {
    3
}
fn tol() -> f64 {
    1e-9
}
fn seed() -> u64 {
    7
}
fn max_dim() -> usize {
    300
}
fn memory_cap_mb() -> u64 {
    2048
}

impl Default for OracleConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all oracle fields have defaults")
    }
}

impl OracleConfig {
    pub fn grid_rule(&self, sys: &SystemConfig) -> GridRule {
        GridRule {
            region: self.region.clone().unwrap_or_else(|| sys.domain.clone()),
            // a fixed point count switches the spacing rule off
            factor: if self.points.is_some() { f64::INFINITY } else { self.grid_factor },
            min_points: self.points.unwrap_or(self.min_points),
            link_rule: self.link_rule,
            stencil: self.stencil,
        }
    }

    pub fn solver(&self) -> SolverOptions {
        SolverOptions { k: self.k, tol: self.tol, seed: self.seed, max_dim: self.max_dim, shift: None }
    }

    pub fn memory_cap(&self) -> u64 {
        self.memory_cap_mb.saturating_mul(1 << 20)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionConfig {
    /// Number of eigenvalues to predict.
    #[serde(default = "count")]
    pub count: usize,
    #[serde(default)]
    pub c0_offset: f64,
    /// Energy threshold (in units of hbar) whose sublevel set must stay inside the domain.
    #[serde(default)]
    pub b1: Option<f64>,
}

fn count() -> usize {
    3
}

impl Default for PredictionConfig {
    fn default() -> Self {
        PredictionConfig { count: count(), c0_offset: 0.0, b1: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeylConfig {
    #[serde(default)]
    pub b1: Vec<f64>,
    #[serde(default)]
    pub hbars: Vec<f64>,
    /// Quadrature points per axis.
    #[serde(default)]
    pub points: Option<usize>,
    /// Also count oracle eigenvalues below `b1 hbar`.
    #[serde(default = "yes")]
    pub oracle: bool,
}

fn yes() -> bool {
    true
}

impl Default for WeylConfig {
    fn default() -> Self {
        WeylConfig { b1: Vec::new(), hbars: Vec::new(), points: None, oracle: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "out_dir")]
    pub dir: String,
}

fn out_dir() -> String {
    "magwell-out".into()
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: out_dir() }
    }
}

fn positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

impl RunConfig {
    /// Parse and validate; every problem is reported as `field: message`.
    pub fn from_json(text: &str) -> Result<RunConfig, Vec<String>> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| vec![format!("config: {e}")])?;
        let v = cfg.validate();
        if v.is_empty() {
            Ok(cfg)
        } else {
            Err(v)
        }
    }

    pub fn validate(&self) -> Vec<String> {
        let mut v = Vec::new();
        let s = &self.system;
        let d = s.dimension;
        if d < 2 || d % 2 != 0 || d > 6 {
            v.push(format!("system.dimension: must be even and between 2 and 6, got {d}"));
        }
        if s.potential.len() != d {
            v.push(format!("system.potential: has {} components, expected {d}", s.potential.len()));
        }
        for (i, comp) in s.potential.iter().enumerate() {
            for (k, t) in comp.iter().enumerate() {
                if t.powers.len() != d {
                    v.push(format!("system.potential[{i}][{k}].powers: has {} entries, expected {d}", t.powers.len()));
                }
                if !t.coeff.is_finite() {
                    v.push(format!("system.potential[{i}][{k}].coeff: must be finite"));
                }
                if t.powers.iter().sum::<u32>() > 40 {
                    v.push(format!("system.potential[{i}][{k}].powers: degree above 40"));
                }
            }
        }
        check_box(&mut v, "system.domain", &s.domain, d);
        if let Some(g) = &s.initial_guess {
            if g.len() != d {
                v.push(format!("system.initial_guess: has {} entries, expected {d}", g.len()));
            } else if g.iter().zip(&s.domain).any(|(x, (lo, hi))| !(x > lo && x < hi)) {
                v.push("system.initial_guess: must lie inside the domain".into());
            }
        }
        if !positive(s.well_tol) {
            v.push("system.well_tol: must be positive".into());
        }

        let t = &self.truncation;
        if t.r < 3 {
            v.push(format!("truncation.r: must be at least 3, got {}", t.r));
        }
        if t.r > RESONANCE_CAP + 1 {
            v.push(format!("truncation.r: exceeds the resonance search cap {} + 1", RESONANCE_CAP));
        }
        if let Some(z) = t.z_order {
            if z < t.r {
                v.push(format!("truncation.z_order: must be at least r = {}, got {z}", t.r));
            }
        }
        if t.w_order < 1 {
            v.push("truncation.w_order: must be at least 1".into());
        }
        if t.order().base_degree() > 30 {
            v.push("truncation: z_order + w_order must not exceed 30".into());
        }

        let n = d / 2;
        let c = &self.chart;
        if !c.frame_rotation.is_empty() && c.frame_rotation.len() != n {
            v.push(format!("chart.frame_rotation: needs {n} polynomials, got {}", c.frame_rotation.len()));
        }
        for (j, p) in c.frame_rotation.iter().enumerate() {
            for (k, term) in p.iter().enumerate() {
                if term.powers.len() != d || !term.coeff.is_finite() {
                    v.push(format!("chart.frame_rotation[{j}][{k}]: needs a finite coeff and {d} powers"));
                }
            }
        }
        if let Some(sh) = &c.shear {
            if sh.len() != n * n {
                v.push(format!("chart.shear: needs {} entries, got {}", n * n, sh.len()));
            } else if (0..n).any(|i| (0..n).any(|j| (sh[i * n + j] - sh[j * n + i]).abs() > 1e-12)) {
                v.push("chart.shear: must be symmetric".into());
            }
        }
        for (k, term) in c.twist.iter().enumerate() {
            if term.powers.len() != d || !term.coeff.is_finite() {
                v.push(format!("chart.twist[{k}]: needs a finite coeff and {d} powers"));
            } else if term.powers.iter().sum::<u32>() < 3 {
                v.push(format!("chart.twist[{k}]: terms must have degree at least 3"));
            }
        }

        for (k, term) in self.remainder.iter().enumerate() {
            if term.w.len() != d || term.alpha.len() != n || term.gamma.len() != n {
                v.push(format!("remainder[{k}]: needs {d} w exponents and {n} alpha and gamma exponents"));
            }
            if !term.re.is_finite() || !term.im.is_finite() {
                v.push(format!("remainder[{k}]: coefficient must be finite"));
            }
        }

        let o = &self.oracle;
        for (k, h) in o.hbars.iter().enumerate() {
            if !positive(*h) {
                v.push(format!("oracle.hbars[{k}]: must be positive"));
            }
        }
        if !positive(o.grid_factor) {
            v.push("oracle.grid_factor: must be positive".into());
        }
        if let Some(p) = o.points {
            if p < 16 {
                v.push(format!("oracle.points: must be at least 16, got {p}"));
            }
            if d == 4 && p > 24 {
                v.push(format!("oracle.points: at most 24 per axis in 4D, got {p}"));
            }
        }
        if o.min_points < 16 {
            v.push("oracle.min_points: must be at least 16".into());
        }
        if let Some(r) = &o.region {
            check_box(&mut v, "oracle.region", r, d);
        }
        if d > 4 && !o.hbars.is_empty() {
            v.push("oracle.hbars: the oracle supports dimension 2 and 4 only".into());
        }
        if o.stencil != 2 && o.stencil != 4 {
            v.push(format!("oracle.stencil: must be 2 or 4, got {}", o.stencil));
        }
        if o.k == 0 {
            v.push("oracle.k: must be at least 1".into());
        }
        if !positive(o.tol) {
            v.push("oracle.tol: must be positive".into());
        }
        if o.max_dim < 2 * o.k + 10 {
            v.push(format!("oracle.max_dim: must be at least 2k + 10 = {}", 2 * o.k + 10));
        }
        if o.memory_cap_mb == 0 {
            v.push("oracle.memory_cap_mb: must be positive".into());
        }
        if let Some(b) = o.landau_field {
            if !positive(b) {
                v.push("oracle.landau_field: must be positive".into());
            }
        }

        let p = &self.prediction;
        if p.count == 0 {
            v.push("prediction.count: must be at least 1".into());
        }
        if !p.c0_offset.is_finite() {
            v.push("prediction.c0_offset: must be finite".into());
        }
        if let Some(b) = p.b1 {
            if !positive(b) {
                v.push("prediction.b1: must be positive".into());
            }
        }

        let w = &self.weyl;
        for (k, b) in w.b1.iter().enumerate() {
            if !positive(*b) {
                v.push(format!("weyl.b1[{k}]: must be positive"));
            }
        }
        for (k, h) in w.hbars.iter().enumerate() {
            if !positive(*h) {
                v.push(format!("weyl.hbars[{k}]: must be positive"));
            }
        }
        if w.points == Some(0) {
            v.push("weyl.points: must be positive".into());
        }
        if self.output.dir.is_empty() {
            v.push("output.dir: must not be empty".into());
        }
        v
    }

    pub fn system(&self) -> Result<MagneticSystem, magwell::Error> {
        MagneticSystem::new(self.system.potential.clone(), self.system.domain.clone())
    }

    pub fn initial_guess(&self) -> Vec<f64> {
        self.system
            .initial_guess
            .clone()
            .unwrap_or_else(|| self.system.domain.iter().map(|(a, b)| 0.5 * (a + b)).collect())
    }

    /// Canonical JSON of the parsed config (defaults filled in).
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config always serializes")
    }

    /// Hex SHA-256 of the canonical JSON, ignoring the output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output.dir.clear();
        let digest = Sha256::digest(c.canonical_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn check_box(v: &mut Vec<String>, name: &str, b: &[(f64, f64)], d: usize) {
    if b.len() != d {
        v.push(format!("{name}: has {} intervals, expected {d}", b.len()));
    }
    for (k, (lo, hi)) in b.iter().enumerate() {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            v.push(format!("{name}[{k}]: needs finite lo < hi, got [{lo}, {hi}]"));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"system": {"dimension": 2,
        "potential": [[], [{"coeff": 1.0, "powers": [1, 0]}]],
        "domain": [[-3, 3], [-3, 3]]}}"#;

    #[test]
    fn defaults_fill_in() {
        let c = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.truncation.r, 6);
        assert_eq!(c.truncation.order().z_order, 6);
        assert_eq!(c.oracle.k, 3);
        assert_eq!(c.initial_guess(), vec![0.0, 0.0]);
        assert_eq!(c.hash(), RunConfig::from_json(&c.canonical_json()).unwrap().hash());
    }

    #[test]
    fn lists_every_violation() {
        let text = r#"{"system": {"dimension": 3, "potential": [[]], "domain": [[1, 0]]},
            "truncation": {"r": 2}, "oracle": {"stencil": 3, "hbars": [-1]}}"#;
        let errs = RunConfig::from_json(text).unwrap_err();
        for f in ["system.dimension", "system.potential", "system.domain[0]", "truncation.r", "oracle.stencil", "oracle.hbars[0]"] {
            assert!(errs.iter().any(|e| e.starts_with(f)), "{f} missing from {errs:?}");
        }
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = MINIMAL.replacen("\"dimension\"", "\"dim\": 2, \"dimension\"", 1);
        let errs = RunConfig::from_json(&text).unwrap_err();
        assert!(errs[0].contains("unknown field"));
    }
}
