use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{Basis, GradeBound, Jet, Mono, Vars, MAX_SLOTS};
use crate::error::{Error, Result};

/// One monomial of a serialized jet.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermRecord {
    pub w: Vec<u32>,
    pub alpha: Vec<u32>,
    pub gamma: Vec<u32>,
    pub l: u32,
    pub re: f64,
    pub im: f64,
}

/// JSON form of a jet: layout header plus the term records in canonical order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JetDocument {
    pub nw: usize,
    pub nz: usize,
    pub basis: Basis,
    pub bound: GradeBound,
    pub terms: Vec<TermRecord>,
}

impl Jet<Complex64> {
    pub fn to_document(&self) -> JetDocument {
        let vars = self.vars();
        JetDocument {
            nw: vars.nw,
            nz: vars.nz,
            basis: self.basis(),
            bound: self.bound(),
            terms: self
                .terms()
                .map(|(m, c)| TermRecord {
                    w: m.w_part(&vars),
                    alpha: m.alpha(&vars),
                    gamma: m.gamma(&vars),
                    l: m.hbar(),
                    re: c.re,
                    im: c.im,
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("jet documents always serialize")
    }

    pub fn from_document(doc: &JetDocument) -> Result<Self> {
        let vars = Vars::new(doc.nw, doc.nz)
            .ok_or_else(|| Error::Parse(format!("layout needs more than {MAX_SLOTS} slots")))?;
        if !doc.bound.is_valid() {
            return Err(Error::Parse("grade bound too large".into()));
        }
        let mut jet = Jet::zero(vars, doc.basis, doc.bound);
        for (k, t) in doc.terms.iter().enumerate() {
            if t.w.len() != vars.nw || t.alpha.len() != vars.nz || t.gamma.len() != vars.nz {
                return Err(Error::Parse(format!("term {k}: exponent lengths do not match layout")));
            }
            if !t.re.is_finite() || !t.im.is_finite() {
                return Err(Error::Parse(format!("term {k}: non-finite coefficient")));
            }
            let degs = t.w.iter().chain(&t.alpha).chain(&t.gamma).map(|&e| e as u64);
            let zsum: u64 = t.alpha.iter().chain(&t.gamma).map(|&e| e as u64).sum();
            let wsum: u64 = t.w.iter().map(|&e| e as u64).sum();
            let phase = zsum + 2 * t.l as u64;
            if degs.clone().any(|e| e > 255) || phase + wsum > doc.bound.total() as u64 {
                return Err(Error::Parse(format!("term {k}: degree outside the grade bound")));
            }
            let m = Mono::from_parts(&vars, &t.w, &t.alpha, &t.gamma, t.l);
            if !jet.admits(&m) {
                return Err(Error::Parse(format!("term {k}: monomial outside the grade bound")));
            }
            jet.add_term(m, Complex64::new(t.re, t.im));
        }
        jet.canonicalize();
        Ok(jet)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: JetDocument = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_document(&doc)
    }
}
