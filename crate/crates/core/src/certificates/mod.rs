//! Machine-checkable certificates: the second-moment necessity bound,
//! class-membership checks, and verifiers for the counterexample densities.
//!
//! A certificate is a list of inequality records, each storing both sides,
//! the relation and the tolerance it was judged with, so that every pass
//! flag can be recomputed from the stored numbers alone.

mod classes;
mod counterexamples;
mod necessity;
mod runs;

pub use classes::{check_cssa_union, check_ent, check_fssa_scale, fixed_scale_entropy_aggregate, fixed_scale_entropy_bound};
pub use counterexamples::{
    cantor_kl_demo, cantor_ramp_width, fnatural_normalizer_bound, refute_fnatural_cssa, verify_fstar_cssa, CantorOptions,
    CantorStep, NormalizerBound,
};
pub use necessity::{cauchy_hand_fit, half_decade_grid, necessity_bound, NecessityOptions};
pub use runs::{entropy_run_certificate, support_run_certificate};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertificateKind {
    Necessity,
    Membership,
    Refutation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    Le,
    Lt,
    Ge,
    Gt,
}

impl Relation {
    fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Lt => "<",
            Relation::Ge => ">=",
            Relation::Gt => ">",
        }
    }
}

/// One evaluated inequality `lhs ⋈ rhs`, judged with slack `tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inequality {
    pub name: String,
    #[serde(with = "crate::json::extended")]
    pub lhs: f64,
    pub relation: Relation,
    #[serde(with = "crate::json::extended")]
    pub rhs: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Inequality {
    pub fn new(name: impl Into<String>, lhs: f64, relation: Relation, rhs: f64, tolerance: f64) -> Self {
        let mut rec = Self {
            name: name.into(),
            lhs,
            relation,
            rhs,
            tolerance,
            pass: false,
        };
        rec.pass = rec.recompute();
        rec
    }

    /// The pass flag implied by the stored fields; NaN never passes.
    pub fn recompute(&self) -> bool {
        let t = self.tolerance;
        match self.relation {
            Relation::Le => self.lhs <= self.rhs + t,
            Relation::Lt => self.lhs < self.rhs + t,
            Relation::Ge => self.lhs >= self.rhs - t,
            Relation::Gt => self.lhs > self.rhs - t,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Holds,
    Fails { witness: Option<String> },
    /// A quantity grows without bound; the witness says which.
    Diverges { witness: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub kind: CertificateKind,
    pub subject: String,
    pub statement: Vec<Inequality>,
    pub verdict: Verdict,
    pub provenance: BTreeMap<String, serde_json::Value>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl Certificate {
    /// An empty certificate with a provisional `holds` verdict.
    pub fn new(kind: CertificateKind, subject: impl Into<String>) -> Self {
        Self {
            kind,
            subject: subject.into(),
            statement: Vec::new(),
            verdict: Verdict::Holds,
            provenance: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    /// Records an inequality and returns its pass flag.
    pub fn check(&mut self, name: impl Into<String>, lhs: f64, relation: Relation, rhs: f64, tolerance: f64) -> bool {
        let rec = Inequality::new(name, lhs, relation, rhs, tolerance);
        let pass = rec.pass;
        self.statement.push(rec);
        pass
    }

    pub fn record<T: Serialize>(&mut self, key: &str, value: T) {
        let v = serde_json::to_value(value).expect("provenance values serialize");
        self.provenance.insert(key.to_string(), v);
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    /// Sets the verdict from the records: `holds` iff every one passes.
    pub fn conclude(&mut self) {
        self.verdict = match self.first_failure() {
            None => Verdict::Holds,
            Some(r) => Verdict::Fails {
                witness: Some(r.name.clone()),
            },
        };
    }

    pub fn first_failure(&self) -> Option<&Inequality> {
        self.statement.iter().find(|r| !r.pass)
    }

    /// `holds` or `diverges`, i.e. the certificate establishes its statement.
    pub fn succeeded(&self) -> bool {
        !matches!(self.verdict, Verdict::Fails { .. })
    }

    /// Inconsistencies between the stored flags, the records and the verdict;
    /// empty for a well-formed certificate.
    pub fn audit(&self) -> Vec<String> {
        let mut problems = Vec::new();
        for r in &self.statement {
            if r.pass != r.recompute() {
                problems.push(format!("`{}`: stored pass={} but {} {} {} (tol {}) gives {}", r.name, r.pass, r.lhs, r.relation.symbol(), r.rhs, r.tolerance, !r.pass));
            }
            if !(r.tolerance >= 0.0) {
                problems.push(format!("`{}`: tolerance {} is not a nonnegative number", r.name, r.tolerance));
            }
        }
        let all_pass = self.statement.iter().all(|r| r.pass);
        match &self.verdict {
            Verdict::Holds | Verdict::Diverges { .. } if !all_pass => {
                problems.push("verdict claims success but a record fails".into());
            }
            Verdict::Fails { .. } if all_pass => {
                problems.push("verdict is `fails` but every record passes".into());
            }
            _ => {}
        }
        problems
    }

    pub fn to_json(&self) -> String {
        crate::json::to_string(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    /// One line per record, for terminals.
    pub fn summary(&self) -> String {
        let verdict = match &self.verdict {
            Verdict::Holds => "holds".to_string(),
            Verdict::Fails { witness } => format!("fails ({})", witness.as_deref().unwrap_or("no witness")),
            Verdict::Diverges { witness } => format!("diverges ({witness})"),
        };
        let mut out = format!("{} [{}]: {verdict}\n", self.subject, kind_name(self.kind));
        for r in &self.statement {
            out.push_str(&format!(
                "  {} {}: {} {} {} (tol {})\n",
                if r.pass { "ok  " } else { "FAIL" },
                r.name,
                crate::numeric::fmt17(r.lhs),
                r.relation.symbol(),
                crate::numeric::fmt17(r.rhs),
                r.tolerance
            ));
        }
        out
    }
}

fn kind_name(k: CertificateKind) -> &'static str {
    match k {
        CertificateKind::Necessity => "necessity",
        CertificateKind::Membership => "membership",
        CertificateKind::Refutation => "refutation",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relations_and_tolerance() {
        assert!(Inequality::new("a", 1.0, Relation::Le, 1.0, 0.0).pass);
        assert!(!Inequality::new("b", 1.0, Relation::Lt, 1.0, 0.0).pass);
        assert!(Inequality::new("c", 1.0, Relation::Lt, 1.0, 1e-12).pass);
        assert!(Inequality::new("d", 0.5, Relation::Ge, 1.0, 0.5).pass);
        assert!(Inequality::new("e", 3.0, Relation::Lt, f64::INFINITY, 0.0).pass);
        assert!(!Inequality::new("f", f64::INFINITY, Relation::Lt, f64::INFINITY, 0.0).pass);
        assert!(!Inequality::new("g", f64::NAN, Relation::Ge, 0.0, 1.0).pass);
    }

    #[test]
    fn conclude_and_audit() {
        let mut c = Certificate::new(CertificateKind::Membership, "toy");
        c.check("one", 1.0, Relation::Le, 2.0, 0.0);
        c.conclude();
        assert_eq!(c.verdict, Verdict::Holds);
        assert!(c.audit().is_empty());
        c.check("two", 3.0, Relation::Le, 2.0, 0.0);
        assert_eq!(c.audit().len(), 1);
        c.conclude();
        assert_eq!(c.verdict, Verdict::Fails { witness: Some("two".into()) });
        assert!(c.audit().is_empty());
        c.statement[1].pass = true;
        assert_eq!(c.audit().len(), 2);
    }

    #[test]
    fn json_round_trip_keeps_infinities() {
        let mut c = Certificate::new(CertificateKind::Refutation, "series");
        c.check("finite", 2.0, Relation::Lt, f64::INFINITY, 0.0);
        c.record("seed", 7u64);
        c.verdict = Verdict::Diverges { witness: "partial sums".into() };
        let text = c.to_json();
        assert!(text.contains("\"refutation\"") && text.contains("\"inf\""));
        let back = Certificate::from_json(&text).unwrap();
        assert_eq!(back, c);
        assert!(back.audit().is_empty());
        assert!(Certificate::from_json("{").is_err());
    }
}
