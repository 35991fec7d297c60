//! Machine checks of the index hypotheses of the existence theorems.
//!
//! Index conditions and pointwise orderings are computed; analytic
//! hypotheses (growth of the remainder, convexity, bounds on `V''` for large
//! `|x|`) can only be asserted by the caller and are echoed back.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::numerics::sym_eig;
use crate::problems::{FirstOrderBc, Problem, SecondOrderBc};

use super::{state_dim, Coefficient};

/// Theorems whose hypotheses [`certify`] knows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Theorem {
    T1_6,
    T1_7,
    T1_8,
    T1_9,
    T3_4,
    T3_5,
    T3_10,
    T3_12,
    T4_3,
    T4_4,
    T4_7,
    T4_8,
    T5_3,
    T5_4,
    T5_5,
    T5_6,
}

const ALL: [(Theorem, &str); 16] = [
    (Theorem::T1_6, "1.6"),
    (Theorem::T1_7, "1.7"),
    (Theorem::T1_8, "1.8"),
    (Theorem::T1_9, "1.9"),
    (Theorem::T3_4, "3.4"),
    (Theorem::T3_5, "3.5"),
    (Theorem::T3_10, "3.10"),
    (Theorem::T3_12, "3.12"),
    (Theorem::T4_3, "4.3"),
    (Theorem::T4_4, "4.4"),
    (Theorem::T4_7, "4.7"),
    (Theorem::T4_8, "4.8"),
    (Theorem::T5_3, "5.3"),
    (Theorem::T5_4, "5.4"),
    (Theorem::T5_5, "5.5"),
    (Theorem::T5_6, "5.6"),
];

impl Theorem {
    pub fn all() -> impl Iterator<Item = Theorem> {
        ALL.iter().map(|(t, _)| *t)
    }

    pub fn id(&self) -> &'static str {
        ALL.iter().find(|(t, _)| t == self).map(|(_, s)| *s).unwrap_or("?")
    }

    fn family(&self) -> Family {
        use Theorem::*;
        match self {
            T1_6 | T3_4 | T4_3 | T4_7 | T5_3 => Family::Bounded,
            T3_10 => Family::Sublinear,
            T1_7 | T3_5 | T3_12 | T4_4 | T4_8 | T5_4 => Family::Nontrivial,
            T1_8 | T5_5 => Family::TwoSolutions,
            T1_9 | T5_6 => Family::Convex,
        }
    }

    fn setting(&self) -> Setting {
        use Theorem::*;
        match self {
            T1_6 | T1_7 | T1_8 | T1_9 => Setting::Any,
            T3_4 | T3_5 => Setting::SturmLiouville,
            T3_10 | T3_12 => Setting::Periodic,
            T4_3 | T4_4 => Setting::Bolza,
            T4_7 | T4_8 => Setting::Symplectic,
            T5_3 | T5_4 | T5_5 | T5_6 => Setting::Elliptic,
        }
    }

    /// Lower bound on `|i(B₁) − i(B̄)|` in the two-solution clause.
    fn multiplicity_gap(&self, template: &Problem) -> Option<i64> {
        let d = state_dim(template) as i64;
        match self {
            Theorem::T3_5 => Some(d),
            Theorem::T4_4 => Some(d / 2),
            Theorem::T3_12 => Some(2 * d),
            Theorem::T4_8 => Some(d),
            _ => None,
        }
    }
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Theorem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ALL.iter()
            .find(|(_, id)| *id == s.trim())
            .map(|(t, _)| *t)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown theorem '{s}', expected one of {}",
                    ALL.iter().map(|(_, id)| *id).collect::<Vec<_>>().join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Family {
    Bounded,
    Sublinear,
    Nontrivial,
    TwoSolutions,
    Convex,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Setting {
    Any,
    SturmLiouville,
    Periodic,
    Bolza,
    Symplectic,
    Elliptic,
}

impl Setting {
    fn admits(&self, p: &Problem) -> bool {
        match self {
            Setting::Any => true,
            Setting::SturmLiouville => {
                matches!(p, Problem::SecondOrder(q) if matches!(q.bc, SecondOrderBc::SturmLiouville { .. }))
            }
            Setting::Periodic => {
                matches!(p, Problem::SecondOrder(q) if matches!(q.bc, SecondOrderBc::GeneralizedPeriodic { .. }))
            }
            Setting::Bolza => matches!(p, Problem::FirstOrder(q) if matches!(q.bc, FirstOrderBc::Bolza { .. })),
            Setting::Symplectic => {
                matches!(p, Problem::FirstOrder(q) if matches!(q.bc, FirstOrderBc::Symplectic { .. }))
            }
            Setting::Elliptic => matches!(p, Problem::Elliptic(_)),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Setting::Any => "any self-adjoint template",
            Setting::SturmLiouville => "second order with Sturm-Liouville angles",
            Setting::Periodic => "second order with generalized periodic conditions",
            Setting::Bolza => "first order with Bolza angles",
            Setting::Symplectic => "first order with symplectic end coupling",
            Setting::Elliptic => "Dirichlet Laplacian",
        }
    }
}

/// Linear coefficients named in the hypotheses.
#[derive(Debug, Clone)]
pub struct CertifyData {
    pub b1: Coefficient,
    pub b2: Coefficient,
    /// Second derivative of the potential at zero.
    pub b_bar: Option<Coefficient>,
    pub b0: Option<Coefficient>,
    /// Upper comparison coefficient for the two-solution theorems.
    pub b3: Option<Coefficient>,
    /// Names of analytic hypotheses the caller vouches for.
    pub asserted: Vec<String>,
}

impl CertifyData {
    pub fn new(b1: impl Into<Coefficient>, b2: impl Into<Coefficient>) -> Self {
        Self {
            b1: b1.into(),
            b2: b2.into(),
            b_bar: None,
            b0: None,
            b3: None,
            asserted: vec![],
        }
    }

    pub fn assert(mut self, flag: &str) -> Self {
        self.asserted.push(flag.to_string());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    UserAsserted,
    NotAsserted,
    Missing,
    Error,
}

/// Existence part or the strengthened conclusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Part {
    Existence,
    Further,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisRecord {
    pub id: String,
    pub description: String,
    pub part: Part,
    pub status: Status,
    pub quantities: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Certified,
    Refuted,
    Inconclusive,
}

impl Verdict {
    fn of<'a>(records: impl Iterator<Item = &'a HypothesisRecord>) -> Self {
        let mut v = Verdict::Certified;
        for r in records {
            match r.status {
                Status::Fail => return Verdict::Refuted,
                Status::NotAsserted | Status::Missing | Status::Error => v = Verdict::Inconclusive,
                Status::Pass | Status::UserAsserted => {}
            }
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateReport {
    pub theorem: String,
    pub setting: String,
    pub records: Vec<HypothesisRecord>,
    /// Verdict on the existence statement.
    pub verdict: Verdict,
    /// Verdict on the strengthened conclusion (nontrivial or second
    /// solution), when the theorem has one. Requires the existence part.
    pub further: Option<Verdict>,
    /// `(i, ν)` of every coefficient that was indexed.
    pub indices: BTreeMap<String, (i64, usize)>,
    /// Asserted flags the theorem does not use.
    pub unused_assertions: Vec<String>,
}

struct Checker<'a> {
    template: &'a Problem,
    data: &'a CertifyData,
    records: Vec<HypothesisRecord>,
    cache: BTreeMap<String, Result<(i64, usize)>>,
    used: Vec<String>,
}

const ORDER_TOL: f64 = 1e-12;

impl Checker<'_> {
    fn coefficient(&self, name: &str) -> Option<&Coefficient> {
        match name {
            "B1" => Some(&self.data.b1),
            "B2" => Some(&self.data.b2),
            "Bbar" => self.data.b_bar.as_ref(),
            "B0" => self.data.b0.as_ref(),
            "B3" => self.data.b3.as_ref(),
            _ => None,
        }
    }

    fn index(&mut self, name: &str) -> Option<Result<(i64, usize)>> {
        if let Some(r) = self.cache.get(name) {
            return Some(r.clone());
        }
        let c = self.coefficient(name)?.clone();
        let r = c
            .problem_with(self.template)
            .and_then(|p| crate::index::index(&p))
            .map(|r| (r.i, r.nu));
        self.cache.insert(name.to_string(), r.clone());
        Some(r)
    }

    fn push(&mut self, id: &str, description: String, part: Part, status: Status, q: BTreeMap<String, Value>) {
        self.records.push(HypothesisRecord {
            id: id.into(),
            description,
            part,
            status,
            quantities: q,
        });
    }

    /// Runs `test` on the indices of `names`, recording failures to compute.
    fn index_check(
        &mut self,
        id: &str,
        description: &str,
        part: Part,
        names: &[&str],
        test: impl Fn(&[(i64, usize)]) -> bool,
    ) {
        let mut q = BTreeMap::new();
        let mut vals = vec![];
        for &n in names {
            match self.index(n) {
                None => {
                    q.insert("missing".into(), json!(n));
                    self.push(id, description.into(), part, Status::Missing, q);
                    return;
                }
                Some(Err(e)) => {
                    q.insert(format!("{n}.error"), json!(e.name()));
                    q.insert(format!("{n}.detail"), json!(e.to_string()));
                    self.push(id, description.into(), part, Status::Error, q);
                    return;
                }
                Some(Ok((i, nu))) => {
                    q.insert(format!("i({n})"), json!(i));
                    q.insert(format!("nu({n})"), json!(nu));
                    vals.push((i, nu));
                }
            }
        }
        let status = if test(&vals) { Status::Pass } else { Status::Fail };
        self.push(id, description.into(), part, status, q);
    }

    /// Pointwise `lo ≤ hi` (or `lo < hi`) on the sample grid.
    fn order(&mut self, id: &str, part: Part, lo: &str, hi: &str, strict: bool) {
        let rel = if strict { "<" } else { "<=" };
        let description = format!("{lo} {rel} {hi} pointwise on the sample grid");
        let (Some(a), Some(b)) = (self.coefficient(lo), self.coefficient(hi)) else {
            let mut q = BTreeMap::new();
            q.insert("missing".into(), json!(if self.coefficient(lo).is_none() { lo } else { hi }));
            self.push(id, description, part, Status::Missing, q);
            return;
        };
        let sa = a.samples(self.template);
        let sb = b.samples(self.template);
        let mut gap = f64::INFINITY;
        let mut scale: f64 = 1.0;
        let mut shape_ok = true;
        for (x, y) in sa.iter().zip(&sb) {
            if x.shape() != y.shape() {
                shape_ok = false;
                break;
            }
            scale = scale.max(x.max_abs()).max(y.max_abs());
            gap = gap.min(sym_eig(&(y - x)).map_or(f64::NAN, |e| e.min_eigenvalue()));
        }
        let mut q = BTreeMap::new();
        let status = if !shape_ok || sa.len() != sb.len() {
            q.insert("error".into(), json!("shape mismatch"));
            Status::Fail
        } else {
            q.insert("min_eigenvalue_gap".into(), json!(gap));
            let ok = if strict {
                gap > ORDER_TOL * scale
            } else {
                gap >= -ORDER_TOL * scale
            };
            if ok {
                Status::Pass
            } else {
                Status::Fail
            }
        };
        self.push(id, description, part, status, q);
    }

    fn flag(&mut self, name: &str, description: &str, part: Part) {
        self.used.push(name.to_string());
        let status = if self.data.asserted.iter().any(|a| a == name) {
            Status::UserAsserted
        } else {
            Status::NotAsserted
        };
        self.push(name, description.into(), part, status, BTreeMap::new());
    }

    fn shape(&mut self) -> bool {
        let mut bad = vec![];
        for name in ["B1", "B2", "Bbar", "B0", "B3"] {
            if let Some(c) = self.coefficient(name) {
                if let Err(e) = c.problem_with(self.template) {
                    bad.push(format!("{name}: {e}"));
                }
            }
        }
        if bad.is_empty() {
            return true;
        }
        let mut q = BTreeMap::new();
        q.insert("errors".into(), json!(bad));
        self.push(
            "data-shape",
            "coefficients fit the linear template".into(),
            Part::Existence,
            Status::Fail,
            q,
        );
        false
    }
}

/// Checks the hypotheses of `theorem` for `data` on `template`.
///
/// Failures are verdicts: a failed machine check refutes, a missing
/// assertion or a numerical failure leaves the verdict inconclusive.
pub fn certify(theorem: Theorem, template: &Problem, data: &CertifyData) -> CertificateReport {
    let mut c = Checker {
        template,
        data,
        records: vec![],
        cache: BTreeMap::new(),
        used: vec![],
    };
    let setting = theorem.setting();
    let admitted = setting.admits(template);
    let mut q = BTreeMap::new();
    q.insert("template".into(), json!(template_name(template)));
    c.push(
        "setting",
        format!("template is of the required class: {}", setting.name()),
        Part::Existence,
        if admitted { Status::Pass } else { Status::Fail },
        q,
    );
    let family = theorem.family();
    if admitted && c.shape() {
        let e = Part::Existence;
        let f = Part::Further;
        match family {
            Family::Bounded | Family::Sublinear | Family::Nontrivial => {
                c.order("B1<=B2", e, "B1", "B2", false);
                c.index_check("i(B1)=i(B2)", "i(B1) = i(B2)", e, &["B1", "B2"], |v| v[0].0 == v[1].0);
                c.index_check("nu(B2)=0", "nu(B2) = 0", e, &["B2"], |v| v[0].1 == 0);
            }
            Family::TwoSolutions => {
                c.index_check("nu(B1)=0", "nu(B1) = 0", e, &["B1"], |v| v[0].1 == 0);
                c.order("B1<=B2", e, "B1", "B2", false);
                c.order("B1<B3", e, "B1", "B3", true);
                c.index_check("i(B1)=i(B3)", "i(B1) = i(B3)", e, &["B1", "B3"], |v| v[0].0 == v[1].0);
                c.index_check("nu(B3)=0", "nu(B3) = 0", e, &["B3"], |v| v[0].1 == 0);
                c.order("Bbar>B1", e, "B1", "Bbar", true);
                c.index_check("nu(Bbar)=0", "nu(Bbar) = 0", e, &["Bbar"], |v| v[0].1 == 0);
                c.index_check("i(Bbar)>i(B1)", "i(Bbar) > i(B1)", e, &["B1", "Bbar"], |v| v[1].0 > v[0].0);
            }
            Family::Convex => {
                c.order("B1<=B2", e, "B1", "B2", false);
                c.index_check(
                    "i(B1)+nu(B1)=i(B2)",
                    "i(B1) + nu(B1) = i(B2)",
                    e,
                    &["B1", "B2"],
                    |v| v[0].0 + v[0].1 as i64 == v[1].0,
                );
                c.index_check("nu(B2)=0", "nu(B2) = 0", e, &["B2"], |v| v[0].1 == 0);
                c.order("B0>=B1", f, "B1", "B0", false);
                c.index_check(
                    "i(B0)>i(B1)+nu(B1)",
                    "i(B0) > i(B1) + nu(B1)",
                    f,
                    &["B1", "B0"],
                    |v| v[1].0 > v[0].0 + v[0].1 as i64,
                );
            }
        }
        if family == Family::Nontrivial {
            c.index_check(
                "i(B1)-not-in-window",
                "i(B1) lies outside [i(Bbar), i(Bbar) + nu(Bbar)]",
                e,
                &["B1", "Bbar"],
                |v| v[0].0 < v[1].0 || v[0].0 > v[1].0 + v[1].1 as i64,
            );
            c.index_check("nu(Bbar)=0", "nu(Bbar) = 0", f, &["Bbar"], |v| v[0].1 == 0);
            match theorem.multiplicity_gap(template) {
                Some(g) => c.index_check(
                    "index-gap",
                    &format!("|i(B1) - i(Bbar)| >= {g}"),
                    f,
                    &["B1", "Bbar"],
                    move |v| (v[0].0 - v[1].0).abs() >= g,
                ),
                None if theorem == Theorem::T1_7 => c.flag(
                    "solution-nullity-bound",
                    "|i(B1) - i(Bbar)| >= nu(Phi''(x0)) at the nontrivial solution x0",
                    f,
                ),
                None => {}
            }
        }
    }
    match family {
        Family::Bounded => {
            c.flag("slope-bounds", "B1 <= B(t,x) <= B2 wherever |x| >= r", Part::Existence);
            c.flag("bounded-remainder", "Phi'(x) - B(x)x is bounded", Part::Existence);
        }
        Family::Sublinear => {
            c.flag("slope-bounds", "B1 <= B(t,x) <= B2 for all x", Part::Existence);
            c.flag("sublinear-remainder", "h(t,x) = o(|x|) as |x| -> infinity", Part::Existence);
        }
        Family::Nontrivial => {
            c.flag("hessian-bounds", "B1 <= Phi''(x) <= B2 wherever |x| >= r", Part::Existence);
            c.flag("zero-equilibrium", "Phi'(0) = 0 and Bbar = Phi''(0)", Part::Existence);
        }
        Family::TwoSolutions => {
            c.flag("hessian-bounds", "B1 <= Phi''(x) <= B2 for all x", Part::Existence);
            c.flag("upper-quadratic-bound", "Phi(x) <= (B3 x, x)/2 + c", Part::Existence);
            c.flag("zero-equilibrium", "Phi'(0) = 0 and Bbar = Phi''(0)", Part::Existence);
        }
        Family::Convex => {
            c.flag("convex-shift", "Phi(x) - (B1 x, x)/2 is convex", Part::Existence);
            c.flag("upper-quadratic-bound", "Phi(x) <= (B2 x, x)/2 + c", Part::Existence);
            c.flag("zero-equilibrium", "Phi'(0) = 0 and Phi(0) = 0", Part::Further);
        }
    }
    let verdict = Verdict::of(c.records.iter().filter(|r| r.part == Part::Existence));
    let has_further = c.records.iter().any(|r| r.part == Part::Further);
    let further = has_further.then(|| match verdict {
        Verdict::Certified => Verdict::of(c.records.iter().filter(|r| r.part == Part::Further)),
        v => v,
    });
    let indices = c
        .cache
        .iter()
        .filter_map(|(k, v)| v.as_ref().ok().map(|x| (k.clone(), *x)))
        .collect();
    let unused_assertions = data.asserted.iter().filter(|a| !c.used.contains(a)).cloned().collect();
    CertificateReport {
        theorem: theorem.id().into(),
        setting: setting.name().into(),
        records: c.records,
        verdict,
        further,
        indices,
        unused_assertions,
    }
}

fn template_name(p: &Problem) -> &'static str {
    match p {
        Problem::SecondOrder(q) => match q.bc {
            SecondOrderBc::SturmLiouville { .. } => "second-order/sturm-liouville",
            SecondOrderBc::GeneralizedPeriodic { .. } => "second-order/periodic",
        },
        Problem::FirstOrder(q) => match q.bc {
            FirstOrderBc::Bolza { .. } => "first-order/bolza",
            FirstOrderBc::Symplectic { .. } => "first-order/symplectic",
        },
        Problem::Elliptic(_) => "elliptic",
    }
}
