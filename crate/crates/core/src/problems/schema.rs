//! JSON problem descriptions.
//!
//! ```json
//! {
//!   "kind": "second_order",
//!   "n": 1,
//!   "Lambda": {"constant": [[1.0]]},
//!   "B": {"piecewise": {"breaks": [0.5], "values": [[[2.0]], [[5.0]]]}},
//!   "bc": {"type": "sturm_liouville", "alpha": 0.0, "beta": 3.141592653589793}
//! }
//! ```

use serde::{Deserialize, Serialize};

use super::{
    EllipticProblem, FirstOrderBc, FirstOrderProblem, Geometry, MatrixFunction, Problem,
    ScalarField, SecondOrderBc, SecondOrderProblem,
};
use crate::error::{Error, Result};
use crate::Matrix;

type Rows = Vec<Vec<f64>>;

/// A matrix function as written in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MatrixFunctionSpec {
    Constant(Rows),
    /// `c · I_n`.
    Scalar(f64),
    Piecewise { breaks: Vec<f64>, values: Vec<Rows> },
    Sampled { values: Vec<Rows> },
}

impl MatrixFunctionSpec {
    pub fn build(&self, n: usize, name: &str) -> Result<MatrixFunction> {
        let mat = |r: &Rows| -> Result<Matrix> {
            let m = Matrix::from_rows(r).map_err(|e| Error::Config(format!("{name}: {e}")))?;
            if m.rows() != n || m.cols() != n {
                return Err(Error::Config(format!(
                    "{name}: expected {n}x{n}, got {}x{}",
                    m.rows(),
                    m.cols()
                )));
            }
            Ok(m)
        };
        let f = match self {
            Self::Constant(r) => MatrixFunction::constant(mat(r)?),
            Self::Scalar(c) => Ok(MatrixFunction::scalar(n, *c)),
            Self::Piecewise { breaks, values } => MatrixFunction::piecewise(
                breaks.clone(),
                values.iter().map(mat).collect::<Result<_>>()?,
            ),
            Self::Sampled { values } => {
                MatrixFunction::sampled(values.iter().map(mat).collect::<Result<_>>()?)
            }
        };
        f.map_err(|e| Error::Config(format!("{name}: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum BcSpec {
    SturmLiouville { alpha: f64, beta: f64 },
    Dirichlet,
    Periodic,
    Antiperiodic,
    /// `M = aI`, `N = a⁻¹I`.
    Scalar { a: f64 },
    GeneralizedPeriodic {
        #[serde(rename = "M")]
        m: Rows,
        #[serde(rename = "N")]
        n: Rows,
    },
    Bolza { alpha: f64, beta: f64 },
    Symplectic {
        #[serde(rename = "P")]
        p: Rows,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GeometrySpec {
    Interval { length: f64 },
    Rectangle { l1: f64, l2: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ScalarFieldSpec {
    Constant(f64),
    Sampled(Rows),
}

impl ScalarFieldSpec {
    pub fn build(&self) -> ScalarField {
        match self {
            Self::Constant(c) => ScalarField::Constant(*c),
            Self::Sampled(v) => ScalarField::Sampled(v.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    SecondOrder,
    FirstOrder,
    Elliptic,
}

/// Raw problem description. Unused keys for a kind must be absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub kind: Kind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(rename = "Lambda", default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<MatrixFunctionSpec>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub b: Option<MatrixFunctionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bc: Option<BcSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<GeometrySpec>,
    #[serde(rename = "b", default, skip_serializing_if = "Option::is_none")]
    pub field: Option<ScalarFieldSpec>,
}

fn matrix(r: &Rows, n: usize, name: &str) -> Result<Matrix> {
    let m = Matrix::from_rows(r).map_err(|e| Error::Config(format!("{name}: {e}")))?;
    if m.rows() != n || m.cols() != n {
        return Err(Error::Config(format!(
            "{name}: expected {n}x{n}, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    Ok(m)
}

impl ProblemSpec {
    /// Converts to a validated [`Problem`]. Shape and syntax problems are
    /// reported as [`Error::Config`]; violated invariants keep their own
    /// variant so callers can tell the two apart.
    pub fn build(&self) -> Result<Problem> {
        match self.kind {
            Kind::SecondOrder => {
                let n = self.n.ok_or_else(|| Error::Config("missing n".into()))?;
                let lambda = match &self.lambda {
                    Some(s) => s.build(n, "Lambda")?,
                    None => MatrixFunction::scalar(n, 1.0),
                };
                let b = self
                    .b
                    .as_ref()
                    .ok_or_else(|| Error::Config("missing B".into()))?
                    .build(n, "B")?;
                let bc = match self.bc.as_ref().ok_or_else(|| Error::Config("missing bc".into()))? {
                    BcSpec::SturmLiouville { alpha, beta } => SecondOrderBc::SturmLiouville {
                        alpha: *alpha,
                        beta: *beta,
                    },
                    BcSpec::Dirichlet => SecondOrderBc::dirichlet(),
                    BcSpec::Periodic => SecondOrderBc::periodic(n),
                    BcSpec::Antiperiodic => SecondOrderBc::antiperiodic(n),
                    BcSpec::Scalar { a } => {
                        if *a == 0.0 {
                            return Err(Error::Config("scalar boundary factor must be nonzero".into()));
                        }
                        SecondOrderBc::scalar(n, *a)
                    }
                    BcSpec::GeneralizedPeriodic { m, n: nm } => SecondOrderBc::GeneralizedPeriodic {
                        m: matrix(m, n, "M")?,
                        n: matrix(nm, n, "N")?,
                    },
                    other => {
                        return Err(Error::Config(format!(
                            "boundary condition {other:?} does not apply to second_order"
                        )))
                    }
                };
                Ok(Problem::SecondOrder(SecondOrderProblem::new(lambda, b, bc)?))
            }
            Kind::FirstOrder => {
                let n = self.n.ok_or_else(|| Error::Config("missing n".into()))?;
                let b = self
                    .b
                    .as_ref()
                    .ok_or_else(|| Error::Config("missing B".into()))?
                    .build(2 * n, "B")?;
                let bc = match self.bc.as_ref().ok_or_else(|| Error::Config("missing bc".into()))? {
                    BcSpec::Bolza { alpha, beta } => FirstOrderBc::Bolza {
                        alpha: *alpha,
                        beta: *beta,
                    },
                    BcSpec::Symplectic { p } => FirstOrderBc::Symplectic {
                        p: matrix(p, 2 * n, "P")?,
                    },
                    other => {
                        return Err(Error::Config(format!(
                            "boundary condition {other:?} does not apply to first_order"
                        )))
                    }
                };
                let mut p = FirstOrderProblem::new(b, bc)?;
                p.anchor = self.anchor.unwrap_or(0);
                Ok(Problem::FirstOrder(p))
            }
            Kind::Elliptic => {
                let geometry = match self
                    .geometry
                    .ok_or_else(|| Error::Config("missing geometry".into()))?
                {
                    GeometrySpec::Interval { length } => Geometry::Interval { length },
                    GeometrySpec::Rectangle { l1, l2 } => Geometry::Rectangle { l1, l2 },
                };
                let b = self.field.as_ref().ok_or_else(|| Error::Config("missing b".into()))?.build();
                Ok(Problem::Elliptic(EllipticProblem::new(geometry, b)?))
            }
        }
    }
}

/// Parses and validates a JSON problem description.
pub fn parse_problem(json: &str) -> Result<Problem> {
    let spec: ProblemSpec =
        serde_json::from_str(json).map_err(|e| Error::Config(format!("bad problem JSON: {e}")))?;
    spec.build()
}
