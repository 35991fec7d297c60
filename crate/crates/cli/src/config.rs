//! Run configuration: a problem from the core schema plus the optional
//! sections the nonlinear commands read.

use std::f64::consts::PI;

use serde::Deserialize;
use serde_json::Value;

use spectra_index::nonlinear::{
    state_dim, CertifyData, Coefficient, NonlinearProblem, Nonlinearity, Point, Potential, SolveOptions,
};
use spectra_index::problems::schema::{MatrixFunctionSpec, ProblemSpec, ScalarFieldSpec};
use spectra_index::problems::{Geometry, MatrixFunction, Problem};
use spectra_index::{Error, Matrix, Result};

/// `amplitude · Π sin(frequency · π · x_k / L_k)` in every state component.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Forcing {
    pub amplitude: f64,
    #[serde(default = "one")]
    pub frequency: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum NonlinearitySpec {
    /// `F = b(x)x + h(t, x)` with
    /// `b(x) = lower·cos²|x|² + upper·sin²|x|²` and
    /// `h(t, x) = x·sin(|x|t)/(1 + |x|²) + forcing`.
    OscillatingSlope {
        lower: f64,
        upper: f64,
        #[serde(default)]
        forcing: Option<Forcing>,
    },
    /// `F = ∇V` with `V = ½b|x|² + δ(√(1 + |x|²) − 1) + forcing·Σx_k`.
    Convex {
        b: f64,
        delta: f64,
        #[serde(default)]
        forcing: Option<Forcing>,
    },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifySection {
    #[serde(default)]
    pub theorem: Option<String>,
    #[serde(rename = "B1")]
    pub b1: Value,
    #[serde(rename = "B2", default)]
    pub b2: Option<Value>,
    #[serde(rename = "Bbar", default)]
    pub b_bar: Option<Value>,
    #[serde(rename = "B0", default)]
    pub b0: Option<Value>,
    #[serde(rename = "B3", default)]
    pub b3: Option<Value>,
    #[serde(default)]
    pub assert: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveSection {
    pub grid: Option<usize>,
    pub tol: Option<f64>,
    pub homotopy_steps: Option<usize>,
    pub multistarts: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DualSection {
    pub grid: Option<usize>,
    pub gradient_tol: Option<f64>,
    pub max_iter: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    #[serde(default)]
    pub nonlinearity: Option<NonlinearitySpec>,
    #[serde(default)]
    pub certify: Option<CertifySection>,
    #[serde(default)]
    pub solve: Option<SolveSection>,
    #[serde(default)]
    pub dual: Option<DualSection>,
    /// Coefficients for `rel-index`.
    #[serde(rename = "B1", default)]
    pub b1: Option<MatrixFunctionSpec>,
    #[serde(rename = "B2", default)]
    pub b2: Option<MatrixFunctionSpec>,
}

fn config_err(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string())
}

impl RunConfig {
    /// Accepts either a bare problem (top-level `kind`) or a full run config.
    pub fn parse(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text).map_err(|e| config_err(format!("bad JSON: {e}")))?;
        if v.get("kind").is_some() {
            let problem: ProblemSpec = serde_json::from_value(v).map_err(config_err)?;
            return Ok(Self {
                problem,
                nonlinearity: None,
                certify: None,
                solve: None,
                dual: None,
                b1: None,
                b2: None,
            });
        }
        serde_json::from_value(v).map_err(config_err)
    }

    pub fn template(&self) -> Result<Problem> {
        self.problem.build()
    }

    pub fn nonlinear(&self, template: &Problem) -> Result<NonlinearProblem> {
        let spec = self
            .nonlinearity
            .as_ref()
            .ok_or_else(|| config_err("missing nonlinearity section"))?;
        NonlinearProblem::new(template.clone(), spec.build(template))
    }

    fn certify_section(&self) -> Result<&CertifySection> {
        self.certify.as_ref().ok_or_else(|| config_err("missing certify section"))
    }

    pub fn certify_data(&self, template: &Problem) -> Result<CertifyData> {
        let c = self.certify_section()?;
        let b2 = c.b2.as_ref().ok_or_else(|| config_err("certify: missing B2"))?;
        let opt = |v: &Option<Value>, name: &str| v.as_ref().map(|v| coefficient(v, template, name)).transpose();
        let mut data = CertifyData::new(coefficient(&c.b1, template, "B1")?, coefficient(b2, template, "B2")?);
        data.b_bar = opt(&c.b_bar, "Bbar")?;
        data.b0 = opt(&c.b0, "B0")?;
        data.b3 = opt(&c.b3, "B3")?;
        data.asserted = c.assert.clone();
        Ok(data)
    }

    /// `B₁` from the certify section, if there is one.
    pub fn start_coefficient(&self, template: &Problem) -> Result<Option<Coefficient>> {
        self.certify
            .as_ref()
            .map(|c| coefficient(&c.b1, template, "B1"))
            .transpose()
    }

    pub fn theorem(&self, flag: Option<&str>) -> Option<String> {
        flag.map(str::to_string)
            .or_else(|| self.certify.as_ref().and_then(|c| c.theorem.clone()))
    }

    pub fn solve_options(&self, p: &NonlinearProblem) -> SolveOptions {
        let mut o = SolveOptions::for_problem(p);
        if let Some(s) = &self.solve {
            o.grid = s.grid.unwrap_or(o.grid);
            o.tol = s.tol.unwrap_or(o.tol);
            o.homotopy_steps = s.homotopy_steps.unwrap_or(o.homotopy_steps);
            o.multistarts = s.multistarts.unwrap_or(o.multistarts);
            o.seed = s.seed.unwrap_or(o.seed);
        }
        o
    }

    pub fn relative_pair(&self, n: usize) -> Result<(MatrixFunction, MatrixFunction)> {
        let get = |s: &Option<MatrixFunctionSpec>, name: &str| {
            s.as_ref()
                .ok_or_else(|| config_err(format!("rel-index needs {name}")))?
                .build(n, name)
        };
        Ok((get(&self.b1, "B1")?, get(&self.b2, "B2")?))
    }
}

/// A coefficient in the shape the template expects.
fn coefficient(v: &Value, template: &Problem, name: &str) -> Result<Coefficient> {
    let wrap = |e: serde_json::Error| config_err(format!("{name}: {e}"));
    match template {
        Problem::Elliptic(_) => {
            let s: ScalarFieldSpec = serde_json::from_value(v.clone()).map_err(wrap)?;
            Ok(Coefficient::Scalar(s.build()))
        }
        _ => {
            let s: MatrixFunctionSpec = serde_json::from_value(v.clone()).map_err(wrap)?;
            Ok(Coefficient::Matrix(s.build(state_dim(template), name)?))
        }
    }
}

fn shape(forcing: Option<Forcing>, template: &Problem) -> impl Fn(Point) -> f64 + Send + Sync + Clone {
    let (l1, l2) = match template {
        Problem::Elliptic(e) => match e.geometry {
            Geometry::Interval { length } => (length, None),
            Geometry::Rectangle { l1, l2 } => (l1, Some(l2)),
        },
        _ => (1.0, None),
    };
    move |p: Point| match forcing {
        None => 0.0,
        Some(f) => {
            let s = |x: f64, l: f64| (f.frequency * PI * x / l).sin();
            f.amplitude * s(p[0], l1) * l2.map_or(1.0, |l2| s(p[1], l2))
        }
    }
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

impl NonlinearitySpec {
    pub fn build(&self, template: &Problem) -> Nonlinearity {
        let dim = state_dim(template);
        match *self {
            Self::OscillatingSlope { lower, upper, forcing } => {
                let g = shape(forcing, template);
                Nonlinearity::asymptotically_linear(
                    dim,
                    move |_, x| {
                        let r = norm2(x);
                        Matrix::scaled_identity(dim, lower * r.cos().powi(2) + upper * r.sin().powi(2))
                    },
                    move |p, x| {
                        let r = norm2(x);
                        let w = (r.sqrt() * p[0]).sin() / (1.0 + r);
                        let f = g(p);
                        x.iter().map(|xi| xi * w + f).collect()
                    },
                )
            }
            Self::Convex { b, delta, forcing } => {
                let g = shape(forcing, template);
                let g2 = g.clone();
                let v = Potential::new(
                    move |p, x| {
                        let r = norm2(x);
                        0.5 * b * r + delta * ((1.0 + r).sqrt() - 1.0) + g(p) * x.iter().sum::<f64>()
                    },
                    move |p, x| {
                        let s = (1.0 + norm2(x)).sqrt();
                        let f = g2(p);
                        x.iter().map(|xi| b * xi + delta * xi / s + f).collect()
                    },
                    move |_, x| {
                        let s = (1.0 + norm2(x)).sqrt();
                        let mut h = Matrix::scaled_identity(dim, b + delta / s);
                        for i in 0..dim {
                            for j in 0..dim {
                                h[(i, j)] -= delta * x[i] * x[j] / (s * s * s);
                            }
                        }
                        h
                    },
                );
                Nonlinearity::from_potential(dim, v)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EX: &str = r#"{
        "problem": {"kind": "second_order", "n": 1, "B": {"scalar": 0.0}, "bc": {"type": "antiperiodic"}},
        "nonlinearity": {"preset": "oscillating_slope", "lower": 10.0, "upper": 88.0},
        "certify": {"theorem": "3.10", "B1": {"scalar": 10.0}, "B2": {"scalar": 88.0}, "assert": ["slope-bounds"]}
    }"#;

    #[test]
    fn bare_problem_is_accepted() {
        let c = RunConfig::parse(r#"{"kind":"second_order","n":1,"B":{"scalar":0},"bc":{"type":"dirichlet"}}"#).unwrap();
        assert!(c.nonlinearity.is_none());
        assert!(matches!(c.template().unwrap(), Problem::SecondOrder(_)));
    }

    #[test]
    fn full_config_builds() {
        let c = RunConfig::parse(EX).unwrap();
        let t = c.template().unwrap();
        let p = c.nonlinear(&t).unwrap();
        let f = p.nonlinearity.eval([0.3, 0.0], &[2.0]);
        let r: f64 = 4.0;
        let expect = (10.0 * r.cos().powi(2) + 88.0 * r.sin().powi(2)) * 2.0 + 2.0 * (2.0f64 * 0.3).sin() / 5.0;
        assert!((f[0] - expect).abs() < 1e-12);
        let d = c.certify_data(&t).unwrap();
        assert_eq!(d.asserted, vec!["slope-bounds".to_string()]);
        assert_eq!(c.theorem(None).as_deref(), Some("3.10"));
        assert_eq!(c.theorem(Some("1.6")).as_deref(), Some("1.6"));
    }

    #[test]
    fn convex_gradient_matches_value() {
        let t = RunConfig::parse(r#"{"kind":"second_order","n":2,"B":{"scalar":0},"bc":{"type":"dirichlet"}}"#)
            .unwrap()
            .template()
            .unwrap();
        let spec = NonlinearitySpec::Convex {
            b: 3.0,
            delta: 0.7,
            forcing: Some(Forcing { amplitude: 2.0, frequency: 1.0 }),
        };
        let nl = spec.build(&t);
        let v = nl.potential.as_ref().unwrap();
        let (p, x) = ([0.4, 0.0], [0.3, -1.1]);
        let g = (v.gradient)(p, &x);
        let h = (v.hessian)(p, &x);
        for k in 0..2 {
            let mut a = x;
            let mut b = x;
            a[k] += 1e-6;
            b[k] -= 1e-6;
            let fd = ((v.value)(p, &a) - (v.value)(p, &b)) / 2e-6;
            assert!((fd - g[k]).abs() < 1e-7, "gradient {k}");
            let gd = ((v.gradient)(p, &a)[0] - (v.gradient)(p, &b)[0]) / 2e-6;
            assert!((gd - h[(0, k)]).abs() < 1e-6, "hessian {k}");
        }
    }

    #[test]
    fn wrong_coefficient_shape_is_config_error() {
        let mut c = RunConfig::parse(EX).unwrap();
        c.certify.as_mut().unwrap().b2 = Some(serde_json::json!({"constant": [[1.0, 0.0], [0.0, 1.0]]}));
        let t = c.template().unwrap();
        assert!(matches!(c.certify_data(&t), Err(Error::Config(_))));
        assert!(RunConfig::parse(r#"{"problem": {"kind": "elliptic"}, "extra": 1}"#).is_err());
    }
}
