//! `spectra-index` command-line frontend.

mod config;
mod report;
mod selftest;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use spectra_index::index::{dominating_shift, index, relative_index_with_shift, SweepOptions};
use spectra_index::nonlinear::{certify, dual_solve, solve_bvp, DualOptions, Theorem, Verdict};
use spectra_index::oracles::{dirichlet_constant, example38, rectangle_constant, Case, ConstantSpectrum};
use spectra_index::problems::Problem;
use spectra_index::spectral::nullity;
use spectra_index::{Error, Result};

use config::RunConfig;
use report::{Outcome, RunReport, Table};

#[derive(Debug, Parser)]
#[command(name = "spectra-index", version, about = "Index and nullity of linear boundary-value problems")]
struct Cli {
    /// Report file (stdout when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Also write the command's table (crossings, solution nodes, selftest rows) as CSV.
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
    /// Leave timings out of the report.
    #[arg(long, global = true)]
    no_timing: bool,
    #[arg(long, global = true, env = "SPECTRA_INDEX_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OracleCase {
    Periodic,
    Antiperiodic,
    Scalar,
    Dirichlet,
    Rectangle,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Index and nullity of a problem.
    Index { config: PathBuf },
    /// Relative index I(B1, B2) over the problem's boundary data.
    RelIndex {
        config: PathBuf,
        /// Dominating shift k; chosen from the coefficients when absent.
        #[arg(long)]
        shift: Option<f64>,
    },
    /// Nullity and kernel basis.
    Nullity { config: PathBuf },
    /// Closed-form index for constant coefficients.
    Oracle {
        #[arg(long, value_enum)]
        case: OracleCase,
        /// Eigenvalues of B.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        alphas: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        /// Boundary factor for the scalar case.
        #[arg(long, allow_hyphen_values = true)]
        a: Option<f64>,
        /// Constant potential for the rectangle case.
        #[arg(long, allow_hyphen_values = true)]
        b: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        l1: f64,
        #[arg(long, default_value_t = 1.0)]
        l2: f64,
    },
    /// Check the hypotheses of an existence theorem.
    Certify {
        config: PathBuf,
        #[arg(long)]
        theorem: Option<String>,
    },
    /// Homotopy-Newton solve of the nonlinear problem.
    Solve {
        config: PathBuf,
        /// Certify first and attach the verdict.
        #[arg(long)]
        theorem: Option<String>,
    },
    /// Dual variational solve of a convex problem.
    DualSolve { config: PathBuf },
    /// Run the oracle-equivalence corpus.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Instances per family.
        #[arg(long, default_value_t = 12)]
        count: usize,
    },
}

fn read(path: &PathBuf) -> Result<(String, RunConfig)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let cfg = RunConfig::parse(&text)?;
    Ok((text, cfg))
}

fn theorem(id: Option<String>) -> Result<Theorem> {
    id.ok_or_else(|| Error::Config("no theorem given (flag --theorem or certify.theorem)".into()))?
        .parse()
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn run(cmd: &Command, report: &mut RunReport) -> Result<Outcome> {
    match cmd {
        Command::Index { config } => {
            let (text, cfg) = read(config)?;
            report.digest_text(&text);
            let p = cfg.template()?;
            let r = index(&p)?;
            report.tolerances = to_value(&r.tolerances);
            let table = Table::new(
                &["at", "multiplicity"],
                r.crossings.crossings.iter().map(|c| vec![json!(c.at), json!(c.multiplicity)]).collect(),
            );
            Ok(Outcome::ok(to_value(&r)).with_table(table))
        }
        Command::RelIndex { config, shift } => {
            let (text, cfg) = read(config)?;
            report.digest_text(&text);
            let p = cfg.template()?;
            let opts = SweepOptions::default();
            let (value, k) = match &p {
                Problem::SecondOrder(t) => {
                    let (b1, b2) = cfg.relative_pair(t.dim())?;
                    let k = shift.unwrap_or_else(|| dominating_shift(&b1, &b2));
                    (relative_index_with_shift(t, &b1, &b2, k, &opts)?, k)
                }
                Problem::FirstOrder(t) => {
                    let (b1, b2) = cfg.relative_pair(t.b.dim())?;
                    let k = shift.unwrap_or_else(|| dominating_shift(&b1, &b2));
                    (relative_index_with_shift(t, &b1, &b2, k, &opts)?, k)
                }
                Problem::Elliptic(_) => {
                    return Err(Error::Config("rel-index needs a second_order or first_order problem".into()))
                }
            };
            report.tolerances = to_value(&opts);
            Ok(Outcome::ok(json!({"relative_index": value, "shift": k})))
        }
        Command::Nullity { config } => {
            let (text, cfg) = read(config)?;
            report.digest_text(&text);
            let r = nullity(&cfg.template()?)?;
            report.tolerances = json!({"rank": spectra_index::numerics::DEFAULT_RANK_TOL});
            Ok(Outcome::ok(to_value(&r)))
        }
        Command::Oracle { case, alphas, lambda, a, b, l1, l2 } => {
            report.digest_text(&format!("{cmd:?}"));
            report.tolerances = json!({"comparison": "exact"});
            let spec = || ConstantSpectrum::new(alphas.clone(), *lambda);
            let r = match case {
                OracleCase::Periodic => example38(Case::Periodic, &spec()?)?,
                OracleCase::Antiperiodic => example38(Case::Antiperiodic, &spec()?)?,
                OracleCase::Scalar => {
                    let a = a.ok_or_else(|| Error::Config("--a is required for the scalar case".into()))?;
                    example38(Case::Scalar(a), &spec()?)?
                }
                OracleCase::Dirichlet => dirichlet_constant(&spec()?),
                OracleCase::Rectangle => {
                    let b = b.ok_or_else(|| Error::Config("--b is required for the rectangle case".into()))?;
                    rectangle_constant(b, *l1, *l2)?
                }
            };
            Ok(Outcome::ok(to_value(&r)))
        }
        Command::Certify { config, theorem: flag } => {
            let (text, cfg) = read(config)?;
            report.digest_text(&text);
            let t = theorem(cfg.theorem(flag.as_deref()))?;
            let template = cfg.template()?;
            let r = certify(t, &template, &cfg.certify_data(&template)?);
            report.tolerances = json!({"order": 1e-12, "rank": spectra_index::numerics::DEFAULT_RANK_TOL});
            let refuted = r.verdict == Verdict::Refuted;
            let mut out = Outcome::ok(to_value(&r));
            out.refuted = refuted;
            Ok(out)
        }
        Command::Solve { config, theorem: flag } => {
            let (text, cfg) = read(config)?;
            report.digest_text(&text);
            let template = cfg.template()?;
            let p = cfg.nonlinear(&template)?;
            let mut opts = cfg.solve_options(&p);
            opts.b1 = cfg.start_coefficient(&template)?;
            if let Some(id) = flag.clone() {
                opts.certificate = Some(certify(theorem(Some(id))?, &template, &cfg.certify_data(&template)?));
            }
            report.tolerances = json!({
                "residual": opts.tol,
                "grid": opts.grid,
                "homotopy_steps": opts.homotopy_steps,
                "multistarts": opts.multistarts,
                "seed": opts.seed,
            });
            let s = solve_bvp(&p, &opts)?;
            Ok(Outcome::ok(to_value(&s)).with_table(solution_table(&s)))
        }
        Command::DualSolve { config } => {
            let (text, cfg) = read(config)?;
            report.digest_text(&text);
            let template = cfg.template()?;
            let p = cfg.nonlinear(&template)?;
            let b1 = cfg
                .start_coefficient(&template)?
                .ok_or_else(|| Error::Config("dual-solve needs certify.B1".into()))?;
            let mut opts = DualOptions::for_problem(&p);
            if let Some(d) = &cfg.dual {
                opts.grid = d.grid.unwrap_or(opts.grid);
                opts.gradient_tol = d.gradient_tol.unwrap_or(opts.gradient_tol);
                opts.max_iter = d.max_iter.unwrap_or(opts.max_iter);
            }
            report.tolerances = json!({
                "grid": opts.grid,
                "gradient": opts.gradient_tol,
                "primal": opts.primal_tol,
                "gap": opts.gap_tol,
                "max_iter": opts.max_iter,
            });
            let s = dual_solve(&p, &b1, &opts)?;
            Ok(Outcome::ok(to_value(&s)).with_table(solution_table(&s)))
        }
        Command::Selftest { seed, count } => {
            report.digest_text(&format!("{cmd:?}"));
            report.tolerances = json!({"comparison": "exact"});
            let r = selftest::run(*seed, *count);
            let table = Table::new(
                &["family", "input", "expected_i", "expected_nu", "i", "nu", "agrees"],
                r.rows
                    .iter()
                    .map(|row| {
                        vec![
                            json!(row.family),
                            json!(row.input),
                            json!(row.expected.0),
                            json!(row.expected.1),
                            json!(row.computed.map(|c| c.0)),
                            json!(row.computed.map(|c| c.1)),
                            json!(row.agrees),
                        ]
                    })
                    .collect(),
            );
            let mut out = Outcome::ok(to_value(&r)).with_table(table);
            if r.mismatches > 0 {
                out.failed = Some(Error::ValidatorDisagreement(format!(
                    "{} of {} cases disagree with the closed forms",
                    r.mismatches, r.cases
                )));
            }
            Ok(out)
        }
    }
}

fn solution_table(s: &spectra_index::nonlinear::Solution) -> Table {
    let dim = s.values.first().map_or(0, Vec::len);
    let mut head = vec!["x".to_string(), "y".to_string()];
    head.extend((0..dim).map(|k| format!("u{k}")));
    let rows = s
        .grid
        .iter()
        .zip(&s.values)
        .map(|(p, v)| {
            let mut r = vec![json!(p[0]), json!(p[1])];
            r.extend(v.iter().map(|x| json!(x)));
            r
        })
        .collect();
    Table {
        header: head,
        rows,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("spectra-index: cannot configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let name = match &cli.command {
        Command::Index { .. } => "index",
        Command::RelIndex { .. } => "rel-index",
        Command::Nullity { .. } => "nullity",
        Command::Oracle { .. } => "oracle",
        Command::Certify { .. } => "certify",
        Command::Solve { .. } => "solve",
        Command::DualSolve { .. } => "dual-solve",
        Command::Selftest { .. } => "selftest",
    };
    let mut report = RunReport::new(name);
    let start = Instant::now();
    let outcome = run(&cli.command, &mut report);
    if !cli.no_timing {
        report.timing = Some(json!({"seconds": start.elapsed().as_secs_f64()}));
    }
    let code = report.finish(outcome, cli.csv.as_deref());
    if let Err(e) = report::write(&report, cli.out.as_deref()) {
        eprintln!("spectra-index: {e}");
        return ExitCode::from(2);
    }
    ExitCode::from(code)
}
