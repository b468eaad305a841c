use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use qgraph_core::budget::{exponent_budget, verify_form_bound};
use qgraph_core::convergence::{dyadic, run_sweep, Metric, SweepConfig};
use qgraph_core::io::{
    approx_from_json, approx_to_json, budget_to_json, coupling_from_json, st_to_json,
    write_spectrum_csv,
};
use qgraph_core::solver::{eigenvalues_above, eigenvalues_compact, EndCondition, Truncation};
use qgraph_core::{build_approx_graph, Error, MetricGraphSystem, DEFAULT_TOL};

#[derive(Parser)]
#[command(
    name = "qgraph",
    version,
    about = "Approximate vertex couplings on star graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Scattering,
    Hs,
    Eig,
}

#[derive(Subcommand)]
enum Command {
    /// Normalize a coupling given as (A, B) or by name.
    Convert {
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit the approximating-graph parameters at one d.
    Build {
        input: PathBuf,
        #[arg(long)]
        d: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Measure convergence over d = 2^-p and fit the rate.
    Sweep {
        input: PathBuf,
        #[arg(long, value_enum, default_value = "scattering")]
        metric: MetricArg,
        /// p0:p1, meaning d = 2^-p for p0 <= p <= p1
        #[arg(long, default_value = "2:10")]
        d_range: String,
        #[arg(long, value_delimiter = ',', default_value = "0.5,1,2")]
        k: Vec<f64>,
        #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
        z_re: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        z_im: f64,
        #[arg(long = "L", default_value_t = 1.0)]
        length: f64,
        #[arg(long, default_value_t = 128)]
        quad_n: usize,
        #[arg(long, default_value_t = 5)]
        count: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exponents for d = eps^alpha, optionally with a sampled form-bound check.
    Budget {
        #[arg(long)]
        alpha: Option<f64>,
        /// Assume every inner-edge overlap of T vanishes (optimal alpha 1/8)
        #[arg(long)]
        vanishing_overlaps: bool,
        /// Coupling or approximating graph to check the form bound on
        #[arg(long)]
        graph: Option<PathBuf>,
        /// d used when --graph is a coupling
        #[arg(long, default_value_t = 0.1)]
        d: f64,
        #[arg(long, default_value_t = 1.0)]
        eta: f64,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Lowest eigenvalues of the truncated star or approximating graph.
    Spectrum {
        input: PathBuf,
        #[arg(long = "L", default_value_t = 1.0)]
        length: f64,
        #[arg(long, default_value_t = 5)]
        count: usize,
        /// Report eigenvalues at or above this value only
        #[arg(long, allow_hyphen_values = true)]
        floor: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InvalidCoupling(_) | Error::NonNormalizable(_) => 2,
            Error::SingularD { .. } | Error::DegenerateArgument { .. } => 3,
            Error::InsufficientScanRange { .. } => 5,
            _ => 1,
        };
        let message = match &e {
            Error::SingularD { j, k, d } => {
                format!("singular d = {d}: bracket vanishes on inner edge {{{},{}}}; choose a different d", j + 1, k + 1)
            }
            Error::DegenerateArgument { j, k, d } => {
                format!(
                    "degenerate argument on inner edge {{{},{}}} at d = {d}",
                    j + 1,
                    k + 1
                )
            }
            _ => e.to_string(),
        };
        Self { code, message }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn tolerance() -> CliResult<f64> {
    match std::env::var("QGRAPH_TOL") {
        Ok(s) => match s.trim().parse::<f64>() {
            Ok(t) if t > 0.0 && t.is_finite() => Ok(t),
            _ => Err(Failure::new(
                1,
                format!("QGRAPH_TOL must be a positive number, got {s:?}"),
            )),
        },
        Err(_) => Ok(DEFAULT_TOL),
    }
}

fn read_json(path: &Path) -> CliResult<Value> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::new(1, format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::new(1, format!("{}: invalid JSON: {e}", path.display())))
}

fn write_output(out: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    let res = match out {
        Some(p) => fs::write(p, bytes).map_err(|e| format!("{}: {e}", p.display())),
        None => io::stdout().write_all(bytes).map_err(|e| e.to_string()),
    };
    res.map_err(|m| Failure::new(1, m))
}

fn json_bytes(v: &Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s.into_bytes()
}

fn is_approx_graph(v: &Value) -> bool {
    v.get("w_vertex").is_some()
}

fn load_st(path: &Path, tol: f64) -> CliResult<qgraph_core::StForm> {
    let v = read_json(path)?;
    Ok(coupling_from_json(&v, tol)?.to_st(tol)?)
}

fn parse_range(s: &str) -> CliResult<(i32, i32)> {
    let bad = || {
        Failure::new(
            1,
            format!("--d-range expects p0:p1 with p0 <= p1, got {s:?}"),
        )
    };
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let (a, b): (i32, i32) = (
        a.trim().parse().map_err(|_| bad())?,
        b.trim().parse().map_err(|_| bad())?,
    );
    if a > b || a < 0 {
        return Err(bad());
    }
    Ok((a, b))
}

fn run(cli: Cli) -> CliResult<()> {
    let tol = tolerance()?;
    match cli.command {
        Command::Convert { input, out } => {
            let st = load_st(&input, tol)?;
            write_output(out.as_deref(), &json_bytes(&st_to_json(&st)))
        }
        Command::Build { input, d, out } => {
            let st = load_st(&input, tol)?;
            let g = build_approx_graph(&st, d)?;
            write_output(out.as_deref(), &json_bytes(&approx_to_json(&g)))
        }
        Command::Sweep {
            input,
            metric,
            d_range,
            k,
            z_re,
            z_im,
            length,
            quad_n,
            count,
            out,
        } => {
            let st = load_st(&input, tol)?;
            let (p0, p1) = parse_range(&d_range)?;
            let metric = match metric {
                MetricArg::Scattering => Metric::Scattering { ks: k },
                MetricArg::Hs => Metric::HsResolvent {
                    z: qgraph_core::C64::new(z_re, z_im),
                    length,
                    quad_n,
                },
                MetricArg::Eig => Metric::EigGap { count, length },
            };
            let cfg = SweepConfig::new(st, dyadic(p0, p1), metric)
                .map_err(|e| Failure::new(1, e.to_string()))?;
            let report = run_sweep(&cfg);
            let mut csv = Vec::new();
            report.write_csv(&mut csv).expect("writing to memory");
            write_output(out.as_deref(), &csv)?;
            if report.valid().is_empty() {
                return Err(Failure::new(4, "metric failed at every d"));
            }
            let summary = match report.fit {
                Some(f) => format!("slope={} residual={}", f.slope, f.residual),
                None => {
                    "slope=nan residual=nan (inconclusive: fewer than 4 valid points)".to_string()
                }
            };
            println!("{summary}");
            Ok(())
        }
        Command::Budget {
            alpha,
            vanishing_overlaps,
            graph,
            d,
            eta,
            samples,
            seed,
            out,
        } => {
            let alpha = alpha.unwrap_or(if vanishing_overlaps {
                1.0 / 8.0
            } else {
                1.0 / 14.0
            });
            let budget = exponent_budget(alpha, vanishing_overlaps)
                .map_err(|e| Failure::new(2, e.to_string()))?;
            let mut v = budget_to_json(&budget);
            if let Some(path) = graph {
                let gv = read_json(&path)?;
                let g = if is_approx_graph(&gv) {
                    approx_from_json(&gv)?
                } else {
                    build_approx_graph(&coupling_from_json(&gv, tol)?.to_st(tol)?, d)?
                };
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let r = verify_form_bound(&g, eta, samples, &mut rng)?;
                v["form_bound"] = serde_json::json!({
                    "eta": eta,
                    "samples": r.samples,
                    "c_eta": r.c_eta,
                    "c_half": r.c_half,
                    "violations": r.violations.len(),
                    "worst_ratio": r.worst_ratio,
                });
            }
            write_output(out.as_deref(), &json_bytes(&v))
        }
        Command::Spectrum {
            input,
            length,
            count,
            floor,
            out,
        } => {
            let v = read_json(&input)?;
            let cut = Some(Truncation {
                length,
                end: EndCondition::Dirichlet,
            });
            if !(length > 0.0 && length.is_finite()) {
                return Err(Failure::new(
                    1,
                    format!("--L must be positive, got {length}"),
                ));
            }
            let sys = if is_approx_graph(&v) {
                MetricGraphSystem::from_approx(&approx_from_json(&v)?)
            } else {
                MetricGraphSystem::star(
                    &coupling_from_json(&v, tol)?
                        .to_st(tol)?
                        .canonical_coupling(),
                )
            }
            .with_truncation(cut);
            let eig = match floor {
                Some(f) => eigenvalues_above(&sys, f, count)?,
                None => eigenvalues_compact(&sys, count)?,
            };
            let mut csv = Vec::new();
            write_spectrum_csv(&eig, &mut csv).expect("writing to memory");
            write_output(out.as_deref(), &csv)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
