//! The `raogeo` command line: one command per process, JSON envelopes on
//! the output stream, human-readable diagnostics on stderr.
//!
//! Exit codes: 0 success, 2 usage/configuration error, 3 numeric or
//! solver failure (including a failing property suite).

mod envelope;
mod props;

pub use envelope::{
    num, num_slice, to_json_string, CommandKind, NumericCfg, OutputCfg, OutputFormat,
    ResultEnvelope, RunConfig, Versions, SCHEMA_VERSION,
};
pub use props::{run_suite, suites, PropReport};

use crate::divergences::{self, DiscreteDist, Dist};
use crate::error::{Error, Result};
use crate::estimation::{self, Estimator};
use crate::expfam;
use crate::families::{self, ParamPoint, SampleBatch};
use crate::fisher::{self, FisherMethod};
use crate::geodesics;
use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(
    name = "raogeo",
    version,
    about = "Fisher information, Cramér-Rao bounds, statistical divergences, and Rao distances"
)]
struct Cli {
    #[command(flatten)]
    globals: Globals,
    #[command(subcommand)]
    command: Option<CliCommand>,
}

#[derive(Args, Debug, Clone)]
struct Globals {
    /// JSON RunConfig; explicit flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// RNG seed (falls back to $RAOGEO_SEED, then 0).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output path for the envelope (JSON) or the tabular payload (CSV).
    #[arg(long, global = true)]
    out: Option<String>,
    #[arg(long, global = true, value_parser = ["json", "csv"])]
    format: Option<String>,
    /// Largest acceptable quadrature residual (default 1e-10).
    #[arg(long, global = true)]
    quadrature_tol: Option<f64>,
    /// RK4 steps for geodesic integration (default 1000).
    #[arg(long, global = true)]
    ode_steps: Option<usize>,
    /// Newton convergence tolerance (default 1e-12).
    #[arg(long, global = true)]
    newton_tol: Option<f64>,
}

#[derive(Subcommand, Debug, Clone)]
enum CliCommand {
    /// Fisher information matrix at a parameter point.
    Fisher {
        #[arg(long)]
        family: Option<String>,
        #[arg(long)]
        chart: Option<String>,
        #[arg(long, num_args = 1.., allow_negative_numbers = true)]
        theta: Option<Vec<f64>>,
        /// score-outer | neg-hessian | sqrt-form | analytic | monte-carlo.
        #[arg(long)]
        method: Option<String>,
        /// Sample count for the monte-carlo method.
        #[arg(long)]
        mc_n: Option<usize>,
    },
    /// Monte Carlo estimator-efficiency experiment against the CRLB.
    CrlbSim {
        #[arg(long)]
        family: Option<String>,
        #[arg(long)]
        chart: Option<String>,
        #[arg(long, num_args = 1.., allow_negative_numbers = true)]
        theta: Option<Vec<f64>>,
        /// mean | first-obs | constant:c1,c2,...
        #[arg(long)]
        estimator: Option<String>,
        /// Sample size per replicate.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        replicates: Option<usize>,
    },
    /// Divergences between two distributions.
    Div {
        /// kl | rkl | hellinger | bhattacharyya | alpha:A | f:NAME.
        #[arg(long)]
        kind: Option<String>,
        #[arg(long)]
        family: Option<String>,
        #[arg(long)]
        chart: Option<String>,
        #[arg(long, num_args = 1.., allow_negative_numbers = true)]
        theta1: Option<Vec<f64>>,
        #[arg(long, num_args = 1.., allow_negative_numbers = true)]
        theta2: Option<Vec<f64>>,
        /// Two CSV files holding discrete probability vectors.
        #[arg(long, num_args = 2)]
        discrete: Option<Vec<String>>,
    },
    /// Exponential-family duality operations.
    Expfam {
        /// to-natural | to-expectation | conjugate | bregman | mle.
        #[arg(value_parser = ["to-natural", "to-expectation", "conjugate", "bregman", "mle"])]
        op: Option<String>,
        #[arg(long)]
        family: Option<String>,
        #[arg(long, num_args = 1.., allow_negative_numbers = true)]
        theta: Option<Vec<f64>>,
        #[arg(long, num_args = 1.., allow_negative_numbers = true)]
        eta: Option<Vec<f64>>,
        #[arg(long, num_args = 1.., allow_negative_numbers = true)]
        theta1: Option<Vec<f64>>,
        #[arg(long, num_args = 1.., allow_negative_numbers = true)]
        theta2: Option<Vec<f64>>,
        /// CSV of samples, one per row (for mle).
        #[arg(long)]
        data: Option<String>,
    },
    /// Rao distance between two family members.
    Rao {
        #[arg(long)]
        family: Option<String>,
        #[arg(long)]
        chart: Option<String>,
        #[arg(long, num_args = 1.., allow_negative_numbers = true)]
        theta1: Option<Vec<f64>>,
        #[arg(long, num_args = 1.., allow_negative_numbers = true)]
        theta2: Option<Vec<f64>>,
        /// ode | closed.
        #[arg(long)]
        method: Option<String>,
        /// Shorthand for --ode-steps.
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Connecting geodesic with an optional CSV trace of (t, theta, speed).
    Geodesic {
        #[arg(long)]
        family: Option<String>,
        #[arg(long)]
        chart: Option<String>,
        #[arg(long, num_args = 1.., allow_negative_numbers = true)]
        theta1: Option<Vec<f64>>,
        #[arg(long, num_args = 1.., allow_negative_numbers = true)]
        theta2: Option<Vec<f64>>,
        #[arg(long)]
        steps: Option<usize>,
        /// Write the node list as CSV to this path.
        #[arg(long)]
        trace: Option<String>,
    },
    /// Randomized property suites (monotonicity, invariance, duality, cosine).
    Props {
        #[arg(long)]
        suite: Option<String>,
        #[arg(long)]
        trials: Option<usize>,
    },
}

// Typed per-command parameters; these are the `params` object of the
// RunConfig, with unknown keys rejected.

fn default_fisher_method() -> String {
    "analytic".into()
}
fn default_mc_n() -> usize {
    100_000
}
fn default_rao_method() -> String {
    "ode".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FisherParams {
    theta: Vec<f64>,
    #[serde(default = "default_fisher_method")]
    method: String,
    #[serde(default = "default_mc_n")]
    mc_n: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CrlbSimParams {
    theta: Vec<f64>,
    estimator: String,
    n: usize,
    replicates: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DivParams {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    theta1: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    theta2: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    discrete: Option<Vec<String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExpfamParams {
    op: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    theta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    theta1: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    theta2: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    data: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RaoParams {
    theta1: Vec<f64>,
    theta2: Vec<f64>,
    #[serde(default = "default_rao_method")]
    method: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeodesicParams {
    theta1: Vec<f64>,
    theta2: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PropsParams {
    suite: String,
    trials: usize,
}

/// Entry point: parses, runs, writes outputs, returns the exit code.
pub fn run(args: &[String]) -> i32 {
    match run_capture(args) {
        (code, Some(envelope), wrote_to_file) => {
            if !wrote_to_file {
                println!("{envelope}");
            }
            code
        }
        (code, None, _) => code,
    }
}

/// Like [`run`] but returning the envelope instead of printing it; file
/// side effects (CSV payloads, --out envelopes) still happen. The flag
/// reports whether the envelope already went to a file.
pub fn run_capture(args: &[String]) -> (i32, Option<String>, bool) {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return (0, None, false);
            }
            eprintln!("{e}");
            return (2, None, false);
        }
    };
    let started = std::time::Instant::now();
    match execute(cli) {
        Ok(outcome) => {
            let mut envelope = outcome.envelope;
            envelope.wall_time_ms = started.elapsed().as_millis() as u64;
            let json = match to_json_string(&envelope) {
                Ok(j) => j,
                Err(e) => {
                    eprintln!("raogeo: {e}");
                    return (3, None, false);
                }
            };
            let mut wrote_to_file = false;
            if envelope.config_echo.output.format == OutputFormat::Json {
                if let Some(path) = &envelope.config_echo.output.path {
                    if let Err(e) = std::fs::write(path, format!("{json}\n")) {
                        eprintln!("raogeo: cannot write {path}: {e}");
                        return (2, None, false);
                    }
                    wrote_to_file = true;
                }
            }
            (outcome.exit_code, Some(json), wrote_to_file)
        }
        Err(e) => {
            eprintln!("raogeo: {e}");
            (exit_code_for(&e), None, false)
        }
    }
}

fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::NumericTolerance { .. }
        | Error::Solver { .. }
        | Error::DomainExit { .. }
        | Error::NotPositiveDefinite { .. }
        | Error::Asymmetric(_)
        | Error::SingularJacobian(_)
        | Error::Boundary
        | Error::ReplicateFailure { .. } => 3,
        _ => 2,
    }
}

struct Outcome {
    envelope: ResultEnvelope,
    exit_code: i32,
}

fn load_config(path: &PathBuf) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("bad config: {e}")))
}

fn env_seed() -> Option<u64> {
    std::env::var("RAOGEO_SEED")
        .ok()
        .and_then(|s| s.parse().ok())
}

fn parse_params<T: serde::de::DeserializeOwned>(value: &serde_json::Value) -> Result<T> {
    serde_json::from_value(value.clone())
        .map_err(|e| Error::Config(format!("bad command parameters: {e}")))
}

fn require<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| Error::InvalidArgument(format!("missing required --{flag}")))
}

fn execute(cli: Cli) -> Result<Outcome> {
    let base = cli.globals.config.as_ref().map(load_config).transpose()?;

    let mut numeric = base.as_ref().map(|c| c.numeric.clone()).unwrap_or_default();
    if let Some(v) = cli.globals.quadrature_tol {
        numeric.quadrature_tol = v;
    }
    if let Some(v) = cli.globals.ode_steps {
        numeric.ode_steps = v;
    }
    if let Some(v) = cli.globals.newton_tol {
        numeric.newton_tol = v;
    }
    if !(numeric.quadrature_tol > 0.0 && numeric.newton_tol > 0.0) {
        return Err(Error::Config("tolerances must be positive".into()));
    }

    let seed = cli
        .globals
        .seed
        .or(base.as_ref().map(|c| c.seed))
        .or_else(env_seed)
        .unwrap_or(0);

    let mut output = base.as_ref().map(|c| c.output.clone()).unwrap_or_default();
    if let Some(path) = &cli.globals.out {
        output.path = Some(path.clone());
    }
    if let Some(fmt) = &cli.globals.format {
        output.format = match fmt.as_str() {
            "json" => OutputFormat::Json,
            _ => OutputFormat::Csv,
        };
    }

    let base_kind = base.as_ref().map(|c| c.command);
    let base_family = base.as_ref().and_then(|c| c.family.clone());
    let base_chart = base.as_ref().and_then(|c| c.chart.clone());
    let base_params = base.as_ref().map(|c| c.params.clone());

    let command = match (&cli.command, base_kind) {
        (Some(c), Some(kind)) if kind_of(c) != kind => {
            return Err(Error::Config(format!(
                "config is for '{}' but the command line says '{}'",
                kind.label(),
                kind_of(c).label()
            )));
        }
        (Some(c), _) => c.clone(),
        (None, Some(kind)) => command_from_config(kind)?,
        (None, None) => {
            return Err(Error::InvalidArgument(
                "no command given (and no --config)".into(),
            ));
        }
    };

    if output.format == OutputFormat::Csv
        && !matches!(
            kind_of(&command),
            CommandKind::CrlbSim | CommandKind::Geodesic
        )
    {
        return Err(Error::Config(format!(
            "csv output is limited to tabular payloads (crlb-sim, geodesic), not '{}'",
            kind_of(&command).label()
        )));
    }

    let mut config = RunConfig {
        command: kind_of(&command),
        family: None,
        chart: None,
        numeric,
        seed,
        output,
        params: serde_json::Value::Null,
    };

    dispatch(command, base_family, base_chart, base_params, &mut config)
}

fn kind_of(c: &CliCommand) -> CommandKind {
    match c {
        CliCommand::Fisher { .. } => CommandKind::Fisher,
        CliCommand::CrlbSim { .. } => CommandKind::CrlbSim,
        CliCommand::Div { .. } => CommandKind::Div,
        CliCommand::Expfam { .. } => CommandKind::Expfam,
        CliCommand::Rao { .. } => CommandKind::Rao,
        CliCommand::Geodesic { .. } => CommandKind::Geodesic,
        CliCommand::Props { .. } => CommandKind::Props,
    }
}

/// An all-defaults command shell for config-only runs.
fn command_from_config(kind: CommandKind) -> Result<CliCommand> {
    Ok(match kind {
        CommandKind::Fisher => CliCommand::Fisher {
            family: None,
            chart: None,
            theta: None,
            method: None,
            mc_n: None,
        },
        CommandKind::CrlbSim => CliCommand::CrlbSim {
            family: None,
            chart: None,
            theta: None,
            estimator: None,
            n: None,
            replicates: None,
        },
        CommandKind::Div => CliCommand::Div {
            kind: None,
            family: None,
            chart: None,
            theta1: None,
            theta2: None,
            discrete: None,
        },
        CommandKind::Expfam => CliCommand::Expfam {
            op: None,
            family: None,
            theta: None,
            eta: None,
            theta1: None,
            theta2: None,
            data: None,
        },
        CommandKind::Rao => CliCommand::Rao {
            family: None,
            chart: None,
            theta1: None,
            theta2: None,
            method: None,
            steps: None,
        },
        CommandKind::Geodesic => CliCommand::Geodesic {
            family: None,
            chart: None,
            theta1: None,
            theta2: None,
            steps: None,
            trace: None,
        },
        CommandKind::Props => CliCommand::Props {
            suite: None,
            trials: None,
        },
    })
}

fn dispatch(
    command: CliCommand,
    base_family: Option<String>,
    base_chart: Option<String>,
    base_params: Option<serde_json::Value>,
    config: &mut RunConfig,
) -> Result<Outcome> {
    match command {
        CliCommand::Fisher {
            family,
            chart,
            theta,
            method,
            mc_n,
        } => {
            let cfg_params: Option<FisherParams> =
                base_params.as_ref().map(parse_params).transpose()?;
            let params = FisherParams {
                theta: require(
                    theta.or(cfg_params.as_ref().map(|p| p.theta.clone())),
                    "theta",
                )?,
                method: method
                    .or(cfg_params.as_ref().map(|p| p.method.clone()))
                    .unwrap_or_else(default_fisher_method),
                mc_n: mc_n
                    .or(cfg_params.as_ref().map(|p| p.mc_n))
                    .unwrap_or_else(default_mc_n),
            };
            let family_name = require(family.or(base_family), "family")?;
            let fam = families::by_name(&family_name)?;
            let chart = chart
                .or(base_chart)
                .unwrap_or_else(|| fam.primary_chart().to_string());

            config.family = Some(family_name);
            config.chart = Some(chart.clone());
            config.params = serde_json::to_value(&params).expect("serializable");

            let point = ParamPoint::new(params.theta.clone(), chart);
            let method = FisherMethod::parse(&params.method, params.mc_n, config.seed)?;
            let tensor = fisher::fisher_information(fam.as_ref(), &point, method)?;
            if matches!(
                method,
                FisherMethod::ScoreOuter | FisherMethod::NegHessian | FisherMethod::SqrtForm
            ) && tensor.residual > config.numeric.quadrature_tol
            {
                return Err(Error::NumericTolerance {
                    residual: tensor.residual,
                });
            }
            let rows: Vec<serde_json::Value> = (0..tensor.dim())
                .map(|i| {
                    num_slice(
                        &(0..tensor.dim())
                            .map(|j| tensor.matrix[(i, j)])
                            .collect::<Vec<_>>(),
                    )
                })
                .collect();
            let values = serde_json::json!({
                "matrix": rows,
                "method": tensor.method,
            });
            let envelope = ResultEnvelope::new(config.clone(), values)
                .with_residual("fisher", tensor.residual);
            Ok(Outcome {
                envelope,
                exit_code: 0,
            })
        }

        CliCommand::CrlbSim {
            family,
            chart,
            theta,
            estimator,
            n,
            replicates,
        } => {
            let cfg_params: Option<CrlbSimParams> =
                base_params.as_ref().map(parse_params).transpose()?;
            let params = CrlbSimParams {
                theta: require(
                    theta.or(cfg_params.as_ref().map(|p| p.theta.clone())),
                    "theta",
                )?,
                estimator: require(
                    estimator.or(cfg_params.as_ref().map(|p| p.estimator.clone())),
                    "estimator",
                )?,
                n: require(n.or(cfg_params.as_ref().map(|p| p.n)), "n")?,
                replicates: require(
                    replicates.or(cfg_params.as_ref().map(|p| p.replicates)),
                    "replicates",
                )?,
            };
            let family_name = require(family.or(base_family), "family")?;
            let fam = families::by_name(&family_name)?;
            let est = Estimator::by_name(fam.as_ref(), &params.estimator)?;
            let chart = chart
                .or(base_chart)
                .unwrap_or_else(|| est.target_chart.clone());

            config.family = Some(family_name);
            config.chart = Some(chart.clone());
            config.params = serde_json::to_value(&params).expect("serializable");

            let star = ParamPoint::new(params.theta.clone(), chart);
            let (report, estimates) = estimation::monte_carlo_run(
                fam.as_ref(),
                &star,
                &est,
                params.n,
                params.replicates,
                config.seed,
            )?;
            if config.output.format == OutputFormat::Csv {
                let path = require(config.output.path.clone(), "out")?;
                let mut csv = String::from("replicate");
                for j in 0..estimates[0].len() {
                    csv.push_str(&format!(",coord_{j}"));
                }
                csv.push('\n');
                for (i, e) in estimates.iter().enumerate() {
                    csv.push_str(&i.to_string());
                    for v in e.iter() {
                        csv.push_str(&format!(",{v:.16e}"));
                    }
                    csv.push('\n');
                }
                std::fs::write(&path, csv)?;
            }
            let slack_se = report.loewner_slack_se;
            let values = serde_json::to_value(&report)
                .map_err(|e| Error::Config(format!("report serialization: {e}")))?;
            let envelope = ResultEnvelope::new(config.clone(), values)
                .with_residual("loewner_slack_se", slack_se);
            Ok(Outcome {
                envelope,
                exit_code: 0,
            })
        }

        CliCommand::Div {
            kind,
            family,
            chart,
            theta1,
            theta2,
            discrete,
        } => {
            let cfg_params: Option<DivParams> =
                base_params.as_ref().map(parse_params).transpose()?;
            let params = DivParams {
                kind: require(kind.or(cfg_params.as_ref().map(|p| p.kind.clone())), "kind")?,
                theta1: theta1.or(cfg_params.as_ref().and_then(|p| p.theta1.clone())),
                theta2: theta2.or(cfg_params.as_ref().and_then(|p| p.theta2.clone())),
                discrete: discrete.or(cfg_params.as_ref().and_then(|p| p.discrete.clone())),
            };

            let (value, residual);
            if let Some(paths) = &params.discrete {
                if paths.len() != 2 {
                    return Err(Error::InvalidArgument(
                        "--discrete takes exactly two CSV paths".into(),
                    ));
                }
                let p = DiscreteDist::new(read_numbers(&paths[0])?)?;
                let q = DiscreteDist::new(read_numbers(&paths[1])?)?;
                config.params = serde_json::to_value(&params).expect("serializable");
                (value, residual) = divergences::evaluate_kind(
                    &params.kind,
                    &Dist::Discrete(&p),
                    &Dist::Discrete(&q),
                )?;
            } else {
                let family_name = require(family.or(base_family), "family")?;
                let fam = families::by_name(&family_name)?;
                let chart = chart
                    .or(base_chart)
                    .unwrap_or_else(|| fam.primary_chart().to_string());
                let t1 = ParamPoint::new(require(params.theta1.clone(), "theta1")?, chart.clone());
                let t2 = ParamPoint::new(require(params.theta2.clone(), "theta2")?, chart.clone());
                config.family = Some(family_name);
                config.chart = Some(chart);
                config.params = serde_json::to_value(&params).expect("serializable");
                (value, residual) = divergences::evaluate_kind(
                    &params.kind,
                    &Dist::Member {
                        family: fam.as_ref(),
                        theta: &t1,
                    },
                    &Dist::Member {
                        family: fam.as_ref(),
                        theta: &t2,
                    },
                )?;
            }
            let values = serde_json::json!({
                "kind": params.kind,
                "value": num(value),
            });
            let envelope =
                ResultEnvelope::new(config.clone(), values).with_residual("quadrature", residual);
            Ok(Outcome {
                envelope,
                exit_code: 0,
            })
        }

        CliCommand::Expfam {
            op,
            family,
            theta,
            eta,
            theta1,
            theta2,
            data,
        } => {
            let cfg_params: Option<ExpfamParams> =
                base_params.as_ref().map(parse_params).transpose()?;
            let params = ExpfamParams {
                op: require(op.or(cfg_params.as_ref().map(|p| p.op.clone())), "op")?,
                theta: theta.or(cfg_params.as_ref().and_then(|p| p.theta.clone())),
                eta: eta.or(cfg_params.as_ref().and_then(|p| p.eta.clone())),
                theta1: theta1.or(cfg_params.as_ref().and_then(|p| p.theta1.clone())),
                theta2: theta2.or(cfg_params.as_ref().and_then(|p| p.theta2.clone())),
                data: data.or(cfg_params.as_ref().and_then(|p| p.data.clone())),
            };
            let family_name = require(family.or(base_family), "family")?;
            let spec = expfam::by_name(&family_name)?;
            config.family = Some(family_name.clone());
            config.params = serde_json::to_value(&params).expect("serializable");

            let values = match params.op.as_str() {
                "to-expectation" => {
                    let theta = DVector::from_vec(require(params.theta.clone(), "theta")?);
                    let eta = expfam::to_expectation(spec.as_ref(), &theta)?;
                    serde_json::json!({ "eta": num_slice(eta.as_slice()) })
                }
                "to-natural" => {
                    let eta = DVector::from_vec(require(params.eta.clone(), "eta")?);
                    let theta = expfam::to_natural(spec.as_ref(), &eta)?;
                    serde_json::json!({ "theta": num_slice(theta.as_slice()) })
                }
                "conjugate" => {
                    let eta = DVector::from_vec(require(params.eta.clone(), "eta")?);
                    let v = expfam::legendre_conjugate(spec.as_ref(), &eta)?;
                    serde_json::json!({ "value": num(v) })
                }
                "bregman" => {
                    let t1 = DVector::from_vec(require(params.theta1.clone(), "theta1")?);
                    let t2 = DVector::from_vec(require(params.theta2.clone(), "theta2")?);
                    // B_F(theta2 : theta1), the KL divergence from theta1 to theta2.
                    let v = expfam::bregman(spec.as_ref(), &t2, &t1)?;
                    serde_json::json!({ "value": num(v) })
                }
                "mle" => {
                    let path = require(params.data.clone(), "data")?;
                    let points = read_sample_column(&path)?;
                    let batch = SampleBatch {
                        points,
                        family: family_name,
                        theta_star: None,
                        seed: config.seed,
                    };
                    let fit = expfam::mle(spec.as_ref(), &batch)?;
                    serde_json::json!({
                        "theta": num_slice(fit.theta.as_slice()),
                        "eta": num_slice(fit.eta.as_slice()),
                    })
                }
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "unknown expfam operation '{other}'"
                    )));
                }
            };
            Ok(Outcome {
                envelope: ResultEnvelope::new(config.clone(), values),
                exit_code: 0,
            })
        }

        CliCommand::Rao {
            family,
            chart,
            theta1,
            theta2,
            method,
            steps,
        } => {
            let cfg_params: Option<RaoParams> =
                base_params.as_ref().map(parse_params).transpose()?;
            let params = RaoParams {
                theta1: require(
                    theta1.or(cfg_params.as_ref().map(|p| p.theta1.clone())),
                    "theta1",
                )?,
                theta2: require(
                    theta2.or(cfg_params.as_ref().map(|p| p.theta2.clone())),
                    "theta2",
                )?,
                method: method
                    .or(cfg_params.as_ref().map(|p| p.method.clone()))
                    .unwrap_or_else(default_rao_method),
            };
            if let Some(s) = steps {
                config.numeric.ode_steps = s;
            }
            let family_name = require(family.or(base_family), "family")?;
            let fam = families::by_name(&family_name)?;
            let chart = chart
                .or(base_chart)
                .unwrap_or_else(|| fam.primary_chart().to_string());
            config.family = Some(family_name.clone());
            config.chart = Some(chart.clone());
            config.params = serde_json::to_value(&params).expect("serializable");

            let t1 = ParamPoint::new(params.theta1.clone(), chart.clone());
            let t2 = ParamPoint::new(params.theta2.clone(), chart.clone());
            let (distance, endpoint_residual) = match params.method.as_str() {
                "ode" => {
                    let path = geodesics::geodesic_connect(
                        fam.as_ref(),
                        &t1,
                        &t2,
                        config.numeric.ode_steps,
                        1e-8,
                    )?;
                    (path.length, path.endpoint_residual)
                }
                "closed" => {
                    if family_name != "gaussian1d" {
                        return Err(Error::InvalidArgument(format!(
                            "closed-form Rao distance exists only for gaussian1d, not '{family_name}'"
                        )));
                    }
                    let a = families::reparameterize(fam.as_ref(), &t1, "mu-sigma")?;
                    let b = families::reparameterize(fam.as_ref(), &t2, "mu-sigma")?;
                    let d = geodesics::rao_distance_gaussian_hyperbolic(
                        (a.coords[0], a.coords[1]),
                        (b.coords[0], b.coords[1]),
                    )?;
                    (d, 0.0)
                }
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "unknown rao method '{other}' (ode | closed)"
                    )));
                }
            };
            let values = serde_json::json!({
                "distance": num(distance),
                "method": params.method,
            });
            let envelope = ResultEnvelope::new(config.clone(), values)
                .with_residual("endpoint", endpoint_residual);
            Ok(Outcome {
                envelope,
                exit_code: 0,
            })
        }

        CliCommand::Geodesic {
            family,
            chart,
            theta1,
            theta2,
            steps,
            trace,
        } => {
            let cfg_params: Option<GeodesicParams> =
                base_params.as_ref().map(parse_params).transpose()?;
            let params = GeodesicParams {
                theta1: require(
                    theta1.or(cfg_params.as_ref().map(|p| p.theta1.clone())),
                    "theta1",
                )?,
                theta2: require(
                    theta2.or(cfg_params.as_ref().map(|p| p.theta2.clone())),
                    "theta2",
                )?,
            };
            if let Some(s) = steps {
                config.numeric.ode_steps = s;
            }
            if let Some(path) = trace {
                config.output.path = Some(path);
                config.output.format = OutputFormat::Csv;
            }
            let family_name = require(family.or(base_family), "family")?;
            let fam = families::by_name(&family_name)?;
            let chart = chart
                .or(base_chart)
                .unwrap_or_else(|| fam.primary_chart().to_string());
            config.family = Some(family_name);
            config.chart = Some(chart.clone());
            config.params = serde_json::to_value(&params).expect("serializable");

            let t1 = ParamPoint::new(params.theta1.clone(), chart.clone());
            let t2 = ParamPoint::new(params.theta2.clone(), chart.clone());
            let path = geodesics::geodesic_connect(
                fam.as_ref(),
                &t1,
                &t2,
                config.numeric.ode_steps,
                1e-8,
            )?;
            if config.output.format == OutputFormat::Csv {
                let out = require(config.output.path.clone(), "trace")?;
                let speeds = path.speeds(fam.as_ref())?;
                let d = t1.dim();
                let mut csv = String::from("t");
                for j in 0..d {
                    csv.push_str(&format!(",theta_{j}"));
                }
                csv.push_str(",speed\n");
                for (node, speed) in path.nodes.iter().zip(&speeds) {
                    csv.push_str(&format!("{:.16e}", node.t));
                    for v in node.theta.iter() {
                        csv.push_str(&format!(",{v:.16e}"));
                    }
                    csv.push_str(&format!(",{speed:.16e}\n"));
                }
                std::fs::write(&out, csv)?;
            }
            let values = serde_json::json!({
                "length": num(path.length),
                "endpoint_residual": num(path.endpoint_residual),
                "steps": path.nodes.len() - 1,
                "kind": path.kind.label(),
            });
            let envelope = ResultEnvelope::new(config.clone(), values)
                .with_residual("endpoint", path.endpoint_residual);
            Ok(Outcome {
                envelope,
                exit_code: 0,
            })
        }

        CliCommand::Props { suite, trials } => {
            let cfg_params: Option<PropsParams> =
                base_params.as_ref().map(parse_params).transpose()?;
            let params = PropsParams {
                suite: require(
                    suite.or(cfg_params.as_ref().map(|p| p.suite.clone())),
                    "suite",
                )?,
                trials: require(trials.or(cfg_params.as_ref().map(|p| p.trials)), "trials")?,
            };
            config.params = serde_json::to_value(&params).expect("serializable");
            let report = run_suite(&params.suite, params.trials, config.seed)?;
            let exit_code = if report.pass { 0 } else { 3 };
            let values = serde_json::to_value(&report)
                .map_err(|e| Error::Config(format!("report serialization: {e}")))?;
            Ok(Outcome {
                envelope: ResultEnvelope::new(config.clone(), values),
                exit_code,
            })
        }
    }
}

/// All whitespace/comma-separated numbers in a file.
fn read_numbers(path: &str) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for token in text.split(|c: char| c.is_whitespace() || c == ',') {
        if token.is_empty() {
            continue;
        }
        out.push(
            token
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad number '{token}' in {path}")))?,
        );
    }
    Ok(out)
}

/// First column of a CSV, one sample per row.
fn read_sample_column(path: &str) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let first = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .find(|t| !t.is_empty())
            .unwrap_or("");
        out.push(
            first
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad number '{first}' in {path}")))?,
        );
    }
    Ok(out)
}
