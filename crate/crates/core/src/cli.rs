//! Command-line front end. [`run`] does all the work and returns what should
//! go to stdout, so it can be tested without spawning a process.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hinfnorm::{closed_loop, hinf_norm_bisect, NormOptions, NormResult};
use crate::model::{io, GainMatrix, LtiSystem, Tolerances};
use crate::positivity::{
    closed_loop_positivity_condition, disturbance_to_state, internal_positivity,
};
use crate::riccati::{synth_are_with, CareOptions};
use crate::simulate::{
    feedback_response, run_comparison_experiment, step_response, ExperimentConfig, Trajectory,
};
use crate::synthesis::{
    optimal_gamma, optimal_gamma_rel_error, reduce_coordination, synth_coordinated,
    synth_optimal_with, synth_weighted_with, CoordinatedPlant,
};

#[derive(Debug, Parser)]
#[command(
    name = "hinfsf",
    version,
    about = "Optimal H-infinity static state feedback for symmetric Hurwitz plants"
)]
pub struct Cli {
    #[command(flatten)]
    pub tol: TolArgs,

    /// Output encoding. Defaults to csv for simulate and experiment, json
    /// otherwise.
    #[arg(long, value_enum, global = true)]
    pub format: Option<Format>,

    /// Write the primary output (gain file, table or report) here.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Overrides for the numerical tolerances.
#[derive(Debug, Clone, Default, Args)]
pub struct TolArgs {
    /// Relative width of the final H-infinity norm bracket.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Relative bracket width of the Riccati gamma iteration.
    #[arg(long, global = true)]
    pub gamma_tol: Option<f64>,
    /// Relative distance from the imaginary axis treated as on it.
    #[arg(long, global = true)]
    pub imag_tol: Option<f64>,
    /// Relative asymmetry accepted in the state matrix.
    #[arg(long, global = true)]
    pub sym_tol: Option<f64>,
    /// Required distance of the state matrix spectrum from the axis.
    #[arg(long, global = true)]
    pub stab_margin: Option<f64>,
    /// Smallest eigenvalue accepted for a positive definite weight.
    #[arg(long, global = true)]
    pub pd_tol: Option<f64>,
    /// Largest condition estimate accepted for the state matrix.
    #[arg(long, global = true)]
    pub cond_limit: Option<f64>,
    /// Slack allowed on sign conditions in positivity checks.
    #[arg(long, global = true)]
    pub positivity_tol: Option<f64>,
    /// Iteration cap for the norm bisection and the Riccati gamma iteration.
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,
}

impl TolArgs {
    pub fn resolve(&self) -> Tolerances {
        let d = Tolerances::default();
        Tolerances {
            sym_tol: self.sym_tol.unwrap_or(d.sym_tol),
            stab_margin: self.stab_margin.unwrap_or(d.stab_margin),
            pd_tol: self.pd_tol.unwrap_or(d.pd_tol),
            cond_limit: self.cond_limit.unwrap_or(d.cond_limit),
            bisect_tol: self.tol.unwrap_or(d.bisect_tol),
            imag_tol: self.imag_tol.unwrap_or(d.imag_tol),
            max_iter: self.max_iter.unwrap_or(d.max_iter),
            positivity_tol: self.positivity_tol.unwrap_or(d.positivity_tol),
            gamma_tol: self.gamma_tol.unwrap_or(d.gamma_tol),
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form optimal gain, or the weighted gain with --weights.
    Synth {
        system: PathBuf,
        /// Weights file with `q` and `r`.
        #[arg(long)]
        weights: Option<PathBuf>,
    },
    /// H-infinity norm of a realization or of a plant closed by a gain.
    Norm {
        /// Plant file; needs --gain.
        #[arg(required_unless_present = "statespace", requires = "gain")]
        system: Option<PathBuf>,
        #[arg(long)]
        gain: Option<PathBuf>,
        /// Realization file with `a`, `b`, `c`, `d`.
        #[arg(long, conflicts_with_all = ["system", "gain"])]
        statespace: Option<PathBuf>,
    },
    /// Compare the closed-form optimum with norm bisection and the Riccati
    /// gamma iteration.
    Verify { system: PathBuf },
    /// Coordinated gain for blocks whose inputs must sum to zero.
    Coord { blocks: PathBuf },
    /// Internal positivity of the loop closed by --gain (default: optimal).
    Positivity {
        system: PathBuf,
        #[arg(long)]
        gain: Option<PathBuf>,
    },
    /// Response to a constant disturbance from zero initial state.
    Simulate {
        /// Plant file, closed by --gain (default: optimal).
        #[arg(required_unless_present = "statespace")]
        system: Option<PathBuf>,
        #[arg(long, conflicts_with = "statespace")]
        gain: Option<PathBuf>,
        /// Realization file, simulated as given.
        #[arg(long)]
        statespace: Option<PathBuf>,
        /// Comma-separated disturbance; defaults to all ones.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        w: Option<Vec<f64>>,
        /// Final time.
        #[arg(long, default_value_t = 10.0)]
        horizon: f64,
        /// Sample period of the exact discretization.
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
    },
    /// Averaged responses of the closed-form and Riccati controllers over
    /// random buffer networks.
    Experiment {
        /// JSON config; missing fields take defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        num_systems: Option<usize>,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Synth { .. } => "synth",
            Command::Norm { .. } => "norm",
            Command::Verify { .. } => "verify",
            Command::Coord { .. } => "coord",
            Command::Positivity { .. } => "positivity",
            Command::Simulate { .. } => "simulate",
            Command::Experiment { .. } => "experiment",
        }
    }
}

/// What a command produced. `failure` is set when the report was built but
/// the command still has to exit unsuccessfully.
#[derive(Debug)]
pub struct Outcome {
    pub stdout: String,
    pub failure: Option<Error>,
}

/// Exit status for a failed command: 2 for bad input, 3 for numeric trouble.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_validation() {
        2
    } else {
        3
    }
}

#[derive(Debug, Serialize)]
struct InputDigest {
    path: String,
    sha256: String,
}

/// A level together with the relative accuracy it was computed to.
#[derive(Debug, Serialize)]
struct Gamma {
    value: f64,
    rel_tol: f64,
}

#[derive(Debug, Serialize)]
struct CommandReport {
    command: &'static str,
    inputs: Vec<InputDigest>,
    tolerances: Tolerances,
    results: Value,
}

struct Inputs(Vec<InputDigest>);

impl Inputs {
    fn read(&mut self, path: &Path) -> Result<String> {
        let bytes =
            std::fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        self.0.push(InputDigest {
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        String::from_utf8(bytes).map_err(|e| Error::parse(format!("{}: {e}", path.display())))
    }
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    // adding 0.0 turns -0.0 into 0.0
    m.row_iter()
        .map(|r| r.iter().map(|v| v + 0.0).collect())
        .collect()
}

fn norm_json(r: &NormResult) -> Value {
    json!({
        "gamma": Gamma { value: r.gamma, rel_tol: r.bisect_tol },
        "lower": r.lower,
        "upper": r.upper,
        "peak_frequency": if r.peak_frequency.is_finite() { json!(r.peak_frequency) } else { json!("inf") },
        "iterations": r.iterations,
        "imag_tol": r.imag_tol,
    })
}

fn norm_options(t: &Tolerances) -> NormOptions {
    NormOptions {
        bisect_tol: t.bisect_tol,
        imag_tol: t.imag_tol,
        max_iter: t.max_iter,
    }
}

fn care_options(t: &Tolerances) -> CareOptions {
    CareOptions {
        imag_tol: t.imag_tol,
        pd_tol: t.pd_tol,
        ..CareOptions::default()
    }
}

/// Flatten scalar leaves of a JSON value into `key,value` lines.
fn flatten_csv(prefix: &str, v: &Value, out: &mut String) {
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten_csv(&key, child, out);
            }
        }
        Value::Array(items) => {
            for (i, child) in items.iter().enumerate() {
                flatten_csv(&format!("{prefix}.{i}"), child, out);
            }
        }
        Value::String(s) => out.push_str(&format!("{prefix},{s}\n")),
        other => out.push_str(&format!("{prefix},{other}\n")),
    }
}

fn render(report: &CommandReport, format: Format) -> Result<String> {
    match format {
        Format::Json => {
            let mut s =
                serde_json::to_string_pretty(report).map_err(|e| Error::Io(e.to_string()))?;
            s.push('\n');
            Ok(s)
        }
        Format::Csv => {
            let value = serde_json::to_value(report).map_err(|e| Error::Io(e.to_string()))?;
            let mut out = String::from("key,value\n");
            flatten_csv("", &value, &mut out);
            Ok(out)
        }
    }
}

fn matrix_csv(m: &DMatrix<f64>) -> String {
    m.row_iter()
        .map(|r| {
            r.iter()
                .map(|v| io::fmt_f64(*v))
                .collect::<Vec<_>>()
                .join(",")
                + "\n"
        })
        .collect()
}

fn write_out(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn load_system(inputs: &mut Inputs, path: &Path, t: &Tolerances) -> Result<LtiSystem> {
    io::parse_system(&inputs.read(path)?, t.sym_tol, t.stab_margin)
}

fn load_gain_or_optimal(
    inputs: &mut Inputs,
    path: Option<&Path>,
    sys: &LtiSystem,
    t: &Tolerances,
) -> Result<GainMatrix> {
    let l = match path {
        Some(p) => io::parse_gain(&inputs.read(p)?)?,
        None => synth_optimal_with(sys, t.cond_limit)?,
    };
    l.check_dims(sys)?;
    Ok(l)
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let t = cli.tol.resolve();
    let mut inputs = Inputs(Vec::new());
    let table_default = matches!(
        cli.command,
        Command::Simulate { .. } | Command::Experiment { .. }
    );
    let format = cli.format.unwrap_or(if table_default {
        Format::Csv
    } else {
        Format::Json
    });
    let mut failure = None;
    // primary artifact written to --out (or stdout) instead of the report
    let mut artifact: Option<String> = None;

    let results = match &cli.command {
        Command::Synth { system, weights } => {
            let sys = load_system(&mut inputs, system, &t)?;
            let gamma_opt = Gamma {
                value: optimal_gamma(&sys),
                rel_tol: optimal_gamma_rel_error(&sys),
            };
            let (gain, method) = match weights {
                Some(p) => {
                    let w = io::parse_weights(&inputs.read(p)?, t.pd_tol)?;
                    (
                        synth_weighted_with(&sys, &w, t.pd_tol, t.cond_limit)?,
                        "weighted",
                    )
                }
                None => (synth_optimal_with(&sys, t.cond_limit)?, "optimal"),
            };
            let norm = hinf_norm_bisect(&closed_loop(&sys, &gain)?, &norm_options(&t))?;
            if let Some(out) = &cli.out {
                let text = match format {
                    Format::Json => io::gain_to_json(&gain),
                    Format::Csv => matrix_csv(&gain.l),
                };
                write_out(out, &text)?;
            }
            json!({
                "method": method,
                "gain": rows(&gain.l),
                "gamma_opt": gamma_opt,
                "closed_loop_norm": norm_json(&norm),
            })
        }
        Command::Norm {
            system,
            gain,
            statespace,
        } => {
            let ss = match (system, statespace) {
                (_, Some(p)) => io::parse_state_space(&inputs.read(p)?)?,
                (Some(s), None) => {
                    let sys = load_system(&mut inputs, s, &t)?;
                    let l = load_gain_or_optimal(&mut inputs, gain.as_deref(), &sys, &t)?;
                    closed_loop(&sys, &l)?
                }
                (None, None) => {
                    return Err(Error::InvalidArgument(
                        "need a system or --statespace".into(),
                    ))
                }
            };
            norm_json(&hinf_norm_bisect(&ss, &norm_options(&t))?)
        }
        Command::Verify { system } => {
            let sys = load_system(&mut inputs, system, &t)?;
            let l = synth_optimal_with(&sys, t.cond_limit)?;
            let gamma_opt = optimal_gamma(&sys);
            let opt_tol = optimal_gamma_rel_error(&sys);
            let bisect = hinf_norm_bisect(&closed_loop(&sys, &l)?, &norm_options(&t))?;
            let are = synth_are_with(&sys, t.gamma_tol, t.max_iter, &care_options(&t))?;
            let are_norm = hinf_norm_bisect(&closed_loop(&sys, &are.gain)?, &norm_options(&t))?;

            let scale = gamma_opt.max(1.0);
            let bisect_gap = (bisect.gamma - gamma_opt).abs();
            let bisect_bound = t.bisect_tol * scale + opt_tol * gamma_opt;
            // the reported controller sits at infimum * (1 + 10 gamma_tol)
            let are_gap = (are.achieved_gamma - gamma_opt).abs();
            let are_bound = 100.0 * t.gamma_tol * scale;
            let agree = bisect_gap <= bisect_bound && are_gap <= are_bound;
            if !agree {
                failure = Some(Error::OracleDisagreement(format!(
                    "closed form {gamma_opt}, bisection {} (gap {bisect_gap:e}, bound {bisect_bound:e}), Riccati {} (gap {are_gap:e}, bound {are_bound:e})",
                    bisect.gamma, are.achieved_gamma
                )));
            }
            json!({
                "closed_form": Gamma { value: gamma_opt, rel_tol: opt_tol },
                "bisection": norm_json(&bisect),
                "riccati": {
                    "achieved_gamma": Gamma { value: are.achieved_gamma, rel_tol: t.gamma_tol },
                    "infimum_bracket": [are.infimum_lower, are.infimum_upper],
                    "iterations": are.iterations,
                    "residual": are.care.residual,
                    "gain": rows(&are.gain.l),
                    "closed_loop_norm": norm_json(&are_norm),
                },
                "agreement": {
                    "bisection_gap": bisect_gap,
                    "bisection_bound": bisect_bound,
                    "riccati_gap": are_gap,
                    "riccati_bound": are_bound,
                    "agree": agree,
                },
            })
        }
        Command::Coord { blocks } => {
            let pairs = io::parse_blocks(&inputs.read(blocks)?)?;
            let plant = CoordinatedPlant::new(pairs, t.sym_tol, t.stab_margin)?;
            let gain = synth_coordinated(&plant)?;
            let stacked = gain.stacked();
            let reduced = reduce_coordination(&plant)?.solve(t.pd_tol)?;
            let path_gap = crate::linalg::max_abs(&(&stacked - &reduced.l));
            let m = plant.input_width();
            let mut sum_residual = 0.0_f64;
            for j in 0..stacked.ncols() {
                for r in 0..m {
                    let s: f64 = (0..plant.nu()).map(|i| stacked[(i * m + r, j)]).sum();
                    sum_residual = sum_residual.max(s.abs());
                }
            }
            if let Some(out) = &cli.out {
                let g = GainMatrix::new(stacked.clone());
                let text = match format {
                    Format::Json => io::gain_to_json(&g),
                    Format::Csv => matrix_csv(&g.l),
                };
                write_out(out, &text)?;
            }
            json!({
                "nu": plant.nu(),
                "input_width": m,
                "state_dims": plant.state_dims(),
                "local_terms": gain.local_terms.iter().map(rows).collect::<Vec<_>>(),
                "global_terms": gain.global_terms.iter().map(rows).collect::<Vec<_>>(),
                "stacked": rows(&stacked),
                "input_sum_residual": sum_residual,
                "reduced_path_gap": path_gap,
            })
        }
        Command::Positivity { system, gain } => {
            let sys = load_system(&mut inputs, system, &t)?;
            let l = load_gain_or_optimal(&mut inputs, gain.as_deref(), &sys, &t)?;
            let cert = internal_positivity(&disturbance_to_state(&sys, &l.l)?, t.positivity_tol)?;
            let condition = if sys.is_diagonal() {
                json!(closed_loop_positivity_condition(&sys, t.positivity_tol)?)
            } else {
                Value::Null
            };
            json!({
                "gain": if gain.is_some() { "file" } else { "optimal" },
                "metzler_a": cert.metzler_a,
                "nonneg_b": cert.nonneg_b,
                "nonneg_c": cert.nonneg_c,
                "nonneg_d": cert.nonneg_d,
                "verdict": cert.verdict,
                "witness": cert.witness.map(|(p, (i, j, v))| json!({
                    "matrix": format!("{p:?}").to_lowercase(),
                    "row": i,
                    "col": j,
                    "value": v,
                })),
                "optimal_loop_condition": condition,
            })
        }
        Command::Simulate {
            system,
            gain,
            statespace,
            w,
            horizon,
            dt,
        } => {
            let (traj, state_labels, output_labels) = match (system, statespace) {
                (_, Some(p)) => {
                    let ss = io::parse_state_space(&inputs.read(p)?)?;
                    let w = disturbance(w.as_deref(), ss.inputs())?;
                    let out: Vec<String> = (1..=ss.outputs()).map(|i| format!("y{i}")).collect();
                    (
                        step_response(&ss, &w, *horizon, *dt)?,
                        labels("x", ss.states()),
                        out,
                    )
                }
                (Some(s), None) => {
                    let sys = load_system(&mut inputs, s, &t)?;
                    let l = load_gain_or_optimal(&mut inputs, gain.as_deref(), &sys, &t)?;
                    let w = disturbance(w.as_deref(), sys.n())?;
                    let traj = feedback_response(&sys, &l, &w, *horizon, *dt)?;
                    (traj, labels("x", sys.n()), labels("u", sys.m()))
                }
                (None, None) => {
                    return Err(Error::InvalidArgument(
                        "need a system or --statespace".into(),
                    ))
                }
            };
            artifact = Some(match format {
                Format::Csv => traj.to_csv(&state_labels, Some(&output_labels))?,
                Format::Json => trajectory_json(&traj)?,
            });
            json!({
                "samples": traj.len(),
                "horizon": horizon,
                "dt": dt,
                "min_state": traj.min_state(),
            })
        }
        Command::Experiment {
            config,
            seed,
            num_systems,
            horizon,
            dt,
        } => {
            let mut cfg = match config {
                Some(p) => io::parse_json::<ExperimentConfig>(&inputs.read(p)?)?,
                None => ExperimentConfig::default(),
            };
            if let Some(v) = cli.tol.gamma_tol {
                cfg.gamma_tol = v;
            }
            if let Some(v) = seed {
                cfg.seed = *v;
            }
            if let Some(v) = num_systems {
                cfg.num_systems = *v;
            }
            if let Some(v) = horizon {
                cfg.horizon = *v;
            }
            if let Some(v) = dt {
                cfg.dt = *v;
            }
            let table = run_comparison_experiment(&cfg)?;
            let draws: Vec<Value> = table
                .draws
                .iter()
                .map(|d| {
                    json!({
                        "index": d.index,
                        "params": d.params,
                        "gamma_opt": d.gamma_opt,
                        "norm_optimal": Gamma { value: d.norm_optimal, rel_tol: t.bisect_tol },
                        "norm_riccati": Gamma { value: d.norm_riccati, rel_tol: t.bisect_tol },
                        "relative_norm_gap": d.relative_norm_gap(),
                    })
                })
                .collect();
            let peaks: serde_json::Map<String, Value> = table
                .series
                .iter()
                .map(|s| (s.label(), json!(s.peak())))
                .collect();
            let summary = json!({
                "config": {
                    "num_systems": cfg.num_systems,
                    "param_low": cfg.param_low,
                    "param_high": cfg.param_high,
                    "seed": cfg.seed,
                    "horizon": cfg.horizon,
                    "dt": cfg.dt,
                    "gamma_tol": cfg.gamma_tol,
                },
                "succeeded": table.draws.len(),
                "failures": table.failures.iter().map(|(i, e)| json!({"index": i, "error": e})).collect::<Vec<_>>(),
                "draws": draws,
                "peaks": peaks,
            });
            artifact = Some(match format {
                Format::Csv => table.to_csv()?,
                Format::Json => {
                    let mut s = serde_json::to_string_pretty(&summary)
                        .map_err(|e| Error::Io(e.to_string()))?;
                    s.push('\n');
                    s
                }
            });
            summary
        }
    };

    let report = CommandReport {
        command: cli.command.name(),
        inputs: inputs.0,
        tolerances: t,
        results,
    };
    let stdout = match (artifact, &cli.out) {
        (Some(text), None) => text,
        (Some(text), Some(path)) => {
            write_out(path, &text)?;
            render(&report, Format::Json)?
        }
        (None, Some(path))
            if !matches!(cli.command, Command::Synth { .. } | Command::Coord { .. }) =>
        {
            write_out(path, &render(&report, format)?)?;
            String::new()
        }
        (None, _) => render(&report, format)?,
    };
    Ok(Outcome { stdout, failure })
}

fn labels(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

fn disturbance(w: Option<&[f64]>, n: usize) -> Result<DVector<f64>> {
    match w {
        None => Ok(DVector::from_element(n, 1.0)),
        Some(v) if v.len() == n => Ok(DVector::from_column_slice(v)),
        Some(v) => Err(Error::DimensionMismatch(format!(
            "--w has {} entries, expected {n}",
            v.len()
        ))),
    }
}

fn trajectory_json(traj: &Trajectory) -> Result<String> {
    let vecs = |v: &[DVector<f64>]| {
        v.iter()
            .map(|x| x.iter().copied().collect::<Vec<_>>())
            .collect::<Vec<_>>()
    };
    let mut s = serde_json::to_string_pretty(&json!({
        "times": traj.times,
        "states": vecs(&traj.states),
        "outputs": vecs(&traj.outputs),
    }))
    .map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}
