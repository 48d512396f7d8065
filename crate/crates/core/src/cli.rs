//! The `cdpr` command line.  Every subcommand reads a scenario, prints a
//! JSON document on stdout and, where a table makes sense, writes CSV to
//! `--out`.
//!
//! Exit codes: 0 success, 1 invalid input (scenario, arguments, stroke),
//! 2 numerical failure (singularity, divergence, non-convergence), 64 bad
//! command line.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::{UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;

use crate::control::kinematic_rollout;
use crate::error::{Error, Result};
use crate::interference::check_interference;
use crate::kinematics::{
    condition_number, forward_kinematics, inverse_kinematics, is_singular, jacobian, CableLengths, FkOptions,
    SingularityCriteria,
};
use crate::model::{Configuration, Pose, Vec8};
use crate::optimize::{optimize_parameters, DesignParameter, Objective};
use crate::scenario::Scenario;
use crate::statics::{generalized_load, static_tensions};
use crate::trajectory::plan_trajectory;
use crate::workspace::{rotational_workspace, wrench_feasible_workspace, RotationalSweep, Verdict};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

/// The canonical design-A scenario, used when `--scenario` is omitted.
pub const CANONICAL_SCENARIO: &str = include_str!("../scenarios/canonical.json");

#[derive(Parser, Debug)]
#[command(name = "cdpr", version, about = "Analysis of cable robots with spring-reconfigured end-effectors")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Scenario JSON file (defaults to the bundled canonical scenario).
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Write the tabular result as CSV to this file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for every randomized step (overrides the scenario's seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct PoseArgs {
    /// Reference-body position x y z, m.
    #[arg(long, num_args = 3, value_names = ["X", "Y", "Z"], allow_negative_numbers = true)]
    pose: Option<Vec<f64>>,
    /// Reference-body orientation as a rotation vector, rad.
    #[arg(long, num_args = 3, value_names = ["RX", "RY", "RZ"], allow_negative_numbers = true)]
    rotation: Option<Vec<f64>>,
    /// Internal coordinates (defaults to the scenario's nominal values).
    #[arg(long, num_args = 2, value_names = ["Q1", "Q2"], allow_negative_numbers = true)]
    internal: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct PathArgs {
    /// Waypoint `x y z q1 q2` (identity orientation); repeat for each.
    #[arg(long = "waypoint", num_args = 5, action = clap::ArgAction::Append, allow_negative_numbers = true)]
    waypoints: Vec<f64>,
    /// Duration of each segment, s; repeat once per segment.
    #[arg(long = "duration", action = clap::ArgAction::Append)]
    durations: Vec<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a scenario against every invariant.
    Validate,
    /// Cable lengths of one configuration.
    Ik(PoseArgs),
    /// Configuration from eight cable lengths.
    Fk {
        /// Measured cable lengths, m, in cable order.
        #[arg(long, value_name = "L", num_args = 8, required = true, allow_negative_numbers = true)]
        lengths: Vec<f64>,
        /// Warm start (pose/rotation/internal), defaults to the reference position.
        #[command(flatten)]
        guess: PoseArgs,
        /// Random restarts around the warm start if it fails to converge.
        #[arg(long, default_value_t = 0)]
        restarts: usize,
    },
    /// Unique static tensions under gravity and springs.
    Statics(PoseArgs),
    /// Cable-length Jacobian and its conditioning.
    Jacobian(PoseArgs),
    /// Wrench-feasible workspace over the scenario grid.
    Workspace {
        /// Grid counts `nx ny nz [angles]`; three counts mean one payload angle.
        #[arg(long, num_args = 3..=4, value_names = ["NX", "NY", "NZ", "NA"])]
        grid: Option<Vec<usize>>,
    },
    /// Payload rotation reachable at a fixed base position.
    Rotws {
        /// Base position x y z, m (defaults to the reference position).
        #[arg(long, value_names = ["X", "Y", "Z"], num_args = 3, allow_negative_numbers = true)]
        position: Option<Vec<f64>>,
    },
    /// Cable/cable and cable/body distances.
    Interference {
        #[command(flatten)]
        pose: PoseArgs,
        /// Distance below which an entry is flagged, m (defaults to the scenario's).
        #[arg(long)]
        clearance: Option<f64>,
    },
    /// Sample a quintic trajectory through waypoints.
    Traj {
        #[command(flatten)]
        path: PathArgs,
        #[arg(long, default_value_t = 101)]
        samples: usize,
    },
    /// Kinematic (length-command) control rollout through the dynamics.
    Rollout {
        #[command(flatten)]
        path: PathArgs,
        /// Control period, s (defaults to the scenario's).
        #[arg(long)]
        control_period: Option<f64>,
    },
    /// Derivative-free optimization of spring and screw parameters.
    Optimize {
        /// spring-stiffness | spring-free-extension | lead; repeat, one per bound.
        #[arg(long = "param", required = true, value_parser = kebab::<DesignParameter>)]
        params: Vec<DesignParameter>,
        /// `lo hi` for each parameter, in order.
        #[arg(long = "bounds", num_args = 2, required = true, action = clap::ArgAction::Append)]
        bounds: Vec<f64>,
        /// rotational-stroke | workspace-volume
        #[arg(long, value_parser = kebab::<Objective>, default_value = "rotational-stroke")]
        objective: Objective,
        /// Maximum number of objective evaluations.
        #[arg(long, default_value_t = 40)]
        budget: usize,
    },
}

fn kebab<T: DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_owned())).map_err(|e| e.to_string())
}

/// Runs the command line with real stdout/stderr and returns the exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = if code == EXIT_OK { write!(out, "{}", e.render()) } else { write!(err, "{}", e.render()) };
            return code;
        }
    };
    match execute(cli, out) {
        Ok(code) => code,
        // a closed downstream pipe (`cdpr … | head`) is not a failure
        Err(e) if is_broken_pipe(&e) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn is_broken_pipe(e: &Error) -> bool {
    let kind = match e {
        Error::Io(io) => Some(io.kind()),
        Error::Json(j) => j.io_error_kind(),
        _ => None,
    };
    kind == Some(std::io::ErrorKind::BrokenPipe)
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_INVALID
    }
}

fn load_scenario(path: Option<&Path>) -> Result<Scenario> {
    match path {
        Some(p) => Scenario::load(p),
        None => Scenario::from_json_str(CANONICAL_SCENARIO),
    }
}

fn emit<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

fn csv_file(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn configuration(sc: &Scenario, args: &PoseArgs) -> Configuration {
    let p = args.pose.as_deref().map_or(Vector3::from(sc.simulation.reference_position), Vector3::from_column_slice);
    let r = args.rotation.as_deref().map_or(Vector3::zeros(), Vector3::from_column_slice);
    let internal = args.internal.as_deref().map_or(sc.simulation.nominal_internal, |v| [v[0], v[1]]);
    Configuration::new(Pose::new(p, UnitQuaternion::from_scaled_axis(r)), internal)
}

fn coordinates(q: &Configuration) -> [f64; 8] {
    let p = q.base_pose.position;
    let r = q.base_pose.orientation.scaled_axis();
    [p.x, p.y, p.z, r.x, r.y, r.z, q.internal[0], q.internal[1]]
}

fn write_rows(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(csv_file(path)?);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(f64::to_string))?;
    }
    w.flush()?;
    Ok(())
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<i32> {
    let Common { scenario, out: csv_out, seed } = cli.common;

    if let Command::Validate = cli.command {
        let text = match &scenario {
            Some(p) => std::fs::read_to_string(p)?,
            None => CANONICAL_SCENARIO.to_owned(),
        };
        return match Scenario::from_json_str(&text) {
            Ok(_) => {
                emit(out, &json!({ "valid": true, "violations": [] }))?;
                Ok(EXIT_OK)
            }
            Err(Error::InvalidScenario(v)) => {
                emit(out, &json!({ "valid": false, "violations": v }))?;
                Ok(EXIT_INVALID)
            }
            Err(Error::Parse { path, message }) => {
                emit(out, &json!({ "valid": false, "path": path, "error": message }))?;
                Ok(EXIT_INVALID)
            }
            Err(e) => Err(e),
        };
    }

    let mut sc = load_scenario(scenario.as_deref())?;
    if let Some(s) = seed {
        sc.simulation.seed = s;
    }
    let (geometry, design) = (&sc.geometry, &sc.design);

    match cli.command {
        Command::Validate => unreachable!(),
        Command::Ik(args) => {
            let q = configuration(&sc, &args);
            let l = inverse_kinematics(geometry, design, &q)?;
            if let Some(p) = &csv_out {
                write_rows(p, &["cable", "length"], l.as_slice().iter().enumerate().map(|(i, &x)| vec![i as f64, x]))?;
            }
            emit(out, &json!({ "configuration": q, "lengths": l.as_slice() }))?;
        }
        Command::Fk { lengths, guess, restarts } => {
            let target = CableLengths(Vec8::from_column_slice(&lengths));
            let q0 = configuration(&sc, &guess);
            let opts = FkOptions { criteria: SingularityCriteria::from(&sc.simulation), ..FkOptions::default() };
            let mut rng = ChaCha8Rng::seed_from_u64(sc.simulation.seed);
            let mut attempt = 0;
            let solution = loop {
                let start = if attempt == 0 {
                    q0
                } else {
                    let mut d = Vec8::from_fn(|_, _| rng.random_range(-0.05..0.05));
                    d[6] = 0.0;
                    d[7] = 0.0;
                    q0.retract(&d)
                };
                match forward_kinematics(geometry, design, &target, &start, &opts) {
                    Ok(s) => break s,
                    Err(e) if attempt >= restarts => return Err(e),
                    Err(_) => attempt += 1,
                }
            };
            emit(
                out,
                &json!({
                    "configuration": solution.configuration,
                    "coordinates": coordinates(&solution.configuration),
                    "iterations": solution.iterations,
                    "residual": solution.residual,
                    "restarts": attempt,
                }),
            )?;
        }
        Command::Statics(args) => {
            let q = configuration(&sc, &args);
            let load = generalized_load(geometry, design, &q)?;
            let sol = static_tensions(geometry, design, &q)?;
            if let Some(p) = &csv_out {
                let t = sol.tensions.0;
                write_rows(p, &["cable", "tension"], t.iter().enumerate().map(|(i, &x)| vec![i as f64, x]))?;
            }
            emit(
                out,
                &json!({
                    "configuration": q,
                    "load": load.0.as_slice(),
                    "tensions": sol.tensions.0.as_slice(),
                    "residual": sol.residual,
                    "verdict": sol.verdict,
                    "feasible": sol.verdict.is_feasible(),
                }),
            )?;
        }
        Command::Jacobian(args) => {
            let q = configuration(&sc, &args);
            let j = jacobian(geometry, design, &q)?;
            let rows: Vec<Vec<f64>> = (0..8).map(|i| j.matrix.row(i).iter().copied().collect()).collect();
            if let Some(p) = &csv_out {
                let header = ["x", "y", "z", "rx", "ry", "rz", "q1", "q2"];
                write_rows(p, &header, rows.iter().cloned())?;
            }
            let crit = SingularityCriteria::from(&sc.simulation);
            emit(
                out,
                &json!({
                    "configuration": q,
                    "matrix": rows,
                    "rotational_columns": j.rotational,
                    "condition_number": condition_number(&j, crit.characteristic_length),
                    "singular": is_singular(geometry, design, &q, &crit)?,
                }),
            )?;
        }
        Command::Workspace { grid } => {
            if let Some(g) = grid {
                sc.simulation.grid.x.count = g[0];
                sc.simulation.grid.y.count = g[1];
                sc.simulation.grid.z.count = g[2];
                sc.simulation.grid.payload_angles = g.get(3).copied().unwrap_or(1);
                let v = sc.validate();
                if !v.is_empty() {
                    return Err(Error::InvalidScenario(v));
                }
            }
            let map = wrench_feasible_workspace(&sc.geometry, &sc.design, &sc.simulation);
            if let Some(p) = &csv_out {
                map.write_csv(csv_file(p)?)?;
            }
            writeln!(out, "{}", map.summary_json()?)?;
        }
        Command::Rotws { position } => {
            let p =
                position.as_deref().map_or(Vector3::from(sc.simulation.reference_position), Vector3::from_column_slice);
            let ws = rotational_workspace(geometry, design, &sc.simulation, p, &RotationalSweep::default())?;
            if let Some(path) = &csv_out {
                write_rows(path, &["start", "end"], ws.intervals.iter().map(|i| i.to_vec()))?;
            }
            emit(
                out,
                &json!({ "position": [p.x, p.y, p.z], "workspace": ws, "width_turns": ws.width / std::f64::consts::TAU }),
            )?;
        }
        Command::Interference { pose, clearance } => {
            let q = configuration(&sc, &pose);
            let report = check_interference(geometry, design, &q, clearance.unwrap_or(sc.simulation.clearance))?;
            emit(
                out,
                &json!({
                    "configuration": q,
                    "flagged": report.any_flagged(),
                    "min_distance": report.min_distance(),
                    "report": report,
                }),
            )?;
        }
        Command::Traj { path, samples } => {
            let tr = plan_trajectory(waypoints(&path), path.durations.clone())?;
            let n = samples.max(2);
            let rows: Vec<(f64, [f64; 8], Vec8, Vec8)> = (0..n)
                .map(|k| {
                    let t = tr.duration() * k as f64 / (n - 1) as f64;
                    let s = tr.sample(t);
                    (t, coordinates(&s.q), s.v, s.a)
                })
                .collect();
            if let Some(p) = &csv_out {
                let mut header = vec!["time".to_string()];
                for prefix in ["q", "v", "a"] {
                    header.extend((0..8).map(|i| format!("{prefix}{i}")));
                }
                let header: Vec<&str> = header.iter().map(String::as_str).collect();
                write_rows(
                    p,
                    &header,
                    rows.iter().map(|(t, q, v, a)| {
                        let mut r = vec![*t];
                        r.extend_from_slice(q);
                        r.extend(v.iter());
                        r.extend(a.iter());
                        r
                    }),
                )?;
            }
            let samples: Vec<_> = rows
                .iter()
                .map(|(t, q, v, a)| json!({ "time": t, "q": q, "v": v.as_slice(), "a": a.as_slice() }))
                .collect();
            emit(out, &json!({ "duration": tr.duration(), "trajectory": tr, "samples": samples }))?;
        }
        Command::Rollout { path, control_period } => {
            let tr = plan_trajectory(waypoints(&path), path.durations.clone())?;
            let period = control_period.unwrap_or(sc.simulation.control_period);
            let log = kinematic_rollout(geometry, design, &sc.simulation, &tr, period)?;
            if let Some(p) = &csv_out {
                log.write_csv(csv_file(p)?)?;
            }
            let mut counts = [0usize; 6];
            for t in &log.ticks {
                counts[t.verdict.code() as usize] += 1;
            }
            emit(
                out,
                &json!({
                    "ticks": log.ticks.len(),
                    "control_period": log.control_period,
                    "dt": log.dt,
                    "max_tracking_error": log.max_tracking_error(),
                    "verdict_counts": counts,
                    "singular_ticks": log.flagged(Verdict::Singular).count(),
                    "final_state": log.final_state,
                }),
            )?;
        }
        Command::Optimize { params, bounds, objective, budget } => {
            let bounds: Vec<[f64; 2]> = bounds.chunks(2).map(|c| [c[0], c[1]]).collect();
            let outcome = optimize_parameters(&sc, &params, objective, &bounds, budget, &RotationalSweep::default())?;
            if let Some(p) = &csv_out {
                let mut w = csv::Writer::from_writer(csv_file(p)?);
                let mut header: Vec<String> = params.iter().map(kebab_name).collect();
                header.push("objective".into());
                w.write_record(&header)?;
                for e in outcome.trace() {
                    let mut row: Vec<String> = e.params.iter().map(f64::to_string).collect();
                    row.push(e.objective.map_or_else(String::new, |v| v.to_string()));
                    w.write_record(&row)?;
                }
                w.flush()?;
            }
            emit(out, &json!({ "parameters": params, "objective": objective, "bounds": bounds, "result": outcome }))?;
        }
    }
    Ok(EXIT_OK)
}

fn kebab_name<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default()
}

fn waypoints(path: &PathArgs) -> Vec<Configuration> {
    path.waypoints.chunks(5).map(|w| Configuration::at_position(Vector3::new(w[0], w[1], w[2]), [w[3], w[4]])).collect()
}
