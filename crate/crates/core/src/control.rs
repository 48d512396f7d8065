//! Purely kinematic control: at every control tick the desired
//! configuration is turned into eight cable-length commands and the
//! end-effector is left to the forward dynamics.  No tension is measured
//! and nothing is fed back.
//!
//! The command is the inverse kinematics of the desired configuration,
//! shortened by the elastic stretch the cable would have under the model's
//! static tension there.  That stretch is computed from the model alone
//! (gravity and springs), so it is a feedforward term in the same sense as
//! the inverse kinematics itself.  Between ticks the setpoint is ramped
//! linearly to the next command, as a position-controlled winch would.

use std::io::Write;

use serde::Serialize;

use crate::dynamics::{evaluate as evaluate_dynamics, step_dynamics, CableModel, SimState};
use crate::error::{Error, Result};
use crate::kinematics::inverse_kinematics;
use crate::model::{Configuration, Coupling, DesignSpec, RobotGeometry, Vec8, NUM_CABLES};
use crate::scenario::SimulationSettings;
use crate::statics::{static_tensions, TensionVerdict};
use crate::trajectory::Trajectory;
use crate::workspace::{self, Verdict};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tick {
    pub time: f64,
    pub commanded: [f64; NUM_CABLES],
    pub realized_lengths: [f64; NUM_CABLES],
    pub tensions: [f64; NUM_CABLES],
    /// Distance between desired and realized reference-body position, m.
    pub tracking_error: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RolloutLog {
    pub control_period: f64,
    pub dt: f64,
    pub ticks: Vec<Tick>,
    pub final_state: SimState,
}

impl RolloutLog {
    pub fn max_tracking_error(&self) -> f64 {
        self.ticks.iter().map(|t| t.tracking_error).fold(0.0, f64::max)
    }

    pub fn flagged(&self, verdict: Verdict) -> impl Iterator<Item = &Tick> {
        self.ticks.iter().filter(move |t| t.verdict == verdict)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["time".to_string()];
        header.extend((0..NUM_CABLES).map(|i| format!("cmd_{i}")));
        header.extend((0..NUM_CABLES).map(|i| format!("length_{i}")));
        header.extend((0..NUM_CABLES).map(|i| format!("tension_{i}")));
        header.push("tracking_error".into());
        header.push("verdict".into());
        w.write_record(&header)?;
        for t in &self.ticks {
            let mut row = vec![t.time.to_string()];
            row.extend(t.commanded.iter().map(f64::to_string));
            row.extend(t.realized_lengths.iter().map(f64::to_string));
            row.extend(t.tensions.iter().map(f64::to_string));
            row.push(t.tracking_error.to_string());
            row.push(t.verdict.code().to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Cable-length command for desired configuration `q`.
pub fn length_command(
    geometry: &RobotGeometry,
    spec: &DesignSpec,
    cables: &CableModel,
    q: &Configuration,
) -> Result<Vec8> {
    let l = inverse_kinematics(geometry, spec, q)?.0;
    // Where the statics are singular or ask a cable to push, fall back to
    // the bare lengths for that cable.
    let stretch = match static_tensions(geometry, spec, q) {
        Ok(sol) => sol.tensions.0.map(|t| t.max(0.0) / cables.stiffness),
        Err(_) => Vec8::zeros(),
    };
    Ok(l - stretch)
}

/// True if the winder stroke passes through (or sits on) a groove
/// reversal between two consecutive commands.
fn crosses_reversal(spec: &DesignSpec, a: &Configuration, b: &Configuration, band: f64) -> bool {
    let Coupling::Winder(w) = spec.coupling() else { return false };
    let (s0, s1) = (a.internal[0], b.internal[0]);
    if w.is_reversal(s0, band) || w.is_reversal(s1, band) {
        return true;
    }
    (s0 / w.stroke_period).floor() != (s1 / w.stroke_period).floor()
}

fn tick_verdict(
    geometry: &RobotGeometry,
    spec: &DesignSpec,
    settings: &SimulationSettings,
    previous: Option<&Configuration>,
    desired: &Configuration,
    tensions: &Vec8,
) -> Verdict {
    let planned = workspace::evaluate(geometry, spec, settings, desired);
    if matches!(planned, Verdict::OutOfStroke | Verdict::Singular) {
        return planned;
    }
    if previous.is_some_and(|p| crosses_reversal(spec, p, desired, settings.reversal_band)) {
        return Verdict::Singular;
    }
    let realized = TensionVerdict::check(tensions.as_slice(), spec.tension_bounds);
    if realized.any_low() {
        return Verdict::TensionLow;
    }
    if realized.any_high() {
        return Verdict::TensionHigh;
    }
    match planned {
        Verdict::Interference => Verdict::Interference,
        _ => Verdict::Feasible,
    }
}

/// Follows `trajectory` by commanding cable lengths every `control_period`
/// and integrating the dynamics with `settings.dt` in between.  The robot
/// starts at rest on the first waypoint.
pub fn kinematic_rollout(
    geometry: &RobotGeometry,
    spec: &DesignSpec,
    settings: &SimulationSettings,
    trajectory: &Trajectory,
    control_period: f64,
) -> Result<RolloutLog> {
    let dt = settings.dt;
    if !(control_period > 0.0 && dt > 0.0) {
        return Err(Error::InvalidArgument("control period and time step must be positive".into()));
    }
    let substeps = (control_period / dt).round().max(1.0) as usize;
    let cables = CableModel::from(settings);
    let n_ticks = (trajectory.duration() / control_period + 1e-9).floor() as usize + 1;

    let mut state = SimState::at_rest(trajectory.sample(0.0).q);
    let mut ticks = Vec::with_capacity(n_ticks);
    let mut previous: Option<Configuration> = None;
    let mut desired = trajectory.sample(0.0).q;
    let mut cmd = length_command(geometry, spec, &cables, &desired)?;
    for k in 0..n_ticks {
        let time = k as f64 * control_period;
        let eval = evaluate_dynamics(geometry, spec, &cables, &state, &cmd)?;
        let tracking_error = (desired.base_pose.position - state.q.base_pose.position).norm();
        ticks.push(Tick {
            time,
            commanded: cmd.into(),
            realized_lengths: eval.lengths.into(),
            tensions: eval.tensions.into(),
            tracking_error,
            verdict: tick_verdict(geometry, spec, settings, previous.as_ref(), &desired, &eval.tensions),
        });
        previous = Some(desired);
        if k + 1 < n_ticks {
            // The winch servo ramps from one setpoint to the next over the
            // control period instead of jumping: with stiff cables a held
            // setpoint turns the path increment of each period into a
            // tension spike.
            desired = trajectory.sample((k + 1) as f64 * control_period).q;
            let next = length_command(geometry, spec, &cables, &desired)?;
            for j in 0..substeps {
                let ramp = cmd + (next - cmd) * ((j + 1) as f64 / substeps as f64);
                state = step_dynamics(geometry, spec, &cables, &state, &ramp, dt)?;
            }
            cmd = next;
        }
    }
    Ok(RolloutLog { control_period, dt, ticks, final_state: state })
}
