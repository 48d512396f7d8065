//! Wrench-feasible workspace sampling and rotational-workspace measurement.
//!
//! A grid cell is a base position together with a payload angle.  The base
//! body keeps the identity orientation; the payload angle is produced by the
//! internal coordinates (screw, winder or bearing), which is the point of a
//! reconfigurable end-effector.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use nalgebra::{UnitQuaternion, Vector3};
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::interference::check_interference;
use crate::kinematics::{inverse_kinematics, is_singular, SingularityCriteria};
use crate::model::{Configuration, Coupling, DesignSpec, Pose, RobotGeometry, Variant};
use crate::scenario::{GridSpec, SimulationSettings};
use crate::statics::static_tensions;

/// Outcome of one feasibility evaluation; only the first failing check is
/// reported, in the order stroke → IK → singularity → tensions →
/// interference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Feasible,
    TensionLow,
    TensionHigh,
    Interference,
    Singular,
    OutOfStroke,
}

impl Verdict {
    pub fn code(self) -> u8 {
        match self {
            Verdict::Feasible => 0,
            Verdict::TensionLow => 1,
            Verdict::TensionHigh => 2,
            Verdict::Interference => 3,
            Verdict::Singular => 4,
            Verdict::OutOfStroke => 5,
        }
    }

    pub fn is_feasible(self) -> bool {
        self == Verdict::Feasible
    }
}

impl Serialize for Verdict {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u8(self.code())
    }
}

/// Feasibility of a single configuration.
pub fn evaluate(
    geometry: &RobotGeometry,
    spec: &DesignSpec,
    settings: &SimulationSettings,
    q: &Configuration,
) -> Verdict {
    if spec.check_stroke(&q.internal).is_err() {
        return Verdict::OutOfStroke;
    }
    if inverse_kinematics(geometry, spec, q).is_err() {
        // IK only fails on stroke/spring limits (coil bind).
        return Verdict::OutOfStroke;
    }
    let crit = SingularityCriteria::from(settings);
    match is_singular(geometry, spec, q, &crit) {
        Ok(false) => {}
        _ => return Verdict::Singular,
    }
    let solution = match static_tensions(geometry, spec, q) {
        Ok(s) => s,
        Err(_) => return Verdict::Singular,
    };
    if solution.verdict.any_low() {
        return Verdict::TensionLow;
    }
    if solution.verdict.any_high() {
        return Verdict::TensionHigh;
    }
    match check_interference(geometry, spec, q, settings.clearance) {
        Ok(r) if !r.any_flagged() => Verdict::Feasible,
        _ => Verdict::Interference,
    }
}

/// World yaw of the payload at `q` (base yaw plus the internal rotation).
pub fn payload_angle(spec: &DesignSpec, q: &Configuration) -> f64 {
    let base = q.base_pose.yaw();
    let coupling = spec.coupling();
    base + match spec.variant {
        Variant::AScrew | Variant::AWinder | Variant::BGripper => q.internal[1] - coupling.angle(q.internal[0]),
        Variant::CRotatableGripper => coupling.angle(q.internal[1]),
    }
}

fn wrap_pi(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(TAU) - PI;
    if w <= -PI {
        w + TAU
    } else {
        w
    }
}

/// Internal coordinates that turn the payload to `angle` (mod 2π) with the
/// base at identity orientation.  Among the admissible branches the one
/// closest to `nominal` is chosen; `None` if no branch lies in the stroke.
pub fn internal_for_payload_angle(spec: &DesignSpec, angle: f64, nominal: [f64; 2]) -> Option<[f64; 2]> {
    let pick = |candidates: Vec<f64>, limits: [f64; 2], reference: f64| -> Option<f64> {
        candidates
            .into_iter()
            .filter(|s| *s >= limits[0] - 1e-12 && *s <= limits[1] + 1e-12)
            .map(|s| s.clamp(limits[0], limits[1]))
            .min_by(|a, b| (a - reference).abs().total_cmp(&(b - reference).abs()))
    };
    let limits = *spec.stroke_limits.first()?;
    match (spec.variant, spec.coupling()) {
        (Variant::BGripper, _) => Some([nominal[0], wrap_pi(angle)]),
        (Variant::AScrew, Coupling::Screw(m)) => {
            // ψ = 0, screw angle ≡ −angle
            let base = m.lead * (-angle / TAU).rem_euclid(1.0);
            let cands = branch_candidates(base, m.lead, limits);
            pick(cands, limits, nominal[0]).map(|s| [s, 0.0])
        }
        (Variant::AWinder, Coupling::Winder(w)) => {
            let theta = (-angle).rem_euclid(TAU);
            if theta > w.theta_max + 1e-12 {
                return None;
            }
            let rising = theta * w.stroke_period / w.theta_max;
            let falling = 2.0 * w.stroke_period - rising;
            let mut cands = branch_candidates(rising, 2.0 * w.stroke_period, limits);
            cands.extend(branch_candidates(falling, 2.0 * w.stroke_period, limits));
            pick(cands, limits, nominal[0]).map(|s| [s, 0.0])
        }
        (Variant::CRotatableGripper, Coupling::Screw(m)) => {
            let limits = *spec.stroke_limits.get(1)?;
            let base = m.lead * (angle / TAU).rem_euclid(1.0);
            let cands = branch_candidates(base, m.lead, limits);
            pick(cands, limits, nominal[1]).map(|s| [nominal[0], s])
        }
        _ => None,
    }
}

fn branch_candidates(base: f64, period: f64, limits: [f64; 2]) -> Vec<f64> {
    if !(period > 0.0) {
        return Vec::new();
    }
    let k0 = ((limits[0] - base) / period).floor() as i64 - 1;
    let k1 = ((limits[1] - base) / period).ceil() as i64 + 1;
    (k0..=k1).map(|k| base + k as f64 * period).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub index: [usize; 4],
    pub position: [f64; 3],
    pub payload_angle: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorkspaceMap {
    pub variant: Variant,
    pub grid: GridSpec,
    pub cells: Vec<Cell>,
}

#[derive(Serialize)]
struct MapSummary<'a> {
    variant: Variant,
    grid: &'a GridSpec,
    cell_count: usize,
    feasible_count: usize,
    volume: f64,
    verdicts: Vec<u8>,
}

impl WorkspaceMap {
    /// Flat index of a cell; the payload angle varies fastest, then z, y, x.
    pub fn flat_index(grid: &GridSpec, [ix, iy, iz, ia]: [usize; 4]) -> usize {
        ((ix * grid.y.count + iy) * grid.z.count + iz) * grid.payload_angles + ia
    }

    pub fn cell(&self, index: [usize; 4]) -> &Cell {
        &self.cells[Self::flat_index(&self.grid, index)]
    }

    pub fn feasible_count(&self) -> usize {
        self.cells.iter().filter(|c| c.verdict.is_feasible()).count()
    }

    /// Feasible cell count times the volume a cell represents (one grid
    /// voxel shared among the payload angles).
    pub fn volume(&self) -> f64 {
        let step = |a: &crate::scenario::AxisSpec| if a.count > 1 { a.step() } else { 1.0 };
        let voxel = step(&self.grid.x) * step(&self.grid.y) * step(&self.grid.z);
        self.feasible_count() as f64 * voxel / self.grid.payload_angles.max(1) as f64
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "y", "z", "payload_angle", "verdict"])?;
        for c in &self.cells {
            w.write_record(&[
                c.position[0].to_string(),
                c.position[1].to_string(),
                c.position[2].to_string(),
                c.payload_angle.to_string(),
                c.verdict.code().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary_json(&self) -> Result<String> {
        let summary = MapSummary {
            variant: self.variant,
            grid: &self.grid,
            cell_count: self.cells.len(),
            feasible_count: self.feasible_count(),
            volume: self.volume(),
            verdicts: self.cells.iter().map(|c| c.verdict.code()).collect(),
        };
        Ok(serde_json::to_string_pretty(&summary)?)
    }
}

fn grid_angle(grid: &GridSpec, ia: usize) -> f64 {
    TAU * ia as f64 / grid.payload_angles.max(1) as f64
}

fn unflatten(grid: &GridSpec, mut k: usize) -> [usize; 4] {
    let ia = k % grid.payload_angles;
    k /= grid.payload_angles;
    let iz = k % grid.z.count;
    k /= grid.z.count;
    let iy = k % grid.y.count;
    [k / grid.y.count, iy, iz, ia]
}

/// Verdict of one cell: the base sits at `position` with identity
/// orientation and the internal coordinates realise `angle`.
pub fn evaluate_cell(
    geometry: &RobotGeometry,
    spec: &DesignSpec,
    settings: &SimulationSettings,
    position: Vector3<f64>,
    angle: f64,
) -> Verdict {
    match internal_for_payload_angle(spec, angle, settings.nominal_internal) {
        None => Verdict::OutOfStroke,
        Some(internal) => evaluate(geometry, spec, settings, &Configuration::at_position(position, internal)),
    }
}

/// Sample the grid in `settings.grid`.  Cells are evaluated in parallel;
/// the output order is the canonical flat index regardless of scheduling.
pub fn wrench_feasible_workspace(
    geometry: &RobotGeometry,
    spec: &DesignSpec,
    settings: &SimulationSettings,
) -> WorkspaceMap {
    let grid = settings.grid;
    let cells = (0..grid.cell_count())
        .into_par_iter()
        .map(|k| {
            let index = unflatten(&grid, k);
            let position = [grid.x.value(index[0]), grid.y.value(index[1]), grid.z.value(index[2])];
            let angle = grid_angle(&grid, index[3]);
            Cell {
                index,
                position,
                payload_angle: angle,
                verdict: evaluate_cell(geometry, spec, settings, Vector3::from(position), angle),
            }
        })
        .collect();
    WorkspaceMap { variant: spec.variant, grid, cells }
}

/// Cells whose verdict differs from that of the whole configuration turned
/// 90° about the vertical axis (position rotated, base yawed by 90°, same
/// internal coordinates).  Empty for a robot with four-fold symmetry.
pub fn quarter_turn_mismatches(
    geometry: &RobotGeometry,
    spec: &DesignSpec,
    settings: &SimulationSettings,
    map: &WorkspaceMap,
) -> Vec<[usize; 4]> {
    let quarter = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), PI / 2.0);
    map.cells
        .par_iter()
        .filter_map(|cell| {
            let internal = internal_for_payload_angle(spec, cell.payload_angle, settings.nominal_internal)?;
            let p = Vector3::from(cell.position);
            let turned = Configuration::new(Pose::new(quarter * p, quarter), internal);
            let v = evaluate(geometry, spec, settings, &turned);
            (v != cell.verdict).then_some(cell.index)
        })
        .collect()
}

/// Sampling of the internal-coordinate sweep used by
/// [`rotational_workspace`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RotationalSweep {
    /// Spacing of translational samples, m.  A fixed spacing keeps the
    /// samples of a shorter stroke a subset of those of a longer one.
    pub stroke_step: f64,
    /// Number of bearing-rotation samples over one turn (A/B).
    pub bearing_samples: usize,
}

impl Default for RotationalSweep {
    fn default() -> Self {
        Self { stroke_step: 1e-3, bearing_samples: 72 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RotationalWorkspace {
    /// Disjoint, sorted payload-angle intervals (rad, world frame,
    /// unwrapped).
    pub intervals: Vec<[f64; 2]>,
    pub width: f64,
    /// The payload can keep turning: a full bearing turn is feasible (A/B)
    /// or, for the winder, a full traverse between reversals is.
    pub continuous: bool,
    pub samples: usize,
    pub feasible_samples: usize,
}

/// Payload angles reachable at a fixed base `position` by sweeping the
/// internal coordinates over the stroke while staying wrench-feasible and
/// clear of interference.  Only the feasible region connected to the
/// nominal internal state counts.
pub fn rotational_workspace(
    geometry: &RobotGeometry,
    spec: &DesignSpec,
    settings: &SimulationSettings,
    position: Vector3<f64>,
    sweep: &RotationalSweep,
) -> Result<RotationalWorkspace> {
    let nominal = settings.nominal_internal;
    let base_verdict = evaluate(geometry, spec, settings, &Configuration::at_position(position, nominal));
    if !base_verdict.is_feasible() {
        return Err(Error::InfeasibleBase(format!(
            "verdict {} at {:?} with internal {:?}",
            base_verdict.code(),
            position.as_slice(),
            nominal
        )));
    }

    let is_c = spec.variant == Variant::CRotatableGripper;
    let sweep_index = if is_c { 1 } else { 0 };
    let limits = spec.stroke_limits[if is_c { 1 } else { 0 }];
    let ns = ((limits[1] - limits[0]) / sweep.stroke_step + 1e-9).floor() as usize + 1;
    let s_at = |i: usize| (limits[0] + i as f64 * sweep.stroke_step).min(limits[1]);
    // C has no bearing; A/B sweep ψ on [−π, π) and the ends wrap around.
    let npsi = if is_c { 1 } else { sweep.bearing_samples.max(1) };
    let psi_at = |j: usize| if is_c { 0.0 } else { -PI + TAU * j as f64 / npsi as f64 };

    let config = |i: usize, j: usize| {
        let mut internal = nominal;
        internal[sweep_index] = s_at(i);
        if !is_c {
            internal[1] = psi_at(j);
        }
        Configuration::at_position(position, internal)
    };
    let feasible: Vec<bool> = (0..ns * npsi)
        .into_par_iter()
        .map(|k| evaluate(geometry, spec, settings, &config(k / npsi, k % npsi)).is_feasible())
        .collect();

    // Start sample: nearest to the nominal state.
    let i0 = (((nominal[sweep_index] - limits[0]) / sweep.stroke_step).round().max(0.0) as usize).min(ns - 1);
    let j0 = if is_c { 0 } else { (((nominal[1] + PI) / TAU * npsi as f64).round() as usize) % npsi };

    let mut in_component = vec![false; ns * npsi];
    let mut stack = Vec::new();
    if feasible[i0 * npsi + j0] {
        in_component[i0 * npsi + j0] = true;
        stack.push((i0, j0));
    }
    let mut segments: Vec<[f64; 2]> = Vec::new();
    let angle_of = |i: usize, j: usize, unwrap: f64| payload_angle(spec, &config(i, j)) + unwrap;
    // Track the unwrapped bearing angle of each visited sample.
    let mut unwrap = vec![0.0f64; ns * npsi];
    let mut wraps = false;
    while let Some((i, j)) = stack.pop() {
        let here = angle_of(i, j, unwrap[i * npsi + j]);
        segments.push([here, here]);
        let mut neighbours: Vec<(usize, usize, f64)> = Vec::new();
        if i > 0 {
            neighbours.push((i - 1, j, 0.0));
        }
        if i + 1 < ns {
            neighbours.push((i + 1, j, 0.0));
        }
        if npsi > 1 {
            let (jl, wl) = if j == 0 { (npsi - 1, -TAU) } else { (j - 1, 0.0) };
            let (jr, wr) = if j + 1 == npsi { (0, TAU) } else { (j + 1, 0.0) };
            neighbours.push((i, jl, wl));
            neighbours.push((i, jr, wr));
        }
        for (ni, nj, w) in neighbours {
            let k = ni * npsi + nj;
            if !feasible[k] {
                continue;
            }
            let u = unwrap[i * npsi + j] + w;
            let there = angle_of(ni, nj, u);
            segments.push([here.min(there), here.max(there)]);
            if !in_component[k] {
                in_component[k] = true;
                unwrap[k] = u;
                stack.push((ni, nj));
            } else if (unwrap[k] - u).abs() > PI {
                // Reached the same sample with a different turn count.
                wraps = true;
            }
        }
    }

    let mut intervals = merge(segments);
    let continuous_winder = match spec.coupling() {
        Coupling::Winder(w) if !is_c => {
            // any full traverse [kS, (k+1)S] inside the component, at some ψ
            (0..npsi).any(|j| {
                let covered: Vec<f64> = (0..ns).filter(|&i| in_component[i * npsi + j]).map(s_at).collect();
                covers_traverse(&covered, sweep.stroke_step, w.stroke_period, limits)
            })
        }
        _ => false,
    };
    let continuous = wraps || continuous_winder;
    if wraps {
        intervals = vec![[f64::NEG_INFINITY, f64::INFINITY]];
    }
    let width = intervals.iter().map(|[a, b]| b - a).sum();
    Ok(RotationalWorkspace {
        intervals,
        width,
        continuous,
        samples: ns * npsi,
        feasible_samples: feasible.iter().filter(|f| **f).count(),
    })
}

fn covers_traverse(samples: &[f64], step: f64, period: f64, limits: [f64; 2]) -> bool {
    let mut k = (limits[0] / period).ceil();
    while (k + 1.0) * period <= limits[1] + 1e-12 {
        let (a, b) = (k * period, (k + 1.0) * period);
        let n = ((b - a) / step).round() as usize;
        let inside = samples.iter().filter(|s| **s >= a - 1e-12 && **s <= b + 1e-12).count();
        if inside > n {
            return true;
        }
        k += 1.0;
    }
    false
}

fn merge(mut segs: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    segs.sort_by(|a, b| a[0].total_cmp(&b[0]));
    let mut out: Vec<[f64; 2]> = Vec::new();
    for s in segs {
        match out.last_mut() {
            Some(last) if s[0] <= last[1] + 1e-12 => last[1] = last[1].max(s[1]),
            _ => out.push(s),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical;
    use crate::scenario::AxisSpec;

    #[test]
    fn verdict_codes() {
        let codes: Vec<u8> = [
            Verdict::Feasible,
            Verdict::TensionLow,
            Verdict::TensionHigh,
            Verdict::Interference,
            Verdict::Singular,
            Verdict::OutOfStroke,
        ]
        .iter()
        .map(|v| v.code())
        .collect();
        assert_eq!(codes, vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(serde_json::to_string(&Verdict::Singular).unwrap(), "4");
    }

    #[test]
    fn payload_angle_round_trip() {
        for variant in Variant::ALL {
            let sc = canonical::scenario(variant);
            for k in 0..8 {
                let target = TAU * k as f64 / 8.0;
                let internal = internal_for_payload_angle(&sc.design, target, sc.simulation.nominal_internal).unwrap();
                let q = Configuration::at_position(Vector3::new(0.0, 0.0, 1.0), internal);
                let got = payload_angle(&sc.design, &q);
                assert!(wrap_pi(got - target).abs() < 1e-12, "{variant:?} {k}: {got} vs {target}");
            }
        }
    }

    #[test]
    fn screw_branch_nearest_nominal() {
        let sc = canonical::scenario(Variant::CRotatableGripper);
        // nominal s2 = 0.1 is a whole number of leads: angle 0 stays there
        let internal = internal_for_payload_angle(&sc.design, 0.0, sc.simulation.nominal_internal).unwrap();
        assert!((internal[1] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn centred_cell_feasible_and_outside_infeasible() {
        for variant in Variant::ALL {
            let sc = canonical::scenario(variant);
            let c = Vector3::from(sc.simulation.reference_position);
            let nominal = payload_angle(&sc.design, &Configuration::at_position(c, sc.simulation.nominal_internal));
            let v = evaluate_cell(&sc.geometry, &sc.design, &sc.simulation, c, nominal);
            assert_eq!(v, Verdict::Feasible, "{variant:?}");
            let outside = Vector3::new(1.5, 0.0, c.z);
            let v = evaluate_cell(&sc.geometry, &sc.design, &sc.simulation, outside, 0.0);
            assert!(!v.is_feasible(), "{variant:?}");
        }
        let sc = canonical::scenario(Variant::AScrew);
        let v = evaluate_cell(&sc.geometry, &sc.design, &sc.simulation, Vector3::new(1.5, 0.0, 1.0), 0.0);
        assert!(matches!(v, Verdict::TensionLow | Verdict::TensionHigh), "{v:?}");
    }

    #[test]
    fn map_order_and_row_count() {
        let mut sc = canonical::scenario(Variant::AScrew);
        sc.simulation.grid = GridSpec {
            x: AxisSpec::new(-0.5, 0.5, 3),
            y: AxisSpec::new(-0.5, 0.5, 3),
            z: AxisSpec::new(0.8, 1.2, 2),
            payload_angles: 2,
        };
        let map = wrench_feasible_workspace(&sc.geometry, &sc.design, &sc.simulation);
        assert_eq!(map.cells.len(), 36);
        for (k, c) in map.cells.iter().enumerate() {
            assert_eq!(WorkspaceMap::flat_index(&map.grid, c.index), k);
            assert_eq!(unflatten(&map.grid, k), c.index);
        }
        let mut buf = Vec::new();
        map.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 37);
        // evaluation order does not matter
        let again = wrench_feasible_workspace(&sc.geometry, &sc.design, &sc.simulation);
        assert_eq!(map, again);
    }

    #[test]
    fn merge_intervals() {
        assert_eq!(merge(vec![[2.0, 3.0], [0.0, 1.0], [0.5, 2.0], [5.0, 5.0]]), vec![[0.0, 3.0], [5.0, 5.0]]);
    }

    #[test]
    fn rotational_workspace_screw_exceeds_bearing_only() {
        let sweep = RotationalSweep { stroke_step: 2e-3, bearing_samples: 36 };
        let a = canonical::scenario(Variant::AScrew);
        let b = canonical::scenario(Variant::BGripper);
        let p = Vector3::from(a.simulation.reference_position);
        let wa = rotational_workspace(&a.geometry, &a.design, &a.simulation, p, &sweep).unwrap();
        let wb = rotational_workspace(&b.geometry, &b.design, &b.simulation, p, &sweep).unwrap();
        assert!(wa.width > wb.width, "{} vs {}", wa.width, wb.width);
        assert!(!wb.continuous);
    }

    #[test]
    fn infeasible_base_is_an_error() {
        let sc = canonical::scenario(Variant::AScrew);
        let r = rotational_workspace(
            &sc.geometry,
            &sc.design,
            &sc.simulation,
            Vector3::new(1.5, 0.0, 1.0),
            &RotationalSweep::default(),
        );
        assert!(matches!(r, Err(Error::InfeasibleBase(_))));
    }

    #[test]
    fn traverse_cover() {
        let s: Vec<f64> = (0..=100).map(|i| i as f64 * 1e-3).collect();
        assert!(covers_traverse(&s, 1e-3, 0.1, [0.0, 0.2]));
        assert!(!covers_traverse(&s[..60], 1e-3, 0.1, [0.0, 0.2]));
    }
}
