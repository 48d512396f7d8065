//! Scenario files: `{ "geometry": …, "design": …, "simulation": … }`.
//!
//! Unknown keys are rejected everywhere.  The schema is described in
//! `docs/scenario.md`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DesignSpec, RobotGeometry, Variant, NUM_CABLES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub geometry: RobotGeometry,
    pub design: DesignSpec,
    #[serde(default)]
    pub simulation: SimulationSettings,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl AxisSpec {
    pub fn new(min: f64, max: f64, count: usize) -> Self {
        Self { min, max, count }
    }

    pub fn value(&self, k: usize) -> f64 {
        if self.count <= 1 {
            0.5 * (self.min + self.max)
        } else {
            self.min + (self.max - self.min) * k as f64 / (self.count - 1) as f64
        }
    }

    pub fn step(&self) -> f64 {
        if self.count <= 1 {
            self.max - self.min
        } else {
            (self.max - self.min) / (self.count - 1) as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x: AxisSpec,
    pub y: AxisSpec,
    pub z: AxisSpec,
    /// Number of payload angles sampled uniformly on `[0, 2π)` per position.
    pub payload_angles: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            x: AxisSpec::new(-0.8, 0.8, 21),
            y: AxisSpec::new(-0.8, 0.8, 21),
            z: AxisSpec::new(0.5, 1.5, 11),
            payload_angles: 8,
        }
    }
}

impl GridSpec {
    pub fn cell_count(&self) -> usize {
        self.x.count * self.y.count * self.z.count * self.payload_angles
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSettings {
    /// Integrator step, s.
    pub dt: f64,
    /// Control (command update) period, s.
    pub control_period: f64,
    /// Minimum admissible cable/cable and cable/body distance, m.
    pub clearance: f64,
    /// Axial stiffness of each cable, N/m.
    pub cable_stiffness: f64,
    /// Viscous damping of each cable, N·s/m.
    pub cable_damping: f64,
    pub singularity_threshold: f64,
    /// Length used to scale rotational Jacobian columns, m.
    pub characteristic_length: f64,
    /// Distance to a winder reversal below which a configuration counts as
    /// singular, m.
    pub reversal_band: f64,
    /// Position used by `rotws` and the optimizer, m.
    pub reference_position: [f64; 3],
    /// Internal coordinates used when a cell does not prescribe them.
    pub nominal_internal: [f64; 2],
    pub grid: GridSpec,
    pub seed: u64,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            control_period: 1e-2,
            clearance: 0.01,
            cable_stiffness: 1e5,
            cable_damping: 50.0,
            singularity_threshold: 1e6,
            characteristic_length: 0.15,
            reversal_band: 1e-9,
            reference_position: [0.0, 0.0, 1.0],
            nominal_internal: [0.0, 0.0],
            grid: GridSpec::default(),
            seed: 0,
        }
    }
}

impl Scenario {
    pub fn from_json_str(text: &str) -> Result<Scenario> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let scenario: Scenario = serde_path_to_error::deserialize(de)
            .map_err(|e| Error::Parse { path: e.path().to_string(), message: e.inner().to_string() })?;
        let violations = scenario.validate();
        if !violations.is_empty() {
            return Err(Error::InvalidScenario(violations));
        }
        Ok(scenario)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Scenario> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Vec<String> {
        let mut out = validate_scenario(&self.geometry, &self.design);
        let sim = &self.simulation;
        for (name, v) in [
            ("simulation.dt", sim.dt),
            ("simulation.control_period", sim.control_period),
            ("simulation.characteristic_length", sim.characteristic_length),
            ("simulation.singularity_threshold", sim.singularity_threshold),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                out.push(format!("{name} must be positive"));
            }
        }
        for (name, v) in [
            ("simulation.clearance", sim.clearance),
            ("simulation.cable_stiffness", sim.cable_stiffness),
            ("simulation.cable_damping", sim.cable_damping),
            ("simulation.reversal_band", sim.reversal_band),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                out.push(format!("{name} must be non-negative"));
            }
        }
        let g = &sim.grid;
        for (name, a) in [("x", g.x), ("y", g.y), ("z", g.z)] {
            if a.count == 0 || !(a.min <= a.max) {
                out.push(format!("simulation.grid.{name} must have count >= 1 and min <= max"));
            }
        }
        if g.payload_angles == 0 {
            out.push("simulation.grid.payload_angles must be >= 1".to_owned());
        }
        out
    }
}

/// Every invariant violation of a geometry/design pair; empty iff valid.
pub fn validate_scenario(geometry: &RobotGeometry, spec: &DesignSpec) -> Vec<String> {
    let mut out = Vec::new();
    let variant = spec.variant;

    if geometry.anchors.len() != geometry.attachments.len() {
        out.push(format!(
            "anchor/attachment count mismatch ({} anchors, {} attachments)",
            geometry.anchors.len(),
            geometry.attachments.len()
        ));
    }
    if geometry.anchors.len() != NUM_CABLES {
        out.push(format!("expected {NUM_CABLES} anchors, found {}", geometry.anchors.len()));
    }
    if geometry.attachments.len() != NUM_CABLES {
        out.push(format!("expected {NUM_CABLES} attachments, found {}", geometry.attachments.len()));
    }
    if geometry.anchors.iter().flatten().any(|v| !v.is_finite()) {
        out.push("anchors must be finite".to_owned());
    }
    for (i, att) in geometry.attachments.iter().enumerate() {
        if !variant.bodies().contains(&att.body) {
            out.push(format!("attachment {i} references body `{}` which {variant} does not have", att.body));
        }
        if att.point.iter().any(|v| !v.is_finite()) {
            out.push(format!("attachment {i} point must be finite"));
        }
    }
    for &b in variant.bodies() {
        match geometry.bodies.get(&b) {
            None => out.push(format!("geometry.bodies is missing `{b}`")),
            Some(shape) => {
                if shape.half_extents.iter().any(|&h| !(h >= 0.0)) {
                    out.push(format!("geometry.bodies.{b}.half_extents must be non-negative"));
                }
            }
        }
        match spec.masses.get(&b) {
            None => out.push(format!("design.masses is missing `{b}`")),
            Some(m) => {
                if !(m.mass > 0.0) {
                    out.push(format!("design.masses.{b}.mass must be positive"));
                }
                let i = m.inertia_matrix();
                if (i - i.transpose()).abs().max() > 1e-12 || (0..3).any(|k| !(i[(k, k)] > 0.0)) {
                    out.push(format!("design.masses.{b}.inertia must be symmetric with positive diagonal"));
                }
            }
        }
    }
    for b in geometry.bodies.keys() {
        if !variant.bodies().contains(b) {
            out.push(format!("geometry.bodies has `{b}` which {variant} does not have"));
        }
    }
    if !(geometry.rod_radius > 0.0) {
        out.push("rod_radius must be positive".to_owned());
    }
    let chain = &geometry.chain;
    if !(chain.axial_spacing >= 0.0 && chain.payload_drop >= 0.0 && chain.lower_spacing >= 0.0) {
        out.push("chain distances must be non-negative".to_owned());
    }

    match variant {
        Variant::AScrew | Variant::CRotatableGripper => match spec.lead {
            Some(l) if l > 0.0 => {}
            Some(_) => out.push("lead must be positive".to_owned()),
            None => out.push(format!("{variant} requires `lead`")),
        },
        Variant::AWinder => match spec.winder {
            Some(w) => {
                if !(w.stroke_period > 0.0) {
                    out.push("winder.stroke_period must be positive".to_owned());
                }
                if !(w.theta_max > 0.0) {
                    out.push("winder.theta_max must be positive".to_owned());
                }
            }
            None => out.push("a-winder requires `winder`".to_owned()),
        },
        Variant::BGripper => {}
    }

    let n = variant.translational_internals();
    if spec.springs.len() != n {
        out.push(format!("{variant} needs {n} spring(s), found {}", spec.springs.len()));
    }
    if spec.stroke_limits.len() != n {
        out.push(format!("{variant} needs {n} stroke interval(s), found {}", spec.stroke_limits.len()));
    }
    for (k, [lo, hi]) in spec.stroke_limits.iter().enumerate() {
        if !(lo < hi) {
            out.push(format!("stroke_limits[{k}]: s_min must be below s_max"));
        }
    }
    for (k, sp) in spec.springs.iter().enumerate() {
        if !(sp.stiffness > 0.0) {
            out.push(format!("springs[{k}].stiffness must be positive"));
        }
        if !(sp.min_extension >= 0.0 && sp.free_extension > sp.min_extension) {
            out.push(format!("springs[{k}]: need 0 <= min_extension < free_extension"));
        }
        if let Some([_, hi]) = spec.stroke_limits.get(k) {
            if sp.free_extension - hi < sp.min_extension {
                out.push(format!("springs[{k}] coil-binds inside the stroke"));
            }
        }
    }

    let [t_min, t_max] = spec.tension_bounds;
    if !(t_min > 0.0) {
        out.push("t_min must be positive".to_owned());
    }
    if !(t_max > t_min) {
        out.push("t_max must exceed t_min".to_owned());
    }
    if spec.gravity.iter().any(|v| !v.is_finite()) {
        out.push("gravity must be finite".to_owned());
    }

    if variant.has_gripper() {
        match &spec.aperture_map {
            Some(m) => out.extend(m.violations()),
            None => out.push(format!("{variant} requires `aperture_map`")),
        }
    }
    out
}
