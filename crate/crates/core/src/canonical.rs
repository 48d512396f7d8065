//! The canonical test scenario: a 2 m cube frame with eight corner winches.
//!
//! Cable routing is two-fold symmetric.  Each cabled body carries two
//! cables to upper anchors and two to lower anchors, paired so that the
//! cables on one body twist it in both senses about the shaft axis.  With a
//! four-fold symmetric routing every cable on a body has the same twist
//! sense and the free bearing rotation can never be balanced.
//!
//! Upward cables leave their rod through a fairlead part-way along it, so
//! their twist arm is shorter than that of the downward cables.  With equal
//! arms the twist-to-lift ratios of the up and down pairs coincide when a
//! plate sits at mid-height, which puts a singular plane straight through
//! the frame centre.  With the shorter up arm that plane moves to roughly
//! z = 1.29 m and a plate below it can be held up by positive tensions.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use crate::mechanism::{ApertureMap, SpringParams, WinderMap};
use crate::model::{Attachment, BodyId, BodyShape, ChainGeometry, DesignSpec, MassProperties, RobotGeometry, Variant};
use crate::scenario::{Scenario, SimulationSettings};

pub const ROD_RADIUS: f64 = 0.15;
pub const LEAD: f64 = 0.05;
pub const STROKE: [f64; 2] = [0.0, 0.20];
/// Fraction of the rod radius at which upward cables are attached (A/B).
pub const UP_FAIRLEAD: f64 = 0.55;

#[derive(Clone, Copy)]
enum Corner {
    C45,
    C135,
    C225,
    C315,
}

fn anchor(corner: Corner, upper: bool) -> [f64; 3] {
    let z = if upper { 2.0 } else { 0.0 };
    match corner {
        Corner::C45 => [1.0, 1.0, z],
        Corner::C135 => [-1.0, 1.0, z],
        Corner::C225 => [-1.0, -1.0, z],
        Corner::C315 => [1.0, -1.0, z],
    }
}

fn rod(deg: u32, r: f64) -> [f64; 3] {
    match deg {
        0 => [r, 0.0, 0.0],
        90 => [0.0, r, 0.0],
        180 => [-r, 0.0, 0.0],
        270 => [0.0, -r, 0.0],
        _ => unreachable!(),
    }
}

fn rod_tips(r: f64) -> Vec<[f64; 3]> {
    [0, 90, 180, 270].into_iter().map(|d| rod(d, r)).collect()
}

fn plate(r: f64) -> BodyShape {
    BodyShape { center: [0.0; 3], half_extents: [0.05, 0.05, 0.02], rod_tips: rod_tips(r) }
}

/// Canonical geometry for `variant` with rods of radius `rod_radius`.
pub fn geometry(variant: Variant, rod_radius: f64) -> RobotGeometry {
    use Corner::*;
    let r = rod_radius;
    // (body, rod angle, anchor corner, upper anchor?)
    let routing: [(BodyId, u32, Corner, bool); 8] = match variant {
        Variant::CRotatableGripper => [
            (BodyId::Upper, 0, C45, true),
            (BodyId::Upper, 180, C225, true),
            (BodyId::Upper, 90, C315, true),
            (BodyId::Upper, 270, C135, true),
            (BodyId::Middle, 0, C315, false),
            (BodyId::Middle, 180, C135, false),
            (BodyId::Lower, 90, C45, false),
            (BodyId::Lower, 270, C225, false),
        ],
        _ => [
            (BodyId::Upper, 0, C45, true),
            (BodyId::Upper, 180, C225, true),
            (BodyId::Upper, 90, C45, false),
            (BodyId::Upper, 270, C225, false),
            (BodyId::Lower, 90, C135, true),
            (BodyId::Lower, 270, C315, true),
            (BodyId::Lower, 0, C315, false),
            (BodyId::Lower, 180, C135, false),
        ],
    };
    let anchors = routing.iter().map(|&(_, _, c, up)| anchor(c, up)).collect();
    let attachments = routing
        .iter()
        .map(|&(body, deg, _, up)| {
            let arm = if up && variant != Variant::CRotatableGripper { UP_FAIRLEAD * r } else { r };
            Attachment { body, point: rod(deg, arm) }
        })
        .collect();

    let mut bodies = BTreeMap::new();
    for &b in variant.bodies() {
        let shape = if b == BodyId::Payload {
            BodyShape { center: [0.0; 3], half_extents: [0.05; 3], rod_tips: Vec::new() }
        } else {
            plate(r)
        };
        bodies.insert(b, shape);
    }
    RobotGeometry {
        anchors,
        attachments,
        bodies,
        rod_radius: r,
        chain: ChainGeometry {
            axial_spacing: 0.10,
            payload_drop: 0.15,
            lower_spacing: if variant == Variant::CRotatableGripper { 0.35 } else { 0.0 },
        },
    }
}

fn spring() -> SpringParams {
    SpringParams { stiffness: 500.0, free_extension: 0.20, min_extension: 0.0 }
}

fn aperture() -> ApertureMap {
    ApertureMap::new(vec![[0.0, 0.0], [0.02, 0.0], [0.20, 0.08]])
}

pub fn design(variant: Variant) -> DesignSpec {
    let plate_mass =
        MassProperties { mass: 0.5, inertia: [[0.004, 0.0, 0.0], [0.0, 0.004, 0.0], [0.0, 0.0, 0.006]], com: [0.0; 3] };
    // 2 kg cube, 0.1 m side: m a^2 / 6
    let payload_mass = MassProperties {
        mass: 2.0,
        inertia: [[2.0 * 0.01 / 6.0, 0.0, 0.0], [0.0, 2.0 * 0.01 / 6.0, 0.0], [0.0, 0.0, 2.0 * 0.01 / 6.0]],
        com: [0.0; 3],
    };
    let masses = variant
        .bodies()
        .iter()
        .map(|&b| (b, if b == BodyId::Payload { payload_mass.clone() } else { plate_mass.clone() }))
        .collect();
    let c = variant == Variant::CRotatableGripper;
    DesignSpec {
        variant,
        lead: matches!(variant, Variant::AScrew | Variant::CRotatableGripper).then_some(LEAD),
        winder: (variant == Variant::AWinder).then_some(WinderMap::new(TAU, 0.1)),
        springs: if c { vec![spring(), spring()] } else { vec![spring()] },
        aperture_map: variant.has_gripper().then(aperture),
        stroke_limits: if c { vec![STROKE, STROKE] } else { vec![STROKE] },
        tension_bounds: [5.0, 500.0],
        masses,
        gravity: [0.0, 0.0, -9.81],
    }
}

pub fn simulation(variant: Variant) -> SimulationSettings {
    let mut sim = SimulationSettings::default();
    match variant {
        Variant::CRotatableGripper => {
            sim.reference_position = [0.0, 0.0, 1.2];
            sim.nominal_internal = [0.1, 0.1];
        }
        // s = 0 is a winder reversal; rest a quarter traverse away from it.
        Variant::AWinder => sim.nominal_internal = [0.025, 0.0],
        _ => {}
    }
    sim
}

pub fn scenario(variant: Variant) -> Scenario {
    Scenario { geometry: geometry(variant, ROD_RADIUS), design: design(variant), simulation: simulation(variant) }
}
