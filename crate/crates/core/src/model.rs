//! Geometry, configuration spaces and the kinematic chain of the three
//! end-effector designs.
//!
//! Every design has eight cables and an eight-coordinate configuration:
//! six for the pose of the reference body plus two internal coordinates.
//!
//! | variant | reference body | internal\[0\] | internal\[1\] |
//! |---------|----------------|---------------|---------------|
//! | A (screw / winder) | lower | `s` axial compression | `psi` bearing rotation |
//! | B (gripper) | lower | `s` axial compression | `psi` bearing rotation |
//! | C (rotatable gripper) | upper | `s1` grip translation | `s2` rotation translation |
//!
//! Each non-reference body sits at `T_z(axial) * R_z(angle)` relative to the
//! reference body, with `axial` and `angle` functions of the internal
//! coordinates only.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanism::{ApertureMap, ScrewMap, SpringParams, WinderMap};

pub const NUM_CABLES: usize = 8;
pub const NUM_COORDS: usize = 8;

pub type Vec8 = nalgebra::SVector<f64, NUM_COORDS>;
pub type Mat8 = nalgebra::SMatrix<f64, NUM_COORDS, NUM_COORDS>;

/// Rigid pose: world position and unit-quaternion orientation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "PoseRepr", into = "PoseRepr")]
pub struct Pose {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseRepr {
    position: [f64; 3],
    /// `[w, x, y, z]`
    #[serde(default = "identity_quat")]
    orientation: [f64; 4],
}

fn identity_quat() -> [f64; 4] {
    [1.0, 0.0, 0.0, 0.0]
}

impl From<PoseRepr> for Pose {
    fn from(r: PoseRepr) -> Self {
        let [w, x, y, z] = r.orientation;
        Pose {
            position: Vector3::from(r.position),
            orientation: UnitQuaternion::from_quaternion(Quaternion::new(w, x, y, z)),
        }
    }
}

impl From<Pose> for PoseRepr {
    fn from(p: Pose) -> Self {
        let q = p.orientation.quaternion();
        PoseRepr { position: p.position.into(), orientation: [q.w, q.i, q.j, q.k] }
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self::from_position(Vector3::zeros())
    }

    pub fn from_position(position: Vector3<f64>) -> Self {
        Self { position, orientation: UnitQuaternion::identity() }
    }

    pub fn new(position: Vector3<f64>, orientation: UnitQuaternion<f64>) -> Self {
        Self { position, orientation: renormalize(orientation) }
    }

    /// `self * other`: `other` is expressed in the frame of `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            position: self.position + self.orientation * other.position,
            orientation: renormalize(self.orientation * other.orientation),
        }
    }

    pub fn transform_point(&self, local: &Vector3<f64>) -> Vector3<f64> {
        self.position + self.orientation * local
    }

    pub fn inverse(&self) -> Pose {
        let inv = self.orientation.inverse();
        Pose { position: -(inv * self.position), orientation: inv }
    }

    /// Yaw angle of the orientation about the world z axis.
    pub fn yaw(&self) -> f64 {
        self.orientation.euler_angles().2
    }
}

fn renormalize(q: UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    let n = q.quaternion().norm();
    if (n - 1.0).abs() > f64::EPSILON {
        UnitQuaternion::new_normalize(*q.quaternion())
    } else {
        q
    }
}

/// Mechanism variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "a-screw")]
    AScrew,
    #[serde(rename = "a-winder")]
    AWinder,
    #[serde(rename = "b-gripper")]
    BGripper,
    #[serde(rename = "c-rotatable-gripper")]
    CRotatableGripper,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::AScrew, Variant::AWinder, Variant::BGripper, Variant::CRotatableGripper];

    pub fn reference_body(self) -> BodyId {
        match self {
            Variant::CRotatableGripper => BodyId::Upper,
            _ => BodyId::Lower,
        }
    }

    pub fn bodies(self) -> &'static [BodyId] {
        match self {
            Variant::CRotatableGripper => &[BodyId::Upper, BodyId::Middle, BodyId::Lower, BodyId::Payload],
            _ => &[BodyId::Lower, BodyId::Upper, BodyId::Payload],
        }
    }

    /// Number of internal translational coordinates (one spring and one
    /// stroke interval each).
    pub fn translational_internals(self) -> usize {
        match self {
            Variant::CRotatableGripper => 2,
            _ => 1,
        }
    }

    /// Whether generalized coordinate `j` is an angle (rad) rather than a
    /// length (m).
    pub fn is_rotational_coordinate(self, j: usize) -> bool {
        match j {
            3..=5 => true,
            7 => self != Variant::CRotatableGripper,
            _ => false,
        }
    }

    pub fn has_gripper(self) -> bool {
        matches!(self, Variant::BGripper | Variant::CRotatableGripper)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::AScrew => "a-screw",
            Variant::AWinder => "a-winder",
            Variant::BGripper => "b-gripper",
            Variant::CRotatableGripper => "c-rotatable-gripper",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BodyId {
    Lower,
    Upper,
    Middle,
    Payload,
}

impl fmt::Display for BodyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BodyId::Lower => "lower",
            BodyId::Upper => "upper",
            BodyId::Middle => "middle",
            BodyId::Payload => "payload",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MassProperties {
    /// kg
    pub mass: f64,
    /// Inertia about the centre of mass in body axes, kg·m².
    pub inertia: [[f64; 3]; 3],
    /// Centre of mass in the body frame, m.
    #[serde(default)]
    pub com: [f64; 3],
}

impl MassProperties {
    pub fn inertia_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|r, c| self.inertia[r][c])
    }

    pub fn com_vector(&self) -> Vector3<f64> {
        Vector3::from(self.com)
    }
}

/// Mechanism parameters of one design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSpec {
    pub variant: Variant,
    /// m/rev, for the screw variants (A-screw, C).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lead: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub winder: Option<WinderMap>,
    /// One spring per internal translational coordinate.
    pub springs: Vec<SpringParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aperture_map: Option<ApertureMap>,
    /// `[s_min, s_max]` per internal translational coordinate.
    pub stroke_limits: Vec<[f64; 2]>,
    /// `[t_min, t_max]`, N.
    pub tension_bounds: [f64; 2],
    pub masses: BTreeMap<BodyId, MassProperties>,
    pub gravity: [f64; 3],
}

/// Transmission from the spring stroke to the payload rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coupling {
    Screw(ScrewMap),
    Winder(WinderMap),
    None,
}

impl Coupling {
    pub fn angle(&self, s: f64) -> f64 {
        match self {
            Coupling::Screw(m) => m.angle(s),
            Coupling::Winder(m) => m.angle(s),
            Coupling::None => 0.0,
        }
    }

    pub fn slope(&self, s: f64) -> f64 {
        match self {
            Coupling::Screw(m) => m.slope(s),
            Coupling::Winder(m) => m.slope(s),
            Coupling::None => 0.0,
        }
    }
}

impl DesignSpec {
    pub fn coupling(&self) -> Coupling {
        match self.variant {
            Variant::AScrew | Variant::CRotatableGripper => {
                Coupling::Screw(ScrewMap::new(self.lead.unwrap_or(f64::NAN)))
            }
            Variant::AWinder => {
                self.winder.map(Coupling::Winder).unwrap_or(Coupling::Winder(WinderMap::new(f64::NAN, f64::NAN)))
            }
            Variant::BGripper => Coupling::None,
        }
    }

    pub fn gravity_vector(&self) -> Vector3<f64> {
        Vector3::from(self.gravity)
    }

    pub fn t_min(&self) -> f64 {
        self.tension_bounds[0]
    }

    pub fn t_max(&self) -> f64 {
        self.tension_bounds[1]
    }

    /// Which internal coordinates are translational, paired with their
    /// spring and stroke index.
    pub fn translational_indices(&self) -> &'static [usize] {
        match self.variant {
            Variant::CRotatableGripper => &[0, 1],
            _ => &[0],
        }
    }

    /// The internal coordinate that drives the gripper, if any.
    pub fn grip_coordinate(&self) -> Option<usize> {
        match self.variant {
            Variant::BGripper | Variant::CRotatableGripper => Some(0),
            _ => None,
        }
    }

    pub fn check_stroke(&self, internal: &[f64; 2]) -> Result<()> {
        for (k, &idx) in self.translational_indices().iter().enumerate() {
            let [min, max] = self.stroke_limits[k];
            let value = internal[idx];
            if !(value >= min && value <= max) {
                return Err(Error::OutOfStroke { index: idx, value, min, max });
            }
        }
        Ok(())
    }

    /// Nearest point of the stroke box; non-finite values are left alone.
    pub fn clamp_to_stroke(&self, internal: &mut [f64; 2]) {
        for (k, &idx) in self.translational_indices().iter().enumerate() {
            if let Some(&[min, max]) = self.stroke_limits.get(k) {
                if internal[idx].is_finite() && min <= max {
                    internal[idx] = internal[idx].clamp(min, max);
                }
            }
        }
    }

    /// Gripper opening for the current grip compression.
    pub fn grip_aperture(&self, s: f64) -> Result<f64> {
        let map = self
            .aperture_map
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument(format!("{} has no gripper", self.variant)))?;
        let [min, max] = self.stroke_limits[0];
        if !(s >= min && s <= max) {
            return Err(Error::OutOfStroke { index: 0, value: s, min, max });
        }
        Ok(map.aperture(s))
    }

    pub fn aperture_slope(&self, s: f64) -> Result<f64> {
        self.grip_aperture(s)?;
        Ok(self.aperture_map.as_ref().map(|m| m.slope(s)).unwrap_or(0.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Attachment {
    pub body: BodyId,
    /// Attachment point in the body frame, m.
    pub point: [f64; 3],
}

impl Attachment {
    pub fn local(&self) -> Vector3<f64> {
        Vector3::from(self.point)
    }
}

/// Axis-aligned collision box in the body frame plus the rod tips.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodyShape {
    #[serde(default)]
    pub center: [f64; 3],
    pub half_extents: [f64; 3],
    #[serde(default)]
    pub rod_tips: Vec<[f64; 3]>,
}

/// Axial distances of the kinematic chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainGeometry {
    /// Distance between neighbouring body origins at zero stroke, m.
    pub axial_spacing: f64,
    /// Distance from the payload carrier down to the payload centre, m.
    pub payload_drop: f64,
    /// Design C: distance from the upper body down to the lower body at
    /// zero grip stroke, m.
    #[serde(default)]
    pub lower_spacing: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotGeometry {
    pub anchors: Vec<[f64; 3]>,
    pub attachments: Vec<Attachment>,
    pub bodies: BTreeMap<BodyId, BodyShape>,
    pub rod_radius: f64,
    pub chain: ChainGeometry,
}

impl RobotGeometry {
    pub fn anchor(&self, i: usize) -> Vector3<f64> {
        Vector3::from(self.anchors[i])
    }
}

/// Configuration: pose of the reference body plus two internal coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Configuration {
    pub base_pose: Pose,
    pub internal: [f64; 2],
}

impl Configuration {
    pub fn new(base_pose: Pose, internal: [f64; 2]) -> Self {
        Self { base_pose, internal }
    }

    pub fn at_position(position: Vector3<f64>, internal: [f64; 2]) -> Self {
        Self::new(Pose::from_position(position), internal)
    }

    /// `q ⊕ delta`: translate in world axes, rotate by a body-frame
    /// rotation vector, add to the internal coordinates.
    pub fn retract(&self, delta: &Vec8) -> Configuration {
        let rot = UnitQuaternion::from_scaled_axis(Vector3::new(delta[3], delta[4], delta[5]));
        Configuration {
            base_pose: Pose {
                position: self.base_pose.position + Vector3::new(delta[0], delta[1], delta[2]),
                orientation: renormalize(self.base_pose.orientation * rot),
            },
            internal: [self.internal[0] + delta[6], self.internal[1] + delta[7]],
        }
    }

    /// Inverse of [`Configuration::retract`]: the `delta` with
    /// `self.retract(delta) == other`.
    pub fn local_difference(&self, other: &Configuration) -> Vec8 {
        let dp = other.base_pose.position - self.base_pose.position;
        let dr = (self.base_pose.orientation.inverse() * other.base_pose.orientation).scaled_axis();
        Vec8::from_column_slice(&[
            dp.x,
            dp.y,
            dp.z,
            dr.x,
            dr.y,
            dr.z,
            other.internal[0] - self.internal[0],
            other.internal[1] - self.internal[1],
        ])
    }

    pub fn is_finite(&self) -> bool {
        self.base_pose.position.iter().all(|v| v.is_finite())
            && self.base_pose.orientation.coords.iter().all(|v| v.is_finite())
            && self.internal.iter().all(|v| v.is_finite())
    }
}

/// Pose of a body relative to the reference body, `T_z(axial) R_z(angle)`,
/// with gradients with respect to the two internal coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeMotion {
    pub axial: f64,
    pub axial_grad: [f64; 2],
    pub angle: f64,
    pub angle_grad: [f64; 2],
}

impl RelativeMotion {
    const FIXED: RelativeMotion = RelativeMotion { axial: 0.0, axial_grad: [0.0; 2], angle: 0.0, angle_grad: [0.0; 2] };

    pub fn pose(&self) -> Pose {
        Pose {
            position: Vector3::new(0.0, 0.0, self.axial),
            orientation: UnitQuaternion::from_axis_angle(&Vector3::z_axis(), self.angle),
        }
    }
}

/// Relative motion of `body` with respect to the reference body.
pub fn relative_motion(
    geometry: &RobotGeometry,
    spec: &DesignSpec,
    internal: &[f64; 2],
    body: BodyId,
) -> Result<RelativeMotion> {
    if !spec.variant.bodies().contains(&body) {
        return Err(Error::UnknownBody(body));
    }
    let chain = &geometry.chain;
    let coupling = spec.coupling();
    let m = match spec.variant {
        Variant::AScrew | Variant::AWinder | Variant::BGripper => {
            let [s, psi] = *internal;
            match body {
                BodyId::Lower => RelativeMotion::FIXED,
                BodyId::Upper => RelativeMotion {
                    axial: chain.axial_spacing + s,
                    axial_grad: [1.0, 0.0],
                    angle: psi,
                    angle_grad: [0.0, 1.0],
                },
                BodyId::Payload => RelativeMotion {
                    axial: -chain.payload_drop,
                    axial_grad: [0.0, 0.0],
                    angle: psi - coupling.angle(s),
                    angle_grad: [-coupling.slope(s), 1.0],
                },
                BodyId::Middle => unreachable!(),
            }
        }
        Variant::CRotatableGripper => {
            let [s1, s2] = *internal;
            match body {
                BodyId::Upper => RelativeMotion::FIXED,
                BodyId::Middle => RelativeMotion {
                    axial: -(chain.axial_spacing + s2),
                    axial_grad: [0.0, -1.0],
                    angle: 0.0,
                    angle_grad: [0.0, 0.0],
                },
                BodyId::Lower => RelativeMotion {
                    axial: -(chain.lower_spacing + s1),
                    axial_grad: [-1.0, 0.0],
                    angle: 0.0,
                    angle_grad: [0.0, 0.0],
                },
                BodyId::Payload => RelativeMotion {
                    axial: -(chain.lower_spacing + s1 + chain.payload_drop),
                    axial_grad: [-1.0, 0.0],
                    angle: coupling.angle(s2),
                    angle_grad: [0.0, coupling.slope(s2)],
                },
            }
        }
    };
    Ok(m)
}

/// World pose of `body` at configuration `q`.
pub fn body_pose(geometry: &RobotGeometry, spec: &DesignSpec, q: &Configuration, body: BodyId) -> Result<Pose> {
    spec.check_stroke(&q.internal)?;
    let rel = relative_motion(geometry, spec, &q.internal, body)?;
    Ok(q.base_pose.compose(&rel.pose()))
}

/// World coordinates of all eight cable attachment points.
pub fn attachment_points(
    geometry: &RobotGeometry,
    spec: &DesignSpec,
    q: &Configuration,
) -> Result<[Vector3<f64>; NUM_CABLES]> {
    if geometry.attachments.len() != NUM_CABLES {
        return Err(Error::DimensionMismatch(format!(
            "expected {NUM_CABLES} attachments, found {}",
            geometry.attachments.len()
        )));
    }
    spec.check_stroke(&q.internal)?;
    let mut poses: BTreeMap<BodyId, Pose> = BTreeMap::new();
    let mut out = [Vector3::zeros(); NUM_CABLES];
    for (i, att) in geometry.attachments.iter().enumerate() {
        let pose = match poses.get(&att.body) {
            Some(p) => *p,
            None => {
                let rel = relative_motion(geometry, spec, &q.internal, att.body)?;
                let p = q.base_pose.compose(&rel.pose());
                poses.insert(att.body, p);
                p
            }
        };
        out[i] = pose.transform_point(&att.local());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn approx_vec(a: &Vector3<f64>, b: &Vector3<f64>, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn upper_body_sits_at_nominal_spacing() {
        let sc = canonical::scenario(Variant::AScrew);
        let q = Configuration::at_position(Vector3::zeros(), [0.0, 0.0]);
        let p = body_pose(&sc.geometry, &sc.design, &q, BodyId::Upper).unwrap();
        assert!(approx_vec(&p.position, &Vector3::new(0.0, 0.0, 0.10), 1e-15));
        assert!(p.orientation.angle() < 1e-15);
    }

    #[test]
    fn one_lead_turns_payload_one_revolution_backwards() {
        let sc = canonical::scenario(Variant::AScrew);
        let q = Configuration::at_position(Vector3::zeros(), [0.05, 0.0]);
        let rel = relative_motion(&sc.geometry, &sc.design, &q.internal, BodyId::Payload).unwrap();
        assert!((rel.angle + 2.0 * PI).abs() < 1e-12);
        // the payload box corner comes back to where it started
        let p = body_pose(&sc.geometry, &sc.design, &q, BodyId::Payload).unwrap();
        let corner = Vector3::new(0.05, 0.05, 0.0);
        let p0 = body_pose(
            &sc.geometry,
            &sc.design,
            &Configuration::at_position(Vector3::zeros(), [0.0, 0.0]),
            BodyId::Payload,
        )
        .unwrap();
        assert!(approx_vec(&p.transform_point(&corner), &p0.transform_point(&corner), 1e-12));
    }

    #[test]
    fn half_lead_turns_c_gripper_half_revolution() {
        let sc = canonical::scenario(Variant::CRotatableGripper);
        let q = Configuration::at_position(Vector3::zeros(), [0.05, 0.025]);
        let rel = relative_motion(&sc.geometry, &sc.design, &q.internal, BodyId::Payload).unwrap();
        assert!((rel.angle - PI).abs() < 1e-12);
        let p = body_pose(&sc.geometry, &sc.design, &q, BodyId::Payload).unwrap();
        assert!((p.orientation.angle() - PI).abs() < 1e-9);
    }

    #[test]
    fn body_pose_errors() {
        let sc = canonical::scenario(Variant::AScrew);
        let q = Configuration::at_position(Vector3::zeros(), [0.0, 0.0]);
        assert!(matches!(
            body_pose(&sc.geometry, &sc.design, &q, BodyId::Middle),
            Err(Error::UnknownBody(BodyId::Middle))
        ));
        let q = Configuration::at_position(Vector3::zeros(), [0.25, 0.0]);
        match body_pose(&sc.geometry, &sc.design, &q, BodyId::Upper) {
            Err(Error::OutOfStroke { max, .. }) => assert_eq!(max, 0.2),
            other => panic!("expected stroke error, got {other:?}"),
        }
    }

    #[test]
    fn attachment_points_match_hand_composed_transforms() {
        // Oracle: write out each body's world transform explicitly as a 4x4
        // homogeneous matrix product instead of going through Pose.
        let sc = canonical::scenario(Variant::AScrew);
        let (s, psi) = (0.07, 0.3);
        let yaw = 0.2;
        let base_rot = nalgebra::Rotation3::from_axis_angle(&Vector3::z_axis(), yaw);
        let base = nalgebra::Isometry3::from_parts(nalgebra::Translation3::new(0.1, -0.2, 1.0), base_rot.into());
        let q = Configuration::new(Pose::new(Vector3::new(0.1, -0.2, 1.0), base_rot.into()), [s, psi]);
        let pts = attachment_points(&sc.geometry, &sc.design, &q).unwrap();
        let lower_h = base.to_homogeneous();
        let upper_h = lower_h
            * nalgebra::Matrix4::new_translation(&Vector3::new(0.0, 0.0, 0.10 + s))
            * nalgebra::Rotation3::from_axis_angle(&Vector3::z_axis(), psi).to_homogeneous();
        for (i, att) in sc.geometry.attachments.iter().enumerate() {
            let h = match att.body {
                BodyId::Lower => lower_h,
                BodyId::Upper => upper_h,
                _ => unreachable!(),
            };
            let expected = h * nalgebra::Vector4::new(att.point[0], att.point[1], att.point[2], 1.0);
            assert!(approx_vec(&pts[i], &expected.xyz(), 1e-12), "cable {i}");
        }
    }

    #[test]
    fn z_translation_shifts_all_points() {
        let sc = canonical::scenario(Variant::BGripper);
        let q0 = Configuration::at_position(Vector3::new(0.0, 0.0, 1.0), [0.05, 0.1]);
        let mut q1 = q0;
        q1.base_pose.position.z += 0.3;
        let a = attachment_points(&sc.geometry, &sc.design, &q0).unwrap();
        let b = attachment_points(&sc.geometry, &sc.design, &q1).unwrap();
        for i in 0..NUM_CABLES {
            assert!(approx_vec(&(b[i] - a[i]), &Vector3::new(0.0, 0.0, 0.3), 1e-14));
        }
    }

    #[test]
    fn quarter_yaw_keeps_attachments_on_rods() {
        // A 90° yaw carries every attachment onto another rod of the same
        // body at the same radius.
        let sc = canonical::scenario(Variant::AScrew);
        let q0 = Configuration::at_position(Vector3::new(0.0, 0.0, 1.0), [0.0, 0.0]);
        let q1 = Configuration::new(
            Pose::new(Vector3::new(0.0, 0.0, 1.0), UnitQuaternion::from_axis_angle(&Vector3::z_axis(), FRAC_PI_2)),
            [0.0, 0.0],
        );
        let a = attachment_points(&sc.geometry, &sc.design, &q0).unwrap();
        let b = attachment_points(&sc.geometry, &sc.design, &q1).unwrap();
        for i in 0..NUM_CABLES {
            let expected = Vector3::new(-a[i].y, a[i].x, a[i].z);
            assert!(approx_vec(&b[i], &expected, 1e-12));
            assert!(b[i].x.abs() < 1e-12 || b[i].y.abs() < 1e-12);
            assert!((b[i].xy().norm() - a[i].xy().norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn retract_and_local_difference_are_inverse() {
        let q = Configuration::new(
            Pose::new(Vector3::new(0.1, 0.2, 1.1), UnitQuaternion::from_euler_angles(0.1, -0.2, 0.3)),
            [0.05, 0.4],
        );
        let d = Vec8::from_column_slice(&[0.01, -0.02, 0.03, 0.02, -0.01, 0.05, 0.001, -0.1]);
        let back = q.local_difference(&q.retract(&d));
        assert!((back - d).norm() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn config_strategy() -> impl Strategy<Value = ([f64; 3], [f64; 3], f64, f64)> {
            (prop::array::uniform3(-0.5f64..0.5), prop::array::uniform3(-1.0f64..1.0), 0.0f64..0.2, -3.0f64..3.0)
        }

        proptest! {
            #[test]
            fn bodies_stay_rigid((p, r, s, psi) in config_strategy()) {
                for variant in Variant::ALL {
                    let sc = canonical::scenario(variant);
                    let internal = if variant == Variant::CRotatableGripper { [s, 0.2 - s] } else { [s, psi] };
                    let q = Configuration::new(
                        Pose::new(Vector3::from(p) + Vector3::new(0.0, 0.0, 1.0), UnitQuaternion::from_scaled_axis(Vector3::from(r))),
                        internal,
                    );
                    let local_a = Vector3::new(0.3, -0.1, 0.2);
                    let local_b = Vector3::new(-0.2, 0.4, -0.05);
                    for &body in variant.bodies() {
                        let pose = body_pose(&sc.geometry, &sc.design, &q, body).unwrap();
                        let d = (pose.transform_point(&local_a) - pose.transform_point(&local_b)).norm();
                        prop_assert!((d - (local_a - local_b).norm()).abs() <= 1e-12);
                        prop_assert!((pose.orientation.quaternion().norm() - 1.0).abs() <= 1e-12);
                    }
                }
            }

            #[test]
            fn chain_grouping_is_associative((p, r, s, psi) in config_strategy()) {
                let base = Pose::new(Vector3::from(p), UnitQuaternion::from_scaled_axis(Vector3::from(r)));
                let a = RelativeMotion { axial: 0.1 + s, axial_grad: [0.0; 2], angle: psi, angle_grad: [0.0; 2] }.pose();
                let b = RelativeMotion { axial: -0.15, axial_grad: [0.0; 2], angle: -psi * 2.0, angle_grad: [0.0; 2] }.pose();
                let left = base.compose(&a).compose(&b);
                let right = base.compose(&a.compose(&b));
                prop_assert!((left.position - right.position).norm() <= 1e-12);
                prop_assert!(left.orientation.angle_to(&right.orientation) <= 1e-12);
            }
        }
    }
}
