//! Inverse/forward kinematics over the eight-coordinate configuration space,
//! the cable-length Jacobian, conditioning and singularity detection.

use nalgebra::{Matrix3, SMatrix, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    attachment_points, relative_motion, BodyId, Configuration, Coupling, DesignSpec, Mat8, RobotGeometry, Vec8,
    NUM_CABLES,
};
use crate::scenario::SimulationSettings;

pub type Mat3x8 = SMatrix<f64, 3, 8>;

/// Eight cable lengths, m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CableLengths(pub Vec8);

impl CableLengths {
    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }
}

/// `∂length_i/∂q_j` with a record of which columns are angles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobianMatrix {
    pub matrix: Mat8,
    pub rotational: [bool; 8],
}

fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Linear and angular velocity Jacobians (world frame) of a point fixed to
/// `body`: `ẋ = Jv v`, `ω = Jw v` for generalized velocity `v`.
pub fn point_jacobians(
    geometry: &RobotGeometry,
    spec: &DesignSpec,
    q: &Configuration,
    body: BodyId,
    local: &Vector3<f64>,
) -> Result<(Mat3x8, Mat3x8)> {
    let rel = relative_motion(geometry, spec, &q.internal, body)?;
    let rot = q.base_pose.orientation.to_rotation_matrix().into_inner();
    let rel_pose = rel.pose();
    let rotated_local = rel_pose.orientation * local;
    let y = rel_pose.position + rotated_local;
    let ez = Vector3::z();

    let mut jv = Mat3x8::zeros();
    let mut jw = Mat3x8::zeros();
    jv.fixed_view_mut::<3, 3>(0, 0).copy_from(&Matrix3::identity());
    jv.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-rot * skew(&y)));
    jw.fixed_view_mut::<3, 3>(0, 3).copy_from(&rot);
    for j in 0..2 {
        let dy = ez * rel.axial_grad[j] + ez.cross(&rotated_local) * rel.angle_grad[j];
        jv.set_column(6 + j, &(rot * dy));
        jw.set_column(6 + j, &(rot * ez * rel.angle_grad[j]));
    }
    Ok((jv, jw))
}

/// Cable lengths and unit directions (attachment → anchor).
pub fn cable_state(
    geometry: &RobotGeometry,
    spec: &DesignSpec,
    q: &Configuration,
) -> Result<([f64; NUM_CABLES], [Vector3<f64>; NUM_CABLES])> {
    let pts = attachment_points(geometry, spec, q)?;
    let mut lengths = [0.0; NUM_CABLES];
    let mut dirs = [Vector3::zeros(); NUM_CABLES];
    for i in 0..NUM_CABLES {
        let d = geometry.anchor(i) - pts[i];
        lengths[i] = d.norm();
        dirs[i] = d / lengths[i];
    }
    Ok((lengths, dirs))
}

pub fn inverse_kinematics(geometry: &RobotGeometry, spec: &DesignSpec, q: &Configuration) -> Result<CableLengths> {
    let (lengths, _) = cable_state(geometry, spec, q)?;
    Ok(CableLengths(Vec8::from(lengths)))
}

/// Analytic cable-length Jacobian.
pub fn jacobian(geometry: &RobotGeometry, spec: &DesignSpec, q: &Configuration) -> Result<JacobianMatrix> {
    let (_, dirs) = cable_state(geometry, spec, q)?;
    let mut matrix = Mat8::zeros();
    for (i, att) in geometry.attachments.iter().enumerate() {
        let (jv, _) = point_jacobians(geometry, spec, q, att.body, &att.local())?;
        let row = -(dirs[i].transpose() * jv);
        matrix.set_row(i, &row);
    }
    let mut rotational = [false; 8];
    for (j, r) in rotational.iter_mut().enumerate() {
        *r = spec.variant.is_rotational_coordinate(j);
    }
    Ok(JacobianMatrix { matrix, rotational })
}

/// 2-norm condition number after dividing the rotational columns by
/// `characteristic_length`.  Numerically singular matrices give
/// `f64::INFINITY`.
pub fn condition_number(j: &JacobianMatrix, characteristic_length: f64) -> f64 {
    let mut scaled = j.matrix;
    for (c, &rot) in j.rotational.iter().enumerate() {
        if rot {
            let col = scaled.column(c) / characteristic_length;
            scaled.set_column(c, &col);
        }
    }
    if scaled.iter().any(|v| !v.is_finite()) {
        return f64::INFINITY;
    }
    let sv = scaled.singular_values();
    let max = sv.max();
    let min = sv.min();
    if max == 0.0 || min <= max * f64::EPSILON * 8.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Whether the stroke-to-rotation transmission is at a slope reversal
/// (self-reversing winder), where the payload rotation direction cannot be
/// controlled.
pub fn transmission_singular(spec: &DesignSpec, q: &Configuration, band: f64) -> bool {
    match spec.coupling() {
        Coupling::Winder(w) => w.is_reversal(q.internal[0], band),
        _ => false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularityCriteria {
    pub condition_threshold: f64,
    pub characteristic_length: f64,
    pub reversal_band: f64,
}

impl From<&SimulationSettings> for SingularityCriteria {
    fn from(s: &SimulationSettings) -> Self {
        Self {
            condition_threshold: s.singularity_threshold,
            characteristic_length: s.characteristic_length,
            reversal_band: s.reversal_band,
        }
    }
}

impl Default for SingularityCriteria {
    fn default() -> Self {
        (&SimulationSettings::default()).into()
    }
}

/// True if `q` is a kinematic or transmission singularity.
pub fn is_singular(
    geometry: &RobotGeometry,
    spec: &DesignSpec,
    q: &Configuration,
    crit: &SingularityCriteria,
) -> Result<bool> {
    if transmission_singular(spec, q, crit.reversal_band) {
        return Ok(true);
    }
    let j = jacobian(geometry, spec, q)?;
    Ok(condition_number(&j, crit.characteristic_length) > crit.condition_threshold)
}

/// Indices of `path` that are singular.  Invalid configurations are skipped.
pub fn detect_singularities(
    geometry: &RobotGeometry,
    spec: &DesignSpec,
    path: &[Configuration],
    crit: &SingularityCriteria,
) -> Vec<usize> {
    path.iter()
        .enumerate()
        .filter(|(_, q)| is_singular(geometry, spec, q, crit).unwrap_or(false))
        .map(|(k, _)| k)
        .collect()
}

/// Groups sorted indices into maximal runs of consecutive values.
pub fn singular_regions(indices: &[usize]) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = Vec::new();
    for &k in indices {
        match out.last_mut() {
            Some((_, end)) if *end + 1 == k => *end = k,
            _ => out.push((k, k)),
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FkOptions {
    pub max_iterations: usize,
    /// Required length residual (max norm), m.
    pub tolerance: f64,
    pub initial_damping: f64,
    pub criteria: SingularityCriteria,
}

impl Default for FkOptions {
    fn default() -> Self {
        Self { max_iterations: 100, tolerance: 1e-10, initial_damping: 1e-3, criteria: SingularityCriteria::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FkSolution {
    pub configuration: Configuration,
    pub iterations: usize,
    pub residual: f64,
}

/// Damped-Newton (Levenberg) forward kinematics from a warm start `q0`.
///
/// Iterates past `tolerance` until the residual stops improving so that
/// the returned configuration is as close to exact as the arithmetic allows.
pub fn forward_kinematics(
    geometry: &RobotGeometry,
    spec: &DesignSpec,
    lengths: &CableLengths,
    q0: &Configuration,
    opts: &FkOptions,
) -> Result<FkSolution> {
    let residual_of = |q: &Configuration| -> Result<Vec8> { Ok(inverse_kinematics(geometry, spec, q)?.0 - lengths.0) };
    let mut q = *q0;
    let mut r = residual_of(&q)?;
    let mut err = r.amax();
    let mut lambda = opts.initial_damping;
    let mut iterations = 0;
    // Stop once the residual is at round-off level.
    let polish = opts.tolerance * 1e-3;

    while iterations < opts.max_iterations && err > polish {
        iterations += 1;
        let j = jacobian(geometry, spec, &q)?;
        let cond = condition_number(&j, opts.criteria.characteristic_length);
        if !cond.is_finite() {
            return Err(Error::Singular { condition: cond });
        }
        let jt = j.matrix.transpose();
        let lhs = jt * j.matrix + Mat8::identity() * lambda;
        let rhs = -(jt * r);
        let Some(step) = lhs.lu().solve(&rhs) else {
            return Err(Error::Singular { condition: f64::INFINITY });
        };
        // Steps that leave the stroke are projected back onto it, so a
        // solution on a stroke limit is reachable.
        let mut trial = q.retract(&step);
        spec.clamp_to_stroke(&mut trial.internal);
        // Accept on the sum of squares, which is what the step decreases;
        // the max norm is only the stopping test and can stall at a kink.
        let accepted = match residual_of(&trial) {
            Ok(tr) if tr.norm() < r.norm() => Some(tr),
            _ => None,
        };
        match accepted {
            Some(tr) => {
                q = trial;
                r = tr;
                err = r.amax();
                lambda = (lambda * 0.5).max(1e-15);
            }
            None => {
                if err <= opts.tolerance {
                    break;
                }
                lambda *= 4.0;
            }
        }
    }

    if err > opts.tolerance {
        return Err(Error::NoConvergence { iterations, residual: err });
    }
    if transmission_singular(spec, &q, opts.criteria.reversal_band) {
        return Err(Error::Singular { condition: f64::INFINITY });
    }
    Ok(FkSolution { configuration: q, iterations, residual: err })
}
