//! Static equilibrium, the unique tension solution of the square system and
//! numerical stiffness.
//!
//! Conventions: `J = ∂l/∂q`, tensions are positive scalars and the cables
//! exert the generalized force `-Jᵀ t`.  Equilibrium is `Jᵀ t = w` where `w`
//! is the applied generalized force (gravity plus mechanism springs).

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{cable_state, jacobian, point_jacobians, JacobianMatrix};
use crate::model::{Configuration, DesignSpec, Mat8, RobotGeometry, Vec8, NUM_CABLES};

/// Generalized force aligned with the configuration coordinates
/// (N for lengths, N·m for angles).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GeneralizedWrench(pub Vec8);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TensionVector(pub Vec8);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundViolation {
    BelowMin,
    AboveMax,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CableViolation {
    pub cable: usize,
    pub tension: f64,
    pub kind: BoundViolation,
}

/// Bound check of a tension vector.  Feasibility is a verdict, not an error.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TensionVerdict {
    pub violations: Vec<CableViolation>,
}

impl TensionVerdict {
    pub fn check(t: &[f64], bounds: [f64; 2]) -> Self {
        let violations = t
            .iter()
            .enumerate()
            .filter_map(|(cable, &tension)| {
                let kind = if !(tension >= bounds[0]) {
                    BoundViolation::BelowMin
                } else if tension > bounds[1] {
                    BoundViolation::AboveMax
                } else {
                    return None;
                };
                Some(CableViolation { cable, tension, kind })
            })
            .collect();
        Self { violations }
    }

    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn any_low(&self) -> bool {
        self.violations.iter().any(|v| v.kind == BoundViolation::BelowMin)
    }

    pub fn any_high(&self) -> bool {
        self.violations.iter().any(|v| v.kind == BoundViolation::AboveMax)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensionSolution {
    pub tensions: TensionVector,
    pub verdict: TensionVerdict,
    /// `‖Jᵀ t − w‖∞`, N.
    pub residual: f64,
}

/// Applied generalized force: weight of every body by virtual work at its
/// centre of mass, plus the mechanism springs on the internal translational
/// coordinates.
pub fn generalized_load(geometry: &RobotGeometry, spec: &DesignSpec, q: &Configuration) -> Result<GeneralizedWrench> {
    spec.check_stroke(&q.internal)?;
    let g = spec.gravity_vector();
    let mut w = Vec8::zeros();
    for &body in spec.variant.bodies() {
        let Some(mp) = spec.masses.get(&body) else { continue };
        let (jv, _) = point_jacobians(geometry, spec, q, body, &mp.com_vector())?;
        w += jv.transpose() * (g * mp.mass);
    }
    for (k, &idx) in spec.translational_indices().iter().enumerate() {
        // Positive stroke compresses the spring, which pushes back.
        w[6 + idx] -= spec.springs[k].force_at_stroke(q.internal[idx])?;
    }
    Ok(GeneralizedWrench(w))
}

/// Gravity plus spring potential energy, J.
pub fn potential_energy(geometry: &RobotGeometry, spec: &DesignSpec, q: &Configuration) -> Result<f64> {
    let g = spec.gravity_vector();
    let mut v = 0.0;
    for &body in spec.variant.bodies() {
        let Some(mp) = spec.masses.get(&body) else { continue };
        let pose = crate::model::body_pose(geometry, spec, q, body)?;
        v -= mp.mass * g.dot(&pose.transform_point(&mp.com_vector()));
    }
    for (k, &idx) in spec.translational_indices().iter().enumerate() {
        v += spec.springs[k].energy_at_stroke(q.internal[idx]);
    }
    Ok(v)
}

/// Linear factorization used for the square tension solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factorization {
    /// LU with partial pivoting.
    Lu,
    /// Householder QR.
    Qr,
    /// Full-pivoting LU.
    FullPivLu,
}

fn numerically_singular(m: &Mat8) -> bool {
    let sv = m.singular_values();
    !(sv.min() > sv.max() * f64::EPSILON * 8.0)
}

/// The unique `t` with `Jᵀ t = w`, with a bound verdict.
pub fn solve_tensions(j: &JacobianMatrix, w: &GeneralizedWrench, bounds: [f64; 2]) -> Result<TensionSolution> {
    solve_tensions_with(j, w, bounds, Factorization::Lu)
}

pub fn solve_tensions_with(
    j: &JacobianMatrix,
    w: &GeneralizedWrench,
    bounds: [f64; 2],
    method: Factorization,
) -> Result<TensionSolution> {
    let a = j.matrix.transpose();
    if numerically_singular(&a) {
        return Err(Error::Singular { condition: f64::INFINITY });
    }
    let t = match method {
        Factorization::Lu => a.lu().solve(&w.0),
        Factorization::Qr => a.qr().solve(&w.0),
        Factorization::FullPivLu => a.full_piv_lu().solve(&w.0),
    }
    .filter(|t| t.iter().all(|v| v.is_finite()))
    .ok_or(Error::Singular { condition: f64::INFINITY })?;
    let residual = (a * t - w.0).amax();
    Ok(TensionSolution { verdict: TensionVerdict::check(t.as_slice(), bounds), tensions: TensionVector(t), residual })
}

/// Tensions that hold `q` in static equilibrium under gravity and springs.
pub fn static_tensions(geometry: &RobotGeometry, spec: &DesignSpec, q: &Configuration) -> Result<TensionSolution> {
    let j = jacobian(geometry, spec, q)?;
    let w = generalized_load(geometry, spec, q)?;
    solve_tensions(&j, &w, spec.tension_bounds)
}

/// Unilateral linear cable: tension `max(0, k (l - l_cmd))`.
pub fn cable_tensions(lengths: &[f64; NUM_CABLES], commanded: &Vec8, stiffness: f64) -> Vec8 {
    Vec8::from_fn(|i, _| (stiffness * (lengths[i] - commanded[i])).max(0.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StiffnessReport {
    /// Symmetrized total stiffness `-(∂F/∂q + ∂F/∂qᵀ)/2`.
    pub matrix: Mat8,
    /// `‖K − Kᵀ‖ / ‖K‖` before symmetrization.
    pub asymmetry: f64,
    /// Cable elasticity part (tension changes at frozen cable directions).
    pub elastic: Mat8,
    /// Geometric part (direction changes at frozen tensions).
    pub geometric: Mat8,
    /// Gravity and mechanism-spring part.
    pub mechanism: Mat8,
    /// Static tensions the commanded lengths were chosen to reproduce at `q`.
    pub pretension: Vec8,
    pub commanded_lengths: Vec8,
}

const FD_STEP: f64 = 1e-6;

/// Second-order finite difference along each retraction direction.  Internal
/// coordinates sitting on a stroke limit use a one-sided stencil pointing
/// into the stroke.
fn central_difference(
    spec: &DesignSpec,
    q: &Configuration,
    mut f: impl FnMut(&Configuration) -> Result<Vec8>,
) -> Result<Mat8> {
    let mut out = Mat8::zeros();
    let h = FD_STEP;
    for j in 0..8 {
        let mut d = Vec8::zeros();
        d[j] = h;
        let limits = spec.translational_indices().iter().position(|&i| i + 6 == j);
        let side = if let Some(k) = limits {
            let [lo, hi] = spec.stroke_limits[k];
            let v = q.internal[j - 6];
            if v - h < lo {
                1.0
            } else if v + h > hi {
                -1.0
            } else {
                0.0
            }
        } else {
            0.0
        };
        let col = if side == 0.0 {
            (f(&q.retract(&d))? - f(&q.retract(&(-d)))?) / (2.0 * h)
        } else {
            let f0 = f(q)?;
            let f1 = f(&q.retract(&(d * side)))?;
            let f2 = f(&q.retract(&(d * (2.0 * side))))?;
            (f1 * 4.0 - f0 * 3.0 - f2) * (side / (2.0 * h))
        };
        out.set_column(j, &col);
    }
    Ok(out)
}

/// Stiffness at a static equilibrium with cables modelled as linear springs
/// of axial stiffness `cable_stiffness` pinned at commanded lengths chosen so
/// that the cables carry the static tensions at `q`.  A zero stiffness
/// disables the cables entirely.
pub fn stiffness_matrix(
    geometry: &RobotGeometry,
    spec: &DesignSpec,
    q: &Configuration,
    cable_stiffness: f64,
) -> Result<StiffnessReport> {
    let (l0, _) = cable_state(geometry, spec, q)?;
    let l0 = Vec8::from(l0);
    let (pretension, commanded) = if cable_stiffness > 0.0 {
        let t = static_tensions(geometry, spec, q)?.tensions.0;
        (t, l0 - t / cable_stiffness)
    } else {
        (Vec8::zeros(), l0)
    };
    let tension_at = |qq: &Configuration| -> Result<Vec8> {
        if cable_stiffness > 0.0 {
            let (l, _) = cable_state(geometry, spec, qq)?;
            Ok(cable_tensions(&l, &commanded, cable_stiffness))
        } else {
            Ok(Vec8::zeros())
        }
    };
    let j0 = jacobian(geometry, spec, q)?.matrix;

    let total = central_difference(spec, q, |qq| {
        let j = jacobian(geometry, spec, qq)?.matrix;
        Ok(generalized_load(geometry, spec, qq)?.0 - j.transpose() * tension_at(qq)?)
    })?;
    let elastic = central_difference(spec, q, |qq| Ok(j0.transpose() * tension_at(qq)?))?;
    let geometric =
        central_difference(spec, q, |qq| Ok(jacobian(geometry, spec, qq)?.matrix.transpose() * pretension))?;
    let mechanism = -central_difference(spec, q, |qq| Ok(generalized_load(geometry, spec, qq)?.0))?;

    let k = -total;
    let norm = k.norm();
    let asymmetry = if norm > 0.0 { (k - k.transpose()).norm() / norm } else { 0.0 };
    let sym = |m: Mat8| (m + m.transpose()) * 0.5;
    Ok(StiffnessReport {
        matrix: sym(k),
        asymmetry,
        elastic: sym(elastic),
        geometric: sym(geometric),
        mechanism: sym(mechanism),
        pretension,
        commanded_lengths: commanded,
    })
}

/// Weight of the whole end-effector, N.
pub fn total_weight(spec: &DesignSpec) -> Vector3<f64> {
    spec.gravity_vector() * spec.masses.values().map(|m| m.mass).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical;
    use crate::model::Variant;

    fn centered(variant: Variant) -> (crate::scenario::Scenario, Configuration) {
        let sc = canonical::scenario(variant);
        let q =
            Configuration::at_position(Vector3::from(sc.simulation.reference_position), sc.simulation.nominal_internal);
        (sc, q)
    }

    #[test]
    fn zero_gravity_free_spring_gives_zero_load() {
        let (mut sc, q) = centered(Variant::AScrew);
        sc.design.gravity = [0.0; 3];
        let w = generalized_load(&sc.geometry, &sc.design, &q).unwrap();
        assert_eq!(w.0, Vec8::zeros());
    }

    #[test]
    fn gravity_load_at_centered_pose() {
        for v in Variant::ALL {
            let (sc, q) = centered(v);
            let mut spec = sc.design.clone();
            spec.springs.iter_mut().for_each(|s| s.stiffness = 1e-300);
            let w = generalized_load(&sc.geometry, &spec, &q).unwrap().0;
            let total_mass: f64 = spec.masses.values().map(|m| m.mass).sum();
            assert!((w[2] + total_mass * 9.81).abs() < 1e-12, "{v}");
            assert!(w[0].abs() < 1e-15 && w[1].abs() < 1e-15);
        }
    }

    #[test]
    fn spring_load_restores() {
        let (mut sc, _) = centered(Variant::AScrew);
        sc.design.gravity = [0.0; 3];
        let q = Configuration::at_position(Vector3::new(0.0, 0.0, 1.0), [0.1, 0.0]);
        let w = generalized_load(&sc.geometry, &sc.design, &q).unwrap().0;
        assert!((w[6] + 50.0).abs() < 1e-12);
    }

    #[test]
    fn centered_static_tensions() {
        for v in Variant::ALL {
            let (sc, q) = centered(v);
            let sol = static_tensions(&sc.geometry, &sc.design, &q).unwrap();
            let t = sol.tensions.0;
            assert!(sol.residual <= 1e-9, "{v}: residual {}", sol.residual);
            assert!(sol.verdict.is_feasible(), "{v}: {:?} {t}", sol.verdict);
            for (a, b) in [(0, 1), (2, 3), (4, 5), (6, 7)] {
                assert!((t[a] - t[b]).abs() < 1e-9, "{v}: {a},{b}");
            }
        }
    }

    #[test]
    fn homogeneous_system_gives_zero_infeasible() {
        let (mut sc, q) = centered(Variant::AScrew);
        sc.design.gravity = [0.0; 3];
        let sol = static_tensions(&sc.geometry, &sc.design, &q).unwrap();
        assert!(sol.tensions.0.amax() < 1e-12);
        assert_eq!(sol.verdict.violations.len(), 8);
        assert!(sol.verdict.any_low());
    }

    #[test]
    fn boundary_pose_flags_slack_cable() {
        let (sc, _) = centered(Variant::AScrew);
        let q = Configuration::at_position(Vector3::new(0.95, 0.0, 1.9), [0.0, 0.0]);
        let sol = static_tensions(&sc.geometry, &sc.design, &q).unwrap();
        assert!(sol.verdict.any_low(), "{:?}", sol.tensions);
    }

    #[test]
    fn factorizations_agree() {
        let (sc, q) = centered(Variant::CRotatableGripper);
        let j = jacobian(&sc.geometry, &sc.design, &q).unwrap();
        let w = generalized_load(&sc.geometry, &sc.design, &q).unwrap();
        let a = solve_tensions_with(&j, &w, sc.design.tension_bounds, Factorization::Lu).unwrap();
        let b = solve_tensions_with(&j, &w, sc.design.tension_bounds, Factorization::Qr).unwrap();
        let c = solve_tensions_with(&j, &w, sc.design.tension_bounds, Factorization::FullPivLu).unwrap();
        assert!((a.tensions.0 - b.tensions.0).amax() < 1e-9);
        assert!((a.tensions.0 - c.tensions.0).amax() < 1e-9);
    }

    #[test]
    fn singular_jacobian_is_an_error() {
        let j = JacobianMatrix { matrix: Mat8::zeros(), rotational: [false; 8] };
        let r = solve_tensions(&j, &GeneralizedWrench(Vec8::zeros()), [5.0, 500.0]);
        assert!(matches!(r, Err(Error::Singular { .. })));
    }

    #[test]
    fn stiffness_at_centered_equilibrium_is_spd() {
        let (sc, q) = centered(Variant::AScrew);
        let rep = stiffness_matrix(&sc.geometry, &sc.design, &q, 1e5).unwrap();
        assert!(rep.asymmetry < 1e-6, "asymmetry {}", rep.asymmetry);
        let eig = rep.matrix.symmetric_eigenvalues();
        assert!(eig.min() > 0.0, "{eig}");
    }

    #[test]
    fn elastic_part_scales_with_cable_stiffness() {
        let (sc, q) = centered(Variant::BGripper);
        let a = stiffness_matrix(&sc.geometry, &sc.design, &q, 1e5).unwrap();
        let b = stiffness_matrix(&sc.geometry, &sc.design, &q, 2e5).unwrap();
        let rel = (b.elastic - a.elastic * 2.0).norm() / (a.elastic * 2.0).norm();
        assert!(rel < 1e-6, "{rel}");
    }

    #[test]
    fn isolated_spring_stiffness() {
        let (mut sc, _) = centered(Variant::AScrew);
        sc.design.gravity = [0.0; 3];
        let q = Configuration::at_position(Vector3::new(0.0, 0.0, 1.0), [0.05, 0.0]);
        let rep = stiffness_matrix(&sc.geometry, &sc.design, &q, 0.0).unwrap();
        for r in 0..8 {
            for c in 0..8 {
                if (r, c) == (6, 6) {
                    assert!((rep.matrix[(r, c)] - 500.0).abs() < 1e-4);
                } else {
                    assert!(rep.matrix[(r, c)].abs() < 1e-6, "({r},{c}) = {}", rep.matrix[(r, c)]);
                }
            }
        }
    }
}
