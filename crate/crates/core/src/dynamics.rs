//! Forward dynamics on the eight minimal coordinates.
//!
//! Every body is rigid and every cable is a stiff, damped, unilateral
//! spring towards its commanded length.  The equations of motion are
//! `M(q) v̇ = F(q, v) − c(q, v)` with `F` gravity, mechanism springs and
//! cable forces, and `c` the velocity-product (Coriolis, centripetal and
//! gyroscopic) terms.  Integration is semi-implicit Euler: the velocity is
//! updated first and the new velocity moves the configuration.
//!
//! The generalized velocity lives in the tangent space of
//! [`Configuration::retract`]: world linear velocity of the reference
//! body, its angular velocity in body axes, and the internal rates.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{cable_state, jacobian, point_jacobians, Mat3x8};
use crate::model::{body_pose, Configuration, DesignSpec, Mat8, RobotGeometry, Vec8, NUM_CABLES};
use crate::scenario::SimulationSettings;
use crate::statics::{generalized_load, potential_energy, static_tensions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub q: Configuration,
    pub v: Vec8,
    /// Simulation time, s.
    pub t: f64,
}

impl SimState {
    pub fn at_rest(q: Configuration) -> Self {
        Self { q, v: Vec8::zeros(), t: 0.0 }
    }

    pub fn is_finite(&self) -> bool {
        self.q.is_finite() && self.v.iter().all(|x| x.is_finite()) && self.t.is_finite()
    }
}

/// Axial behaviour shared by all eight cables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CableModel {
    /// N/m
    pub stiffness: f64,
    /// N·s/m
    pub damping: f64,
}

impl From<&SimulationSettings> for CableModel {
    fn from(s: &SimulationSettings) -> Self {
        Self { stiffness: s.cable_stiffness, damping: s.cable_damping }
    }
}

impl CableModel {
    /// Unilateral tension for stretch `l − l_cmd` and stretch rate `l̇`.
    /// A slack cable (`l ≤ l_cmd`) carries exactly zero force, and damping
    /// can never make a taut cable push.
    pub fn tension(&self, stretch: f64, rate: f64) -> f64 {
        if stretch <= 0.0 {
            0.0
        } else {
            (self.stiffness * stretch + self.damping * rate).max(0.0)
        }
    }
}

struct BodyTerms {
    mass: f64,
    inertia_world: Matrix3<f64>,
    jv: Mat3x8,
    jw: Mat3x8,
}

fn body_terms(geometry: &RobotGeometry, spec: &DesignSpec, q: &Configuration) -> Result<Vec<BodyTerms>> {
    let mut out = Vec::with_capacity(4);
    for &body in spec.variant.bodies() {
        let Some(mp) = spec.masses.get(&body) else { continue };
        let (jv, jw) = point_jacobians(geometry, spec, q, body, &mp.com_vector())?;
        let r = body_pose(geometry, spec, q, body)?.orientation.to_rotation_matrix().into_inner();
        out.push(BodyTerms { mass: mp.mass, inertia_world: r * mp.inertia_matrix() * r.transpose(), jv, jw });
    }
    Ok(out)
}

/// Generalized mass matrix.  Column `j` is the generalized inertia force
/// produced by a unit acceleration of coordinate `j` from rest.
pub fn mass_matrix(geometry: &RobotGeometry, spec: &DesignSpec, q: &Configuration) -> Result<Mat8> {
    let bodies = body_terms(geometry, spec, q)?;
    Ok(assemble_mass(&bodies))
}

fn assemble_mass(bodies: &[BodyTerms]) -> Mat8 {
    let mut m = Mat8::zeros();
    for b in bodies {
        m += b.jv.transpose() * b.jv * b.mass + b.jw.transpose() * b.inertia_world * b.jw;
    }
    // exact symmetry; the two products above differ by round-off
    (m + m.transpose()) * 0.5
}

/// Time derivatives `J̇v v` and `J̇w v` of every body, by central
/// differences along the motion `q ⊕ τ v`.
fn jacobian_rates(
    geometry: &RobotGeometry,
    spec: &DesignSpec,
    q: &Configuration,
    v: &Vec8,
) -> Result<Vec<(Vector3<f64>, Vector3<f64>)>> {
    let n = spec.variant.bodies().iter().filter(|b| spec.masses.contains_key(b)).count();
    let speed = v.amax();
    if speed == 0.0 {
        return Ok(vec![(Vector3::zeros(), Vector3::zeros()); n]);
    }
    let h = 1e-6 / speed;
    let (plus, minus) = (q.retract(&(v * h)), q.retract(&(v * -h)));
    // Near a stroke limit fall back to a one-sided difference.
    let (a, b, span) = match (spec.check_stroke(&plus.internal), spec.check_stroke(&minus.internal)) {
        (Ok(()), Ok(())) => (plus, minus, 2.0 * h),
        (Ok(()), Err(_)) => (plus, *q, h),
        (Err(_), Ok(())) => (*q, minus, h),
        (Err(e), Err(_)) => return Err(e),
    };
    let ta = body_terms(geometry, spec, &a)?;
    let tb = body_terms(geometry, spec, &b)?;
    Ok(ta.iter().zip(&tb).map(|(x, y)| ((x.jv - y.jv) * v / span, (x.jw - y.jw) * v / span)).collect())
}

/// Everything the integrator needs at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub acceleration: Vec8,
    pub tensions: Vec8,
    pub lengths: Vec8,
    /// Centre-of-mass acceleration of the whole end-effector, m/s².
    pub com_acceleration: Vector3<f64>,
}

/// Generalized acceleration at `state` under `commanded` cable lengths.
pub fn evaluate(
    geometry: &RobotGeometry,
    spec: &DesignSpec,
    cables: &CableModel,
    state: &SimState,
    commanded: &Vec8,
) -> Result<Evaluation> {
    let q = &state.q;
    let v = &state.v;
    let bodies = body_terms(geometry, spec, q)?;
    let mass = assemble_mass(&bodies);
    let rates = jacobian_rates(geometry, spec, q, v)?;

    let mut bias = Vec8::zeros();
    for (b, (jv_dot, jw_dot)) in bodies.iter().zip(&rates) {
        let omega = b.jw * v;
        let spin = b.inertia_world * omega;
        bias +=
            b.jv.transpose() * (jv_dot * b.mass) + b.jw.transpose() * (b.inertia_world * jw_dot + omega.cross(&spin));
    }

    let (lengths, _) = cable_state(geometry, spec, q)?;
    let j = jacobian(geometry, spec, q)?.matrix;
    let rates_l = j * v;
    let tensions = Vec8::from_fn(|i, _| cables.tension(lengths[i] - commanded[i], rates_l[i]));

    let force = generalized_load(geometry, spec, q)?.0 - j.transpose() * tensions;
    let acceleration = mass.cholesky().ok_or(Error::Singular { condition: f64::INFINITY })?.solve(&(force - bias));

    let total: f64 = bodies.iter().map(|b| b.mass).sum();
    let mut com = Vector3::zeros();
    for (b, (jv_dot, _)) in bodies.iter().zip(&rates) {
        com += (b.jv * acceleration + jv_dot) * b.mass;
    }
    Ok(Evaluation { acceleration, tensions, lengths: Vec8::from(lengths), com_acceleration: com / total })
}

/// One semi-implicit Euler step of length `dt`.
pub fn step_dynamics(
    geometry: &RobotGeometry,
    spec: &DesignSpec,
    cables: &CableModel,
    state: &SimState,
    commanded: &Vec8,
    dt: f64,
) -> Result<SimState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    let diverged = || Error::Divergence { time: state.t, last_valid: Box::new(*state) };
    if !state.is_finite() {
        return Err(diverged());
    }
    let eval = evaluate(geometry, spec, cables, state, commanded)?;
    let v = state.v + eval.acceleration * dt;
    // `retract` renormalizes the quaternion.
    let next = SimState { q: state.q.retract(&(v * dt)), v, t: state.t + dt };
    if !next.is_finite() {
        return Err(diverged());
    }
    Ok(next)
}

/// Kinetic energy `½ vᵀ M v`, J.
pub fn kinetic_energy(geometry: &RobotGeometry, spec: &DesignSpec, state: &SimState) -> Result<f64> {
    let m = mass_matrix(geometry, spec, &state.q)?;
    Ok(0.5 * state.v.dot(&(m * state.v)))
}

/// Kinetic, gravitational, mechanism-spring and cable-elastic energy, J.
pub fn total_energy(
    geometry: &RobotGeometry,
    spec: &DesignSpec,
    cables: &CableModel,
    state: &SimState,
    commanded: &Vec8,
) -> Result<f64> {
    let (lengths, _) = cable_state(geometry, spec, &state.q)?;
    let elastic: f64 = (0..NUM_CABLES)
        .map(|i| {
            let x = (lengths[i] - commanded[i]).max(0.0);
            0.5 * cables.stiffness * x * x
        })
        .sum();
    Ok(kinetic_energy(geometry, spec, state)? + potential_energy(geometry, spec, &state.q)? + elastic)
}

/// Energy of the discrete scheme: [`total_energy`] plus `(dt/2) vᵀ f(q)`
/// with `f` the conservative generalized force (gravity, springs and the
/// elastic part of the cable tensions).
///
/// Semi-implicit Euler does not conserve the physical energy, which
/// oscillates by `O(ω dt)` of the modal energy every step even without
/// damping.  For a linear system the corrected quantity is an exact
/// invariant of the undamped scheme, so it is the one whose monotone
/// decrease certifies that damping only removes energy.
pub fn discrete_energy(
    geometry: &RobotGeometry,
    spec: &DesignSpec,
    cables: &CableModel,
    state: &SimState,
    commanded: &Vec8,
    dt: f64,
) -> Result<f64> {
    let elastic = CableModel { damping: 0.0, ..*cables };
    let (lengths, _) = cable_state(geometry, spec, &state.q)?;
    let t = Vec8::from_fn(|i, _| elastic.tension(lengths[i] - commanded[i], 0.0));
    let j = jacobian(geometry, spec, &state.q)?.matrix;
    let f = generalized_load(geometry, spec, &state.q)?.0 - j.transpose() * t;
    Ok(total_energy(geometry, spec, cables, state, commanded)? + 0.5 * dt * state.v.dot(&f))
}

/// Commanded lengths that make `q` an equilibrium of the elastic cables:
/// each cable is shortened by its static tension over the stiffness.
/// Fails if the static tensions are not all positive.
pub fn equilibrium_commands(
    geometry: &RobotGeometry,
    spec: &DesignSpec,
    cables: &CableModel,
    q: &Configuration,
) -> Result<Vec8> {
    let sol = static_tensions(geometry, spec, q)?;
    let t = sol.tensions.0;
    if let Some(i) = t.iter().position(|&x| x <= 0.0) {
        return Err(Error::InfeasibleBase(format!("cable {i} would need tension {:.3} N", t[i])));
    }
    let (lengths, _) = cable_state(geometry, spec, q)?;
    Ok(Vec8::from_fn(|i, _| lengths[i] - t[i] / cables.stiffness))
}

/// World position of the end-effector's centre of mass.
pub fn center_of_mass(geometry: &RobotGeometry, spec: &DesignSpec, q: &Configuration) -> Result<Vector3<f64>> {
    let mut acc = Vector3::zeros();
    let mut total = 0.0;
    for &body in spec.variant.bodies() {
        let Some(mp) = spec.masses.get(&body) else { continue };
        acc += body_pose(geometry, spec, q, body)?.transform_point(&mp.com_vector()) * mp.mass;
        total += mp.mass;
    }
    Ok(acc / total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical;
    use crate::model::{Pose, Variant};
    use crate::scenario::Scenario;
    use nalgebra::UnitQuaternion;
    use proptest::prelude::*;

    fn setup(variant: Variant, internal: [f64; 2]) -> (Scenario, Configuration, CableModel) {
        let sc = canonical::scenario(variant);
        let q = Configuration::at_position(Vector3::from(sc.simulation.reference_position), internal);
        let cables = CableModel::from(&sc.simulation);
        (sc, q, cables)
    }

    fn rollout(sc: &Scenario, cables: &CableModel, s0: SimState, cmd: &Vec8, dt: f64, t_end: f64) -> SimState {
        let steps = (t_end / dt).round() as usize;
        let mut s = s0;
        for _ in 0..steps {
            s = step_dynamics(&sc.geometry, &sc.design, cables, &s, cmd, dt).unwrap();
        }
        s
    }

    #[test]
    fn slack_cables_fall_with_gravity() {
        let (sc, q, _) = setup(Variant::AScrew, [0.05, 0.2]);
        let cables = CableModel { stiffness: 1e5, damping: 0.0 };
        let slack = Vec8::repeat(10.0);
        let mut s = SimState::at_rest(q);
        s.v = Vec8::from_column_slice(&[0.1, -0.2, 0.3, 0.5, -0.4, 1.0, 0.01, 2.0]);
        let e = evaluate(&sc.geometry, &sc.design, &cables, &s, &slack).unwrap();
        assert_eq!(e.tensions, Vec8::zeros());
        let g = sc.design.gravity_vector();
        assert!((e.com_acceleration - g).amax() < 1e-12, "{:?}", e.com_acceleration);
    }

    #[test]
    fn tension_is_unilateral() {
        let c = CableModel { stiffness: 1e5, damping: 50.0 };
        assert_eq!(c.tension(-1e-3, 0.0), 0.0);
        assert_eq!(c.tension(-1e-3, 10.0), 0.0);
        assert_eq!(c.tension(1e-4, -1e3), 0.0);
        assert_eq!(c.tension(1e-4, 0.0), 10.0);
    }

    #[test]
    fn equilibrium_is_held() {
        let (sc, q, cables) = setup(Variant::AScrew, [0.02, 0.0]);
        let cmd = equilibrium_commands(&sc.geometry, &sc.design, &cables, &q).unwrap();
        let end = rollout(&sc, &cables, SimState::at_rest(q), &cmd, sc.simulation.dt, 1.0);
        let drift = q.local_difference(&end.q).amax();
        assert!(drift <= 1e-6, "drift {drift:e}");
    }

    #[test]
    fn damped_energy_does_not_increase() {
        let (sc, q, cables) = setup(Variant::AScrew, [0.02, 0.0]);
        let cmd = equilibrium_commands(&sc.geometry, &sc.design, &cables, &q).unwrap();
        let start =
            SimState::at_rest(q.retract(&Vec8::from_column_slice(&[2e-3, -1e-3, 1e-3, 0.0, 0.0, 0.01, 1e-3, 0.02])));
        let mut s = start;
        let dt = sc.simulation.dt;
        let energy = |s: &SimState| discrete_energy(&sc.geometry, &sc.design, &cables, s, &cmd, dt).unwrap();
        for _ in 0..200 {
            s = step_dynamics(&sc.geometry, &sc.design, &cables, &s, &cmd, dt).unwrap();
        }
        let mut prev = energy(&s);
        for _ in 0..1000 {
            s = step_dynamics(&sc.geometry, &sc.design, &cables, &s, &cmd, dt).unwrap();
            let e = energy(&s);
            assert!(e <= prev + 1e-12 * prev.abs().max(1.0), "energy rose {prev} -> {e} at t = {}", s.t);
            prev = e;
        }
        // and the physical energy has gone down overall
        let physical = |s: &SimState| total_energy(&sc.geometry, &sc.design, &cables, s, &cmd).unwrap();
        assert!(physical(&s) < physical(&start));
    }

    #[test]
    fn halving_the_step_contracts_the_error() {
        let (sc, q, cables) = setup(Variant::AScrew, [0.02, 0.0]);
        let cmd = equilibrium_commands(&sc.geometry, &sc.design, &cables, &q).unwrap();
        let start =
            SimState::at_rest(q.retract(&Vec8::from_column_slice(&[1e-3, 0.0, -1e-3, 0.0, 0.0, 5e-3, 0.0, 0.0])));
        let run = |dt: f64| rollout(&sc, &cables, start, &cmd, dt, 0.05).q;
        let (a, b, c) = (run(2e-4), run(1e-4), run(5e-5));
        let e1 = a.local_difference(&b).fixed_rows::<3>(0).norm();
        let e2 = b.local_difference(&c).fixed_rows::<3>(0).norm();
        assert!(e1 / e2 >= 1.8, "contraction {}", e1 / e2);
    }

    #[test]
    fn nan_state_reports_divergence() {
        let (sc, q, cables) = setup(Variant::AScrew, [0.02, 0.0]);
        let mut s = SimState::at_rest(q);
        s.v[0] = f64::NAN;
        let err = step_dynamics(&sc.geometry, &sc.design, &cables, &s, &Vec8::repeat(1.0), 1e-3).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }));
        assert!(err.is_numerical());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn mass_matrix_is_spd(
            variant in prop_oneof![Just(Variant::AScrew), Just(Variant::AWinder), Just(Variant::BGripper), Just(Variant::CRotatableGripper)],
            p in prop::array::uniform3(-0.5f64..0.5),
            rot in prop::array::uniform3(-1.0f64..1.0),
            internal in prop::array::uniform2(0.0f64..0.2),
        ) {
            let sc = canonical::scenario(variant);
            let q = Configuration::new(
                Pose::new(Vector3::new(p[0], p[1], 1.0 + p[2]), UnitQuaternion::from_scaled_axis(Vector3::from(rot))),
                internal,
            );
            let m = mass_matrix(&sc.geometry, &sc.design, &q).unwrap();
            prop_assert_eq!(m, m.transpose());
            let eig = m.symmetric_eigenvalues();
            prop_assert!(eig.min() > 0.0, "eigenvalues {:?}", eig);
        }
    }
}
