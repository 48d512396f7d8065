//! Point-to-point trajectories in configuration space with quintic time
//! scaling: each segment starts and ends at rest (zero velocity and
//! acceleration), so the stitched path is C² in time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Configuration, Vec8};

/// `σ(τ) = 10τ³ − 15τ⁴ + 6τ⁵` and its first two derivatives.
pub fn quintic(tau: f64) -> (f64, f64, f64) {
    let t = tau.clamp(0.0, 1.0);
    let t2 = t * t;
    let t3 = t2 * t;
    (t3 * (10.0 - 15.0 * t + 6.0 * t2), 30.0 * t2 * (1.0 - 2.0 * t + t2), 60.0 * t * (1.0 - 3.0 * t + 2.0 * t2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub waypoints: Vec<Configuration>,
    /// Duration of each segment, s.
    pub durations: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub q: Configuration,
    /// Generalized velocity in the retraction tangent (world linear, body
    /// angular, internal rates).
    pub v: Vec8,
    pub a: Vec8,
}

pub fn plan_trajectory(waypoints: Vec<Configuration>, durations: Vec<f64>) -> Result<Trajectory> {
    if waypoints.len() < 2 {
        return Err(Error::InvalidArgument("a trajectory needs at least two waypoints".into()));
    }
    if durations.len() != waypoints.len() - 1 {
        return Err(Error::DimensionMismatch(format!(
            "{} waypoints need {} durations, got {}",
            waypoints.len(),
            waypoints.len() - 1,
            durations.len()
        )));
    }
    if let Some(k) = waypoints.iter().position(|q| !q.is_finite()) {
        return Err(Error::InvalidArgument(format!("waypoint {k} is not finite")));
    }
    if let Some(k) = durations.iter().position(|d| !(*d > 0.0 && d.is_finite())) {
        return Err(Error::InvalidArgument(format!("duration {k} must be positive")));
    }
    Ok(Trajectory { waypoints, durations })
}

impl Trajectory {
    pub fn duration(&self) -> f64 {
        self.durations.iter().sum()
    }

    /// Configuration, velocity and acceleration at time `t` (clamped to the
    /// trajectory span).
    pub fn sample(&self, t: f64) -> TrajectorySample {
        let mut start = 0.0;
        let last = self.durations.len() - 1;
        for (k, &d) in self.durations.iter().enumerate() {
            if t < start + d || k == last {
                let tau = ((t - start) / d).clamp(0.0, 1.0);
                let q0 = &self.waypoints[k];
                let delta = q0.local_difference(&self.waypoints[k + 1]);
                let (s, ds, dds) = quintic(tau);
                // exact endpoints, not q0 ⊕ δ with its round-off
                let q = if tau == 0.0 {
                    *q0
                } else if tau == 1.0 {
                    self.waypoints[k + 1]
                } else {
                    q0.retract(&(delta * s))
                };
                return TrajectorySample { q, v: delta * (ds / d), a: delta * (dds / (d * d)) };
            }
            start += d;
        }
        unreachable!("durations is non-empty")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Pose;
    use nalgebra::{UnitQuaternion, Vector3};

    fn two_point() -> Trajectory {
        let a = Configuration::at_position(Vector3::new(0.0, 0.0, 1.0), [0.0, 0.0]);
        let b = Configuration::new(
            Pose::new(Vector3::new(0.3, -0.2, 1.1), UnitQuaternion::from_euler_angles(0.0, 0.0, 0.4)),
            [0.02, 0.3],
        );
        plan_trajectory(vec![a, b], vec![2.0]).unwrap()
    }

    #[test]
    fn starts_at_rest_on_the_first_waypoint() {
        let tr = two_point();
        let s = tr.sample(0.0);
        assert_eq!(s.q, tr.waypoints[0]);
        assert_eq!(s.v, Vec8::zeros());
        assert_eq!(s.a, Vec8::zeros());
        let e = tr.sample(2.0);
        assert_eq!(e.q, tr.waypoints[1]);
        assert!(e.v.amax() < 1e-15 && e.a.amax() < 1e-12);
    }

    #[test]
    fn midpoint_of_straight_line() {
        let a = Configuration::at_position(Vector3::new(0.0, 0.0, 1.0), [0.0, 0.0]);
        let b = Configuration::at_position(Vector3::new(0.5, 0.0, 1.0), [0.1, 0.0]);
        let tr = plan_trajectory(vec![a, b], vec![4.0]).unwrap();
        let m = tr.sample(2.0).q;
        assert!((m.base_pose.position - Vector3::new(0.25, 0.0, 1.0)).norm() < 1e-15);
        assert!((m.internal[0] - 0.05).abs() < 1e-15);
    }

    /// Trapezoid quadrature of the velocity recovers the displacement.
    #[test]
    fn velocity_integrates_to_displacement() {
        let tr = two_point();
        let delta = tr.waypoints[0].local_difference(&tr.waypoints[1]);
        let n = 20_000;
        let h = tr.duration() / n as f64;
        let mut acc = Vec8::zeros();
        for i in 0..n {
            acc += (tr.sample(i as f64 * h).v + tr.sample((i + 1) as f64 * h).v) * (0.5 * h);
        }
        assert!((acc - delta).amax() < 1e-6);
    }

    #[test]
    fn segment_boundaries_are_at_rest() {
        let a = Configuration::at_position(Vector3::new(0.0, 0.0, 1.0), [0.0, 0.0]);
        let b = Configuration::at_position(Vector3::new(0.2, 0.0, 1.0), [0.0, 0.0]);
        let c = Configuration::at_position(Vector3::new(0.2, 0.2, 1.0), [0.0, 0.0]);
        let tr = plan_trajectory(vec![a, b, c], vec![1.0, 1.5]).unwrap();
        let s = tr.sample(1.0);
        assert_eq!(s.q, b);
        assert!(s.v.amax() < 1e-15);
    }

    #[test]
    fn invalid_plans() {
        let a = Configuration::at_position(Vector3::new(0.0, 0.0, 1.0), [0.0, 0.0]);
        assert!(plan_trajectory(vec![a], vec![]).is_err());
        assert!(plan_trajectory(vec![a, a], vec![0.0]).is_err());
        assert!(plan_trajectory(vec![a, a], vec![1.0, 1.0]).is_err());
        let bad = Configuration::at_position(Vector3::new(f64::NAN, 0.0, 1.0), [0.0, 0.0]);
        assert!(plan_trajectory(vec![a, bad], vec![1.0]).is_err());
    }

    #[test]
    fn quintic_profile() {
        assert_eq!(quintic(0.0), (0.0, 0.0, 0.0));
        assert_eq!(quintic(1.0).0, 1.0);
        assert_eq!(quintic(0.5).0, 0.5);
        // peak velocity 15/8 at the midpoint
        assert!((quintic(0.5).1 - 1.875).abs() < 1e-15);
    }
}
