//! Scalar maps of the passive reconfiguration mechanisms.
//!
//! Every map here is a pure function of one internal translational
//! coordinate `s` (metres of spring compression, positive compresses).

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Helical spline shaft with a matching nut.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScrewMap {
    /// Axial travel per revolution, m/rev.
    pub lead: f64,
}

impl ScrewMap {
    pub fn new(lead: f64) -> Self {
        Self { lead }
    }

    /// Relative rotation of the shaft for an axial travel `s`.
    pub fn angle(&self, s: f64) -> f64 {
        TAU * s / self.lead
    }

    pub fn slope(&self, _s: f64) -> f64 {
        TAU / self.lead
    }
}

/// Self-reversing winder groove, modelled as an ideal triangular wave.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WinderMap {
    pub theta_max: f64,
    /// Stroke `S` of one rising flank; the period is `2 S`.
    pub stroke_period: f64,
}

impl WinderMap {
    pub fn new(theta_max: f64, stroke_period: f64) -> Self {
        Self { theta_max, stroke_period }
    }

    fn phase(&self, s: f64) -> f64 {
        s.rem_euclid(2.0 * self.stroke_period)
    }

    pub fn angle(&self, s: f64) -> f64 {
        let big_s = self.stroke_period;
        let p = self.phase(s);
        if p <= big_s {
            self.theta_max * p / big_s
        } else {
            self.theta_max * (2.0 * big_s - p) / big_s
        }
    }

    /// Slope of [`WinderMap::angle`]; defined as 0 at the reversal points
    /// where the one-sided limits disagree.
    pub fn slope(&self, s: f64) -> f64 {
        if self.is_reversal(s, 0.0) {
            return 0.0;
        }
        let rate = self.theta_max / self.stroke_period;
        if self.phase(s) < self.stroke_period {
            rate
        } else {
            -rate
        }
    }

    /// Distance from `s` to the nearest reversal point (multiples of `S`).
    pub fn reversal_distance(&self, s: f64) -> f64 {
        let r = s.rem_euclid(self.stroke_period);
        r.min(self.stroke_period - r)
    }

    pub fn is_reversal(&self, s: f64, band: f64) -> bool {
        self.reversal_distance(s) <= band
    }
}

/// Linear compression spring between two end-effector bodies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpringParams {
    /// N/m
    pub stiffness: f64,
    /// Unloaded length, m.
    pub free_extension: f64,
    /// Solid (coil-bound) length, m.
    pub min_extension: f64,
}

impl SpringParams {
    /// Spring length when the internal coordinate equals `s`.
    pub fn extension_at(&self, s: f64) -> f64 {
        self.free_extension - s
    }

    /// Hooke force at extension `x`; positive pushes the bodies apart.
    pub fn force(&self, x: f64) -> Result<f64> {
        if x < self.min_extension {
            return Err(Error::CoilBind { extension: x, min_extension: self.min_extension });
        }
        Ok(self.stiffness * (self.free_extension - x))
    }

    pub fn force_at_stroke(&self, s: f64) -> Result<f64> {
        self.force(self.extension_at(s))
    }

    pub fn energy_at_stroke(&self, s: f64) -> f64 {
        0.5 * self.stiffness * s * s
    }
}

/// Estimated contact force along the shaft when the end-effector presses on
/// a surface: the spring force at compression `s` minus the external axial
/// load, clamped at zero because contact is unilateral.
pub fn axial_contact_force(spring: &SpringParams, s: f64, external_axial_load: f64) -> Result<f64> {
    let f = spring.force_at_stroke(s)?;
    Ok((f - external_axial_load).max(0.0))
}

/// Piecewise-linear gripper opening as a function of spring compression.
///
/// Breakpoints are `(s, aperture)` pairs with strictly increasing `s`.  The
/// map is normally closed: the leading breakpoints share aperture 0 and form
/// the closed plateau, and compressing past the closure breakpoint opens the
/// gripper.  Beyond the last breakpoint the aperture is held constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ApertureMap {
    pub breakpoints: Vec<[f64; 2]>,
}

impl ApertureMap {
    pub fn new(breakpoints: Vec<[f64; 2]>) -> Self {
        Self { breakpoints }
    }

    /// Compression at which the closed plateau ends.
    pub fn closure_breakpoint(&self) -> f64 {
        let first = self.breakpoints[0][1];
        let mut end = self.breakpoints[0][0];
        for bp in &self.breakpoints[1..] {
            if bp[1] != first {
                break;
            }
            end = bp[0];
        }
        end
    }

    pub fn aperture(&self, s: f64) -> f64 {
        let bps = &self.breakpoints;
        if s <= bps[0][0] {
            return bps[0][1];
        }
        for w in bps.windows(2) {
            let ([s0, g0], [s1, g1]) = (w[0], w[1]);
            if s <= s1 {
                if g0 == g1 {
                    return g0;
                }
                return g0 + (g1 - g0) * (s - s0) / (s1 - s0);
            }
        }
        bps[bps.len() - 1][1]
    }

    /// d(aperture)/ds; exactly zero on the closed plateau (boundary
    /// included) and past the last breakpoint.
    pub fn slope(&self, s: f64) -> f64 {
        let bps = &self.breakpoints;
        if s <= self.closure_breakpoint() || s >= bps[bps.len() - 1][0] {
            return 0.0;
        }
        for w in bps.windows(2) {
            let ([s0, g0], [s1, g1]) = (w[0], w[1]);
            if s >= s0 && s < s1 {
                return (g1 - g0) / (s1 - s0);
            }
        }
        0.0
    }

    /// Structural problems with the table, empty if it is usable.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.breakpoints.len() < 2 {
            out.push("aperture_map needs at least 2 breakpoints".to_owned());
            return out;
        }
        if self.breakpoints.iter().flatten().any(|v| !v.is_finite()) {
            out.push("aperture_map has non-finite entries".to_owned());
        }
        for w in self.breakpoints.windows(2) {
            if w[1][0] <= w[0][0] {
                out.push("aperture_map breakpoints must have strictly increasing s".to_owned());
            }
            if w[1][1] < w[0][1] {
                out.push("aperture_map must be monotone: aperture may not shrink with compression".to_owned());
            }
        }
        if self.breakpoints[0][1] != 0.0 {
            out.push("aperture_map must be normally closed (aperture 0 at the first breakpoint)".to_owned());
        }
        if self.breakpoints.iter().any(|b| b[1] < 0.0) {
            out.push("aperture_map apertures must be non-negative".to_owned());
        }
        out.dedup();
        out
    }
}

/// Whether a normally-closed gripper keeps hold of an object of the given
/// width: the fingers must be narrower than the object.
pub fn grasp_holds(aperture: f64, object_width: f64) -> bool {
    aperture < object_width
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn canonical_aperture() -> ApertureMap {
        ApertureMap::new(vec![[0.0, 0.0], [0.02, 0.0], [0.2, 0.08]])
    }

    #[test]
    fn screw_examples() {
        let m = ScrewMap::new(0.05);
        assert_eq!(m.angle(0.0), 0.0);
        assert!((m.angle(0.05) - 2.0 * PI).abs() < 1e-12);
        assert!((m.angle(0.20) - 8.0 * PI).abs() < 1e-12);
        assert!((m.slope(0.123) - 2.0 * PI / 0.05).abs() < 1e-12);
    }

    #[test]
    fn winder_examples() {
        let w = WinderMap::new(2.0 * PI, 0.1);
        assert_eq!(w.angle(0.0), 0.0);
        assert!((w.angle(0.1) - 2.0 * PI).abs() < 1e-12);
        assert!((w.angle(0.05) - PI).abs() < 1e-12);
        assert!((w.angle(0.15) - PI).abs() < 1e-12);
        assert_eq!(w.slope(0.0), 0.0);
        assert_eq!(w.slope(0.1), 0.0);
        assert!(w.slope(0.05) > 0.0);
        assert!(w.slope(0.15) < 0.0);
    }

    #[test]
    fn winder_singular_set_on_one_period() {
        let w = WinderMap::new(2.0 * PI, 0.1);
        let n = 2000;
        let zeros: Vec<f64> = (0..n).map(|k| 0.2 * k as f64 / n as f64).filter(|&s| w.slope(s) == 0.0).collect();
        assert_eq!(zeros.len(), 2);
        assert_eq!(zeros[0], 0.0);
        assert!((zeros[1] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn spring_examples() {
        let sp = SpringParams { stiffness: 500.0, free_extension: 0.2, min_extension: 0.0 };
        assert_eq!(sp.force(0.2).unwrap(), 0.0);
        assert!((sp.force(0.1).unwrap() - 50.0).abs() < 1e-12);
        assert!(matches!(sp.force(-1e-9), Err(Error::CoilBind { .. })));
    }

    #[test]
    fn contact_force_examples() {
        let sp = SpringParams { stiffness: 500.0, free_extension: 0.2, min_extension: 0.0 };
        assert_eq!(axial_contact_force(&sp, 0.0, 0.0).unwrap(), 0.0);
        assert!((axial_contact_force(&sp, 0.1, 0.0).unwrap() - 50.0).abs() < 1e-12);
        assert_eq!(axial_contact_force(&sp, 0.1, 60.0).unwrap(), 0.0);
        assert!(axial_contact_force(&sp, 0.25, 0.0).is_err());
    }

    #[test]
    fn aperture_examples() {
        let m = canonical_aperture();
        assert!(m.violations().is_empty());
        assert_eq!(m.aperture(0.0), 0.0);
        assert!((m.aperture(0.2) - 0.08).abs() < 1e-15);
        assert_eq!(m.closure_breakpoint(), 0.02);
        for s in [0.0, 0.005, 0.01, 0.018, 0.02] {
            assert_eq!(m.slope(s), 0.0);
            assert_eq!(m.aperture(s), 0.0);
        }
        assert!((m.slope(0.1) - 0.08 / 0.18).abs() < 1e-12);
        // mid-way along the opening flank
        assert!((m.aperture(0.11) - 0.04).abs() < 1e-12);
    }

    #[test]
    fn aperture_violations() {
        let bad = ApertureMap::new(vec![[0.0, 0.0], [0.1, 0.05], [0.2, 0.01]]);
        assert!(!bad.violations().is_empty());
        let open_at_rest = ApertureMap::new(vec![[0.0, 0.01], [0.2, 0.08]]);
        assert!(!open_at_rest.violations().is_empty());
    }

    #[test]
    fn grasp_verdict_is_stable_on_plateau() {
        let m = canonical_aperture();
        let base = grasp_holds(m.aperture(0.01), 0.03);
        for ds in [-0.002, -0.001, 0.001, 0.002] {
            assert_eq!(grasp_holds(m.aperture(0.01 + ds), 0.03), base);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn screw_is_linear(a in -1.0f64..1.0, b in -1.0f64..1.0, lead in 0.001f64..1.0) {
                let m = ScrewMap::new(lead);
                prop_assert!((m.angle(a + b) - m.angle(a) - m.angle(b)).abs() <= 1e-12 * (1.0 + m.angle(a).abs() + m.angle(b).abs()));
                prop_assert!((m.angle(-a) + m.angle(a)).abs() <= 1e-12);
            }

            #[test]
            fn winder_is_lipschitz(a in -1.0f64..1.0, b in -1.0f64..1.0) {
                let w = WinderMap::new(2.0 * PI, 0.1);
                let bound = (w.theta_max / w.stroke_period) * (a - b).abs();
                prop_assert!((w.angle(a) - w.angle(b)).abs() <= bound + 1e-12);
            }

            #[test]
            fn aperture_monotone(a in 0.0f64..0.2, b in 0.0f64..0.2) {
                let m = ApertureMap::new(vec![[0.0, 0.0], [0.02, 0.0], [0.2, 0.08]]);
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                prop_assert!(m.aperture(lo) <= m.aperture(hi));
            }
        }
    }
}
