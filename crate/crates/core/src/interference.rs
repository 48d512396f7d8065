//! Exact minimum distances between cable segments and between cables and
//! body collision boxes.

use nalgebra::Vector3;
use serde::Serialize;

use crate::error::Result;
use crate::model::{attachment_points, body_pose, BodyId, BodyShape, Configuration, DesignSpec, Pose, RobotGeometry};

type V3 = Vector3<f64>;

/// Closest points between segments `p0p1` and `q0q1`.  Returns the distance
/// and the segment parameters `(s, t)` of the closest pair.
pub fn segment_segment(p0: &V3, p1: &V3, q0: &V3, q1: &V3) -> (f64, f64, f64) {
    let d1 = p1 - p0;
    let d2 = q1 - q0;
    let r = p0 - q0;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(&r);
    let eps = 1e-300;

    let (s, t) = if a <= eps && e <= eps {
        (0.0, 0.0)
    } else if a <= eps {
        (0.0, (f / e).clamp(0.0, 1.0))
    } else {
        let c = d1.dot(&r);
        if e <= eps {
            ((-c / a).clamp(0.0, 1.0), 0.0)
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            // Parallel segments have a continuum of closest pairs; any s
            // works, pick 0 and let the clamps below fix t.
            let mut s = if denom > 1e-14 * a * e { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
            let mut t = (b * s + f) / e;
            if t < 0.0 {
                t = 0.0;
                s = (-c / a).clamp(0.0, 1.0);
            } else if t > 1.0 {
                t = 1.0;
                s = ((b - c) / a).clamp(0.0, 1.0);
            }
            (s, t)
        }
    };
    let dist = ((p0 + d1 * s) - (q0 + d2 * t)).norm();
    (dist, s, t)
}

fn point_aabb(p: &V3, half: &V3) -> f64 {
    let dx = (p.x.abs() - half.x).max(0.0);
    let dy = (p.y.abs() - half.y).max(0.0);
    let dz = (p.z.abs() - half.z).max(0.0);
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Slab test: does the segment touch the origin-centred box?
fn segment_hits_aabb(a: &V3, b: &V3, half: &V3) -> bool {
    let d = b - a;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for k in 0..3 {
        if d[k].abs() < 1e-300 {
            if a[k].abs() > half[k] {
                return false;
            }
        } else {
            let t1 = (-half[k] - a[k]) / d[k];
            let t2 = (half[k] - a[k]) / d[k];
            lo = lo.max(t1.min(t2));
            hi = hi.min(t1.max(t2));
            if lo > hi {
                return false;
            }
        }
    }
    true
}

/// Distance from segment `ab` to the axis-aligned box centred at the origin
/// with the given half extents; 0 when they intersect.
pub fn segment_aabb(a: &V3, b: &V3, half: &V3) -> f64 {
    if segment_hits_aabb(a, b, half) {
        return 0.0;
    }
    // Disjoint: the closest box point is on a face (then an endpoint is a
    // closest segment point), an edge, or a vertex (covered by the edges).
    let mut best = point_aabb(a, half).min(point_aabb(b, half));
    let corner = |i: usize| {
        V3::new(
            if i & 1 == 0 { -half.x } else { half.x },
            if i & 2 == 0 { -half.y } else { half.y },
            if i & 4 == 0 { -half.z } else { half.z },
        )
    };
    for i in 0..8 {
        for bit in [1, 2, 4] {
            if i & bit == 0 {
                let (dist, _, _) = segment_segment(a, b, &corner(i), &corner(i | bit));
                best = best.min(dist);
            }
        }
    }
    best
}

/// Distance from a world-frame segment to a body's box at `pose`.
pub fn segment_box(a: &V3, b: &V3, pose: &Pose, shape: &BodyShape) -> f64 {
    let inv = pose.inverse();
    let c = V3::from(shape.center);
    let la = inv.transform_point(a) - c;
    let lb = inv.transform_point(b) - c;
    segment_aabb(&la, &lb, &V3::from(shape.half_extents))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CablePair {
    pub first: usize,
    pub second: usize,
    pub distance: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CableBody {
    pub cable: usize,
    pub body: BodyId,
    pub distance: f64,
    pub flagged: bool,
}

/// All cable–cable and cable–body distances at one configuration.  Each
/// list is sorted by distance, closest first; equal distances keep index
/// order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterferenceReport {
    pub clearance: f64,
    pub cable_pairs: Vec<CablePair>,
    pub cable_bodies: Vec<CableBody>,
}

impl InterferenceReport {
    pub fn any_flagged(&self) -> bool {
        self.cable_pairs.iter().any(|p| p.flagged) || self.cable_bodies.iter().any(|p| p.flagged)
    }

    pub fn min_distance(&self) -> f64 {
        self.cable_pairs
            .iter()
            .map(|p| p.distance)
            .chain(self.cable_bodies.iter().map(|p| p.distance))
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn check_interference(
    geometry: &RobotGeometry,
    spec: &DesignSpec,
    q: &Configuration,
    clearance: f64,
) -> Result<InterferenceReport> {
    let points = attachment_points(geometry, spec, q)?;
    let anchors: Vec<V3> = geometry.anchors.iter().map(|a| V3::from(*a)).collect();
    let n = points.len();

    let mut cable_pairs = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let (distance, _, _) = segment_segment(&points[i], &anchors[i], &points[j], &anchors[j]);
            cable_pairs.push(CablePair { first: i, second: j, distance, flagged: distance < clearance });
        }
    }

    let mut cable_bodies = Vec::new();
    for (&body, shape) in &geometry.bodies {
        let pose = body_pose(geometry, spec, q, body)?;
        for i in 0..n {
            let distance = segment_box(&points[i], &anchors[i], &pose, shape);
            cable_bodies.push(CableBody { cable: i, body, distance, flagged: distance < clearance });
        }
    }
    cable_bodies.sort_by_key(|c| (c.cable, c.body));
    cable_pairs.sort_by(|a, b| a.distance.total_cmp(&b.distance));
    cable_bodies.sort_by(|a, b| a.distance.total_cmp(&b.distance));

    Ok(InterferenceReport { clearance, cable_pairs, cable_bodies })
}
