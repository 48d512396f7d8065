//! Minimum-norm tension distribution for redundantly actuated systems
//! (more cables than degrees of freedom), used as the comparison baseline
//! for the square non-redundant solve.
//!
//! `min Σ t_i²  s.t.  A t = w,  t_min ≤ t ≤ t_max`.  The equality
//! constraint is eliminated with a null-space basis, `t = t_p + N z`, which
//! turns the problem into a least-distance program in `z` solved exactly by
//! the Lawson–Hanson active-set NNLS.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Distribution {
    pub tensions: Vec<f64>,
    /// `Σ t_i²`
    pub objective: f64,
    pub kkt_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum DistributionOutcome {
    Feasible(Distribution),
    Infeasible,
}

impl DistributionOutcome {
    pub fn feasible(&self) -> Option<&Distribution> {
        match self {
            DistributionOutcome::Feasible(d) => Some(d),
            DistributionOutcome::Infeasible => None,
        }
    }
}

fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    a.clone().svd(true, true).solve(b, 1e-13).unwrap_or_else(|_| DVector::zeros(a.ncols()))
}

/// Lawson–Hanson non-negative least squares: `min ‖E x − f‖, x ≥ 0`.
pub fn nnls(e: &DMatrix<f64>, f: &DVector<f64>) -> DVector<f64> {
    let n = e.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let tol = 1e-12 * e.amax().max(1.0) * f.amax().max(1.0) * n as f64;
    let max_outer = 3 * n + 10;

    for _ in 0..max_outer {
        let grad = e.transpose() * (f - e * &x);
        let candidate = (0..n).filter(|&j| !passive[j] && grad[j] > tol).max_by(|&a, &b| grad[a].total_cmp(&grad[b]));
        let Some(t) = candidate else { break };
        passive[t] = true;

        loop {
            let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let sub = e.select_columns(&idx);
            let zp = lstsq(&sub, f);
            let mut z = DVector::zeros(n);
            for (k, &j) in idx.iter().enumerate() {
                z[j] = zp[k];
            }
            if idx.iter().all(|&j| z[j] > 0.0) {
                x = z;
                break;
            }
            let alpha =
                idx.iter().filter(|&&j| z[j] <= 0.0).map(|&j| x[j] / (x[j] - z[j])).fold(f64::INFINITY, f64::min);
            x += (z - &x) * alpha;
            for &j in &idx {
                if x[j] <= tol {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
        }
    }
    x
}

/// Least-distance programming: `min ‖z‖ s.t. G z ≥ h`.  `None` if the
/// constraints are inconsistent.
pub fn least_distance(g: &DMatrix<f64>, h: &DVector<f64>) -> Option<DVector<f64>> {
    let (k, r) = g.shape();
    let mut e = DMatrix::zeros(r + 1, k);
    e.view_mut((0, 0), (r, k)).copy_from(&g.transpose());
    e.row_mut(r).copy_from(&h.transpose());
    let mut f = DVector::zeros(r + 1);
    f[r] = 1.0;
    let u = nnls(&e, &f);
    let rho = &e * u - &f;
    if rho.norm() <= 1e-10 || rho[r].abs() <= 1e-14 {
        return None;
    }
    Some(DVector::from_fn(r, |i, _| -rho[i] / rho[r]))
}

/// Minimum-norm bounded tensions with `A t = w`.
pub fn distribute_tensions(a: &DMatrix<f64>, w: &DVector<f64>, bounds: [f64; 2]) -> Result<DistributionOutcome> {
    let (m, n) = a.shape();
    if w.len() != m {
        return Err(Error::DimensionMismatch(format!("w has {} entries, A has {m} rows", w.len())));
    }
    if n < m {
        return Err(Error::DimensionMismatch(format!("A is {m}x{n}; need at least as many cables as rows")));
    }
    if !(bounds[0] <= bounds[1]) {
        return Err(Error::InvalidArgument("tension bounds must satisfy t_min <= t_max".into()));
    }

    // Pad to square so the SVD yields a full right basis.
    let mut padded = DMatrix::zeros(n, n);
    padded.view_mut((0, 0), (m, n)).copy_from(a);
    let svd = padded.svd(true, true);
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let smax = svd.singular_values.max();
    let rank_tol = smax * 1e-12 * n as f64;
    let null: Vec<usize> = (0..n).filter(|&i| svd.singular_values[i] <= rank_tol).collect();
    let basis = DMatrix::from_fn(n, null.len(), |r, c| v_t[(null[c], r)]);

    let t_p = lstsq(a, w);
    if (a * &t_p - w).amax() > 1e-9 * (1.0 + w.amax()) {
        return Ok(DistributionOutcome::Infeasible);
    }

    let lo = DVector::from_element(n, bounds[0]);
    let hi = DVector::from_element(n, bounds[1]);
    let t = if null.is_empty() {
        t_p.clone()
    } else {
        let r = null.len();
        let mut g = DMatrix::zeros(2 * n, r);
        g.view_mut((0, 0), (n, r)).copy_from(&basis);
        g.view_mut((n, 0), (n, r)).copy_from(&(-&basis));
        let mut h = DVector::zeros(2 * n);
        h.rows_mut(0, n).copy_from(&(&lo - &t_p));
        h.rows_mut(n, n).copy_from(&(&t_p - &hi));
        let Some(z) = least_distance(&g, &h) else {
            return Ok(DistributionOutcome::Infeasible);
        };
        &t_p + &basis * z
    };

    let scale = 1.0 + bounds[1].abs().max(bounds[0].abs());
    let bound_violation = t.iter().map(|&ti| (bounds[0] - ti).max(ti - bounds[1]).max(0.0)).fold(0.0, f64::max);
    if bound_violation > 1e-9 * scale {
        return Ok(DistributionOutcome::Infeasible);
    }
    let t = t.map(|ti| ti.clamp(bounds[0], bounds[1]));
    let kkt_residual = kkt_residual(a, w, &t, bounds);
    Ok(DistributionOutcome::Feasible(Distribution {
        objective: t.norm_squared(),
        tensions: t.iter().copied().collect(),
        kkt_residual,
    }))
}

/// Largest violation of the KKT conditions of the min-norm problem at `t`.
pub fn kkt_residual(a: &DMatrix<f64>, w: &DVector<f64>, t: &DVector<f64>, bounds: [f64; 2]) -> f64 {
    let n = t.len();
    let tol = 1e-9 * (1.0 + bounds[1].abs());
    let at_lo: Vec<bool> = t.iter().map(|&v| v - bounds[0] <= tol).collect();
    let at_hi: Vec<bool> = t.iter().map(|&v| bounds[1] - v <= tol).collect();
    let free: Vec<usize> = (0..n).filter(|&i| !at_lo[i] && !at_hi[i]).collect();

    let lambda = if free.is_empty() {
        lstsq(&a.transpose(), t)
    } else {
        let af_t = a.select_columns(&free).transpose();
        let tf = DVector::from_fn(free.len(), |k, _| t[free[k]]);
        lstsq(&af_t, &tf)
    };
    let nu = t - a.transpose() * lambda;
    let mut res = (a * t - w).amax();
    for i in 0..n {
        let r = if at_lo[i] && at_hi[i] {
            0.0
        } else if at_lo[i] {
            (-nu[i]).max(0.0)
        } else if at_hi[i] {
            nu[i].max(0.0)
        } else {
            nu[i].abs()
        };
        res = res.max(r);
        res = res.max((bounds[0] - t[i]).max(t[i] - bounds[1]).max(0.0));
    }
    res
}
