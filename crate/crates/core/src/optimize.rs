//! Derivative-free design-parameter optimisation: a coarse grid followed by
//! coordinate-wise golden-section refinement.  The objectives are counts of
//! feasible samples, so they are piecewise constant and gradients carry no
//! information.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{validate_scenario, Scenario};
use crate::workspace::{rotational_workspace, wrench_feasible_workspace, RotationalSweep};

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub params: Vec<f64>,
    /// `None` when the candidate is infeasible.
    pub objective: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum SearchOutcome {
    Found { best: Vec<f64>, objective: f64, trace: Vec<Evaluation> },
    AllInfeasible { trace: Vec<Evaluation> },
}

impl SearchOutcome {
    pub fn trace(&self) -> &[Evaluation] {
        match self {
            SearchOutcome::Found { trace, .. } | SearchOutcome::AllInfeasible { trace } => trace,
        }
    }
}

struct Search<F> {
    f: F,
    budget: usize,
    trace: Vec<Evaluation>,
    best: Option<(Vec<f64>, f64)>,
}

impl<F: FnMut(&[f64]) -> Option<f64>> Search<F> {
    fn exhausted(&self) -> bool {
        self.trace.len() >= self.budget
    }

    /// Objective with infeasible points ranked below every feasible one.
    fn eval(&mut self, x: &[f64]) -> f64 {
        let value = (self.f)(x);
        self.trace.push(Evaluation { params: x.to_vec(), objective: value });
        if let Some(v) = value {
            if self.best.as_ref().is_none_or(|(_, b)| v > *b) {
                self.best = Some((x.to_vec(), v));
            }
        }
        value.unwrap_or(f64::NEG_INFINITY)
    }
}

/// Maximise `f` over the box `bounds` with at most `budget` evaluations.
///
/// Half of the budget (at least one point per axis) goes to a uniform grid;
/// the rest refines the best grid point one coordinate at a time by
/// golden-section search on the neighbouring grid interval.  Ties keep the
/// earliest point, so the result is deterministic.
pub fn grid_golden<F>(bounds: &[[f64; 2]], budget: usize, f: F) -> Result<SearchOutcome>
where
    F: FnMut(&[f64]) -> Option<f64>,
{
    if bounds.is_empty() || budget == 0 {
        return Err(Error::InvalidArgument("need at least one parameter and a budget of at least 1".into()));
    }
    if bounds.iter().any(|[lo, hi]| !(lo <= hi) || !lo.is_finite() || !hi.is_finite()) {
        return Err(Error::InvalidArgument("each bound must be finite with lo <= hi".into()));
    }
    let dims = bounds.len();
    let mut search = Search { f, budget, trace: Vec::new(), best: None };

    let degenerate: Vec<bool> = bounds.iter().map(|[lo, hi]| lo == hi).collect();
    let free = degenerate.iter().filter(|d| !**d).count();
    let per_axis = if free == 0 { 1 } else { ((budget as f64 / 2.0).powf(1.0 / free as f64).floor() as usize).max(2) };
    let counts: Vec<usize> = degenerate.iter().map(|&d| if d { 1 } else { per_axis }).collect();
    let value = |axis: usize, k: usize| {
        let [lo, hi] = bounds[axis];
        if counts[axis] == 1 {
            lo
        } else {
            lo + (hi - lo) * k as f64 / (counts[axis] - 1) as f64
        }
    };

    let mut idx = vec![0usize; dims];
    'grid: loop {
        if search.exhausted() {
            break;
        }
        let x: Vec<f64> = (0..dims).map(|a| value(a, idx[a])).collect();
        search.eval(&x);
        for a in (0..dims).rev() {
            idx[a] += 1;
            if idx[a] < counts[a] {
                continue 'grid;
            }
            idx[a] = 0;
        }
        break;
    }

    // Coordinate-wise golden section around the incumbent.
    let mut radius: Vec<f64> = (0..dims)
        .map(|a| if counts[a] > 1 { (bounds[a][1] - bounds[a][0]) / (counts[a] - 1) as f64 } else { 0.0 })
        .collect();
    while !search.exhausted() && search.best.is_some() && radius.iter().any(|r| *r > 0.0) {
        let before = search.trace.len();
        for a in 0..dims {
            if radius[a] <= 0.0 || search.exhausted() {
                continue;
            }
            let centre = search.best.as_ref().unwrap().0.clone();
            let lo = (centre[a] - radius[a]).max(bounds[a][0]);
            let hi = (centre[a] + radius[a]).min(bounds[a][1]);
            golden_line(&mut search, &centre, a, lo, hi);
            radius[a] *= 0.5;
            if radius[a] < 1e-9 * (bounds[a][1] - bounds[a][0]).max(1e-300) {
                radius[a] = 0.0;
            }
        }
        if search.trace.len() == before {
            break;
        }
    }

    let trace = search.trace;
    Ok(match search.best {
        Some((best, objective)) => SearchOutcome::Found { best, objective, trace },
        None => SearchOutcome::AllInfeasible { trace },
    })
}

fn golden_line<F: FnMut(&[f64]) -> Option<f64>>(
    search: &mut Search<F>,
    centre: &[f64],
    axis: usize,
    mut a: f64,
    mut b: f64,
) {
    let at = |t: f64| {
        let mut x = centre.to_vec();
        x[axis] = t;
        x
    };
    let tol = 1e-5 * (b - a).abs().max(1e-12);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    if search.exhausted() {
        return;
    }
    let mut fc = search.eval(&at(c));
    if search.exhausted() {
        return;
    }
    let mut fd = search.eval(&at(d));
    while (b - a) > tol && !search.exhausted() {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = search.eval(&at(c));
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = search.eval(&at(d));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DesignParameter {
    SpringStiffness,
    SpringFreeExtension,
    Lead,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    /// Width of the payload rotation interval at the reference position.
    RotationalStroke,
    /// Feasible cell count × cell volume over the scenario grid.
    WorkspaceVolume,
}

/// Apply candidate parameter values to a copy of the scenario.
pub fn apply_parameters(base: &Scenario, params: &[DesignParameter], values: &[f64]) -> Result<Scenario> {
    let mut sc = base.clone();
    for (p, &v) in params.iter().zip(values) {
        match p {
            DesignParameter::SpringStiffness => sc.design.springs.iter_mut().for_each(|s| s.stiffness = v),
            DesignParameter::SpringFreeExtension => sc.design.springs.iter_mut().for_each(|s| s.free_extension = v),
            DesignParameter::Lead => {
                if sc.design.lead.is_none() {
                    return Err(Error::InvalidArgument(format!("{} has no screw lead", sc.design.variant.name())));
                }
                sc.design.lead = Some(v);
            }
        }
    }
    Ok(sc)
}

/// Evaluate `objective` for one scenario; `None` if infeasible.
pub fn objective_value(sc: &Scenario, objective: Objective, sweep: &RotationalSweep) -> Option<f64> {
    if !validate_scenario(&sc.geometry, &sc.design).is_empty() {
        return None;
    }
    match objective {
        Objective::RotationalStroke => rotational_workspace(
            &sc.geometry,
            &sc.design,
            &sc.simulation,
            Vector3::from(sc.simulation.reference_position),
            sweep,
        )
        .ok()
        .map(|w| w.width),
        Objective::WorkspaceVolume => {
            let map = wrench_feasible_workspace(&sc.geometry, &sc.design, &sc.simulation);
            (map.feasible_count() > 0).then(|| map.volume())
        }
    }
}

pub fn optimize_parameters(
    base: &Scenario,
    params: &[DesignParameter],
    objective: Objective,
    bounds: &[[f64; 2]],
    budget: usize,
    sweep: &RotationalSweep,
) -> Result<SearchOutcome> {
    if params.len() != bounds.len() {
        return Err(Error::DimensionMismatch(format!("{} parameters but {} bounds", params.len(), bounds.len())));
    }
    // Fail early on parameters the design does not have.
    apply_parameters(base, params, &bounds.iter().map(|b| b[0]).collect::<Vec<_>>())?;
    grid_golden(bounds, budget, |x| {
        let sc = apply_parameters(base, params, x).ok()?;
        objective_value(&sc, objective, sweep)
    })
}
