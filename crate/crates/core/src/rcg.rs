//! Riemannian conjugate gradient with Fletcher–Reeves coefficients and an
//! Armijo backtracking line search. Used as a comparison baseline.

use serde::Serialize;

use crate::error::Result;
use crate::manifold::{retract, transport, UnitModulusSequence};
use crate::objectives::{LocalModel, Objective};
use crate::rtr::GradTol;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RcgConfig {
    pub max_iters: usize,
    pub grad_tol: GradTol,
    /// Sufficient-decrease constant.
    pub armijo_c: f64,
    pub shrink: f64,
    pub max_backtracks: usize,
}

impl Default for RcgConfig {
    fn default() -> Self {
        Self {
            max_iters: 100,
            grad_tol: GradTol::Relative(1e-9),
            armijo_c: 1e-4,
            shrink: 0.5,
            max_backtracks: 50,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RcgStop {
    GradientTolerance,
    MaxIterations,
    /// No step satisfied the Armijo condition within the backtracking budget.
    LineSearchFailure,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RcgRecord {
    pub cost: f64,
    pub grad_norm: f64,
    pub step_size: f64,
    pub backtracks: usize,
    /// The direction was reset to steepest descent.
    pub restarted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RcgTrace {
    pub initial_cost: f64,
    pub initial_grad_norm: f64,
    pub records: Vec<RcgRecord>,
    pub stop: RcgStop,
}

#[derive(Clone, Debug)]
pub struct RcgResult {
    pub point: UnitModulusSequence,
    pub cost: f64,
    pub grad_norm: f64,
    pub trace: RcgTrace,
}

pub fn solve_rcg<O: Objective>(
    objective: &O,
    x0: &UnitModulusSequence,
    cfg: &RcgConfig,
) -> Result<RcgResult> {
    let mut local = objective.at(x0)?;
    let mut grad = local.rgrad();
    let mut grad_sq = grad.inner(&grad)?;
    let mut trace = RcgTrace {
        initial_cost: local.cost(),
        initial_grad_norm: grad_sq.sqrt(),
        records: Vec::new(),
        stop: RcgStop::MaxIterations,
    };
    let tol = cfg.grad_tol.threshold(trace.initial_grad_norm);
    let mut dir = grad.scaled(-1.0);
    let mut last_step: Option<f64> = None;

    loop {
        if grad_sq.sqrt() <= tol {
            trace.stop = RcgStop::GradientTolerance;
            break;
        }
        if trace.records.len() >= cfg.max_iters {
            trace.stop = RcgStop::MaxIterations;
            break;
        }
        let mut slope = grad.inner(&dir)?;
        let restarted = slope >= 0.0;
        if restarted {
            dir = grad.scaled(-1.0);
            slope = -grad_sq;
        }
        let cost = local.cost();
        let mut alpha = last_step.map_or(1.0 / grad_sq.sqrt(), |a| 2.0 * a);
        let mut found = None;
        for backtracks in 0..=cfg.max_backtracks {
            let candidate = retract(local.point(), &dir.scaled(alpha))?;
            let next = objective.at(&candidate)?;
            if next.cost() <= cost + cfg.armijo_c * alpha * slope {
                found = Some((next, backtracks));
                break;
            }
            alpha *= cfg.shrink;
        }
        let Some((next, backtracks)) = found else {
            trace.stop = RcgStop::LineSearchFailure;
            break;
        };
        last_step = Some(alpha);
        let next_grad = next.rgrad();
        let next_sq = next_grad.inner(&next_grad)?;
        let beta = next_sq / grad_sq;
        let moved = transport(next.point(), &dir)?;
        dir = next_grad.scaled(-1.0);
        dir.axpy(beta, &moved)?;
        local = next;
        grad = next_grad;
        grad_sq = next_sq;
        trace.records.push(RcgRecord {
            cost: local.cost(),
            grad_norm: grad_sq.sqrt(),
            step_size: alpha,
            backtracks,
            restarted,
        });
    }

    Ok(RcgResult {
        point: local.point().clone(),
        cost: local.cost(),
        grad_norm: grad_sq.sqrt(),
        trace,
    })
}
