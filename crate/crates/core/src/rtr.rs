//! Riemannian trust-region solver with a Steihaug–Toint truncated conjugate
//! gradient inner solve.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::manifold::{retract, TangentVector, UnitModulusSequence};
use crate::objectives::{LocalModel, Objective};

/// Stationarity threshold on the Riemannian gradient norm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum GradTol {
    Absolute(f64),
    /// Multiple of the gradient norm at the starting point.
    Relative(f64),
}

impl GradTol {
    pub fn threshold(self, initial_grad_norm: f64) -> f64 {
        match self {
            GradTol::Absolute(t) => t,
            GradTol::Relative(t) => t * initial_grad_norm,
        }
    }

    fn value(self) -> f64 {
        match self {
            GradTol::Absolute(t) | GradTol::Relative(t) => t,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrustRegionConfig {
    /// Largest admissible radius.
    pub delta_bar: f64,
    pub delta0: f64,
    /// Acceptance threshold on `ρ`, in `(0, 1/4)`.
    pub rho_bar: f64,
    pub grad_tol: GradTol,
    pub max_iters: usize,
    pub tcg_max_inner: usize,
    pub tcg_kappa: f64,
    pub tcg_theta: f64,
}

impl TrustRegionConfig {
    /// Defaults for a tangent space of dimension `n`: `Δ̄ = √n`, `Δ₀ = Δ̄/8`,
    /// `ρ̄ = 0.1`, gradient tolerance `1e-9` relative to the start, `n` inner
    /// iterations and the `κ = 0.1`, `θ = 1` residual rule.
    pub fn for_dimension(n: usize) -> Self {
        let delta_bar = (n.max(1) as f64).sqrt();
        Self {
            delta_bar,
            delta0: delta_bar / 8.0,
            rho_bar: 0.1,
            grad_tol: GradTol::Relative(1e-9),
            max_iters: 500,
            tcg_max_inner: n.max(1),
            tcg_kappa: 0.1,
            tcg_theta: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::invalid(format!("trust-region config: {what}")));
        if !(self.delta_bar > 0.0 && self.delta_bar.is_finite()) {
            return bad("delta_bar must be positive and finite");
        }
        if !(self.delta0 > 0.0 && self.delta0 <= self.delta_bar) {
            return bad("delta0 must lie in (0, delta_bar]");
        }
        if !(self.rho_bar > 0.0 && self.rho_bar < 0.25) {
            return bad("rho_bar must lie in (0, 1/4)");
        }
        if !(self.grad_tol.value() >= 0.0) {
            return bad("grad_tol must be nonnegative");
        }
        if self.tcg_max_inner == 0 {
            return bad("tcg_max_inner must be at least 1");
        }
        if !(self.tcg_kappa > 0.0 && self.tcg_kappa < 1.0) {
            return bad("tcg_kappa must lie in (0, 1)");
        }
        if !(self.tcg_theta > 0.0) {
            return bad("tcg_theta must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TcgStop {
    NegativeCurvature,
    Boundary,
    ResidualSmall,
    MaxInner,
}

impl TcgStop {
    pub fn as_str(self) -> &'static str {
        match self {
            TcgStop::NegativeCurvature => "negative_curvature",
            TcgStop::Boundary => "boundary",
            TcgStop::ResidualSmall => "residual_small",
            TcgStop::MaxInner => "max_inner",
        }
    }
}

#[derive(Clone, Debug)]
pub struct TcgStep {
    pub eta: TangentVector,
    /// `Hess f(x)[η]`, accumulated alongside `η`.
    pub hess_eta: TangentVector,
    pub stop: TcgStop,
    pub inner_iterations: usize,
}

impl TcgStep {
    /// `m(0) − m(η) = −⟨g, η⟩ − ½⟨Hη, η⟩`.
    pub fn model_decrease(&self, grad: &TangentVector) -> Result<f64> {
        Ok(-grad.inner(&self.eta)? - 0.5 * self.hess_eta.inner(&self.eta)?)
    }
}

/// Approximately minimizes `⟨g, η⟩ + ½⟨Hess η, η⟩` over `‖η‖ ≤ Δ`.
pub fn tcg<L: LocalModel>(
    local: &L,
    grad: &TangentVector,
    delta: f64,
    cfg: &TrustRegionConfig,
) -> Result<TcgStep> {
    if !(delta > 0.0) {
        return Err(Error::invalid(format!(
            "trust-region radius must be positive, got {delta}"
        )));
    }
    let x = local.point();
    let mut eta = TangentVector::zero(x);
    let mut hess_eta = TangentVector::zero(x);
    let mut r = grad.clone();
    let mut r_r = r.inner(&r)?;
    let r0 = r_r.sqrt();
    let done = |eta, hess_eta, stop, inner_iterations| {
        Ok(TcgStep {
            eta,
            hess_eta,
            stop,
            inner_iterations,
        })
    };
    if r0 == 0.0 {
        return done(eta, hess_eta, TcgStop::ResidualSmall, 0);
    }
    let target = r0 * cfg.tcg_kappa.min(r0.powf(cfg.tcg_theta));
    let mut d = r.scaled(-1.0);
    let mut e_e = 0.0;
    let mut e_d = 0.0;
    let mut d_d = r_r;

    for j in 1..=cfg.tcg_max_inner {
        let hd = local.rhess(&d)?;
        let d_hd = d.inner(&hd)?;
        let alpha = r_r / d_hd;
        let e_e_next = e_e + 2.0 * alpha * e_d + alpha * alpha * d_d;
        if d_hd <= 0.0 || e_e_next >= delta * delta {
            let disc = (e_d * e_d + d_d * (delta * delta - e_e)).max(0.0);
            let tau = (disc.sqrt() - e_d) / d_d;
            eta.axpy(tau, &d)?;
            hess_eta.axpy(tau, &hd)?;
            let stop = if d_hd <= 0.0 {
                TcgStop::NegativeCurvature
            } else {
                TcgStop::Boundary
            };
            return done(eta, hess_eta, stop, j);
        }
        eta.axpy(alpha, &d)?;
        hess_eta.axpy(alpha, &hd)?;
        r.axpy(alpha, &hd)?;
        let r_r_next = r.inner(&r)?;
        if r_r_next.sqrt() <= target {
            return done(eta, hess_eta, TcgStop::ResidualSmall, j);
        }
        let beta = r_r_next / r_r;
        r_r = r_r_next;
        d = d.scaled(beta);
        d.axpy(-1.0, &r)?;
        e_e = eta.inner(&eta)?;
        e_d = eta.inner(&d)?;
        d_d = d.inner(&d)?;
    }
    done(eta, hess_eta, TcgStop::MaxInner, cfg.tcg_max_inner)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    /// Cost at the iterate held after this iteration.
    pub cost: f64,
    pub grad_norm: f64,
    pub rho: f64,
    /// Radius after the update.
    pub delta: f64,
    pub accepted: bool,
    pub step_norm: f64,
    pub tcg_stop: TcgStop,
    pub inner_iterations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GradientTolerance,
    MaxIterations,
    /// The radius shrank below `ε_mach · Δ̄`; no further progress is possible.
    RadiusUnderflow,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrustRegionTrace {
    pub initial_cost: f64,
    pub initial_grad_norm: f64,
    pub records: Vec<IterationRecord>,
    pub stop: StopReason,
}

impl TrustRegionTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn final_grad_norm(&self) -> f64 {
        self.records
            .last()
            .map_or(self.initial_grad_norm, |r| r.grad_norm)
    }

    pub fn final_cost(&self) -> f64 {
        self.records.last().map_or(self.initial_cost, |r| r.cost)
    }

    /// Costs of the starting point and of every accepted iterate.
    pub fn accepted_costs(&self) -> Vec<f64> {
        std::iter::once(self.initial_cost)
            .chain(self.records.iter().filter(|r| r.accepted).map(|r| r.cost))
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct TrustRegionResult {
    pub point: UnitModulusSequence,
    pub cost: f64,
    pub grad_norm: f64,
    pub trace: TrustRegionTrace,
}

/// Gradient half of the second-order stationarity test. The Hessian
/// eigenvalue half is available separately through the assembled spectrum.
pub fn check_termination(trace: &TrustRegionTrace, cfg: &TrustRegionConfig) -> bool {
    trace.final_grad_norm() <= cfg.grad_tol.threshold(trace.initial_grad_norm)
}

/// `(f(x) − f(x⁺)) / (m(0) − m(η))`, or `−∞` when the model predicts no
/// decrease.
pub(crate) fn trust_ratio(actual: f64, predicted: f64, cost: f64) -> f64 {
    if !(predicted > 0.0) || !actual.is_finite() {
        return f64::NEG_INFINITY;
    }
    let floor = 1e4 * f64::EPSILON * cost.abs();
    if predicted < floor {
        let guard = 1e4 * f64::EPSILON * cost.abs().max(1.0);
        (actual + guard) / (predicted + guard)
    } else {
        actual / predicted
    }
}

pub(crate) fn update_radius(delta: f64, rho: f64, step_norm: f64, cfg: &TrustRegionConfig) -> f64 {
    if rho < 0.25 {
        delta * 0.25
    } else if rho > 0.75 && (step_norm - delta).abs() <= 1e-12 * delta.max(1.0) {
        (2.0 * delta).min(cfg.delta_bar)
    } else {
        delta
    }
}

/// Minimizes `objective` from `x0`.
pub fn solve<O: Objective>(
    objective: &O,
    x0: &UnitModulusSequence,
    cfg: &TrustRegionConfig,
) -> Result<TrustRegionResult> {
    cfg.validate()?;
    let mut local = objective.at(x0)?;
    let mut grad = local.rgrad();
    let mut grad_norm = grad.norm();
    let mut trace = TrustRegionTrace {
        initial_cost: local.cost(),
        initial_grad_norm: grad_norm,
        records: Vec::new(),
        stop: StopReason::MaxIterations,
    };
    let tol = cfg.grad_tol.threshold(grad_norm);
    let mut delta = cfg.delta0;

    loop {
        if grad_norm <= tol {
            trace.stop = StopReason::GradientTolerance;
            break;
        }
        if trace.records.len() >= cfg.max_iters {
            trace.stop = StopReason::MaxIterations;
            break;
        }
        if delta < f64::EPSILON * cfg.delta_bar {
            trace.stop = StopReason::RadiusUnderflow;
            break;
        }
        let step = tcg(&local, &grad, delta, cfg)?;
        let predicted = step.model_decrease(&grad)?;
        let step_norm = step.eta.norm();
        let candidate = retract(local.point(), &step.eta)?;
        let cost = local.cost();
        let next = match objective.at(&candidate) {
            Ok(next) => Some(next),
            Err(Error::NearOrthogonalSteering { .. }) => None,
            Err(e) => return Err(e),
        };
        let actual = next.as_ref().map_or(f64::NEG_INFINITY, |n| cost - n.cost());
        let rho = trust_ratio(actual, predicted, cost);
        delta = update_radius(delta, rho, step_norm, cfg);
        let accepted = rho > cfg.rho_bar && actual > 0.0;
        if accepted {
            local = next.expect("finite actual decrease implies a successful evaluation");
            grad = local.rgrad();
            grad_norm = grad.norm();
        }
        trace.records.push(IterationRecord {
            cost: local.cost(),
            grad_norm,
            rho,
            delta,
            accepted,
            step_norm,
            tcg_stop: step.stop,
            inner_iterations: step.inner_iterations,
        });
    }

    Ok(TrustRegionResult {
        point: local.point().clone(),
        cost: local.cost(),
        grad_norm,
        trace,
    })
}
