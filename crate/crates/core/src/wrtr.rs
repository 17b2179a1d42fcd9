//! Worst-case alternation: fix `s` and find the least favourable target
//! return inside the uncertainty ball, then fix that return and redesign `s`;
//! repeat until the output SCNR settles.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::manifold::{
    random_point, random_tangent, retract, TangentVector, UnitModulusSequence, C64,
};
use crate::objectives::{
    epsilon_from_interval, LocalModel, Objective, SequenceObjective, WorstCaseObjective,
    DEFAULT_LAMBDA,
};
use crate::radar::{clutter_energy, realized_scr, scnr, scr, steering_vector, ClutterScene};
use crate::rtr::{solve, TrustRegionConfig, TrustRegionTrace};

/// Default number of samples used to scan a Doppler interval for `ε`.
pub const DEFAULT_DOPPLER_GRID_POINTS: usize = 1001;

/// How the uncertainty radius `ε` is specified.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Uncertainty {
    Radius(f64),
    /// Target Doppler known only to lie in `[lo, hi]`; `ε` is the largest
    /// steering error over `points` evenly spaced samples of the interval.
    DopplerInterval {
        lo: f64,
        hi: f64,
        points: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WrtrConfig {
    pub lambda: f64,
    pub uncertainty: Uncertainty,
    pub worst: TrustRegionConfig,
    pub sequence: TrustRegionConfig,
    pub max_outer: usize,
    /// Stop once the SCNR moves by less than this many dB between outer
    /// iterations.
    pub scnr_tol_db: f64,
    pub noise_power: f64,
    pub target_power: f64,
}

impl WrtrConfig {
    /// Defaults for length `n`: `λ = 100`, worst-case solves capped at 500
    /// iterations, sequence solves at 100, at most 20 outer iterations and a
    /// 0.01 dB SCNR stability threshold.
    pub fn for_dimension(n: usize, uncertainty: Uncertainty) -> Self {
        let worst = TrustRegionConfig::for_dimension(n);
        let sequence = TrustRegionConfig {
            max_iters: 100,
            ..TrustRegionConfig::for_dimension(n)
        };
        Self {
            lambda: DEFAULT_LAMBDA,
            uncertainty,
            worst,
            sequence,
            max_outer: 20,
            scnr_tol_db: 0.01,
            noise_power: 1.0,
            target_power: 1.0,
        }
    }

    pub fn epsilon(&self, n: usize, target_doppler: f64) -> Result<f64> {
        let eps = match self.uncertainty {
            Uncertainty::Radius(e) => e,
            Uncertainty::DopplerInterval { lo, hi, points } => {
                epsilon_from_interval(lo, hi, target_doppler, n, points)?
            }
        };
        let cap = 4.0 * n as f64;
        if !(0.0..=cap).contains(&eps) {
            return Err(Error::invalid(format!(
                "uncertainty radius {eps} outside [0, 4N] = [0, {cap}]"
            )));
        }
        Ok(eps)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_outer == 0 {
            return Err(Error::invalid("max_outer must be at least 1"));
        }
        if !(self.scnr_tol_db > 0.0) {
            return Err(Error::invalid("scnr_tol_db must be positive"));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid("lambda must be positive"));
        }
        if !(self.noise_power >= 0.0) || !(self.target_power > 0.0) {
            return Err(Error::invalid(
                "noise power must be nonnegative and target power positive",
            ));
        }
        self.worst.validate()?;
        self.sequence.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OuterRecord {
    /// Nominal SCR, target return equal to the transmitted sequence.
    pub scr_db: f64,
    /// SCNR against the worst-case return found in this iteration.
    pub scnr_db: f64,
    pub worst_cost: f64,
    pub seq_cost: f64,
}

#[derive(Clone, Debug)]
pub struct WrtrResult {
    pub initial: UnitModulusSequence,
    pub sequence: UnitModulusSequence,
    pub worst_steering: UnitModulusSequence,
    /// The sequence `worst_steering` was computed against (the input to the
    /// last outer iteration).
    pub worst_anchor: UnitModulusSequence,
    pub epsilon: f64,
    pub history: Vec<OuterRecord>,
    pub worst_traces: Vec<TrustRegionTrace>,
    pub sequence_traces: Vec<TrustRegionTrace>,
    /// The SCNR stabilized before `max_outer` was reached.
    pub converged: bool,
}

fn nudge_seed(seed: u64) -> u64 {
    seed ^ 0x9E37_79B9_7F4A_7C15
}

/// Starting point for the worst-case solve: `s` moved along a seeded
/// pseudo-random tangent direction of length `√ε`. `s` itself is a saddle of
/// the worst-case cost whenever `ε > 0`.
///
/// The direction's coordinates in the basis `{j·s_i·e_i}` depend on the seed
/// only, so consecutive outer iterations nudge `s` the same way and the
/// worst-case return follows `s` continuously.
pub fn worst_case_start(
    s: &UnitModulusSequence,
    epsilon: f64,
    seed: u64,
) -> Result<UnitModulusSequence> {
    if epsilon == 0.0 {
        return Ok(s.clone());
    }
    retract(s, &random_tangent(s, epsilon.sqrt(), seed))
}

/// Runs the alternation from the seeded random starting sequence.
pub fn optimize(scene: &ClutterScene, cfg: &WrtrConfig, seed: u64) -> Result<WrtrResult> {
    cfg.validate()?;
    let n = scene.n();
    let epsilon = cfg.epsilon(n, scene.target_doppler())?;
    let initial = random_point(n, seed)?;
    optimize_from(scene, cfg, &initial, epsilon, seed)
}

/// Runs the alternation from a given sequence with a known radius.
pub fn optimize_from(
    scene: &ClutterScene,
    cfg: &WrtrConfig,
    initial: &UnitModulusSequence,
    epsilon: f64,
    seed: u64,
) -> Result<WrtrResult> {
    cfg.validate()?;
    let mut s = initial.clone();
    let mut worst_steering = initial.clone();
    let mut worst_anchor = initial.clone();
    let mut history = Vec::new();
    let mut worst_traces = Vec::new();
    let mut sequence_traces = Vec::new();
    let mut converged = false;

    for outer in 0..cfg.max_outer {
        let step = || -> Result<_> {
            let worst = WorstCaseObjective::new(s.clone(), cfg.lambda, epsilon)?;
            let start = worst_case_start(&s, epsilon, nudge_seed(seed))?;
            let w = solve(&worst, &start, &cfg.worst)?;
            let seq = SequenceObjective::new(w.point.clone(), scene)?;
            let q = solve(&seq, &s, &cfg.sequence)?;
            let record = OuterRecord {
                scr_db: scr(&q.point, scene)?,
                scnr_db: scnr(&q.point, &w.point, scene, cfg.noise_power, cfg.target_power)?,
                worst_cost: w.cost,
                seq_cost: q.cost,
            };
            Ok((w, q, record))
        };
        let (w, q, record) = step().map_err(|e| e.at_outer(outer))?;
        worst_anchor = std::mem::replace(&mut s, q.point);
        worst_steering = w.point;
        worst_traces.push(w.trace);
        sequence_traces.push(q.trace);
        let settled = history.last().is_some_and(|prev: &OuterRecord| {
            (record.scnr_db - prev.scnr_db).abs() < cfg.scnr_tol_db
        });
        history.push(record);
        if settled {
            converged = true;
            break;
        }
    }

    Ok(WrtrResult {
        initial: initial.clone(),
        sequence: s,
        worst_steering,
        worst_anchor,
        epsilon,
        history,
        worst_traces,
        sequence_traces,
        converged,
    })
}

/// Matrix of the Riemannian Hessian in the orthonormal tangent basis
/// `{j·x_i·e_i}`.
pub fn hessian_matrix<O: Objective>(
    objective: &O,
    x: &UnitModulusSequence,
) -> Result<DMatrix<f64>> {
    let local = objective.at(x)?;
    let n = x.len();
    let mut m = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = local
            .rhess(&TangentVector::from_coordinates(x, &e)?)?
            .coordinates();
        e[j] = 0.0;
        for (i, v) in col.into_iter().enumerate() {
            m[(i, j)] = v;
        }
    }
    Ok(m)
}

/// `‖H − Hᵀ‖_F / ‖H‖_F`.
pub fn asymmetry(h: &DMatrix<f64>) -> f64 {
    let scale = h.norm();
    if scale == 0.0 {
        0.0
    } else {
        (h - h.transpose()).norm() / scale
    }
}

/// Eigenvalues of the Riemannian Hessian at `x`, sorted ascending. The
/// assembled matrix is symmetrized before the eigensolve.
pub fn hessian_spectrum<O: Objective>(objective: &O, x: &UnitModulusSequence) -> Result<Vec<f64>> {
    let h = hessian_matrix(objective, x)?;
    let sym = (&h + h.transpose()) * 0.5;
    let mut eig: Vec<f64> = SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorModel {
    /// `s̃ = s ⊙ p(v)` with `v` uniform on `[lo, hi]`.
    DopplerInterval { lo: f64, hi: f64 },
    /// `s̃ = s ⊙ e^{jφ}` with every phase uniform on `[0, 2π)`.
    UniformRandomPhase,
}

impl ErrorModel {
    pub fn name(&self) -> &'static str {
        match self {
            ErrorModel::DopplerInterval { .. } => "doppler_interval",
            ErrorModel::UniformRandomPhase => "uniform_random_phase",
        }
    }

    fn draw(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
        match *self {
            ErrorModel::DopplerInterval { lo, hi } => {
                let v = if hi > lo {
                    rng.random_range(lo..hi)
                } else {
                    lo
                };
                steering_vector(v, n)
            }
            ErrorModel::UniformRandomPhase => (0..n)
                .map(|_| C64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU)))
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScrStats {
    pub trials: usize,
    pub mean_db: f64,
    pub min_db: f64,
    pub max_db: f64,
    /// Population standard deviation of the per-trial dB values.
    pub std_db: f64,
}

impl ScrStats {
    fn from_samples(samples: &[f64]) -> Self {
        let k = samples.len() as f64;
        let min_db = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let max_db = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // Identical samples: report them exactly instead of a rounded mean.
        let (mean_db, std_db) = if min_db == max_db {
            (min_db, 0.0)
        } else {
            let mean = samples.iter().sum::<f64>() / k;
            let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / k;
            (mean, var.sqrt())
        };
        Self {
            trials: samples.len(),
            mean_db,
            min_db,
            max_db,
            std_db,
        }
    }
}

/// Realized SCR of every design under `n_trials` random steering errors.
/// Each trial uses its own deterministic substream of `seed`, and all designs
/// see the same distortion within a trial.
pub fn monte_carlo_scr(
    designs: &[UnitModulusSequence],
    scene: &ClutterScene,
    n_trials: usize,
    error_model: ErrorModel,
    seed: u64,
) -> Result<Vec<ScrStats>> {
    if n_trials == 0 {
        return Err(Error::invalid("n_trials must be at least 1"));
    }
    if let ErrorModel::DopplerInterval { lo, hi } = error_model {
        if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::invalid(format!("bad Doppler interval [{lo}, {hi}]")));
        }
    }
    let n = scene.n();
    for d in designs {
        if d.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: d.len(),
            });
        }
    }
    // The clutter term does not depend on the distortion.
    let clutter: Vec<f64> = designs
        .iter()
        .map(|d| clutter_energy(d, scene))
        .collect::<Result<_>>()?;
    let per_trial: Vec<Vec<f64>> = (0..n_trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial as u64);
            let p = error_model.draw(n, &mut rng);
            designs
                .iter()
                .zip(&clutter)
                .map(|(d, &c)| realized_scr_with(d, &p, c, scene))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    Ok((0..designs.len())
        .map(|k| {
            let samples: Vec<f64> = per_trial.iter().map(|t| t[k]).collect();
            ScrStats::from_samples(&samples)
        })
        .collect())
}

fn realized_scr_with(
    s: &UnitModulusSequence,
    distortion: &[C64],
    clutter: f64,
    scene: &ClutterScene,
) -> Result<f64> {
    if clutter > 0.0 {
        let signal = s
            .iter()
            .zip(distortion)
            .map(|(a, p)| a.conj() * a * p)
            .sum::<C64>()
            .norm_sqr();
        return Ok(10.0 * (signal / clutter).log10());
    }
    realized_scr(s, &s.modulate(distortion)?, scene)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radar::ClutterScatterer;

    fn small_scene(n: usize) -> ClutterScene {
        let sc = ClutterScene::block(n, 2..5, [3, 4], 10.0).unwrap();
        ClutterScene::new(n, sc).unwrap()
    }

    #[test]
    fn zero_radius_reduces_to_plain_design() {
        let n = 16;
        let scene = small_scene(n);
        let mut cfg = WrtrConfig::for_dimension(n, Uncertainty::Radius(0.0));
        cfg.max_outer = 3;
        let out = optimize(&scene, &cfg, 7).unwrap();
        for t in &out.worst_traces {
            assert_eq!(t.iterations(), 0);
            assert_eq!(t.initial_cost, 0.0);
        }
        assert!(out.history.iter().all(|h| h.worst_cost == 0.0));
        let gain = out.history.last().unwrap().scr_db - scr(&out.initial, &scene).unwrap();
        assert!(gain > 10.0, "{gain}");
    }

    #[test]
    fn config_validation() {
        let mut cfg = WrtrConfig::for_dimension(8, Uncertainty::Radius(1.0));
        cfg.validate().unwrap();
        cfg.max_outer = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = WrtrConfig::for_dimension(8, Uncertainty::Radius(1.0));
        cfg.scnr_tol_db = 0.0;
        assert!(cfg.validate().is_err());
        let cfg = WrtrConfig::for_dimension(8, Uncertainty::Radius(40.0));
        assert!(cfg.epsilon(8, 0.0).is_err());
    }

    #[test]
    fn history_bounded_and_points_on_manifold() {
        let n = 12;
        let scene = small_scene(n);
        let mut cfg = WrtrConfig::for_dimension(n, Uncertainty::Radius(2.0));
        cfg.max_outer = 4;
        cfg.sequence.max_iters = 20;
        let out = optimize(&scene, &cfg, 3).unwrap();
        assert!(out.history.len() <= 4);
        for x in [&out.sequence, &out.worst_steering] {
            assert!(x.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn adversary_never_helps() {
        let n = 12;
        let scene = small_scene(n);
        for seed in 0..5 {
            let s = random_point(n, seed).unwrap();
            let eps = 3.0;
            let worst = WorstCaseObjective::new(s.clone(), 100.0, eps).unwrap();
            let start = worst_case_start(&s, eps, seed + 100).unwrap();
            let w = solve(&worst, &start, &TrustRegionConfig::for_dimension(n)).unwrap();
            let after = SequenceObjective::new(w.point, &scene)
                .unwrap()
                .cost(&s)
                .unwrap();
            let nominal = SequenceObjective::new(s.clone(), &scene)
                .unwrap()
                .cost(&s)
                .unwrap();
            assert!(after >= nominal, "{after} < {nominal}");
        }
    }

    #[test]
    fn spectrum_of_penalty_at_unperturbed_point_is_nonnegative() {
        let s = random_point(10, 1).unwrap();
        let obj = WorstCaseObjective::new(s.clone(), 100.0, 0.0).unwrap();
        let eig = hessian_spectrum(&obj, &s).unwrap();
        assert_eq!(eig.len(), 10);
        assert!(eig.windows(2).all(|w| w[0] <= w[1]));
        assert!(eig[0] >= -1e-10);
        // rank one: 2·11ᵀ in tangent coordinates
        assert!((eig[9] - 20.0).abs() < 1e-9);
    }

    #[test]
    fn assembled_hessian_is_symmetric() {
        let n = 12;
        let scene = small_scene(n);
        let st = random_point(n, 2).unwrap();
        let s = random_point(n, 3).unwrap();
        let obj = SequenceObjective::new(st, &scene).unwrap();
        let h = hessian_matrix(&obj, &s).unwrap();
        assert!(asymmetry(&h) < 1e-8, "{}", asymmetry(&h));
    }

    #[test]
    fn hessian_matrix_matches_operator() {
        let n = 6;
        let scene = small_scene(n);
        let st = random_point(n, 4).unwrap();
        let s = random_point(n, 5).unwrap();
        let obj = SequenceObjective::new(st, &scene).unwrap();
        let h = hessian_matrix(&obj, &s).unwrap();
        let xi = random_tangent(&s, 1.0, 6);
        let direct = obj.at(&s).unwrap().rhess(&xi).unwrap();
        let t = nalgebra::DVector::from_vec(xi.coordinates());
        let via = &h * t;
        let back = TangentVector::from_coordinates(&s, via.as_slice()).unwrap();
        assert!(back.sub(&direct).unwrap().norm() < 1e-10 * direct.norm().max(1.0));
    }

    #[test]
    fn monte_carlo_zero_width_interval_is_constant() {
        let n = 16;
        let scene = small_scene(n);
        let designs = vec![random_point(n, 1).unwrap(), random_point(n, 2).unwrap()];
        let model = ErrorModel::DopplerInterval { lo: 0.03, hi: 0.03 };
        let stats = monte_carlo_scr(&designs, &scene, 10, model, 9).unwrap();
        for (st, d) in stats.iter().zip(&designs) {
            assert_eq!(st.std_db, 0.0);
            assert_eq!(st.min_db, st.max_db);
            let single =
                realized_scr(d, &d.modulate(&steering_vector(0.03, n)).unwrap(), &scene).unwrap();
            assert!((st.mean_db - single).abs() < 1e-9);
        }
    }

    #[test]
    fn monte_carlo_single_trial_zero_width_equals_single_shot() {
        let n = 8;
        let scene = small_scene(n);
        let d = random_point(n, 11).unwrap();
        let model = ErrorModel::DopplerInterval { lo: 0.0, hi: 0.0 };
        let stats = monte_carlo_scr(std::slice::from_ref(&d), &scene, 1, model, 0).unwrap();
        assert!((stats[0].mean_db - scr(&d, &scene).unwrap()).abs() < 1e-9);
        assert_eq!(stats[0].trials, 1);
    }

    #[test]
    fn monte_carlo_is_deterministic() {
        let n = 8;
        let scene = small_scene(n);
        let designs = vec![random_point(n, 1).unwrap()];
        let a = monte_carlo_scr(&designs, &scene, 50, ErrorModel::UniformRandomPhase, 5).unwrap();
        let b = monte_carlo_scr(&designs, &scene, 50, ErrorModel::UniformRandomPhase, 5).unwrap();
        assert_eq!(a, b);
        let c = monte_carlo_scr(&designs, &scene, 50, ErrorModel::UniformRandomPhase, 6).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn monte_carlo_fast_path_matches_general_formula() {
        let n = 8;
        let scene =
            ClutterScene::new(n, vec![ClutterScatterer::new(1, 0.2, 2.0).unwrap()]).unwrap();
        let s = random_point(n, 12).unwrap();
        let p: Vec<C64> = steering_vector(0.07, n);
        let c = clutter_energy(&s, &scene).unwrap();
        let fast = realized_scr_with(&s, &p, c, &scene).unwrap();
        let slow = realized_scr(&s, &s.modulate(&p).unwrap(), &scene).unwrap();
        assert!((fast - slow).abs() < 1e-10);
    }

    #[test]
    fn monte_carlo_validates() {
        let scene = small_scene(8);
        let d = vec![random_point(8, 1).unwrap()];
        assert!(monte_carlo_scr(&d, &scene, 0, ErrorModel::UniformRandomPhase, 0).is_err());
        let bad = ErrorModel::DopplerInterval { lo: 0.2, hi: 0.1 };
        assert!(monte_carlo_scr(&d, &scene, 3, bad, 0).is_err());
        let wrong = vec![random_point(4, 1).unwrap()];
        assert!(monte_carlo_scr(&wrong, &scene, 3, ErrorModel::UniformRandomPhase, 0).is_err());
    }
}
