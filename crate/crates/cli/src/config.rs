//! Scenario configuration files (TOML).

use std::path::{Path, PathBuf};

use serde::Deserialize;
use wrtr_core::radar::{ClutterScatterer, ClutterScene};
use wrtr_core::rtr::{GradTol, TrustRegionConfig};
use wrtr_core::wrtr::{Uncertainty, WrtrConfig, DEFAULT_DOPPLER_GRID_POINTS};

use crate::error::{CliError, CliResult};

/// How `power_db` values of clutter entries convert to linear `σ²`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClutterDb {
    /// `σ² = 10^(dB/10)`.
    #[default]
    Power,
    /// The dB figure is `10·log10` of the amplitude: `|ϱ| = 10^(dB/10)`,
    /// so `σ² = 10^(dB/5)`.
    LinearAmplitude,
}

impl ClutterDb {
    pub fn to_power(self, db: f64) -> f64 {
        match self {
            ClutterDb::Power => 10f64.powf(db / 10.0),
            ClutterDb::LinearAmplitude => 10f64.powf(db / 5.0),
        }
    }
}

/// Inclusive `[first, last]` or an explicit list.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClutterBlock {
    #[serde(default)]
    pub ranges: Option<Vec<usize>>,
    #[serde(default)]
    pub range_span: Option<[usize; 2]>,
    #[serde(default)]
    pub doppler_bins: Option<Vec<i64>>,
    #[serde(default)]
    pub doppler_bin_span: Option<[i64; 2]>,
    pub power_db: f64,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScattererEntry {
    pub range: usize,
    /// Normalized Doppler; alternatively give `doppler_bin`.
    #[serde(default)]
    pub doppler: Option<f64>,
    #[serde(default)]
    pub doppler_bin: Option<i64>,
    pub power_db: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOverrides {
    pub max_iters: Option<usize>,
    pub grad_tol: Option<f64>,
    /// `"relative"` (to the starting gradient norm) or `"absolute"`.
    pub grad_tol_mode: Option<GradTolMode>,
    pub delta_bar: Option<f64>,
    pub delta0: Option<f64>,
    pub rho_bar: Option<f64>,
    pub tcg_max_inner: Option<usize>,
    pub tcg_kappa: Option<f64>,
    pub tcg_theta: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradTolMode {
    Relative,
    Absolute,
}

impl SolverOverrides {
    fn apply(&self, mut cfg: TrustRegionConfig) -> TrustRegionConfig {
        if let Some(v) = self.max_iters {
            cfg.max_iters = v;
        }
        let mode = self.grad_tol_mode.unwrap_or(match cfg.grad_tol {
            GradTol::Relative(_) => GradTolMode::Relative,
            GradTol::Absolute(_) => GradTolMode::Absolute,
        });
        let value = self.grad_tol.unwrap_or(match cfg.grad_tol {
            GradTol::Relative(t) | GradTol::Absolute(t) => t,
        });
        cfg.grad_tol = match mode {
            GradTolMode::Relative => GradTol::Relative(value),
            GradTolMode::Absolute => GradTol::Absolute(value),
        };
        if let Some(v) = self.delta_bar {
            cfg.delta_bar = v;
            if self.delta0.is_none() {
                cfg.delta0 = v / 8.0;
            }
        }
        if let Some(v) = self.delta0 {
            cfg.delta0 = v;
        }
        if let Some(v) = self.rho_bar {
            cfg.rho_bar = v;
        }
        if let Some(v) = self.tcg_max_inner {
            cfg.tcg_max_inner = v;
        }
        if let Some(v) = self.tcg_kappa {
            cfg.tcg_kappa = v;
        }
        if let Some(v) = self.tcg_theta {
            cfg.tcg_theta = v;
        }
        cfg
    }
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default)]
    pub worst: SolverOverrides,
    #[serde(default)]
    pub sequence: SolverOverrides,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WrtrSection {
    pub max_outer: Option<usize>,
    pub scnr_tol_db: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloSection {
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Defaults to the scenario seed.
    pub seed: Option<u64>,
}

impl Default for MonteCarloSection {
    fn default() -> Self {
        Self {
            trials: default_trials(),
            seed: None,
        }
    }
}

fn default_trials() -> usize {
    100
}

fn default_lambda() -> f64 {
    wrtr_core::objectives::DEFAULT_LAMBDA
}

fn default_unit() -> f64 {
    1.0
}

fn default_grid_points() -> usize {
    DEFAULT_DOPPLER_GRID_POINTS
}

fn default_null_depth() -> f64 {
    20.0
}

/// File contents as written by the user.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default)]
    pub clutter_db: ClutterDb,
    #[serde(default = "default_unit")]
    pub noise_power: f64,
    #[serde(default = "default_unit")]
    pub target_power: f64,
    #[serde(default)]
    pub target_doppler: f64,
    /// Interval known to contain the target Doppler. Absent means no
    /// uncertainty.
    #[serde(default)]
    pub doppler_uncertainty: Option<[f64; 2]>,
    #[serde(default = "default_grid_points")]
    pub doppler_grid_points: usize,
    /// Range bins at which Doppler cuts of the STAF are exported.
    #[serde(default)]
    pub doppler_cuts: Vec<usize>,
    /// Required depth of the clutter-bin STAF relative to the starting
    /// sequence, in dB.
    #[serde(default = "default_null_depth")]
    pub staf_null_depth_db: f64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub clutter_block: Vec<ClutterBlock>,
    #[serde(default)]
    pub scatterer: Vec<ScattererEntry>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub wrtr: WrtrSection,
    #[serde(default)]
    pub montecarlo: MonteCarloSection,
}

/// A validated scenario ready to run.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub path: PathBuf,
    pub seed: u64,
    pub scene: ClutterScene,
    pub wrtr: WrtrConfig,
    pub epsilon: f64,
    pub doppler_uncertainty: [f64; 2],
    pub doppler_cuts: Vec<usize>,
    /// `(range bin, Doppler bin)` cells occupied by clutter.
    pub clutter_cells: Vec<(usize, usize)>,
    pub staf_null_depth_db: f64,
    pub output_dir: Option<PathBuf>,
    pub montecarlo_trials: usize,
    pub montecarlo_seed: u64,
}

fn span_or_list<T: Copy + Ord + std::fmt::Display>(
    list: &Option<Vec<T>>,
    span: &Option<[T; 2]>,
    what: &str,
    expand: impl Fn(T, T) -> Vec<T>,
) -> Result<Vec<T>, String> {
    match (list, span) {
        (Some(l), None) => Ok(l.clone()),
        (None, Some([a, b])) if a <= b => Ok(expand(*a, *b)),
        (None, Some([a, b])) => Err(format!("{what}_span [{a}, {b}] is empty")),
        (Some(_), Some(_)) => Err(format!("give either {what}s or {what}_span, not both")),
        (None, None) => Err(format!("missing {what}s or {what}_span")),
    }
}

impl RawConfig {
    pub fn parse(text: &str, path: &Path) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::config(path, e))
    }

    pub fn into_scenario(self, path: &Path) -> CliResult<Scenario> {
        let bad = |m: String| CliError::config(path, m);
        let n = self.n;
        if n < 2 {
            return Err(bad(format!("n must be at least 2, got {n}")));
        }
        let mut scatterers = Vec::new();
        let mut clutter_cells = Vec::new();
        for (i, b) in self.clutter_block.iter().enumerate() {
            let ctx = |m: String| bad(format!("clutter_block[{i}]: {m}"));
            let ranges = span_or_list(&b.ranges, &b.range_span, "range", |a, z| (a..=z).collect())
                .map_err(ctx)?;
            let bins = span_or_list(
                &b.doppler_bins,
                &b.doppler_bin_span,
                "doppler_bin",
                |a, z| (a..=z).collect(),
            )
            .map_err(ctx)?;
            if let Some(r) = ranges.iter().find(|&&r| r >= n) {
                return Err(ctx(format!("range {r} must be below n = {n}")));
            }
            let power = self.clutter_db.to_power(b.power_db);
            for &r in &ranges {
                for &h in &bins {
                    clutter_cells.push((r, h.rem_euclid(n as i64) as usize));
                }
            }
            scatterers.extend(
                ClutterScene::block(n, ranges.iter().copied(), bins.iter().copied(), power)
                    .map_err(|e| ctx(e.to_string()))?,
            );
        }
        for (i, s) in self.scatterer.iter().enumerate() {
            let ctx = |m: String| bad(format!("scatterer[{i}]: {m}"));
            let doppler = match (s.doppler, s.doppler_bin) {
                (Some(v), None) => v,
                (None, Some(h)) => {
                    clutter_cells.push((s.range, h.rem_euclid(n as i64) as usize));
                    h as f64 / n as f64
                }
                _ => return Err(ctx("give exactly one of doppler or doppler_bin".into())),
            };
            if s.range >= n {
                return Err(ctx(format!("range {} must be below n = {n}", s.range)));
            }
            scatterers.push(
                ClutterScatterer::new(s.range, doppler, self.clutter_db.to_power(s.power_db))
                    .map_err(|e| ctx(e.to_string()))?,
            );
        }
        if scatterers.is_empty() {
            return Err(bad(
                "no clutter: add [[clutter_block]] or [[scatterer]] entries".into(),
            ));
        }
        let scene = ClutterScene::with_target_doppler(n, scatterers, self.target_doppler)
            .map_err(|e| bad(e.to_string()))?;

        let uncertainty_interval = self
            .doppler_uncertainty
            .unwrap_or([self.target_doppler, self.target_doppler]);
        let [lo, hi] = uncertainty_interval;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(bad(format!(
                "doppler_uncertainty [{lo}, {hi}] is not an interval"
            )));
        }
        if self.doppler_grid_points == 0 {
            return Err(bad("doppler_grid_points must be at least 1".into()));
        }
        let mut wrtr = WrtrConfig::for_dimension(
            n,
            Uncertainty::DopplerInterval {
                lo,
                hi,
                points: self.doppler_grid_points,
            },
        );
        wrtr.lambda = self.lambda;
        wrtr.noise_power = self.noise_power;
        wrtr.target_power = self.target_power;
        wrtr.worst = self.solver.worst.apply(wrtr.worst);
        wrtr.sequence = self.solver.sequence.apply(wrtr.sequence);
        if let Some(v) = self.wrtr.max_outer {
            wrtr.max_outer = v;
        }
        if let Some(v) = self.wrtr.scnr_tol_db {
            wrtr.scnr_tol_db = v;
        }
        wrtr.validate().map_err(|e| bad(e.to_string()))?;
        let epsilon = wrtr
            .epsilon(n, self.target_doppler)
            .map_err(|e| bad(e.to_string()))?;
        if let Some(l) = self.doppler_cuts.iter().find(|&&l| l >= n) {
            return Err(bad(format!(
                "doppler cut at range bin {l} must be below n = {n}"
            )));
        }
        if self.montecarlo.trials == 0 {
            return Err(bad("montecarlo.trials must be at least 1".into()));
        }
        if !(self.staf_null_depth_db.is_finite()) {
            return Err(bad("staf_null_depth_db must be finite".into()));
        }
        clutter_cells.sort_unstable();
        clutter_cells.dedup();
        let name = self.name.unwrap_or_else(|| {
            path.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "scenario".into())
        });
        Ok(Scenario {
            name,
            path: path.to_path_buf(),
            seed: self.seed,
            scene,
            wrtr,
            epsilon,
            doppler_uncertainty: uncertainty_interval,
            doppler_cuts: self.doppler_cuts,
            clutter_cells,
            staf_null_depth_db: self.staf_null_depth_db,
            output_dir: self.output_dir,
            montecarlo_trials: self.montecarlo.trials,
            montecarlo_seed: self.montecarlo.seed.unwrap_or(self.seed),
        })
    }
}

impl Scenario {
    pub fn from_str(text: &str, path: &Path) -> CliResult<Self> {
        RawConfig::parse(text, path)?.into_scenario(path)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_str(&text, path)
    }

    pub fn n(&self) -> usize {
        self.scene.n()
    }
}
