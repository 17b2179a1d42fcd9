//! Subcommand implementations. Each `compute_*` function does all solver work
//! in memory and returns the artifacts; `run_*` wraps it with config loading
//! and the final write.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use wrtr_core::manifold::{random_point, UnitModulusSequence};
use wrtr_core::objectives::{MatchedSequenceObjective, SequenceObjective, WorstCaseObjective};
use wrtr_core::radar::{doppler_bins, scnr, scr, staf, Staf};
use wrtr_core::rcg::{solve_rcg, RcgConfig};
use wrtr_core::rtr::solve;
use wrtr_core::wrtr::{hessian_spectrum, monte_carlo_scr, optimize_from, ErrorModel};

use crate::config::Scenario;
use crate::error::{CliError, CliResult};
use crate::output::{self, MonteCarloRow, OutputSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum BaselineMethod {
    /// Sequence solve against the nominal target return, no worst-case step.
    RtrNonrobust,
    /// The same objective solved by conjugate gradient.
    RcgNonrobust,
    /// The seeded initial sequence, unoptimized.
    Random,
}

impl BaselineMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            BaselineMethod::RtrNonrobust => "rtr_nonrobust",
            BaselineMethod::RcgNonrobust => "rcg_nonrobust",
            BaselineMethod::Random => "random",
        }
    }
}

/// Command-line overrides shared by every subcommand.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct StafSummary {
    /// Mean STAF over the clutter cells, dB.
    pub initial_clutter_mean_db: f64,
    pub final_clutter_mean_db: f64,
    pub suppression_db: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumSummary {
    pub problem: String,
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonteCarloSummary {
    pub error_model: String,
    pub design: String,
    pub mean_db: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Timings {
    pub solve_ms: f64,
    pub diagnostics_ms: f64,
}

/// Machine-readable run summary, written as `report.json`.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RunReport {
    pub command: String,
    pub scenario: String,
    pub n: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_scr_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_scr_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scr_gain_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_scnr_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outer_iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub worst_case_iterations: Vec<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub sequence_iterations: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub staf: Option<StafSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub hessian: Vec<SpectrumSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub montecarlo: Vec<MonteCarloSummary>,
    pub timings: Timings,
    pub output_dir: PathBuf,
    pub files: Vec<String>,
}

/// A finished computation that has not touched the filesystem yet.
#[derive(Clone, Debug)]
pub struct Run {
    pub report: RunReport,
    pub outputs: OutputSet,
}

impl Run {
    /// Adds `report.json` and writes every artifact into `report.output_dir`.
    pub fn write(mut self) -> CliResult<RunReport> {
        self.report.files = self.outputs.names().map(String::from).collect();
        self.report.files.push(REPORT_FILE.into());
        let json = serde_json::to_vec_pretty(&self.report).expect("report serializes");
        self.outputs.add(REPORT_FILE, json);
        self.outputs.write_all(&self.report.output_dir)?;
        Ok(self.report)
    }
}

pub const REPORT_FILE: &str = "report.json";

fn solver_err(sc: &Scenario) -> impl Fn(wrtr_core::Error) -> CliError + '_ {
    move |source| CliError::Solver {
        scenario: sc.name.clone(),
        source,
    }
}

fn millis(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

fn output_dir(sc: &Scenario, opts: &RunOptions, command: &str) -> PathBuf {
    opts.out
        .clone()
        .or_else(|| sc.output_dir.clone())
        .unwrap_or_else(|| Path::new("out").join(&sc.name).join(command))
}

fn base_report(sc: &Scenario, opts: &RunOptions, command: &str) -> RunReport {
    RunReport {
        command: command.into(),
        scenario: sc.name.clone(),
        n: sc.n(),
        seed: opts.seed.unwrap_or(sc.seed),
        output_dir: output_dir(sc, opts, command),
        ..RunReport::default()
    }
}

/// STAF over every range lag and the `N` Doppler bins.
pub fn full_staf(s: &UnitModulusSequence) -> CliResult<Staf> {
    let n = s.len();
    let ranges: Vec<usize> = (0..n).collect();
    staf(s, &ranges, &doppler_bins(n)).map_err(|e| CliError::SequenceFile {
        path: PathBuf::new(),
        message: e.to_string(),
    })
}

/// Mean of the STAF over `(range, Doppler bin)` cells, dB.
pub fn clutter_mean_db(staf: &Staf, cells: &[(usize, usize)]) -> Option<f64> {
    if cells.is_empty() {
        return None;
    }
    let sum: f64 = cells.iter().map(|&(r, h)| staf.values_db[r][h]).sum();
    Some(sum / cells.len() as f64)
}

/// STAF grids, Doppler cuts and the clutter-cell summary.
fn staf_artifacts(
    sc: &Scenario,
    initial: &UnitModulusSequence,
    optimized: &UnitModulusSequence,
    out: &mut OutputSet,
) -> CliResult<StafSummary> {
    let before = full_staf(initial)?;
    let after = full_staf(optimized)?;
    out.add("staf_initial.csv", output::staf_csv(&before));
    out.add("staf.csv", output::staf_csv(&after));
    for &l in &sc.doppler_cuts {
        out.add(
            format!("doppler_cut_l{l}.csv"),
            output::doppler_cut_csv(
                &after.dopplers,
                &[
                    ("initial", &before.values_db[l]),
                    ("optimized", &after.values_db[l]),
                ],
            ),
        );
    }
    let initial_mean = clutter_mean_db(&before, &sc.clutter_cells).unwrap_or(f64::NAN);
    let final_mean = clutter_mean_db(&after, &sc.clutter_cells).unwrap_or(f64::NAN);
    Ok(StafSummary {
        initial_clutter_mean_db: initial_mean,
        final_clutter_mean_db: final_mean,
        suppression_db: initial_mean - final_mean,
    })
}

fn scr_fields(
    sc: &Scenario,
    report: &mut RunReport,
    initial: &UnitModulusSequence,
    optimized: &UnitModulusSequence,
) -> CliResult<()> {
    let err = solver_err(sc);
    let a = scr(initial, &sc.scene).map_err(&err)?;
    let b = scr(optimized, &sc.scene).map_err(&err)?;
    report.initial_scr_db = Some(a);
    report.final_scr_db = Some(b);
    report.scr_gain_db = Some(b - a);
    Ok(())
}

pub fn compute_wrtr(sc: &Scenario, opts: &RunOptions) -> CliResult<Run> {
    let err = solver_err(sc);
    let mut report = base_report(sc, opts, "wrtr");
    let mut out = OutputSet::default();
    let t = Instant::now();
    let initial = random_point(sc.n(), report.seed).map_err(&err)?;
    let res =
        optimize_from(&sc.scene, &sc.wrtr, &initial, sc.epsilon, report.seed).map_err(&err)?;
    report.timings.solve_ms = millis(t);

    let t = Instant::now();
    scr_fields(sc, &mut report, &initial, &res.sequence)?;
    report.epsilon = Some(res.epsilon);
    report.final_scnr_db = res.history.last().map(|h| h.scnr_db);
    report.outer_iterations = Some(res.history.len());
    report.converged = Some(res.converged);
    report.worst_case_iterations = res.worst_traces.iter().map(|t| t.iterations()).collect();
    report.sequence_iterations = res.sequence_traces.iter().map(|t| t.iterations()).collect();

    let worst = WorstCaseObjective::new(res.worst_anchor.clone(), sc.wrtr.lambda, res.epsilon)
        .map_err(&err)?;
    let worst_eig = hessian_spectrum(&worst, &res.worst_steering).map_err(&err)?;
    let seq = SequenceObjective::new(res.worst_steering.clone(), &sc.scene).map_err(&err)?;
    let seq_eig = hessian_spectrum(&seq, &res.sequence).map_err(&err)?;
    report.hessian = vec![
        summary("worst_case", &worst_eig),
        summary("sequence", &seq_eig),
    ];
    report.staf = Some(staf_artifacts(sc, &initial, &res.sequence, &mut out)?);

    out.add("initial_sequence.csv", output::sequence_csv(&initial));
    out.add("sequence.csv", output::sequence_csv(&res.sequence));
    out.add(
        "worst_steering.csv",
        output::sequence_csv(&res.worst_steering),
    );
    out.add(
        "worst_trace.csv",
        output::trust_region_trace_csv(&res.worst_traces),
    );
    out.add(
        "sequence_trace.csv",
        output::trust_region_trace_csv(&res.sequence_traces),
    );
    out.add("outer_history.csv", output::outer_history_csv(&res.history));
    out.add(
        "hessian_spectrum.csv",
        output::spectrum_csv(&[("worst_case", &worst_eig), ("sequence", &seq_eig)]),
    );
    report.timings.diagnostics_ms = millis(t);
    Ok(Run {
        report,
        outputs: out,
    })
}

fn summary(problem: &str, eig: &[f64]) -> SpectrumSummary {
    SpectrumSummary {
        problem: problem.into(),
        min: eig.first().copied().unwrap_or(f64::NAN),
        max: eig.last().copied().unwrap_or(f64::NAN),
    }
}

pub fn compute_baseline(
    sc: &Scenario,
    method: BaselineMethod,
    opts: &RunOptions,
) -> CliResult<Run> {
    let err = solver_err(sc);
    let command = format!("baseline_{}", method.as_str());
    let mut report = base_report(sc, opts, &command);
    let mut out = OutputSet::default();
    let t = Instant::now();
    let initial = random_point(sc.n(), report.seed).map_err(&err)?;
    let objective = MatchedSequenceObjective::new(&sc.scene);
    let optimized = match method {
        BaselineMethod::RtrNonrobust => {
            let r = solve(&objective, &initial, &sc.wrtr.sequence).map_err(&err)?;
            report.sequence_iterations = vec![r.trace.iterations()];
            out.add(
                "sequence_trace.csv",
                output::trust_region_trace_csv(&[r.trace]),
            );
            r.point
        }
        BaselineMethod::RcgNonrobust => {
            let cfg = RcgConfig {
                max_iters: sc.wrtr.sequence.max_iters,
                grad_tol: sc.wrtr.sequence.grad_tol,
                ..RcgConfig::default()
            };
            let r = solve_rcg(&objective, &initial, &cfg).map_err(&err)?;
            report.sequence_iterations = vec![r.trace.records.len()];
            out.add("rcg_trace.csv", output::rcg_trace_csv(&r.trace));
            r.point
        }
        BaselineMethod::Random => initial.clone(),
    };
    report.timings.solve_ms = millis(t);

    let t = Instant::now();
    scr_fields(sc, &mut report, &initial, &optimized)?;
    report.final_scnr_db = Some(
        scnr(
            &optimized,
            &optimized,
            &sc.scene,
            sc.wrtr.noise_power,
            sc.wrtr.target_power,
        )
        .map_err(&err)?,
    );
    if method != BaselineMethod::Random {
        let eig = hessian_spectrum(&objective, &optimized).map_err(&err)?;
        report.hessian = vec![summary("sequence", &eig)];
        out.add(
            "hessian_spectrum.csv",
            output::spectrum_csv(&[("sequence", &eig)]),
        );
    }
    report.staf = Some(staf_artifacts(sc, &initial, &optimized, &mut out)?);
    out.add("initial_sequence.csv", output::sequence_csv(&initial));
    out.add("sequence.csv", output::sequence_csv(&optimized));
    report.timings.diagnostics_ms = millis(t);
    Ok(Run {
        report,
        outputs: out,
    })
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DesignEntry {
    name: String,
    /// Sequence CSV, relative to the manifest's directory.
    path: PathBuf,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DesignManifest {
    design: Vec<DesignEntry>,
}

/// Named designs listed in a manifest file.
pub fn load_designs(manifest: &Path) -> CliResult<Vec<(String, UnitModulusSequence)>> {
    let bad = |message: String| CliError::Manifest {
        path: manifest.to_path_buf(),
        message,
    };
    let text = std::fs::read_to_string(manifest).map_err(|e| bad(e.to_string()))?;
    let parsed: DesignManifest = toml::from_str(&text).map_err(|e| bad(e.to_string()))?;
    if parsed.design.is_empty() {
        return Err(bad("no [[design]] entries".into()));
    }
    let base = manifest.parent().unwrap_or(Path::new(""));
    parsed
        .design
        .into_iter()
        .map(|d| {
            let path = base.join(&d.path);
            if !path.is_file() {
                return Err(bad(format!(
                    "design '{}': {} does not exist",
                    d.name,
                    path.display()
                )));
            }
            let seq = output::read_sequence_csv(&path)
                .map_err(|e| bad(format!("design '{}': {e}", d.name)))?;
            Ok((d.name, seq))
        })
        .collect()
}

pub fn compute_monte_carlo(
    sc: &Scenario,
    designs: &[(String, UnitModulusSequence)],
    opts: &RunOptions,
) -> CliResult<Run> {
    let err = solver_err(sc);
    let mut report = base_report(sc, opts, "montecarlo");
    report.seed = opts.seed.unwrap_or(sc.montecarlo_seed);
    let t = Instant::now();
    let seqs: Vec<UnitModulusSequence> = designs.iter().map(|(_, s)| s.clone()).collect();
    let [lo, hi] = sc.doppler_uncertainty;
    let models = [
        ErrorModel::UniformRandomPhase,
        ErrorModel::DopplerInterval { lo, hi },
    ];
    let mut stats = Vec::new();
    for model in models {
        let per = monte_carlo_scr(&seqs, &sc.scene, sc.montecarlo_trials, model, report.seed)
            .map_err(&err)?;
        stats.push((model, per));
    }
    report.timings.solve_ms = millis(t);
    let rows: Vec<MonteCarloRow<'_>> = stats
        .iter()
        .flat_map(|(model, per)| {
            designs.iter().zip(per).map(|((name, _), s)| MonteCarloRow {
                error_model: model.name(),
                design: name,
                stats: *s,
            })
        })
        .collect();
    report.montecarlo = rows
        .iter()
        .map(|r| MonteCarloSummary {
            error_model: r.error_model.into(),
            design: r.design.into(),
            mean_db: r.stats.mean_db,
        })
        .collect();
    let mut out = OutputSet::default();
    out.add("montecarlo_scr.csv", output::montecarlo_csv(&rows));
    Ok(Run {
        report,
        outputs: out,
    })
}

/// STAF of an existing sequence. With a scenario, also the Doppler cuts and
/// the clutter-cell mean (reported in `staf.final_clutter_mean_db`).
pub fn compute_staf(
    sequence_path: &Path,
    sc: Option<&Scenario>,
    opts: &RunOptions,
) -> CliResult<Run> {
    let s = output::read_sequence_csv(sequence_path)?;
    let stem = sequence_path
        .file_stem()
        .map(|x| x.to_string_lossy().into_owned())
        .unwrap_or_else(|| "sequence".into());
    let t = Instant::now();
    let grid = full_staf(&s)?;
    let mut out = OutputSet::default();
    out.add("staf.csv", output::staf_csv(&grid));
    let mut report = match sc {
        Some(sc) => {
            if sc.n() != s.len() {
                return Err(CliError::SequenceFile {
                    path: sequence_path.to_path_buf(),
                    message: format!("length {} does not match scenario n = {}", s.len(), sc.n()),
                });
            }
            let mut report = base_report(sc, opts, "staf");
            for &l in &sc.doppler_cuts {
                out.add(
                    format!("doppler_cut_l{l}.csv"),
                    output::doppler_cut_csv(&grid.dopplers, &[("value", &grid.values_db[l])]),
                );
            }
            let mean = clutter_mean_db(&grid, &sc.clutter_cells).unwrap_or(f64::NAN);
            report.staf = Some(StafSummary {
                initial_clutter_mean_db: f64::NAN,
                final_clutter_mean_db: mean,
                suppression_db: f64::NAN,
            });
            report.final_scr_db = Some(scr(&s, &sc.scene).map_err(solver_err(sc))?);
            report
        }
        None => RunReport {
            command: "staf".into(),
            scenario: stem.clone(),
            n: s.len(),
            output_dir: opts
                .out
                .clone()
                .unwrap_or_else(|| Path::new("out").join(&stem).join("staf")),
            ..RunReport::default()
        },
    };
    report.timings.diagnostics_ms = millis(t);
    Ok(Run {
        report,
        outputs: out,
    })
}

pub fn run_wrtr(config: &Path, opts: &RunOptions) -> CliResult<RunReport> {
    compute_wrtr(&Scenario::load(config)?, opts)?.write()
}

pub fn run_baseline(
    config: &Path,
    method: BaselineMethod,
    opts: &RunOptions,
) -> CliResult<RunReport> {
    compute_baseline(&Scenario::load(config)?, method, opts)?.write()
}

pub fn run_monte_carlo(config: &Path, manifest: &Path, opts: &RunOptions) -> CliResult<RunReport> {
    let sc = Scenario::load(config)?;
    let designs = load_designs(manifest)?;
    compute_monte_carlo(&sc, &designs, opts)?.write()
}

pub fn run_staf(sequence: &Path, config: Option<&Path>, opts: &RunOptions) -> CliResult<RunReport> {
    let sc = config.map(Scenario::load).transpose()?;
    compute_staf(sequence, sc.as_ref(), opts)?.write()
}
