//! CSV and JSON artifacts. Everything is rendered in memory first and only
//! written once a run has fully succeeded.

use std::path::{Path, PathBuf};

use wrtr_core::manifold::{UnitModulusSequence, C64};
use wrtr_core::radar::Staf;
use wrtr_core::rcg::RcgTrace;
use wrtr_core::rtr::TrustRegionTrace;
use wrtr_core::wrtr::{OuterRecord, ScrStats};

use crate::error::{CliError, CliResult};

/// 17 significant digits, enough to round-trip any `f64` exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Clone, Debug, Default)]
pub struct OutputSet {
    files: Vec<(String, Vec<u8>)>,
}

impl OutputSet {
    pub fn add(&mut self, name: impl Into<String>, contents: Vec<u8>) {
        self.files.push((name.into(), contents));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, c)| c.as_slice())
    }

    pub fn write_all(&self, dir: &Path) -> CliResult<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        self.files
            .iter()
            .map(|(name, contents)| {
                let path = dir.join(name);
                std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
                Ok(path)
            })
            .collect()
    }
}

struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    fn new<I, S>(header: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).expect("writing to memory");
        Self { writer }
    }

    fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).expect("writing to memory");
    }

    fn finish(self) -> Vec<u8> {
        self.writer.into_inner().expect("flushing to memory")
    }
}

pub fn sequence_csv(s: &UnitModulusSequence) -> Vec<u8> {
    let mut t = Table::new(["index", "re", "im"]);
    for (i, z) in s.iter().enumerate() {
        t.row([i.to_string(), fmt_f64(z.re), fmt_f64(z.im)]);
    }
    t.finish()
}

pub fn parse_sequence_csv(text: &[u8], path: &Path) -> CliResult<UnitModulusSequence> {
    let bad = |message: String| CliError::SequenceFile {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::Reader::from_reader(text);
    let header = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != ["index", "re", "im"] {
        return Err(bad("expected header index,re,im".into()));
    }
    let mut entries = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let field = |k: usize| -> CliResult<&str> {
            rec.get(k)
                .ok_or_else(|| bad(format!("row {}: missing column {k}", row + 1)))
        };
        let index: usize = field(0)?
            .parse()
            .map_err(|e| bad(format!("row {}: index: {e}", row + 1)))?;
        if index != row {
            return Err(bad(format!(
                "row {}: expected index {row}, got {index}",
                row + 1
            )));
        }
        let re: f64 = field(1)?
            .parse()
            .map_err(|e| bad(format!("row {}: re: {e}", row + 1)))?;
        let im: f64 = field(2)?
            .parse()
            .map_err(|e| bad(format!("row {}: im: {e}", row + 1)))?;
        entries.push(C64::new(re, im));
    }
    UnitModulusSequence::new(entries).map_err(|e| bad(e.to_string()))
}

pub fn read_sequence_csv(path: &Path) -> CliResult<UnitModulusSequence> {
    let text = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    parse_sequence_csv(&text, path)
}

/// Rows are range bins, columns Doppler bins `h = 0..N−1`.
pub fn staf_csv(staf: &Staf) -> Vec<u8> {
    let header = std::iter::once("range_bin".to_string())
        .chain((0..staf.dopplers.len()).map(|h| format!("h{h}")));
    let mut t = Table::new(header);
    for (r, row) in staf.range_bins.iter().zip(&staf.values_db) {
        t.row(std::iter::once(r.to_string()).chain(row.iter().map(|&v| fmt_f64(v))));
    }
    t.finish()
}

pub fn doppler_cut_csv(dopplers: &[f64], columns: &[(&str, &[f64])]) -> Vec<u8> {
    let header = ["doppler_bin", "doppler"]
        .into_iter()
        .map(String::from)
        .chain(columns.iter().map(|(n, _)| format!("{n}_db")));
    let mut t = Table::new(header);
    for (h, &v) in dopplers.iter().enumerate() {
        t.row(
            [h.to_string(), fmt_f64(v)]
                .into_iter()
                .chain(columns.iter().map(|(_, c)| fmt_f64(c[h]))),
        );
    }
    t.finish()
}

/// One block of rows per solve; row 0 of each block is the starting point.
pub fn trust_region_trace_csv(traces: &[TrustRegionTrace]) -> Vec<u8> {
    let mut t = Table::new([
        "outer",
        "iteration",
        "cost",
        "grad_norm",
        "rho",
        "delta",
        "accepted",
        "step_norm",
        "tcg_stop",
        "inner_iterations",
    ]);
    for (outer, trace) in traces.iter().enumerate() {
        t.row([
            outer.to_string(),
            "0".into(),
            fmt_f64(trace.initial_cost),
            fmt_f64(trace.initial_grad_norm),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
        ]);
        for (k, r) in trace.records.iter().enumerate() {
            t.row([
                outer.to_string(),
                (k + 1).to_string(),
                fmt_f64(r.cost),
                fmt_f64(r.grad_norm),
                fmt_f64(r.rho),
                fmt_f64(r.delta),
                r.accepted.to_string(),
                fmt_f64(r.step_norm),
                r.tcg_stop.as_str().into(),
                r.inner_iterations.to_string(),
            ]);
        }
    }
    t.finish()
}

pub fn rcg_trace_csv(trace: &RcgTrace) -> Vec<u8> {
    let mut t = Table::new([
        "iteration",
        "cost",
        "grad_norm",
        "step_size",
        "backtracks",
        "restarted",
    ]);
    t.row([
        "0".into(),
        fmt_f64(trace.initial_cost),
        fmt_f64(trace.initial_grad_norm),
        String::new(),
        String::new(),
        String::new(),
    ]);
    for (k, r) in trace.records.iter().enumerate() {
        t.row([
            (k + 1).to_string(),
            fmt_f64(r.cost),
            fmt_f64(r.grad_norm),
            fmt_f64(r.step_size),
            r.backtracks.to_string(),
            r.restarted.to_string(),
        ]);
    }
    t.finish()
}

pub fn outer_history_csv(history: &[OuterRecord]) -> Vec<u8> {
    let mut t = Table::new(["outer", "scr_db", "scnr_db", "worst_cost", "seq_cost"]);
    for (k, h) in history.iter().enumerate() {
        t.row([
            k.to_string(),
            fmt_f64(h.scr_db),
            fmt_f64(h.scnr_db),
            fmt_f64(h.worst_cost),
            fmt_f64(h.seq_cost),
        ]);
    }
    t.finish()
}

/// Ascending eigenvalues, one column per problem.
pub fn spectrum_csv(columns: &[(&str, &[f64])]) -> Vec<u8> {
    let header = std::iter::once("index").chain(columns.iter().map(|(n, _)| *n));
    let mut t = Table::new(header);
    let len = columns.iter().map(|(_, c)| c.len()).max().unwrap_or(0);
    for i in 0..len {
        t.row(
            std::iter::once(i.to_string()).chain(
                columns
                    .iter()
                    .map(|(_, c)| c.get(i).map_or(String::new(), |&v| fmt_f64(v))),
            ),
        );
    }
    t.finish()
}

pub struct MonteCarloRow<'a> {
    pub error_model: &'a str,
    pub design: &'a str,
    pub stats: ScrStats,
}

pub fn montecarlo_csv(rows: &[MonteCarloRow<'_>]) -> Vec<u8> {
    let mut t = Table::new([
        "error_model",
        "design",
        "trials",
        "mean_db",
        "min_db",
        "max_db",
        "std_db",
    ]);
    for r in rows {
        t.row([
            r.error_model.to_string(),
            r.design.to_string(),
            r.stats.trials.to_string(),
            fmt_f64(r.stats.mean_db),
            fmt_f64(r.stats.min_db),
            fmt_f64(r.stats.max_db),
            fmt_f64(r.stats.std_db),
        ]);
    }
    t.finish()
}
