//! Results tables and their CSV / aligned-text renderings.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ReferenceMode};
use super::run::{build_plant, prepare_noise, run_cell};
use crate::acoustics::Eta2;
use crate::dsp::{stft_spectrogram, MetricsReport};
use crate::error::{AncError, Result};
use crate::wavenet::load_checkpoint;

pub const RESULTS_CSV: &str = "results.csv";
pub const RESULTS_TEXT: &str = "results.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub metrics: MetricsReport,
    pub status: CellStatus,
    /// Step size used by adaptive algorithms.
    pub step_size: Option<f64>,
    pub passes: usize,
    /// Why the cell failed; empty on success.
    pub note: String,
}

impl ResultRow {
    fn status_text(&self) -> String {
        match self.status {
            CellStatus::Ok => "ok".into(),
            CellStatus::Failed => format!("failed: {}", self.note),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableMetadata {
    pub config_hash: String,
    pub version: String,
    pub reference_mode: ReferenceMode,
    pub started_unix: u64,
    pub finished_unix: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultsTable {
    pub rows: Vec<ResultRow>,
    pub metadata: TableMetadata,
}

impl ResultsTable {
    pub fn get(&self, algorithm: &str, noise: &str, eta2: Eta2) -> Option<&ResultRow> {
        let e = eta2.to_string();
        self.rows
            .iter()
            .find(|r| r.metrics.algorithm == algorithm && r.metrics.noise == noise && r.metrics.eta2 == e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    AlignedText,
}

fn fmt_db(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.2}")
    } else {
        "NaN".into()
    }
}

pub fn write_csv<W: std::io::Write>(table: &ResultsTable, out: W) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["algorithm", "noise", "eta2", "nmse_db", "dba_db", "status"])?;
    for r in &table.rows {
        let m = &r.metrics;
        w.write_record([
            m.algorithm.clone(),
            m.noise.clone(),
            m.eta2.clone(),
            fmt_db(m.nmse_db),
            fmt_db(m.dba_delta_db),
            r.status_text(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Table-1 layout: one block per η², a (dBA, NMSE) column pair per noise.
pub fn render_text(table: &ResultsTable) -> String {
    let mut algs: Vec<&str> = Vec::new();
    let mut noises: Vec<&str> = Vec::new();
    let mut etas: Vec<&str> = Vec::new();
    for r in &table.rows {
        for (list, v) in [
            (&mut algs, r.metrics.algorithm.as_str()),
            (&mut noises, r.metrics.noise.as_str()),
            (&mut etas, r.metrics.eta2.as_str()),
        ] {
            if !list.contains(&v) {
                list.push(v);
            }
        }
    }
    let md = &table.metadata;
    let mut s = String::new();
    let _ = writeln!(s, "# ancsim {}  config {}", md.version, md.config_hash);
    let _ = writeln!(s, "# started {}  finished {} (unix s)", md.started_unix, md.finished_unix);
    let _ = match md.reference_mode {
        ReferenceMode::Source => writeln!(s, "# reference: source waveform; primary path reference mic -> error mic"),
        ReferenceMode::RefMic => writeln!(s, "# reference: reference-mic signal; disturbance from noise source -> error mic"),
    };
    let name_w = algs.iter().map(|a| a.len()).max().unwrap_or(9).max(9);
    let col_w = noises.iter().map(|n| n.len()).max().unwrap_or(0).max(15);
    for eta in &etas {
        let _ = writeln!(s, "\neta2 = {eta}");
        let _ = write!(s, "{:name_w$}", "");
        for n in &noises {
            let _ = write!(s, "  {n:>col_w$}");
        }
        let _ = write!(s, "\n{:name_w$}", "algorithm");
        for _ in &noises {
            let _ = write!(s, "  {:>w$}", "dBA     NMSE", w = col_w);
        }
        s.push('\n');
        for a in &algs {
            let _ = write!(s, "{a:name_w$}");
            for n in &noises {
                let cell = table
                    .rows
                    .iter()
                    .find(|r| r.metrics.algorithm == *a && r.metrics.noise == *n && r.metrics.eta2 == *eta);
                let text = match cell {
                    Some(r) if r.status == CellStatus::Ok => {
                        format!("{:>7} {:>7}", fmt_db(r.metrics.dba_delta_db), fmt_db(r.metrics.nmse_db))
                    }
                    Some(_) => "failed".into(),
                    None => "-".into(),
                };
                let _ = write!(s, "  {text:>col_w$}");
            }
            s.push('\n');
        }
    }
    let failures: Vec<&ResultRow> = table.rows.iter().filter(|r| r.status == CellStatus::Failed).collect();
    if !failures.is_empty() {
        s.push_str("\nfailed cells:\n");
        for r in failures {
            let m = &r.metrics;
            let _ = writeln!(s, "  {} / {} / eta2={}: {}", m.algorithm, m.noise, m.eta2, r.note);
        }
    }
    s
}

/// Writes the requested renderings into `dir` and returns their paths.
pub fn emit_results(table: &ResultsTable, dir: &Path, formats: &[OutputFormat]) -> Result<Vec<PathBuf>> {
    if table.rows.is_empty() {
        return Err(AncError::Config("results table is empty".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| AncError::io(dir, e))?;
    let mut written = Vec::new();
    for f in formats {
        match f {
            OutputFormat::Csv => {
                let path = dir.join(RESULTS_CSV);
                let mut buf = Vec::new();
                write_csv(table, &mut buf).map_err(|e| AncError::Format(e.to_string()))?;
                std::fs::write(&path, buf).map_err(|e| AncError::io(&path, e))?;
                written.push(path);
            }
            OutputFormat::AlignedText => {
                let path = dir.join(RESULTS_TEXT);
                std::fs::write(&path, render_text(table)).map_err(|e| AncError::io(&path, e))?;
                written.push(path);
            }
        }
    }
    Ok(written)
}

/// One parsed CSV row: algorithm, noise, η², NMSE, dBA, status.
pub type CsvRow = (String, String, String, f64, f64, String);

pub fn read_results_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| AncError::Format(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| AncError::Format(format!("{}: {e}", path.display())))?;
        if rec.len() != 6 {
            return Err(AncError::Format(format!("{}: expected 6 columns", path.display())));
        }
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .parse()
                .map_err(|_| AncError::Format(format!("{}: bad number {:?}", path.display(), &rec[i])))
        };
        out.push((rec[0].to_string(), rec[1].to_string(), rec[2].to_string(), num(3)?, num(4)?, rec[5].to_string()));
    }
    Ok(out)
}

/// Writes ANC-off (disturbance) and ANC-on (residual) spectrograms of one
/// cell as `<stem>_off.csv` and `<stem>_on.csv`.
#[allow(clippy::too_many_arguments)]
pub fn export_spectrograms(
    config: &ExperimentConfig,
    algorithm: &str,
    noise: &str,
    eta2: Eta2,
    frame: usize,
    hop: usize,
    dir: &Path,
) -> Result<(PathBuf, PathBuf)> {
    let spec = config
        .algorithms
        .iter()
        .find(|a| a.label() == algorithm)
        .ok_or_else(|| AncError::Config(format!("no algorithm labelled {algorithm:?}")))?;
    let index = config
        .noises
        .iter()
        .position(|n| n.label() == noise)
        .ok_or_else(|| AncError::Config(format!("no noise labelled {noise:?}")))?;
    let plant = build_plant(config, eta2)?;
    let case = prepare_noise(config, index, &plant)?;
    let mut models = Vec::new();
    if let super::config::AlgorithmSpec::Wavenet { checkpoint, .. } = spec {
        models.push((spec.label(), load_checkpoint(checkpoint)?));
    }
    let run = run_cell(spec, &case, &plant, config, &models)?;
    let d = case.reference.with_samples(case.disturbance.clone());
    let e = case.reference.with_samples(run.error);
    std::fs::create_dir_all(dir).map_err(|e| AncError::io(dir, e))?;
    let stem: String = format!("{algorithm}_{noise}_eta{eta2}")
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' || c == '_' { c } else { '_' })
        .collect();
    let off = dir.join(format!("{stem}_off.csv"));
    let on = dir.join(format!("{stem}_on.csv"));
    stft_spectrogram(&d, frame, hop)?.save_csv(&off)?;
    stft_spectrogram(&e, frame, hop)?.save_csv(&on)?;
    Ok((off, on))
}
