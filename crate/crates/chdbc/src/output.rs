//! CSV and JSON writers.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;

use chdbc_core::diagnostics::{DiagnosticsRecord, TrajectorySink};
use chdbc_core::solver::State;

use crate::CliError;

/// Streams records to a CSV file, header first.
///
/// The core sink trait only carries a string error, so the first I/O failure
/// is also kept here to be reported with the right exit code.
pub struct CsvSink {
    path: PathBuf,
    writer: csv::Writer<BufWriter<File>>,
    rows: usize,
    failure: Option<String>,
}

impl CsvSink {
    pub fn create(path: &Path) -> Result<Self, CliError> {
        let file = File::create(path).map_err(|e| CliError::io(path, e))?;
        let mut writer = csv::Writer::from_writer(BufWriter::new(file));
        writer.write_record(DiagnosticsRecord::FIELDS).map_err(|e| CliError::io(path, e))?;
        Ok(Self { path: path.to_path_buf(), writer, rows: 0, failure: None })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Flushes and surfaces any error hit while streaming.
    pub fn finish(mut self) -> Result<usize, CliError> {
        if let Some(m) = self.failure.take() {
            return Err(CliError::io(&self.path, m));
        }
        self.writer.flush().map_err(|e| CliError::io(&self.path, e))?;
        Ok(self.rows)
    }

    /// The stored I/O failure, if the run was aborted by this sink.
    pub fn failure(&self) -> Option<CliError> {
        self.failure.as_ref().map(|m| CliError::io(&self.path, m))
    }
}

impl TrajectorySink for CsvSink {
    fn on_record(&mut self, record: &DiagnosticsRecord) -> chdbc_core::Result<()> {
        // f64 Display is shortest round-trip and locale independent
        let row = record.values().map(|v| v.to_string());
        if let Err(e) = self.writer.write_record(&row) {
            let m = e.to_string();
            self.failure = Some(m.clone());
            return Err(chdbc_core::Error::Sink(m));
        }
        self.rows += 1;
        Ok(())
    }
}

/// Lets a sink be lent into a fan-out pair.
pub struct Borrowed<'a, S: TrajectorySink>(pub &'a mut S);

impl<S: TrajectorySink> TrajectorySink for Borrowed<'_, S> {
    fn on_record(&mut self, record: &DiagnosticsRecord) -> chdbc_core::Result<()> {
        self.0.on_record(record)
    }

    fn on_state(&mut self, state: &State) -> chdbc_core::Result<()> {
        self.0.on_state(state)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(path, e))?;
    std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

/// Reads a CSV written by [`CsvSink`] back into records.
pub fn read_csv(path: &Path) -> Result<Vec<DiagnosticsRecord>, CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::io(path, e))?;
    let header = reader.headers().map_err(|e| CliError::io(path, e))?.clone();
    if header.iter().ne(DiagnosticsRecord::FIELDS) {
        return Err(CliError::io(path, "unexpected header"));
    }
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| CliError::io(path, e))?;
        let v: Vec<f64> = row
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::io(path, e))?;
        if v.len() != DiagnosticsRecord::FIELDS.len() {
            return Err(CliError::io(path, "wrong column count"));
        }
        out.push(DiagnosticsRecord {
            t: v[0],
            mean_rho: v[1],
            energy: v[2],
            grad_mu_norm: v[3],
            dtrho_norm: v[4],
            mean_mu: v[5],
            hstar_dtrho: v[6],
            stat_residual: v[7],
            dtrho_bulk: v[8],
            dtrho_surf: v[9],
        });
    }
    Ok(out)
}
