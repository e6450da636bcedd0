//! Per-step metrics logging: CSV and JSONL sinks plus a strict reader.
//!
//! Both files carry the same rows. Floats are written with Rust's
//! shortest round-trip formatting, so read-back reproduces every value
//! bit-exactly and resumed runs can extend a file without drift. The
//! reader rejects unknown headers and malformed rows with 1-based file
//! line numbers.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::types::RunMetrics;

/// Column order of the CSV sink.
pub const CSV_HEADER: &str =
    "step,lr,format_reward,accuracy_reward,mean_resp_len,grad_norm,difficult_fraction,resample_count";

pub const CSV_NAME: &str = "metrics.csv";
pub const JSONL_NAME: &str = "metrics.jsonl";

fn csv_row(m: &RunMetrics) -> String {
    format!(
        "{},{},{},{},{},{},{},{}",
        m.step,
        m.lr,
        m.mean_format_reward,
        m.mean_accuracy_reward,
        m.mean_response_length,
        m.grad_norm,
        m.difficult_fraction,
        m.resample_count
    )
}

/// Write a complete metrics CSV (header plus rows) in one shot.
pub fn write_metrics_csv(path: &Path, rows: &[RunMetrics]) -> Result<()> {
    let mut text = String::from(CSV_HEADER);
    text.push('\n');
    for m in rows {
        text.push_str(&csv_row(m));
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

/// Writes one row per step to `metrics.csv` and `metrics.jsonl` in a
/// run directory.
pub struct MetricsWriter {
    csv: BufWriter<File>,
    jsonl: BufWriter<File>,
    csv_path: PathBuf,
}

impl MetricsWriter {
    /// Start fresh files (truncating any existing ones).
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let csv_path = dir.join(CSV_NAME);
        let mut csv = BufWriter::new(File::create(&csv_path)?);
        writeln!(csv, "{CSV_HEADER}")?;
        let jsonl = BufWriter::new(File::create(dir.join(JSONL_NAME))?);
        Ok(Self {
            csv,
            jsonl,
            csv_path,
        })
    }

    /// Reopen existing files for a resumed run, dropping any rows past
    /// `last_step` so the continuation extends a clean prefix.
    pub fn resume(dir: &Path, last_step: usize) -> Result<Self> {
        let csv_path = dir.join(CSV_NAME);
        let retained: Vec<RunMetrics> = if csv_path.exists() {
            read_metrics(&csv_path)?
                .into_iter()
                .filter(|m| m.step <= last_step)
                .collect()
        } else {
            Vec::new()
        };
        let mut writer = Self::create(dir)?;
        for m in &retained {
            writer.write(m)?;
        }
        Ok(writer)
    }

    pub fn write(&mut self, m: &RunMetrics) -> Result<()> {
        writeln!(self.csv, "{}", csv_row(m))?;
        writeln!(self.jsonl, "{}", serde_json::to_string(m)?)?;
        self.csv.flush()?;
        self.jsonl.flush()?;
        Ok(())
    }

    pub fn csv_path(&self) -> &Path {
        &self.csv_path
    }
}

/// Parse a metrics CSV produced by [`MetricsWriter`].
pub fn read_metrics(path: &Path) -> Result<Vec<RunMetrics>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == CSV_HEADER => {}
        Some((_, header)) => {
            return Err(Error::Metrics {
                row: 1,
                reason: format!("unexpected header {header:?}"),
            })
        }
        None => {
            return Err(Error::Metrics {
                row: 1,
                reason: "empty file".into(),
            })
        }
    }
    let mut out = Vec::new();
    for (idx, line) in lines {
        let row = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(Error::Metrics {
                row,
                reason: format!("expected 8 fields, got {}", fields.len()),
            });
        }
        let num = |i: usize| -> Result<f64> {
            fields[i].parse::<f64>().map_err(|e| Error::Metrics {
                row,
                reason: format!("field {}: {e}", i + 1),
            })
        };
        let int = |i: usize| -> Result<usize> {
            fields[i].parse::<usize>().map_err(|e| Error::Metrics {
                row,
                reason: format!("field {}: {e}", i + 1),
            })
        };
        out.push(RunMetrics {
            step: int(0)?,
            lr: num(1)?,
            mean_format_reward: num(2)?,
            mean_accuracy_reward: num(3)?,
            mean_response_length: num(4)?,
            grad_norm: num(5)?,
            difficult_fraction: num(6)?,
            resample_count: int(7)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::TempDir;

    fn sample(step: usize) -> RunMetrics {
        RunMetrics {
            step,
            lr: 0.015 * 0.3333333333333333,
            mean_format_reward: 0.625,
            mean_accuracy_reward: 0.1875,
            mean_response_length: 23.84615384615385,
            grad_norm: 0.0031415926535897933,
            difficult_fraction: 0.6875,
            resample_count: 21,
        }
    }

    #[test]
    fn header_is_the_exact_contract() {
        assert_eq!(
            CSV_HEADER,
            "step,lr,format_reward,accuracy_reward,mean_resp_len,grad_norm,difficult_fraction,resample_count"
        );
    }

    #[test]
    fn rows_round_trip_bit_exactly() {
        let dir = TempDir::new().unwrap();
        let mut w = MetricsWriter::create(dir.path()).unwrap();
        for step in 0..5 {
            w.write(&sample(step)).unwrap();
        }
        drop(w);
        let rows = read_metrics(&dir.path().join(CSV_NAME)).unwrap();
        assert_eq!(rows.len(), 5);
        for (step, row) in rows.iter().enumerate() {
            assert_eq!(*row, sample(step));
        }
        // JSONL carries identical content under the CSV column names.
        let jsonl = std::fs::read_to_string(dir.path().join(JSONL_NAME)).unwrap();
        let first: serde_json::Value = serde_json::from_str(jsonl.lines().next().unwrap()).unwrap();
        assert_eq!(first["grad_norm"], 0.0031415926535897933);
        assert_eq!(first["mean_resp_len"], 23.84615384615385);
        assert_eq!(first["resample_count"], 21);
    }

    #[test]
    fn resume_truncates_rows_past_checkpoint() {
        let dir = TempDir::new().unwrap();
        let mut w = MetricsWriter::create(dir.path()).unwrap();
        for step in 0..10 {
            w.write(&sample(step)).unwrap();
        }
        drop(w);
        let mut w = MetricsWriter::resume(dir.path(), 6).unwrap();
        w.write(&sample(7)).unwrap();
        drop(w);
        let rows = read_metrics(&dir.path().join(CSV_NAME)).unwrap();
        assert_eq!(rows.len(), 8);
        assert_eq!(rows.last().unwrap().step, 7);
    }

    #[test]
    fn reader_rejects_foreign_headers_and_bad_rows() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "step,lr\n1,2\n").unwrap();
        assert!(matches!(
            read_metrics(&path),
            Err(Error::Metrics { row: 1, .. })
        ));
        std::fs::write(&path, format!("{CSV_HEADER}\n1,2,3\n")).unwrap();
        assert!(matches!(
            read_metrics(&path),
            Err(Error::Metrics { row: 2, .. })
        ));
        std::fs::write(&path, format!("{CSV_HEADER}\n1,x,3,4,5,6,7,8\n")).unwrap();
        let err = read_metrics(&path).unwrap_err();
        assert!(err.to_string().contains("field 2"));
    }
}
