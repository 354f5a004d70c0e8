//! CSV input/output with provenance headers.
//!
//! Every emitted CSV starts with `#`-prefixed provenance lines (tool
//! version, config hash, seed), then a mandatory header row. Floats are
//! written in shortest round-trip form, so re-ingestion is lossless and
//! repeated runs with the same inputs are byte-identical.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::signal::{LdTrace, SpectralPeak};

/// Provenance stamped into every output file.
#[derive(Debug, Clone)]
pub struct Provenance {
    pub tool: String,
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    pub fn new(config_hash: impl Into<String>, seed: u64) -> Self {
        Provenance {
            tool: format!("he2rot {}", env!("CARGO_PKG_VERSION")),
            config_hash: config_hash.into(),
            seed,
        }
    }

    fn header(&self) -> String {
        format!(
            "# {}\n# config_hash = {}\n# seed = {}\n",
            self.tool, self.config_hash, self.seed
        )
    }
}

/// Shortest round-trip float formatting, scientific for extreme magnitudes.
pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else if v.abs() >= 1e7 || v.abs() < 1e-4 {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

/// Write a CSV with provenance comments, a header line and prebuilt rows.
pub fn write_csv(path: &Path, prov: &Provenance, header: &str, rows: &[String]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut text = prov.header();
    text.push_str(header);
    text.push('\n');
    for row in rows {
        text.push_str(row);
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Write the structured-text fit report (comments + `key = value` lines).
pub fn write_report(path: &Path, prov: &Provenance, entries: &[(String, String)]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut text = prov.header();
    for (k, v) in entries {
        let _ = writeln!(text, "{k} = {v}");
    }
    std::fs::write(path, text)?;
    Ok(())
}

struct CsvReader {
    path: PathBuf,
    header: Vec<String>,
    rows: Vec<(u64, Vec<String>)>,
}

fn read_csv_file(path: &Path) -> Result<CsvReader> {
    let text = std::fs::read_to_string(path)?;
    let mut header = None;
    let mut rows = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let n = i as u64 + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
        if header.is_none() {
            header = Some(fields);
        } else {
            rows.push((n, fields));
        }
    }
    let header = header.ok_or_else(|| Error::CsvParse {
        path: path.to_path_buf(),
        line: 0,
        message: "no header row found".into(),
    })?;
    Ok(CsvReader {
        path: path.to_path_buf(),
        header,
        rows,
    })
}

impl CsvReader {
    fn expect_header(&self, expected: &[&str]) -> Result<()> {
        if self.header != expected {
            return Err(Error::CsvParse {
                path: self.path.clone(),
                line: 1,
                message: format!(
                    "expected header `{}`, got `{}`",
                    expected.join(","),
                    self.header.join(",")
                ),
            });
        }
        Ok(())
    }

    fn number(&self, line: u64, field: &str) -> Result<f64> {
        field.parse::<f64>().map_err(|e| Error::CsvParse {
            path: self.path.clone(),
            line,
            message: format!("bad number `{field}`: {e}"),
        })
    }
}

/// Read a two-column numeric CSV with the given header names.
pub fn read_xy_csv(path: &Path, x_name: &str, y_name: &str) -> Result<Vec<(f64, f64)>> {
    let reader = read_csv_file(path)?;
    reader.expect_header(&[x_name, y_name])?;
    let mut out = Vec::with_capacity(reader.rows.len());
    for (line, fields) in &reader.rows {
        if fields.len() != 2 {
            return Err(Error::CsvParse {
                path: reader.path.clone(),
                line: *line,
                message: format!("expected 2 fields, got {}", fields.len()),
            });
        }
        out.push((
            reader.number(*line, &fields[0])?,
            reader.number(*line, &fields[1])?,
        ));
    }
    if out.is_empty() {
        return Err(Error::CsvParse {
            path: reader.path,
            line: 0,
            message: "no data rows".into(),
        });
    }
    Ok(out)
}

/// Trace CSV: `t_ps,ld`.
pub fn write_trace_csv(path: &Path, prov: &Provenance, trace: &LdTrace) -> Result<()> {
    let rows: Vec<String> = trace
        .times()
        .zip(trace.values())
        .map(|(t, v)| format!("{},{}", fmt_f64(t), fmt_f64(*v)))
        .collect();
    write_csv(path, prov, "t_ps,ld", &rows)
}

pub fn read_trace_csv(path: &Path) -> Result<LdTrace> {
    let points = read_xy_csv(path, "t_ps", "ld")?;
    let t: Vec<f64> = points.iter().map(|p| p.0).collect();
    let v: Vec<f64> = points.iter().map(|p| p.1).collect();
    LdTrace::from_points(&t, &v, format!("ingested from {}", path.display()))
}

/// Spectrum CSV: `freq_thz,amplitude,label` — the full magnitude curve with
/// labels set on the rows nearest the detected peaks.
pub fn write_spectrum_csv(
    path: &Path,
    prov: &Provenance,
    freq_thz: &[f64],
    amplitude: &[f64],
    peaks: &[SpectralPeak],
) -> Result<()> {
    let mut labels = vec![String::new(); freq_thz.len()];
    for p in peaks {
        if p.label.is_empty() {
            continue;
        }
        let mut best = 0usize;
        let mut dist = f64::MAX;
        for (i, &f) in freq_thz.iter().enumerate() {
            let d = (f - p.frequency_thz).abs();
            if d < dist {
                dist = d;
                best = i;
            }
        }
        labels[best] = p.label.clone();
    }
    let rows: Vec<String> = freq_thz
        .iter()
        .zip(amplitude)
        .zip(&labels)
        .map(|((&f, &a), l)| format!("{},{},{}", fmt_f64(f), fmt_f64(a), l))
        .collect();
    write_csv(path, prov, "freq_thz,amplitude,label", &rows)
}

/// Read a spectrum CSV back as (frequency, amplitude, label) triples.
pub fn read_spectrum_csv(path: &Path) -> Result<Vec<(f64, f64, String)>> {
    let reader = read_csv_file(path)?;
    reader.expect_header(&["freq_thz", "amplitude", "label"])?;
    let mut out = Vec::with_capacity(reader.rows.len());
    for (line, fields) in &reader.rows {
        if fields.len() != 3 {
            return Err(Error::CsvParse {
                path: reader.path.clone(),
                line: *line,
                message: format!("expected 3 fields, got {}", fields.len()),
            });
        }
        out.push((
            reader.number(*line, &fields[0])?,
            reader.number(*line, &fields[1])?,
            fields[2].clone(),
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::TimeGrid;

    #[test]
    fn trace_round_trip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        let grid = TimeGrid::from_span(0.0, 10.0, 0.1).unwrap();
        let values: Vec<f64> = (0..grid.len).map(|i| (i as f64 * 0.731).sin() * 1e-3).collect();
        let trace = LdTrace::new(grid, values, "test").unwrap();
        let prov = Provenance::new("deadbeef", 42);
        write_trace_csv(&path, &prov, &trace).unwrap();
        let back = read_trace_csv(&path).unwrap();
        assert_eq!(trace.values(), back.values());
        assert_eq!(trace.grid().dt_ps, back.grid().dt_ps);
        // header carries provenance
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# he2rot"));
        assert!(text.contains("# config_hash = deadbeef"));
        assert!(text.contains("# seed = 42"));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "# comment\nt_ps,ld\n0,0.5\n0.1,not_a_number\n").unwrap();
        let err = read_trace_csv(&path).unwrap_err();
        match err {
            Error::CsvParse { line, .. } => assert_eq!(line, 4),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn header_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "time,value\n0,0.5\n").unwrap();
        assert!(matches!(
            read_trace_csv(&path),
            Err(Error::CsvParse { line: 1, .. })
        ));
    }

    #[test]
    fn fmt_round_trips_extremes() {
        for v in [0.0, 1.9e13, 2.27, -3.5e-9, 1e-4, 123456.789, f64::MIN_POSITIVE] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
    }
}
