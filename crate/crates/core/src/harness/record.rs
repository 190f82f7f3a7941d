//! Run records and their CSV form.
//!
//! Layout: `#`-prefixed config echo and notes, then the header
//! `series,x,value,stderr` and one row per datum in `{:.16e}` format.
//! Nothing time-dependent is written, so identical runs give identical bytes.

use std::path::Path;
use std::time::Duration;

use crate::error::HarnessError;

pub const CSV_HEADER: [&str; 4] = ["series", "x", "value", "stderr"];

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub series: String,
    pub x: f64,
    pub value: f64,
    pub stderr: f64,
}

impl Row {
    pub fn new(series: impl Into<String>, x: f64, value: f64, stderr: f64) -> Self {
        Self {
            series: series.into(),
            x,
            value,
            stderr,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunRecord {
    pub config: Vec<(String, String)>,
    pub version: String,
    pub seed: u64,
    pub rows: Vec<Row>,
    pub notes: Vec<String>,
    /// Set when a numerical failure stopped the run; rows up to it are kept.
    pub failure: Option<String>,
    /// Reported on stderr only.
    pub wall_clock: Duration,
}

impl RunRecord {
    pub fn series<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Row> + 'a {
        self.rows.iter().filter(move |r| r.series == name)
    }

    /// Value of the last row of a series.
    pub fn last_value(&self, name: &str) -> Option<f64> {
        self.series(name).last().map(|r| r.value)
    }

    pub fn series_names(&self) -> Vec<&str> {
        let mut names: Vec<&str> = Vec::new();
        for r in &self.rows {
            if names.last() != Some(&r.series.as_str()) && !names.contains(&r.series.as_str()) {
                names.push(&r.series);
            }
        }
        names
    }

    pub fn to_csv_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        let mut comment = |line: &str| {
            out.extend_from_slice(b"# ");
            out.extend_from_slice(line.as_bytes());
            out.push(b'\n');
        };
        comment(&format!("stochnls {}", self.version));
        for (k, v) in &self.config {
            comment(&format!("{k} = {v}"));
        }
        for n in &self.notes {
            comment(&format!("note: {n}"));
        }
        if let Some(f) = &self.failure {
            comment(&format!("failure: {f}"));
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER).expect("writing to memory");
        for r in &self.rows {
            w.write_record([
                r.series.clone(),
                format!("{:.16e}", r.x),
                format!("{:.16e}", r.value),
                format!("{:.16e}", r.stderr),
            ])
            .expect("writing to memory");
        }
        w.into_inner().expect("flushing to memory")
    }
}

pub fn emit_csv(record: &RunRecord, path: &Path) -> Result<(), HarnessError> {
    let io = |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    std::fs::write(path, record.to_csv_bytes()).map_err(io)
}

/// Reads the data rows of an emitted CSV, skipping comment lines.
pub fn read_csv(text: &str) -> Result<Vec<Row>, csv::Error> {
    let mut rd = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let num = |i: usize| rec[i].parse::<f64>().unwrap_or(f64::NAN);
        rows.push(Row::new(&rec[0], num(1), num(2), num(3)));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_record_has_header_and_comments() {
        let rec = RunRecord {
            config: vec![("experiment".into(), "charge".into())],
            version: "0.0.0".into(),
            ..Default::default()
        };
        let text = String::from_utf8(rec.to_csv_bytes()).unwrap();
        assert_eq!(
            text,
            "# stochnls 0.0.0\n# experiment = charge\nseries,x,value,stderr\n"
        );
        assert!(read_csv(&text).unwrap().is_empty());
    }

    #[test]
    fn values_roundtrip_bitwise() {
        let vals = [
            0.1,
            1.0 / 3.0,
            -2.5e-300,
            6.02214076e23,
            f64::MIN_POSITIVE,
            0.0,
        ];
        let rec = RunRecord {
            rows: vals
                .iter()
                .map(|&v| Row::new("s", v, v * 7.0, v.sqrt()))
                .collect(),
            ..Default::default()
        };
        let back = read_csv(&String::from_utf8(rec.to_csv_bytes()).unwrap()).unwrap();
        for (a, b) in rec.rows.iter().zip(&back) {
            assert_eq!(a.x.to_bits(), b.x.to_bits());
            assert_eq!(a.value.to_bits(), b.value.to_bits());
            assert!(
                a.stderr.to_bits() == b.stderr.to_bits()
                    || (a.stderr.is_nan() && b.stderr.is_nan())
            );
        }
    }
}
