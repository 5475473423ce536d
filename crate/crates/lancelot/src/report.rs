//! Machine-readable experiment and ablation reports.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The settings that identify a run, rendered as sorted `key=value`
/// pairs joined by `;`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Fingerprint(BTreeMap<String, String>);

impl Fingerprint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, value: impl fmt::Display) -> Self {
        self.0.insert(key.to_string(), value.to_string());
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    /// Keys whose values differ, including keys present on one side only.
    pub fn differing_fields(&self, other: &Fingerprint) -> Vec<String> {
        let mut keys: Vec<&String> = self.0.keys().chain(other.0.keys()).collect();
        keys.sort();
        keys.dedup();
        keys.into_iter().filter(|k| self.0.get(*k) != other.0.get(*k)).cloned().collect()
    }
}

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

impl FromStr for Fingerprint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for part in s.split(';').filter(|p| !p.is_empty()) {
            let (k, v) = part.split_once('=').ok_or_else(|| Error::Config(format!("bad fingerprint field {part:?}")))?;
            map.insert(k.to_string(), v.to_string());
        }
        Ok(Fingerprint(map))
    }
}

/// One report line. Times are medians in seconds over `repetitions`;
/// phases a run did not measure are empty.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub fingerprint: String,
    pub variant: String,
    pub repetitions: usize,
    pub time_local: Option<f64>,
    pub time_encrypt: Option<f64>,
    pub time_distance: Option<f64>,
    pub time_select: Option<f64>,
    pub time_aggregate: Option<f64>,
    pub time_decrypt: Option<f64>,
    pub time_total: Option<f64>,
    pub relinearizations: u64,
    pub modups: u64,
    pub rotations: u64,
    pub multiplications: u64,
    /// Baseline `time_total` over this row's `time_total`.
    pub speedup: Option<f64>,
    /// Unfold factor of the slot-sum tree, when the server reduces.
    pub unfold: Option<usize>,
    /// Ciphertexts per client upload.
    pub chunks: usize,
    /// Ciphertexts uploaded by all clients.
    pub ciphertexts: usize,
    pub accuracy: Option<f64>,
    pub divergence: Option<f64>,
}

/// Fills `speedup` on every row against `rows[baseline]`.
pub fn set_speedups(rows: &mut [ReportRow], baseline: usize) {
    let base = rows.get(baseline).and_then(|r| r.time_total);
    for r in rows.iter_mut() {
        r.speedup = match (base, r.time_total) {
            (Some(b), Some(t)) if t > 0.0 && b > 0.0 => Some(b / t),
            _ => None,
        };
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Jsonl,
}

impl Format {
    /// Guesses from the file extension, defaulting to CSV.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") => Format::Jsonl,
            _ => Format::Csv,
        }
    }
}

/// Serializes rows; identical rows give identical bytes.
pub fn render(rows: &[ReportRow], format: Format) -> Result<Vec<u8>> {
    if rows.is_empty() {
        return Err(Error::EmptyReport);
    }
    match format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
            for r in rows {
                w.serialize(r).map_err(|e| Error::Encode(e.to_string()))?;
            }
            w.into_inner().map_err(|e| Error::Encode(e.to_string()))
        }
        Format::Jsonl => {
            let mut out = Vec::new();
            for r in rows {
                serde_json::to_writer(&mut out, r).map_err(|e| Error::Encode(e.to_string()))?;
                out.push(b'\n');
            }
            Ok(out)
        }
    }
}

/// Writes the report; an empty row set is an error and creates no file.
pub fn emit_report(rows: &[ReportRow], format: Format, path: &Path) -> Result<()> {
    let bytes = render(rows, format)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Parses a CSV report back into rows.
pub fn parse_csv(bytes: &[u8]) -> Result<Vec<ReportRow>> {
    csv::Reader::from_reader(bytes)
        .deserialize()
        .collect::<std::result::Result<Vec<ReportRow>, _>>()
        .map_err(|e| Error::Encode(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(variant: &str, total: f64) -> ReportRow {
        ReportRow {
            fingerprint: Fingerprint::new().with("lazy_relin", variant).with("note", "a,b \"c\"").to_string(),
            variant: variant.into(),
            repetitions: 3,
            time_distance: Some(total),
            time_total: Some(total),
            relinearizations: 45,
            chunks: 16,
            ciphertexts: 160,
            ..Default::default()
        }
    }

    #[test]
    fn empty_report_creates_no_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        assert!(matches!(emit_report(&[], Format::Csv, &path), Err(Error::EmptyReport)));
        assert!(!path.exists());
    }

    #[test]
    fn csv_quotes_and_roundtrips() {
        let rows = vec![row("off", 3.0), row("on", 1.2)];
        let bytes = render(&rows, Format::Csv).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with("fingerprint,variant,repetitions,time_local,"));
        assert!(text.contains("\"lazy_relin=off;note=a,b \"\"c\"\"\""));
        assert!(text.ends_with("\r\n"));
        assert_eq!(parse_csv(&bytes).unwrap(), rows);
    }

    #[test]
    fn jsonl_is_one_record_per_line() {
        let bytes = render(&[row("off", 3.0), row("on", 1.0)], Format::Jsonl).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        let back: ReportRow = serde_json::from_str(lines[1]).unwrap();
        assert_eq!(back.variant, "on");
    }

    #[test]
    fn speedup_is_time_ratio() {
        let mut rows = vec![row("off", 3.0), row("on", 1.2), row("zero", 0.0)];
        set_speedups(&mut rows, 0);
        assert_eq!(rows[0].speedup, Some(1.0));
        assert_eq!(rows[1].speedup, Some(3.0 / 1.2));
        assert_eq!(rows[2].speedup, None);
        // the printed cells reproduce the ratio
        let parsed = parse_csv(&render(&rows, Format::Csv).unwrap()).unwrap();
        let r = &parsed[1];
        assert_eq!(r.speedup.unwrap(), parsed[0].time_total.unwrap() / r.time_total.unwrap());
    }

    #[test]
    fn fingerprint_differences() {
        let a = Fingerprint::new().with("n", 10).with("lazy", "on");
        let b = Fingerprint::new().with("n", 10).with("lazy", "off");
        assert_eq!(a.to_string(), "lazy=on;n=10");
        assert_eq!(a.differing_fields(&b), ["lazy"]);
        assert_eq!(a.to_string().parse::<Fingerprint>().unwrap(), a);
        assert_eq!(a.differing_fields(&Fingerprint::new().with("n", 10)), ["lazy"]);
    }
}
