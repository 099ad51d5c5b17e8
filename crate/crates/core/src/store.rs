//! Persistence for expensive optimizer results, measured-spectrum overlays,
//! and tabular outputs.
//!
//! The cache is a line-oriented UTF-8 text file, one self-describing
//! `key=value` record per line, diffable and safe against interrupted writes:
//! every update rewrites the whole file to a temporary sibling and renames it
//! over the target. Records are keyed by `(n, eta, settings fingerprint)`
//! with `eta` canonicalized to six decimal places.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::optimize::ExtrapolationFit;

/// Errors of the persistence layer.
#[derive(Debug, Error)]
pub enum StoreError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("cache record {index} in {path} is corrupt: {reason}")]
    CorruptRecord {
        path: PathBuf,
        index: usize,
        reason: String,
    },

    #[error("cache key (n={n}, eta={eta}, fingerprint={fingerprint}) already holds a different payload")]
    KeyConflict {
        n: u32,
        eta: String,
        fingerprint: String,
    },

    #[error("spectrum file {path}, line {line}: {reason}")]
    SpectrumFormat {
        path: PathBuf,
        line: usize,
        reason: String,
    },
}

pub type StoreResult<T> = std::result::Result<T, StoreError>;

/// Canonical cache key form of a loss parameter: six decimal places.
pub fn canonical_eta(eta: f64) -> String {
    format!("{eta:.6}")
}

/// A cached optimizer result.
#[derive(Debug, Clone, PartialEq)]
pub struct CacheRecord {
    pub n: u32,
    pub eta: f64,
    pub coeffs: Vec<f64>,
    pub qfi: f64,
    pub converged: bool,
    pub settings_fingerprint: String,
}

impl CacheRecord {
    fn key(&self) -> RecordKey {
        RecordKey {
            kind: "opt".into(),
            parts: vec![
                self.n.to_string(),
                canonical_eta(self.eta),
                self.settings_fingerprint.clone(),
            ],
        }
    }

    fn to_line(&self) -> String {
        let mut coeffs = String::new();
        for (i, c) in self.coeffs.iter().enumerate() {
            if i > 0 {
                coeffs.push(',');
            }
            let _ = write!(coeffs, "{c:e}");
        }
        format!(
            "opt n={} eta={} fp={} converged={} qfi={:e} coeffs={}",
            self.n,
            canonical_eta(self.eta),
            self.settings_fingerprint,
            self.converged,
            self.qfi,
            coeffs
        )
    }
}

/// A cached extrapolation fit, keyed by loss, fingerprint and fit range.
#[derive(Debug, Clone, PartialEq)]
pub struct FitRecord {
    pub eta: f64,
    pub n_lo: u32,
    pub n_hi: u32,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub max_relative_residual: f64,
    pub settings_fingerprint: String,
}

impl FitRecord {
    pub fn from_fit(fit: &ExtrapolationFit, fingerprint: &str) -> Self {
        Self {
            eta: fit.eta,
            n_lo: fit.fit_n_range.0,
            n_hi: fit.fit_n_range.1,
            a: fit.a,
            b: fit.b,
            c: fit.c,
            max_relative_residual: fit.max_relative_residual,
            settings_fingerprint: fingerprint.to_string(),
        }
    }

    pub fn to_fit(&self) -> ExtrapolationFit {
        ExtrapolationFit {
            a: self.a,
            b: self.b,
            c: self.c,
            eta: self.eta,
            fit_n_range: (self.n_lo, self.n_hi),
            max_relative_residual: self.max_relative_residual,
        }
    }

    fn key(&self) -> RecordKey {
        RecordKey {
            kind: "fit".into(),
            parts: vec![
                canonical_eta(self.eta),
                self.settings_fingerprint.clone(),
                self.n_lo.to_string(),
                self.n_hi.to_string(),
            ],
        }
    }

    fn to_line(&self) -> String {
        format!(
            "fit eta={} fp={} nlo={} nhi={} a={:e} b={:e} c={:e} maxres={:e}",
            canonical_eta(self.eta),
            self.settings_fingerprint,
            self.n_lo,
            self.n_hi,
            self.a,
            self.b,
            self.c,
            self.max_relative_residual
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct RecordKey {
    kind: String,
    parts: Vec<String>,
}

fn io_err(path: &Path, source: io::Error) -> StoreError {
    StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_fields<'a>(
    line: &'a str,
    path: &Path,
    index: usize,
) -> StoreResult<(&'a str, BTreeMap<&'a str, &'a str>)> {
    let mut tokens = line.split_whitespace();
    let kind = tokens.next().ok_or_else(|| StoreError::CorruptRecord {
        path: path.to_path_buf(),
        index,
        reason: "empty record".into(),
    })?;
    let mut fields = BTreeMap::new();
    for tok in tokens {
        let (k, v) = tok.split_once('=').ok_or_else(|| StoreError::CorruptRecord {
            path: path.to_path_buf(),
            index,
            reason: format!("token `{tok}` is not key=value"),
        })?;
        fields.insert(k, v);
    }
    Ok((kind, fields))
}

fn field<'a>(
    fields: &BTreeMap<&'a str, &'a str>,
    name: &str,
    path: &Path,
    index: usize,
) -> StoreResult<&'a str> {
    fields
        .get(name)
        .copied()
        .ok_or_else(|| StoreError::CorruptRecord {
            path: path.to_path_buf(),
            index,
            reason: format!("missing field `{name}`"),
        })
}

fn parse_num<T: std::str::FromStr>(
    raw: &str,
    name: &str,
    path: &Path,
    index: usize,
) -> StoreResult<T> {
    raw.parse().map_err(|_| StoreError::CorruptRecord {
        path: path.to_path_buf(),
        index,
        reason: format!("field `{name}` = `{raw}` is not numeric"),
    })
}

fn parse_record(line: &str, path: &Path, index: usize) -> StoreResult<(RecordKey, String)> {
    let (kind, fields) = parse_fields(line, path, index)?;
    match kind {
        "opt" => {
            let n: u32 = parse_num(field(&fields, "n", path, index)?, "n", path, index)?;
            let eta = field(&fields, "eta", path, index)?.to_string();
            let fp = field(&fields, "fp", path, index)?.to_string();
            // validate the numeric payload eagerly so corruption surfaces here
            let _: f64 = parse_num(field(&fields, "qfi", path, index)?, "qfi", path, index)?;
            let _: bool = parse_num(
                field(&fields, "converged", path, index)?,
                "converged",
                path,
                index,
            )?;
            for c in field(&fields, "coeffs", path, index)?.split(',') {
                let _: f64 = parse_num(c, "coeffs", path, index)?;
            }
            Ok((
                RecordKey {
                    kind: "opt".into(),
                    parts: vec![n.to_string(), eta, fp],
                },
                line.to_string(),
            ))
        }
        "fit" => {
            let eta = field(&fields, "eta", path, index)?.to_string();
            let fp = field(&fields, "fp", path, index)?.to_string();
            let nlo: u32 = parse_num(field(&fields, "nlo", path, index)?, "nlo", path, index)?;
            let nhi: u32 = parse_num(field(&fields, "nhi", path, index)?, "nhi", path, index)?;
            for name in ["a", "b", "c", "maxres"] {
                let _: f64 = parse_num(field(&fields, name, path, index)?, name, path, index)?;
            }
            Ok((
                RecordKey {
                    kind: "fit".into(),
                    parts: vec![eta, fp, nlo.to_string(), nhi.to_string()],
                },
                line.to_string(),
            ))
        }
        other => Err(StoreError::CorruptRecord {
            path: path.to_path_buf(),
            index,
            reason: format!("unknown record kind `{other}`"),
        }),
    }
}

fn load_records(path: &Path) -> StoreResult<BTreeMap<RecordKey, String>> {
    let mut map = BTreeMap::new();
    if !path.exists() {
        return Ok(map);
    }
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    for (index, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (key, stored) = parse_record(trimmed, path, index)?;
        map.insert(key, stored);
    }
    Ok(map)
}

/// Writes the record set to a temporary sibling file, then renames it over
/// the target, so readers never observe a half-written cache.
fn write_records(path: &Path, records: &BTreeMap<RecordKey, String>) -> StoreResult<()> {
    let mut text = String::new();
    for line in records.values() {
        text.push_str(line);
        text.push('\n');
    }
    let tmp = path.with_extension(format!("tmp.{}", std::process::id()));
    fs::write(&tmp, text).map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))?;
    Ok(())
}

/// Inserts or replaces an optimizer record. A key collision with a different
/// payload is an error unless `overwrite` is set; re-putting an identical
/// payload is an idempotent success.
pub fn cache_put(record: &CacheRecord, path: &Path, overwrite: bool) -> StoreResult<()> {
    let mut records = load_records(path)?;
    let key = record.key();
    let line = record.to_line();
    if let Some(existing) = records.get(&key) {
        if *existing == line {
            return Ok(());
        }
        if !overwrite {
            return Err(StoreError::KeyConflict {
                n: record.n,
                eta: canonical_eta(record.eta),
                fingerprint: record.settings_fingerprint.clone(),
            });
        }
    }
    records.insert(key, line);
    write_records(path, &records)
}

/// Exact-key lookup with canonical eta rounding. A missing file or key is
/// `None`, not an error.
pub fn cache_get(
    n: u32,
    eta: f64,
    fingerprint: &str,
    path: &Path,
) -> StoreResult<Option<CacheRecord>> {
    let records = load_records(path)?;
    let key = RecordKey {
        kind: "opt".into(),
        parts: vec![n.to_string(), canonical_eta(eta), fingerprint.to_string()],
    };
    let Some(line) = records.get(&key) else {
        return Ok(None);
    };
    let (_, fields) = parse_fields(line, path, 0)?;
    let coeffs = field(&fields, "coeffs", path, 0)?
        .split(',')
        .map(|c| parse_num(c, "coeffs", path, 0))
        .collect::<StoreResult<Vec<f64>>>()?;
    Ok(Some(CacheRecord {
        n,
        eta: parse_num(field(&fields, "eta", path, 0)?, "eta", path, 0)?,
        coeffs,
        qfi: parse_num(field(&fields, "qfi", path, 0)?, "qfi", path, 0)?,
        converged: parse_num(field(&fields, "converged", path, 0)?, "converged", path, 0)?,
        settings_fingerprint: fingerprint.to_string(),
    }))
}

/// Stores an extrapolation fit alongside optimizer records.
pub fn fit_put(record: &FitRecord, path: &Path, overwrite: bool) -> StoreResult<()> {
    let mut records = load_records(path)?;
    let key = record.key();
    let line = record.to_line();
    if let Some(existing) = records.get(&key) {
        if *existing == line {
            return Ok(());
        }
        if !overwrite {
            return Err(StoreError::KeyConflict {
                n: record.n_lo,
                eta: canonical_eta(record.eta),
                fingerprint: record.settings_fingerprint.clone(),
            });
        }
    }
    records.insert(key, line);
    write_records(path, &records)
}

/// Looks up a stored fit by loss, fingerprint and range.
pub fn fit_get(
    eta: f64,
    fingerprint: &str,
    n_lo: u32,
    n_hi: u32,
    path: &Path,
) -> StoreResult<Option<FitRecord>> {
    let records = load_records(path)?;
    let key = RecordKey {
        kind: "fit".into(),
        parts: vec![
            canonical_eta(eta),
            fingerprint.to_string(),
            n_lo.to_string(),
            n_hi.to_string(),
        ],
    };
    let Some(line) = records.get(&key) else {
        return Ok(None);
    };
    let (_, fields) = parse_fields(line, path, 0)?;
    Ok(Some(FitRecord {
        eta: parse_num(field(&fields, "eta", path, 0)?, "eta", path, 0)?,
        n_lo,
        n_hi,
        a: parse_num(field(&fields, "a", path, 0)?, "a", path, 0)?,
        b: parse_num(field(&fields, "b", path, 0)?, "b", path, 0)?,
        c: parse_num(field(&fields, "c", path, 0)?, "c", path, 0)?,
        max_relative_residual: parse_num(field(&fields, "maxres", path, 0)?, "maxres", path, 0)?,
        settings_fingerprint: fingerprint.to_string(),
    }))
}

/// A measured strain spectrum loaded for overlay purposes.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasuredSpectrum {
    /// `(frequency_hz, delta_h per sqrt(Hz))`, frequencies strictly
    /// increasing.
    pub points: Vec<(f64, f64)>,
    pub label: String,
}

/// Reads a two-column numeric text file (comma or whitespace separated, an
/// optional header row is skipped). Frequencies must increase strictly and
/// values must be positive.
pub fn load_measured_spectrum(path: &Path) -> StoreResult<MeasuredSpectrum> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut points = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        if cols.len() != 2 {
            return Err(StoreError::SpectrumFormat {
                path: path.to_path_buf(),
                line: idx + 1,
                reason: format!("expected 2 columns, found {}", cols.len()),
            });
        }
        let parsed: Option<(f64, f64)> = match (cols[0].parse(), cols[1].parse()) {
            (Ok(f), Ok(h)) => Some((f, h)),
            _ => None,
        };
        match parsed {
            Some((f, h)) => {
                if !(f > 0.0 && h > 0.0) {
                    return Err(StoreError::SpectrumFormat {
                        path: path.to_path_buf(),
                        line: idx + 1,
                        reason: "frequency and strain must be positive".into(),
                    });
                }
                if let Some(&(prev, _)) = points.last() {
                    if f <= prev {
                        return Err(StoreError::SpectrumFormat {
                            path: path.to_path_buf(),
                            line: idx + 1,
                            reason: format!("frequency {f} does not increase past {prev}"),
                        });
                    }
                }
                points.push((f, h));
            }
            None if points.is_empty() => {
                // header row
                continue;
            }
            None => {
                return Err(StoreError::SpectrumFormat {
                    path: path.to_path_buf(),
                    line: idx + 1,
                    reason: "non-numeric row after data rows".into(),
                });
            }
        }
    }
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "measured".into());
    Ok(MeasuredSpectrum { points, label })
}

/// A table row type with a fixed schema.
pub trait TableRow {
    const HEADER: &'static str;
    fn write_row(&self, out: &mut String);
}

/// Row of a strain-spectrum table.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumRow {
    pub frequency_hz: f64,
    pub delta_h_per_sqrt_hz: f64,
    pub curve: String,
}

impl TableRow for SpectrumRow {
    const HEADER: &'static str = "frequency_hz,delta_h_per_sqrt_hz,curve";

    fn write_row(&self, out: &mut String) {
        let _ = write!(
            out,
            "{:.6e},{:.6e},{}",
            self.frequency_hz, self.delta_h_per_sqrt_hz, self.curve
        );
    }
}

/// Row of a precision-ratio table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioRow {
    pub mean_photons: f64,
    pub loss: f64,
    pub ratio: f64,
}

impl TableRow for RatioRow {
    const HEADER: &'static str = "mean_photons,loss,ratio";

    fn write_row(&self, out: &mut String) {
        let _ = write!(
            out,
            "{:.6e},{:.6e},{:.6e}",
            self.mean_photons, self.loss, self.ratio
        );
    }
}

/// Renders rows to comma-separated text: header row, `.` decimal point,
/// scientific notation with 7 significant digits, LF line endings. The output
/// is a pure function of the rows.
pub fn render_table<R: TableRow>(rows: &[R]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(R::HEADER);
    out.push('\n');
    for row in rows {
        row.write_row(&mut out);
        out.push('\n');
    }
    out
}

/// Writes a table to disk; byte-stable across runs for identical inputs.
pub fn write_table<R: TableRow>(rows: &[R], path: &Path) -> StoreResult<()> {
    fs::write(path, render_table(rows)).map_err(|e| io_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn sample_record() -> CacheRecord {
        CacheRecord {
            n: 10,
            eta: 0.62,
            coeffs: vec![0.1, 0.2, 0.3],
            qfi: 12.345678901234567,
            converged: true,
            settings_fingerprint: "abcdef0123456789".into(),
        }
    }

    #[test]
    fn cache_roundtrip_is_identity() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("cache.txt");
        let rec = sample_record();
        cache_put(&rec, &path, false).unwrap();
        let back = cache_get(10, 0.62, "abcdef0123456789", &path)
            .unwrap()
            .unwrap();
        assert_eq!(back.n, rec.n);
        assert_eq!(back.coeffs, rec.coeffs);
        assert_eq!(back.qfi.to_bits(), rec.qfi.to_bits());
        assert_eq!(back.converged, rec.converged);
        assert_eq!(back.settings_fingerprint, rec.settings_fingerprint);
    }

    #[test]
    fn duplicate_identical_put_is_idempotent() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("cache.txt");
        let rec = sample_record();
        cache_put(&rec, &path, false).unwrap();
        cache_put(&rec, &path, false).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1);
    }

    #[test]
    fn conflicting_put_requires_overwrite() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("cache.txt");
        let rec = sample_record();
        cache_put(&rec, &path, false).unwrap();
        let mut other = rec.clone();
        other.qfi = 99.0;
        assert!(matches!(
            cache_put(&other, &path, false),
            Err(StoreError::KeyConflict { .. })
        ));
        cache_put(&other, &path, true).unwrap();
        let back = cache_get(10, 0.62, "abcdef0123456789", &path)
            .unwrap()
            .unwrap();
        assert_eq!(back.qfi, 99.0);
    }

    #[test]
    fn eta_canonicalization_merges_nearby_keys() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("cache.txt");
        let rec = sample_record();
        cache_put(&rec, &path, false).unwrap();
        let hit = cache_get(10, 0.6200004, "abcdef0123456789", &path).unwrap();
        assert!(hit.is_some());
        let miss = cache_get(10, 0.63, "abcdef0123456789", &path).unwrap();
        assert!(miss.is_none());
    }

    #[test]
    fn missing_key_is_absent_not_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("nonexistent.txt");
        assert!(cache_get(5, 0.5, "ff", &path).unwrap().is_none());
    }

    #[test]
    fn corrupt_record_reports_its_index() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("cache.txt");
        let rec = sample_record();
        cache_put(&rec, &path, false).unwrap();
        let mut text = fs::read_to_string(&path).unwrap();
        text.push_str("opt n=eleven eta=0.5 fp=ff converged=true qfi=1 coeffs=1\n");
        fs::write(&path, text).unwrap();
        match cache_get(10, 0.62, "abcdef0123456789", &path) {
            Err(StoreError::CorruptRecord { index, .. }) => assert_eq!(index, 1),
            other => panic!("expected corrupt-record error, got {other:?}"),
        }
    }

    #[test]
    fn fit_records_roundtrip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("cache.txt");
        let fit = FitRecord {
            eta: 0.62,
            n_lo: 30,
            n_hi: 60,
            a: 1.25,
            b: -3.5,
            c: 11.0,
            max_relative_residual: 2.5e-3,
            settings_fingerprint: "0011223344556677".into(),
        };
        fit_put(&fit, &path, false).unwrap();
        // optimizer records and fit records coexist
        cache_put(&sample_record(), &path, false).unwrap();
        let back = fit_get(0.62, "0011223344556677", 30, 60, &path)
            .unwrap()
            .unwrap();
        assert_eq!(back, fit);
        assert!(fit_get(0.62, "0011223344556677", 30, 61, &path)
            .unwrap()
            .is_none());
    }

    #[test]
    fn measured_spectrum_parsing() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("spectrum.csv");
        fs::write(&path, "frequency_hz,strain\n100,2e-21\n200,1.5e-21\n").unwrap();
        let spec = load_measured_spectrum(&path).unwrap();
        assert_eq!(spec.points.len(), 2);
        assert_eq!(spec.points[0], (100.0, 2e-21));
        assert_eq!(spec.label, "spectrum");

        fs::write(&path, "200 1e-21\n100 2e-21\n").unwrap();
        assert!(matches!(
            load_measured_spectrum(&path),
            Err(StoreError::SpectrumFormat { line: 2, .. })
        ));

        fs::write(&path, "100,1e-21\nnot,numeric\n").unwrap();
        assert!(load_measured_spectrum(&path).is_err());
    }

    #[test]
    fn tables_are_byte_stable() {
        let rows = vec![
            SpectrumRow {
                frequency_hz: 100.0,
                delta_h_per_sqrt_hz: 2.2124301e-22,
                curve: "csv_10dB".into(),
            },
            SpectrumRow {
                frequency_hz: 1000.0,
                delta_h_per_sqrt_hz: 2.05e-22,
                curve: "fundamental".into(),
            },
        ];
        let a = render_table(&rows);
        let b = render_table(&rows);
        assert_eq!(a, b);
        assert!(a.starts_with("frequency_hz,delta_h_per_sqrt_hz,curve\n"));
        assert!(a.ends_with('\n'));

        let ratio = render_table(&[RatioRow {
            mean_photons: 2e9,
            loss: 0.3,
            ratio: 0.9987654321,
        }]);
        assert!(ratio.starts_with("mean_photons,loss,ratio\n"));
        assert!(ratio.contains("9.987654e-1"));
    }

    #[test]
    fn atomic_write_leaves_no_temp_files() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("cache.txt");
        cache_put(&sample_record(), &path, false).unwrap();
        let names: Vec<String> = fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect();
        assert_eq!(names, vec!["cache.txt".to_string()]);
    }
}
