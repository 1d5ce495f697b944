use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Source,
    Target,
    Calibrated,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Source => "source",
            Role::Target => "target",
            Role::Calibrated => "calibrated",
        }
    }
}

/// One batch: a sample-per-row matrix with named features.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchDataset {
    pub data: Matrix,
    pub feature_names: Vec<String>,
    pub role: Role,
    /// Free-text origin, e.g. the file it was read from or the
    /// patient/condition/day it represents.
    pub provenance: String,
}

impl BatchDataset {
    pub fn new(
        data: Matrix,
        feature_names: Vec<String>,
        role: Role,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        if feature_names.len() != data.cols() {
            return Err(Error::Domain(format!(
                "{} feature names for {} columns",
                feature_names.len(),
                data.cols()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = feature_names.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(Error::Domain(format!("duplicate feature name '{dup}'")));
        }
        Ok(BatchDataset {
            data,
            feature_names,
            role,
            provenance: provenance.into(),
        })
    }

    /// Names `f0..f{d-1}`.
    pub fn default_names(dim: usize) -> Vec<String> {
        (0..dim).map(|i| format!("f{i}")).collect()
    }

    pub fn with_default_names(data: Matrix, role: Role, provenance: impl Into<String>) -> Self {
        let names = Self::default_names(data.cols());
        Self::new(data, names, role, provenance).expect("generated names are unique")
    }

    pub fn rows(&self) -> usize {
        self.data.rows()
    }

    pub fn dim(&self) -> usize {
        self.data.cols()
    }
}

/// Reads a rectangular numeric CSV. With `has_header`, the first record
/// supplies the feature names; otherwise they default to `f0..`.
pub fn load_csv(path: impl AsRef<Path>, has_header: bool, role: Role) -> Result<BatchDataset> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes.as_slice());

    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut names: Option<Vec<String>> = None;
    let mut width: Option<usize> = None;
    let mut values = Vec::new();
    let mut rows = 0usize;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(i as u64 + 1, |p| p.line());
        if let Some(w) = width {
            if record.len() != w {
                return Err(parse_err(
                    line,
                    format!("expected {w} fields, found {}", record.len()),
                ));
            }
        } else {
            width = Some(record.len());
        }
        if has_header && names.is_none() {
            names = Some(record.iter().map(str::to_string).collect());
            continue;
        }
        for (col, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                parse_err(
                    line,
                    format!(
                        "row {}, column {}: '{cell}' is not a number",
                        rows + 1,
                        col + 1
                    ),
                )
            })?;
            if !v.is_finite() {
                return Err(parse_err(
                    line,
                    format!(
                        "row {}, column {}: non-finite value '{cell}'",
                        rows + 1,
                        col + 1
                    ),
                ));
            }
            values.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::Domain(format!("{}: no data rows", path.display())));
    }
    let cols = width.unwrap_or(0);
    let data = Matrix::new(rows, cols, values)?;
    let names = names.unwrap_or_else(|| BatchDataset::default_names(cols));
    BatchDataset::new(data, names, role, path.display().to_string())
}

/// Scientific notation with 17 significant digits, which round-trips any
/// finite `f64` exactly.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn matrix_to_csv(
    header: &[String],
    rows: impl Iterator<Item = Vec<String>>,
) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Domain(format!("csv encoding: {e}"));
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.into_inner()
        .map_err(|e| Error::Domain(format!("csv encoding: {e}")))
}

/// Writes `ds` as CSV with a header row and 17-significant-digit values.
pub fn save_csv(ds: &BatchDataset, path: impl AsRef<Path>) -> Result<()> {
    let rows = ds
        .data
        .iter_rows()
        .map(|r| r.iter().map(|&v| format_f64(v)).collect());
    write_atomic(path, &matrix_to_csv(&ds.feature_names, rows)?)
}

/// Writes through a temporary file in the destination directory and renames
/// it into place, so readers never observe a partial file.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Pretty-printed JSON with a trailing newline, written atomically.
pub fn save_json<T: Serialize + ?Sized>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn load_json<T: serde::de::DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_slice(&bytes)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn header_and_values() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "a.csv", "a,b\n1,2\n3,4\n");
        let ds = load_csv(&p, true, Role::Target).unwrap();
        assert_eq!(ds.feature_names, ["a", "b"]);
        assert_eq!(
            ds.data,
            Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap()
        );
        assert_eq!(ds.role, Role::Target);

        let ds = load_csv(&p, false, Role::Source);
        assert!(matches!(ds, Err(Error::Parse { line: 1, .. })));
        let p = write(dir.path(), "b.csv", "1,2\n3,4\n");
        let ds = load_csv(&p, false, Role::Source).unwrap();
        assert_eq!(ds.feature_names, ["f0", "f1"]);
    }

    #[test]
    fn ragged_row_names_its_line() {
        let dir = tempfile::tempdir().unwrap();
        let body = "x,y\n1,2\n1,2\n1,2\n1,2\n1,2\n1,2,3\n1,2\n";
        let p = write(dir.path(), "r.csv", body);
        let err = load_csv(&p, true, Role::Source).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 7, .. }), "{err}");
        assert!(err.to_string().contains("line 7"));
    }

    #[test]
    fn bad_cells_and_empty_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "n.csv", "a,b\n1,2\n3,oops\n");
        let err = load_csv(&p, true, Role::Source).unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("row 2") && msg.contains("column 2") && msg.contains("oops"),
            "{msg}"
        );

        let p = write(dir.path(), "e.csv", "");
        assert!(matches!(
            load_csv(&p, true, Role::Source),
            Err(Error::Domain(_))
        ));
        let p = write(dir.path(), "h.csv", "a,b\n");
        assert!(matches!(
            load_csv(&p, true, Role::Source),
            Err(Error::Domain(_))
        ));
        let p = write(dir.path(), "d.csv", "a,a\n1,2\n");
        assert!(matches!(
            load_csv(&p, true, Role::Source),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            load_csv(dir.path().join("missing.csv"), true, Role::Source),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn save_then_load_is_equal() {
        let dir = tempfile::tempdir().unwrap();
        let data = Matrix::from_rows(&[[0.1, -1e-300], [std::f64::consts::PI, 12345.678]]).unwrap();
        let ds = BatchDataset::new(
            data,
            vec!["cd3".into(), "cd 4,x".into()],
            Role::Calibrated,
            "t",
        )
        .unwrap();
        let p = dir.path().join("out.csv");
        save_csv(&ds, &p).unwrap();
        let back = load_csv(&p, true, Role::Calibrated).unwrap();
        assert_eq!(back.data, ds.data);
        assert_eq!(back.feature_names, ds.feature_names);
        assert_eq!(back.role, ds.role);
        let text = fs::read_to_string(&p).unwrap();
        assert!(!text.contains('\r'));
    }

    #[test]
    fn unwritable_path_leaves_nothing_behind() {
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("no_such_dir").join("x.csv");
        let err = write_atomic(&target, b"abc").unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
        assert!(!target.exists());
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.json");
        let v = vec![0.1, 1.0 / 3.0, 1e-17];
        save_json(&v, &p).unwrap();
        let back: Vec<f64> = load_json(&p).unwrap();
        assert_eq!(back, v);
    }
}
