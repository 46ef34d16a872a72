//! Plain-text persistence: CSV tables, whitespace-separated matrices, axis
//! files, TOML metadata, and the marker left behind by an interrupted run.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};

/// Present while a run is writing; removed once every file is complete.
pub const INCOMPLETE_MARKER: &str = "INCOMPLETE";

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// One CSV row per item with a header derived from the field names.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Like [`write_csv`] but also writes the header when there are no rows.
pub fn write_csv_with_header<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    if !rows.is_empty() {
        return write_csv(path, rows);
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(header)?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Rows of the matrix as lines of space-separated values.
pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                w.write_all(b" ").map_err(io)?;
            }
            write!(w, "{:e}", m[(i, j)]).map_err(io)?;
        }
        w.write_all(b"\n").map_err(io)?;
    }
    w.flush().map_err(io)
}

/// One value per line.
pub fn write_axis(path: &Path, values: &[f64]) -> Result<()> {
    let mut text = String::with_capacity(values.len() * 24);
    for v in values {
        text.push_str(&format!("{v:e}\n"));
    }
    write_text(path, &text)
}

pub fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = toml::to_string(value).map_err(|e| Error::InvalidInput(format!("metadata: {e}")))?;
    write_text(path, &text)
}

/// Guards an output directory: the marker exists until [`OutputGuard::finish`].
/// On error the marker is rewritten with the failure message.
pub struct OutputGuard {
    marker: PathBuf,
}

impl OutputGuard {
    pub fn begin(dir: &Path) -> Result<Self> {
        create_dir(dir)?;
        let marker = dir.join(INCOMPLETE_MARKER);
        write_text(&marker, "run in progress\n")?;
        Ok(Self { marker })
    }

    pub fn fail(&self, err: &Error) {
        let _ = fs::write(&self.marker, format!("run aborted: {err}\n"));
    }

    pub fn finish(self) -> Result<()> {
        fs::remove_file(&self.marker).map_err(|e| Error::io(&self.marker, e))
    }

    /// Runs `body`, finishing on success and recording the error otherwise.
    pub fn wrap<T>(self, body: impl FnOnce() -> Result<T>) -> Result<T> {
        match body() {
            Ok(v) => {
                self.finish()?;
                Ok(v)
            }
            Err(e) => {
                self.fail(&e);
                Err(e)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_round_trips_through_text() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.txt");
        let m = DMatrix::from_row_slice(2, 3, &[1.0, -2.5e-17, 3.0, 0.1, 1e300, -0.0]);
        write_matrix(&path, &m).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let back: Vec<f64> = text.split_whitespace().map(|s| s.parse().unwrap()).collect();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(back, m.transpose().as_slice());
    }

    #[test]
    fn guard_leaves_marker_on_failure() {
        let dir = tempfile::tempdir().unwrap();
        let guard = OutputGuard::begin(dir.path()).unwrap();
        let r: Result<()> = guard.wrap(|| Err(Error::InvalidInput("boom".into())));
        assert!(r.is_err());
        let text = fs::read_to_string(dir.path().join(INCOMPLETE_MARKER)).unwrap();
        assert!(text.contains("boom"));

        let guard = OutputGuard::begin(dir.path()).unwrap();
        guard.wrap(|| Ok(())).unwrap();
        assert!(!dir.path().join(INCOMPLETE_MARKER).exists());
    }

    #[test]
    fn empty_table_still_has_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_csv_with_header::<(f64,)>(&path, &["a", "b"], &[]).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "a,b\n");
    }
}
