//! CSV plumbing shared by every module: typed field access with positioned
//! parse errors, and writers that prefix outputs with a manifest line.

use std::collections::HashMap;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::{Error, Result};

/// Provenance stamped on the first line of every output file.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    pub config_sha256: String,
    pub seed: u64,
    pub version: String,
}

impl Manifest {
    pub fn line(&self) -> String {
        format!(
            "# manifest: config_sha256={}, seed={}, version={}",
            self.config_sha256, self.seed, self.version
        )
    }
}

/// A CSV file opened with a header row. Lines starting with `#` are skipped.
pub struct TableReader {
    path: PathBuf,
    headers: HashMap<String, usize>,
    reader: csv::Reader<File>,
}

pub struct Row<'a> {
    path: &'a Path,
    headers: &'a HashMap<String, usize>,
    record: csv::StringRecord,
}

impl TableReader {
    pub fn open(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(file);
        let headers = reader
            .headers()?
            .iter()
            .enumerate()
            .map(|(i, h)| (h.to_string(), i))
            .collect();
        Ok(Self {
            path: path.to_path_buf(),
            headers,
            reader,
        })
    }

    pub fn has(&self, column: &str) -> bool {
        self.headers.contains_key(column)
    }

    pub fn headers(&self) -> Vec<String> {
        let mut h: Vec<(&String, &usize)> = self.headers.iter().collect();
        h.sort_by_key(|(_, i)| **i);
        h.into_iter().map(|(n, _)| n.clone()).collect()
    }

    /// Errors naming the first missing column.
    pub fn require(&self, columns: &[&str]) -> Result<()> {
        for c in columns {
            if !self.has(c) {
                return Err(Error::Schema(format!(
                    "{}: missing required column `{c}`",
                    self.path.display()
                )));
            }
        }
        Ok(())
    }

    /// Visits every data row.
    pub fn for_each(&mut self, mut f: impl FnMut(&Row<'_>) -> Result<()>) -> Result<()> {
        let mut record = csv::StringRecord::new();
        while self.reader.read_record(&mut record)? {
            let row = Row {
                path: &self.path,
                headers: &self.headers,
                record: std::mem::take(&mut record),
            };
            f(&row)?;
            record = row.record;
        }
        Ok(())
    }
}

impl Row<'_> {
    pub fn line(&self) -> u64 {
        self.record.position().map_or(0, |p| p.line())
    }

    fn error(&self, column: &str, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.display().to_string(),
            line: self.line(),
            column: column.to_string(),
            message: message.into(),
        }
    }

    /// Raw cell; empty string when the column is absent.
    pub fn raw(&self, column: &str) -> &str {
        self.headers
            .get(column)
            .and_then(|&i| self.record.get(i))
            .unwrap_or("")
    }

    pub fn text(&self, column: &str) -> Result<String> {
        let v = self.raw(column);
        if v.is_empty() {
            return Err(self.error(column, "empty value"));
        }
        Ok(v.to_string())
    }

    pub fn opt_text(&self, column: &str) -> Option<String> {
        let v = self.raw(column);
        (!v.is_empty()).then(|| v.to_string())
    }

    pub fn opt_f64(&self, column: &str) -> Result<Option<f64>> {
        let v = self.raw(column);
        if v.is_empty() || v.eq_ignore_ascii_case("na") {
            return Ok(None);
        }
        v.parse::<f64>()
            .map(Some)
            .map_err(|_| self.error(column, format!("cannot parse `{v}` as a number")))
    }

    pub fn f64(&self, column: &str) -> Result<f64> {
        self.opt_f64(column)?
            .ok_or_else(|| self.error(column, "empty value"))
    }

    pub fn opt_i64(&self, column: &str) -> Result<Option<i64>> {
        let v = self.raw(column);
        if v.is_empty() || v.eq_ignore_ascii_case("na") {
            return Ok(None);
        }
        v.parse::<i64>()
            .map(Some)
            .map_err(|_| self.error(column, format!("cannot parse `{v}` as an integer")))
    }

    pub fn i32(&self, column: &str) -> Result<i32> {
        let v = self
            .opt_i64(column)?
            .ok_or_else(|| self.error(column, "empty value"))?;
        i32::try_from(v).map_err(|_| self.error(column, format!("{v} out of range")))
    }
}

/// CSV writer that emits the manifest line (when given) before the header.
pub struct TableWriter {
    path: PathBuf,
    writer: csv::Writer<File>,
}

impl TableWriter {
    pub fn create(path: &Path, manifest: Option<&Manifest>, header: &[&str]) -> Result<Self> {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
        }
        let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
        if let Some(m) = manifest {
            writeln!(file, "{}", m.line()).map_err(|e| Error::io(path, e))?;
        }
        let mut writer = csv::Writer::from_writer(file);
        writer.write_record(header)?;
        Ok(Self {
            path: path.to_path_buf(),
            writer,
        })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.writer.flush().map_err(|e| Error::io(&self.path, e))
    }
}

/// Formats a float with full round-trip precision; `NaN`/absent as empty.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        String::new()
    }
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Writes a text file, creating its parent directory.
pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}
