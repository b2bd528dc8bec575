//! Artifact collection. Files are assembled in memory and written in one
//! pass, so a run's output is a pure function of its inputs.

use std::path::PathBuf;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::CliError;

#[derive(Debug, Clone)]
pub struct Artifacts {
    prefix: String,
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    pub fn new(prefix: impl Into<String>) -> Self {
        Self {
            prefix: prefix.into(),
            files: Vec::new(),
        }
    }

    pub fn prefix(&self) -> &str {
        &self.prefix
    }

    /// `<prefix>_<suffix>`, or `<prefix><suffix>` when the prefix names a
    /// directory.
    pub fn path(&self, suffix: &str) -> PathBuf {
        if self.prefix.ends_with('/') || self.prefix.ends_with(std::path::MAIN_SEPARATOR) {
            PathBuf::from(format!("{}{suffix}", self.prefix))
        } else {
            PathBuf::from(format!("{}_{suffix}", self.prefix))
        }
    }

    pub fn csv<R, I>(&mut self, suffix: &str, header: &[&str], rows: R)
    where
        R: IntoIterator<Item = I>,
        I: IntoIterator<Item = String>,
    {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        w.write_record(header).expect("in-memory write");
        for row in rows {
            w.write_record(row).expect("in-memory write");
        }
        self.add(suffix, w.into_inner().expect("in-memory flush"));
    }

    pub fn json<T: Serialize>(&mut self, suffix: &str, value: &T) {
        let mut bytes = serde_json::to_vec_pretty(value).expect("serializable report");
        bytes.push(b'\n');
        self.add(suffix, bytes);
    }

    pub fn text(&mut self, suffix: &str, text: String) {
        self.add(suffix, text.into_bytes());
    }

    fn add(&mut self, suffix: &str, bytes: Vec<u8>) {
        self.files.retain(|(s, _)| s != suffix);
        self.files.push((suffix.to_string(), bytes));
    }

    pub fn suffixes(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(s, _)| s.as_str())
    }

    pub fn write(&self) -> Result<Vec<PathBuf>, CliError> {
        let mut written = Vec::new();
        for (suffix, bytes) in &self.files {
            let path = self.path(suffix);
            let fail = |source| CliError::Output {
                path: path.display().to_string(),
                source,
            };
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(fail)?;
            }
            std::fs::write(&path, bytes).map_err(fail)?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Numbers in shortest round-trip form.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

/// Ordered record of every resolved setting of a run.
#[derive(Debug, Clone, Default)]
pub struct Manifest(Map<String, Value>);

impl Manifest {
    pub fn set(&mut self, key: &str, value: impl Serialize) {
        self.0
            .insert(key.to_string(), serde_json::to_value(value).expect("serializable setting"));
    }

    pub fn value(&self) -> Value {
        Value::Object(self.0.clone())
    }
}
