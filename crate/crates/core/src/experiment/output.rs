use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{ExperimentError, ExperimentResult};

/// One pass/fail line of `check.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub check: String,
    pub observed: f64,
    /// Human-readable threshold, e.g. "<= 0.1".
    pub required: String,
    pub pass: bool,
}

fn fmt_bound(x: f64) -> String {
    if x != 0.0 && (x.abs() < 1e-3 || x.abs() >= 1e6) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

impl CheckRecord {
    pub fn at_most(check: &str, observed: f64, bound: f64) -> Self {
        Self {
            check: check.into(),
            observed,
            required: format!("<= {}", fmt_bound(bound)),
            pass: observed <= bound,
        }
    }

    pub fn at_least(check: &str, observed: f64, bound: f64) -> Self {
        Self {
            check: check.into(),
            observed,
            required: format!(">= {}", fmt_bound(bound)),
            pass: observed >= bound,
        }
    }

    pub fn flag(check: &str, ok: bool, required: &str) -> Self {
        Self {
            check: check.into(),
            observed: if ok { 1.0 } else { 0.0 },
            required: required.into(),
            pass: ok,
        }
    }
}

pub(super) struct OutputDir {
    root: PathBuf,
    files: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> ExperimentResult<Self> {
        std::fs::create_dir_all(root).map_err(|source| ExperimentError::Output {
            path: root.to_path_buf(),
            source,
        })?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn io_err(&self, name: &str) -> impl Fn(std::io::Error) -> ExperimentError + '_ {
        let path = self.root.join(name);
        move |source| ExperimentError::Output {
            path: path.clone(),
            source,
        }
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> ExperimentResult<()> {
        std::fs::write(self.root.join(name), text).map_err(self.io_err(name))?;
        self.files.push(name.into());
        Ok(())
    }

    /// CSV with a header row taken from the field names of `R`.
    pub fn write_rows<R: Serialize>(&mut self, name: &str, rows: &[R]) -> ExperimentResult<()> {
        let to_io = |e: csv::Error| std::io::Error::other(e.to_string());
        let mut w = csv::Writer::from_path(self.root.join(name))
            .map_err(to_io)
            .map_err(self.io_err(name))?;
        for r in rows {
            w.serialize(r).map_err(to_io).map_err(self.io_err(name))?;
        }
        w.flush().map_err(self.io_err(name))?;
        self.files.push(name.into());
        Ok(())
    }

    pub fn into_files(self) -> Vec<String> {
        self.files
    }
}
