//! Run reports and the output directory.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use hjblab::model::ModelSpec;
use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: String,
    pub model: Option<ModelSpec>,
    pub inputs: Value,
    pub outputs: Vec<String>,
    pub summary: Vec<Check>,
    pub seed: u64,
}

impl RunReport {
    pub fn new(command: &str, model: Option<&ModelSpec>, inputs: Value, seed: u64) -> Self {
        Self { command: command.into(), model: model.cloned(), inputs, outputs: Vec::new(), summary: Vec::new(), seed }
    }

    pub fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) -> bool {
        self.summary.push(Check { name: name.into(), passed, detail: detail.into() });
        passed
    }

    pub fn passed(&self) -> bool {
        self.summary.iter().all(|c| c.passed)
    }
}

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: PathBuf) -> Result<Self> {
        fs::create_dir_all(&root).with_context(|| format!("cannot create output directory {}", root.display()))?;
        Ok(Self { root })
    }

    pub fn sub(&self, name: &str) -> Result<Self> {
        Self::create(self.root.join(name))
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Creates `name`, hands the writer to `fill`, and records the path.
    pub fn write<F>(&self, report: &mut RunReport, name: &str, fill: F) -> Result<PathBuf>
    where
        F: FnOnce(fs::File) -> hjblab::Result<()>,
    {
        let path = self.path(name);
        let file = fs::File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
        fill(file).with_context(|| format!("writing {}", path.display()))?;
        report.outputs.push(display(&path));
        Ok(path)
    }

    /// Serializes the report (listing itself among the outputs) and prints the summary.
    pub fn finish(&self, mut report: RunReport) -> Result<bool> {
        let path = self.path(&format!("{}_report.json", report.command.replace(' ', "_")));
        report.outputs.push(display(&path));
        let text = serde_json::to_string_pretty(&report)?;
        fs::write(&path, text + "\n").with_context(|| format!("cannot write {}", path.display()))?;
        for c in &report.summary {
            println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        println!("report: {}", path.display());
        Ok(report.passed())
    }
}

fn display(path: &Path) -> String {
    path.to_string_lossy().into_owned()
}
