use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::LabError;

/// Column-named numeric table, written as CSV with a header row.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), LabError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| format!("{v:e}")))?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub config: ExperimentConfig,
    pub metrics: BTreeMap<String, f64>,
    pub tables: BTreeMap<String, Table>,
    pub assertions: Vec<Assertion>,
    pub warnings: Vec<String>,
    pub version: String,
    /// The only field allowed to differ between identical runs.
    pub wall_clock_s: f64,
}

/// The reproducible part of a record.
#[derive(Serialize)]
struct Reproducible<'a> {
    config: &'a ExperimentConfig,
    metrics: &'a BTreeMap<String, f64>,
    tables: &'a BTreeMap<String, Table>,
    assertions: &'a [Assertion],
    warnings: &'a [String],
}

impl ResultRecord {
    pub fn new(config: ExperimentConfig) -> Self {
        Self {
            config,
            metrics: BTreeMap::new(),
            tables: BTreeMap::new(),
            assertions: Vec::new(),
            warnings: Vec::new(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_clock_s: 0.0,
        }
    }

    pub fn metric(&mut self, name: impl Into<String>, value: f64) {
        self.metrics.insert(name.into(), value);
    }

    pub fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.assertions.push(Assertion {
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        self.warnings.push(msg.into());
    }

    pub fn failures(&self, strict: bool) -> Vec<String> {
        let mut out: Vec<String> = self
            .assertions
            .iter()
            .filter(|a| !a.passed)
            .map(|a| format!("{}: {}", a.name, a.detail))
            .collect();
        if strict {
            out.extend(self.warnings.iter().map(|w| format!("warning: {w}")));
        }
        out
    }

    pub fn passed(&self, strict: bool) -> bool {
        self.failures(strict).is_empty()
    }

    /// Serialized metrics, tables and assertions; byte-stable across reruns.
    pub fn metrics_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(&Reproducible {
            config: &self.config,
            metrics: &self.metrics,
            tables: &self.tables,
            assertions: &self.assertions,
            warnings: &self.warnings,
        })
        .expect("record serializes")
    }

    /// Writes `record.json` and one `<kind>_<table>.csv` per table into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, LabError> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let json = dir.join("record.json");
        fs::write(&json, serde_json::to_vec_pretty(self)?)?;
        written.push(json);
        for (name, table) in &self.tables {
            let path = dir.join(format!("{}_{name}.csv", self.config.kind));
            table.write_csv(fs::File::create(&path)?)?;
            written.push(path);
        }
        Ok(written)
    }
}
