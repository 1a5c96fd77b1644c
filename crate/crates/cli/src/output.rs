//! CSV and JSON artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use extremal_core::{Domain, Field};
use serde::Serialize;

use crate::config::ProblemConfig;

/// Single writer for one output directory.
pub struct Sink {
    dir: PathBuf,
}

impl Sink {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Pretty JSON with the resolved config under `config`.
    pub fn json<R: Serialize>(&self, name: &str, config: &ProblemConfig, result: &R) -> Result<PathBuf> {
        #[derive(Serialize)]
        struct Envelope<'a, R> {
            config: &'a ProblemConfig,
            #[serde(flatten)]
            result: &'a R,
        }
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(&Envelope { config, result })?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }

    /// `coord1[,coord2],u1,…,um`, one row per node, boundary included.
    pub fn field(&self, name: &str, domain: &Domain, u: &Field) -> Result<PathBuf> {
        let axes = domain.axes();
        let mut header: Vec<String> = (1..=axes).map(|a| format!("coord{a}")).collect();
        header.extend((1..=u.m()).map(|i| format!("u{i}")));
        let nodal: Vec<Vec<f64>> = u.components().iter().map(|c| domain.to_nodal(c)).collect();
        let rows = domain.nodes().iter().enumerate().map(|(k, node)| {
            let mut row: Vec<f64> = node.coord[..axes].to_vec();
            row.extend(nodal.iter().map(|c| c[k]));
            row
        });
        self.table(name, &header, rows)
    }

    pub fn table<I>(&self, name: &str, header: &[String], rows: I) -> Result<PathBuf>
    where
        I: IntoIterator<Item = Vec<f64>>,
    {
        let path = self.path(name);
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(&path)
            .with_context(|| format!("cannot write {}", path.display()))?;
        w.write_record(header)?;
        for row in rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(path)
    }
}
