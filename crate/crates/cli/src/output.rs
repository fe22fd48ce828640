//! CSV tables and the summary JSON, each stamped with the config hash and seed.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

pub struct Output {
    dir: PathBuf,
    pub config_hash: String,
    pub seed: u64,
    files: Vec<String>,
}

impl Output {
    pub fn new(dir: &Path, config_hash: String, seed: u64) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            config_hash,
            seed,
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Files written so far, in order.
    pub fn files(&self) -> &[String] {
        &self.files
    }

    /// Write `rows` with a header; the first line is a `#` comment carrying the stamp.
    pub fn csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<(), CliError> {
        let mut file = BufWriter::new(File::create(self.dir.join(name))?);
        writeln!(file, "# config_hash={} seed={}", self.config_hash, self.seed)?;
        let mut w = csv::Writer::from_writer(file);
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn summary(&mut self, value: &serde_json::Value) -> Result<(), CliError> {
        let mut file = BufWriter::new(File::create(self.dir.join("summary.json"))?);
        serde_json::to_writer_pretty(&mut file, value)?;
        writeln!(file)?;
        file.flush()?;
        self.files.push("summary.json".to_string());
        Ok(())
    }
}

/// Coordinates as `x1;x2;...` for a single CSV field.
pub fn join_site(x: &[i64]) -> String {
    x.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(";")
}
