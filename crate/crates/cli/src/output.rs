use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;

/// Version stamped on the first line of every CSV and on the manifest.
pub const SCHEMA_VERSION: u32 = 1;

pub const MANIFEST_NAME: &str = "run_manifest.json";

#[derive(Debug, Serialize)]
pub struct OutputFile {
    pub path: String,
    pub rows: Option<usize>,
}

/// Record of one CLI invocation, written after every other output.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: String,
    pub tool_version: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub inputs: serde_json::Value,
    pub outputs: Vec<OutputFile>,
    pub wall_time_s: f64,
}

/// Output directory that remembers what it wrote.
pub struct OutDir {
    root: PathBuf,
    written: Vec<OutputFile>,
    started: Instant,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
            started: Instant::now(),
        })
    }

    fn open(&self, name: &str) -> Result<BufWriter<File>> {
        let path = self.root.join(name);
        let file = File::create(&path).with_context(|| format!("writing {}", path.display()))?;
        Ok(BufWriter::new(file))
    }

    /// Writes a CSV whose first line is a schema comment, then a header row.
    pub fn csv<R>(&mut self, name: &str, header: &[&str], rows: R) -> Result<()>
    where
        R: IntoIterator,
        R::Item: IntoIterator<Item = f64>,
    {
        let mut out = self.open(name)?;
        writeln!(out, "# nvgyro {name} schema {SCHEMA_VERSION}")?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(header)?;
        let mut count = 0;
        for row in rows {
            w.write_record(row.into_iter().map(|v| v.to_string()))?;
            count += 1;
        }
        w.flush()?;
        self.written.push(OutputFile {
            path: name.to_string(),
            rows: Some(count),
        });
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut out = self.open(name)?;
        serde_json::to_writer_pretty(&mut out, value)?;
        writeln!(out)?;
        out.flush()?;
        self.written.push(OutputFile {
            path: name.to_string(),
            rows: None,
        });
        Ok(())
    }

    pub fn finish(
        self,
        command: &str,
        seed: Option<u64>,
        config: serde_json::Value,
        inputs: serde_json::Value,
    ) -> Result<PathBuf> {
        for f in &self.written {
            let p = self.root.join(&f.path);
            anyhow::ensure!(p.is_file(), "output {} vanished before the manifest was written", p.display());
        }
        let manifest = RunManifest {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config,
            inputs,
            wall_time_s: self.started.elapsed().as_secs_f64(),
            outputs: self.written,
        };
        let path = self.root.join(MANIFEST_NAME);
        let mut out = BufWriter::new(File::create(&path).with_context(|| format!("writing {}", path.display()))?);
        serde_json::to_writer_pretty(&mut out, &manifest)?;
        writeln!(out)?;
        out.flush()?;
        Ok(path)
    }
}
