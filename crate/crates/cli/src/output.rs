use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::Tolerances;
use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";

/// 17 significant digits, enough to round-trip any double.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Per-run state handed to a subcommand: where to write, what it wrote,
/// which metrics it reported and which contracts failed.
pub struct RunContext {
    dir: PathBuf,
    pub seed: u64,
    pub tolerances: Tolerances,
    outputs: Vec<String>,
    metrics: Map<String, Value>,
    failures: Vec<String>,
}

impl RunContext {
    pub fn new(dir: PathBuf, seed: u64, tolerances: Tolerances) -> Self {
        Self { dir, seed, tolerances, outputs: Vec::new(), metrics: Map::new(), failures: Vec::new() }
    }

    /// Resolves a bare file name inside the output directory.
    fn path_for(&mut self, name: &str) -> Result<PathBuf, CliError> {
        let plain = !name.is_empty()
            && name != MANIFEST
            && !name.starts_with('.')
            && !name.contains(['/', '\\'])
            && Path::new(name).file_name().is_some_and(|f| f == name);
        if !plain {
            return Err(CliError::Io(std::io::Error::other(format!("refusing output name {name:?}"))));
        }
        if !self.outputs.iter().any(|o| o == name) {
            self.outputs.push(name.to_string());
        }
        Ok(self.dir.join(name))
    }

    pub fn csv<I>(&mut self, name: &str, header: &[&str], rows: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let path = self.path_for(name)?;
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let path = self.path_for(name)?;
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, value)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    pub fn raw(
        &mut self,
        name: &str,
        write: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    ) -> Result<(), CliError> {
        let path = self.path_for(name)?;
        let mut w = BufWriter::new(File::create(path)?);
        write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn metric<T: Serialize>(&mut self, key: &str, value: T) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.metrics.insert(key.to_string(), v);
    }

    /// Records a contract failure; the run still finishes its outputs.
    pub fn require(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.failures.push(what.into());
        }
    }

    pub fn failures(&self) -> &[String] {
        &self.failures
    }
}

#[derive(Serialize)]
struct RunManifest<'a> {
    artifact: &'a str,
    version: &'a str,
    subcommand: &'a str,
    status: &'a str,
    failures: &'a [String],
    seed: u64,
    threads: Option<usize>,
    config: &'a Value,
    outputs: &'a [String],
    metrics: &'a Map<String, Value>,
    wall_clock_seconds: f64,
}

pub struct ManifestInfo<'a> {
    pub subcommand: &'a str,
    pub threads: Option<usize>,
    pub config: &'a Value,
    pub wall_clock_seconds: f64,
}

/// Writes `manifest.json` through a temporary file and a rename.
pub fn write_manifest(ctx: &RunContext, info: &ManifestInfo, error: Option<&CliError>) -> Result<(), CliError> {
    let mut failures = ctx.failures.clone();
    if let Some(e) = error {
        failures.push(e.to_string());
    }
    let status = if failures.is_empty() { "ok" } else { "numeric_failure" };
    let manifest = RunManifest {
        artifact: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        subcommand: info.subcommand,
        status,
        failures: &failures,
        seed: ctx.seed,
        threads: info.threads,
        config: info.config,
        outputs: &ctx.outputs,
        metrics: &ctx.metrics,
        wall_clock_seconds: info.wall_clock_seconds,
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&ctx.dir)?;
    serde_json::to_writer_pretty(&mut tmp, &manifest)?;
    tmp.write_all(b"\n")?;
    tmp.as_file().sync_all()?;
    tmp.persist(ctx.dir.join(MANIFEST)).map_err(|e| CliError::Io(e.error))?;
    Ok(())
}

pub fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    Ok(())
}
