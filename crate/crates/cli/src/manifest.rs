use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

/// Everything needed to re-create a run's artifacts.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub fixture: Option<String>,
    pub params: Value,
    pub condition: Value,
    pub hyperparameters: Value,
    pub solver: Value,
    pub grid: Option<Vec<usize>>,
    pub settings: Value,
    pub outputs: Vec<String>,
    pub version: String,
    pub threads: Option<usize>,
    pub wall_seconds: f64,
}

/// Output directory plus the manifest being filled in.
pub struct Run {
    dir: PathBuf,
    manifest: RunManifest,
    start: Instant,
}

impl Run {
    pub fn new(dir: &Path, command: &str) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest: RunManifest {
                command: command.to_string(),
                argv: std::env::args().collect(),
                fixture: None,
                params: Value::Null,
                condition: Value::Null,
                hyperparameters: Value::Null,
                solver: Value::Null,
                grid: None,
                settings: Value::Null,
                outputs: Vec::new(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                threads: tslyap::search::thread_limit(),
                wall_seconds: 0.0,
            },
            start: Instant::now(),
        })
    }

    pub fn manifest_mut(&mut self) -> &mut RunManifest {
        &mut self.manifest
    }

    fn manifest_name(&self) -> String {
        format!("{}.manifest.json", self.manifest.command)
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.manifest.outputs.push(name.to_string());
        self.dir.join(name)
    }

    /// Writes `value` with a `manifest` field pointing back at this run.
    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<PathBuf> {
        let mut v = serde_json::to_value(value)?;
        if let Value::Object(map) = &mut v {
            map.insert("manifest".into(), json!(self.manifest_name()));
        }
        let path = self.path(name);
        fs::write(&path, serde_json::to_string_pretty(&v)?).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<PathBuf> {
        let path = self.path(name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn write_svg(&mut self, name: &str, svg: &str) -> Result<PathBuf> {
        let text = format!("<!-- manifest: {} -->\n{svg}", self.manifest_name());
        self.write_text(name, &text)
    }

    pub fn finish(mut self) -> Result<PathBuf> {
        self.manifest.wall_seconds = self.start.elapsed().as_secs_f64();
        let path = self.dir.join(self.manifest_name());
        fs::write(&path, serde_json::to_string_pretty(&self.manifest)?)
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
