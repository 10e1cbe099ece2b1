use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use occsafe::harness::ExperimentSpec;
use occsafe::risk::TableMeta;
use occsafe::ScenarioConfig;

/// Collects the files of one run and writes the manifest last.
pub struct OutDir {
    root: PathBuf,
    files: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self { root: root.to_path_buf(), files: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Registers `name` and hands a buffered writer to `f`.
    pub fn write_with<F>(&mut self, name: &str, f: F) -> Result<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<()>,
    {
        let path = self.path(name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = BufWriter::new(file);
        f(&mut w)?;
        w.flush().with_context(|| format!("writing {}", path.display()))?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.write_with(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)?;
            Ok(())
        })
    }

    /// Records a file written by someone else (e.g. an atomic table save).
    pub fn register(&mut self, name: &str) {
        self.files.push(name.to_string());
    }

    pub fn finish(mut self, manifest: Manifest) -> Result<()> {
        let manifest = Manifest { outputs: std::mem::take(&mut self.files), ..manifest };
        self.write_json("manifest.json", &manifest)
    }
}

#[derive(Debug, Serialize)]
pub struct TableRef {
    pub path: PathBuf,
    pub meta: TableMeta,
}

/// Everything needed to rerun a command exactly.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub cli_version: &'static str,
    pub core_version: &'static str,
    pub command: &'static str,
    pub argv: Vec<String>,
    pub seed: u64,
    pub workers: usize,
    pub overrides: Vec<String>,
    pub config: ScenarioConfig,
    pub config_fingerprint: String,
    pub experiment: Option<ExperimentSpec>,
    pub tables: Vec<TableRef>,
    pub conventions: Conventions,
    pub outputs: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct Conventions {
    pub traveling_time: &'static str,
    pub seeds: &'static str,
}

impl Default for Conventions {
    fn default() -> Self {
        Self {
            traveling_time:
                "time to termination (safe_dist, collision or t_end); collided trials are included in means",
            seeds: "trial i of every method and setting runs pedestrian world i of the root seed",
        }
    }
}

impl Manifest {
    pub fn new(command: &'static str, argv: &[String], seed: u64, workers: usize, cfg: &ScenarioConfig) -> Self {
        Self {
            tool: "occsafe",
            cli_version: env!("CARGO_PKG_VERSION"),
            core_version: occsafe::VERSION,
            command,
            argv: argv.to_vec(),
            seed,
            workers,
            overrides: Vec::new(),
            config: cfg.clone(),
            config_fingerprint: cfg.fingerprint(),
            experiment: None,
            tables: Vec::new(),
            conventions: Conventions::default(),
            outputs: Vec::new(),
        }
    }
}
