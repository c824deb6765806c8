use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use gllab_core::calculus::ComplexField;
use gllab_core::domain::Domain;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Success,
    Flagged,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageTime {
    pub name: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub pipeline: String,
    pub status: Status,
    pub flags: Vec<String>,
    pub config: RunConfig,
    pub threads: usize,
    pub stages: Vec<StageTime>,
    pub scalars: BTreeMap<String, f64>,
    pub verdicts: BTreeMap<String, serde_json::Value>,
    pub notes: Vec<String>,
    /// emitted files, relative to the output directory
    pub files: Vec<String>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Collects outputs of one run; every file goes through here so the manifest lists it.
pub struct Run {
    pub dir: PathBuf,
    pub manifest: RunManifest,
}

pub const MANIFEST: &str = "manifest.json";

impl Run {
    pub fn new(config: &RunConfig, threads: usize) -> Result<Self, CliError> {
        let dir = config.output_dir();
        std::fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self {
            dir,
            manifest: RunManifest {
                version: env!("CARGO_PKG_VERSION").into(),
                pipeline: config.pipeline.name().into(),
                status: Status::Success,
                flags: Vec::new(),
                config: config.clone(),
                threads,
                stages: Vec::new(),
                scalars: BTreeMap::new(),
                verdicts: BTreeMap::new(),
                notes: Vec::new(),
                files: Vec::new(),
            },
        })
    }

    pub fn stage<T>(
        &mut self,
        name: &'static str,
        f: impl FnOnce() -> gllab_core::Result<T>,
    ) -> Result<T, CliError> {
        let t = Instant::now();
        let out = f().map_err(|source| CliError::Stage { stage: name, source });
        let seconds = t.elapsed().as_secs_f64();
        // repeated stages accumulate
        match self.manifest.stages.iter_mut().find(|s| s.name == name) {
            Some(s) => s.seconds += seconds,
            None => self.manifest.stages.push(StageTime {
                name: name.into(),
                seconds,
            }),
        }
        out
    }

    pub fn scalar(&mut self, name: impl Into<String>, v: f64) {
        self.manifest.scalars.insert(name.into(), v);
    }

    pub fn verdict(&mut self, name: impl Into<String>, v: impl Serialize) -> Result<(), CliError> {
        self.manifest.verdicts.insert(name.into(), serde_json::to_value(v)?);
        Ok(())
    }

    pub fn flag(&mut self, why: impl Into<String>) {
        self.manifest.status = Status::Flagged;
        self.manifest.flags.push(why.into());
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.manifest.notes.push(s.into());
    }

    pub fn csv<R: Serialize>(&mut self, name: &str, rows: impl IntoIterator<Item = R>) -> Result<(), CliError> {
        let mut w = csv::Writer::from_path(self.dir.join(name))?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        self.manifest.files.push(name.into());
        Ok(())
    }

    /// Order parameter on the Ω cell centers.
    pub fn field(&mut self, name: &str, d: &Domain, u: &ComplexField) -> Result<(), CliError> {
        let rows: Vec<FieldRow> = (0..d.n_omega())
            .map(|k| {
                let c = d.omega_cells()[k];
                let x = d.omega_center(k);
                let z = u.values[k];
                FieldRow {
                    i: c % d.nx,
                    j: c / d.nx,
                    x: x[0],
                    y: x[1],
                    re: z.re,
                    im: z.im,
                    abs: z.norm(),
                }
            })
            .collect();
        self.csv(name, rows)
    }

    pub fn finish(mut self) -> Result<RunManifest, CliError> {
        self.manifest.files.push(MANIFEST.into());
        std::fs::write(self.dir.join(MANIFEST), serde_json::to_string_pretty(&self.manifest)?)?;
        Ok(self.manifest)
    }
}

#[derive(Serialize)]
struct FieldRow {
    i: usize,
    j: usize,
    x: f64,
    y: f64,
    re: f64,
    im: f64,
    abs: f64,
}
