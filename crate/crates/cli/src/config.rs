use std::path::{Path, PathBuf};

use gllab_core::bifurcation::{ContinuationOptions, StabilityOptions};
use gllab_core::domain::{Domain, DomainSpec};
use gllab_core::functional::MinimizeOptions;
use gllab_core::gauge::{external_potential, ExternalField, FieldProfile};
use gllab_core::phasediagram::{scaling_convert, PhaseOptions, PhysicalParameters};
use gllab_core::spectra::EigenOptions;
use gllab_core::symmetry::half_flux_phase;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    Eigen,
    Minimize,
    Branch,
    ReducedBranch,
    Nodal,
    PhaseDiagram,
    Check,
    Convert,
}

impl Pipeline {
    pub fn name(self) -> &'static str {
        match self {
            Pipeline::Eigen => "eigen",
            Pipeline::Minimize => "minimize",
            Pipeline::Branch => "branch",
            Pipeline::ReducedBranch => "reduced-branch",
            Pipeline::Nodal => "nodal",
            Pipeline::PhaseDiagram => "phase-diagram",
            Pipeline::Check => "check",
            Pipeline::Convert => "convert",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Parameters {
    pub lambda: Option<f64>,
    pub kappa: Option<f64>,
    /// `κ` values of a phase-diagram sweep
    pub kappas: Vec<f64>,
    /// branch amplitudes
    pub alphas: Vec<f64>,
    /// amplitude of the state whose nodal set is extracted
    pub alpha: Option<f64>,
    pub epsilons: Vec<f64>,
    /// number of eigenpairs (default 4)
    pub eigenpairs: Option<usize>,
    /// run the stability analysis on every branch sample
    pub stability: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub pipeline: Pipeline,
    #[serde(default)]
    pub seed: u64,
    /// output directory, relative paths resolved against `GLLAB_OUTPUT_ROOT`
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub domain: Option<DomainSpec>,
    #[serde(default)]
    pub field: Option<FieldProfile>,
    #[serde(default)]
    pub parameters: Parameters,
    #[serde(default)]
    pub eigen: EigenOptions,
    #[serde(default)]
    pub minimize: MinimizeOptions,
    #[serde(default)]
    pub continuation: ContinuationOptions,
    #[serde(default)]
    pub stability: StabilityOptions,
    #[serde(default)]
    pub phase: PhaseOptions,
    #[serde(default)]
    pub physical: Option<PhysicalParameters>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(vec![format!("{}: {e}", path.display())]))
    }

    /// Applies the seed to every randomized stage.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.minimize.seed = seed;
        self.stability.seed = seed;
        self.eigen.seed = seed;
        self.phase.minimize.seed = seed;
        self
    }

    pub fn output_dir(&self) -> PathBuf {
        let rel = self
            .output
            .clone()
            .unwrap_or_else(|| PathBuf::from("gllab-out").join(self.pipeline.name()));
        match std::env::var_os("GLLAB_OUTPUT_ROOT") {
            Some(root) if rel.is_relative() => PathBuf::from(root).join(rel),
            _ => rel,
        }
    }

    /// Every problem with the configuration, not just the first.
    pub fn validate(&self) -> Result<(), CliError> {
        let mut errs = Vec::new();
        let p = &self.parameters;
        let positive = |errs: &mut Vec<String>, name: &str, v: Option<f64>| match v {
            None => errs.push(format!("parameters.{name} is required by pipeline {}", self.pipeline.name())),
            Some(x) if !(x.is_finite() && x > 0.0) => errs.push(format!("parameters.{name} = {x} must be positive")),
            _ => {}
        };
        let alphas_ok = |errs: &mut Vec<String>, alphas: &[f64]| {
            for a in alphas {
                if !a.is_finite() || a.abs() > self.continuation.alpha_max {
                    errs.push(format!(
                        "amplitude {a} outside [-{m}, {m}] (continuation.alpha_max)",
                        m = self.continuation.alpha_max
                    ));
                }
            }
        };
        let needs_scenario = self.pipeline != Pipeline::Convert;
        if needs_scenario && self.domain.is_none() {
            errs.push(format!("[domain] is required by pipeline {}", self.pipeline.name()));
        }
        if needs_scenario && self.field.is_none() {
            errs.push(format!("[field] is required by pipeline {}", self.pipeline.name()));
        }
        match self.pipeline {
            Pipeline::Eigen => {
                if p.eigenpairs.is_some_and(|k| k < 2) {
                    errs.push("parameters.eigenpairs must be at least 2".into());
                }
            }
            Pipeline::Minimize | Pipeline::Check => {
                positive(&mut errs, "lambda", p.lambda);
                positive(&mut errs, "kappa", p.kappa);
            }
            Pipeline::Branch | Pipeline::ReducedBranch => {
                positive(&mut errs, "kappa", p.kappa);
                if p.alphas.is_empty() {
                    errs.push(format!("parameters.alphas is required by pipeline {}", self.pipeline.name()));
                }
                alphas_ok(&mut errs, &p.alphas);
            }
            Pipeline::Nodal => {
                positive(&mut errs, "kappa", p.kappa);
                match p.alpha {
                    None => errs.push("parameters.alpha is required by pipeline nodal".into()),
                    Some(a) => alphas_ok(&mut errs, &[a]),
                }
                if p.epsilons.is_empty() {
                    errs.push("parameters.epsilons is required by pipeline nodal".into());
                }
                for e in &p.epsilons {
                    if !(*e > 0.0 && *e < 0.5) {
                        errs.push(format!("epsilon {e} outside (0, 0.5)"));
                    }
                }
            }
            Pipeline::PhaseDiagram => {
                if p.kappas.is_empty() {
                    errs.push("parameters.kappas is required by pipeline phase-diagram".into());
                }
                for k in &p.kappas {
                    if !(k.is_finite() && *k > 0.0) {
                        errs.push(format!("kappa {k} in parameters.kappas must be positive"));
                    }
                }
                if !(self.phase.tol > 0.0) {
                    errs.push(format!("phase.tol = {} must be positive", self.phase.tol));
                }
            }
            Pipeline::Convert => match &self.physical {
                None => errs.push("[physical] is required by pipeline convert".into()),
                Some(phys) => {
                    if let Err(e) = scaling_convert(phys) {
                        errs.push(e.to_string());
                    }
                }
            },
        }
        if let (Some(spec), Some(profile)) = (&self.domain, &self.field) {
            match Domain::build(spec) {
                Err(e) => errs.push(format!("[domain]: {e}")),
                Ok(d) => match ExternalField::sample(profile, &d).and_then(|f| external_potential(&f, &d)) {
                    Err(e) => errs.push(format!("[field]: {e}")),
                    Ok(g) => {
                        if matches!(self.pipeline, Pipeline::ReducedBranch | Pipeline::Nodal) {
                            if let Err(e) = half_flux_phase(&g, &d) {
                                errs.push(format!("[field]: pipeline {} needs {e}", self.pipeline.name()));
                            }
                        }
                    }
                },
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(errs))
        }
    }
}
