use std::path::Path;

use serde::Serialize;

use crate::error::CliError;
use crate::output::{RunManifest, MANIFEST};

#[derive(Debug, PartialEq, Serialize)]
pub struct Difference {
    pub key: String,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub relative: Option<f64>,
}

#[derive(Debug, PartialEq, Serialize)]
pub struct DiffReport {
    pub pipelines: (String, String),
    pub rtol: f64,
    pub compared: usize,
    pub differences: Vec<Difference>,
}

pub fn load(path: &Path) -> Result<RunManifest, CliError> {
    if path.is_dir() {
        RunManifest::load(&path.join(MANIFEST))
    } else {
        RunManifest::load(path)
    }
}

fn family(pipeline: &str) -> &str {
    match pipeline {
        "reduced-branch" => "branch",
        p => p,
    }
}

/// Scalar-by-scalar relative differences above `rtol`, restricted to keys starting with `only`.
pub fn compare(a: &RunManifest, b: &RunManifest, rtol: f64, only: Option<&str>) -> Result<DiffReport, CliError> {
    if family(&a.pipeline) != family(&b.pipeline) {
        return Err(CliError::Compare(format!(
            "cannot compare a {} run with a {} run",
            a.pipeline, b.pipeline
        )));
    }
    let keep = |k: &String| only.is_none_or(|p| k.starts_with(p));
    let mut keys: Vec<&String> = a.scalars.keys().chain(b.scalars.keys()).filter(|k| keep(k)).collect();
    keys.sort();
    keys.dedup();
    let mut differences = Vec::new();
    for k in &keys {
        let (x, y) = (a.scalars.get(*k).copied(), b.scalars.get(*k).copied());
        let relative = match (x, y) {
            (Some(x), Some(y)) if x == y => Some(0.0),
            (Some(x), Some(y)) => Some((x - y).abs() / x.abs().max(y.abs())),
            _ => None,
        };
        if relative.is_none_or(|r| !(r <= rtol)) {
            differences.push(Difference {
                key: (*k).clone(),
                a: x,
                b: y,
                relative,
            });
        }
    }
    Ok(DiffReport {
        pipelines: (a.pipeline.clone(), b.pipeline.clone()),
        rtol,
        compared: keys.len(),
        differences,
    })
}
