use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use ncode_core::eval::EvaluatorKind;
use ncode_core::{EvaluatorSpec, RankerSpec, SearchSpace};

use crate::error::CliError;

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Everything needed to rerun a command: resolved inputs, seed and where
/// the outputs went. Output file names are left out so a rerun into a
/// different path produces the same bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub toolkit_version: String,
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<SearchSpace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluator: Option<EvaluatorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ranker: Option<RankerSpec>,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub config: serde_json::Value,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inputs: Vec<String>,
    pub layout: String,
}

impl RunManifest {
    pub fn new(command: &str, layout: &str) -> Self {
        Self {
            toolkit_version: TOOLKIT_VERSION.to_string(),
            command: command.to_string(),
            seed: None,
            seeds: Vec::new(),
            config_path: None,
            space: None,
            evaluator: None,
            ranker: None,
            config: serde_json::Value::Null,
            inputs: Vec::new(),
            layout: layout.to_string(),
        }
    }

    pub fn load(path: &Path, command: &str) -> Result<Self, CliError> {
        let manifest: RunManifest = read_json(path)?;
        if manifest.command != command {
            return Err(CliError::Validation(format!(
                "{}: manifest was written by `{}`, not `{command}`",
                path.display(),
                manifest.command
            )));
        }
        if manifest.toolkit_version != TOOLKIT_VERSION {
            log::warn!(
                "manifest written by version {}, running {TOOLKIT_VERSION}",
                manifest.toolkit_version
            );
        }
        Ok(manifest)
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("manifest serializes")
    }

    pub(crate) fn require<'a, T>(&self, field: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
        field
            .as_ref()
            .ok_or_else(|| CliError::Validation(format!("manifest has no {name} snapshot")))
    }
}

/// Path of the manifest written next to an output file.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}

pub(crate) fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    write_text(path, &text)
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub(crate) fn load_space(path: &Path) -> Result<SearchSpace, CliError> {
    Ok(SearchSpace::load(path)?)
}

/// Loads an evaluator spec. Relative table and working-directory paths
/// are taken relative to the spec file and stored absolute.
pub(crate) fn load_evaluator(path: &Path) -> Result<EvaluatorSpec, CliError> {
    let mut spec: EvaluatorSpec = read_json(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let resolve = |p: &mut PathBuf| {
        if p.is_relative() {
            let joined = base.join(&*p);
            *p = joined.canonicalize().unwrap_or(joined);
        }
    };
    match &mut spec.kind {
        EvaluatorKind::Tabular { table, .. } => resolve(table),
        EvaluatorKind::External { workdir: Some(dir), .. } => resolve(dir),
        _ => {}
    }
    Ok(spec)
}

pub(crate) fn load_ranker(path: &Path) -> Result<RankerSpec, CliError> {
    read_json(path)
}

pub(crate) fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, CliError> {
    match path {
        Some(p) => read_json(p),
        None => Ok(T::default()),
    }
}

/// Parses `"0-29"`, `"1,4,9"` or a mix like `"0-3,10"`.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>, CliError> {
    let bad = |part: &str| CliError::Usage(format!("invalid seed list entry {part:?}"));
    let mut seeds = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((lo, hi)) => {
                let lo: u64 = lo.trim().parse().map_err(|_| bad(part))?;
                let hi: u64 = hi.trim().parse().map_err(|_| bad(part))?;
                if lo > hi {
                    return Err(bad(part));
                }
                seeds.extend(lo..=hi);
            }
            None => seeds.push(part.parse().map_err(|_| bad(part))?),
        }
    }
    if seeds.is_empty() {
        return Err(CliError::Usage("seed list is empty".into()));
    }
    let mut seen = std::collections::HashSet::new();
    if let Some(dup) = seeds.iter().find(|s| !seen.insert(**s)) {
        return Err(CliError::Usage(format!("seed {dup} listed twice")));
    }
    Ok(seeds)
}
