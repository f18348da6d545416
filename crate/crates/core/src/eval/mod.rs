//! Performance oracles: tabular lookups, synthetic landscapes and external
//! training commands behind one [`Evaluator`] trait.

mod external;
mod synthetic;
mod table;

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::record::{ArchRecord, Direction, Measurement, NonFinite, Provenance};
use crate::space::{CodeError, NCode, SearchSpace};

pub use external::ExternalCommand;
pub use synthetic::{Interaction, SyntheticEvaluator, SyntheticLandscape, Utilities, UtilityPreset};
pub use table::{Table, TableError, TableEvaluator};

/// Default ceiling on exhaustive scans.
pub const ENUMERATION_CAP: u64 = 1_000_000;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("code {0} is not present in the table")]
    MissingCode(NCode),
    #[error("invalid code: {0}")]
    InvalidCode(#[from] CodeError),
    #[error("{0}")]
    NonFinite(#[from] NonFinite),
    #[error("command for {code} exited with {status}: {stderr}")]
    NonZeroExit {
        code: NCode,
        status: String,
        stderr: String,
    },
    #[error("command for {code} timed out after {secs}s")]
    Timeout { code: NCode, secs: f64 },
    #[error("command for {code} printed no parseable metric (last line {line:?})")]
    Unparseable { code: NCode, line: String },
    #[error("failed to run command for {code}: {source}")]
    Spawn {
        code: NCode,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("invalid landscape: {0}")]
    Landscape(String),
    #[error("space has {cardinality} members, above the enumeration cap {cap}")]
    CapExceeded { cardinality: String, cap: u64 },
    #[error("exhaustive optimum requires a deterministic evaluator")]
    Nondeterministic,
}

/// Supplies the performance of an architecture.
pub trait Evaluator: Send + Sync {
    fn measure(&self, code: &NCode) -> Result<Measurement, EvalError>;

    fn direction(&self) -> Direction;

    fn metric_name(&self) -> &str;

    /// Whether repeated measurement of a code is guaranteed to agree with
    /// a fresh instance built from the same spec.
    fn is_deterministic(&self) -> bool;
}

impl<E: Evaluator + ?Sized> Evaluator for Arc<E> {
    fn measure(&self, code: &NCode) -> Result<Measurement, EvalError> {
        (**self).measure(code)
    }
    fn direction(&self) -> Direction {
        (**self).direction()
    }
    fn metric_name(&self) -> &str {
        (**self).metric_name()
    }
    fn is_deterministic(&self) -> bool {
        (**self).is_deterministic()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EvaluatorKind {
    Tabular {
        table: PathBuf,
        /// Score missing codes with the column's worst value instead of
        /// failing.
        #[serde(default)]
        impute_worst: bool,
    },
    Synthetic {
        landscape: SyntheticLandscape,
    },
    External {
        /// Shell command; `{ncode}` is replaced by the code text.
        command: String,
        timeout_secs: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        workdir: Option<PathBuf>,
    },
}

/// Declarative evaluator description, as found in evaluator spec files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatorSpec {
    pub metric_name: String,
    pub direction: Direction,
    #[serde(flatten)]
    pub kind: EvaluatorKind,
}

impl EvaluatorSpec {
    pub fn synthetic(landscape: SyntheticLandscape) -> Self {
        Self {
            metric_name: "score".into(),
            direction: Direction::Maximize,
            kind: EvaluatorKind::Synthetic { landscape },
        }
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, std::io::Error> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(std::io::Error::other)
    }

    /// Instantiates the evaluator for `space`. `run_seed` selects the noise
    /// realization of noisy synthetic landscapes and is ignored otherwise.
    pub fn build(&self, space: &SearchSpace, run_seed: u64) -> Result<Arc<dyn Evaluator>, EvalError> {
        Ok(match &self.kind {
            EvaluatorKind::Tabular { table, impute_worst } => {
                let table = Table::load(table, space)?;
                Arc::new(TableEvaluator::new(
                    Arc::new(table),
                    &self.metric_name,
                    self.direction,
                    *impute_worst,
                )?)
            }
            EvaluatorKind::Synthetic { landscape } => Arc::new(SyntheticEvaluator::new(
                landscape.clone(),
                space,
                &self.metric_name,
                self.direction,
                run_seed,
            )?),
            EvaluatorKind::External {
                command,
                timeout_secs,
                workdir,
            } => Arc::new(ExternalCommand::new(
                command,
                std::time::Duration::from_secs_f64(*timeout_secs),
                workdir.clone(),
                &self.metric_name,
                self.direction,
            )),
        })
    }
}

/// Per-run evaluation cache. Each distinct code is measured once.
pub struct Memo<'a> {
    evaluator: &'a dyn Evaluator,
    cache: HashMap<NCode, Measurement>,
}

impl<'a> Memo<'a> {
    pub fn new(evaluator: &'a dyn Evaluator) -> Self {
        Self {
            evaluator,
            cache: HashMap::new(),
        }
    }

    pub fn evaluate(&mut self, code: &NCode, provenance: Provenance) -> Result<ArchRecord, EvalError> {
        let measurement = match self.cache.get(code) {
            Some(m) => m.clone(),
            None => {
                let m = self.evaluator.measure(code)?;
                self.cache.insert(code.clone(), m.clone());
                m
            }
        };
        Ok(ArchRecord::new(code.clone(), measurement, provenance))
    }

    pub fn contains(&self, code: &NCode) -> bool {
        self.cache.contains_key(code)
    }

    pub fn unique_evaluations(&self) -> usize {
        self.cache.len()
    }

    pub fn evaluator(&self) -> &'a dyn Evaluator {
        self.evaluator
    }
}

/// Exhaustive argmax over the space; the lexicographically smallest code
/// wins ties.
pub fn enumerate_optimum(space: &SearchSpace, evaluator: &dyn Evaluator, cap: u64) -> Result<ArchRecord, EvalError> {
    if !evaluator.is_deterministic() {
        return Err(EvalError::Nondeterministic);
    }
    match space.cardinality_u64() {
        Some(n) if n <= cap => {}
        _ => {
            return Err(EvalError::CapExceeded {
                cardinality: space.cardinality().to_string(),
                cap,
            })
        }
    }
    let mut best: Option<(NCode, Measurement)> = None;
    for code in space.codes() {
        let m = evaluator.measure(&code)?;
        // Codes arrive in lexicographic order, so strict improvement keeps
        // the smallest code among ties.
        if best.as_ref().is_none_or(|(_, b)| m.performance > b.performance) {
            best = Some((code, m));
        }
    }
    let (code, m) = best.expect("spaces are non-empty");
    Ok(ArchRecord::new(code, m, Provenance::External))
}
