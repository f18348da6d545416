use serde::{Deserialize, Serialize};

use super::CandidateMode;
use crate::rank::RankDecision;
use crate::record::{ArchRecord, Provenance};
use crate::space::{NCode, SearchSpace};

/// Enough of a space to tell whether two traces are comparable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceSignature {
    pub name: String,
    pub radices: Vec<usize>,
}

impl From<&SearchSpace> for SpaceSignature {
    fn from(space: &SearchSpace) -> Self {
        Self {
            name: space.name().to_string(),
            radices: space.radices(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub ncode: NCode,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Iteration {
    pub index: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub candidates: Vec<Candidate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision: Option<RankDecision>,
    pub evaluated: ArchRecord,
    pub best_so_far: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AbortCause {
    Evaluator,
    Ranker,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum RunStatus {
    Completed,
    /// Every code of the space was evaluated before the budget ran out.
    Exhausted,
    Aborted {
        cause: AbortCause,
        reason: String,
    },
}

/// Full log of one run. Field order is fixed so serialized traces are
/// byte-stable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchTrace {
    pub algorithm: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ranker: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate_mode: Option<CandidateMode>,
    pub seed: u64,
    pub space: SpaceSignature,
    pub config: serde_json::Value,
    pub initial: Vec<ArchRecord>,
    pub iterations: Vec<Iteration>,
    pub best: Option<ArchRecord>,
    pub unique_evaluations: usize,
    #[serde(flatten)]
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<serde_json::Value>,
}

impl SearchTrace {
    pub(crate) fn new(algorithm: &str, space: &SearchSpace, seed: u64, config: serde_json::Value) -> Self {
        Self {
            algorithm: algorithm.to_string(),
            ranker: None,
            candidate_mode: None,
            seed,
            space: space.into(),
            config,
            initial: Vec::new(),
            iterations: Vec::new(),
            best: None,
            unique_evaluations: 0,
            status: RunStatus::Completed,
            manifest: None,
        }
    }

    pub(crate) fn offer_best(&mut self, record: &ArchRecord) {
        let replace = match &self.best {
            None => true,
            Some(b) => {
                record.performance > b.performance || (record.performance == b.performance && record.ncode < b.ncode)
            }
        };
        if replace {
            self.best = Some(record.clone());
        }
    }

    pub(crate) fn push_initial(&mut self, record: ArchRecord) {
        self.offer_best(&record);
        self.initial.push(record);
    }

    pub(crate) fn push_iteration(
        &mut self,
        candidates: Vec<Candidate>,
        decision: Option<RankDecision>,
        evaluated: ArchRecord,
    ) {
        self.offer_best(&evaluated);
        let best_so_far = self.best.as_ref().map_or(f64::NEG_INFINITY, |b| b.performance);
        self.iterations.push(Iteration {
            index: self.iterations.len(),
            candidates,
            decision,
            evaluated,
            best_so_far,
        });
    }

    /// Best canonical value after each evaluation, initial ones included.
    pub fn best_so_far_curve(&self) -> Vec<f64> {
        let mut best = f64::NEG_INFINITY;
        self.initial
            .iter()
            .chain(self.iterations.iter().map(|i| &i.evaluated))
            .map(|r| {
                best = best.max(r.performance);
                best
            })
            .collect()
    }

    pub fn final_best(&self) -> Option<f64> {
        self.best.as_ref().map(|b| b.performance)
    }

    /// Decisions that fell back to a random pick.
    pub fn fallback_count(&self) -> usize {
        self.iterations
            .iter()
            .filter(|i| i.decision.as_ref().is_some_and(|d| d.fallback_used))
            .count()
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("trace serializes");
        text.push('\n');
        text
    }
}
