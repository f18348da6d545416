//! Instruction-tuning trajectories: evaluated history, unevaluated
//! candidates, and the best candidate as the answer.

use std::collections::HashSet;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eval::{EvalError, Evaluator};
use crate::prune::{prune_space, InvalidProbability, PruneConfig, Subspace};
use crate::record::{argmax_by, ArchRecord};
use crate::rng::indexed;
use crate::space::{NCode, SearchSpace};

pub const INSTRUCTION: &str =
    "Please analyze the history, rank the candidate and output the highest-performing candidate.";

/// Samples generated per parallel batch when writing a dataset.
const BATCH: usize = 256;

#[derive(Debug, thiserror::Error)]
pub enum GenError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Probability(#[from] InvalidProbability),
    #[error("invalid generation config: {0}")]
    Config(String),
    #[error("no subspace with at least {min} members after {attempts} attempts")]
    SubspaceTooSmall { min: u64, attempts: usize },
    #[error("history needs at least 2 records to shuffle, got {0}")]
    HistoryTooShort(usize),
    #[error("failed to write dataset: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    /// Inclusive bounds.
    pub n_history_range: (usize, usize),
    pub n_candidates_range: (usize, usize),
    pub n_samples: usize,
    pub performance_decimals: usize,
    /// Subspaces smaller than this are discarded and re-pruned.
    pub min_subspace_members: u64,
    pub max_attempts: usize,
    pub prune: PruneConfig,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            n_history_range: (100, 200),
            n_candidates_range: (100, 200),
            n_samples: 1000,
            performance_decimals: 2,
            min_subspace_members: 2,
            max_attempts: 100,
            prune: PruneConfig::default(),
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        for (name, (lo, hi)) in [
            ("n_history_range", self.n_history_range),
            ("n_candidates_range", self.n_candidates_range),
        ] {
            if lo < 1 || lo > hi {
                return Err(GenError::Config(format!(
                    "{name} must satisfy 1 <= lo <= hi, got ({lo}, {hi})"
                )));
            }
        }
        if self.min_subspace_members < 1 {
            return Err(GenError::Config("min_subspace_members must be >= 1".into()));
        }
        if self.max_attempts < 1 {
            return Err(GenError::Config("max_attempts must be >= 1".into()));
        }
        self.prune.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub ncode: NCode,
    pub raw: f64,
    pub performance: f64,
}

impl From<&ArchRecord> for HistoryEntry {
    fn from(r: &ArchRecord) -> Self {
        Self {
            ncode: r.ncode.clone(),
            raw: r.raw,
            performance: r.performance,
        }
    }
}

/// Descending performance, then ascending code.
pub fn sort_history(history: &mut [HistoryEntry]) {
    history.sort_by(|a, b| {
        b.performance
            .total_cmp(&a.performance)
            .then_with(|| a.ncode.cmp(&b.ncode))
    });
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    pub history: Vec<HistoryEntry>,
    pub candidates: Vec<NCode>,
    pub answer: NCode,
    pub subspace: Subspace,
    pub seed: u64,
    /// Requested sizes were cut down to fit the subspace.
    pub clamped: bool,
}

impl TrajectorySample {
    pub fn render_prompt(&self, decimals: usize) -> String {
        render_prompt(&self.history, &self.candidates, decimals)
    }

    pub fn expected_output(&self) -> String {
        self.answer.to_string()
    }
}

/// Renders the ranking prompt. History lines appear in the given order and
/// show the raw metric value.
pub fn render_prompt(history: &[HistoryEntry], candidates: &[NCode], decimals: usize) -> String {
    let mut out = String::with_capacity(128 + 32 * (history.len() + candidates.len()));
    out.push_str(INSTRUCTION);
    out.push_str("\n\nHistory:\n");
    for h in history {
        out.push_str(&format!("NCode: {}, accuracy: {:.*};\n", h.ncode, decimals, h.raw));
    }
    out.push_str("\nCandidate:\n");
    for c in candidates {
        out.push_str(&c.to_string());
        out.push('\n');
    }
    out
}

/// `n` distinct members of `sub` in random order. `n` must not exceed the
/// subspace cardinality.
fn draw_distinct<R: Rng + ?Sized>(sub: &Subspace, n: usize, rng: &mut R) -> Vec<NCode> {
    let card = sub.cardinality_u64().unwrap_or(u64::MAX);
    debug_assert!(n as u64 <= card);
    if card <= (8 * n as u64).max(1024) {
        let mut members: Vec<NCode> = sub.members().collect();
        let (picked, _) = members.partial_shuffle(rng, n);
        return picked.to_vec();
    }
    let mut seen = HashSet::with_capacity(n);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let code = sub.sample(rng);
        if seen.insert(code.clone()) {
            out.push(code);
        }
    }
    out
}

pub fn generate_sample<R: Rng + ?Sized>(
    space: &SearchSpace,
    evaluator: &dyn Evaluator,
    cfg: &GenConfig,
    seed: u64,
    rng: &mut R,
) -> Result<TrajectorySample, GenError> {
    cfg.validate()?;
    for _ in 0..cfg.max_attempts {
        let sub = prune_space(space, &cfg.prune, rng)?;
        let card = sub.cardinality_u64().unwrap_or(u64::MAX);
        let want_h = rng.random_range(cfg.n_history_range.0..=cfg.n_history_range.1);
        let want_c = rng.random_range(cfg.n_candidates_range.0..=cfg.n_candidates_range.1);
        if card < cfg.min_subspace_members {
            continue;
        }
        let want = (want_h + want_c) as u64;
        let (n_h, n_c, clamped) = if card >= want {
            (want_h, want_c, false)
        } else {
            // Split the available members in the requested proportion,
            // keeping at least one candidate.
            let n_c = ((card * want_c as u64) / want).max(1) as usize;
            (card as usize - n_c, n_c, true)
        };
        let codes = draw_distinct(&sub, n_h + n_c, rng);
        let (hist_codes, cand_codes) = codes.split_at(n_h);

        let mut history = hist_codes
            .iter()
            .map(|code| {
                let m = evaluator.measure(code)?;
                Ok(HistoryEntry {
                    ncode: code.clone(),
                    raw: m.raw,
                    performance: m.performance,
                })
            })
            .collect::<Result<Vec<_>, EvalError>>()?;
        sort_history(&mut history);

        let scored = cand_codes
            .iter()
            .map(|code| Ok((code.clone(), evaluator.measure(code)?.performance)))
            .collect::<Result<Vec<_>, EvalError>>()?;
        let best = argmax_by(&scored, |(c, v)| (c, *v)).expect("at least one candidate");

        return Ok(TrajectorySample {
            history,
            candidates: cand_codes.to_vec(),
            answer: scored[best].0.clone(),
            subspace: sub,
            seed,
            clamped,
        });
    }
    Err(GenError::SubspaceTooSmall {
        min: cfg.min_subspace_members,
        attempts: cfg.max_attempts,
    })
}

/// Randomly permutes the performance values over the history codes, then
/// re-sorts. Candidates and answer are untouched.
pub fn shuffle_mapping<R: Rng + ?Sized>(sample: &TrajectorySample, rng: &mut R) -> Result<TrajectorySample, GenError> {
    if sample.history.len() < 2 {
        return Err(GenError::HistoryTooShort(sample.history.len()));
    }
    let mut out = sample.clone();
    shuffle_history_values(&mut out.history, rng);
    sort_history(&mut out.history);
    Ok(out)
}

pub(crate) fn shuffle_history_values<R: Rng + ?Sized>(history: &mut [HistoryEntry], rng: &mut R) {
    let mut values: Vec<(f64, f64)> = history.iter().map(|h| (h.raw, h.performance)).collect();
    values.shuffle(rng);
    for (h, (raw, perf)) in history.iter_mut().zip(values) {
        h.raw = raw;
        h.performance = perf;
    }
}

/// One line of a dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub instruction: String,
    pub output: String,
    pub meta: SampleMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub seed: u64,
    pub index: u64,
    pub subspace: serde_json::Value,
    pub n_history: usize,
    pub n_candidates: usize,
    pub clamped: bool,
}

impl DatasetRecord {
    pub fn from_sample(sample: &TrajectorySample, index: u64, decimals: usize) -> Self {
        Self {
            instruction: sample.render_prompt(decimals),
            output: sample.expected_output(),
            meta: SampleMeta {
                seed: sample.seed,
                index,
                subspace: serde_json::to_value(&sample.subspace).expect("subspace serializes"),
                n_history: sample.history.len(),
                n_candidates: sample.candidates.len(),
                clamped: sample.clamped,
            },
        }
    }
}

/// Writes `cfg.n_samples` JSON lines. Sample `i` draws from stream `i` of
/// `seed`, so output bytes depend only on `(space, evaluator, cfg, seed)`.
pub fn write_dataset<W: Write>(
    space: &SearchSpace,
    evaluator: &dyn Evaluator,
    cfg: &GenConfig,
    seed: u64,
    writer: W,
) -> Result<usize, GenError> {
    cfg.validate()?;
    let mut writer = BufWriter::new(writer);
    let mut clamped = 0usize;
    let mut start = 0usize;
    while start < cfg.n_samples {
        let end = (start + BATCH).min(cfg.n_samples);
        let lines = (start..end)
            .into_par_iter()
            .map(|i| {
                let mut rng = indexed(seed, i as u64);
                let sample = generate_sample(space, evaluator, cfg, seed, &mut rng)?;
                let record = DatasetRecord::from_sample(&sample, i as u64, cfg.performance_decimals);
                Ok((
                    sample.clamped,
                    serde_json::to_string(&record).expect("record serializes"),
                ))
            })
            .collect::<Result<Vec<_>, GenError>>()?;
        for (was_clamped, line) in lines {
            clamped += was_clamped as usize;
            writer.write_all(line.as_bytes())?;
            writer.write_all(b"\n")?;
        }
        start = end;
    }
    writer.flush()?;
    if clamped > 0 {
        log::warn!(
            "{clamped} of {} samples were clamped to fit their subspace",
            cfg.n_samples
        );
    }
    Ok(cfg.n_samples)
}

pub fn generate_dataset(
    space: &SearchSpace,
    evaluator: &dyn Evaluator,
    cfg: &GenConfig,
    seed: u64,
    out_path: impl AsRef<Path>,
) -> Result<usize, GenError> {
    let file = std::fs::File::create(out_path)?;
    write_dataset(space, evaluator, cfg, seed, file)
}
