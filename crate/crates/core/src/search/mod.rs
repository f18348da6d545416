//! Iterative ranking search, baseline algorithms and ablation tooling.
//!
//! The ranking loop seeds its history with random evaluations, then each
//! iteration builds a pool of unevaluated candidates, lets a [`Ranker`]
//! pick one, evaluates it and appends it to the history.

mod baseline;
mod trace;

use std::collections::HashSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::eval::{Evaluator, Memo, ENUMERATION_CAP};
use crate::rank::Ranker;
use crate::record::{ArchRecord, Provenance};
use crate::rng::{stream, Stream};
use crate::space::{NCode, SearchSpace};

pub use baseline::{mutate, run_random_search, run_regularized_evolution, RegEvoConfig, RegularizedEvolution};
pub use trace::{AbortCause, Candidate, Iteration, RunStatus, SearchTrace, SpaceSignature};

#[derive(Debug, thiserror::Error)]
pub enum SearchError {
    #[error("invalid search config: {0}")]
    Config(String),
    #[error("no dimension has more than one option, so nothing can be mutated")]
    NoMutableDimension,
    #[error("trace was not produced in mixed candidate mode")]
    WrongMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CandidateMode {
    /// Every candidate drawn uniformly from the space.
    Random,
    /// Half random, half mutations of tournament-selected history members.
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub n_init: usize,
    pub n_candidates: usize,
    pub n_iters: usize,
    pub candidate_mode: CandidateMode,
    /// Caps the history shown to the ranker: the best half and the most
    /// recent half.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub history_window: Option<usize>,
    /// Tournament size used for evolved candidates in mixed mode.
    pub tournament_size: usize,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            n_init: 10,
            n_candidates: 10,
            n_iters: 200,
            candidate_mode: CandidateMode::Random,
            history_window: None,
            tournament_size: 10,
            seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        if self.n_init < 1 || self.n_candidates < 1 || self.tournament_size < 1 {
            return Err(SearchError::Config(
                "n_init, n_candidates and tournament_size must be >= 1".into(),
            ));
        }
        if self.history_window == Some(0) {
            return Err(SearchError::Config("history_window must be >= 1".into()));
        }
        Ok(())
    }
}

/// Draws up to `n` distinct codes uniformly from the codes for which
/// `taken` is false, marking them taken. Returns fewer than `n` only when
/// the space has run out.
pub(crate) fn draw_novel<R: Rng + ?Sized>(
    space: &SearchSpace,
    n: usize,
    taken: &mut HashSet<NCode>,
    rng: &mut R,
) -> Vec<NCode> {
    let mut out = Vec::with_capacity(n);
    let mut misses = 0;
    while out.len() < n && misses < 64 * n.max(1) {
        let code = space.sample(rng);
        if taken.insert(code.clone()) {
            out.push(code);
        } else {
            misses += 1;
        }
    }
    if out.len() < n {
        // Dense region: fall back to sampling the complement directly.
        if space.cardinality_u64().is_some_and(|c| c <= ENUMERATION_CAP) {
            let mut rest: Vec<NCode> = space.codes().filter(|c| !taken.contains(c)).collect();
            let want = (n - out.len()).min(rest.len());
            let (picked, _) = rest.partial_shuffle(rng, want);
            for code in picked.iter() {
                taken.insert(code.clone());
                out.push(code.clone());
            }
        } else {
            log::warn!("could not find {n} unevaluated codes by rejection sampling");
        }
    }
    out
}

/// Best of a uniform sample of `size` records, smallest code among ties.
pub(crate) fn tournament<'a, R: Rng + ?Sized>(pool: &'a [ArchRecord], size: usize, rng: &mut R) -> &'a ArchRecord {
    pool.choose_multiple(rng, size.min(pool.len()))
        .reduce(|a, b| {
            if b.performance > a.performance || (b.performance == a.performance && b.ncode < a.ncode) {
                b
            } else {
                a
            }
        })
        .expect("tournament over non-empty pool")
}

fn build_pool<R: Rng + ?Sized>(
    space: &SearchSpace,
    cfg: &SearchConfig,
    history: &[ArchRecord],
    evaluated: &HashSet<NCode>,
    mutable: bool,
    rng: &mut R,
) -> Vec<Candidate> {
    let mut taken = evaluated.clone();
    let n_evolved = match cfg.candidate_mode {
        CandidateMode::Random => 0,
        CandidateMode::Mixed if mutable => cfg.n_candidates / 2,
        CandidateMode::Mixed => 0,
    };
    let mut pool: Vec<Candidate> = Vec::with_capacity(cfg.n_candidates);
    for _ in 0..n_evolved {
        let child = (0..32).find_map(|_| {
            let parent = tournament(history, cfg.tournament_size, rng);
            let child = mutate(space, &parent.ncode, rng).ok()?;
            taken.insert(child.clone()).then_some(child)
        });
        if let Some(ncode) = child {
            pool.push(Candidate {
                ncode,
                provenance: Provenance::Evolved,
            });
        }
    }
    let n_random = cfg.n_candidates - pool.len();
    pool.extend(
        draw_novel(space, n_random, &mut taken, rng)
            .into_iter()
            .map(|ncode| Candidate {
                ncode,
                provenance: Provenance::Random,
            }),
    );
    // Position in the pool carries no information about provenance.
    pool.shuffle(rng);
    pool
}

/// History as shown to the ranker under a window: the best `ceil(w/2)`
/// records plus the most recent others, in evaluation order.
fn windowed(history: &[ArchRecord], window: Option<usize>) -> Vec<ArchRecord> {
    let Some(w) = window.filter(|&w| w < history.len()) else {
        return history.to_vec();
    };
    let mut by_perf: Vec<usize> = (0..history.len()).collect();
    by_perf.sort_by(|&a, &b| {
        history[b]
            .performance
            .total_cmp(&history[a].performance)
            .then_with(|| history[a].ncode.cmp(&history[b].ncode))
    });
    let mut keep: HashSet<usize> = by_perf.into_iter().take(w.div_ceil(2)).collect();
    for i in (0..history.len()).rev() {
        if keep.len() >= w {
            break;
        }
        keep.insert(i);
    }
    (0..history.len())
        .filter(|i| keep.contains(i))
        .map(|i| history[i].clone())
        .collect()
}

/// Permutes measured values across codes; codes keep their positions.
fn shuffle_values<R: Rng + ?Sized>(history: &mut [ArchRecord], rng: &mut R) {
    let mut values: Vec<(f64, f64, _)> = history
        .iter_mut()
        .map(|r| (r.performance, r.raw, std::mem::take(&mut r.raw_metrics)))
        .collect();
    values.shuffle(rng);
    for (r, (perf, raw, metrics)) in history.iter_mut().zip(values) {
        r.performance = perf;
        r.raw = raw;
        r.raw_metrics = metrics;
    }
}

fn search_loop(
    space: &SearchSpace,
    evaluator: &dyn Evaluator,
    ranker: &mut dyn Ranker,
    cfg: &SearchConfig,
    shuffle: bool,
) -> Result<SearchTrace, SearchError> {
    cfg.validate()?;
    let algorithm = if shuffle { "ranked-shuffled" } else { "ranked" };
    let config = serde_json::to_value(cfg).expect("config serializes");
    let mut trace = SearchTrace::new(algorithm, space, cfg.seed, config);
    trace.ranker = Some(ranker.name().to_string());
    trace.candidate_mode = Some(cfg.candidate_mode);

    let mut init_rng = stream(cfg.seed, Stream::Init);
    let mut cand_rng = stream(cfg.seed, Stream::Candidates);
    let mut rank_rng = stream(cfg.seed, Stream::Ranker);
    let mut shuffle_rng = stream(cfg.seed, Stream::Shuffle);

    let mut memo = Memo::new(evaluator);
    let mut evaluated: HashSet<NCode> = HashSet::new();
    let mut history: Vec<ArchRecord> = Vec::new();
    let mutable = space.dimensions().iter().any(|d| d.radix() > 1);

    for code in draw_novel(space, cfg.n_init, &mut evaluated, &mut init_rng) {
        match memo.evaluate(&code, Provenance::Seed) {
            Ok(record) => {
                history.push(record.clone());
                trace.push_initial(record);
            }
            Err(e) => {
                trace.status = RunStatus::Aborted {
                    cause: AbortCause::Evaluator,
                    reason: e.to_string(),
                };
                trace.unique_evaluations = memo.unique_evaluations();
                return Ok(trace);
            }
        }
    }

    for _ in 0..cfg.n_iters {
        let pool = build_pool(space, cfg, &history, &evaluated, mutable, &mut cand_rng);
        if pool.is_empty() {
            trace.status = RunStatus::Exhausted;
            break;
        }
        let codes: Vec<NCode> = pool.iter().map(|c| c.ncode.clone()).collect();
        let mut shown = windowed(&history, cfg.history_window);
        if shuffle {
            shuffle_values(&mut shown, &mut shuffle_rng);
        }
        let decision = match ranker.rank(&shown, &codes, &mut rank_rng) {
            Ok(d) => d,
            Err(e) => {
                trace.status = RunStatus::Aborted {
                    cause: match e {
                        crate::rank::RankError::Eval(_) => AbortCause::Evaluator,
                        _ => AbortCause::Ranker,
                    },
                    reason: e.to_string(),
                };
                break;
            }
        };
        let Some(picked) = pool.iter().find(|c| c.ncode == decision.chosen) else {
            trace.status = RunStatus::Aborted {
                cause: AbortCause::Ranker,
                reason: format!("ranker chose {} which is not in the pool", decision.chosen),
            };
            break;
        };
        let record = match memo.evaluate(&picked.ncode, picked.provenance) {
            Ok(r) => r,
            Err(e) => {
                trace.status = RunStatus::Aborted {
                    cause: AbortCause::Evaluator,
                    reason: e.to_string(),
                };
                break;
            }
        };
        evaluated.insert(record.ncode.clone());
        history.push(record.clone());
        trace.push_iteration(pool, Some(decision), record);
    }
    trace.unique_evaluations = memo.unique_evaluations();
    Ok(trace)
}

/// The ranking search loop.
pub fn run_search(
    space: &SearchSpace,
    evaluator: &dyn Evaluator,
    ranker: &mut dyn Ranker,
    cfg: &SearchConfig,
) -> Result<SearchTrace, SearchError> {
    search_loop(space, evaluator, ranker, cfg, false)
}

/// Same loop, but the ranker sees history values permuted across codes at
/// every iteration. Bookkeeping uses the true values.
pub fn shuffled_history_search(
    space: &SearchSpace,
    evaluator: &dyn Evaluator,
    ranker: &mut dyn Ranker,
    cfg: &SearchConfig,
) -> Result<SearchTrace, SearchError> {
    search_loop(space, evaluator, ranker, cfg, true)
}

/// Sliding-window fraction of chosen candidates that came from random
/// generation. Entry `(i, f)` covers iterations `i + 1 - window ..= i`.
pub fn provenance_ratio(trace: &SearchTrace, window: usize) -> Result<Vec<(usize, f64)>, SearchError> {
    if trace.candidate_mode != Some(CandidateMode::Mixed) {
        return Err(SearchError::WrongMode);
    }
    if window == 0 {
        return Err(SearchError::Config("window must be >= 1".into()));
    }
    let random: Vec<f64> = trace
        .iterations
        .iter()
        .map(|it| (it.evaluated.provenance == Provenance::Random) as u8 as f64)
        .collect();
    Ok(random
        .windows(window)
        .enumerate()
        .map(|(start, w)| (start + window - 1, w.iter().sum::<f64>() / window as f64))
        .collect())
}
