//! Random search and regularized (aging) evolution baselines.

use std::collections::{HashSet, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{draw_novel, tournament, AbortCause, RunStatus, SearchError, SearchTrace};
use crate::eval::{EvalError, Evaluator, Memo};
use crate::record::{ArchRecord, Provenance};
use crate::rng::{stream, Stream};
use crate::space::{NCode, SearchSpace};

/// Resamples one uniformly chosen dimension to a different option.
/// Single-option dimensions are never chosen.
pub fn mutate<R: Rng + ?Sized>(space: &SearchSpace, code: &NCode, rng: &mut R) -> Result<NCode, SearchError> {
    let sites: Vec<usize> = space
        .dimensions()
        .iter()
        .enumerate()
        .filter(|(_, d)| d.radix() > 1)
        .map(|(i, _)| i)
        .collect();
    if sites.is_empty() {
        return Err(SearchError::NoMutableDimension);
    }
    let site = sites[rng.random_range(0..sites.len())];
    let radix = space.dimensions()[site].radix() as u8;
    let mut child = code.clone();
    let current = child.digits()[site];
    // Uniform over the other radix - 1 options.
    let mut next = rng.random_range(0..radix - 1);
    if next >= current {
        next += 1;
    }
    child.digits_mut()[site] = next;
    Ok(child)
}

fn abort(trace: &mut SearchTrace, err: EvalError) {
    trace.status = RunStatus::Aborted {
        cause: AbortCause::Evaluator,
        reason: err.to_string(),
    };
}

/// Uniform random search over distinct codes. A budget above the space
/// cardinality is clamped.
pub fn run_random_search(
    space: &SearchSpace,
    evaluator: &dyn Evaluator,
    budget: usize,
    seed: u64,
) -> Result<SearchTrace, SearchError> {
    if budget < 1 {
        return Err(SearchError::Config("budget must be >= 1".into()));
    }
    let budget = match space.cardinality_u64() {
        Some(card) if (budget as u64) > card => {
            log::warn!("budget {budget} exceeds the {card} codes in the space; clamping");
            card as usize
        }
        _ => budget,
    };
    let config = serde_json::json!({ "budget": budget, "seed": seed });
    let mut trace = SearchTrace::new("random", space, seed, config);
    let mut rng = stream(seed, Stream::Init);
    let mut memo = Memo::new(evaluator);
    let mut taken = HashSet::new();
    for code in draw_novel(space, budget, &mut taken, &mut rng) {
        match memo.evaluate(&code, Provenance::Random) {
            Ok(record) => trace.push_iteration(Vec::new(), None, record),
            Err(e) => {
                abort(&mut trace, e);
                break;
            }
        }
    }
    trace.unique_evaluations = memo.unique_evaluations();
    Ok(trace)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegEvoConfig {
    /// Total evaluation queries, initial population included.
    pub budget: usize,
    pub population_size: usize,
    pub tournament_size: usize,
    pub seed: u64,
}

impl Default for RegEvoConfig {
    fn default() -> Self {
        Self {
            budget: 200,
            population_size: 50,
            tournament_size: 10,
            seed: 0,
        }
    }
}

/// Aging evolution: each step mutates the winner of a tournament, appends
/// the child and retires the oldest member.
pub struct RegularizedEvolution<'a> {
    space: &'a SearchSpace,
    cfg: RegEvoConfig,
    memo: Memo<'a>,
    population: VecDeque<ArchRecord>,
    rng: crate::rng::StreamRng,
}

impl<'a> RegularizedEvolution<'a> {
    /// Evaluates the random initial population.
    pub fn start(
        space: &'a SearchSpace,
        evaluator: &'a dyn Evaluator,
        cfg: RegEvoConfig,
        trace: &mut SearchTrace,
    ) -> Result<Option<Self>, SearchError> {
        if !(cfg.budget >= cfg.population_size
            && cfg.population_size >= cfg.tournament_size
            && cfg.tournament_size >= 1)
        {
            return Err(SearchError::Config(
                "need budget >= population_size >= tournament_size >= 1".into(),
            ));
        }
        if space.dimensions().iter().all(|d| d.radix() == 1) {
            return Err(SearchError::NoMutableDimension);
        }
        let mut init_rng = stream(cfg.seed, Stream::Init);
        let mut memo = Memo::new(evaluator);
        let mut population = VecDeque::with_capacity(cfg.population_size);
        let mut taken = HashSet::new();
        let codes = draw_novel(space, cfg.population_size, &mut taken, &mut init_rng);
        if codes.len() < cfg.population_size {
            return Err(SearchError::Config(format!(
                "space holds only {} codes, fewer than the population size {}",
                codes.len(),
                cfg.population_size
            )));
        }
        for code in codes {
            match memo.evaluate(&code, Provenance::Random) {
                Ok(record) => {
                    population.push_back(record.clone());
                    trace.push_initial(record);
                }
                Err(e) => {
                    abort(trace, e);
                    trace.unique_evaluations = memo.unique_evaluations();
                    return Ok(None);
                }
            }
        }
        Ok(Some(Self {
            space,
            cfg,
            memo,
            population,
            rng: stream(cfg.seed, Stream::Evolution),
        }))
    }

    /// One tournament, mutation and aging step.
    pub fn step(&mut self) -> Result<ArchRecord, EvalError> {
        let pool: Vec<ArchRecord> = self.population.iter().cloned().collect();
        let parent = tournament(&pool, self.cfg.tournament_size, &mut self.rng);
        let child = mutate(self.space, &parent.ncode, &mut self.rng).expect("checked at start");
        let record = self.memo.evaluate(&child, Provenance::Evolved)?;
        self.population.push_back(record.clone());
        self.population.pop_front();
        Ok(record)
    }

    pub fn population(&self) -> &VecDeque<ArchRecord> {
        &self.population
    }

    pub fn unique_evaluations(&self) -> usize {
        self.memo.unique_evaluations()
    }
}

pub fn run_regularized_evolution(
    space: &SearchSpace,
    evaluator: &dyn Evaluator,
    cfg: RegEvoConfig,
) -> Result<SearchTrace, SearchError> {
    let config = serde_json::to_value(cfg).expect("config serializes");
    let mut trace = SearchTrace::new("regevo", space, cfg.seed, config);
    let Some(mut evo) = RegularizedEvolution::start(space, evaluator, cfg, &mut trace)? else {
        return Ok(trace);
    };
    for _ in cfg.population_size..cfg.budget {
        match evo.step() {
            Ok(record) => trace.push_iteration(Vec::new(), None, record),
            Err(e) => {
                abort(&mut trace, e);
                break;
            }
        }
    }
    trace.unique_evaluations = evo.unique_evaluations();
    Ok(trace)
}
