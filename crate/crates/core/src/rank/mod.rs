//! Candidate selection policies.
//!
//! A ranker sees the evaluated history and an unevaluated candidate pool and
//! names the candidate it expects to perform best. Whatever happens inside
//! (including endpoint failures), the chosen code is always a member of the
//! pool it was given.

mod llm;

use std::cmp::Ordering;
use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::eval::{EvalError, Evaluator};
use crate::record::ArchRecord;
use crate::space::NCode;

pub use llm::{parse_reply, LlmEndpointConfig, LlmRanker, DEFAULT_API_KEY_ENV};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankDecision {
    pub chosen: NCode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ranking: Option<Vec<NCode>>,
    pub fallback_used: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_reply: Option<String>,
}

impl RankDecision {
    fn plain(chosen: NCode) -> Self {
        Self {
            chosen,
            ranking: None,
            fallback_used: false,
            raw_reply: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RankError {
    #[error("candidate pool is empty")]
    EmptyCandidates,
    #[error("ranker needs at least one history record")]
    EmptyHistory,
    #[error("oracle evaluation failed: {0}")]
    Eval(#[from] EvalError),
    #[error("endpoint misconfigured: {0}")]
    Config(String),
}

pub trait Ranker {
    fn name(&self) -> &'static str;

    fn rank(
        &mut self,
        history: &[ArchRecord],
        candidates: &[NCode],
        rng: &mut dyn RngCore,
    ) -> Result<RankDecision, RankError>;
}

pub fn rank_random(candidates: &[NCode], rng: &mut dyn RngCore) -> Result<RankDecision, RankError> {
    candidates
        .choose(rng)
        .cloned()
        .map(RankDecision::plain)
        .ok_or(RankError::EmptyCandidates)
}

/// Perfect-information ranker: measures every candidate.
pub fn rank_oracle(candidates: &[NCode], evaluator: &dyn Evaluator) -> Result<RankDecision, RankError> {
    if candidates.is_empty() {
        return Err(RankError::EmptyCandidates);
    }
    let mut scored = candidates
        .iter()
        .map(|c| Ok((c.clone(), evaluator.measure(c)?.performance)))
        .collect::<Result<Vec<_>, EvalError>>()?;
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let ranking: Vec<NCode> = scored.into_iter().map(|(c, _)| c).collect();
    Ok(RankDecision {
        chosen: ranking[0].clone(),
        ranking: Some(ranking),
        fallback_used: false,
        raw_reply: None,
    })
}

/// Predicts each candidate as the mean performance of its `k` nearest
/// history codes by Hamming distance. Every record tied with the k-th
/// nearest distance is included. Prediction ties go to the candidate with
/// the smaller mean neighbour distance, then to the smaller code.
pub fn rank_knn(history: &[ArchRecord], candidates: &[NCode], k: usize) -> Result<RankDecision, RankError> {
    if candidates.is_empty() {
        return Err(RankError::EmptyCandidates);
    }
    if history.is_empty() {
        return Err(RankError::EmptyHistory);
    }
    let k = k.clamp(1, history.len());
    let mut scored: Vec<(NCode, f64, f64)> = candidates
        .iter()
        .map(|c| {
            let mut near: Vec<(usize, f64)> = history.iter().map(|h| (c.hamming(&h.ncode), h.performance)).collect();
            near.sort_by_key(|&(d, _)| d);
            let cutoff = near[k - 1].0;
            let neighbours: Vec<&(usize, f64)> = near.iter().take_while(|(d, _)| *d <= cutoff).collect();
            let n = neighbours.len() as f64;
            let prediction = neighbours.iter().map(|(_, p)| p).sum::<f64>() / n;
            let distance = neighbours.iter().map(|(d, _)| *d as f64).sum::<f64>() / n;
            (c.clone(), prediction, distance)
        })
        .collect();
    scored.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then_with(|| a.2.partial_cmp(&b.2).unwrap_or(Ordering::Equal))
            .then_with(|| a.0.cmp(&b.0))
    });
    let ranking: Vec<NCode> = scored.into_iter().map(|(c, _, _)| c).collect();
    Ok(RankDecision {
        chosen: ranking[0].clone(),
        ranking: Some(ranking),
        fallback_used: false,
        raw_reply: None,
    })
}

#[derive(Debug, Default, Clone, Copy)]
pub struct RandomRanker;

impl Ranker for RandomRanker {
    fn name(&self) -> &'static str {
        "random"
    }

    fn rank(
        &mut self,
        _history: &[ArchRecord],
        candidates: &[NCode],
        rng: &mut dyn RngCore,
    ) -> Result<RankDecision, RankError> {
        rank_random(candidates, rng)
    }
}

pub struct OracleRanker {
    evaluator: Arc<dyn Evaluator>,
}

impl OracleRanker {
    pub fn new(evaluator: Arc<dyn Evaluator>) -> Self {
        Self { evaluator }
    }
}

impl Ranker for OracleRanker {
    fn name(&self) -> &'static str {
        "oracle"
    }

    fn rank(
        &mut self,
        _history: &[ArchRecord],
        candidates: &[NCode],
        _rng: &mut dyn RngCore,
    ) -> Result<RankDecision, RankError> {
        rank_oracle(candidates, self.evaluator.as_ref())
    }
}

/// Nearest-neighbour surrogate; falls back to a uniform pick while the
/// history is empty.
#[derive(Debug, Clone, Copy)]
pub struct KnnRanker {
    pub k: usize,
}

impl Default for KnnRanker {
    fn default() -> Self {
        Self { k: 5 }
    }
}

impl Ranker for KnnRanker {
    fn name(&self) -> &'static str {
        "knn"
    }

    fn rank(
        &mut self,
        history: &[ArchRecord],
        candidates: &[NCode],
        rng: &mut dyn RngCore,
    ) -> Result<RankDecision, RankError> {
        match rank_knn(history, candidates, self.k) {
            Err(RankError::EmptyHistory) => rank_random(candidates, rng),
            other => other,
        }
    }
}

fn default_k() -> usize {
    5
}

/// Declarative ranker choice, as found in ranker spec files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RankerSpec {
    Random,
    Oracle,
    Knn {
        #[serde(default = "default_k")]
        k: usize,
    },
    Llm(LlmEndpointConfig),
}

impl RankerSpec {
    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, std::io::Error> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(std::io::Error::other)
    }

    /// The oracle ranker measures candidates through `evaluator`; other
    /// kinds ignore it.
    pub fn build(&self, evaluator: Arc<dyn Evaluator>) -> Result<Box<dyn Ranker + Send>, RankError> {
        Ok(match self {
            RankerSpec::Random => Box::new(RandomRanker),
            RankerSpec::Oracle => Box::new(OracleRanker::new(evaluator)),
            RankerSpec::Knn { k } => Box::new(KnnRanker { k: *k }),
            RankerSpec::Llm(cfg) => Box::new(LlmRanker::from_env(cfg.clone())?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{SyntheticEvaluator, SyntheticLandscape};
    use crate::record::{Direction, Measurement, Provenance};
    use crate::rng::indexed;
    use crate::space::SearchSpace;
    use proptest::prelude::*;
    use rand::Rng;

    fn code(s: &str) -> NCode {
        s.parse().unwrap()
    }

    fn record(s: &str, perf: f64) -> ArchRecord {
        ArchRecord::new(
            code(s),
            Measurement::new(perf, Direction::Maximize, Default::default()).unwrap(),
            Provenance::Seed,
        )
    }

    struct Lookup(Vec<(NCode, f64)>);
    impl Evaluator for Lookup {
        fn measure(&self, c: &NCode) -> Result<Measurement, EvalError> {
            let v = self
                .0
                .iter()
                .find(|(k, _)| k == c)
                .map(|(_, v)| *v)
                .ok_or_else(|| EvalError::MissingCode(c.clone()))?;
            Ok(Measurement::new(v, Direction::Maximize, Default::default())?)
        }
        fn direction(&self) -> Direction {
            Direction::Maximize
        }
        fn metric_name(&self) -> &str {
            "v"
        }
        fn is_deterministic(&self) -> bool {
            true
        }
    }

    #[test]
    fn random_single_candidate() {
        let d = rank_random(&[code("12")], &mut indexed(0, 0)).unwrap();
        assert_eq!(d.chosen, code("12"));
        assert!(!d.fallback_used);
        assert!(matches!(
            rank_random(&[], &mut indexed(0, 0)),
            Err(RankError::EmptyCandidates)
        ));
    }

    #[test]
    fn random_is_uniform() {
        let pool: Vec<NCode> = (0..10).map(|i| NCode::from_digits(vec![i])).collect();
        let mut counts = [0usize; 10];
        let mut rng = indexed(4, 0);
        for _ in 0..10_000 {
            counts[rank_random(&pool, &mut rng).unwrap().chosen.digits()[0] as usize] += 1;
        }
        assert!(counts.iter().all(|&c| (900..=1100).contains(&c)), "{counts:?}");
    }

    #[test]
    fn random_ranker_ignores_history() {
        let pool: Vec<NCode> = (0..10).map(|i| NCode::from_digits(vec![i])).collect();
        let full = vec![record("3", 9.0), record("4", 1.0)];
        let mut r = RandomRanker;
        for seed in 0..100 {
            let a = r.rank(&[], &pool, &mut indexed(seed, 0)).unwrap();
            let b = r.rank(&full, &pool, &mut indexed(seed, 0)).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn oracle_picks_argmax() {
        let table = Lookup(vec![(code("0"), 0.1), (code("1"), 0.9), (code("2"), 0.5)]);
        let d = rank_oracle(&[code("0"), code("1"), code("2")], &table).unwrap();
        assert_eq!(d.chosen, code("1"));
        assert_eq!(d.ranking.unwrap(), vec![code("1"), code("2"), code("0")]);
    }

    #[test]
    fn oracle_tie_goes_to_smaller_code() {
        let table = Lookup(vec![(code("7"), 1.0), (code("3"), 1.0)]);
        let d = rank_oracle(&[code("7"), code("3")], &table).unwrap();
        assert_eq!(d.chosen, code("3"));
    }

    #[test]
    fn oracle_propagates_evaluator_failure() {
        let table = Lookup(vec![(code("7"), 1.0)]);
        assert!(matches!(
            rank_oracle(&[code("7"), code("8")], &table),
            Err(RankError::Eval(_))
        ));
    }

    #[test]
    fn oracle_matches_exhaustive_scan() {
        let space = SearchSpace::uniform("s", 5, 4).unwrap();
        let rows = (0..5)
            .map(|d| (0..4).map(|o| ((d * 3 + o * 5) % 7) as f64).collect())
            .collect();
        let eval =
            SyntheticEvaluator::new(SyntheticLandscape::explicit(rows), &space, "v", Direction::Maximize, 0).unwrap();
        let mut rng = indexed(8, 0);
        for _ in 0..1000 {
            let n = rng.random_range(1..15);
            let pool: Vec<NCode> = (0..n).map(|_| space.sample(&mut rng)).collect();
            let d = rank_oracle(&pool, &eval).unwrap();
            // Independent scan: keep the first strict improvement over codes
            // visited in ascending order.
            let mut sorted = pool.clone();
            sorted.sort();
            let mut best = &sorted[0];
            for c in &sorted {
                if eval.measure(c).unwrap().performance > eval.measure(best).unwrap().performance {
                    best = c;
                }
            }
            assert_eq!(&d.chosen, best);
        }
    }

    #[test]
    fn knn_distance_breaks_prediction_ties() {
        let d = rank_knn(&[record("000", 1.0)], &[code("111"), code("001")], 1).unwrap();
        assert_eq!(d.chosen, code("001"));
    }

    #[test]
    fn knn_includes_exact_match() {
        let history = vec![record("000", 5.0), record("111", 1.0), record("110", 1.0)];
        // k = 1: "000" is its own nearest neighbour at distance 0.
        let d = rank_knn(&history, &[code("000"), code("011")], 1).unwrap();
        assert_eq!(d.chosen, code("000"));
    }

    #[test]
    fn knn_includes_equidistant_neighbours() {
        // Candidate "00" has two neighbours at distance 1 (values 4 and 0) so
        // its prediction is 2; candidate "22" has one neighbour at distance 0
        // with value 3.
        let history = vec![record("01", 4.0), record("10", 0.0), record("22", 3.0)];
        let d = rank_knn(&history, &[code("00"), code("22")], 1).unwrap();
        assert_eq!(d.chosen, code("22"));
    }

    #[test]
    fn knn_needs_history() {
        assert!(matches!(rank_knn(&[], &[code("1")], 5), Err(RankError::EmptyHistory)));
        let d = KnnRanker::default()
            .rank(&[], &[code("1")], &mut indexed(0, 0))
            .unwrap();
        assert_eq!(d.chosen, code("1"));
    }

    #[test]
    fn knn_beats_random_on_separable_landscape() {
        let space = SearchSpace::uniform("s", 6, 5).unwrap();
        let eval = SyntheticEvaluator::new(SyntheticLandscape::index(), &space, "v", Direction::Maximize, 0).unwrap();
        let (mut knn_total, mut rand_total) = (0.0, 0.0);
        for seed in 0..30 {
            let mut rng = indexed(seed, 0);
            let history: Vec<ArchRecord> = (0..500)
                .map(|_| {
                    let c = space.sample(&mut rng);
                    ArchRecord::new(c.clone(), eval.measure(&c).unwrap(), Provenance::Seed)
                })
                .collect();
            let pool: Vec<NCode> = (0..10).map(|_| space.sample(&mut rng)).collect();
            let k = rank_knn(&history, &pool, 5).unwrap().chosen;
            let r = rank_random(&pool, &mut rng).unwrap().chosen;
            knn_total += eval.measure(&k).unwrap().performance;
            rand_total += eval.measure(&r).unwrap().performance;
        }
        assert!(knn_total > rand_total, "{knn_total} vs {rand_total}");
    }

    #[test]
    fn spec_parses() {
        let spec: RankerSpec = serde_json::from_str(r#"{"kind":"knn"}"#).unwrap();
        assert_eq!(spec, RankerSpec::Knn { k: 5 });
        let spec: RankerSpec =
            serde_json::from_str(r#"{"kind":"llm","base_url":"http://localhost:8000/v1","model_name":"m"}"#).unwrap();
        let RankerSpec::Llm(cfg) = spec else { panic!() };
        assert_eq!(cfg.max_retries, 3);
        assert_eq!(cfg.temperature, 0.0);
        assert_eq!(cfg.api_key_env, DEFAULT_API_KEY_ENV);
    }

    proptest! {
        #[test]
        fn knn_choice_is_shift_invariant(
            values in prop::collection::vec(-50i32..50, 1..30),
            seed in 0u64..1000,
            shift in -100i32..100,
        ) {
            let space = SearchSpace::uniform("s", 4, 3).unwrap();
            let mut rng = indexed(seed, 0);
            let history: Vec<ArchRecord> = values.iter().map(|&v| {
                let c = space.sample(&mut rng);
                record(&c.to_string(), v as f64)
            }).collect();
            let shifted: Vec<ArchRecord> = history.iter().map(|r| {
                let mut r = r.clone();
                r.performance += shift as f64;
                r
            }).collect();
            let pool: Vec<NCode> = (0..8).map(|_| space.sample(&mut rng)).collect();
            let a = rank_knn(&history, &pool, 3).unwrap().chosen;
            let b = rank_knn(&shifted, &pool, 3).unwrap().chosen;
            prop_assert_eq!(a, b);
        }

        #[test]
        fn chosen_is_always_a_member(seed in 0u64..10_000, n in 1usize..12) {
            let space = SearchSpace::uniform("s", 3, 4).unwrap();
            let eval = SyntheticEvaluator::new(SyntheticLandscape::index(), &space, "v", Direction::Maximize, 0).unwrap();
            let mut rng = indexed(seed, 0);
            let pool: Vec<NCode> = (0..n).map(|_| space.sample(&mut rng)).collect();
            let history = vec![record(&space.sample(&mut rng).to_string(), 1.0)];
            prop_assert!(pool.contains(&rank_random(&pool, &mut rng).unwrap().chosen));
            prop_assert!(pool.contains(&rank_oracle(&pool, &eval).unwrap().chosen));
            prop_assert!(pool.contains(&rank_knn(&history, &pool, 5).unwrap().chosen));
        }
    }
}
