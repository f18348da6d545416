//! Random pruning of a search space into smaller subspaces.
//!
//! Each dimension is dropped with probability `1 - dim_keep_prob`; a dropped
//! dimension is pinned to its null option (or a random option when the
//! dimension has none). Surviving dimensions then lose each option
//! independently with probability `1 - option_keep_prob`, and a dimension
//! that lost every option gets one random option back.

use num_bigint::BigUint;
use rand::seq::IndexedRandom;
use rand::Rng;
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::space::{NCode, SearchSpace};

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("{name} = {value} is not a probability")]
pub struct InvalidProbability {
    pub name: &'static str,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Deserialize, Serialize)]
pub struct PruneConfig {
    pub dim_keep_prob: f64,
    pub option_keep_prob: f64,
}

impl Default for PruneConfig {
    fn default() -> Self {
        Self {
            dim_keep_prob: 0.5,
            option_keep_prob: 0.5,
        }
    }
}

impl PruneConfig {
    pub fn validate(&self) -> Result<(), InvalidProbability> {
        for (name, value) in [
            ("dim_keep_prob", self.dim_keep_prob),
            ("option_keep_prob", self.option_keep_prob),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(InvalidProbability { name, value });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DimState {
    Fixed(u8),
    /// Non-empty, ascending.
    Retained(Vec<u8>),
}

impl DimState {
    fn choices(&self) -> &[u8] {
        match self {
            DimState::Fixed(d) => std::slice::from_ref(d),
            DimState::Retained(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subspace {
    parent: String,
    labels: Vec<String>,
    dims: Vec<DimState>,
}

impl Subspace {
    /// The whole parent space, nothing pruned.
    pub fn full(space: &SearchSpace) -> Self {
        Self {
            parent: space.name().to_string(),
            labels: space.dimensions().iter().map(|d| d.label.clone()).collect(),
            dims: space
                .dimensions()
                .iter()
                .map(|d| DimState::Retained((0..d.radix() as u8).collect()))
                .collect(),
        }
    }

    /// Builds a subspace from explicit states. Panics if the states do not
    /// fit the parent space.
    pub fn from_states(space: &SearchSpace, dims: Vec<DimState>) -> Self {
        assert_eq!(dims.len(), space.len(), "one state per dimension");
        for (state, dim) in dims.iter().zip(space.dimensions()) {
            let choices = state.choices();
            assert!(!choices.is_empty(), "retained set must be non-empty");
            assert!(
                choices.windows(2).all(|w| w[0] < w[1]),
                "retained set must be ascending"
            );
            assert!(
                choices.iter().all(|&c| (c as usize) < dim.radix()),
                "index out of range"
            );
        }
        Self {
            parent: space.name().to_string(),
            labels: space.dimensions().iter().map(|d| d.label.clone()).collect(),
            dims,
        }
    }

    pub fn parent(&self) -> &str {
        &self.parent
    }

    pub fn states(&self) -> &[DimState] {
        &self.dims
    }

    pub fn cardinality(&self) -> BigUint {
        self.dims
            .iter()
            .fold(BigUint::from(1u8), |acc, s| acc * BigUint::from(s.choices().len()))
    }

    pub fn cardinality_u64(&self) -> Option<u64> {
        self.dims
            .iter()
            .try_fold(1u64, |acc, s| acc.checked_mul(s.choices().len() as u64))
    }

    pub fn contains(&self, code: &NCode) -> bool {
        code.len() == self.dims.len()
            && code
                .digits()
                .iter()
                .zip(&self.dims)
                .all(|(d, s)| s.choices().contains(d))
    }

    /// Uniform draw over member codes.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> NCode {
        NCode::from_digits(
            self.dims
                .iter()
                .map(|s| match s {
                    DimState::Fixed(d) => *d,
                    DimState::Retained(v) => *v.choose(rng).expect("non-empty"),
                })
                .collect(),
        )
    }

    /// Every member code, lexicographic order.
    pub fn members(&self) -> impl Iterator<Item = NCode> + '_ {
        let mut cursor: Option<Vec<usize>> = Some(vec![0; self.dims.len()]);
        std::iter::from_fn(move || {
            let current = cursor.take()?;
            let code = NCode::from_digits(current.iter().zip(&self.dims).map(|(&i, s)| s.choices()[i]).collect());
            let mut next = current;
            for pos in (0..next.len()).rev() {
                if next[pos] + 1 < self.dims[pos].choices().len() {
                    next[pos] += 1;
                    cursor = Some(next);
                    break;
                }
                next[pos] = 0;
            }
            Some(code)
        })
    }
}

/// Serializes as `{dim_label: "fixed:i" | [i, j, ...]}` in dimension order.
impl Serialize for Subspace {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.dims.len()))?;
        for (label, state) in self.labels.iter().zip(&self.dims) {
            match state {
                DimState::Fixed(d) => map.serialize_entry(label, &format!("fixed:{d}"))?,
                DimState::Retained(v) => map.serialize_entry(label, v)?,
            }
        }
        map.end()
    }
}

pub fn prune_space<R: Rng + ?Sized>(
    space: &SearchSpace,
    cfg: &PruneConfig,
    rng: &mut R,
) -> Result<Subspace, InvalidProbability> {
    cfg.validate()?;
    let dims = space
        .dimensions()
        .iter()
        .map(|dim| {
            let radix = dim.radix() as u8;
            if !rng.random_bool(cfg.dim_keep_prob) {
                let pinned = match dim.null_option_index {
                    Some(null) => null as u8,
                    None => rng.random_range(0..radix),
                };
                return DimState::Fixed(pinned);
            }
            let mut kept: Vec<u8> = (0..radix).filter(|_| rng.random_bool(cfg.option_keep_prob)).collect();
            if kept.is_empty() {
                kept.push(rng.random_range(0..radix));
            }
            DimState::Retained(kept)
        })
        .collect();
    Ok(Subspace {
        parent: space.name().to_string(),
        labels: space.dimensions().iter().map(|d| d.label.clone()).collect(),
        dims,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::indexed;
    use crate::space::Dimension;

    fn fixed_space() -> SearchSpace {
        SearchSpace::uniform("s", 6, 5).unwrap()
    }

    #[test]
    fn keep_everything_returns_parent() {
        let space = SearchSpace::nas_bench_201();
        let cfg = PruneConfig {
            dim_keep_prob: 1.0,
            option_keep_prob: 1.0,
        };
        let sub = prune_space(&space, &cfg, &mut indexed(1, 0)).unwrap();
        assert_eq!(sub, Subspace::full(&space));
        assert_eq!(sub.cardinality(), BigUint::from(15625u32));
    }

    #[test]
    fn dropping_every_dimension_pins_null_options() {
        let space = SearchSpace::nas_bench_201();
        let cfg = PruneConfig {
            dim_keep_prob: 0.0,
            option_keep_prob: 0.5,
        };
        for seed in 0..20 {
            let sub = prune_space(&space, &cfg, &mut indexed(seed, 0)).unwrap();
            assert!(sub.states().iter().all(|s| *s == DimState::Fixed(0)));
            assert_eq!(sub.cardinality_u64(), Some(1));
        }
    }

    #[test]
    fn rejects_bad_probabilities() {
        let cfg = PruneConfig {
            dim_keep_prob: 1.5,
            option_keep_prob: 0.5,
        };
        assert!(prune_space(&fixed_space(), &cfg, &mut indexed(0, 0)).is_err());
    }

    #[test]
    fn pruning_is_deterministic() {
        let space = fixed_space();
        let a = prune_space(&space, &PruneConfig::default(), &mut indexed(42, 3)).unwrap();
        let b = prune_space(&space, &PruneConfig::default(), &mut indexed(42, 3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn subspace_cardinality_examples() {
        let space = fixed_space();
        let all_fixed = Subspace::from_states(&space, vec![DimState::Fixed(2); 6]);
        assert_eq!(all_fixed.cardinality_u64(), Some(1));
        let mut states = vec![DimState::Fixed(0); 6];
        states[1] = DimState::Retained(vec![0, 3]);
        states[4] = DimState::Retained(vec![1, 2, 4]);
        let sub = Subspace::from_states(&space, states);
        assert_eq!(sub.cardinality_u64(), Some(6));
        assert_eq!(sub.members().count(), 6);
    }

    #[test]
    fn all_fixed_samples_unique_member() {
        let space = fixed_space();
        let sub = Subspace::from_states(&space, [3, 1, 4, 1, 0, 2].iter().map(|&d| DimState::Fixed(d)).collect());
        let mut rng = indexed(5, 0);
        for _ in 0..100 {
            assert_eq!(sub.sample(&mut rng).to_string(), "314102");
        }
    }

    #[test]
    fn two_way_retained_dimension_is_balanced() {
        let space = fixed_space();
        let mut states = vec![DimState::Fixed(1); 6];
        states[2] = DimState::Retained(vec![0, 2]);
        let sub = Subspace::from_states(&space, states);
        let mut rng = indexed(11, 0);
        let draws = 10_000;
        let zeros = (0..draws).filter(|_| sub.sample(&mut rng).digits()[2] == 0).count();
        let freq = zeros as f64 / draws as f64;
        assert!((freq - 0.5).abs() <= 0.02, "{freq}");
    }

    #[test]
    fn full_subspace_samples_pass_chi_square() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let space = fixed_space();
        let sub = Subspace::full(&space);
        let mut rng = indexed(3, 0);
        let draws = 100_000;
        let mut counts = [[0u32; 5]; 6];
        for _ in 0..draws {
            for (pos, &d) in sub.sample(&mut rng).digits().iter().enumerate() {
                counts[pos][d as usize] += 1;
            }
        }
        let expected = draws as f64 / 5.0;
        let chi = ChiSquared::new(4.0).unwrap();
        for row in counts {
            let stat: f64 = row.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
            assert!(chi.sf(stat) > 0.01, "chi2 {stat}");
        }
    }

    #[test]
    fn samples_are_members_of_parent_and_subspace() {
        let space = SearchSpace::new(
            "mixed",
            vec![
                Dimension::new("a", ["x", "y", "z"]).with_null_option(0),
                Dimension::new("b", ["p"]),
                Dimension::new("c", (0..10).map(|i| i.to_string())),
            ],
        )
        .unwrap();
        for seed in 0..200 {
            let mut rng = indexed(seed, 0);
            let sub = prune_space(&space, &PruneConfig::default(), &mut rng).unwrap();
            assert!(sub.cardinality_u64().unwrap() >= 1);
            for _ in 0..20 {
                let code = sub.sample(&mut rng);
                assert!(space.validate(&code).is_ok());
                assert!(sub.contains(&code));
            }
        }
    }

    #[test]
    fn serializes_as_provenance_map() {
        let space = SearchSpace::uniform("s", 2, 3).unwrap();
        let sub = Subspace::from_states(&space, vec![DimState::Fixed(1), DimState::Retained(vec![0, 2])]);
        assert_eq!(serde_json::to_string(&sub).unwrap(), r#"{"d0":"fixed:1","d1":[0,2]}"#);
    }
}
