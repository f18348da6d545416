use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::space::NCode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("performance value {0} is not finite")]
pub struct NonFinite(pub f64);

/// Maps a raw metric onto the internal higher-is-better scale.
pub fn canonical_performance(raw: f64, direction: Direction) -> Result<f64, NonFinite> {
    if !raw.is_finite() {
        return Err(NonFinite(raw));
    }
    Ok(match direction {
        Direction::Maximize => raw,
        // Avoid producing -0.0 so rendered values stay stable.
        Direction::Minimize if raw == 0.0 => 0.0,
        Direction::Minimize => -raw,
    })
}

/// Where an evaluated architecture came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Seed,
    Random,
    Evolved,
    External,
}

/// Raw outcome of evaluating one architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    /// Canonical (higher-is-better) value of the primary metric.
    pub performance: f64,
    /// Primary metric as reported.
    pub raw: f64,
    pub raw_metrics: BTreeMap<String, f64>,
}

impl Measurement {
    pub fn new(raw: f64, direction: Direction, raw_metrics: BTreeMap<String, f64>) -> Result<Self, NonFinite> {
        Ok(Self {
            performance: canonical_performance(raw, direction)?,
            raw,
            raw_metrics,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchRecord {
    pub ncode: NCode,
    pub performance: f64,
    pub raw: f64,
    pub raw_metrics: BTreeMap<String, f64>,
    pub provenance: Provenance,
}

impl ArchRecord {
    pub fn new(ncode: NCode, measurement: Measurement, provenance: Provenance) -> Self {
        Self {
            ncode,
            performance: measurement.performance,
            raw: measurement.raw,
            raw_metrics: measurement.raw_metrics,
            provenance,
        }
    }
}

/// Argmax by canonical performance; among equals the smallest code wins.
pub(crate) fn better(a: (&NCode, f64), b: (&NCode, f64)) -> bool {
    a.1 > b.1 || (a.1 == b.1 && a.0 < b.0)
}

/// Index of the best entry under [`better`].
pub(crate) fn argmax_by<T>(items: &[T], key: impl Fn(&T) -> (&NCode, f64)) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, item) in items.iter().enumerate() {
        match best {
            Some(b) if !better(key(item), key(&items[b])) => {}
            _ => best = Some(i),
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn canonical_values() {
        assert_eq!(canonical_performance(94.28, Direction::Maximize), Ok(94.28));
        assert_eq!(canonical_performance(3.10, Direction::Minimize), Ok(-3.10));
        assert_eq!(canonical_performance(0.0, Direction::Maximize), Ok(0.0));
        let z = canonical_performance(0.0, Direction::Minimize).unwrap();
        assert_eq!(z, 0.0);
        assert!(z.is_sign_positive());
        assert!(canonical_performance(f64::NAN, Direction::Maximize).is_err());
        assert!(canonical_performance(f64::INFINITY, Direction::Minimize).is_err());
    }

    #[test]
    fn tie_break_prefers_smaller_code() {
        let a = NCode::from_digits(vec![1, 0]);
        let b = NCode::from_digits(vec![0, 9]);
        let items = [(a.clone(), 1.0), (b.clone(), 1.0)];
        assert_eq!(argmax_by(&items, |(c, v)| (c, *v)), Some(1));
        assert_eq!(argmax_by::<(NCode, f64)>(&[], |(c, v)| (c, *v)), None);
    }

    proptest! {
        #[test]
        fn canonical_preserves_argmax(values in prop::collection::vec(-1e6f64..1e6, 1..40), minimize in any::<bool>()) {
            let direction = if minimize { Direction::Minimize } else { Direction::Maximize };
            let canon: Vec<f64> = values.iter().map(|&v| canonical_performance(v, direction).unwrap()).collect();
            let best_canon = canon.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let best_raw = if minimize {
                values.iter().cloned().fold(f64::INFINITY, f64::min)
            } else {
                values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            };
            let i = canon.iter().position(|&c| c == best_canon).unwrap();
            prop_assert_eq!(values[i], best_raw);
        }
    }
}
