use std::collections::BTreeMap;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{EvalError, Evaluator};
use crate::record::{Direction, Measurement};
use crate::rng::indexed;
use crate::space::{NCode, SearchSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UtilityPreset {
    /// Utility of an option equals its index.
    Index,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Utilities {
    Preset(UtilityPreset),
    /// One row per dimension, one entry per option.
    Explicit(Vec<Vec<f64>>),
}

/// Bonus added when both `(dimension, option)` pairs are selected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub first: (usize, usize),
    pub second: (usize, usize),
    pub value: f64,
}

/// Additive landscape with optional pairwise terms and Gaussian noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticLandscape {
    pub utilities: Utilities,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub interactions: Vec<Interaction>,
    #[serde(default)]
    pub noise_sd: f64,
    #[serde(default)]
    pub noise_seed: u64,
}

impl SyntheticLandscape {
    pub fn index() -> Self {
        Self {
            utilities: Utilities::Preset(UtilityPreset::Index),
            interactions: Vec::new(),
            noise_sd: 0.0,
            noise_seed: 0,
        }
    }

    pub fn explicit(utilities: Vec<Vec<f64>>) -> Self {
        Self {
            utilities: Utilities::Explicit(utilities),
            ..Self::index()
        }
    }

    pub fn with_noise(mut self, sd: f64) -> Self {
        self.noise_sd = sd;
        self
    }

    pub fn with_interactions(mut self, interactions: Vec<Interaction>) -> Self {
        self.interactions = interactions;
        self
    }
}

/// A landscape bound to a space.
///
/// Noise is a fixed function of `(noise_seed, run_seed, code)`: measuring the
/// same code twice yields the same value, and different run seeds see
/// independent noise realizations.
#[derive(Debug, Clone)]
pub struct SyntheticEvaluator {
    utilities: Vec<Vec<f64>>,
    interactions: Vec<Interaction>,
    noise: Option<Normal<f64>>,
    noise_key: u64,
    metric: String,
    direction: Direction,
}

impl SyntheticEvaluator {
    pub fn new(
        landscape: SyntheticLandscape,
        space: &SearchSpace,
        metric: &str,
        direction: Direction,
        run_seed: u64,
    ) -> Result<Self, EvalError> {
        let utilities = match landscape.utilities {
            Utilities::Preset(UtilityPreset::Index) => space
                .radices()
                .iter()
                .map(|&r| (0..r).map(|o| o as f64).collect())
                .collect(),
            Utilities::Preset(UtilityPreset::Zero) => space.radices().iter().map(|&r| vec![0.0; r]).collect(),
            Utilities::Explicit(rows) => rows,
        };
        let radices = space.radices();
        if utilities.len() != radices.len() {
            return Err(EvalError::Landscape(format!(
                "{} utility rows for {} dimensions",
                utilities.len(),
                radices.len()
            )));
        }
        for (d, (row, &r)) in utilities.iter().zip(&radices).enumerate() {
            if row.len() != r {
                return Err(EvalError::Landscape(format!(
                    "utilities[{d}] has {} entries for {r} options",
                    row.len()
                )));
            }
            if row.iter().any(|u| !u.is_finite()) {
                return Err(EvalError::Landscape(format!("utilities[{d}] is not finite")));
            }
        }
        for (i, term) in landscape.interactions.iter().enumerate() {
            let ok = |(d, o): (usize, usize)| d < radices.len() && o < radices[d];
            if !ok(term.first) || !ok(term.second) || !term.value.is_finite() {
                return Err(EvalError::Landscape(format!("interactions[{i}] is out of range")));
            }
        }
        let noise = if landscape.noise_sd > 0.0 {
            Some(Normal::new(0.0, landscape.noise_sd).map_err(|e| EvalError::Landscape(e.to_string()))?)
        } else if landscape.noise_sd == 0.0 {
            None
        } else {
            return Err(EvalError::Landscape("noise_sd must be >= 0".into()));
        };
        Ok(Self {
            utilities,
            interactions: landscape.interactions,
            noise,
            noise_key: landscape.noise_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ run_seed,
            metric: metric.to_string(),
            direction,
        })
    }

    fn noiseless(&self, code: &NCode) -> f64 {
        let digits = code.digits();
        let base: f64 = digits
            .iter()
            .zip(&self.utilities)
            .map(|(&d, row)| row[d as usize])
            .sum();
        let bonus: f64 = self
            .interactions
            .iter()
            .filter(|t| digits[t.first.0] as usize == t.first.1 && digits[t.second.0] as usize == t.second.1)
            .map(|t| t.value)
            .sum();
        base + bonus
    }
}

fn code_key(code: &NCode) -> u64 {
    code.digits()
        .iter()
        .fold(0u64, |h, &d| h.wrapping_mul(11).wrapping_add(d as u64 + 1))
}

impl Evaluator for SyntheticEvaluator {
    fn measure(&self, code: &NCode) -> Result<Measurement, EvalError> {
        if code.len() != self.utilities.len()
            || code
                .digits()
                .iter()
                .zip(&self.utilities)
                .any(|(&d, row)| d as usize >= row.len())
        {
            return Err(EvalError::Landscape(format!("code {code} does not fit the landscape")));
        }
        let mut value = self.noiseless(code);
        if let Some(noise) = &self.noise {
            value += noise.sample(&mut indexed(self.noise_key, code_key(code)));
        }
        let metrics = BTreeMap::from([(self.metric.clone(), value)]);
        Ok(Measurement::new(value, self.direction, metrics)?)
    }

    fn direction(&self) -> Direction {
        self.direction
    }

    fn metric_name(&self) -> &str {
        &self.metric
    }

    fn is_deterministic(&self) -> bool {
        self.noise.is_none()
    }
}
