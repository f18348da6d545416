//! Search spaces and the positional digit codec.
//!
//! A [`SearchSpace`] is an ordered list of dimensions, each with an ordered
//! list of option labels. An architecture is one option per dimension and is
//! written as an [`NCode`]: digit `i` is the index of the chosen option in
//! dimension `i`, rendered as a contiguous decimal string.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_bigint::BigUint;
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize};

/// Each position is a single decimal digit.
pub const MAX_RADIX: usize = 10;

/// Dimension label to option label.
pub type Assignment = BTreeMap<String, String>;

#[derive(Debug, thiserror::Error)]
pub enum SpaceError {
    #[error("failed to read space file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed space document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("dimensions: a search space needs at least one dimension")]
    NoDimensions,
    #[error("{path}: dimension has no options")]
    NoOptions { path: String },
    #[error("{path}: {count} options exceeds the radix cap of {MAX_RADIX}")]
    TooManyOptions { path: String, count: usize },
    #[error("{path}: duplicate dimension label {label:?}")]
    DuplicateDimension { path: String, label: String },
    #[error("{path}: duplicate option label {label:?}")]
    DuplicateOption { path: String, label: String },
    #[error("{path}: null option index {index} out of range for {count} options")]
    NullOptionOutOfRange { path: String, index: usize, count: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodeError {
    #[error("dimension {dimension:?}: unknown option {label:?}")]
    UnknownOption { dimension: String, label: String },
    #[error("dimension {dimension:?}: missing from assignment")]
    MissingDimension { dimension: String },
    #[error("dimension {dimension:?}: not part of the search space")]
    ExtraDimension { dimension: String },
    #[error("code has {found} digits, space has {expected} dimensions")]
    LengthMismatch { expected: usize, found: usize },
    #[error("position {position}: {ch:?} is not a decimal digit")]
    NonDigit { position: usize, ch: char },
    #[error("position {position}: digit {digit} is outside radix {radix}")]
    DigitOutOfRadix { position: usize, digit: u8, radix: usize },
}

/// One configurable axis of a search space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Dimension {
    pub label: String,
    pub options: Vec<String>,
    /// Option that stands for "this part is absent" (e.g. a zeroize edge).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub null_option_index: Option<usize>,
}

impl Dimension {
    pub fn new<L, I, O>(label: L, options: I) -> Self
    where
        L: Into<String>,
        I: IntoIterator<Item = O>,
        O: Into<String>,
    {
        Self {
            label: label.into(),
            options: options.into_iter().map(Into::into).collect(),
            null_option_index: None,
        }
    }

    pub fn with_null_option(mut self, index: usize) -> Self {
        self.null_option_index = Some(index);
        self
    }

    pub fn radix(&self) -> usize {
        self.options.len()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.options.iter().position(|o| o == label)
    }
}

/// Validated, immutable search space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSpace")]
pub struct SearchSpace {
    name: String,
    dimensions: Vec<Dimension>,
}

#[derive(Deserialize)]
struct RawSpace {
    name: String,
    dimensions: Vec<RawDimension>,
}

#[derive(Deserialize)]
struct RawDimension {
    label: String,
    #[serde(deserialize_with = "option_labels")]
    options: Vec<String>,
    #[serde(default)]
    null_option_index: Option<usize>,
}

/// Option labels are opaque text; bare JSON numbers (`[4, 8, 16]`) are
/// accepted and kept in their textual form.
fn option_labels<'de, D>(deserializer: D) -> Result<Vec<String>, D::Error>
where
    D: Deserializer<'de>,
{
    let values = Vec::<serde_json::Value>::deserialize(deserializer)?;
    values
        .into_iter()
        .map(|v| match v {
            serde_json::Value::String(s) => Ok(s),
            serde_json::Value::Number(n) => Ok(n.to_string()),
            serde_json::Value::Bool(b) => Ok(b.to_string()),
            other => Err(serde::de::Error::custom(format!(
                "option labels must be strings or numbers, got {other}"
            ))),
        })
        .collect()
}

impl TryFrom<RawSpace> for SearchSpace {
    type Error = SpaceError;

    fn try_from(raw: RawSpace) -> Result<Self, Self::Error> {
        let dimensions = raw
            .dimensions
            .into_iter()
            .map(|d| Dimension {
                label: d.label,
                options: d.options,
                null_option_index: d.null_option_index,
            })
            .collect();
        SearchSpace::new(raw.name, dimensions)
    }
}

impl SearchSpace {
    /// Validates and builds a space. Reports the first violated invariant.
    pub fn new(name: impl Into<String>, dimensions: Vec<Dimension>) -> Result<Self, SpaceError> {
        if dimensions.is_empty() {
            return Err(SpaceError::NoDimensions);
        }
        for (i, dim) in dimensions.iter().enumerate() {
            let path = format!("dimensions[{i}]");
            if dimensions[..i].iter().any(|d| d.label == dim.label) {
                return Err(SpaceError::DuplicateDimension {
                    path: format!("{path}.label"),
                    label: dim.label.clone(),
                });
            }
            if dim.options.is_empty() {
                return Err(SpaceError::NoOptions {
                    path: format!("{path}.options"),
                });
            }
            if dim.options.len() > MAX_RADIX {
                return Err(SpaceError::TooManyOptions {
                    path: format!("{path}.options"),
                    count: dim.options.len(),
                });
            }
            for (j, opt) in dim.options.iter().enumerate() {
                if dim.options[..j].contains(opt) {
                    return Err(SpaceError::DuplicateOption {
                        path: format!("{path}.options[{j}]"),
                        label: opt.clone(),
                    });
                }
            }
            if let Some(index) = dim.null_option_index {
                if index >= dim.options.len() {
                    return Err(SpaceError::NullOptionOutOfRange {
                        path: format!("{path}.null_option_index"),
                        index,
                        count: dim.options.len(),
                    });
                }
            }
        }
        Ok(Self {
            name: name.into(),
            dimensions,
        })
    }

    pub fn from_json_str(text: &str) -> Result<Self, SpaceError> {
        let raw: RawSpace = serde_json::from_str(text)?;
        Self::try_from(raw)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SpaceError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| SpaceError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    /// The NAS-Bench-201 cell: six edges, five operations, zeroize as the
    /// null option.
    pub fn nas_bench_201() -> Self {
        let ops = ["none", "skip_connect", "nor_conv_1x1", "nor_conv_3x3", "avg_pool_3x3"];
        let edges = ["1<-0", "2<-0", "2<-1", "3<-0", "3<-1", "3<-2"];
        let dims = edges
            .iter()
            .map(|e| Dimension::new(format!("edge {e}"), ops).with_null_option(0))
            .collect();
        Self::new("nas-bench-201", dims).expect("static space is valid")
    }

    /// A space where every dimension has the same number of options, labelled
    /// `d0..` and `o0..`.
    pub fn uniform(name: impl Into<String>, dims: usize, radix: usize) -> Result<Self, SpaceError> {
        let dimensions = (0..dims)
            .map(|d| Dimension::new(format!("d{d}"), (0..radix).map(|o| format!("o{o}"))))
            .collect();
        Self::new(name, dimensions)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dimensions(&self) -> &[Dimension] {
        &self.dimensions
    }

    pub fn len(&self) -> usize {
        self.dimensions.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn radices(&self) -> Vec<usize> {
        self.dimensions.iter().map(Dimension::radix).collect()
    }

    /// Exact number of architectures in the space.
    pub fn cardinality(&self) -> BigUint {
        self.dimensions
            .iter()
            .fold(BigUint::from(1u8), |acc, d| acc * BigUint::from(d.radix()))
    }

    /// Cardinality if it fits in a `u64`.
    pub fn cardinality_u64(&self) -> Option<u64> {
        self.dimensions
            .iter()
            .try_fold(1u64, |acc, d| acc.checked_mul(d.radix() as u64))
    }

    pub fn encode(&self, assignment: &Assignment) -> Result<NCode, CodeError> {
        if let Some(extra) = assignment
            .keys()
            .find(|k| !self.dimensions.iter().any(|d| &d.label == *k))
        {
            return Err(CodeError::ExtraDimension {
                dimension: extra.clone(),
            });
        }
        let digits = self
            .dimensions
            .iter()
            .map(|dim| {
                let label = assignment.get(&dim.label).ok_or_else(|| CodeError::MissingDimension {
                    dimension: dim.label.clone(),
                })?;
                dim.index_of(label)
                    .map(|i| i as u8)
                    .ok_or_else(|| CodeError::UnknownOption {
                        dimension: dim.label.clone(),
                        label: label.clone(),
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(NCode(digits))
    }

    pub fn decode(&self, code: &NCode) -> Result<Assignment, CodeError> {
        self.validate(code)?;
        Ok(self
            .dimensions
            .iter()
            .zip(code.digits())
            .map(|(dim, &d)| (dim.label.clone(), dim.options[d as usize].clone()))
            .collect())
    }

    /// Checks length and per-position radix.
    pub fn validate(&self, code: &NCode) -> Result<(), CodeError> {
        if code.len() != self.len() {
            return Err(CodeError::LengthMismatch {
                expected: self.len(),
                found: code.len(),
            });
        }
        for (position, (&digit, dim)) in code.digits().iter().zip(&self.dimensions).enumerate() {
            if digit as usize >= dim.radix() {
                return Err(CodeError::DigitOutOfRadix {
                    position,
                    digit,
                    radix: dim.radix(),
                });
            }
        }
        Ok(())
    }

    /// Parses the canonical text form, validating against this space.
    pub fn parse_ncode(&self, text: &str) -> Result<NCode, CodeError> {
        let code: NCode = text.parse()?;
        self.validate(&code)?;
        Ok(code)
    }

    /// Uniform draw over all architectures.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> NCode {
        NCode(
            self.dimensions
                .iter()
                .map(|d| rng.random_range(0..d.radix()) as u8)
                .collect(),
        )
    }

    /// All codes in lexicographic order.
    pub fn codes(&self) -> Codes<'_> {
        Codes {
            radices: self.radices(),
            next: Some(vec![0; self.len()]),
            _space: std::marker::PhantomData,
        }
    }
}

/// Odometer over every code of a space, lexicographic order.
pub struct Codes<'a> {
    radices: Vec<usize>,
    next: Option<Vec<u8>>,
    _space: std::marker::PhantomData<&'a SearchSpace>,
}

impl Iterator for Codes<'_> {
    type Item = NCode;

    fn next(&mut self) -> Option<NCode> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        for pos in (0..succ.len()).rev() {
            if (succ[pos] as usize) + 1 < self.radices[pos] {
                succ[pos] += 1;
                self.next = Some(succ);
                break;
            }
            succ[pos] = 0;
        }
        Some(NCode(current))
    }
}

/// Architecture as one option index per dimension.
///
/// Validity is relative to a [`SearchSpace`]; construct through
/// [`SearchSpace::parse_ncode`] or [`SearchSpace::encode`] to get a checked
/// code. Ordering is lexicographic on the rendered text.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NCode(Vec<u8>);

impl NCode {
    /// Builds a code from raw digits. Digits must be `< 10`; radix checks
    /// happen against a space.
    pub fn from_digits(digits: Vec<u8>) -> Self {
        assert!(digits.iter().all(|&d| d < MAX_RADIX as u8), "digit >= 10");
        Self(digits)
    }

    pub fn digits(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of positions where the two codes differ.
    pub fn hamming(&self, other: &NCode) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count() + self.0.len().abs_diff(other.0.len())
    }

    pub(crate) fn digits_mut(&mut self) -> &mut [u8] {
        &mut self.0
    }
}

impl fmt::Display for NCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.0 {
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

/// Syntax only: every character must be a decimal digit.
impl FromStr for NCode {
    type Err = CodeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .enumerate()
            .map(|(position, ch)| {
                ch.to_digit(10)
                    .filter(|_| ch.is_ascii_digit())
                    .map(|d| d as u8)
                    .ok_or(CodeError::NonDigit { position, ch })
            })
            .collect::<Result<Vec<_>, _>>()
            .map(NCode)
    }
}

impl Serialize for NCode {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NCode {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assignment(pairs: &[(&str, &str)]) -> Assignment {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    fn nb201_cell() -> Assignment {
        let space = SearchSpace::nas_bench_201();
        let ops = [
            "nor_conv_3x3",
            "nor_conv_3x3",
            "nor_conv_3x3",
            "skip_connect",
            "nor_conv_1x1",
            "nor_conv_3x3",
        ];
        space
            .dimensions()
            .iter()
            .zip(ops)
            .map(|(d, o)| (d.label.clone(), o.to_string()))
            .collect()
    }

    #[test]
    fn encodes_nas_bench_201_cell() {
        let space = SearchSpace::nas_bench_201();
        let code = space.encode(&nb201_cell()).unwrap();
        assert_eq!(code.to_string(), "333123");
        assert_eq!(space.decode(&code).unwrap(), nb201_cell());
    }

    #[test]
    fn encodes_lora_rank_choice() {
        let space = SearchSpace::new("lora", vec![Dimension::new("rank", ["4", "8", "16"])]).unwrap();
        let code = space.encode(&assignment(&[("rank", "8")])).unwrap();
        assert_eq!(code.digits(), &[1]);
    }

    #[test]
    fn single_option_space_encodes_to_zero() {
        let space = SearchSpace::uniform("one", 1, 1).unwrap();
        let code = space.encode(&assignment(&[("d0", "o0")])).unwrap();
        assert_eq!(code.to_string(), "0");
    }

    #[test]
    fn encode_errors_name_the_dimension() {
        let space = SearchSpace::uniform("s", 2, 3).unwrap();
        assert_eq!(
            space.encode(&assignment(&[("d0", "o9"), ("d1", "o0")])),
            Err(CodeError::UnknownOption {
                dimension: "d0".into(),
                label: "o9".into()
            })
        );
        assert_eq!(
            space.encode(&assignment(&[("d0", "o1")])),
            Err(CodeError::MissingDimension { dimension: "d1".into() })
        );
        assert_eq!(
            space.encode(&assignment(&[("d0", "o1"), ("d1", "o1"), ("zz", "o1")])),
            Err(CodeError::ExtraDimension { dimension: "zz".into() })
        );
    }

    #[test]
    fn all_zero_code_decodes_to_first_options() {
        let space = SearchSpace::nas_bench_201();
        let decoded = space.decode(&space.parse_ncode("000000").unwrap()).unwrap();
        assert!(decoded.values().all(|v| v == "none"));
    }

    #[test]
    fn parse_ncode_accepts_table_code() {
        let space = SearchSpace::uniform("s8", 8, 7).unwrap();
        let code = space.parse_ncode("03255564").unwrap();
        assert_eq!(code.digits(), &[0, 3, 2, 5, 5, 5, 6, 4]);
    }

    #[test]
    fn parse_ncode_errors_are_distinct() {
        let space = SearchSpace::nas_bench_201();
        assert_eq!(
            space.parse_ncode("33312"),
            Err(CodeError::LengthMismatch { expected: 6, found: 5 })
        );
        assert_eq!(
            space.parse_ncode("933123"),
            Err(CodeError::DigitOutOfRadix {
                position: 0,
                digit: 9,
                radix: 5
            })
        );
        assert_eq!(
            space.parse_ncode("33a123"),
            Err(CodeError::NonDigit { position: 2, ch: 'a' })
        );
        // Non-ASCII digits are rejected too.
        assert!(matches!(
            space.parse_ncode("٣33123"),
            Err(CodeError::NonDigit { position: 0, .. })
        ));
    }

    #[test]
    fn cardinality_is_exact() {
        assert_eq!(SearchSpace::nas_bench_201().cardinality(), BigUint::from(15625u32));
        let big = SearchSpace::uniform("lora48", 48, 3).unwrap();
        assert_eq!(big.cardinality(), BigUint::from(3u8).pow(48));
        assert_eq!(big.cardinality_u64(), None);
        assert_eq!(
            SearchSpace::uniform("one", 1, 1).unwrap().cardinality(),
            BigUint::from(1u8)
        );
    }

    #[test]
    fn cardinality_matches_enumeration() {
        for radices in [vec![1], vec![2, 3], vec![5; 6], vec![10, 1, 7], vec![3, 3, 3]] {
            let dims = radices
                .iter()
                .enumerate()
                .map(|(i, &r)| Dimension::new(format!("d{i}"), (0..r).map(|o| o.to_string())))
                .collect();
            let space = SearchSpace::new("e", dims).unwrap();
            let counted = space.codes().count() as u64;
            assert_eq!(space.cardinality_u64(), Some(counted));
            assert_eq!(space.cardinality(), BigUint::from(counted));
        }
    }

    #[test]
    fn loader_reports_first_violation_with_path() {
        let err = SearchSpace::from_json_str(r#"{"name":"x","dimensions":[]}"#).unwrap_err();
        assert!(matches!(err, SpaceError::NoDimensions));

        let eleven: Vec<String> = (0..11).map(|i| format!("\"o{i}\"")).collect();
        let doc = format!(
            r#"{{"name":"x","dimensions":[{{"label":"a","options":["p"]}},{{"label":"b","options":[{}]}}]}}"#,
            eleven.join(",")
        );
        let err = SearchSpace::from_json_str(&doc).unwrap_err();
        assert!(
            err.to_string().starts_with("dimensions[1].options: 11 options"),
            "{err}"
        );

        let err =
            SearchSpace::from_json_str(r#"{"name":"x","dimensions":[{"label":"a","options":["p","p"]}]}"#).unwrap_err();
        assert!(matches!(err, SpaceError::DuplicateOption { ref path, .. } if path == "dimensions[0].options[1]"));

        let err = SearchSpace::from_json_str(
            r#"{"name":"x","dimensions":[{"label":"a","options":["p"]},{"label":"a","options":["q"]}]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, SpaceError::DuplicateDimension { .. }));

        let err = SearchSpace::from_json_str(
            r#"{"name":"x","dimensions":[{"label":"a","options":["p"],"null_option_index":1}]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, SpaceError::NullOptionOutOfRange { .. }));
    }

    #[test]
    fn loader_accepts_numeric_option_labels() {
        let space = SearchSpace::from_json_str(r#"{"name":"lora","dimensions":[{"label":"rank","options":[4,8,16]}]}"#)
            .unwrap();
        assert_eq!(space.dimensions()[0].options, ["4", "8", "16"]);
    }

    #[test]
    fn json_round_trip() {
        let space = SearchSpace::nas_bench_201();
        let text = serde_json::to_string(&space).unwrap();
        assert_eq!(SearchSpace::from_json_str(&text).unwrap(), space);
    }

    #[test]
    fn codes_iterate_in_lexicographic_order() {
        let space = SearchSpace::uniform("s", 2, 2).unwrap();
        let texts: Vec<String> = space.codes().map(|c| c.to_string()).collect();
        assert_eq!(texts, ["00", "01", "10", "11"]);
    }
}
