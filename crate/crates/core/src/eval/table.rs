//! Tabular benchmarks stored as CSV: a `ncode` key column followed by one
//! or more numeric metric columns.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::Arc;

use super::{EvalError, Evaluator};
use crate::record::{canonical_performance, Direction, Measurement};
use crate::space::{CodeError, NCode, SearchSpace};

#[derive(Debug, thiserror::Error)]
pub enum TableError {
    #[error("failed to read table {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed CSV: {message}")]
    Csv { line: u64, message: String },
    #[error("header must start with `ncode` and name at least one metric, got {0:?}")]
    BadHeader(String),
    #[error("line {line}: invalid code {text:?}: {source}")]
    InvalidCode {
        line: u64,
        text: String,
        #[source]
        source: CodeError,
    },
    #[error("code {code} appears on line {first} and line {second}")]
    Duplicate { code: String, first: u64, second: u64 },
    #[error("line {line}, column {column:?}: {value:?} is not a number")]
    NonNumeric { line: u64, column: String, value: String },
    #[error("table has no metric column {0:?}")]
    UnknownMetric(String),
}

/// Immutable code-to-metrics lookup, validated against one space.
#[derive(Debug, Clone)]
pub struct Table {
    metrics: Vec<String>,
    rows: HashMap<NCode, Vec<f64>>,
}

impl Table {
    pub fn load(path: impl AsRef<Path>, space: &SearchSpace) -> Result<Self, TableError> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| TableError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_reader(file, space)
    }

    pub fn from_reader<R: std::io::Read>(reader: R, space: &SearchSpace) -> Result<Self, TableError> {
        let mut csv = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header = csv
            .headers()
            .map_err(|e| TableError::Csv {
                line: 1,
                message: e.to_string(),
            })?
            .clone();
        let columns: Vec<&str> = header.iter().map(str::trim).collect();
        if columns.len() < 2 || columns[0] != "ncode" {
            return Err(TableError::BadHeader(columns.join(",")));
        }
        let metrics: Vec<String> = columns[1..].iter().map(|s| s.to_string()).collect();

        let mut rows = HashMap::new();
        let mut lines: HashMap<NCode, u64> = HashMap::new();
        for record in csv.records() {
            let record = record.map_err(|e| TableError::Csv {
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })?;
            let line = record.position().map_or(0, |p| p.line());
            let text = record.get(0).unwrap_or("").trim();
            let code = space.parse_ncode(text).map_err(|source| TableError::InvalidCode {
                line,
                text: text.to_string(),
                source,
            })?;
            let values = metrics
                .iter()
                .enumerate()
                .map(|(i, column)| {
                    let cell = record.get(i + 1).unwrap_or("").trim();
                    cell.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| TableError::NonNumeric {
                            line,
                            column: column.clone(),
                            value: cell.to_string(),
                        })
                })
                .collect::<Result<Vec<_>, _>>()?;
            if let Some(&first) = lines.get(&code) {
                return Err(TableError::Duplicate {
                    code: code.to_string(),
                    first,
                    second: line,
                });
            }
            lines.insert(code.clone(), line);
            rows.insert(code, values);
        }
        Ok(Self { metrics, rows })
    }

    pub fn metrics(&self) -> &[String] {
        &self.metrics
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, metric: &str) -> Result<usize, TableError> {
        self.metrics
            .iter()
            .position(|m| m == metric)
            .ok_or_else(|| TableError::UnknownMetric(metric.to_string()))
    }

    pub fn get(&self, code: &NCode) -> Option<&[f64]> {
        self.rows.get(code).map(Vec::as_slice)
    }

    /// Best row for `metric` under `direction`; smallest code among ties.
    pub fn best(&self, metric: &str, direction: Direction) -> Result<Option<(NCode, f64)>, TableError> {
        let col = self.column(metric)?;
        let mut best: Option<(&NCode, f64, f64)> = None;
        for (code, values) in &self.rows {
            let raw = values[col];
            let canon = canonical_performance(raw, direction).expect("finite at load");
            let replace = match best {
                None => true,
                Some((c, _, b)) => canon > b || (canon == b && code < c),
            };
            if replace {
                best = Some((code, raw, canon));
            }
        }
        Ok(best.map(|(c, raw, _)| (c.clone(), raw)))
    }
}

pub struct TableEvaluator {
    table: Arc<Table>,
    column: usize,
    metric: String,
    direction: Direction,
    /// Raw value used for codes absent from the table.
    fallback: Option<f64>,
}

impl TableEvaluator {
    pub fn new(table: Arc<Table>, metric: &str, direction: Direction, impute_worst: bool) -> Result<Self, TableError> {
        let column = table.column(metric)?;
        let fallback = if impute_worst {
            let values = table.rows.values().map(|v| v[column]);
            match direction {
                Direction::Maximize => values.reduce(f64::min),
                Direction::Minimize => values.reduce(f64::max),
            }
        } else {
            None
        };
        Ok(Self {
            table,
            column,
            metric: metric.to_string(),
            direction,
            fallback,
        })
    }
}

impl Evaluator for TableEvaluator {
    fn measure(&self, code: &NCode) -> Result<Measurement, EvalError> {
        match self.table.get(code) {
            Some(values) => {
                let metrics: BTreeMap<String, f64> =
                    self.table.metrics.iter().cloned().zip(values.iter().copied()).collect();
                Ok(Measurement::new(values[self.column], self.direction, metrics)?)
            }
            None => match self.fallback {
                Some(raw) => Ok(Measurement::new(
                    raw,
                    self.direction,
                    BTreeMap::from([(self.metric.clone(), raw)]),
                )?),
                None => Err(EvalError::MissingCode(code.clone())),
            },
        }
    }

    fn direction(&self) -> Direction {
        self.direction
    }

    fn metric_name(&self) -> &str {
        &self.metric
    }

    fn is_deterministic(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nb201() -> SearchSpace {
        SearchSpace::nas_bench_201()
    }

    fn load(text: &str) -> Result<Table, TableError> {
        Table::from_reader(text.as_bytes(), &nb201())
    }

    #[test]
    fn looks_up_table_row() {
        let table = Arc::new(load("ncode,accuracy,params\n333123,91.45,1.2\n000000,10.0,0.1\n").unwrap());
        let eval = TableEvaluator::new(table, "accuracy", Direction::Maximize, false).unwrap();
        let m = eval.measure(&nb201().parse_ncode("333123").unwrap()).unwrap();
        assert_eq!(m.performance, 91.45);
        assert_eq!(m.raw_metrics["params"], 1.2);
        assert!(matches!(
            eval.measure(&nb201().parse_ncode("111111").unwrap()),
            Err(EvalError::MissingCode(_))
        ));
    }

    #[test]
    fn imputes_worst_value_when_asked() {
        let table = Arc::new(load("ncode,err\n333123,3.1\n000000,9.5\n").unwrap());
        let eval = TableEvaluator::new(table, "err", Direction::Minimize, true).unwrap();
        let m = eval.measure(&nb201().parse_ncode("111111").unwrap()).unwrap();
        assert_eq!(m.raw, 9.5);
        assert_eq!(m.performance, -9.5);
    }

    #[test]
    fn duplicate_codes_cite_both_lines() {
        let mut text = String::from("ncode,acc\n");
        for code in ["000001", "000002", "000003", "000004", "000010"] {
            text.push_str(&format!("{code},1.0\n"));
        }
        // lines 7, 8, 9
        text.push_str("000011,2.0\n000012,2.0\n000011,3.0\n");
        let err = load(&text).unwrap_err();
        assert!(
            matches!(
                err,
                TableError::Duplicate {
                    first: 7,
                    second: 9,
                    ..
                }
            ),
            "{err}"
        );
        assert!(err.to_string().contains("line 7 and line 9"));
    }

    #[test]
    fn invalid_and_non_numeric_rows_report_lines() {
        let err = load("ncode,acc\n000000,1\n933123,2\n").unwrap_err();
        assert!(matches!(err, TableError::InvalidCode { line: 3, .. }), "{err}");
        let err = load("ncode,acc\n000000,abc\n").unwrap_err();
        assert!(matches!(err, TableError::NonNumeric { line: 2, .. }), "{err}");
        assert!(matches!(load("code,acc\n"), Err(TableError::BadHeader(_))));
        assert!(matches!(load("ncode\n"), Err(TableError::BadHeader(_))));
    }

    #[test]
    fn best_row_by_direction() {
        let table = load("ncode,acc\n000000,94.37\n111111,93.0\n222222,94.37\n").unwrap();
        let (code, raw) = table.best("acc", Direction::Maximize).unwrap().unwrap();
        assert_eq!((code.to_string(), raw), ("000000".into(), 94.37));
        let (code, _) = table.best("acc", Direction::Minimize).unwrap().unwrap();
        assert_eq!(code.to_string(), "111111");
        assert!(table.best("nope", Direction::Maximize).is_err());
    }
}
