//! Soft chart-type matching.
//!
//! A [`KernelTable`] stores a symmetric similarity between chart types: the
//! diagonal is fixed at 1, designated similar pairs carry a value in (0, 1],
//! and every other pair is 0. [`chart_type_similarity`] matches each queried
//! type to its best counterpart in a record and averages over the query.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::model::ChartType;

const DEFAULT_KERNEL_CSV: &str = include_str!("../data/kernel_default.csv");

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("line {line}: unknown chart type `{name}`")]
    UnknownTypeName { line: usize, name: String },
    #[error("line {line}: value {value} outside (0, 1]")]
    ValueOutOfRange { line: usize, value: f64 },
    #[error("line {line}: diagonal entry for `{chart}` (fixed at 1)")]
    DiagonalEntry { line: usize, chart: ChartType },
    #[error("line {line}: pair ({a}, {b}) already set to {previous}, got {value}")]
    ConflictingDuplicate { line: usize, a: ChartType, b: ChartType, previous: f64, value: f64 },
    #[error("line {line}: expected `TypeA,TypeB,value`")]
    Malformed { line: usize },
    #[error("query chart-type set is empty")]
    EmptyQueryTypes,
    #[error("record chart-type set is empty")]
    EmptyRecordTypes,
    #[error("reading kernel table: {0}")]
    Io(#[from] std::io::Error),
}

/// Symmetric chart-type kernel with unit diagonal.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KernelTable {
    entries: BTreeMap<(ChartType, ChartType), f64>,
}

fn pair_key(a: ChartType, b: ChartType) -> (ChartType, ChartType) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

impl KernelTable {
    /// Exact matches only.
    pub fn identity() -> Self {
        Self::default()
    }

    /// The shipped default pairs.
    pub fn default_table() -> Self {
        Self::parse_csv(DEFAULT_KERNEL_CSV).expect("bundled kernel table is valid")
    }

    pub fn value(&self, a: ChartType, b: ChartType) -> f64 {
        if a == b {
            1.0
        } else {
            self.entries.get(&pair_key(a, b)).copied().unwrap_or(0.0)
        }
    }

    /// Off-diagonal pairs with non-zero similarity.
    pub fn pairs(&self) -> impl Iterator<Item = (ChartType, ChartType, f64)> + '_ {
        self.entries.iter().map(|(&(a, b), &v)| (a, b, v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn parse_csv(text: &str) -> Result<Self, KernelError> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
            let [a, b, v] = fields.as_slice() else {
                return Err(KernelError::Malformed { line });
            };
            let parse_type = |name: &str| {
                name.parse::<ChartType>().map_err(|_| KernelError::UnknownTypeName { line, name: name.to_string() })
            };
            let (a, b) = (parse_type(a)?, parse_type(b)?);
            let value: f64 = v.parse().map_err(|_| KernelError::Malformed { line })?;
            if !(value > 0.0 && value <= 1.0) {
                return Err(KernelError::ValueOutOfRange { line, value });
            }
            if a == b {
                return Err(KernelError::DiagonalEntry { line, chart: a });
            }
            let key = pair_key(a, b);
            match entries.get(&key) {
                Some(&previous) if previous != value => {
                    return Err(KernelError::ConflictingDuplicate { line, a: key.0, b: key.1, previous, value });
                }
                _ => {
                    entries.insert(key, value);
                }
            }
        }
        Ok(KernelTable { entries })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (a, b, v) in self.pairs() {
            let _ = writeln!(out, "{a},{b},{v}");
        }
        out
    }
}

pub fn load_kernel_table(path: impl AsRef<Path>) -> Result<KernelTable, KernelError> {
    let text = std::fs::read_to_string(path)?;
    KernelTable::parse_csv(&text)
}

/// Mean over queried types of the best kernel match among the record's types.
pub fn chart_type_similarity(
    query_types: &BTreeSet<ChartType>,
    record_types: &BTreeSet<ChartType>,
    kernel: &KernelTable,
) -> Result<f64, KernelError> {
    if query_types.is_empty() {
        return Err(KernelError::EmptyQueryTypes);
    }
    if record_types.is_empty() {
        return Err(KernelError::EmptyRecordTypes);
    }
    let total: f64 =
        query_types.iter().map(|&t| record_types.iter().map(|&u| kernel.value(t, u)).fold(0.0, f64::max)).sum();
    Ok(total / query_types.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ChartType::*;

    fn set(types: &[ChartType]) -> BTreeSet<ChartType> {
        types.iter().copied().collect()
    }

    #[test]
    fn golden_values() {
        let k = KernelTable::default_table();
        assert_eq!(chart_type_similarity(&set(&[BarChart]), &set(&[BarChart, PieChart]), &k).unwrap(), 1.0);
        assert_eq!(chart_type_similarity(&set(&[BarChart, PieChart]), &set(&[PieChart]), &k).unwrap(), 0.5);
        assert_eq!(chart_type_similarity(&set(&[AreaChart]), &set(&[LineChart]), &k).unwrap(), 0.6);
    }

    #[test]
    fn default_table_contents() {
        let k = KernelTable::default_table();
        assert_eq!(k.len(), 5);
        assert_eq!(k.value(LineChart, AreaChart), 0.6);
        assert_eq!(k.value(GaugeChart, PieChart), 0.5);
        assert_eq!(k.value(Histogram, BarChart), 0.7);
        assert_eq!(k.value(PyramidChart, BarChart), 0.4);
        assert_eq!(k.value(Diagram, Treemap), 0.3);
        assert_eq!(k.value(BarChart, PieChart), 0.0);
        assert_eq!(k.value(Scatterplot, Scatterplot), 1.0);
    }

    #[test]
    fn parse_single_pair() {
        let k = KernelTable::parse_csv("Area Chart,Line Chart,0.6\n").unwrap();
        assert_eq!(k.pairs().collect::<Vec<_>>(), vec![(LineChart, AreaChart, 0.6)]);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(
            KernelTable::parse_csv("Bar Chart,Bar Chart,0.9"),
            Err(KernelError::DiagonalEntry { chart: BarChart, .. })
        ));
        assert!(matches!(KernelTable::parse_csv("Bar Chart,Donut,0.9"), Err(KernelError::UnknownTypeName { .. })));
        assert!(matches!(KernelTable::parse_csv("Bar Chart,Histogram,0"), Err(KernelError::ValueOutOfRange { .. })));
        assert!(matches!(KernelTable::parse_csv("Bar Chart,Histogram,1.5"), Err(KernelError::ValueOutOfRange { .. })));
        assert!(matches!(
            KernelTable::parse_csv("Bar Chart,Histogram,0.5\nHistogram,Bar Chart,0.6"),
            Err(KernelError::ConflictingDuplicate { line: 2, .. })
        ));
        assert!(matches!(KernelTable::parse_csv("Bar Chart;Histogram;0.5"), Err(KernelError::Malformed { line: 1 })));
    }

    #[test]
    fn symmetric_duplicate_with_same_value_is_merged() {
        let k = KernelTable::parse_csv("Bar Chart,Histogram,0.5\nHistogram,bar chart,0.5").unwrap();
        assert_eq!(k.len(), 1);
    }

    #[test]
    fn empty_file_is_identity_kernel() {
        let k = KernelTable::parse_csv("# nothing here\n\n").unwrap();
        assert!(k.is_empty());
        assert_eq!(chart_type_similarity(&set(&[AreaChart, BarChart]), &set(&[LineChart, BarChart]), &k).unwrap(), 0.5);
    }

    #[test]
    fn empty_sets_rejected() {
        let k = KernelTable::identity();
        assert!(matches!(chart_type_similarity(&set(&[]), &set(&[BarChart]), &k), Err(KernelError::EmptyQueryTypes)));
        assert!(matches!(chart_type_similarity(&set(&[BarChart]), &set(&[]), &k), Err(KernelError::EmptyRecordTypes)));
    }

    #[test]
    fn csv_round_trip() {
        let k = KernelTable::default_table();
        assert_eq!(KernelTable::parse_csv(&k.to_csv()).unwrap(), k);
    }
}
