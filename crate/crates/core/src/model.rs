//! Shared domain types: the five-facet intent taxonomy, chart-type pool,
//! intent specifications, embeddings, corpus records and ranked results.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Index, IndexMut};
use std::str::FromStr;

use serde::de::{self, Deserializer, MapAccess, Visitor};
use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default embedding width when a corpus does not configure one.
pub const DEFAULT_DIMENSION: usize = 512;

/// Tolerance on the ℓ2 norm of a vector that claims to be unit length.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

/// Norms below this are treated as zero by [`normalize`].
pub const ZERO_NORM_EPS: f64 = 1e-12;

/// One of the five intent facets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FacetId {
    Content,
    ChartType,
    Layout,
    Illustration,
    Style,
}

impl FacetId {
    pub const ALL: [FacetId; 5] =
        [FacetId::Content, FacetId::ChartType, FacetId::Layout, FacetId::Illustration, FacetId::Style];

    /// The open-vocabulary facets scored through embeddings.
    pub const EMBEDDING: [FacetId; 4] = [FacetId::Content, FacetId::Layout, FacetId::Illustration, FacetId::Style];

    pub fn name(self) -> &'static str {
        match self {
            FacetId::Content => "content",
            FacetId::ChartType => "chart_type",
            FacetId::Layout => "layout",
            FacetId::Illustration => "illustration",
            FacetId::Style => "style",
        }
    }

    pub fn is_embedding(self) -> bool {
        self.embedding_slot().is_some()
    }

    /// Position inside [`FacetId::EMBEDDING`], `None` for the chart-type facet.
    pub fn embedding_slot(self) -> Option<usize> {
        match self {
            FacetId::Content => Some(0),
            FacetId::Layout => Some(1),
            FacetId::Illustration => Some(2),
            FacetId::Style => Some(3),
            FacetId::ChartType => None,
        }
    }
}

impl fmt::Display for FacetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown facet name `{0}`")]
pub struct UnknownFacet(pub String);

impl FromStr for FacetId {
    type Err = UnknownFacet;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String =
            s.trim().chars().filter(|c| !matches!(c, ' ' | '_' | '-')).flat_map(char::to_lowercase).collect();
        match key.as_str() {
            "content" => Ok(FacetId::Content),
            "charttype" => Ok(FacetId::ChartType),
            "layout" => Ok(FacetId::Layout),
            "illustration" => Ok(FacetId::Illustration),
            "style" => Ok(FacetId::Style),
            _ => Err(UnknownFacet(s.to_string())),
        }
    }
}

/// The closed pool of 13 coarse chart types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ChartType {
    BarChart,
    LineChart,
    AreaChart,
    RadarChart,
    PieChart,
    Scatterplot,
    GaugeChart,
    Treemap,
    Diagram,
    Histogram,
    RangeChart,
    FunnelChart,
    PyramidChart,
}

impl ChartType {
    pub const ALL: [ChartType; 13] = [
        ChartType::BarChart,
        ChartType::LineChart,
        ChartType::AreaChart,
        ChartType::RadarChart,
        ChartType::PieChart,
        ChartType::Scatterplot,
        ChartType::GaugeChart,
        ChartType::Treemap,
        ChartType::Diagram,
        ChartType::Histogram,
        ChartType::RangeChart,
        ChartType::FunnelChart,
        ChartType::PyramidChart,
    ];

    /// Canonical display name, e.g. `"Bar Chart"`.
    pub fn name(self) -> &'static str {
        match self {
            ChartType::BarChart => "Bar Chart",
            ChartType::LineChart => "Line Chart",
            ChartType::AreaChart => "Area Chart",
            ChartType::RadarChart => "Radar Chart",
            ChartType::PieChart => "Pie Chart",
            ChartType::Scatterplot => "Scatterplot",
            ChartType::GaugeChart => "Gauge Chart",
            ChartType::Treemap => "Treemap",
            ChartType::Diagram => "Diagram",
            ChartType::Histogram => "Histogram",
            ChartType::RangeChart => "Range Chart",
            ChartType::FunnelChart => "Funnel Chart",
            ChartType::PyramidChart => "Pyramid Chart",
        }
    }
}

impl fmt::Display for ChartType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown chart type `{0}`")]
pub struct UnknownChartType(pub String);

impl FromStr for ChartType {
    type Err = UnknownChartType;

    /// Case-insensitive; internal whitespace runs are collapsed.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let wanted = s.split_whitespace().collect::<Vec<_>>().join(" ");
        ChartType::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(&wanted))
            .ok_or_else(|| UnknownChartType(s.to_string()))
    }
}

impl Serialize for ChartType {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for ChartType {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(de::Error::custom)
    }
}

/// Per-facet rewrites for the four embedding facets. `None` means the facet
/// was not specified by the query.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FacetRewrites {
    pub content: Option<String>,
    pub layout: Option<String>,
    pub illustration: Option<String>,
    pub style: Option<String>,
}

impl FacetRewrites {
    pub fn get(&self, facet: FacetId) -> Option<&str> {
        match facet {
            FacetId::Content => self.content.as_deref(),
            FacetId::Layout => self.layout.as_deref(),
            FacetId::Illustration => self.illustration.as_deref(),
            FacetId::Style => self.style.as_deref(),
            FacetId::ChartType => None,
        }
    }

    /// Sets a rewrite. Ignored for the chart-type facet, which has no text.
    pub fn set(&mut self, facet: FacetId, text: Option<String>) {
        match facet {
            FacetId::Content => self.content = text,
            FacetId::Layout => self.layout = text,
            FacetId::Illustration => self.illustration = text,
            FacetId::Style => self.style = text,
            FacetId::ChartType => {}
        }
    }

    /// A rewrite is present when it holds non-blank text.
    pub fn is_present(&self, facet: FacetId) -> bool {
        self.get(facet).is_some_and(|t| !t.trim().is_empty())
    }
}

/// Non-negative facet weights. All five keys are always serialized.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FacetWeights {
    pub content: f64,
    pub chart_type: f64,
    pub layout: f64,
    pub illustration: f64,
    pub style: f64,
}

impl FacetWeights {
    pub fn get(&self, facet: FacetId) -> f64 {
        match facet {
            FacetId::Content => self.content,
            FacetId::ChartType => self.chart_type,
            FacetId::Layout => self.layout,
            FacetId::Illustration => self.illustration,
            FacetId::Style => self.style,
        }
    }

    pub fn set(&mut self, facet: FacetId, value: f64) {
        match facet {
            FacetId::Content => self.content = value,
            FacetId::ChartType => self.chart_type = value,
            FacetId::Layout => self.layout = value,
            FacetId::Illustration => self.illustration = value,
            FacetId::Style => self.style = value,
        }
    }

    pub fn scaled(&self, factor: f64) -> FacetWeights {
        let mut out = *self;
        for f in FacetId::ALL {
            out.set(f, self.get(f) * factor);
        }
        out
    }
}

/// A parsed query: facet rewrites, requested chart types and facet weights.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IntentSpec {
    pub rewrites: FacetRewrites,
    pub chart_types: BTreeSet<ChartType>,
    pub weights: FacetWeights,
}

impl IntentSpec {
    /// Whether a facet carries query information (a rewrite, or a non-empty
    /// chart-type set for the chart-type facet).
    pub fn is_present(&self, facet: FacetId) -> bool {
        match facet {
            FacetId::ChartType => !self.chart_types.is_empty(),
            other => self.rewrites.is_present(other),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("intent spec serializes")
    }

    pub fn from_json(text: &str) -> Result<IntentSpec, SpecError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| SpecError::Malformed(e.to_string()))?;
        IntentSpec::from_value(&value)
    }

    /// Decodes the canonical JSON shape, reporting unknown chart types with
    /// their own error rather than a generic schema failure.
    pub fn from_value(value: &serde_json::Value) -> Result<IntentSpec, SpecError> {
        if let Some(types) = value.get("chart_types").and_then(|v| v.as_array()) {
            for t in types {
                if let Some(name) = t.as_str() {
                    name.parse::<ChartType>().map_err(|e| SpecError::UnknownChartType(e.0))?;
                }
            }
        }
        serde_json::from_value(value.clone()).map_err(|e| SpecError::Malformed(e.to_string()))
    }
}

/// Strict validation rejects positive weights on absent facets; coercing
/// validation zeroes them and reports a note.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightPolicy {
    Strict,
    #[default]
    Coerce,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecError {
    #[error("weight for facet `{facet}` is negative ({value})")]
    NegativeWeight { facet: FacetId, value: f64 },
    #[error("weight for facet `{facet}` is not finite")]
    NonFiniteWeight { facet: FacetId },
    #[error("facet `{facet}` has weight {value} but no rewrite")]
    WeightOnAbsentFacet { facet: FacetId, value: f64 },
    #[error("unknown chart type `{0}`")]
    UnknownChartType(String),
    #[error("all facet weights are zero")]
    AllWeightsZero,
    #[error("malformed intent spec: {0}")]
    Malformed(String),
}

impl SpecError {
    /// Short stable code used in parse traces.
    pub fn code(&self) -> &'static str {
        match self {
            SpecError::NegativeWeight { .. } => "negative_weight",
            SpecError::NonFiniteWeight { .. } => "non_finite_weight",
            SpecError::WeightOnAbsentFacet { .. } => "weight_on_absent_facet",
            SpecError::UnknownChartType(_) => "unknown_chart_type",
            SpecError::AllWeightsZero => "all_weights_zero",
            SpecError::Malformed(_) => "schema_mismatch",
        }
    }
}

/// A spec that passed validation, plus any coercions applied on the way.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedSpec {
    pub spec: IntentSpec,
    pub notes: Vec<String>,
}

pub fn validate_intent_spec(spec: IntentSpec, policy: WeightPolicy) -> Result<ValidatedSpec, SpecError> {
    let mut spec = spec;
    let mut notes = Vec::new();

    for facet in FacetId::ALL {
        let w = spec.weights.get(facet);
        if !w.is_finite() {
            return Err(SpecError::NonFiniteWeight { facet });
        }
        if w < 0.0 {
            return Err(SpecError::NegativeWeight { facet, value: w });
        }
    }

    for facet in FacetId::ALL {
        let w = spec.weights.get(facet);
        if spec.is_present(facet) || w == 0.0 {
            continue;
        }
        match policy {
            WeightPolicy::Strict => return Err(SpecError::WeightOnAbsentFacet { facet, value: w }),
            WeightPolicy::Coerce => {
                spec.weights.set(facet, 0.0);
                notes.push(format!("weight {w} on absent facet `{facet}` coerced to 0"));
            }
        }
    }

    // Blank rewrites carry no signal; store them as absent.
    for facet in FacetId::EMBEDDING {
        if spec.rewrites.get(facet).is_some() && !spec.rewrites.is_present(facet) {
            spec.rewrites.set(facet, None);
        }
    }

    if FacetId::ALL.iter().all(|&f| spec.weights.get(f) == 0.0) {
        return Err(SpecError::AllWeightsZero);
    }

    Ok(ValidatedSpec { spec, notes })
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VectorError {
    #[error("cannot normalize a zero vector")]
    ZeroVector,
    #[error("vector contains non-finite components")]
    NonFinite,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("vector is neither unit-norm nor zero (norm {0})")]
    NotUnitNorm(f64),
}

/// A unit-norm vector, or the designated all-zero vector standing in for an
/// absent facet.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn zero(dim: usize) -> Self {
        EmbeddingVector(vec![0.0; dim])
    }

    /// Accepts a vector that is already unit-norm (within tolerance) or zero.
    pub fn from_unit(values: Vec<f64>) -> Result<Self, VectorError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(VectorError::NonFinite);
        }
        let norm = l2_norm(&values);
        if norm == 0.0 || (norm - 1.0).abs() <= UNIT_NORM_TOLERANCE {
            Ok(EmbeddingVector(values))
        } else {
            Err(VectorError::NotUnitNorm(norm))
        }
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    pub fn dot(&self, other: &EmbeddingVector) -> Result<f64, VectorError> {
        if self.dim() != other.dim() {
            return Err(VectorError::DimensionMismatch { expected: self.dim(), actual: other.dim() });
        }
        Ok(dot(&self.0, &other.0))
    }
}

impl<'de> Deserialize<'de> for EmbeddingVector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let values = Vec::<f64>::deserialize(deserializer)?;
        EmbeddingVector::from_unit(values).map_err(de::Error::custom)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn l2_norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Scales `v` to unit ℓ2 norm.
pub fn normalize(v: Vec<f64>) -> Result<EmbeddingVector, VectorError> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(VectorError::NonFinite);
    }
    let norm = l2_norm(&v);
    if norm < ZERO_NORM_EPS {
        return Err(VectorError::ZeroVector);
    }
    Ok(EmbeddingVector(v.into_iter().map(|x| x / norm).collect()))
}

/// One value per embedding facet, in [`FacetId::EMBEDDING`] order.
/// Serialized as a map keyed by facet name.
#[derive(Debug, Clone, PartialEq)]
pub struct PerFacet<T>(pub [T; 4]);

impl<T> PerFacet<T> {
    pub fn from_fn(mut f: impl FnMut(FacetId) -> T) -> Self {
        PerFacet(FacetId::EMBEDDING.map(&mut f))
    }

    pub fn try_from_fn<E>(mut f: impl FnMut(FacetId) -> Result<T, E>) -> Result<Self, E> {
        let [a, b, c, d] = FacetId::EMBEDDING;
        Ok(PerFacet([f(a)?, f(b)?, f(c)?, f(d)?]))
    }

    pub fn iter(&self) -> impl Iterator<Item = (FacetId, &T)> {
        FacetId::EMBEDDING.into_iter().zip(self.0.iter())
    }

    pub fn values(&self) -> impl Iterator<Item = &T> {
        self.0.iter()
    }

    pub fn map<U>(&self, mut f: impl FnMut(FacetId, &T) -> U) -> PerFacet<U> {
        PerFacet::from_fn(|facet| f(facet, &self[facet]))
    }
}

impl<T> Index<FacetId> for PerFacet<T> {
    type Output = T;

    fn index(&self, facet: FacetId) -> &T {
        let slot = facet.embedding_slot().expect("chart_type is not an embedding facet");
        &self.0[slot]
    }
}

impl<T> IndexMut<FacetId> for PerFacet<T> {
    fn index_mut(&mut self, facet: FacetId) -> &mut T {
        let slot = facet.embedding_slot().expect("chart_type is not an embedding facet");
        &mut self.0[slot]
    }
}

impl<T: Serialize> Serialize for PerFacet<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(4))?;
        for (facet, value) in self.iter() {
            map.serialize_entry(facet.name(), value)?;
        }
        map.end()
    }
}

impl<'de, T: Deserialize<'de>> Deserialize<'de> for PerFacet<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct PerFacetVisitor<T>(std::marker::PhantomData<T>);

        impl<'de, T: Deserialize<'de>> Visitor<'de> for PerFacetVisitor<T> {
            type Value = PerFacet<T>;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a map keyed by the four embedding facets")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Self::Value, A::Error> {
                let mut slots: [Option<T>; 4] = [None, None, None, None];
                while let Some(key) = access.next_key::<String>()? {
                    let facet: FacetId = key.parse().map_err(de::Error::custom)?;
                    let slot = facet
                        .embedding_slot()
                        .ok_or_else(|| de::Error::custom("chart_type is not an embedding facet"))?;
                    if slots[slot].is_some() {
                        return Err(de::Error::custom(format!("duplicate facet `{facet}`")));
                    }
                    slots[slot] = Some(access.next_value()?);
                }
                let [a, b, c, d] = slots;
                match (a, b, c, d) {
                    (Some(a), Some(b), Some(c), Some(d)) => Ok(PerFacet([a, b, c, d])),
                    _ => Err(de::Error::custom("all four embedding facets are required")),
                }
            }
        }

        deserializer.deserialize_map(PerFacetVisitor(std::marker::PhantomData))
    }
}

/// A corpus exemplar with its precomputed facet embeddings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub id: String,
    pub chart_types: BTreeSet<ChartType>,
    pub base_embedding: EmbeddingVector,
    pub facet_embeddings: PerFacet<EmbeddingVector>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

/// One retrieved exemplar with its fused score and per-facet breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedResult {
    pub record_id: String,
    pub total_score: f64,
    pub facet_scores: BTreeMap<FacetId, f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn content_only(text: &str) -> IntentSpec {
        let mut spec = IntentSpec::default();
        spec.rewrites.content = Some(text.into());
        spec.weights.content = 1.0;
        spec
    }

    #[test]
    fn minimal_spec_is_valid_and_unchanged() {
        let spec = content_only("pie share of commute modes");
        let out = validate_intent_spec(spec.clone(), WeightPolicy::Strict).unwrap();
        assert_eq!(out.spec, spec);
        assert!(out.notes.is_empty());
    }

    #[test]
    fn weight_on_absent_facet_strict_vs_coerce() {
        let mut spec = content_only("x");
        spec.rewrites.content = None;
        spec.weights.content = 0.0;
        spec.weights.layout = 0.5;
        assert!(matches!(
            validate_intent_spec(spec.clone(), WeightPolicy::Strict),
            Err(SpecError::WeightOnAbsentFacet { facet: FacetId::Layout, .. })
        ));
        // Coercion leaves no signal at all.
        assert_eq!(validate_intent_spec(spec, WeightPolicy::Coerce), Err(SpecError::AllWeightsZero));

        let mut spec = content_only("x");
        spec.weights.style = 2.0;
        let out = validate_intent_spec(spec, WeightPolicy::Coerce).unwrap();
        assert_eq!(out.spec.weights.style, 0.0);
        assert_eq!(out.notes.len(), 1);
    }

    #[test]
    fn chart_weight_requires_chart_types() {
        let mut spec = content_only("x");
        spec.weights.chart_type = 1.0;
        assert!(matches!(
            validate_intent_spec(spec.clone(), WeightPolicy::Strict),
            Err(SpecError::WeightOnAbsentFacet { facet: FacetId::ChartType, .. })
        ));
        spec.chart_types.insert(ChartType::BarChart);
        assert!(validate_intent_spec(spec, WeightPolicy::Strict).is_ok());
    }

    #[test]
    fn negative_and_zero_weights_rejected() {
        let mut spec = content_only("x");
        spec.weights.content = -0.1;
        assert!(matches!(
            validate_intent_spec(spec.clone(), WeightPolicy::Coerce),
            Err(SpecError::NegativeWeight { .. })
        ));
        spec.weights.content = 0.0;
        assert_eq!(validate_intent_spec(spec.clone(), WeightPolicy::Strict), Err(SpecError::AllWeightsZero));
        spec.weights.content = f64::NAN;
        assert!(matches!(validate_intent_spec(spec, WeightPolicy::Strict), Err(SpecError::NonFiniteWeight { .. })));
    }

    #[test]
    fn blank_rewrite_counts_as_absent() {
        let mut spec = content_only("x");
        spec.rewrites.style = Some("   ".into());
        let out = validate_intent_spec(spec.clone(), WeightPolicy::Strict).unwrap();
        assert_eq!(out.spec.rewrites.style, None);
        spec.weights.style = 1.0;
        assert!(validate_intent_spec(spec, WeightPolicy::Strict).is_err());
    }

    #[test]
    fn normalize_examples() {
        let mut v = vec![0.0; 8];
        v[0] = 3.0;
        v[1] = 4.0;
        let n = normalize(v).unwrap();
        assert_eq!(n.as_slice()[0], 0.6);
        assert_eq!(n.as_slice()[1], 0.8);
        assert!(n.as_slice()[2..].iter().all(|&x| x == 0.0));

        let unit = normalize(vec![0.0, 1.0, 0.0]).unwrap();
        let again = normalize(unit.as_slice().to_vec()).unwrap();
        for (a, b) in unit.as_slice().iter().zip(again.as_slice()) {
            assert!((a - b).abs() <= 1e-9);
        }

        assert_eq!(normalize(vec![0.0; 4]), Err(VectorError::ZeroVector));
        assert_eq!(normalize(vec![1e-13, 0.0]), Err(VectorError::ZeroVector));
    }

    #[test]
    fn facet_and_chart_names_round_trip() {
        for f in FacetId::ALL {
            assert_eq!(f.name().parse::<FacetId>().unwrap(), f);
            let json = serde_json::to_string(&f).unwrap();
            assert_eq!(json, format!("\"{}\"", f.name()));
        }
        for t in ChartType::ALL {
            assert_eq!(t.name().parse::<ChartType>().unwrap(), t);
            assert_eq!(t.name().to_uppercase().parse::<ChartType>().unwrap(), t);
        }
        assert_eq!("  pie   CHART ".parse::<ChartType>().unwrap(), ChartType::PieChart);
        assert!("Donut".parse::<ChartType>().is_err());
    }

    #[test]
    fn canonical_json_shape() {
        let mut spec = content_only("commute modes");
        spec.chart_types.insert(ChartType::PieChart);
        spec.weights.chart_type = 0.5;
        let value: serde_json::Value = serde_json::from_str(&spec.to_json()).unwrap();
        assert_eq!(value["rewrites"]["content"], "commute modes");
        assert!(value["rewrites"]["layout"].is_null());
        assert!(value["rewrites"]["style"].is_null());
        assert_eq!(value["chart_types"][0], "Pie Chart");
        assert_eq!(value["weights"]["chart_type"], 0.5);
        assert_eq!(value["weights"]["illustration"], 0.0);
        assert_eq!(IntentSpec::from_json(&spec.to_json()).unwrap(), spec);
    }

    #[test]
    fn unknown_chart_type_in_json() {
        let text = r#"{"rewrites":{"content":"a","layout":null,"illustration":null,"style":null},
            "chart_types":["Donut Chart"],
            "weights":{"content":1,"chart_type":0,"layout":0,"illustration":0,"style":0}}"#;
        assert_eq!(IntentSpec::from_json(text), Err(SpecError::UnknownChartType("Donut Chart".into())));
    }

    #[test]
    fn embedding_vector_rejects_non_unit() {
        assert!(EmbeddingVector::from_unit(vec![0.6, 0.8]).is_ok());
        assert!(EmbeddingVector::from_unit(vec![0.0, 0.0]).is_ok());
        assert!(matches!(EmbeddingVector::from_unit(vec![1.0, 1.0]), Err(VectorError::NotUnitNorm(_))));
        let v: Result<EmbeddingVector, _> = serde_json::from_str("[2.0, 0.0]");
        assert!(v.is_err());
    }

    #[test]
    fn per_facet_serde() {
        let pf = PerFacet::from_fn(|f| f.name().len());
        let json = serde_json::to_string(&pf).unwrap();
        assert_eq!(json, r#"{"content":7,"layout":6,"illustration":12,"style":5}"#);
        let back: PerFacet<usize> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, pf);
        assert!(serde_json::from_str::<PerFacet<usize>>(r#"{"content":1}"#).is_err());
    }
}
