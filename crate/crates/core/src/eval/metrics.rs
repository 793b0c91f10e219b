//! Unique-target retrieval metrics.
//!
//! Reciprocal-rank sums are accumulated from per-rank counts, so every
//! metric is exactly invariant to the order of its input.

use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

/// Reciprocal-rank truncation depth.
pub const RR_CUTOFF: usize = 10;

/// Per-round discount for dCRR@10.
pub const DCRR_GAMMA: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("no ranks given")]
    EmptyInput,
    #[error("session has no rounds")]
    EmptySession,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("discount must lie in (0, 1], got {0}")]
    InvalidGamma(f64),
    #[error("rank must be at least 1")]
    InvalidRank,
    #[error("round indices must start at 1 and strictly increase")]
    RoundOrder,
}

/// Position of the target in a result list, or absence from it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rank {
    Hit(usize),
    Miss,
}

impl Rank {
    pub fn hit(rank: usize) -> Result<Rank, MetricError> {
        if rank == 0 {
            Err(MetricError::InvalidRank)
        } else {
            Ok(Rank::Hit(rank))
        }
    }

    pub fn position(self) -> Option<usize> {
        match self {
            Rank::Hit(r) => Some(r),
            Rank::Miss => None,
        }
    }

    pub fn within(self, k: usize) -> bool {
        matches!(self, Rank::Hit(r) if r <= k)
    }

    /// `1/rank` within the top 10, else 0.
    pub fn reciprocal_at_10(self) -> f64 {
        match self {
            Rank::Hit(r) if r <= RR_CUTOFF => 1.0 / r as f64,
            _ => 0.0,
        }
    }
}

impl fmt::Display for Rank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rank::Hit(r) => write!(f, "{r}"),
            Rank::Miss => f.write_str("miss"),
        }
    }
}

/// Serialized as the integer rank or the string `"miss"`.
impl Serialize for Rank {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Rank::Hit(r) => s.serialize_u64(*r as u64),
            Rank::Miss => s.serialize_str("miss"),
        }
    }
}

impl<'de> Deserialize<'de> for Rank {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct RankVisitor;
        impl Visitor<'_> for RankVisitor {
            type Value = Rank;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a positive integer or \"miss\"")
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Rank, E> {
                Rank::hit(v as usize).map_err(E::custom)
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Rank, E> {
                if v < 1 {
                    return Err(E::custom("rank must be at least 1"));
                }
                Ok(Rank::Hit(v as usize))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Rank, E> {
                if v == "miss" {
                    Ok(Rank::Miss)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
        }
        d.deserialize_any(RankVisitor)
    }
}

/// Σ over ranks of 1/rank (top 10 only), summed in a fixed order.
fn reciprocal_sum(ranks: &[Rank]) -> f64 {
    let mut counts = [0usize; RR_CUTOFF + 1];
    for r in ranks {
        if let Rank::Hit(p) = *r {
            if p <= RR_CUTOFF {
                counts[p] += 1;
            }
        }
    }
    (1..=RR_CUTOFF).map(|p| counts[p] as f64 / p as f64).sum()
}

pub fn recall_at_k(ranks: &[Rank], k: usize) -> Result<f64, MetricError> {
    if ranks.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    if k == 0 {
        return Err(MetricError::InvalidK);
    }
    let hits = ranks.iter().filter(|r| r.within(k)).count();
    Ok(hits as f64 / ranks.len() as f64)
}

pub fn mrr_at_10(ranks: &[Rank]) -> Result<f64, MetricError> {
    if ranks.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    Ok(reciprocal_sum(ranks) / ranks.len() as f64)
}

/// One round of a multi-round session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// 1-based.
    pub round_index: usize,
    pub rank_of_target: Rank,
}

/// `Σ_r γ^{r−1} · RR@10_r` over the session's rounds.
pub fn dcrr_at_10(session: &[RoundRecord], gamma: f64) -> Result<f64, MetricError> {
    if session.is_empty() {
        return Err(MetricError::EmptySession);
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(MetricError::InvalidGamma(gamma));
    }
    let mut prev = 0;
    for round in session {
        if round.round_index <= prev {
            return Err(MetricError::RoundOrder);
        }
        prev = round.round_index;
    }
    Ok(session
        .iter()
        .map(|round| gamma.powi(round.round_index as i32 - 1) * round.rank_of_target.reciprocal_at_10())
        .sum())
}
