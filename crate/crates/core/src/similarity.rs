//! Co-rated cosine similarity, the reveal penalty and the penalized
//! similarity used to rank database users.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{apply_mask, MaskSet, QueryUser, RatingVector};

/// Nondecreasing map `ψ: [0, 1] → [0, 1]` applied to the penalty factor.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyMap {
    /// `ψ(p) = p`.
    #[default]
    Identity,
    /// `ψ(p) = √p`, which favors users with few revealed items.
    Sqrt,
    /// A user-supplied map. Build it through [`PenaltyMap::custom`] so that
    /// it is range- and monotonicity-checked.
    #[serde(skip)]
    Custom(fn(f64) -> f64),
}

impl PenaltyMap {
    /// Wraps `psi` after checking it on the grid `0, 0.01, …, 1`.
    pub fn custom(psi: fn(f64) -> f64) -> Result<Self> {
        let mut prev = f64::NEG_INFINITY;
        for step in 0..=100 {
            let p = step as f64 / 100.0;
            let v = psi(p);
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidPenalty(format!("psi({p}) = {v} is outside [0, 1]")));
            }
            if v < prev {
                return Err(Error::InvalidPenalty(format!("psi decreases at {p}")));
            }
            prev = v;
        }
        Ok(Self::Custom(psi))
    }

    pub fn apply(&self, p: f64) -> f64 {
        match self {
            Self::Identity => p,
            Self::Sqrt => p.sqrt(),
            Self::Custom(psi) => psi(p),
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "identity" => Ok(Self::Identity),
            "sqrt" => Ok(Self::Sqrt),
            other => Err(Error::InvalidPenalty(format!("unknown penalty map `{other}`"))),
        }
    }
}

/// Items rated (nonzero) in both vectors.
pub fn corated_set(x: &RatingVector, other: &RatingVector) -> MaskSet {
    x.support().intersection(&other.support())
}

/// Cosine of `x` and `other` restricted to their co-rated items, or 0 when
/// they share no rated item.
pub fn bar_similarity(x: &RatingVector, other: &RatingVector) -> f64 {
    let mut dot = 0.0;
    let mut nx = 0.0;
    let mut ny = 0.0;
    let mut shared = false;
    for (&a, &b) in x.entries().iter().zip(other.entries()) {
        if a != 0.0 && b != 0.0 {
            shared = true;
            dot += a * b;
            nx += a * a;
            ny += b * b;
        }
    }
    if !shared {
        return 0.0;
    }
    (dot / (nx.sqrt() * ny.sqrt())).min(1.0)
}

/// Fraction of the query items that the database user has revealed:
/// `|reveal ∩ query| / |query|`.
pub fn penalty(reveal: &MaskSet, query: &MaskSet) -> Result<f64> {
    if query.is_empty() {
        return Err(Error::EmptyQueryMask);
    }
    Ok(reveal.intersection_len(query) as f64 / query.len() as f64)
}

/// Penalized similarity `ψ(p) · S̄(x★, X_i^(n))` between the query and a
/// database user with raw ratings `user_raw` and reveal mask `reveal`.
pub fn similarity(
    query: &QueryUser,
    user_raw: &RatingVector,
    reveal: &MaskSet,
    psi: PenaltyMap,
) -> Result<f64> {
    let masked = apply_mask(user_raw, reveal, query.mask());
    similarity_of_masked(query, masked.ratings(), reveal, psi)
}

pub(crate) fn similarity_of_masked(
    query: &QueryUser,
    masked: &RatingVector,
    reveal: &MaskSet,
    psi: PenaltyMap,
) -> Result<f64> {
    let p = penalty(reveal, query.mask())?;
    Ok(psi.apply(p) * bar_similarity(query.ratings(), masked))
}

/// Distance between `S̄(x★, X★)` and `1 − ½‖x★/‖x★‖ − X★/‖X★‖‖²`, which
/// agree whenever `X★` is supported exactly on the query mask.
pub fn cosine_distance_gap(query: &QueryUser, user_star: &RatingVector) -> Result<f64> {
    if user_star.is_zero() {
        return Err(Error::ZeroVector);
    }
    if user_star.support() != *query.mask() {
        return Err(Error::InvalidArgument(
            "user vector must be supported exactly on the query mask".into(),
        ));
    }
    let qn = query.norm();
    let un = user_star.norm();
    let dist_sq: f64 = query
        .ratings()
        .entries()
        .iter()
        .zip(user_star.entries())
        .map(|(&a, &b)| {
            let diff = a / qn - b / un;
            diff * diff
        })
        .sum();
    Ok((bar_similarity(query.ratings(), user_star) - (1.0 - 0.5 * dist_sq)).abs())
}
