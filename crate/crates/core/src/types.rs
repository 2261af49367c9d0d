//! Domain types: rating scale, rating vectors, item masks, query users and
//! database snapshots.
//!
//! Item indices are 0-based inside this crate. Anything that crosses a file
//! or command-line boundary uses 1-based indices, see [`MaskSet::from_one_based`]
//! and [`MaskSet::to_one_based`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximal rating `s` and the number of predictor items `d`.
///
/// Ratings live in `{0} ∪ [1, s]`, where 0 marks an unrated item. The target
/// item is not counted in `d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatingScale {
    s: f64,
    d: usize,
}

impl RatingScale {
    pub fn new(s: f64, d: usize) -> Result<Self> {
        if !(s.is_finite() && s > 1.0) {
            return Err(Error::InvalidScale(format!(
                "maximal rating must be > 1, got {s}"
            )));
        }
        if d == 0 {
            return Err(Error::InvalidScale("item count must be at least 1".into()));
        }
        Ok(Self { s, d })
    }

    pub fn max_rating(&self) -> f64 {
        self.s
    }

    pub fn items(&self) -> usize {
        self.d
    }

    /// `true` if `value` is 0 or lies in `[1, s]`.
    pub fn admits(&self, value: f64) -> bool {
        value == 0.0 || (1.0..=self.s).contains(&value)
    }

    /// `true` if `value` is a legal target rating, i.e. lies in `[1, s]`.
    pub fn admits_target(&self, value: f64) -> bool {
        (1.0..=self.s).contains(&value)
    }
}

/// A user's ratings over the `d` predictor items. Zero means "not rated".
#[derive(Debug, Clone, PartialEq)]
pub struct RatingVector {
    entries: Vec<f64>,
}

impl RatingVector {
    /// Validates every entry against `scale`. Entries in `(0, 1)` or above
    /// `s` are rejected rather than clamped.
    pub fn new(entries: Vec<f64>, scale: &RatingScale) -> Result<Self> {
        if entries.len() != scale.items() {
            return Err(Error::DimensionMismatch {
                expected: scale.items(),
                got: entries.len(),
            });
        }
        for (j, &value) in entries.iter().enumerate() {
            if !scale.admits(value) {
                return Err(Error::RatingOutOfRange {
                    item: j + 1,
                    value,
                    max: scale.max_rating(),
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn zeros(d: usize) -> Self {
        Self {
            entries: vec![0.0; d],
        }
    }

    /// Internal constructor for vectors that are valid by construction.
    pub(crate) fn from_valid(entries: Vec<f64>) -> Self {
        Self { entries }
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, item: usize) -> f64 {
        self.entries[item]
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&x| x == 0.0)
    }

    /// The set of rated (nonzero) items.
    pub fn support(&self) -> MaskSet {
        MaskSet::from_members(self.entries.iter().map(|&x| x != 0.0).collect())
    }
}

/// A subset of the item indices `{0, …, d-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MaskSet {
    members: Vec<bool>,
    len: usize,
}

impl MaskSet {
    pub fn empty(d: usize) -> Self {
        Self {
            members: vec![false; d],
            len: 0,
        }
    }

    pub fn full(d: usize) -> Self {
        Self {
            members: vec![true; d],
            len: d,
        }
    }

    pub(crate) fn from_members(members: Vec<bool>) -> Self {
        let len = members.iter().filter(|&&m| m).count();
        Self { members, len }
    }

    /// Builds a mask from 0-based item indices. Duplicates are ignored.
    pub fn from_indices(d: usize, indices: &[usize]) -> Result<Self> {
        let mut mask = Self::empty(d);
        for &j in indices {
            if j >= d {
                return Err(Error::ItemOutOfRange { index: j + 1, d });
            }
            mask.insert(j);
        }
        Ok(mask)
    }

    /// Builds a mask from 1-based item indices, as used in external formats.
    pub fn from_one_based(d: usize, indices: &[usize]) -> Result<Self> {
        let mut mask = Self::empty(d);
        for &j in indices {
            if j == 0 || j > d {
                return Err(Error::ItemOutOfRange { index: j, d });
            }
            mask.insert(j - 1);
        }
        Ok(mask)
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.iter().map(|j| j + 1).collect()
    }

    /// Number of items in the universe, i.e. `d`.
    pub fn universe(&self) -> usize {
        self.members.len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_full(&self) -> bool {
        self.len == self.members.len()
    }

    pub fn contains(&self, item: usize) -> bool {
        self.members.get(item).copied().unwrap_or(false)
    }

    /// Adds `item`; returns `true` if it was not present.
    pub fn insert(&mut self, item: usize) -> bool {
        if self.members[item] {
            false
        } else {
            self.members[item] = true;
            self.len += 1;
            true
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.members
            .iter()
            .enumerate()
            .filter_map(|(j, &m)| m.then_some(j))
    }

    pub fn intersection_len(&self, other: &MaskSet) -> usize {
        self.members
            .iter()
            .zip(&other.members)
            .filter(|(&a, &b)| a && b)
            .count()
    }

    pub fn intersection(&self, other: &MaskSet) -> MaskSet {
        Self::from_members(
            self.members
                .iter()
                .zip(&other.members)
                .map(|(&a, &b)| a && b)
                .collect(),
        )
    }

    pub fn is_subset_of(&self, other: &MaskSet) -> bool {
        self.members.iter().zip(&other.members).all(|(&a, &b)| !a || b)
    }

    pub fn is_superset_of(&self, other: &MaskSet) -> bool {
        other.is_subset_of(self)
    }
}

/// The new user whose target rating is to be predicted: masked ratings `x★`
/// together with the mask `M` of rated items.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryUser {
    ratings: RatingVector,
    mask: MaskSet,
}

impl QueryUser {
    pub fn new(ratings: RatingVector, scale: &RatingScale) -> Result<Self> {
        if ratings.len() != scale.items() {
            return Err(Error::DimensionMismatch {
                expected: scale.items(),
                got: ratings.len(),
            });
        }
        let mask = ratings.support();
        if mask.is_empty() {
            return Err(Error::EmptyQueryMask);
        }
        let norm = ratings.norm();
        let upper = scale.max_rating() * (scale.items() as f64).sqrt();
        if !(1.0..=upper).contains(&norm) {
            return Err(Error::InvalidQuery(format!("norm {norm} outside [1, {upper}]")));
        }
        Ok(Self { ratings, mask })
    }

    /// Restricts full raw ratings to `mask` and builds the query from them.
    pub fn from_raw(raw: &RatingVector, mask: &MaskSet, scale: &RatingScale) -> Result<Self> {
        if mask.is_empty() {
            return Err(Error::EmptyQueryMask);
        }
        if raw.len() != mask.universe() {
            return Err(Error::DimensionMismatch {
                expected: mask.universe(),
                got: raw.len(),
            });
        }
        if mask.iter().any(|j| raw.get(j) == 0.0) {
            return Err(Error::InvalidQuery(
                "raw ratings are missing items of the mask".into(),
            ));
        }
        Self::new(restrict(raw, mask), scale)
    }

    pub fn ratings(&self) -> &RatingVector {
        &self.ratings
    }

    pub fn mask(&self) -> &MaskSet {
        &self.mask
    }

    pub fn norm(&self) -> f64 {
        self.ratings.norm()
    }
}

/// One database row: full raw ratings `X_i`, the current reveal mask and the
/// target rating if the user belongs to the responder set.
#[derive(Debug, Clone, PartialEq)]
pub struct DatabaseUser {
    pub raw: RatingVector,
    pub reveal: MaskSet,
    pub target: Option<f64>,
}

/// The time-`n` state of the ratings database.
///
/// Targets are stored only for responders, so the estimator cannot consult a
/// non-responder's rating of the target item.
#[derive(Debug, Clone, PartialEq)]
pub struct DatabaseSnapshot {
    scale: RatingScale,
    users: Vec<DatabaseUser>,
    responders: Vec<usize>,
}

impl DatabaseSnapshot {
    pub fn new(scale: RatingScale, users: Vec<DatabaseUser>) -> Result<Self> {
        for (i, user) in users.iter().enumerate() {
            let row = i + 1;
            if user.raw.len() != scale.items() || user.reveal.universe() != scale.items() {
                return Err(Error::InvalidSnapshot(format!(
                    "user {row} has the wrong item count"
                )));
            }
            if let Some(j) = user.reveal.iter().find(|&j| user.raw.get(j) == 0.0) {
                return Err(Error::InvalidSnapshot(format!(
                    "user {row} reveals item {} without a rating",
                    j + 1
                )));
            }
            if let Some(y) = user.target {
                if !scale.admits_target(y) {
                    return Err(Error::InvalidSnapshot(format!(
                        "user {row} has target {y} outside [1, {}]",
                        scale.max_rating()
                    )));
                }
            }
        }
        let responders: Vec<usize> = users
            .iter()
            .enumerate()
            .filter_map(|(i, u)| u.target.is_some().then_some(i))
            .collect();
        if responders.is_empty() {
            return Err(Error::InvalidSnapshot("responder set is empty".into()));
        }
        Ok(Self {
            scale,
            users,
            responders,
        })
    }

    pub fn scale(&self) -> &RatingScale {
        &self.scale
    }

    /// Number of users `n`.
    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    pub fn users(&self) -> &[DatabaseUser] {
        &self.users
    }

    pub fn user(&self, index: usize) -> &DatabaseUser {
        &self.users[index]
    }

    /// 0-based indices of the responders, in increasing order.
    pub fn responders(&self) -> &[usize] {
        &self.responders
    }
}

/// A database user's ratings restricted to the items revealed by that user
/// and rated by the query user. May be the zero vector.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedUserVector(RatingVector);

impl MaskedUserVector {
    pub fn ratings(&self) -> &RatingVector {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn into_inner(self) -> RatingVector {
        self.0
    }
}

/// Keeps `raw_j` for `j ∈ reveal ∩ query` and zeroes every other entry.
pub fn apply_mask(raw: &RatingVector, reveal: &MaskSet, query: &MaskSet) -> MaskedUserVector {
    let entries = raw
        .entries()
        .iter()
        .enumerate()
        .map(|(j, &x)| {
            if reveal.contains(j) && query.contains(j) {
                x
            } else {
                0.0
            }
        })
        .collect();
    MaskedUserVector(RatingVector::from_valid(entries))
}

/// `x` restricted to `mask`.
pub fn restrict(x: &RatingVector, mask: &MaskSet) -> RatingVector {
    RatingVector::from_valid(
        x.entries()
            .iter()
            .enumerate()
            .map(|(j, &v)| if mask.contains(j) { v } else { 0.0 })
            .collect(),
    )
}
