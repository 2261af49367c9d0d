//! Cosine-type k-NN estimate of a query user's target rating.
//!
//! The `k` responders most similar to the query under the penalized
//! similarity receive weight `1/k` each. Ties go to the smaller user index.
//! When fewer than `k` users have rated the target, all weights are zero, and
//! a selected user whose masked vector is zero also gets weight zero.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::similarity::{similarity_of_masked, PenaltyMap};
use crate::types::{apply_mask, DatabaseSnapshot, QueryUser};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    /// 0-based user index in the snapshot.
    pub user: usize,
    pub similarity: f64,
    /// `1/k`, or 0 when the user's masked vector is zero.
    pub weight: f64,
    /// Norm of the user's masked vector.
    pub masked_norm: f64,
}

/// The selected neighbors, best first.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NeighborWeights {
    selected: Vec<Neighbor>,
}

impl NeighborWeights {
    pub fn selected(&self) -> &[Neighbor] {
        &self.selected
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }

    pub fn weight_sum(&self) -> f64 {
        self.selected.iter().map(|n| n.weight).sum()
    }

    /// Selected user indices in increasing order.
    pub fn user_set(&self) -> Vec<usize> {
        let mut users: Vec<usize> = self.selected.iter().map(|n| n.user).collect();
        users.sort_unstable();
        users
    }
}

/// Ranking key: higher similarity first, then lower index.
#[derive(Debug, Clone, Copy)]
struct Candidate {
    similarity: f64,
    user: usize,
    masked_norm: f64,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    /// `Greater` means "more similar".
    fn cmp(&self, other: &Self) -> Ordering {
        self.similarity
            .total_cmp(&other.similarity)
            .then_with(|| other.user.cmp(&self.user))
    }
}

/// Picks the `k` responders with the largest penalized similarity to `query`.
pub fn select_k_most_similar(
    query: &QueryUser,
    db: &DatabaseSnapshot,
    k: usize,
    psi: PenaltyMap,
) -> Result<NeighborWeights> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if query.ratings().len() != db.scale().items() {
        return Err(Error::DimensionMismatch {
            expected: db.scale().items(),
            got: query.ratings().len(),
        });
    }
    if db.responders().len() < k {
        return Ok(NeighborWeights::default());
    }

    // Min-heap of the current best k; the root is the weakest kept candidate.
    let mut heap: BinaryHeap<Reverse<Candidate>> = BinaryHeap::with_capacity(k + 1);
    for &i in db.responders() {
        let user = db.user(i);
        let masked = apply_mask(&user.raw, &user.reveal, query.mask());
        let candidate = Candidate {
            similarity: similarity_of_masked(query, masked.ratings(), &user.reveal, psi)?,
            user: i,
            masked_norm: masked.norm(),
        };
        if heap.len() < k {
            heap.push(Reverse(candidate));
        } else if let Some(Reverse(weakest)) = heap.peek() {
            if candidate > *weakest {
                heap.pop();
                heap.push(Reverse(candidate));
            }
        }
    }

    let weight = 1.0 / k as f64;
    let mut selected: Vec<Neighbor> = heap
        .into_iter()
        .map(|Reverse(c)| Neighbor {
            user: c.user,
            similarity: c.similarity,
            weight: if c.masked_norm == 0.0 { 0.0 } else { weight },
            masked_norm: c.masked_norm,
        })
        .collect();
    selected.sort_by(|a, b| {
        b.similarity
            .total_cmp(&a.similarity)
            .then_with(|| a.user.cmp(&b.user))
    });
    Ok(NeighborWeights { selected })
}

/// `‖x★‖ Σ W_i Y_i / ‖X_i^(n)‖` over the selected responders, with
/// `0 × ∞ = 0` for zero masked vectors.
pub fn estimate_from_weights(query: &QueryUser, db: &DatabaseSnapshot, weights: &NeighborWeights) -> f64 {
    let sum: f64 = weights
        .selected()
        .iter()
        .filter(|n| n.weight != 0.0)
        .map(|n| {
            let y = db.user(n.user).target.expect("selected users are responders");
            n.weight * y / n.masked_norm
        })
        .sum();
    query.norm() * sum
}

/// The cosine-type k-NN estimate of the query's target rating.
pub fn estimate(query: &QueryUser, db: &DatabaseSnapshot, k: usize, psi: PenaltyMap) -> Result<f64> {
    let weights = select_k_most_similar(query, db, k, psi)?;
    Ok(estimate_from_weights(query, db, &weights))
}
