//! Discrete-time simulator of the sequential rating protocol.
//!
//! At time `n` a new user enters and rates a first batch of items, while the
//! `n - 1` earlier users may each rate more items. User `i`'s mask at time
//! `n` is therefore the `(n + 1 - i)`-th element of its own reveal sequence.
//! Masks only grow and every user eventually rates all `d` items. Separately,
//! the responder set `R_n` of users who have rated the target item grows over
//! time.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{Purpose, SeedTree, StreamRng};
use crate::types::{DatabaseSnapshot, DatabaseUser, MaskSet, RatingScale, RatingVector};

/// How a single user's rated set grows over time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RevealProcess {
    /// Every item is rated on entry.
    AllAtOnce,
    /// Four uniformly chosen items on entry, then one more uniformly chosen
    /// unrated item per step.
    #[serde(rename = "incremental_4_plus_1")]
    Incremental4Plus1,
    /// `initial` items on entry, then `batch` more per step. Not part of the
    /// original protocol; an extension point for experiments.
    UniformBatch { initial: usize, batch: usize },
}

impl RevealProcess {
    pub fn validate(&self, d: usize) -> Result<()> {
        match *self {
            Self::AllAtOnce => Ok(()),
            Self::Incremental4Plus1 if d < 4 => Err(Error::InvalidReveal(format!(
                "incremental 4+1 process needs d >= 4, got {d}"
            ))),
            Self::Incremental4Plus1 => Ok(()),
            Self::UniformBatch { initial, batch } => {
                if initial == 0 || initial > d {
                    Err(Error::InvalidReveal(format!(
                        "initial batch {initial} not in 1..={d}"
                    )))
                } else if batch == 0 {
                    Err(Error::InvalidReveal("batch size must be at least 1".into()))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// `|M^age|` for `age ≥ 1`.
    pub fn mask_size(&self, d: usize, age: usize) -> usize {
        debug_assert!(age >= 1);
        match *self {
            Self::AllAtOnce => d,
            Self::Incremental4Plus1 => d.min(age + 3),
            Self::UniformBatch { initial, batch } => {
                d.min(initial.saturating_add((age - 1).saturating_mul(batch)))
            }
        }
    }

    /// Size of the first mask, which is also the size of the query mask.
    pub fn initial_size(&self, d: usize) -> usize {
        self.mask_size(d, 1)
    }

    /// Draws a whole reveal sequence. Every process here reveals items in a
    /// uniformly random order, so the sequence is a permutation of the items
    /// and `M^age` is its prefix of length `mask_size(d, age)`.
    pub fn draw_sequence(&self, d: usize, rng: &mut StreamRng) -> RevealSequence {
        let mut order: Vec<usize> = (0..d).collect();
        if !matches!(self, Self::AllAtOnce) {
            order.shuffle(rng);
        }
        RevealSequence {
            process: *self,
            order,
        }
    }

    /// Draws a query mask with the law of `M^1`.
    pub fn draw_query_mask(&self, d: usize, rng: &mut StreamRng) -> MaskSet {
        self.draw_sequence(d, rng).mask_at(1)
    }
}

/// One user's reveal sequence `M^1 ⊆ M^2 ⊆ …`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RevealSequence {
    process: RevealProcess,
    order: Vec<usize>,
}

impl RevealSequence {
    pub fn d(&self) -> usize {
        self.order.len()
    }

    /// Order in which items are revealed.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// `M^age`, for `age ≥ 1`.
    pub fn mask_at(&self, age: usize) -> MaskSet {
        let size = self.process.mask_size(self.d(), age);
        let mut mask = MaskSet::empty(self.d());
        for &j in &self.order[..size] {
            mask.insert(j);
        }
        mask
    }

    /// Smallest age at which the mask contains `query`.
    pub fn first_covering_age(&self, query: &MaskSet) -> usize {
        let needed = self
            .order
            .iter()
            .rposition(|&j| query.contains(j))
            .map_or(0, |pos| pos + 1);
        let mut age = 1;
        while self.process.mask_size(self.d(), age) < needed {
            age += 1;
        }
        age
    }
}

/// `T_i`: the first time at which user `i` (entered at time `entry_time`)
/// has revealed every item of `query`.
pub fn first_full_time(sequence: &RevealSequence, entry_time: usize, query: &MaskSet) -> usize {
    entry_time + sequence.first_covering_age(query) - 1
}

/// How the set of users who rated the target item grows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResponderProcess {
    /// Every user rates the target on entry: `R_n = {1, …, n}`.
    All,
    /// `R_1 = {1}`; at each later step one uniformly chosen non-responder
    /// joins with probability `p`.
    BernoulliGrowth { p: f64 },
}

impl ResponderProcess {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::All => Ok(()),
            Self::BernoulliGrowth { p } if (0.0..=1.0).contains(&p) => Ok(()),
            Self::BernoulliGrowth { p } => {
                Err(Error::InvalidResponder(format!("probability {p} outside [0, 1]")))
            }
        }
    }
}

#[derive(Debug, Clone)]
struct SimUser {
    raw: RatingVector,
    target: f64,
    sequence: RevealSequence,
    entry_time: usize,
    age: usize,
    mask: MaskSet,
}

/// The simulator state at time `n`.
#[derive(Debug, Clone)]
pub struct SimState {
    scale: RatingScale,
    reveal: RevealProcess,
    responder: ResponderProcess,
    seeds: SeedTree,
    replication: u64,
    time: usize,
    users: Vec<SimUser>,
    /// Users whose mask is not yet full.
    active: Vec<usize>,
    is_responder: Vec<bool>,
    responder_count: usize,
    non_responders: Vec<usize>,
    responder_rng: StreamRng,
}

impl SimState {
    pub fn new(
        scale: RatingScale,
        reveal: RevealProcess,
        responder: ResponderProcess,
        seeds: SeedTree,
        replication: u64,
    ) -> Result<Self> {
        reveal.validate(scale.items())?;
        responder.validate()?;
        Ok(Self {
            scale,
            reveal,
            responder,
            seeds,
            replication,
            time: 0,
            users: Vec::new(),
            active: Vec::new(),
            is_responder: Vec::new(),
            responder_count: 0,
            non_responders: Vec::new(),
            responder_rng: seeds.stream(Purpose::Responder, replication, 0),
        })
    }

    /// Current time `n`, equal to the number of users.
    pub fn time(&self) -> usize {
        self.time
    }

    pub fn scale(&self) -> &RatingScale {
        &self.scale
    }

    /// Advances one time step: existing users move one step along their
    /// reveal sequences, the new user enters with a fresh `M^1`, and the
    /// responder set is updated.
    pub fn step(&mut self, raw: RatingVector, target: f64) -> Result<()> {
        let d = self.scale.items();
        if raw.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: raw.len(),
            });
        }
        if !self.scale.admits_target(target) {
            return Err(Error::InvalidArgument(format!(
                "target {target} outside [1, {}]",
                self.scale.max_rating()
            )));
        }
        self.time += 1;
        let n = self.time;

        let users = &mut self.users;
        let reveal = self.reveal;
        self.active.retain(|&i| {
            let user = &mut users[i];
            user.age += 1;
            let size = reveal.mask_size(d, user.age);
            debug_assert!(size >= user.mask.len());
            for &j in &user.sequence.order[user.mask.len()..size] {
                user.mask.insert(j);
            }
            !user.mask.is_full()
        });

        let mut rng = self.seeds.stream(Purpose::Reveal, self.replication, n as u64);
        let sequence = self.reveal.draw_sequence(d, &mut rng);
        let mask = sequence.mask_at(1);
        if !mask.is_full() {
            self.active.push(n - 1);
        }
        self.users.push(SimUser {
            raw,
            target,
            sequence,
            entry_time: n,
            age: 1,
            mask,
        });
        self.is_responder.push(false);

        match self.responder {
            ResponderProcess::All => self.add_responder(n - 1),
            ResponderProcess::BernoulliGrowth { p } => {
                self.non_responders.push(n - 1);
                if n == 1 {
                    self.non_responders.pop();
                    self.add_responder(0);
                } else if self.responder_rng.random_bool(p) {
                    let pick = self.responder_rng.random_range(0..self.non_responders.len());
                    let user = self.non_responders.swap_remove(pick);
                    self.add_responder(user);
                }
            }
        }
        Ok(())
    }

    fn add_responder(&mut self, user: usize) {
        debug_assert!(!self.is_responder[user]);
        self.is_responder[user] = true;
        self.responder_count += 1;
    }

    /// Current mask of user `i` (0-based), i.e. `M_i^(n+1-i)`.
    pub fn mask(&self, user: usize) -> &MaskSet {
        &self.users[user].mask
    }

    pub fn reveal_sequence(&self, user: usize) -> &RevealSequence {
        &self.users[user].sequence
    }

    /// Entry time of user `i` (0-based index), which is `i + 1`.
    pub fn entry_time(&self, user: usize) -> usize {
        self.users[user].entry_time
    }

    pub fn responder_count(&self) -> usize {
        self.responder_count
    }

    pub fn is_responder(&self, user: usize) -> bool {
        self.is_responder[user]
    }

    /// 0-based responder indices in increasing order.
    pub fn responders(&self) -> Vec<usize> {
        (0..self.users.len()).filter(|&i| self.is_responder[i]).collect()
    }

    /// `L_n`: responders whose current mask covers `query`.
    pub fn diag_ln(&self, query: &MaskSet) -> Vec<usize> {
        (0..self.users.len())
            .filter(|&i| self.is_responder[i] && self.users[i].mask.is_superset_of(query))
            .collect()
    }

    /// Exports the database as seen at time `n`. Non-responders' targets are
    /// withheld.
    pub fn snapshot(&self) -> Result<DatabaseSnapshot> {
        let users = self
            .users
            .iter()
            .zip(&self.is_responder)
            .map(|(u, &responds)| DatabaseUser {
                raw: u.raw.clone(),
                reveal: u.mask.clone(),
                target: responds.then_some(u.target),
            })
            .collect();
        DatabaseSnapshot::new(self.scale, users)
    }
}

fn binomial(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for step in 0..k {
        // acc * (n - step) is divisible by (step + 1) at every step.
        acc = acc.checked_mul((n - step) as u128)? / (step as u128 + 1);
    }
    Some(acc)
}

/// Probability that user `i`'s mask at time `n` misses some item of a
/// uniformly drawn 4-item query mask, under the incremental 4+1 process:
/// 0 when `i ≤ n − d + 4`, else `1 − C(d−4, n−i) / C(d, n+4−i)`.
pub fn alpha_closed_form(n: usize, i: usize, d: usize) -> Result<f64> {
    if d < 5 {
        return Err(Error::InvalidArgument(format!(
            "closed form needs d >= 5, got {d}"
        )));
    }
    if i == 0 || i > n {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= i <= n, got i = {i}, n = {n}"
        )));
    }
    let lag = n - i;
    if lag + 4 >= d {
        return Ok(0.0);
    }
    let overflow = || Error::InvalidArgument(format!("binomial coefficient overflow for d = {d}"));
    let covering = binomial((d - 4) as u64, lag as u64).ok_or_else(overflow)?;
    let total = binomial(d as u64, (lag + 4) as u64).ok_or_else(overflow)?;
    Ok(1.0 - covering as f64 / total as f64)
}
