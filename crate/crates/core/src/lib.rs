//! Cosine-type k-nearest-neighbor rating estimation for collaborative
//! recommendation under a sequential reveal model.
//!
//! Users enter a ratings database one per time step and keep revealing more
//! of their ratings afterwards. A new user's unknown rating of a target item
//! is estimated from the `k` database users most similar to them under a
//! co-rated cosine similarity, damped by how much of the new user's rated
//! items each database user has revealed so far.
//!
//! Modules:
//! - [`types`]: validated ratings, masks, query users and database snapshots
//! - [`similarity`]: co-rated cosine, reveal penalty, penalized similarity
//! - [`estimator`]: neighbor selection and the k-NN estimate
//! - [`reveal`]: the sequential reveal and responder processes
//! - [`model`]: synthetic generative laws with closed-form regression functions
//! - [`harness`]: Monte Carlo error estimation and rate fitting

pub mod error;
pub mod estimator;
pub mod harness;
pub mod model;
pub mod reveal;
pub mod rng;
pub mod similarity;
pub mod types;

pub use error::{Error, Result};
pub use estimator::{estimate, select_k_most_similar, Neighbor, NeighborWeights};
pub use harness::{
    fit_rows, rate_fit, ConvergenceResult, ConvergenceRow, ErrorMetric, ErrorSummary, Execution, Experiment,
    KSchedule, RateFit, Rounding,
};
pub use model::{f_oracle_check, AdditiveModel, ModelParams, MultiplicativeModel, OracleCheck, RatingModel};
pub use reveal::{
    alpha_closed_form, first_full_time, ResponderProcess, RevealProcess, RevealSequence, SimState,
};
pub use rng::{Purpose, SeedTree};
pub use similarity::{bar_similarity, corated_set, cosine_distance_gap, penalty, similarity, PenaltyMap};
pub use types::{
    apply_mask, restrict, DatabaseSnapshot, DatabaseUser, MaskSet, MaskedUserVector, QueryUser, RatingScale,
    RatingVector,
};
