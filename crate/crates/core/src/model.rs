//! Synthetic laws for `(X, Y)` whose regression function has the form
//! `η(x★) = ‖x★‖ · φ(x★ / ‖x★‖)`, plus a rejection-sampling check of that
//! form.
//!
//! The target is generated from the ratings restricted to a mask `M`. In the
//! harness that mask is the query's mask for the replication, so the law of
//! `Y` given `X★` is exactly the closed form for every database user.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::StreamRng;
use crate::types::{restrict, MaskSet, QueryUser, RatingScale, RatingVector};

/// A generative law for a user's raw ratings and target rating.
pub trait RatingModel: Sync {
    fn scale(&self) -> &RatingScale;

    /// Errors if draws restricted to masks of `mask_size` items could leave
    /// `[1, s]`.
    fn check_mask_size(&self, mask_size: usize) -> Result<()>;

    /// Draws full raw ratings `X` and a target `Y` tied to `X` restricted
    /// to `mask`.
    fn draw_user(&self, mask: &MaskSet, rng: &mut StreamRng) -> Result<(RatingVector, f64)>;

    /// The regression function `E[Y | X★ = x★]`.
    fn true_eta(&self, query: &QueryUser) -> f64;

    /// `η(x★) / ‖x★‖`, the directional part of the regression function.
    fn phi(&self, query: &QueryUser) -> f64 {
        self.true_eta(query) / query.norm()
    }
}

/// Parameters of [`MultiplicativeModel`], as they appear in config files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    #[serde(default = "default_x_max")]
    pub x_max: f64,
    #[serde(default = "default_a")]
    pub a: f64,
    #[serde(default = "default_b")]
    pub b: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

fn default_x_max() -> f64 {
    2.0
}
fn default_a() -> f64 {
    0.6
}
fn default_b() -> f64 {
    1.0
}
fn default_delta() -> f64 {
    0.1
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            x_max: default_x_max(),
            a: default_a(),
            b: default_b(),
            delta: default_delta(),
        }
    }
}

/// `X_j ~ U[1, x_max]` i.i.d., and
/// `Y = ‖X★‖ · φ0(X★ / ‖X★‖) · ε` with `ε ~ U[1 − δ, 1 + δ]`, where
/// `φ0(z) = a + b ⟨z, u⟩` and `u` is the all-ones unit vector of `R^d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiplicativeModel {
    scale: RatingScale,
    params: ModelParams,
}

impl MultiplicativeModel {
    pub fn new(scale: RatingScale, params: ModelParams) -> Result<Self> {
        let ModelParams { x_max, a, b, delta } = params;
        if !(x_max.is_finite() && x_max >= 1.0 && x_max <= scale.max_rating()) {
            return Err(Error::InfeasibleModel(format!(
                "x_max = {x_max} must lie in [1, {}]",
                scale.max_rating()
            )));
        }
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::InfeasibleModel("a and b must be finite".into()));
        }
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::InfeasibleModel(format!(
                "delta = {delta} must lie in [0, 1)"
            )));
        }
        Ok(Self { scale, params })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Range of `φ0` over unit directions supported on `mask_size` items.
    /// For such a direction `⟨z, u⟩ ∈ [1/√d, √(m/d)]`, since
    /// `‖z‖₂ ≤ ‖z‖₁ ≤ √m ‖z‖₂`.
    pub fn phi_range(&self, mask_size: usize) -> (f64, f64) {
        let d = self.scale.items() as f64;
        let lo = self.params.a + self.params.b / d.sqrt();
        let hi = self.params.a + self.params.b * (mask_size as f64 / d).sqrt();
        (lo.min(hi), lo.max(hi))
    }

    /// `φ0(z) = a + b ⟨z, u⟩` for a unit vector `z`.
    pub fn phi0(&self, direction: &[f64]) -> f64 {
        let d = self.scale.items() as f64;
        self.params.a + self.params.b * direction.iter().sum::<f64>() / d.sqrt()
    }

    fn phi_of(&self, x: &RatingVector) -> f64 {
        let norm = x.norm();
        let direction: Vec<f64> = x.entries().iter().map(|v| v / norm).collect();
        self.phi0(&direction)
    }
}

impl RatingModel for MultiplicativeModel {
    fn scale(&self) -> &RatingScale {
        &self.scale
    }

    fn check_mask_size(&self, mask_size: usize) -> Result<()> {
        if mask_size == 0 || mask_size > self.scale.items() {
            return Err(Error::InfeasibleModel(format!(
                "mask size {mask_size} not in 1..={}",
                self.scale.items()
            )));
        }
        let (lo, hi) = self.phi_range(mask_size);
        let root_m = (mask_size as f64).sqrt();
        let ModelParams { x_max, delta, .. } = self.params;
        let min_y = root_m * lo * (1.0 - delta);
        let max_y = x_max * root_m * hi * (1.0 + delta);
        if min_y < 1.0 {
            return Err(Error::InfeasibleModel(format!(
                "smallest target {min_y:.4} for masks of {mask_size} items is below 1"
            )));
        }
        if max_y > self.scale.max_rating() {
            return Err(Error::InfeasibleModel(format!(
                "largest target {max_y:.4} for masks of {mask_size} items exceeds {}",
                self.scale.max_rating()
            )));
        }
        Ok(())
    }

    fn draw_user(&self, mask: &MaskSet, rng: &mut StreamRng) -> Result<(RatingVector, f64)> {
        self.check_mask_size(mask.len())?;
        let d = self.scale.items();
        let x_max = self.params.x_max;
        let entries: Vec<f64> = (0..d)
            .map(|_| {
                if x_max > 1.0 {
                    rng.random_range(1.0..=x_max)
                } else {
                    1.0
                }
            })
            .collect();
        let raw = RatingVector::from_valid(entries);
        let star = restrict(&raw, mask);
        let delta = self.params.delta;
        let noise = if delta > 0.0 {
            rng.random_range(1.0 - delta..=1.0 + delta)
        } else {
            1.0
        };
        let y = star.norm() * self.phi_of(&star) * noise;
        if !self.scale.admits_target(y) {
            return Err(Error::InfeasibleModel(format!(
                "drew target {y} outside [1, {}]",
                self.scale.max_rating()
            )));
        }
        Ok((raw, y))
    }

    fn true_eta(&self, query: &QueryUser) -> f64 {
        query.norm() * self.phi_of(query.ratings())
    }
}

/// A law that violates the multiplicative form: `Y = mean + U[−w, w]`,
/// independent of `X`. Its regression function is the constant `mean`.
/// Used as a negative control for [`f_oracle_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdditiveModel {
    scale: RatingScale,
    x_max: f64,
    mean: f64,
    half_width: f64,
}

impl AdditiveModel {
    pub fn new(scale: RatingScale, x_max: f64, mean: f64, half_width: f64) -> Result<Self> {
        if !(x_max >= 1.0 && x_max <= scale.max_rating()) {
            return Err(Error::InfeasibleModel(format!("x_max = {x_max} out of range")));
        }
        if !(half_width >= 0.0 && mean - half_width >= 1.0 && mean + half_width <= scale.max_rating()) {
            return Err(Error::InfeasibleModel("target range leaves [1, s]".into()));
        }
        Ok(Self {
            scale,
            x_max,
            mean,
            half_width,
        })
    }
}

impl RatingModel for AdditiveModel {
    fn scale(&self) -> &RatingScale {
        &self.scale
    }

    fn check_mask_size(&self, mask_size: usize) -> Result<()> {
        if mask_size == 0 || mask_size > self.scale.items() {
            return Err(Error::InfeasibleModel(format!(
                "mask size {mask_size} out of range"
            )));
        }
        Ok(())
    }

    fn draw_user(&self, _mask: &MaskSet, rng: &mut StreamRng) -> Result<(RatingVector, f64)> {
        let entries = (0..self.scale.items())
            .map(|_| rng.random_range(1.0..=self.x_max))
            .collect();
        let y = if self.half_width > 0.0 {
            rng.random_range(self.mean - self.half_width..=self.mean + self.half_width)
        } else {
            self.mean
        };
        Ok((RatingVector::from_valid(entries), y))
    }

    fn true_eta(&self, _query: &QueryUser) -> f64 {
        self.mean
    }
}

/// Outcome of [`f_oracle_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleCheck {
    /// Mean of `Y / ‖X★‖` over accepted draws.
    pub mc_mean: f64,
    /// The model's claimed `φ` at the probe direction.
    pub closed_form: f64,
    pub std_err: f64,
    pub accepted: usize,
}

impl OracleCheck {
    /// `|mc_mean − closed_form| ≤ z · std_err`.
    pub fn agrees_within(&self, z: f64) -> bool {
        (self.mc_mean - self.closed_form).abs() <= z * self.std_err
    }
}

pub const MIN_ORACLE_SAMPLES: usize = 10_000;
pub const MIN_ORACLE_ACCEPTED: usize = 100;

/// Estimates `E[Y / ‖X★‖ | direction of X★ ≈ direction of probe]` by
/// rejection sampling: draws are kept when the angle between `X★` and the
/// probe is at most `theta_tol` radians.
pub fn f_oracle_check<M: RatingModel + ?Sized>(
    model: &M,
    probe: &QueryUser,
    samples: usize,
    theta_tol: f64,
    rng: &mut StreamRng,
) -> Result<OracleCheck> {
    if samples < MIN_ORACLE_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_ORACLE_SAMPLES} samples, got {samples}"
        )));
    }
    if theta_tol.is_nan() || theta_tol <= 0.0 {
        return Err(Error::InvalidArgument(
            "angular tolerance must be positive".into(),
        ));
    }
    let mask = probe.mask();
    let probe_norm = probe.norm();
    let cos_tol = theta_tol.cos();
    let mut accepted = 0usize;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..samples {
        let (raw, y) = model.draw_user(mask, rng)?;
        let star = restrict(&raw, mask);
        let norm = star.norm();
        let dot: f64 = star
            .entries()
            .iter()
            .zip(probe.ratings().entries())
            .map(|(a, b)| a * b)
            .sum();
        if dot / (norm * probe_norm) >= cos_tol {
            let ratio = y / norm;
            accepted += 1;
            sum += ratio;
            sum_sq += ratio * ratio;
        }
    }
    if accepted < MIN_ORACLE_ACCEPTED {
        return Err(Error::TooFewAccepted {
            accepted,
            required: MIN_ORACLE_ACCEPTED,
        });
    }
    let count = accepted as f64;
    let mean = sum / count;
    let variance = ((sum_sq - count * mean * mean) / (count - 1.0)).max(0.0);
    Ok(OracleCheck {
        mc_mean: mean,
        closed_form: model.phi(probe),
        std_err: (variance / count).sqrt(),
        accepted,
    })
}
