//! Monte Carlo measurement of the estimation error `E|η_n(X★) − η(X★)|`,
//! neighbor-count schedules, sweeps over `n` and log–log rate fitting.
//!
//! Each replication builds a fresh database of `n` users with the
//! simulator, draws a fresh query, and records the error of the estimate
//! against the model's closed-form regression function. Replications use
//! disjoint random streams (see [`crate::rng`]) and are aggregated in index
//! order, so results do not depend on whether they ran in parallel.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::estimate;
use crate::model::RatingModel;
use crate::reveal::{ResponderProcess, RevealProcess, SimState};
use crate::rng::{Purpose, SeedTree, MAX_REPLICATIONS};
use crate::similarity::PenaltyMap;
use crate::types::QueryUser;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rounding {
    #[default]
    Nearest,
    Ceil,
}

/// `k(n) = max(1, round(c · n^γ))`, capped at `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KSchedule {
    pub c: f64,
    pub gamma: f64,
    #[serde(default)]
    pub rounding: Rounding,
}

impl KSchedule {
    pub fn new(c: f64, gamma: f64, rounding: Rounding) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "schedule constant c = {c} must be positive"
            )));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "schedule exponent gamma = {gamma} must lie in (0, 1)"
            )));
        }
        Ok(Self { c, gamma, rounding })
    }

    /// `k_n = ⌈n^{2/(d+1)}⌉`, the choice for fully revealed ratings in
    /// dimension `d`.
    pub fn full_reveal(d: usize) -> Self {
        Self {
            c: 1.0,
            gamma: 2.0 / (d as f64 + 1.0),
            rounding: Rounding::Ceil,
        }
    }

    /// `k_n = ⌈n^{2/5}⌉`, the choice for four-item query masks.
    pub fn four_item_masks() -> Self {
        Self {
            c: 1.0,
            gamma: 0.4,
            rounding: Rounding::Ceil,
        }
    }

    pub fn k(&self, n: usize) -> usize {
        let raw = self.c * (n as f64).powf(self.gamma);
        let k = match self.rounding {
            Rounding::Nearest => raw.round(),
            Rounding::Ceil => raw.ceil(),
        };
        (k as usize).clamp(1, n.max(1))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorMetric {
    /// Absolute error; the reported mean is `E|η_n − η|`.
    #[default]
    L1,
    /// Squared error; the reported mean is `E|η_n − η|²`.
    L2,
}

impl ErrorMetric {
    fn apply(self, diff: f64) -> f64 {
        match self {
            Self::L1 => diff.abs(),
            Self::L2 => diff * diff,
        }
    }
}

/// How replications are scheduled. `Parallel` falls back to sequential
/// execution when the crate is built without the `parallel` feature.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

/// Mean and standard error of the per-replication errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSummary {
    pub replications: usize,
    pub mean: f64,
    pub std_err: f64,
}

impl ErrorSummary {
    pub fn from_errors(errors: &[f64]) -> Result<Self> {
        if errors.len() < 2 {
            return Err(Error::InvalidArgument("need at least 2 replications".into()));
        }
        let count = errors.len() as f64;
        let mean = errors.iter().sum::<f64>() / count;
        let var = errors.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (count - 1.0);
        Ok(Self {
            replications: errors.len(),
            mean,
            std_err: (var / count).sqrt(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub k: usize,
    pub replications: usize,
    pub mean_abs_err: f64,
    pub std_err: f64,
}

/// Least-squares line through `(ln n, ln err)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceResult {
    pub rows: Vec<ConvergenceRow>,
    pub fit: RateFit,
}

/// Ordinary least squares of `ln err` on `ln n`.
pub fn rate_fit(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 2 {
        return Err(Error::InvalidArgument("rate fit needs at least 2 points".into()));
    }
    if let Some(&(n, err)) = points
        .iter()
        .find(|(n, err)| !(n.is_finite() && err.is_finite() && n.min(*err) > 0.0))
    {
        return Err(Error::InvalidArgument(format!(
            "rate fit needs positive values, got ({n}, {err})"
        )));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(n, e)| (n.ln(), e.ln())).collect();
    let count = logs.len() as f64;
    let mean_x = logs.iter().map(|p| p.0).sum::<f64>() / count;
    let mean_y = logs.iter().map(|p| p.1).sum::<f64>() / count;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let syy: f64 = logs.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument(
            "rate fit needs at least two distinct n".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_res: f64 = logs.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
    })
}

/// A fully specified Monte Carlo experiment, minus `n`, `k` and the number
/// of replications.
#[derive(Debug, Clone)]
pub struct Experiment<M> {
    model: M,
    reveal: RevealProcess,
    responder: ResponderProcess,
    psi: PenaltyMap,
    metric: ErrorMetric,
    seeds: SeedTree,
    master_seed: u64,
    fixed_query_mask: bool,
    execution: Execution,
}

impl<M: RatingModel> Experiment<M> {
    /// Validates the processes and the model's feasibility for the query
    /// mask size before anything runs.
    pub fn new(
        model: M,
        reveal: RevealProcess,
        responder: ResponderProcess,
        master_seed: u64,
    ) -> Result<Self> {
        let d = model.scale().items();
        reveal.validate(d)?;
        responder.validate()?;
        model.check_mask_size(reveal.initial_size(d))?;
        Ok(Self {
            model,
            reveal,
            responder,
            psi: PenaltyMap::Identity,
            metric: ErrorMetric::L1,
            seeds: SeedTree::new(master_seed),
            master_seed,
            fixed_query_mask: false,
            execution: Execution::default(),
        })
    }

    pub fn with_psi(mut self, psi: PenaltyMap) -> Self {
        self.psi = psi;
        self
    }

    pub fn with_metric(mut self, metric: ErrorMetric) -> Self {
        self.metric = metric;
        self
    }

    /// Keeps the query mask identical across replications.
    pub fn with_fixed_query_mask(mut self, fixed: bool) -> Self {
        self.fixed_query_mask = fixed;
        self
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// The query user of replication `replication`.
    pub fn draw_query(&self, replication: u64) -> Result<QueryUser> {
        let d = self.model.scale().items();
        let mask_replication = if self.fixed_query_mask { 0 } else { replication };
        let mut mask_rng = self.seeds.stream(Purpose::Query, mask_replication, 0);
        let mask = self.reveal.draw_query_mask(d, &mut mask_rng);
        let mut rating_rng = self.seeds.stream(Purpose::Query, replication, 1);
        let (raw, _) = self.model.draw_user(&mask, &mut rating_rng)?;
        QueryUser::from_raw(&raw, &mask, self.model.scale())
    }

    /// Runs the simulator for `n` steps. Targets are generated against the
    /// query's mask.
    pub fn simulate(&self, replication: u64, n: usize, query: &QueryUser) -> Result<SimState> {
        let mut sim = SimState::new(
            *self.model.scale(),
            self.reveal,
            self.responder,
            self.seeds,
            replication,
        )?;
        for user in 1..=n {
            let mut rng = self.seeds.stream(Purpose::Rating, replication, user as u64);
            let (raw, y) = self.model.draw_user(query.mask(), &mut rng)?;
            sim.step(raw, y)?;
        }
        Ok(sim)
    }

    /// Error of one replication under the configured metric.
    pub fn replication_error(&self, replication: u64, n: usize, k: usize) -> Result<f64> {
        let query = self.draw_query(replication)?;
        let snapshot = self.simulate(replication, n, &query)?.snapshot()?;
        let predicted = estimate(&query, &snapshot, k, self.psi)?;
        Ok(self.metric.apply(predicted - self.model.true_eta(&query)))
    }

    /// Per-replication errors for the replication indices in `range`, in
    /// index order.
    pub fn errors(&self, n: usize, k: usize, range: Range<u64>) -> Result<Vec<f64>> {
        if n == 0 || k == 0 {
            return Err(Error::InvalidArgument("n and k must be at least 1".into()));
        }
        if range.end > MAX_REPLICATIONS {
            return Err(Error::InvalidArgument(format!(
                "at most {MAX_REPLICATIONS} replications"
            )));
        }
        let run = |r: u64| self.replication_error(r, n, k);
        match self.execution {
            #[cfg(feature = "parallel")]
            Execution::Parallel => range.into_par_iter().map(run).collect(),
            _ => range.map(run).collect(),
        }
    }

    /// Monte Carlo estimate of the mean error at fixed `n` and `k`.
    pub fn l1_error(&self, n: usize, k: usize, replications: usize) -> Result<ErrorSummary> {
        self.error_over(n, k, 0..replications as u64)
    }

    /// Same as [`Self::l1_error`] over an explicit replication range.
    pub fn error_over(&self, n: usize, k: usize, range: Range<u64>) -> Result<ErrorSummary> {
        if range.end.saturating_sub(range.start) < 2 {
            return Err(Error::InvalidArgument("need at least 2 replications".into()));
        }
        ErrorSummary::from_errors(&self.errors(n, k, range)?)
    }

    /// Runs [`Self::l1_error`] at every grid point with `k = schedule.k(n)`
    /// and fits the log–log slope.
    pub fn convergence_study(
        &self,
        n_grid: &[usize],
        schedule: &KSchedule,
        replications: usize,
    ) -> Result<ConvergenceResult> {
        if n_grid.len() < 2 {
            return Err(Error::InvalidArgument("n grid needs at least 2 points".into()));
        }
        if n_grid.windows(2).any(|w| w[0] >= w[1]) || n_grid[0] == 0 {
            return Err(Error::InvalidArgument(
                "n grid must be positive and strictly increasing".into(),
            ));
        }
        let mut rows = Vec::with_capacity(n_grid.len());
        for &n in n_grid {
            let k = schedule.k(n);
            let summary = self.l1_error(n, k, replications)?;
            rows.push(ConvergenceRow {
                n,
                k,
                replications,
                mean_abs_err: summary.mean,
                std_err: summary.std_err,
            });
        }
        let fit = fit_rows(&rows)?;
        Ok(ConvergenceResult { rows, fit })
    }
}

/// Slope fit over result rows.
pub fn fit_rows(rows: &[ConvergenceRow]) -> Result<RateFit> {
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.mean_abs_err)).collect();
    rate_fit(&points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::estimate;
    use crate::model::{ModelParams, MultiplicativeModel};
    use crate::types::{DatabaseSnapshot, DatabaseUser, MaskSet, RatingScale, RatingVector};
    use rand::{Rng, SeedableRng};

    fn full_reveal_d5(delta: f64, seed: u64) -> Experiment<MultiplicativeModel> {
        let model = MultiplicativeModel::new(
            RatingScale::new(10.0, 5).unwrap(),
            ModelParams {
                delta,
                ..Default::default()
            },
        )
        .unwrap();
        Experiment::new(model, RevealProcess::AllAtOnce, ResponderProcess::All, seed).unwrap()
    }

    #[test]
    fn schedule_presets() {
        let s = KSchedule::full_reveal(5);
        assert!((s.gamma - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!([s.k(200), s.k(800), s.k(3200)], [6, 10, 15]);
        let s = KSchedule::four_item_masks();
        assert_eq!([s.k(200), s.k(800), s.k(3200)], [9, 15, 26]);
        let s = KSchedule::new(1.0, 1.0 / 3.0, Rounding::Nearest).unwrap();
        assert_eq!(s.k(800), 9);
        assert_eq!(KSchedule::new(0.01, 0.5, Rounding::Nearest).unwrap().k(4), 1);
        assert_eq!(KSchedule::new(5.0, 0.9, Rounding::Nearest).unwrap().k(3), 3);
        assert!(KSchedule::new(1.0, 1.0, Rounding::Nearest).is_err());
        assert!(KSchedule::new(0.0, 0.5, Rounding::Nearest).is_err());
    }

    #[test]
    fn rate_fit_exact_power_law() {
        let points: Vec<(f64, f64)> = [100.0, 400.0, 1600.0, 6400.0]
            .iter()
            .map(|&n: &f64| (n, n.powf(-0.2)))
            .collect();
        let fit = rate_fit(&points).unwrap();
        assert!((fit.slope + 0.2).abs() < 1e-12);
        assert!(fit.intercept.abs() < 1e-10);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);

        let fit = rate_fit(&[(10.0, 3.0), (50.0, 1.0)]).unwrap();
        assert!((fit.slope - (1.0f64 / 3.0).ln() / 5f64.ln()).abs() < 1e-12);
        assert_eq!(fit.r_squared, 1.0);
    }

    #[test]
    fn rate_fit_on_injected_errors() {
        let rows: Vec<ConvergenceRow> = [200usize, 800, 3200, 12800]
            .iter()
            .map(|&n| ConvergenceRow {
                n,
                k: 1,
                replications: 2,
                mean_abs_err: 0.7 * (n as f64).powf(-1.0 / 6.0),
                std_err: 0.0,
            })
            .collect();
        let fit = fit_rows(&rows).unwrap();
        assert!((fit.slope + 1.0 / 6.0).abs() < 1e-10);
    }

    #[test]
    fn rate_fit_with_bounded_jitter() {
        // Multiplicative jitter e^{u}, |u| ≤ j, moves each log-error by at
        // most j; with log-n spread over [0, L] the OLS slope moves by at most
        // 2j · Σ|x − x̄| / Σ(x − x̄)².
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let jitter: f64 = 0.02;
        let ns: Vec<f64> = (0..8).map(|i| 100.0 * 2f64.powi(i)).collect();
        let points: Vec<(f64, f64)> = ns
            .iter()
            .map(|&n| (n, n.powf(-0.25) * rng.random_range(-jitter..=jitter).exp()))
            .collect();
        let xs: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let bound = jitter * xs.iter().map(|x| (x - mean).abs()).sum::<f64>()
            / xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
        let fit = rate_fit(&points).unwrap();
        assert!(
            (fit.slope + 0.25).abs() <= bound,
            "slope {} bound {bound}",
            fit.slope
        );
    }

    #[test]
    fn rate_fit_rejects_bad_points() {
        assert!(rate_fit(&[(1.0, 1.0)]).is_err());
        assert!(rate_fit(&[(1.0, 1.0), (2.0, 0.0)]).is_err());
        assert!(rate_fit(&[(0.0, 1.0), (2.0, 1.0)]).is_err());
        assert!(rate_fit(&[(2.0, 1.0), (2.0, 3.0)]).is_err());
    }

    #[test]
    fn exact_directional_duplicate_gives_zero_error() {
        let model = MultiplicativeModel::new(
            RatingScale::new(10.0, 5).unwrap(),
            ModelParams {
                delta: 0.0,
                ..Default::default()
            },
        )
        .unwrap();
        let scale = *model.scale();
        let x = RatingVector::new(vec![1.2, 1.9, 1.4, 1.1, 1.6], &scale).unwrap();
        let query = QueryUser::new(x, &scale).unwrap();
        let dup = RatingVector::new(vec![1.5, 2.375, 1.75, 1.375, 2.0], &scale).unwrap();
        let dup_query = QueryUser::new(dup.clone(), &scale).unwrap();
        let other = RatingVector::new(vec![1.0, 2.0, 1.0, 2.0, 1.0], &scale).unwrap();
        let other_query = QueryUser::new(other.clone(), &scale).unwrap();
        let db = DatabaseSnapshot::new(
            scale,
            vec![
                DatabaseUser {
                    raw: other,
                    reveal: MaskSet::full(5),
                    target: Some(model.true_eta(&other_query)),
                },
                DatabaseUser {
                    raw: dup,
                    reveal: MaskSet::full(5),
                    target: Some(model.true_eta(&dup_query)),
                },
            ],
        )
        .unwrap();
        let predicted = estimate(&query, &db, 1, PenaltyMap::Identity).unwrap();
        assert!((predicted - model.true_eta(&query)).abs() < 1e-12);
    }

    #[test]
    fn infeasible_config_is_rejected_up_front() {
        let model = MultiplicativeModel::new(
            RatingScale::new(10.0, 5).unwrap(),
            ModelParams {
                a: 0.1,
                b: 0.1,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(Experiment::new(model, RevealProcess::AllAtOnce, ResponderProcess::All, 0).is_err());
    }

    #[test]
    fn same_seed_same_result() {
        let a = full_reveal_d5(0.1, 7).l1_error(100, 4, 20).unwrap();
        let b = full_reveal_d5(0.1, 7).l1_error(100, 4, 20).unwrap();
        assert_eq!(a, b);
        let c = full_reveal_d5(0.1, 8).l1_error(100, 4, 20).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn sequential_and_parallel_agree_bitwise() {
        let exp = full_reveal_d5(0.1, 3);
        let seq = exp
            .clone()
            .with_execution(Execution::Sequential)
            .errors(150, 5, 0..40)
            .unwrap();
        let par = exp
            .with_execution(Execution::Parallel)
            .errors(150, 5, 0..40)
            .unwrap();
        assert_eq!(seq, par);
    }

    #[test]
    fn split_replication_ranges_recombine() {
        let exp = full_reveal_d5(0.1, 5);
        let whole = exp.error_over(120, 5, 0..50).unwrap();
        let first = exp.error_over(120, 5, 0..20).unwrap();
        let second = exp.error_over(120, 5, 20..50).unwrap();
        let combined = (20.0 * first.mean + 30.0 * second.mean) / 50.0;
        assert!((combined - whole.mean).abs() <= 1e-12 * whole.mean.abs().max(1.0));
    }

    #[test]
    fn fixed_query_mask_is_shared() {
        let model =
            MultiplicativeModel::new(RatingScale::new(10.0, 8).unwrap(), ModelParams::default()).unwrap();
        let exp = Experiment::new(model, RevealProcess::Incremental4Plus1, ResponderProcess::All, 1)
            .unwrap()
            .with_fixed_query_mask(true);
        let m0 = exp.draw_query(0).unwrap().mask().clone();
        assert!((1..10).all(|r| *exp.draw_query(r).unwrap().mask() == m0));
        let free = exp.clone().with_fixed_query_mask(false);
        assert!((1..10).any(|r| *free.draw_query(r).unwrap().mask() != m0));
    }

    #[test]
    fn global_average_is_worse_than_scheduled_k() {
        let exp = full_reveal_d5(0.0, 13);
        let n = 800;
        let scheduled = exp.l1_error(n, KSchedule::full_reveal(5).k(n), 200).unwrap();
        let global = exp.l1_error(n, n, 200).unwrap();
        assert!(
            global.mean > scheduled.mean,
            "global {global:?} scheduled {scheduled:?}"
        );
    }

    #[test]
    fn l2_metric_squares_errors() {
        let l1 = full_reveal_d5(0.1, 2).errors(80, 3, 0..5).unwrap();
        let l2 = full_reveal_d5(0.1, 2)
            .with_metric(ErrorMetric::L2)
            .errors(80, 3, 0..5)
            .unwrap();
        for (a, b) in l1.iter().zip(&l2) {
            assert!((a * a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn convergence_study_validates_grid() {
        let exp = full_reveal_d5(0.1, 0);
        let s = KSchedule::full_reveal(5);
        assert!(exp.convergence_study(&[100], &s, 10).is_err());
        assert!(exp.convergence_study(&[100, 100], &s, 10).is_err());
        assert!(exp.l1_error(10, 1, 1).is_err());
        let result = exp.convergence_study(&[50, 200], &s, 10).unwrap();
        assert_eq!(result.rows.len(), 2);
        assert_eq!(result.fit.r_squared, 1.0);
    }
}
