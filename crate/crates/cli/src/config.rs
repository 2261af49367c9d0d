//! Experiment config files (TOML).
//!
//! ```toml
//! [scale]
//! s = 10.0
//! d = 5
//!
//! [model]
//! x_max = 2.0
//! a = 0.6
//! b = 1.0
//! delta = 0.1
//!
//! [reveal]
//! kind = "all_at_once"        # or "incremental_4_plus_1", or "uniform_batch" with initial/batch
//!
//! [responder]
//! kind = "all"                # or "bernoulli_growth" with p
//!
//! [study]
//! n_grid = [200, 800, 3200]
//! replications = 200
//! master_seed = 1
//! metric = "l1"
//!
//! [study.schedule]
//! c = 1.0
//! gamma = 0.3333333333333333
//! rounding = "ceil"
//! ```

use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;

use seqrec_core::{
    ErrorMetric, Execution, Experiment, KSchedule, ModelParams, MultiplicativeModel, PenaltyMap, RatingScale,
    ResponderProcess, RevealProcess,
};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Psi {
    #[default]
    Identity,
    Sqrt,
}

impl Psi {
    pub fn penalty_map(self) -> PenaltyMap {
        match self {
            Self::Identity => PenaltyMap::Identity,
            Self::Sqrt => PenaltyMap::Sqrt,
        }
    }
}

impl FromStr for Psi {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "identity" => Ok(Self::Identity),
            "sqrt" => Ok(Self::Sqrt),
            other => Err(format!(
                "unknown penalty map '{other}' (expected identity or sqrt)"
            )),
        }
    }
}

pub fn parse_metric(s: &str) -> Result<ErrorMetric, String> {
    match s {
        "l1" => Ok(ErrorMetric::L1),
        "l2" => Ok(ErrorMetric::L2),
        other => Err(format!("unknown metric '{other}' (expected l1 or l2)")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleSection {
    pub s: f64,
    pub d: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    pub n_grid: Vec<usize>,
    pub schedule: KSchedule,
    pub replications: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub metric: ErrorMetric,
    #[serde(default)]
    pub psi: Psi,
    /// Keep one query mask across replications instead of redrawing it.
    #[serde(default)]
    pub fixed_query_mask: bool,
    #[serde(default)]
    pub execution: Execution,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scale: ScaleSection,
    #[serde(default)]
    pub model: ModelParams,
    pub reveal: RevealProcess,
    pub responder: ResponderProcess,
    pub study: StudySection,
}

impl FromStr for ExperimentConfig {
    type Err = CliError;

    fn from_str(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::config(e.to_string().trim_end()))
    }
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        text.parse()
            .map_err(|e: CliError| CliError::config(format!("{}: {}", path.display(), e)))
    }

    pub fn max_n(&self) -> usize {
        self.study.n_grid.iter().copied().max().unwrap_or(0)
    }

    /// Validated k schedule.
    pub fn schedule(&self) -> CliResult<KSchedule> {
        let s = &self.study.schedule;
        KSchedule::new(s.c, s.gamma, s.rounding).map_err(|e| CliError::config(format!("study.schedule: {e}")))
    }

    /// Checks every section and builds the experiment. Nothing is simulated
    /// until this succeeds.
    pub fn experiment(&self) -> CliResult<Experiment<MultiplicativeModel>> {
        let scale = RatingScale::new(self.scale.s, self.scale.d)
            .map_err(|e| CliError::config(format!("scale: {e}")))?;
        let model = MultiplicativeModel::new(scale, self.model)
            .map_err(|e| CliError::config(format!("model: {e}")))?;
        self.reveal
            .validate(self.scale.d)
            .map_err(|e| CliError::config(format!("reveal: {e}")))?;
        self.responder
            .validate()
            .map_err(|e| CliError::config(format!("responder: {e}")))?;
        self.schedule()?;
        let grid = &self.study.n_grid;
        if grid.len() < 2 {
            return Err(CliError::config("study.n_grid: needs at least 2 points"));
        }
        if grid[0] == 0 || grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CliError::config(
                "study.n_grid: must be positive and strictly increasing",
            ));
        }
        if self.study.replications < 2 {
            return Err(CliError::config("study.replications: needs at least 2"));
        }
        let experiment = Experiment::new(model, self.reveal, self.responder, self.study.master_seed)
            .map_err(|e| CliError::config(format!("model: {e}")))?;
        Ok(experiment
            .with_psi(self.study.psi.penalty_map())
            .with_metric(self.study.metric)
            .with_fixed_query_mask(self.study.fixed_query_mask)
            .with_execution(self.study.execution))
    }
}
