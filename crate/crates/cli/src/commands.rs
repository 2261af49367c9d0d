use std::io::{Read, Write};
use std::path::Path;

use seqrec_core::{
    estimate, fit_rows, ConvergenceResult, ConvergenceRow, DatabaseSnapshot, ErrorMetric, Experiment,
    MultiplicativeModel, PenaltyMap, QueryUser, RateFit, RatingScale, RatingVector,
};

use crate::config::{ExperimentConfig, Psi};
use crate::error::{CliError, CliResult};
use crate::matrix::{parse_cell, RatingsMatrix};

pub const RESULTS_HEADER: [&str; 5] = ["n", "k", "replications", "mean_abs_err", "std_err"];

/// Formats `v` with `digits` significant digits, `%g`-style but without
/// switching to exponent notation.
pub fn format_significant(v: f64, digits: usize) -> String {
    if v == 0.0 || !v.is_finite() {
        return v.to_string();
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (digits as i32 - 1 - magnitude).max(0) as usize;
    let text = format!("{v:.decimals$}");
    let significant = text.trim_start_matches('-').replace('.', "");
    if decimals > 0 && significant.trim_start_matches('0').len() > digits {
        // rounding carried into a new leading digit, e.g. 9.9999996
        return format!("{v:.prec$}", prec = decimals - 1);
    }
    text
}

/// Parses a comma-separated query such as `NA,3,3,4,5`.
pub fn parse_query(values: &str, scale: &RatingScale) -> CliResult<QueryUser> {
    let fields: Vec<&str> = values.split(',').map(str::trim).collect();
    if fields.len() != scale.items() {
        return Err(CliError::usage(format!(
            "--query has {} values, the matrix has {} items",
            fields.len(),
            scale.items()
        )));
    }
    let entries = fields
        .iter()
        .enumerate()
        .map(|(j, f)| {
            parse_cell(f, scale.max_rating())
                .map(|v| v.unwrap_or(0.0))
                .map_err(|e| CliError::usage(format!("--query item_{}: {e}", j + 1)))
        })
        .collect::<CliResult<Vec<_>>>()?;
    if entries.iter().all(|&v| v == 0.0) {
        return Err(CliError::usage("--query needs at least one rated item"));
    }
    let ratings = RatingVector::new(entries, scale).map_err(CliError::usage)?;
    QueryUser::new(ratings, scale).map_err(CliError::usage)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub value: f64,
    pub warning: Option<String>,
}

pub fn predict(
    matrix: &RatingsMatrix,
    query: &QueryUser,
    scale: &RatingScale,
    k: usize,
    psi: PenaltyMap,
) -> CliResult<Prediction> {
    if k == 0 {
        return Err(CliError::usage("--k must be at least 1"));
    }
    let responders = matrix.responder_count();
    if responders < k {
        return Ok(Prediction {
            value: 0.0,
            warning: Some(format!(
                "k = {k} exceeds the {responders} users with a target; predicting 0"
            )),
        });
    }
    let snapshot = matrix.to_snapshot(*scale)?;
    let value = estimate(query, &snapshot, k, psi).map_err(CliError::data)?;
    Ok(Prediction { value, warning: None })
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_predict(
    matrix_path: &Path,
    query: &str,
    k: usize,
    psi: Psi,
    max_rating: f64,
    full_precision: bool,
    out: &mut impl Write,
    diag: &mut impl Write,
) -> CliResult<()> {
    let matrix = RatingsMatrix::read_path(matrix_path, max_rating)?;
    let scale = RatingScale::new(max_rating, matrix.items()).map_err(CliError::usage)?;
    let query = parse_query(query, &scale)?;
    let prediction = predict(&matrix, &query, &scale, k, psi.penalty_map())?;
    if let Some(warning) = &prediction.warning {
        let _ = writeln!(diag, "warning: {warning}");
    }
    let text = if full_precision {
        prediction.value.to_string()
    } else {
        format_significant(prediction.value, 6)
    };
    writeln!(out, "{text}").map_err(CliError::data)
}

/// The database of replication 0 at `n = max(n_grid)`, together with the
/// query user its targets were generated against.
pub fn simulate(
    experiment: &Experiment<MultiplicativeModel>,
    n: usize,
) -> CliResult<(QueryUser, DatabaseSnapshot)> {
    let query = experiment.draw_query(0).map_err(CliError::data)?;
    let snapshot = experiment
        .simulate(0, n, &query)
        .and_then(|s| s.snapshot())
        .map_err(CliError::data)?;
    Ok((query, snapshot))
}

fn load_config(path: &Path, seed: Option<u64>) -> CliResult<ExperimentConfig> {
    let mut config = ExperimentConfig::from_path(path)?;
    if let Some(seed) = seed {
        config.study.master_seed = seed;
    }
    Ok(config)
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    std::fs::write(path, bytes).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

pub fn cmd_simulate(config_path: &Path, out_path: &Path, seed: Option<u64>) -> CliResult<()> {
    let config = load_config(config_path, seed)?;
    let experiment = config.experiment()?;
    let (_, snapshot) = simulate(&experiment, config.max_n())?;
    let mut buf = Vec::new();
    RatingsMatrix::from_snapshot(&snapshot).write(&mut buf)?;
    write_file(out_path, &buf)
}

pub fn format_fit(fit: &RateFit) -> String {
    format!(
        "slope={} intercept={} r2={}",
        fit.slope, fit.intercept, fit.r_squared
    )
}

pub fn write_results(result: &ConvergenceResult, out: impl Write) -> CliResult<()> {
    let write_err = |e: csv::Error| CliError::data(format!("writing results: {e}"));
    let mut csv = csv::Writer::from_writer(out);
    csv.write_record(RESULTS_HEADER).map_err(write_err)?;
    for row in &result.rows {
        csv.write_record([
            row.n.to_string(),
            row.k.to_string(),
            row.replications.to_string(),
            row.mean_abs_err.to_string(),
            row.std_err.to_string(),
        ])
        .map_err(write_err)?;
    }
    let mut out = csv
        .into_inner()
        .map_err(|e| CliError::data(format!("writing results: {e}")))?;
    writeln!(out, "# {}", format_fit(&result.fit)).map_err(CliError::data)
}

pub fn cmd_converge(
    config_path: &Path,
    out_path: &Path,
    seed: Option<u64>,
    metric: Option<ErrorMetric>,
    psi: Option<Psi>,
) -> CliResult<()> {
    let mut config = load_config(config_path, seed)?;
    if let Some(metric) = metric {
        config.study.metric = metric;
    }
    if let Some(psi) = psi {
        config.study.psi = psi;
    }
    let experiment = config.experiment()?;
    let schedule = config.schedule()?;
    let result = experiment
        .convergence_study(&config.study.n_grid, &schedule, config.study.replications)
        .map_err(CliError::data)?;
    let mut buf = Vec::new();
    write_results(&result, &mut buf)?;
    write_file(out_path, &buf)
}

/// Reads a results file; `#` lines are ignored.
pub fn read_results(reader: impl Read) -> CliResult<Vec<ConvergenceRow>> {
    let mut csv = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = csv.headers().map_err(CliError::data)?.clone();
    if header.is_empty() {
        return Err(CliError::data("empty results file"));
    }
    if header.iter().ne(RESULTS_HEADER) {
        return Err(CliError::data(format!(
            "line 1: expected header {}",
            RESULTS_HEADER.join(",")
        )));
    }
    let mut rows = Vec::new();
    for record in csv.records() {
        let record = record.map_err(CliError::data)?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |col: usize| {
            CliError::data(format!(
                "line {line}: bad {} '{}'",
                RESULTS_HEADER[col], &record[col]
            ))
        };
        let int = |col: usize| record[col].parse::<usize>().map_err(|_| bad(col));
        let float = |col: usize| record[col].parse::<f64>().map_err(|_| bad(col));
        rows.push(ConvergenceRow {
            n: int(0)?,
            k: int(1)?,
            replications: int(2)?,
            mean_abs_err: float(3)?,
            std_err: float(4)?,
        });
    }
    Ok(rows)
}

pub fn cmd_ratefit(results_path: &Path, out: &mut impl Write) -> CliResult<()> {
    let file = std::fs::File::open(results_path)
        .map_err(|e| CliError::data(format!("{}: {e}", results_path.display())))?;
    let rows = read_results(file)?;
    let fit = fit_rows(&rows).map_err(CliError::data)?;
    writeln!(out, "{}", format_fit(&fit)).map_err(CliError::data)
}
