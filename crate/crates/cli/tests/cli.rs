use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use seqrec_cli::commands::{read_results, simulate};
use seqrec_cli::{ExperimentConfig, RatingsMatrix};
use seqrec_core::{estimate, PenaltyMap};
use tempfile::TempDir;

const TABLE: &str = "\
user,item_1,item_2,item_3,item_4,item_5,target
Jim,NA,6,7,8,9,NA
James,3,NA,10,NA,5,7
Steve,7,NA,1,NA,6,NA
Mary,NA,7,1,NA,5,6
John,NA,7,NA,NA,3,1
Lucy,3,10,2,7,NA,4
Stan,NA,7,NA,NA,1,NA
Johanna,4,5,NA,8,3,9
";

const BOB: &str = "NA,3,3,4,5";

fn seqrec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seqrec"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn config_text(reveal: &str, responder: &str, d: usize, n_grid: &str, replications: usize) -> String {
    format!(
        r#"[scale]
s = 10.0
d = {d}

[model]
x_max = 2.0
a = 0.6
b = 1.0
delta = 0.1

[reveal]
{reveal}

[responder]
{responder}

[study]
n_grid = {n_grid}
replications = {replications}
master_seed = 11

[study.schedule]
c = 1.0
gamma = 0.4
rounding = "ceil"
"#
    )
}

/// Hand computation over the five users who rated the target: penalty times
/// co-rated cosine against Bob, then the single-neighbour formula.
fn table_oracle() -> f64 {
    let bob = [0.0, 3.0, 3.0, 4.0, 5.0];
    let responders: [([f64; 5], f64); 5] = [
        ([3.0, 0.0, 10.0, 0.0, 5.0], 7.0),
        ([0.0, 7.0, 1.0, 0.0, 5.0], 6.0),
        ([0.0, 7.0, 0.0, 0.0, 3.0], 1.0),
        ([3.0, 10.0, 2.0, 7.0, 0.0], 4.0),
        ([4.0, 5.0, 0.0, 8.0, 3.0], 9.0),
    ];
    let bob_items: Vec<usize> = (0..5).filter(|&j| bob[j] > 0.0).collect();
    let mut best: Option<(f64, f64)> = None;
    for (x, y) in responders {
        let shared: Vec<usize> = bob_items.iter().copied().filter(|&j| x[j] > 0.0).collect();
        let dot: f64 = shared.iter().map(|&j| bob[j] * x[j]).sum();
        let nb: f64 = shared.iter().map(|&j| bob[j] * bob[j]).sum::<f64>().sqrt();
        let nx: f64 = shared.iter().map(|&j| x[j] * x[j]).sum::<f64>().sqrt();
        let score = shared.len() as f64 / bob_items.len() as f64 * dot / (nb * nx);
        let masked: f64 = bob_items.iter().map(|&j| x[j] * x[j]).sum::<f64>().sqrt();
        let bob_norm: f64 = bob.iter().map(|v| v * v).sum::<f64>().sqrt();
        let value = bob_norm * y / masked;
        if best.is_none_or(|(s, _)| score > s) {
            best = Some((score, value));
        }
    }
    best.unwrap().1
}

#[test]
fn predict_matches_table_oracle() {
    let dir = TempDir::new().unwrap();
    let matrix = write(&dir, "table.csv", TABLE);
    let out = seqrec(&[
        "predict",
        s(&matrix),
        "--query",
        BOB,
        "--k",
        "1",
        "--full-precision",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let got: f64 = stdout(&out).trim().parse().unwrap();
    let want = table_oracle();
    assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    // Lucy: sqrt(59) * 4 / sqrt(153)
    assert!((got - 59f64.sqrt() * 4.0 / 153f64.sqrt()).abs() < 1e-12);

    let out = seqrec(&["predict", s(&matrix), "--query", BOB, "--k", "1"]);
    assert_eq!(stdout(&out).trim(), "2.48394");
}

#[test]
fn predict_with_k_above_responders_prints_zero_and_warns() {
    let dir = TempDir::new().unwrap();
    let matrix = write(&dir, "table.csv", TABLE);
    let out = seqrec(&["predict", s(&matrix), "--query", BOB, "--k", "6"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "0");
    assert!(stderr(&out).contains("warning"));
}

#[test]
fn predict_proportional_duplicate() {
    let dir = TempDir::new().unwrap();
    let matrix = write(
        &dir,
        "m.csv",
        "user,item_1,item_2,item_3,target\na,1,2,3,4\nb,5,1,1,9\n",
    );
    let out = seqrec(&[
        "predict",
        s(&matrix),
        "--query",
        "2,4,6",
        "--k",
        "1",
        "--full-precision",
    ]);
    assert_eq!(stdout(&out).trim(), "8");
}

#[test]
fn predict_error_exit_codes() {
    let dir = TempDir::new().unwrap();
    let matrix = write(&dir, "table.csv", TABLE);
    let out = seqrec(&["predict", s(&matrix), "--query", "NA,NA,NA,NA,NA", "--k", "1"]);
    assert_eq!(out.status.code(), Some(1));

    let out = seqrec(&["predict", s(&matrix), "--query", BOB, "--k", "0"]);
    assert_eq!(out.status.code(), Some(1));

    let broken = write(&dir, "broken.csv", &TABLE.replace("Stan,NA,7", "Stan,NA,0"));
    let out = seqrec(&["predict", s(&broken), "--query", BOB, "--k", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 8"), "{}", stderr(&out));

    let out = seqrec(&["predict", s(&matrix), "--query", BOB, "--k", "1", "--psi", "cube"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn simulate_all_at_once_has_no_missing_predictors() {
    let dir = TempDir::new().unwrap();
    let config = write(
        &dir,
        "c.toml",
        &config_text("kind = \"all_at_once\"", "kind = \"all\"", 5, "[20, 40]", 4),
    );
    let out_path = dir.path().join("sim.csv");
    let out = seqrec(&["simulate", "--config", s(&config), "--out", s(&out_path)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let m = RatingsMatrix::read_path(&out_path, 10.0).unwrap();
    assert_eq!(m.rows().len(), 40);
    assert!(m
        .rows()
        .iter()
        .all(|r| r.ratings.iter().all(Option::is_some) && r.target.is_some()));
}

#[test]
fn simulate_incremental_newest_user_rates_four_items() {
    let dir = TempDir::new().unwrap();
    let config = write(
        &dir,
        "c.toml",
        &config_text(
            "kind = \"incremental_4_plus_1\"",
            "kind = \"bernoulli_growth\"\np = 0.5",
            8,
            "[30, 60]",
            4,
        ),
    );
    let out_path = dir.path().join("sim.csv");
    assert!(
        seqrec(&["simulate", "--config", s(&config), "--out", s(&out_path)])
            .status
            .success()
    );
    let m = RatingsMatrix::read_path(&out_path, 10.0).unwrap();
    let rated = |i: usize| m.rows()[i].ratings.iter().filter(|v| v.is_some()).count();
    assert_eq!(rated(59), 4);
    assert_eq!(rated(58), 5);
    assert_eq!(rated(0), 8);
    assert!(m.rows().iter().any(|r| r.target.is_none()));
}

#[test]
fn simulate_is_byte_identical_and_seed_sensitive() {
    let dir = TempDir::new().unwrap();
    let config = write(
        &dir,
        "c.toml",
        &config_text(
            "kind = \"incremental_4_plus_1\"",
            "kind = \"bernoulli_growth\"\np = 0.5",
            8,
            "[30, 60]",
            4,
        ),
    );
    let paths: Vec<PathBuf> = (0..3).map(|i| dir.path().join(format!("sim{i}.csv"))).collect();
    seqrec(&["simulate", "--config", s(&config), "--out", s(&paths[0])]);
    seqrec(&["simulate", "--config", s(&config), "--out", s(&paths[1])]);
    seqrec(&[
        "simulate",
        "--config",
        s(&config),
        "--out",
        s(&paths[2]),
        "--seed",
        "12",
    ]);
    let bytes: Vec<Vec<u8>> = paths.iter().map(|p| fs::read(p).unwrap()).collect();
    assert_eq!(bytes[0], bytes[1]);
    assert_ne!(bytes[0], bytes[2]);
}

#[test]
fn simulate_round_trip_reproduces_predictions_bit_exactly() {
    let dir = TempDir::new().unwrap();
    let text = config_text(
        "kind = \"incremental_4_plus_1\"",
        "kind = \"bernoulli_growth\"\np = 0.7",
        8,
        "[50, 300]",
        4,
    );
    let config_path = write(&dir, "c.toml", &text);
    let out_path = dir.path().join("sim.csv");
    assert!(
        seqrec(&["simulate", "--config", s(&config_path), "--out", s(&out_path)])
            .status
            .success()
    );

    let config: ExperimentConfig = text.parse().unwrap();
    let (query, snapshot) = simulate(&config.experiment().unwrap(), config.max_n()).unwrap();
    let query_arg: String = query
        .ratings()
        .entries()
        .iter()
        .map(|&v| if v == 0.0 { "NA".to_string() } else { v.to_string() })
        .collect::<Vec<_>>()
        .join(",");
    for k in [1usize, 3, 12] {
        for (psi, name) in [(PenaltyMap::Identity, "identity"), (PenaltyMap::Sqrt, "sqrt")] {
            let in_memory = estimate(&query, &snapshot, k, psi).unwrap();
            let out = seqrec(&[
                "predict",
                s(&out_path),
                "--query",
                &query_arg,
                "--k",
                &k.to_string(),
                "--psi",
                name,
                "--full-precision",
            ]);
            assert!(out.status.success(), "{}", stderr(&out));
            let printed: f64 = stdout(&out).trim().parse().unwrap();
            assert_eq!(printed.to_bits(), in_memory.to_bits(), "k={k} psi={name}");
            assert!(in_memory > 0.0);
        }
    }
}

#[test]
fn converge_two_point_grid_and_ratefit_agree() {
    let dir = TempDir::new().unwrap();
    let config = write(
        &dir,
        "c.toml",
        &config_text("kind = \"all_at_once\"", "kind = \"all\"", 5, "[50, 200]", 20),
    );
    let results = dir.path().join("res.csv");
    let out = seqrec(&[
        "converge",
        "--config",
        s(&config),
        "--out",
        s(&results),
        "--metric",
        "l1",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(&results).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,k,replications,mean_abs_err,std_err");
    assert_eq!(lines.len(), 4);
    let comment = lines[3].strip_prefix("# ").expect("trailing fit comment");

    let rows = read_results(text.as_bytes()).unwrap();
    let exact = (rows[1].mean_abs_err / rows[0].mean_abs_err).ln() / (200f64 / 50.0).ln();
    let fit = |line: &str, key: &str| -> f64 {
        line.split_whitespace()
            .find_map(|kv| kv.strip_prefix(key))
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!((fit(comment, "slope=") - exact).abs() < 1e-12);
    assert_eq!(fit(comment, "r2="), 1.0);

    let out = seqrec(&["ratefit", s(&results)]);
    assert!(out.status.success());
    let printed = stdout(&out);
    for key in ["slope=", "intercept=", "r2="] {
        assert!((fit(&printed, key) - fit(comment, key)).abs() <= 1e-12, "{key}");
    }
}

#[test]
fn ratefit_exact_power_law() {
    let dir = TempDir::new().unwrap();
    let rows: String = [10usize, 100, 1000]
        .iter()
        .map(|&n| format!("{n},1,10,{},0.01\n", 3.0 * (n as f64).powf(-0.25)))
        .collect();
    let path = write(
        &dir,
        "r.csv",
        &format!("n,k,replications,mean_abs_err,std_err\n{rows}"),
    );
    let out = seqrec(&["ratefit", s(&path)]);
    let text = stdout(&out);
    let slope: f64 = text
        .split_whitespace()
        .next()
        .unwrap()
        .strip_prefix("slope=")
        .unwrap()
        .parse()
        .unwrap();
    assert!((slope + 0.25).abs() < 1e-12, "{text}");
}

#[test]
fn ratefit_empty_file_fails() {
    let dir = TempDir::new().unwrap();
    let path = write(&dir, "empty.csv", "");
    let out = seqrec(&["ratefit", s(&path)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn converge_infeasible_model_fails_before_writing() {
    let dir = TempDir::new().unwrap();
    let text = config_text("kind = \"all_at_once\"", "kind = \"all\"", 5, "[50, 200]", 20)
        .replace("a = 0.6", "a = 12.0");
    let config = write(&dir, "c.toml", &text);
    let results = dir.path().join("res.csv");
    let out = seqrec(&["converge", "--config", s(&config), "--out", s(&results)]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    assert!(stderr(&out).contains("model"), "{}", stderr(&out));
    assert!(!results.exists());
}

#[test]
fn bad_config_field_and_missing_subcommand_are_usage_errors() {
    let dir = TempDir::new().unwrap();
    let text = config_text("kind = \"all_at_once\"", "kind = \"all\"", 5, "[50, 200]", 20)
        .replace("[study]", "[study]\nbogus = 1");
    let config = write(&dir, "c.toml", &text);
    let out = seqrec(&[
        "converge",
        "--config",
        s(&config),
        "--out",
        s(&dir.path().join("x.csv")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("bogus"), "{}", stderr(&out));
    assert_eq!(seqrec(&[]).status.code(), Some(1));
    assert_eq!(seqrec(&["--help"]).status.code(), Some(0));
}
