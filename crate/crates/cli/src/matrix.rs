//! Ratings matrix files.
//!
//! ```text
//! user,item_1,item_2,item_3,target
//! alice,3,NA,7.5,4
//! bob,NA,2,2,NA
//! ```
//!
//! `NA` is the only missing token. A literal `0` is rejected even though
//! it is the internal encoding of "not rated".

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use seqrec_core::{DatabaseSnapshot, DatabaseUser, RatingScale, RatingVector};

use crate::error::{CliError, CliResult};

pub const MISSING: &str = "NA";

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixRow {
    pub user: String,
    pub ratings: Vec<Option<f64>>,
    pub target: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatingsMatrix {
    items: usize,
    rows: Vec<MatrixRow>,
}

/// Parses one cell. `Ok(None)` for `NA`.
pub fn parse_cell(field: &str, max_rating: f64) -> Result<Option<f64>, String> {
    if field == MISSING {
        return Ok(None);
    }
    let value: f64 = field
        .parse()
        .map_err(|_| format!("'{field}' is neither a number nor {MISSING}"))?;
    if value == 0.0 {
        return Err(format!("0 is not a rating; write {MISSING} for a missing entry"));
    }
    if !(1.0..=max_rating).contains(&value) {
        return Err(format!("rating {field} outside [1, {max_rating}]"));
    }
    Ok(Some(value))
}

fn header_for(items: usize) -> Vec<String> {
    let mut header = Vec::with_capacity(items + 2);
    header.push("user".to_string());
    header.extend((1..=items).map(|j| format!("item_{j}")));
    header.push("target".to_string());
    header
}

impl RatingsMatrix {
    pub fn new(items: usize, rows: Vec<MatrixRow>) -> CliResult<Self> {
        if let Some(row) = rows.iter().find(|r| r.ratings.len() != items) {
            return Err(CliError::data(format!(
                "user {}: {} ratings, expected {items}",
                row.user,
                row.ratings.len()
            )));
        }
        Ok(Self { items, rows })
    }

    pub fn items(&self) -> usize {
        self.items
    }

    pub fn rows(&self) -> &[MatrixRow] {
        &self.rows
    }

    pub fn responder_count(&self) -> usize {
        self.rows.iter().filter(|r| r.target.is_some()).count()
    }

    pub fn read<R: Read>(reader: R, max_rating: f64) -> CliResult<Self> {
        let mut csv = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut records = csv.records();
        let header = match records.next() {
            Some(record) => record.map_err(|e| CliError::data(format!("line 1: {e}")))?,
            None => return Err(CliError::data("empty ratings file")),
        };
        if header.len() < 3 {
            return Err(CliError::data(
                "line 1: header needs user, at least one item, and target",
            ));
        }
        let items = header.len() - 2;
        let expected = header_for(items);
        if let Some((got, want)) = header.iter().zip(&expected).find(|(got, want)| got != want) {
            return Err(CliError::data(format!(
                "line 1: expected column '{want}', found '{got}'"
            )));
        }

        let mut rows = Vec::new();
        for record in records {
            let record = record.map_err(|e| CliError::data(e.to_string()))?;
            let line = record.position().map_or(0, |p| p.line());
            if record.len() != items + 2 {
                return Err(CliError::data(format!(
                    "line {line}: {} fields, expected {}",
                    record.len(),
                    items + 2
                )));
            }
            let cell = |col: usize| {
                parse_cell(&record[col], max_rating)
                    .map_err(|e| CliError::data(format!("line {line}, column {}: {e}", expected[col])))
            };
            let ratings = (1..=items).map(cell).collect::<CliResult<Vec<_>>>()?;
            let target = cell(items + 1)?;
            rows.push(MatrixRow {
                user: record[0].to_string(),
                ratings,
                target,
            });
        }
        Ok(Self { items, rows })
    }

    pub fn read_path(path: &Path, max_rating: f64) -> CliResult<Self> {
        let file = File::open(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        Self::read(file, max_rating).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
    }

    /// Writes the matrix with shortest round-trip formatting of every number.
    pub fn write<W: Write>(&self, writer: W) -> CliResult<()> {
        let mut csv = csv::Writer::from_writer(writer);
        let write_err = |e: csv::Error| CliError::data(format!("writing ratings: {e}"));
        csv.write_record(header_for(self.items)).map_err(write_err)?;
        let fmt = |v: Option<f64>| v.map_or_else(|| MISSING.to_string(), |x| x.to_string());
        for row in &self.rows {
            let mut record = Vec::with_capacity(self.items + 2);
            record.push(row.user.clone());
            record.extend(row.ratings.iter().map(|&v| fmt(v)));
            record.push(fmt(row.target));
            csv.write_record(&record).map_err(write_err)?;
        }
        csv.flush()
            .map_err(|e| CliError::data(format!("writing ratings: {e}")))
    }

    /// Exports a snapshot. Unrevealed ratings and withheld targets become
    /// `NA`; users are named `u1`, `u2`, … in entry order.
    pub fn from_snapshot(db: &DatabaseSnapshot) -> Self {
        let items = db.scale().items();
        let rows = db
            .users()
            .iter()
            .enumerate()
            .map(|(i, u)| MatrixRow {
                user: format!("u{}", i + 1),
                ratings: (0..items)
                    .map(|j| u.reveal.contains(j).then(|| u.raw.get(j)))
                    .collect(),
                target: u.target,
            })
            .collect();
        Self { items, rows }
    }

    /// Each user's revealed set is the set of non-`NA` items.
    pub fn to_snapshot(&self, scale: RatingScale) -> CliResult<DatabaseSnapshot> {
        if scale.items() != self.items {
            return Err(CliError::data(format!(
                "matrix has {} items, scale has {}",
                self.items,
                scale.items()
            )));
        }
        let users = self
            .rows
            .iter()
            .map(|row| {
                let raw = RatingVector::new(row.ratings.iter().map(|v| v.unwrap_or(0.0)).collect(), &scale)
                    .map_err(|e| CliError::data(format!("user {}: {e}", row.user)))?;
                Ok(DatabaseUser {
                    reveal: raw.support(),
                    raw,
                    target: row.target,
                })
            })
            .collect::<CliResult<Vec<_>>>()?;
        DatabaseSnapshot::new(scale, users).map_err(CliError::data)
    }
}
