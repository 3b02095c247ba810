//! Per-round records, running averages and the CSV format.
//!
//! A CSV file holds one or more seeds of a single experiment. The columns are
//! `t,loss,running_avg,seed` followed by the algorithm's extra columns.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub t: u64,
    /// 0-1 symbol error rate of the round.
    pub loss: f64,
    /// `(1/t) Σ_{τ≤t} loss_τ`.
    pub running_avg: f64,
    /// Algorithm-specific values, in column order.
    pub extras: Vec<(String, f64)>,
}

impl RoundRecord {
    pub fn extra(&self, name: &str) -> Option<f64> {
        self.extras.iter().find(|(k, _)| k == name).map(|&(_, v)| v)
    }
}

/// All rounds of one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    pub records: Vec<RoundRecord>,
}

impl SeedRun {
    pub fn final_running_avg(&self) -> Option<f64> {
        self.records.last().map(|r| r.running_avg)
    }
}

/// Prefix means of `losses`.
pub fn running_average(losses: &[f64]) -> Result<Vec<f64>> {
    if losses.is_empty() {
        return Err(Error::invalid("running average of an empty sequence"));
    }
    let mut total = 0.0;
    Ok(losses
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            total += l;
            total / (i + 1) as f64
        })
        .collect())
}

/// Sample mean and standard error of the mean (zero for a single value).
pub fn mean_and_stderr(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::invalid("mean of an empty sample"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Ok((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

const FIXED_COLUMNS: [&str; 4] = ["t", "loss", "running_avg", "seed"];

fn extra_names(runs: &[SeedRun]) -> Result<Vec<String>> {
    let names: Vec<String> = runs
        .iter()
        .flat_map(|r| r.records.first())
        .next()
        .map(|r| r.extras.iter().map(|(k, _)| k.clone()).collect())
        .unwrap_or_default();
    for run in runs {
        for record in &run.records {
            if record.extras.len() != names.len()
                || record.extras.iter().zip(&names).any(|((k, _), n)| k != n)
            {
                return Err(Error::InvalidState(format!(
                    "round {} of seed {} has inconsistent extra columns",
                    record.t, run.seed
                )));
            }
        }
    }
    Ok(names)
}

pub fn write_csv_to<W: Write>(runs: &[SeedRun], writer: W) -> Result<()> {
    let names = extra_names(runs)?;
    let mut out = csv::Writer::from_writer(writer);
    let header: Vec<&str> = FIXED_COLUMNS
        .iter()
        .copied()
        .chain(names.iter().map(String::as_str))
        .collect();
    out.write_record(&header)?;
    for run in runs {
        for r in &run.records {
            let mut row = vec![
                r.t.to_string(),
                r.loss.to_string(),
                r.running_avg.to_string(),
                run.seed.to_string(),
            ];
            row.extend(r.extras.iter().map(|(_, v)| v.to_string()));
            out.write_record(&row)?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_csv(runs: &[SeedRun], path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv_to(runs, std::io::BufWriter::new(file))
}

pub fn read_csv_from<R: Read>(reader: R) -> Result<Vec<SeedRun>> {
    let mut input = csv::Reader::from_reader(reader);
    let header: Vec<String> = input.headers()?.iter().map(str::to_owned).collect();
    if header.len() < FIXED_COLUMNS.len()
        || header.iter().zip(FIXED_COLUMNS).any(|(h, f)| h != f)
    {
        return Err(Error::Config(format!(
            "CSV header must start with {}, got {}",
            FIXED_COLUMNS.join(","),
            header.join(",")
        )));
    }
    let parse = |field: &str, column: &str| -> Result<f64> {
        field
            .parse::<f64>()
            .map_err(|_| Error::Config(format!("column '{column}': cannot parse '{field}'")))
    };
    let mut runs: Vec<SeedRun> = Vec::new();
    for row in input.records() {
        let row = row?;
        let t = row[0]
            .parse::<u64>()
            .map_err(|_| Error::Config(format!("column 't': cannot parse '{}'", &row[0])))?;
        let seed = row[3]
            .parse::<u64>()
            .map_err(|_| Error::Config(format!("column 'seed': cannot parse '{}'", &row[3])))?;
        let extras = header[4..]
            .iter()
            .zip(row.iter().skip(4))
            .map(|(name, field)| Ok((name.clone(), parse(field, name)?)))
            .collect::<Result<Vec<_>>>()?;
        let record = RoundRecord {
            t,
            loss: parse(&row[1], "loss")?,
            running_avg: parse(&row[2], "running_avg")?,
            extras,
        };
        match runs.last_mut() {
            Some(run) if run.seed == seed => run.records.push(record),
            _ => runs.push(SeedRun {
                seed,
                records: vec![record],
            }),
        }
    }
    Ok(runs)
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<SeedRun>> {
    read_csv_from(std::fs::File::open(path)?)
}
