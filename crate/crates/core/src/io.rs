//! Count ingestion and result files.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diagnostics::PredictiveBands;
use crate::error::{Error, Result};
use crate::inference::Draw;
use crate::sampling::{partition_stats, PartitionCounts};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    CountsFile,
    TokenStream,
    EdgeList,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub counts: PartitionCounts,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountFormat {
    /// One positive integer per line.
    Lines,
    /// Header `item,count`, one row per item; repeated items are summed.
    Csv,
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "data".into())
}

fn parse_count(text: &str, line: usize) -> Result<u64> {
    match text.trim().parse::<u64>() {
        Ok(0) => Err(Error::Parse {
            line,
            message: "count must be positive".into(),
        }),
        Ok(v) => Ok(v),
        Err(_) => Err(Error::Parse {
            line,
            message: format!("expected a positive integer, got {:?}", text.trim()),
        }),
    }
}

fn non_empty(counts: Vec<u64>, path: &Path) -> Result<PartitionCounts> {
    if counts.is_empty() {
        return Err(Error::validation(format!(
            "{} contains no counts",
            path.display()
        )));
    }
    PartitionCounts::new(counts)
}

pub fn load_counts(path: &Path, format: CountFormat) -> Result<Dataset> {
    let counts = match format {
        CountFormat::Lines => {
            let reader = BufReader::new(File::open(path)?);
            let mut out = Vec::new();
            for (i, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                out.push(parse_count(&line, i + 1)?);
            }
            out
        }
        CountFormat::Csv => {
            let mut rdr = csv::ReaderBuilder::new()
                .trim(csv::Trim::All)
                .from_path(path)?;
            let headers = rdr.headers()?.clone();
            if headers.len() < 2 || &headers[0] != "item" || &headers[1] != "count" {
                return Err(Error::Parse {
                    line: 1,
                    message: "expected header `item,count`".into(),
                });
            }
            let mut totals: HashMap<String, u64> = HashMap::new();
            for rec in rdr.records() {
                let rec = rec?;
                let line = rec.position().map_or(0, |p| p.line() as usize);
                if rec.len() < 2 {
                    return Err(Error::Parse {
                        line,
                        message: "expected two fields".into(),
                    });
                }
                let c = parse_count(&rec[1], line)?;
                *totals.entry(rec[0].to_string()).or_insert(0) += c;
            }
            totals.into_values().collect()
        }
    };
    Ok(Dataset {
        name: dataset_name(path),
        counts: non_empty(counts, path)?,
        provenance: Provenance::CountsFile,
    })
}

/// Out-degree multiset of a whitespace-separated `src dst` edge list.
/// Lines starting with `#` are skipped; self-loops and repeated edges count.
pub fn load_edge_list(path: &Path) -> Result<Dataset> {
    let reader = BufReader::new(File::open(path)?);
    let mut degree: HashMap<String, u64> = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let mut parts = t.split_whitespace();
        match (parts.next(), parts.next(), parts.next()) {
            (Some(src), Some(_), None) => *degree.entry(src.to_string()).or_insert(0) += 1,
            _ => {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("expected `src dst`, got {t:?}"),
                })
            }
        }
    }
    Ok(Dataset {
        name: dataset_name(path),
        counts: non_empty(degree.into_values().collect(), path)?,
        provenance: Provenance::EdgeList,
    })
}

/// Occurrence counts of whitespace-separated tokens.
pub fn load_token_stream(path: &Path) -> Result<Dataset> {
    let reader = BufReader::new(File::open(path)?);
    let mut freq: HashMap<String, u64> = HashMap::new();
    for line in reader.lines() {
        for tok in line?.split_whitespace() {
            *freq.entry(tok.to_string()).or_insert(0) += 1;
        }
    }
    Ok(Dataset {
        name: dataset_name(path),
        counts: non_empty(freq.into_values().collect(), path)?,
        provenance: Provenance::TokenStream,
    })
}

/// Counts as `item,count` with items named by rank.
pub fn write_counts_csv(counts: &PartitionCounts, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["item", "count"])?;
    for (k, m) in counts.counts().iter().enumerate() {
        w.write_record([(k + 1).to_string(), m.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `size,clusters,proportion`.
pub fn write_spectrum_csv(counts: &PartitionCounts, path: &Path) -> Result<()> {
    let s = partition_stats(counts);
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["size", "clusters", "proportion"])?;
    for (j, c) in &s.entries {
        w.write_record([
            j.to_string(),
            c.to_string(),
            (*c as f64 / s.k_n as f64).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `rank,count,frequency`.
pub fn write_rank_csv(counts: &PartitionCounts, path: &Path) -> Result<()> {
    let n = counts.n() as f64;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["rank", "count", "frequency"])?;
    for (k, m) in counts.counts().iter().enumerate() {
        w.write_record([
            (k + 1).to_string(),
            m.to_string(),
            (*m as f64 / n).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Trace with columns `iter,eta,sigma,tau,u,log_joint`. Values are written
/// in shortest round-trip form, so re-reading is lossless.
pub fn write_trace_csv(draws: &[Draw], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["iter", "eta", "sigma", "tau", "u", "log_joint"])?;
    for d in draws {
        w.write_record([
            d.iter.to_string(),
            d.eta.to_string(),
            d.sigma.to_string(),
            d.tau.to_string(),
            d.u.to_string(),
            d.log_joint.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<Draw>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let want = ["iter", "eta", "sigma", "tau", "u", "log_joint"];
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(want.iter().copied()) {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header {}", want.join(",")),
        });
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let f = |i: usize| -> Result<f64> {
            rec[i].parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("bad number {:?} in column {}", &rec[i], want[i]),
            })
        };
        out.push(Draw {
            iter: rec[0].parse().map_err(|_| Error::Parse {
                line,
                message: format!("bad iteration {:?}", &rec[0]),
            })?,
            eta: f(1)?,
            sigma: f(2)?,
            tau: f(3)?,
            u: f(4)?,
            log_joint: f(5)?,
        });
    }
    Ok(out)
}

/// Bands as `axis,lower,median,upper`.
pub fn write_bands_csv(bands: &PredictiveBands, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["axis", "lower", "median", "upper"])?;
    for i in 0..bands.len() {
        w.write_record([
            bands.axis[i].to_string(),
            bands.lower[i].to_string(),
            bands.median[i].to_string(),
            bands.upper[i].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let r = BufReader::new(File::open(path)?);
    serde_json::from_reader(r).map_err(|e| Error::Parse {
        line: e.line(),
        message: e.to_string(),
    })
}
