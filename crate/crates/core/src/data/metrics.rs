use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::Scalar;

pub const METRICS_HEADER: &str =
    "iter,epoch,objective_avg,objective_last,test_error_avg,test_error_last,feasibility_avg,wall_time_s";

/// One evaluation row of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRecord<T> {
    pub iter: usize,
    pub epoch: f64,
    pub objective_avg: T,
    pub objective_last: T,
    pub test_error_avg: T,
    pub test_error_last: T,
    pub feasibility_avg: T,
    pub wall_time_s: f64,
}

/// Writes the fixed header and one row per record. Numbers use the shortest
/// decimal that round-trips, so rewriting parsed output is byte-identical.
pub fn write_metrics_csv<T: Scalar, W: Write>(records: &[MetricsRecord<T>], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{METRICS_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.iter,
            r.epoch,
            r.objective_avg,
            r.objective_last,
            r.test_error_avg,
            r.test_error_last,
            r.feasibility_avg,
            r.wall_time_s
        )?;
    }
    Ok(())
}

pub fn parse_metrics_csv<T: Scalar>(text: &str) -> Result<Vec<MetricsRecord<T>>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == METRICS_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                reason: format!("expected header {METRICS_HEADER:?}"),
            })
        }
    }
    let mut out: Vec<MetricsRecord<T>> = Vec::new();
    for (k, line) in lines.enumerate() {
        let lineno = k + 2;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(Error::Parse {
                line: lineno,
                reason: format!("expected 8 fields, got {}", f.len()),
            });
        }
        let bad = |what: &str| Error::Parse {
            line: lineno,
            reason: format!("bad {what}"),
        };
        let num = |s: &str, what: &str| s.parse::<T>().map_err(|_| bad(what));
        let rec = MetricsRecord {
            iter: f[0].parse().map_err(|_| bad("iter"))?,
            epoch: f[1].parse().map_err(|_| bad("epoch"))?,
            objective_avg: num(f[2], "objective_avg")?,
            objective_last: num(f[3], "objective_last")?,
            test_error_avg: num(f[4], "test_error_avg")?,
            test_error_last: num(f[5], "test_error_last")?,
            feasibility_avg: num(f[6], "feasibility_avg")?,
            wall_time_s: f[7].parse().map_err(|_| bad("wall_time_s"))?,
        };
        if out.last().is_some_and(|p| p.iter >= rec.iter) {
            return Err(Error::Parse {
                line: lineno,
                reason: "iter must be strictly increasing".into(),
            });
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn read_metrics_csv<T: Scalar>(path: impl AsRef<Path>) -> Result<Vec<MetricsRecord<T>>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_metrics_csv(&text).map_err(|e| e.in_file(path))
}
