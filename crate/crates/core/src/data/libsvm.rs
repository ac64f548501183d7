use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::SparseVector;
use crate::problem::{Dataset, Label, Sample};
use crate::Scalar;

fn parse_label(tok: &str, line: usize) -> Result<(Label, u64)> {
    let raw: f64 = tok.parse().map_err(|_| Error::Parse {
        line,
        reason: format!("label {tok:?} is not a number"),
    })?;
    if !raw.is_finite() {
        return Err(Error::Parse {
            line,
            reason: format!("label {tok:?} is not finite"),
        });
    }
    let label = if raw > 0.0 {
        Label::Positive
    } else if raw == 0.0 || raw == -1.0 {
        Label::Negative
    } else {
        return Err(Error::Parse {
            line,
            reason: format!("label {tok:?} is not binary (expected 0/-1 or a positive value)"),
        });
    };
    Ok((label, (raw + 0.0).to_bits()))
}

/// Parses LIBSVM text: `label idx:val idx:val ...` with 1-based, strictly
/// ascending indices. Labels `0`/`-1` map to `Negative`, positive labels to
/// `Positive`; more than two distinct raw labels is rejected. The dimension is
/// the largest index seen, or `expected_dim` if that is larger.
pub fn parse_libsvm<T: Scalar, R: BufRead>(reader: R, expected_dim: Option<usize>) -> Result<Dataset<T>> {
    let mut rows: Vec<(Label, Vec<usize>, Vec<T>)> = Vec::new();
    let mut raw_labels = BTreeSet::new();
    let mut max_index = 0usize;

    for (k, line) in reader.lines().enumerate() {
        let lineno = k + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            reason: e.to_string(),
        })?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut toks = content.split_whitespace();
        let (label, raw) = parse_label(toks.next().expect("nonempty line"), lineno)?;
        raw_labels.insert(raw);
        if raw_labels.len() > 2 {
            return Err(Error::Parse {
                line: lineno,
                reason: "more than two distinct labels; only binary data is supported".into(),
            });
        }
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for tok in toks {
            let (i, v) = tok.split_once(':').ok_or_else(|| Error::Parse {
                line: lineno,
                reason: format!("feature {tok:?} is not idx:val"),
            })?;
            let idx: usize = i.parse().map_err(|_| Error::Parse {
                line: lineno,
                reason: format!("index {i:?} is not a positive integer"),
            })?;
            if idx < 1 {
                return Err(Error::Parse {
                    line: lineno,
                    reason: "indices are 1-based; got 0".into(),
                });
            }
            if indices.last().is_some_and(|&last| idx - 1 <= last) {
                return Err(Error::Parse {
                    line: lineno,
                    reason: format!("index {idx} is not strictly ascending"),
                });
            }
            let val: f64 = v.parse().map_err(|_| Error::Parse {
                line: lineno,
                reason: format!("value {v:?} is not a number"),
            })?;
            if !val.is_finite() {
                return Err(Error::Parse {
                    line: lineno,
                    reason: format!("value {v:?} is not finite"),
                });
            }
            max_index = max_index.max(idx);
            indices.push(idx - 1);
            values.push(T::lit(val));
        }
        rows.push((label, indices, values));
    }

    let dim = max_index.max(expected_dim.unwrap_or(0));
    let samples = rows
        .into_iter()
        .map(|(label, idx, val)| Ok(Sample::new(SparseVector::new(dim, idx, val)?, label)))
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(samples, dim)
}

pub fn read_libsvm<T: Scalar>(path: impl AsRef<Path>, expected_dim: Option<usize>) -> Result<Dataset<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_libsvm(BufReader::new(file), expected_dim).map_err(|e| e.in_file(path))
}

/// Writes `+1`/`-1` labels and 1-based indices; values use the shortest
/// representation that parses back to the same number.
pub fn write_libsvm<T: Scalar, W: Write>(data: &Dataset<T>, mut out: W) -> std::io::Result<()> {
    for s in data.samples() {
        out.write_all(match s.label {
            Label::Positive => b"+1",
            Label::Negative => b"-1",
        })?;
        for (i, v) in s.features.iter() {
            write!(out, " {}:{}", i + 1, v)?;
        }
        out.write_all(b"\n")?;
    }
    Ok(())
}
