use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::problem::{Edge, GraphIncidence};
use crate::Scalar;

/// Parses an edge list: one `i j alpha` per line, 0-based feature indices,
/// `i < j`. Blank lines and `#` comments are ignored.
pub fn parse_edges<T: Scalar, R: BufRead>(reader: R, dim: usize) -> Result<GraphIncidence<T>> {
    let mut edges = Vec::new();
    let mut seen = HashSet::new();
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
        let toks: Vec<&str> = content.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(Error::Parse {
                line: lineno,
                reason: format!("expected `i j alpha`, got {} fields", toks.len()),
            });
        }
        let idx = |s: &str| -> Result<usize> {
            s.parse().map_err(|_| Error::Parse {
                line: lineno,
                reason: format!("index {s:?} is not a non-negative integer"),
            })
        };
        let (i, j) = (idx(toks[0])?, idx(toks[1])?);
        let alpha: f64 = toks[2].parse().map_err(|_| Error::Parse {
            line: lineno,
            reason: format!("weight {:?} is not a number", toks[2]),
        })?;
        if i >= j || j >= dim {
            return Err(Error::Parse {
                line: lineno,
                reason: format!("edge ({i}, {j}) needs i < j < {dim}"),
            });
        }
        if alpha == 0.0 || !alpha.is_finite() {
            return Err(Error::Parse {
                line: lineno,
                reason: "weight must be finite and nonzero".into(),
            });
        }
        if !seen.insert((i, j)) {
            return Err(Error::Parse {
                line: lineno,
                reason: format!("duplicate edge ({i}, {j})"),
            });
        }
        edges.push(Edge {
            i,
            j,
            weight: T::lit(alpha),
        });
    }
    GraphIncidence::new(dim, edges)
}

pub fn load_edges<T: Scalar>(path: impl AsRef<Path>, dim: usize) -> Result<GraphIncidence<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_edges(BufReader::new(file), dim).map_err(|e| e.in_file(path))
}

pub fn write_edges<T: Scalar, W: Write>(graph: &GraphIncidence<T>, mut out: W) -> std::io::Result<()> {
    for e in graph.edges() {
        writeln!(out, "{} {} {}", e.i, e.j, e.weight)?;
    }
    Ok(())
}
