//! Edge-list text format.
//!
//! ```text
//! # comment
//! N T
//! u v t [weight]
//! ```
//!
//! Vertex ids are 0-indexed, timesteps 1-indexed. Duplicate `(u, v, t)`
//! records sum their weights; the default weight is 1.0.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::DynamicGraph;
use crate::error::{Error, Result};
use crate::tensor::{Entry, SparseMatrix};

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn field<T: std::str::FromStr>(tok: Option<&str>, what: &str, line: usize) -> Result<T> {
    let tok = tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| parse_err(line, format!("invalid {what} `{tok}`")))
}

/// Parses an edge list from any buffered reader.
pub fn read_edge_list(reader: impl BufRead) -> Result<DynamicGraph> {
    let mut header: Option<(usize, usize)> = None;
    let mut triplets: Vec<Vec<Entry>> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| parse_err(lineno, e.to_string()))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut toks = trimmed.split_whitespace();
        match header {
            None => {
                let n: usize = field(toks.next(), "vertex count N", lineno)?;
                let t: usize = field(toks.next(), "timestep count T", lineno)?;
                if toks.next().is_some() {
                    return Err(parse_err(lineno, "header must be `N T`"));
                }
                if t == 0 {
                    return Err(parse_err(lineno, "T must be at least 1"));
                }
                if n > u32::MAX as usize {
                    return Err(parse_err(lineno, "N exceeds the u32 index range"));
                }
                header = Some((n, t));
                triplets = vec![Vec::new(); t];
            }
            Some((n, t_max)) => {
                let u: usize = field(toks.next(), "source vertex", lineno)?;
                let v: usize = field(toks.next(), "target vertex", lineno)?;
                let t: usize = field(toks.next(), "timestep", lineno)?;
                let w: f64 = match toks.next() {
                    Some(tok) => field(Some(tok), "weight", lineno)?,
                    None => 1.0,
                };
                if toks.next().is_some() {
                    return Err(parse_err(lineno, "too many fields"));
                }
                if u >= n || v >= n {
                    return Err(parse_err(
                        lineno,
                        format!("vertex out of range: ({u}, {v}) with N = {n}"),
                    ));
                }
                if t == 0 || t > t_max {
                    return Err(parse_err(
                        lineno,
                        format!("timestep {t} outside 1..={t_max}"),
                    ));
                }
                if !w.is_finite() {
                    return Err(parse_err(lineno, "weight is not finite"));
                }
                triplets[t - 1].push(Entry::new(u as u32, v as u32, w));
            }
        }
    }
    let (n, _) = header.ok_or_else(|| parse_err(0, "missing `N T` header"))?;
    let snapshots = triplets
        .into_iter()
        .map(|tr| SparseMatrix::from_triplets(n, tr))
        .collect::<Result<_>>()?;
    DynamicGraph::new(n, snapshots)
}

pub fn load_edge_list(path: impl AsRef<Path>) -> Result<DynamicGraph> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_edge_list(BufReader::new(file))
}

/// Writes `g` in edge-list form, records ordered by timestep then index.
/// Unit weights are omitted.
pub fn write_edge_list(g: &DynamicGraph, mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "{} {}", g.num_vertices(), g.num_timesteps())?;
    for (t, s) in g.snapshots().iter().enumerate() {
        for e in s.entries() {
            if e.value == 1.0 {
                writeln!(out, "{} {} {}", e.row, e.col, t + 1)?;
            } else {
                writeln!(out, "{} {} {} {}", e.row, e.col, t + 1, e.value)?;
            }
        }
    }
    out.flush()
}

pub fn save_edge_list(g: &DynamicGraph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_edge_list(g, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}
