//! Tab-separated node and edge tables.
//!
//! | table       | columns                  |
//! |-------------|--------------------------|
//! | traffic     | `node  c_in  c_out`      |
//! | strengths   | `node  lambda`           |
//! | transitions | `src  dst  p`            |
//! | counts      | `src  dst  count`        |
//! | id map      | `id  name`               |
//!
//! Readers skip blank lines and `#` comments and accept any run of spaces or
//! tabs between fields. Writers emit one tab between fields, no header, and
//! print reals in `{:.16e}` form (17 significant digits, exact round trip).

use std::collections::HashMap;
use std::io::{BufRead, BufWriter, Write};

use thiserror::Error;

use crate::graph::NodeId;
use crate::inference::{
    conserve_flow, ModelError, PartialMarginals, StrengthVector, TrafficMarginals,
};
use crate::simulate::{EdgeCounts, SimulationError};
use crate::transitions::{EdgeTransitionTable, TableError};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Counts(#[from] SimulationError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn malformed(line: usize, message: impl Into<String>) -> FormatError {
    FormatError::Malformed {
        line,
        message: message.into(),
    }
}

/// Yields `(line number, fields)` for every data line.
fn records<R: BufRead>(
    reader: R,
) -> impl Iterator<Item = Result<(usize, Vec<String>), FormatError>> {
    reader
        .lines()
        .enumerate()
        .filter_map(|(idx, line)| match line {
            Err(e) => Some(Err(e.into())),
            Ok(text) => {
                let t = text.trim();
                if t.is_empty() || t.starts_with('#') {
                    None
                } else {
                    Some(Ok((
                        idx + 1,
                        t.split_whitespace().map(str::to_owned).collect(),
                    )))
                }
            }
        })
}

fn expect_fields(fields: &[String], count: usize, line: usize) -> Result<(), FormatError> {
    if fields.len() != count {
        return Err(malformed(
            line,
            format!("expected {count} fields, found {}", fields.len()),
        ));
    }
    Ok(())
}

fn parse_node(raw: &str, n: usize, line: usize) -> Result<usize, FormatError> {
    let id: usize = raw
        .parse()
        .map_err(|_| malformed(line, format!("invalid node id {raw:?}")))?;
    if id >= n {
        return Err(malformed(
            line,
            format!("unknown node {id} (graph has {n} nodes)"),
        ));
    }
    Ok(id)
}

fn parse_real(raw: &str, what: &str, line: usize) -> Result<f64, FormatError> {
    raw.parse()
        .map_err(|_| malformed(line, format!("invalid {what} {raw:?}")))
}

/// Reads a traffic table for `n` nodes. Unlisted nodes get zero counts.
///
/// With `allow_conserve`, a `-` in every `c_in` cell (or every `c_out`
/// cell) marks that side as unobserved and it is filled in from the other
/// side. Without it, `-` is a parse error.
pub fn read_traffic<R: BufRead>(
    reader: R,
    n: usize,
    allow_conserve: bool,
) -> Result<TrafficMarginals, FormatError> {
    let mut c_in = vec![0.0; n];
    let mut c_out = vec![0.0; n];
    let mut seen = vec![false; n];
    let (mut in_missing, mut out_missing, mut rows) = (0usize, 0usize, 0usize);
    for rec in records(reader) {
        let (line, f) = rec?;
        expect_fields(&f, 3, line)?;
        let node = parse_node(&f[0], n, line)?;
        if std::mem::replace(&mut seen[node], true) {
            return Err(malformed(line, format!("node {node} listed twice")));
        }
        rows += 1;
        for (cell, target, missing, what) in [
            (&f[1], &mut c_in, &mut in_missing, "c_in"),
            (&f[2], &mut c_out, &mut out_missing, "c_out"),
        ] {
            if cell == "-" {
                if !allow_conserve {
                    return Err(malformed(
                        line,
                        format!("{what} is '-' but flow conservation is not enabled"),
                    ));
                }
                *missing += 1;
            } else {
                target[node] = parse_real(cell, what, line)?;
            }
        }
    }
    match (in_missing, out_missing) {
        (0, 0) => Ok(TrafficMarginals::new(c_in, c_out)?),
        (k, 0) if k == rows => Ok(conserve_flow(PartialMarginals {
            c_in: None,
            c_out: Some(c_out),
        })?),
        (0, k) if k == rows => Ok(conserve_flow(PartialMarginals {
            c_in: Some(c_in),
            c_out: None,
        })?),
        _ => Err(malformed(0, "'-' must fill an entire column")),
    }
}

pub fn write_traffic<W: Write>(t: &TrafficMarginals, out: W) -> std::io::Result<()> {
    let mut out = BufWriter::new(out);
    for (i, (a, b)) in t.c_in().iter().zip(t.c_out()).enumerate() {
        writeln!(out, "{i}\t{a}\t{b}")?;
    }
    out.flush()
}

/// Reads a strength table that lists every node of `0..n` exactly once.
pub fn read_strengths<R: BufRead>(reader: R, n: usize) -> Result<StrengthVector, FormatError> {
    let mut values = vec![f64::NAN; n];
    for rec in records(reader) {
        let (line, f) = rec?;
        expect_fields(&f, 2, line)?;
        let node = parse_node(&f[0], n, line)?;
        if !values[node].is_nan() {
            return Err(malformed(line, format!("node {node} listed twice")));
        }
        values[node] = parse_real(&f[1], "strength", line)?;
    }
    if let Some(i) = values.iter().position(|v| v.is_nan()) {
        return Err(malformed(0, format!("no strength for node {i}")));
    }
    Ok(StrengthVector::new(values)?)
}

pub fn write_strengths<W: Write>(lam: &StrengthVector, out: W) -> std::io::Result<()> {
    let mut out = BufWriter::new(out);
    for (i, v) in lam.as_slice().iter().enumerate() {
        writeln!(out, "{i}\t{v:.16e}")?;
    }
    out.flush()
}

pub fn read_transitions<R: BufRead>(
    reader: R,
    n: usize,
) -> Result<EdgeTransitionTable, FormatError> {
    let mut triples = Vec::new();
    for rec in records(reader) {
        let (line, f) = rec?;
        expect_fields(&f, 3, line)?;
        let s = parse_node(&f[0], n, line)? as NodeId;
        let d = parse_node(&f[1], n, line)? as NodeId;
        triples.push((s, d, parse_real(&f[2], "probability", line)?));
    }
    Ok(EdgeTransitionTable::from_triples(n, triples)?)
}

pub fn write_transitions<W: Write>(table: &EdgeTransitionTable, out: W) -> std::io::Result<()> {
    let mut out = BufWriter::new(out);
    for (s, d, p) in table.iter() {
        writeln!(out, "{s}\t{d}\t{p:.16e}")?;
    }
    out.flush()
}

pub fn read_counts<R: BufRead>(reader: R, n: usize) -> Result<EdgeCounts, FormatError> {
    let mut entries = Vec::new();
    for rec in records(reader) {
        let (line, f) = rec?;
        expect_fields(&f, 3, line)?;
        let s = parse_node(&f[0], n, line)? as NodeId;
        let d = parse_node(&f[1], n, line)? as NodeId;
        let c: u64 = f[2]
            .parse()
            .map_err(|_| malformed(line, format!("invalid count {:?}", f[2])))?;
        entries.push((s, d, c));
    }
    Ok(EdgeCounts::new(n, entries)?)
}

pub fn write_counts<W: Write>(counts: &EdgeCounts, out: W) -> std::io::Result<()> {
    let mut out = BufWriter::new(out);
    for &(s, d, c) in counts.entries() {
        writeln!(out, "{s}\t{d}\t{c}")?;
    }
    out.flush()
}

/// Bijection between external string ids and dense ids, in first-seen order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IdMap {
    names: Vec<String>,
    index: HashMap<String, NodeId>,
}

impl IdMap {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Dense id for `name`, allocating the next one if unseen.
    pub fn intern(&mut self, name: &str) -> NodeId {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len() as NodeId;
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), id);
        id
    }

    pub fn id(&self, name: &str) -> Option<NodeId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: NodeId) -> Option<&str> {
        self.names.get(id as usize).map(String::as_str)
    }

    pub fn read<R: BufRead>(reader: R) -> Result<IdMap, FormatError> {
        let mut map = IdMap::default();
        for rec in records(reader) {
            let (line, f) = rec?;
            expect_fields(&f, 2, line)?;
            let id: usize = f[0]
                .parse()
                .map_err(|_| malformed(line, format!("invalid id {:?}", f[0])))?;
            if id != map.len() {
                return Err(malformed(
                    line,
                    format!("ids must be listed as 0, 1, 2, ...; found {id}"),
                ));
            }
            if map.index.contains_key(&f[1]) {
                return Err(malformed(line, format!("name {:?} listed twice", f[1])));
            }
            map.intern(&f[1]);
        }
        Ok(map)
    }

    pub fn write<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut out = BufWriter::new(out);
        for (i, name) in self.names.iter().enumerate() {
            writeln!(out, "{i}\t{name}")?;
        }
        out.flush()
    }
}

/// Rewrites the first `columns` fields of every data line through `f`,
/// keeping the remaining fields verbatim. Comment and blank lines pass
/// through unchanged.
pub fn rewrite_id_columns<R, W, F>(
    reader: R,
    out: W,
    columns: usize,
    mut f: F,
) -> Result<(), FormatError>
where
    R: BufRead,
    W: Write,
    F: FnMut(&str, usize) -> Result<String, FormatError>,
{
    let mut out = BufWriter::new(out);
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            writeln!(out, "{line}")?;
            continue;
        }
        let fields: Vec<&str> = t.split_whitespace().collect();
        if fields.len() < columns {
            return Err(malformed(
                idx + 1,
                format!("expected at least {columns} fields"),
            ));
        }
        let mut rewritten = Vec::with_capacity(fields.len());
        for (k, field) in fields.iter().enumerate() {
            rewritten.push(if k < columns {
                f(field, idx + 1)?
            } else {
                (*field).to_owned()
            });
        }
        writeln!(out, "{}", rewritten.join("\t"))?;
    }
    out.flush()?;
    Ok(())
}

/// Translates dense ids back to names.
pub fn decode_columns<R: BufRead, W: Write>(
    map: &IdMap,
    reader: R,
    out: W,
    columns: usize,
) -> Result<(), FormatError> {
    rewrite_id_columns(reader, out, columns, |raw, line| {
        let id: NodeId = raw
            .parse()
            .map_err(|_| malformed(line, format!("invalid node id {raw:?}")))?;
        map.name(id)
            .map(str::to_owned)
            .ok_or_else(|| malformed(line, format!("id {id} is not in the map")))
    })
}

/// Translates names to dense ids, allocating ids for unseen names.
pub fn encode_columns<R: BufRead, W: Write>(
    map: &mut IdMap,
    reader: R,
    out: W,
    columns: usize,
) -> Result<(), FormatError> {
    rewrite_id_columns(reader, out, columns, |raw, _| {
        Ok(map.intern(raw).to_string())
    })
}
