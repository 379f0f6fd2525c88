//! Edge-list TSV and the `CRNK1` binary cache.
//!
//! TSV: one edge per line, `src<TAB>dst[<TAB>weight]`. Any run of spaces or
//! tabs separates fields. Blank lines and lines starting with `#` are skipped.
//!
//! Binary cache: the 5 magic bytes `CRNK1`, then little-endian `u64 n`,
//! `u64 m`, then `m` records of `(u64 src, u64 dst, f64 weight)`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{DirectedGraph, GraphError, NodeId};

pub const CACHE_MAGIC: &[u8; 5] = b"CRNK1";

/// Options for [`load_edge_list`].
#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Keep the third column as edge weights. Lines without one get 1.0.
    pub weighted: bool,
    /// Node count override; must exceed every id in the file.
    pub nodes: Option<usize>,
}

pub fn load_edge_list(path: &Path, opts: LoadOptions) -> Result<DirectedGraph, GraphError> {
    let file = File::open(path)?;
    parse_edge_list(BufReader::new(file), opts)
}

/// Parses an edge list from any buffered reader.
///
/// A weight column, when present, is always validated even if `weighted` is
/// off; an unweighted load then simply discards it.
pub fn parse_edge_list<R: BufRead>(
    reader: R,
    opts: LoadOptions,
) -> Result<DirectedGraph, GraphError> {
    let mut edges: Vec<(NodeId, NodeId)> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    let mut max_id: Option<u64> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = text.split_whitespace().collect();
        if fields.len() < 2 || fields.len() > 3 {
            return Err(malformed(
                lineno,
                format!("expected 2 or 3 fields, found {}", fields.len()),
            ));
        }
        let src = parse_id(fields[0], lineno)?;
        let dst = parse_id(fields[1], lineno)?;
        let weight = match fields.get(2) {
            Some(raw) => {
                let w: f64 = raw
                    .parse()
                    .map_err(|_| malformed(lineno, format!("invalid weight {raw:?}")))?;
                if !(w > 0.0 && w.is_finite()) {
                    return Err(GraphError::NonPositiveWeight {
                        src,
                        dst,
                        weight: w,
                    });
                }
                w
            }
            None => 1.0,
        };
        max_id = Some(max_id.map_or(src.max(dst), |m| m.max(src).max(dst)));
        edges.push((src as NodeId, dst as NodeId));
        weights.push(weight);
    }
    let n = node_count(max_id, opts.nodes)?;
    DirectedGraph::new(n, edges, opts.weighted.then_some(weights))
}

fn node_count(max_id: Option<u64>, nodes: Option<usize>) -> Result<usize, GraphError> {
    let implied = max_id.map_or(0, |m| m + 1);
    match nodes {
        Some(n) if (n as u64) < implied => Err(GraphError::NodeOutOfRange {
            src: max_id.unwrap_or(0),
            dst: max_id.unwrap_or(0),
            n,
        }),
        Some(n) => Ok(n),
        None => {
            if implied > 1u64 << 32 {
                return Err(GraphError::TooManyNodes(implied));
            }
            Ok(implied as usize)
        }
    }
}

fn parse_id(raw: &str, line: usize) -> Result<u64, GraphError> {
    let id: u64 = raw
        .parse()
        .map_err(|_| malformed(line, format!("invalid node id {raw:?}")))?;
    if id > u64::from(NodeId::MAX) {
        return Err(GraphError::TooManyNodes(id + 1));
    }
    Ok(id)
}

fn malformed(line: usize, message: String) -> GraphError {
    GraphError::Malformed { line, message }
}

/// Writes the edge list as TSV in storage order. Weights are written only
/// for weighted graphs, with full round-trip precision.
pub fn write_edge_list<W: Write>(g: &DirectedGraph, out: W) -> std::io::Result<()> {
    let mut out = BufWriter::new(out);
    for (s, d, w) in g.iter() {
        if g.is_weighted() {
            writeln!(out, "{s}\t{d}\t{w:?}")?;
        } else {
            writeln!(out, "{s}\t{d}")?;
        }
    }
    out.flush()
}

pub fn write_binary_cache<W: Write>(g: &DirectedGraph, out: W) -> std::io::Result<()> {
    let mut out = BufWriter::new(out);
    out.write_all(CACHE_MAGIC)?;
    out.write_all(&(g.node_count() as u64).to_le_bytes())?;
    out.write_all(&(g.edge_count() as u64).to_le_bytes())?;
    for (s, d, w) in g.iter() {
        out.write_all(&u64::from(s).to_le_bytes())?;
        out.write_all(&u64::from(d).to_le_bytes())?;
        out.write_all(&w.to_le_bytes())?;
    }
    out.flush()
}

/// Reads a binary cache. The graph comes back unweighted when every stored
/// weight is exactly 1.0.
pub fn read_binary_cache<R: Read>(input: R) -> Result<DirectedGraph, GraphError> {
    let mut input = BufReader::new(input);
    let mut magic = [0u8; 5];
    input
        .read_exact(&mut magic)
        .map_err(|_| GraphError::BadCache("truncated header".into()))?;
    if &magic != CACHE_MAGIC {
        return Err(GraphError::BadCache("bad magic bytes".into()));
    }
    let n = read_u64(&mut input)?;
    let m = read_u64(&mut input)?;
    if n > 1u64 << 32 {
        return Err(GraphError::TooManyNodes(n));
    }
    let mut edges = Vec::with_capacity(m.min(1 << 24) as usize);
    let mut weights = Vec::with_capacity(m.min(1 << 24) as usize);
    for _ in 0..m {
        let src = read_u64(&mut input)?;
        let dst = read_u64(&mut input)?;
        let w = f64::from_bits(read_u64(&mut input)?);
        if src >= n || dst >= n {
            return Err(GraphError::NodeOutOfRange {
                src,
                dst,
                n: n as usize,
            });
        }
        if !(w > 0.0 && w.is_finite()) {
            return Err(GraphError::NonPositiveWeight {
                src,
                dst,
                weight: w,
            });
        }
        edges.push((src as NodeId, dst as NodeId));
        weights.push(w);
    }
    let mut rest = [0u8; 1];
    if input.read(&mut rest)? != 0 {
        return Err(GraphError::BadCache(
            "trailing bytes after last record".into(),
        ));
    }
    let weights = if weights.iter().all(|&w| w == 1.0) {
        None
    } else {
        Some(weights)
    };
    DirectedGraph::new(n as usize, edges, weights)
}

fn read_u64<R: Read>(input: &mut R) -> Result<u64, GraphError> {
    let mut buf = [0u8; 8];
    input
        .read_exact(&mut buf)
        .map_err(|_| GraphError::BadCache("truncated record".into()))?;
    Ok(u64::from_le_bytes(buf))
}
