//! Would maximum-likelihood estimation be well-posed for this data?
//!
//! Two checks, from cheap to expensive:
//!
//! * **Comparison hypergraph.** Every nonempty out-neighborhood `N+(k)` is a
//!   hyperedge. If the hypergraph is disconnected, the strengths of one
//!   component can be rescaled freely without changing the likelihood, so
//!   the ML estimate is never unique, whatever the data.
//! * **Comparison graph.** Take any nonnegative edge values `a_ij` that
//!   reproduce the observed marginals (`sum_j a_ji = c_in[i]`,
//!   `sum_j a_ij = c_out[i]`). Add the arc `i -> j` whenever some `k` has
//!   `i, j` in `N+(k)` and `a_kj > 0`. The ML estimate exists and is unique
//!   up to scale iff this graph is strongly connected. When it is not,
//!   there is a split `(S, T)` with no arc from `S` to `T`, and scaling up
//!   every strength in `S` never lowers the likelihood.
//!
//! Such values can be found by Dines' elimination procedure for
//! nonnegative solutions of linear systems; this module instead solves a
//! bipartite max-flow problem (source -> origin copy of `i` with capacity
//! `c_out[i]`, origin `i` -> destination `j` for every edge, destination
//! `j` -> sink with capacity `c_in[j]`) because a failed max-flow comes with
//! a cut that explains the infeasibility. Either way this costs far more
//! than fitting the model.
//!
//! MAP estimation with a Gamma(alpha > 1, beta) prior does not depend on
//! either check: whenever the marginals come from actual transitions the
//! log-posterior has exactly one maximizer. Marginals typed in by hand need
//! not be realizable, though, and then the log-posterior can be unbounded.
//! In log-strength coordinates the only directions of ascent that escape to
//! infinity lower a set `U` of strengths together, and that does not lose
//! posterior mass iff
//!
//! ```text
//! sum_{j : N+(j) ⊆ U} c_out[j] >= sum_{i in U} (c_in[i] + alpha - 1).
//! ```
//!
//! [`map_existence`] rules this out with one more max-flow, where
//! destination capacities are `c_in[i] + alpha - 1`.

mod maxflow;

use std::fmt;

use serde::Serialize;

use crate::graph::{DirectedGraph, NodeId};
use crate::inference::{ModelError, PriorConfig, TrafficMarginals};

pub use maxflow::{Capacity, FlowNetwork};

/// Nonnegative per-edge values consistent with the marginals, indexed like
/// the graph's edge list.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleFlow {
    values: Vec<f64>,
    exact: bool,
}

impl FeasibleFlow {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// True when the flow came from the exact integer solver.
    pub fn is_exact(&self) -> bool {
        self.exact
    }

    /// Largest absolute violation of either marginal equation.
    pub fn max_violation(&self, g: &DirectedGraph, t: &TrafficMarginals) -> f64 {
        let n = g.node_count();
        let (mut inflow, mut outflow) = (vec![0.0; n], vec![0.0; n]);
        for (&(i, j), &a) in g.edges().iter().zip(&self.values) {
            outflow[i as usize] += a;
            inflow[j as usize] += a;
        }
        (0..n)
            .map(|i| {
                (inflow[i] - t.c_in()[i])
                    .abs()
                    .max((outflow[i] - t.c_out()[i]).abs())
            })
            .fold(0.0, f64::max)
    }

    /// Threshold below which `a_ij` counts as zero: 0 for exact flows,
    /// `1e-12 * max(a)` otherwise.
    pub fn default_eps(&self) -> f64 {
        if self.exact {
            0.0
        } else {
            1e-12 * self.values.iter().copied().fold(0.0, f64::max)
        }
    }
}

/// Why no feasible flow exists.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Infeasibility {
    /// Total arrivals differ from total departures.
    GlobalImbalance { total_in: f64, total_out: f64 },
    /// The origins in `origins` must send `demand` units but every edge out
    /// of them ends in `destinations`, which can absorb only `capacity`.
    CapacityCut {
        origins: Vec<NodeId>,
        destinations: Vec<NodeId>,
        demand: f64,
        capacity: f64,
        max_flow: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum FlowOutcome {
    Feasible(FeasibleFlow),
    Infeasible(Infeasibility),
}

/// Connected components of the comparison hypergraph, each sorted, ordered
/// by smallest member. Nodes in no out-neighborhood are singletons.
pub fn hypergraph_components(g: &DirectedGraph) -> Vec<Vec<NodeId>> {
    let n = g.node_count();
    let mut uf = UnionFind::new(n);
    let adj = g.out_adjacency();
    for k in 0..n {
        if let Some((&first, rest)) = adj.neighbors(k).split_first() {
            for &j in rest {
                uf.union(first as usize, j as usize);
            }
        }
    }
    let mut index = vec![usize::MAX; n];
    let mut comps: Vec<Vec<NodeId>> = Vec::new();
    for i in 0..n {
        let r = uf.find(i);
        if index[r] == usize::MAX {
            index[r] = comps.len();
            comps.push(Vec::new());
        }
        comps[index[r]].push(i as NodeId);
    }
    comps
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

/// Finds nonnegative edge values reproducing the marginals, or explains why
/// none exist. All-integer marginals are solved exactly.
pub fn feasible_flow(g: &DirectedGraph, t: &TrafficMarginals) -> Result<FlowOutcome, ModelError> {
    let n = g.node_count();
    if t.len() != n {
        return Err(ModelError::LengthMismatch {
            what: "traffic",
            expected: n,
            found: t.len(),
        });
    }
    let (total_in, total_out) = (t.total_in(), t.total_out());
    let integral = t.is_integral() && total_out < 2f64.powi(62);
    let balanced = if integral {
        total_in == total_out
    } else {
        (total_in - total_out).abs() <= 1e-12 * total_in.max(total_out).max(1.0)
    };
    if !balanced {
        return Ok(FlowOutcome::Infeasible(Infeasibility::GlobalImbalance {
            total_in,
            total_out,
        }));
    }
    if integral {
        let cap = |c: f64| c as i64;
        let unbounded = cap(total_out) + 1;
        Ok(solve(
            g,
            t,
            0i64,
            cap,
            unbounded,
            |f| f as f64,
            |flow| flow == cap(total_out),
        ))
    } else {
        let max_cap = t
            .c_in()
            .iter()
            .chain(t.c_out())
            .copied()
            .fold(0.0, f64::max);
        let eps = 1e-12 * max_cap;
        Ok(solve(
            g,
            t,
            eps,
            |c| c,
            total_out * 2.0 + 1.0,
            |f| f,
            |flow| flow >= total_out - 1e-9 * total_out.max(1.0),
        ))
    }
}

fn solve<C, Cap, Back, Full>(
    g: &DirectedGraph,
    t: &TrafficMarginals,
    eps: C,
    cap: Cap,
    unbounded: C,
    back: Back,
    is_full: Full,
) -> FlowOutcome
where
    C: Capacity,
    Cap: Fn(f64) -> C,
    Back: Fn(C) -> f64,
    Full: Fn(C) -> bool,
{
    let n = g.node_count();
    let (source, sink) = (2 * n, 2 * n + 1);
    let mut net = FlowNetwork::new(2 * n + 2, eps);
    for i in 0..n {
        if t.c_out()[i] > 0.0 {
            net.add_arc(source, i, cap(t.c_out()[i]));
        }
        if t.c_in()[i] > 0.0 {
            net.add_arc(n + i, sink, cap(t.c_in()[i]));
        }
    }
    let middle: Vec<usize> = g
        .edges()
        .iter()
        .map(|&(i, j)| net.add_arc(i as usize, n + j as usize, unbounded))
        .collect();
    let value = net.max_flow(source, sink);
    if is_full(value) {
        let values = middle.iter().map(|&a| back(net.flow(a)).max(0.0)).collect();
        return FlowOutcome::Feasible(FeasibleFlow {
            values,
            exact: eps == C::ZERO,
        });
    }
    let side = net.source_side(source);
    let origins: Vec<NodeId> = (0..n).filter(|&i| side[i]).map(|i| i as NodeId).collect();
    let adj = g.out_adjacency();
    let mut reached = vec![false; n];
    for &i in &origins {
        for &j in adj.neighbors(i as usize) {
            reached[j as usize] = true;
        }
    }
    let destinations: Vec<NodeId> = (0..n)
        .filter(|&j| reached[j])
        .map(|j| j as NodeId)
        .collect();
    let demand = origins.iter().map(|&i| t.c_out()[i as usize]).sum();
    let capacity = destinations.iter().map(|&j| t.c_in()[j as usize]).sum();
    FlowOutcome::Infeasible(Infeasibility::CapacityCut {
        origins,
        destinations,
        demand,
        capacity,
        max_flow: back(value),
    })
}

/// A set of origins whose departures can only land on `destinations`, and
/// whose demand meets or exceeds what those destinations absorb once the
/// prior's `alpha - 1` pseudo-arrivals are added.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverloadedSet {
    pub origins: Vec<NodeId>,
    pub destinations: Vec<NodeId>,
    pub demand: f64,
    pub capacity: f64,
}

/// Outcome of [`map_existence`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapCheck {
    pub exists: bool,
    /// On failure, lowering every strength in `destinations` together
    /// never decreases the log-posterior.
    pub witness: Option<OverloadedSet>,
}

/// Decides whether the log-posterior has a maximizer.
///
/// It does iff every nonempty set `A` of origins with departures satisfies
/// `sum_A c_out < sum_{N+(A)} (c_in + alpha - 1)`. A max-flow with those
/// destination capacities saturates the origins iff the non-strict version
/// holds; equality is then detected from the largest minimum cut.
pub fn map_existence(
    g: &DirectedGraph,
    t: &TrafficMarginals,
    prior: &PriorConfig,
) -> Result<MapCheck, ModelError> {
    crate::inference::check_consistent(g, t)?;
    let n = g.node_count();
    let pseudo = prior.alpha() - 1.0;
    let demand_total = t.total_out();
    let (source, sink) = (2 * n, 2 * n + 1);
    let largest = t
        .c_in()
        .iter()
        .chain(t.c_out())
        .fold(pseudo, |m, &c| m.max(c));
    let mut net = FlowNetwork::new(2 * n + 2, 1e-12 * largest);
    for i in 0..n {
        if t.c_out()[i] > 0.0 {
            net.add_arc(source, i, t.c_out()[i]);
        }
        net.add_arc(n + i, sink, t.c_in()[i] + pseudo);
    }
    let unbounded = 2.0 * demand_total + 1.0;
    for &(i, j) in g.edges() {
        net.add_arc(i as usize, n + j as usize, unbounded);
    }
    let value = net.max_flow(source, sink);
    let short = value < demand_total - 1e-9 * demand_total.max(1.0);
    let in_cut: Vec<bool> = if short {
        net.source_side(source)
    } else {
        net.reaches_sink(sink).into_iter().map(|r| !r).collect()
    };
    let origins: Vec<NodeId> = (0..n)
        .filter(|&i| in_cut[i] && t.c_out()[i] > 0.0)
        .map(|i| i as NodeId)
        .collect();
    if origins.is_empty() {
        return Ok(MapCheck {
            exists: true,
            witness: None,
        });
    }
    let adj = g.out_adjacency();
    let mut reached = vec![false; n];
    for &i in &origins {
        for &j in adj.neighbors(i as usize) {
            reached[j as usize] = true;
        }
    }
    let destinations: Vec<NodeId> = (0..n)
        .filter(|&j| reached[j])
        .map(|j| j as NodeId)
        .collect();
    Ok(MapCheck {
        exists: false,
        witness: Some(OverloadedSet {
            demand: origins.iter().map(|&i| t.c_out()[i as usize]).sum(),
            capacity: destinations
                .iter()
                .map(|&j| t.c_in()[j as usize] + pseudo)
                .sum(),
            origins,
            destinations,
        }),
    })
}

/// Outcome of the strong-connectivity check on the comparison graph.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonGraphCheck {
    pub strongly_connected: bool,
    /// On failure, a split with no comparison arc from `s` to `t`.
    pub witness: Option<Partition>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Partition {
    pub s: Vec<NodeId>,
    pub t: Vec<NodeId>,
}

/// Checks whether the comparison graph induced by `flow` is strongly
/// connected, treating `a <= eps` as zero.
///
/// The comparison graph can have quadratically many arcs, so it is never
/// built. Instead each node `k` gets a hub: `i -> hub(k)` for every
/// `i` in `N+(k)` and `hub(k) -> j` whenever `a_kj > eps`. Original nodes
/// reach each other through hubs exactly when they do in the comparison
/// graph, so one forward and one backward search from node 0 decide strong
/// connectivity.
pub fn comparison_graph_scc(
    g: &DirectedGraph,
    flow: &FeasibleFlow,
    eps: f64,
) -> ComparisonGraphCheck {
    let n = g.node_count();
    if n <= 1 {
        return ComparisonGraphCheck {
            strongly_connected: true,
            witness: None,
        };
    }
    let out = g.out_adjacency();
    let inn = g.in_adjacency();
    let a = flow.values();
    let chosen = |e: usize| a[e] > eps;

    // Forward: orig i -> hub k for each edge (k, i); hub k -> orig j for each
    // chosen edge (k, j).
    let forward = search(n, |node, push| {
        if node < n {
            for &k in inn.neighbors(node) {
                push(n + k as usize);
            }
        } else {
            let k = node - n;
            for (&j, &e) in out.neighbors(k).iter().zip(out.edge_indices(k)) {
                if chosen(e) {
                    push(j as usize);
                }
            }
        }
    });
    if let Some(p) = split(&forward, n, false) {
        return ComparisonGraphCheck {
            strongly_connected: false,
            witness: Some(p),
        };
    }
    let backward = search(n, |node, push| {
        if node < n {
            for (&k, &e) in inn.neighbors(node).iter().zip(inn.edge_indices(node)) {
                if chosen(e) {
                    push(n + k as usize);
                }
            }
        } else {
            for &i in out.neighbors(node - n) {
                push(i as usize);
            }
        }
    });
    let witness = split(&backward, n, true);
    ComparisonGraphCheck {
        strongly_connected: witness.is_none(),
        witness,
    }
}

/// Graph search from node 0 over `2n` states; returns the visited flags.
fn search<F>(n: usize, mut expand: F) -> Vec<bool>
where
    F: FnMut(usize, &mut dyn FnMut(usize)),
{
    let mut seen = vec![false; 2 * n];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        expand(u, &mut |v| {
            if !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        });
    }
    seen
}

/// Nodes reached by a forward search have no arc leaving the reached set,
/// so reached -> rest is arc-free. For a backward search, no arc enters the
/// reached set from outside, so rest -> reached is arc-free.
fn split(seen: &[bool], n: usize, backward: bool) -> Option<Partition> {
    let (reached, rest): (Vec<NodeId>, Vec<NodeId>) =
        (0..n as NodeId).partition(|&i| seen[i as usize]);
    if rest.is_empty() {
        return None;
    }
    Some(if backward {
        Partition {
            s: rest,
            t: reached,
        }
    } else {
        Partition {
            s: reached,
            t: rest,
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Witness {
    DisconnectedHypergraph {
        components: Vec<Vec<NodeId>>,
    },
    Infeasible {
        reason: Infeasibility,
    },
    /// No comparison arc goes from `s` to `t`; scaling up every strength in
    /// `s` never decreases the likelihood.
    NotStronglyConnected(Partition),
    /// The log-posterior has no maximizer.
    NoMapMaximizer(OverloadedSet),
}

/// Combined verdict.
#[derive(Debug, Clone, Serialize)]
pub struct Diagnosis {
    pub hypergraph_connected: bool,
    pub hypergraph_component_count: usize,
    pub flow_feasible: bool,
    pub comparison_graph_strongly_connected: bool,
    pub ml_well_posed: bool,
    /// The log-posterior under the given prior has a maximizer. Always true
    /// for marginals aggregated from real transitions.
    pub map_well_posed: bool,
    pub flow_solver: String,
    pub witness: Vec<Witness>,
    pub notes: Vec<String>,
    #[serde(skip)]
    pub flow: Option<FeasibleFlow>,
}

/// Runs the hypergraph, flow and comparison-graph checks, plus the MAP
/// existence check for `prior`.
pub fn diagnose(
    g: &DirectedGraph,
    t: &TrafficMarginals,
    prior: &PriorConfig,
) -> Result<Diagnosis, ModelError> {
    let comps = hypergraph_components(g);
    let hypergraph_connected = comps.len() <= 1;
    let mut witness = Vec::new();
    if !hypergraph_connected {
        witness.push(Witness::DisconnectedHypergraph {
            components: comps.clone(),
        });
    }
    let outcome = feasible_flow(g, t)?;
    let map = map_existence(g, t, prior)?;
    let mut notes =
        vec!["finding a feasible flow costs considerably more than fitting the model".to_string()];
    let (flow_feasible, strongly_connected, flow_solver, flow) = match outcome {
        FlowOutcome::Feasible(flow) => {
            let eps = flow.default_eps();
            let check = comparison_graph_scc(g, &flow, eps);
            if let Some(p) = check.witness {
                witness.push(Witness::NotStronglyConnected(p));
            }
            let solver = if flow.is_exact() {
                "max-flow, exact integer".to_string()
            } else {
                format!("max-flow, floating point (a_ij > {eps:e} counts as positive)")
            };
            notes.push(
                "the verdict is for the flow that was found; other feasible flows are not searched"
                    .into(),
            );
            (true, check.strongly_connected, solver, Some(flow))
        }
        FlowOutcome::Infeasible(why) => {
            if matches!(why, Infeasibility::GlobalImbalance { .. }) {
                notes.push(
                    "total arrivals and departures differ, so no flow can match the marginals"
                        .into(),
                );
            }
            witness.push(Witness::Infeasible { reason: why });
            (false, false, "max-flow".to_string(), None)
        }
    };
    if let Some(w) = map.witness {
        witness.push(Witness::NoMapMaximizer(w));
    }
    Ok(Diagnosis {
        hypergraph_connected,
        hypergraph_component_count: comps.len(),
        flow_feasible,
        comparison_graph_strongly_connected: strongly_connected,
        ml_well_posed: flow_feasible && strongly_connected,
        map_well_posed: map.exists,
        flow_solver,
        witness,
        notes,
        flow,
    })
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn fmt_set(f: &mut fmt::Formatter<'_>, nodes: &[NodeId]) -> fmt::Result {
    const SHOWN: usize = 20;
    write!(f, "{{")?;
    for (k, v) in nodes.iter().take(SHOWN).enumerate() {
        if k > 0 {
            write!(f, ", ")?;
        }
        write!(f, "{v}")?;
    }
    if nodes.len() > SHOWN {
        write!(f, ", ... ({} nodes)", nodes.len())?;
    }
    write!(f, "}}")
}

impl fmt::Display for Diagnosis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "comparison hypergraph connected:     {} ({} component{})",
            yes_no(self.hypergraph_connected),
            self.hypergraph_component_count,
            if self.hypergraph_component_count == 1 {
                ""
            } else {
                "s"
            }
        )?;
        writeln!(
            f,
            "feasible flow found:                 {}",
            yes_no(self.flow_feasible)
        )?;
        writeln!(
            f,
            "comparison graph strongly connected: {}",
            yes_no(self.comparison_graph_strongly_connected)
        )?;
        writeln!(
            f,
            "ML estimate well-posed:              {}",
            yes_no(self.ml_well_posed)
        )?;
        writeln!(
            f,
            "MAP estimate well-posed:             {}",
            yes_no(self.map_well_posed)
        )?;
        writeln!(
            f,
            "flow solver:                         {}",
            self.flow_solver
        )?;
        for w in &self.witness {
            match w {
                Witness::DisconnectedHypergraph { components } => {
                    write!(f, "witness: hypergraph components")?;
                    for c in components.iter().take(10) {
                        write!(f, " ")?;
                        fmt_set(f, c)?;
                    }
                    if components.len() > 10 {
                        write!(f, " ... ({} components)", components.len())?;
                    }
                    writeln!(f)?;
                }
                Witness::Infeasible {
                    reason:
                        Infeasibility::GlobalImbalance {
                            total_in,
                            total_out,
                        },
                } => {
                    writeln!(
                        f,
                        "witness: total arrivals {total_in} != total departures {total_out}"
                    )?;
                }
                Witness::Infeasible {
                    reason:
                        Infeasibility::CapacityCut {
                            origins,
                            destinations,
                            demand,
                            capacity,
                            ..
                        },
                } => {
                    write!(f, "witness: origins ")?;
                    fmt_set(f, origins)?;
                    write!(f, " send {demand} but their targets ")?;
                    fmt_set(f, destinations)?;
                    writeln!(f, " receive only {capacity}")?;
                }
                Witness::NotStronglyConnected(p) => {
                    write!(f, "witness: no comparison arc from S=")?;
                    fmt_set(f, &p.s)?;
                    write!(f, " to T=")?;
                    fmt_set(f, &p.t)?;
                    writeln!(f, "; scaling up S never lowers the likelihood")?;
                }
                Witness::NoMapMaximizer(o) => {
                    write!(f, "witness: origins ")?;
                    fmt_set(f, &o.origins)?;
                    write!(f, " send {} but their targets ", o.demand)?;
                    fmt_set(f, &o.destinations)?;
                    writeln!(
                        f,
                        " absorb only {} including prior pseudo-counts; shrinking the targets never lowers the posterior",
                        o.capacity
                    )?;
                }
            }
        }
        for note in &self.notes {
            writeln!(f, "note: {note}")?;
        }
        Ok(())
    }
}
