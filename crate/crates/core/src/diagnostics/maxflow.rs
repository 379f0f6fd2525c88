//! Dinic's maximum flow over exact integer or floating-point capacities.

use std::collections::VecDeque;

/// Capacity arithmetic for [`FlowNetwork`].
pub trait Capacity: Copy + PartialOrd + std::fmt::Debug {
    const ZERO: Self;
    fn add(self, other: Self) -> Self;
    fn sub(self, other: Self) -> Self;
    fn min(self, other: Self) -> Self;
}

impl Capacity for i64 {
    const ZERO: i64 = 0;
    fn add(self, other: i64) -> i64 {
        self.saturating_add(other)
    }
    fn sub(self, other: i64) -> i64 {
        self - other
    }
    fn min(self, other: i64) -> i64 {
        Ord::min(self, other)
    }
}

impl Capacity for f64 {
    const ZERO: f64 = 0.0;
    fn add(self, other: f64) -> f64 {
        self + other
    }
    fn sub(self, other: f64) -> f64 {
        self - other
    }
    fn min(self, other: f64) -> f64 {
        f64::min(self, other)
    }
}

#[derive(Debug, Clone)]
struct Arc<C> {
    to: usize,
    cap: C,
    flow: C,
}

/// Residual network. Arcs are stored in pairs: arc `2k` is the forward arc
/// returned by [`FlowNetwork::add_arc`], arc `2k + 1` its reverse.
#[derive(Debug, Clone)]
pub struct FlowNetwork<C> {
    arcs: Vec<Arc<C>>,
    out: Vec<Vec<usize>>,
    /// Residual capacities at or below this are treated as saturated.
    eps: C,
}

impl<C: Capacity> FlowNetwork<C> {
    pub fn new(nodes: usize, eps: C) -> Self {
        FlowNetwork {
            arcs: Vec::new(),
            out: vec![Vec::new(); nodes],
            eps,
        }
    }

    /// Adds an arc and returns its id.
    pub fn add_arc(&mut self, from: usize, to: usize, cap: C) -> usize {
        let id = self.arcs.len();
        self.arcs.push(Arc {
            to,
            cap,
            flow: C::ZERO,
        });
        self.arcs.push(Arc {
            to: from,
            cap: C::ZERO,
            flow: C::ZERO,
        });
        self.out[from].push(id);
        self.out[to].push(id + 1);
        id
    }

    pub fn flow(&self, arc: usize) -> C {
        self.arcs[arc].flow
    }

    fn residual(&self, arc: usize) -> C {
        let a = &self.arcs[arc];
        a.cap.sub(a.flow)
    }

    fn push(&mut self, arc: usize, amount: C) {
        self.arcs[arc].flow = self.arcs[arc].flow.add(amount);
        let rev = arc ^ 1;
        self.arcs[rev].flow = self.arcs[rev].flow.sub(amount);
    }

    fn bfs_levels(&self, source: usize) -> Vec<usize> {
        let mut level = vec![usize::MAX; self.out.len()];
        level[source] = 0;
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            for &a in &self.out[u] {
                let v = self.arcs[a].to;
                if level[v] == usize::MAX && self.residual(a) > self.eps {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        level
    }

    /// Runs Dinic's algorithm and returns the flow value.
    pub fn max_flow(&mut self, source: usize, sink: usize) -> C {
        let mut total = C::ZERO;
        loop {
            let level = self.bfs_levels(source);
            if level[sink] == usize::MAX {
                return total;
            }
            let mut next = vec![0usize; self.out.len()];
            while let Some(pushed) = self.augment(source, sink, &level, &mut next) {
                total = total.add(pushed);
            }
        }
    }

    /// Finds one blocking-flow augmenting path with an explicit stack.
    fn augment(
        &mut self,
        source: usize,
        sink: usize,
        level: &[usize],
        next: &mut [usize],
    ) -> Option<C> {
        let mut path: Vec<usize> = Vec::new();
        let mut u = source;
        loop {
            if u == sink {
                let amount = path
                    .iter()
                    .map(|&a| self.residual(a))
                    .reduce(|x, y| x.min(y))?;
                for &a in &path {
                    self.push(a, amount);
                }
                return Some(amount);
            }
            let mut advanced = false;
            while next[u] < self.out[u].len() {
                let a = self.out[u][next[u]];
                let v = self.arcs[a].to;
                if self.residual(a) > self.eps && level[v] == level[u] + 1 {
                    path.push(a);
                    u = v;
                    advanced = true;
                    break;
                }
                next[u] += 1;
            }
            if !advanced {
                if u == source {
                    return None;
                }
                let a = path.pop().expect("non-source node has an entering arc");
                u = self.arcs[a ^ 1].to;
                next[u] += 1;
            }
        }
    }

    /// Nodes reachable from `source` in the residual network; after
    /// [`max_flow`](Self::max_flow) this is the source side of a minimum cut.
    pub fn source_side(&self, source: usize) -> Vec<bool> {
        self.bfs_levels(source)
            .into_iter()
            .map(|l| l != usize::MAX)
            .collect()
    }

    /// Nodes that can still reach `sink` in the residual network; after
    /// [`max_flow`](Self::max_flow) the complement is the source side of the
    /// largest minimum cut.
    pub fn reaches_sink(&self, sink: usize) -> Vec<bool> {
        let mut seen = vec![false; self.out.len()];
        seen[sink] = true;
        let mut queue = VecDeque::from([sink]);
        while let Some(v) = queue.pop_front() {
            for &b in &self.out[v] {
                let u = self.arcs[b].to;
                if !seen[u] && self.residual(b ^ 1) > self.eps {
                    seen[u] = true;
                    queue.push_back(u);
                }
            }
        }
        seen
    }
}
