//! s-t maximum flow / minimum cut (Boykov-Kolmogorov search trees).

use std::collections::VecDeque;

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct FlowNetwork {
    n: usize,
    source: usize,
    sink: usize,
    // arc k and k ^ 1 are mutual reverses
    head: Vec<usize>,
    cap: Vec<f64>,
    out: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MinCut {
    pub flow: f64,
    /// `true` for nodes on the source side of the minimum cut.
    pub source_side: Vec<bool>,
    /// `true` for nodes that can still reach the sink in the residual graph;
    /// the complement is the largest source side among all minimum cuts.
    pub sink_side: Vec<bool>,
}

impl FlowNetwork {
    pub fn new(node_count: usize, source: usize, sink: usize) -> Self {
        assert!(source < node_count && sink < node_count && source != sink);
        FlowNetwork { n: node_count, source, sink, head: Vec::new(), cap: Vec::new(), out: vec![Vec::new(); node_count] }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn sink(&self) -> usize {
        self.sink
    }

    /// Adds a directed arc. Arcs into the source or out of the sink are rejected.
    pub fn add_arc(&mut self, from: usize, to: usize, capacity: f64) -> Result<()> {
        self.add_edge(from, to, capacity, 0.0)
    }

    /// Adds an arc pair `from -> to` and `to -> from` sharing one residual slot.
    pub fn add_edge(&mut self, from: usize, to: usize, forward: f64, backward: f64) -> Result<()> {
        if from >= self.n || to >= self.n || from == to {
            return Err(Error::ConfigInvalid(format!("bad arc {from} -> {to}")));
        }
        if !(forward >= 0.0 && backward >= 0.0 && forward.is_finite() && backward.is_finite()) {
            return Err(Error::ConfigInvalid("capacities must be finite and nonnegative".into()));
        }
        if (to == self.source || from == self.sink) && forward > 0.0
            || (from == self.source || to == self.sink) && backward > 0.0
        {
            return Err(Error::ConfigInvalid("arcs into the source or out of the sink".into()));
        }
        let k = self.head.len();
        self.head.push(to);
        self.cap.push(forward);
        self.out[from].push(k);
        self.head.push(from);
        self.cap.push(backward);
        self.out[to].push(k + 1);
        Ok(())
    }
}

const NONE: usize = usize::MAX;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Tree {
    Free,
    Source,
    Sink,
}

/// Boykov-Kolmogorov search trees grown from both terminals, reused across
/// augmentations.
struct Bk<'a> {
    net: &'a FlowNetwork,
    residual: Vec<f64>,
    // arcs grouped by tail node
    first: Vec<usize>,
    arcs: Vec<usize>,
    tree: Vec<Tree>,
    // source tree: arc parent -> v; sink tree: arc v -> parent
    parent: Vec<usize>,
    // next arc position to scan when growing from a node
    cursor: Vec<usize>,
    active: VecDeque<usize>,
    orphans: Vec<usize>,
    // adoption heuristics: time stamp and distance to the terminal
    stamp: Vec<u64>,
    dist: Vec<u32>,
    time: u64,
}

impl<'a> Bk<'a> {
    fn new(net: &'a FlowNetwork) -> Self {
        let n = net.n;
        let mut first = Vec::with_capacity(n + 1);
        let mut arcs = Vec::with_capacity(net.head.len());
        first.push(0);
        for out in &net.out {
            arcs.extend_from_slice(out);
            first.push(arcs.len());
        }
        let cursor = first[..n].to_vec();
        let mut bk = Bk {
            net,
            residual: net.cap.clone(),
            first,
            arcs,
            tree: vec![Tree::Free; n],
            parent: vec![NONE; n],
            cursor,
            active: VecDeque::new(),
            orphans: Vec::new(),
            stamp: vec![0; n],
            dist: vec![0; n],
            time: 0,
        };
        for (t, v) in [(Tree::Source, net.source), (Tree::Sink, net.sink)] {
            bk.tree[v] = t;
            bk.active.push_back(v);
        }
        bk
    }

    fn is_terminal(&self, v: usize) -> bool {
        v == self.net.source || v == self.net.sink
    }

    fn parent_node(&self, v: usize) -> usize {
        let a = self.parent[v];
        match self.tree[v] {
            Tree::Source => self.net.head[a ^ 1],
            _ => self.net.head[a],
        }
    }

    /// Grows the tree of `p`; returns the arc (source tree -> sink tree) where
    /// the trees touch.
    fn grow(&mut self, p: usize) -> Option<usize> {
        let side = self.tree[p];
        while self.cursor[p] < self.first[p + 1] {
            let k = self.arcs[self.cursor[p]];
            let q = self.net.head[k];
            // residual capacity in the direction of the tree
            let open = if side == Tree::Source { self.residual[k] } else { self.residual[k ^ 1] };
            if open <= 0.0 {
                self.cursor[p] += 1;
                continue;
            }
            match self.tree[q] {
                Tree::Free => {
                    self.tree[q] = side;
                    self.cursor[q] = self.first[q];
                    self.parent[q] = if side == Tree::Source { k } else { k ^ 1 };
                    self.stamp[q] = self.stamp[p];
                    self.dist[q] = self.dist[p] + 1;
                    self.active.push_back(q);
                }
                t if t == side => {}
                _ => return Some(if side == Tree::Source { k } else { k ^ 1 }),
            }
            self.cursor[p] += 1;
        }
        self.cursor[p] = self.first[p];
        None
    }

    fn augment(&mut self, bridge: usize) -> f64 {
        let mut bottleneck = self.residual[bridge];
        let mut v = self.net.head[bridge ^ 1];
        while v != self.net.source {
            let a = self.parent[v];
            bottleneck = bottleneck.min(self.residual[a]);
            v = self.net.head[a ^ 1];
        }
        let mut v = self.net.head[bridge];
        while v != self.net.sink {
            let a = self.parent[v];
            bottleneck = bottleneck.min(self.residual[a]);
            v = self.net.head[a];
        }

        self.residual[bridge] -= bottleneck;
        self.residual[bridge ^ 1] += bottleneck;
        let mut v = self.net.head[bridge ^ 1];
        while v != self.net.source {
            let a = self.parent[v];
            self.residual[a] -= bottleneck;
            self.residual[a ^ 1] += bottleneck;
            let up = self.net.head[a ^ 1];
            if self.residual[a] <= 0.0 {
                self.parent[v] = NONE;
                self.orphans.push(v);
            }
            v = up;
        }
        let mut v = self.net.head[bridge];
        while v != self.net.sink {
            let a = self.parent[v];
            self.residual[a] -= bottleneck;
            self.residual[a ^ 1] += bottleneck;
            let up = self.net.head[a];
            if self.residual[a] <= 0.0 {
                self.parent[v] = NONE;
                self.orphans.push(v);
            }
            v = up;
        }
        bottleneck
    }

    /// Distance from `q` to its terminal along parent arcs, or `None` when the
    /// path runs into an orphan.
    fn origin_distance(&mut self, q: usize) -> Option<u32> {
        let mut d = 0u32;
        let mut v = q;
        loop {
            if self.stamp[v] == self.time {
                d += self.dist[v];
                break;
            }
            if self.is_terminal(v) {
                self.stamp[v] = self.time;
                self.dist[v] = 0;
                break;
            }
            if self.parent[v] == NONE {
                return None;
            }
            d += 1;
            v = self.parent_node(v);
        }
        // stamp the path so later searches stop early
        let mut v = q;
        let mut dv = d;
        while self.stamp[v] != self.time {
            self.stamp[v] = self.time;
            self.dist[v] = dv;
            dv -= 1;
            v = self.parent_node(v);
        }
        Some(d)
    }

    fn adopt(&mut self) {
        while let Some(p) = self.orphans.pop() {
            let side = self.tree[p];
            let mut best: Option<(u32, usize)> = None;
            for i in self.first[p]..self.first[p + 1] {
                let k = self.arcs[i];
                let q = self.net.head[k];
                // candidate parent q must reach p (source tree) or be reached from p (sink tree)
                let open = if side == Tree::Source { self.residual[k ^ 1] } else { self.residual[k] };
                if self.tree[q] != side || open <= 0.0 {
                    continue;
                }
                if let Some(d) = self.origin_distance(q) {
                    if best.is_none_or(|(bd, _)| d < bd) {
                        best = Some((d, k));
                    }
                }
            }
            if let Some((d, k)) = best {
                self.parent[p] = if side == Tree::Source { k ^ 1 } else { k };
                self.stamp[p] = self.time;
                self.dist[p] = d + 1;
                continue;
            }
            // no valid parent: p leaves its tree, its children become orphans
            for i in self.first[p]..self.first[p + 1] {
                let k = self.arcs[i];
                let q = self.net.head[k];
                if self.tree[q] != side {
                    continue;
                }
                let open = if side == Tree::Source { self.residual[k ^ 1] } else { self.residual[k] };
                if open > 0.0 {
                    self.cursor[q] = self.first[q];
                    self.active.push_back(q);
                }
                if self.parent[q] != NONE && self.parent_node(q) == p {
                    self.parent[q] = NONE;
                    self.orphans.push(q);
                }
            }
            self.tree[p] = Tree::Free;
        }
    }

    fn run(&mut self) -> f64 {
        let mut flow = 0.0;
        while let Some(p) = self.active.pop_front() {
            if self.tree[p] == Tree::Free {
                continue;
            }
            if let Some(bridge) = self.grow(p) {
                // p may have more to offer once the trees are repaired
                self.active.push_front(p);
                self.time += 1;
                flow += self.augment(bridge);
                self.adopt();
            }
        }
        flow
    }

    /// Nodes reachable from `from` in the residual graph, searching forward
    /// (`forward = true`) or backward.
    fn residual_reach(&self, from: usize, forward: bool) -> Vec<bool> {
        let mut seen = vec![false; self.net.n];
        let mut queue = VecDeque::from([from]);
        seen[from] = true;
        while let Some(u) = queue.pop_front() {
            for &k in &self.arcs[self.first[u]..self.first[u + 1]] {
                let v = self.net.head[k];
                // backward: arc k ^ 1 runs from v into u
                let open = if forward { self.residual[k] } else { self.residual[k ^ 1] };
                if !seen[v] && open > 0.0 {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen
    }
}

/// Maximum flow value and the source side of a minimum cut (nodes reachable
/// from the source in the final residual graph).
pub fn maxflow_mincut(net: &FlowNetwork) -> MinCut {
    let mut bk = Bk::new(net);
    let flow = bk.run();
    MinCut { flow, source_side: bk.residual_reach(net.source, true), sink_side: bk.residual_reach(net.sink, false) }
}
