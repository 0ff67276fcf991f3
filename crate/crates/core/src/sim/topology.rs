use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::ScenarioError;
use crate::ids::NodeId;

/// Undirected simple graph.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    adj: BTreeMap<NodeId, BTreeSet<NodeId>>,
}

impl Topology {
    pub fn new() -> Self {
        Topology::default()
    }

    pub fn from_edges(
        nodes: impl IntoIterator<Item = NodeId>,
        edges: impl IntoIterator<Item = (NodeId, NodeId)>,
    ) -> Result<Self, ScenarioError> {
        let mut t = Topology::new();
        for v in nodes {
            t.add_node(v)?;
        }
        for (a, b) in edges {
            t.add_edge(a, b)?;
        }
        Ok(t)
    }

    pub fn add_node(&mut self, v: NodeId) -> Result<(), ScenarioError> {
        if self.adj.contains_key(&v) {
            return Err(ScenarioError::NodePresent(v));
        }
        self.adj.insert(v, BTreeSet::new());
        Ok(())
    }

    /// Removes `v` and returns its former neighbors.
    pub fn remove_node(&mut self, v: NodeId) -> Result<BTreeSet<NodeId>, ScenarioError> {
        let nb = self.adj.remove(&v).ok_or(ScenarioError::UnknownNode(v))?;
        for u in &nb {
            if let Some(s) = self.adj.get_mut(u) {
                s.remove(&v);
            }
        }
        Ok(nb)
    }

    pub fn add_edge(&mut self, a: NodeId, b: NodeId) -> Result<(), ScenarioError> {
        if a == b {
            return Err(ScenarioError::SelfLoop(a));
        }
        for v in [a, b] {
            if !self.adj.contains_key(&v) {
                return Err(ScenarioError::UnknownNode(v));
            }
        }
        if !self.adj.get_mut(&a).expect("present").insert(b) {
            return Err(ScenarioError::LinkPresent(a, b));
        }
        self.adj.get_mut(&b).expect("present").insert(a);
        Ok(())
    }

    pub fn remove_edge(&mut self, a: NodeId, b: NodeId) -> Result<(), ScenarioError> {
        if !self.has_edge(a, b) {
            return Err(ScenarioError::LinkAbsent(a, b));
        }
        self.adj.get_mut(&a).expect("present").remove(&b);
        self.adj.get_mut(&b).expect("present").remove(&a);
        Ok(())
    }

    pub fn has_edge(&self, a: NodeId, b: NodeId) -> bool {
        self.adj.get(&a).is_some_and(|s| s.contains(&b))
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.adj.contains_key(&v)
    }

    pub fn neighbors(&self, v: NodeId) -> &BTreeSet<NodeId> {
        static EMPTY: BTreeSet<NodeId> = BTreeSet::new();
        self.adj.get(&v).unwrap_or(&EMPTY)
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.adj.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    /// Each edge once, as `(low, high)`.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.adj
            .iter()
            .flat_map(|(a, s)| s.range(*a..).map(move |b| (*a, *b)))
    }

    /// Whether `set` induces a connected subgraph. The empty set is connected.
    pub fn induces_connected(&self, set: &BTreeSet<NodeId>) -> bool {
        let Some(&start) = set.first() else {
            return true;
        };
        let mut seen = BTreeSet::from([start]);
        let mut stack = vec![start];
        while let Some(u) = stack.pop() {
            for &v in self.neighbors(u) {
                if set.contains(&v) && seen.insert(v) {
                    stack.push(v);
                }
            }
        }
        seen.len() == set.len()
    }

    pub fn is_connected(&self) -> bool {
        self.induces_connected(&self.adj.keys().copied().collect())
    }

    /// `set` together with every node adjacent to it.
    pub fn closed_neighborhood(&self, set: &BTreeSet<NodeId>) -> BTreeSet<NodeId> {
        let mut out = set.clone();
        for &v in set {
            out.extend(self.neighbors(v));
        }
        out
    }

    fn numbered(n: u32) -> Self {
        let mut t = Topology::new();
        for k in 1..=n {
            t.add_node(NodeId(k)).expect("fresh");
        }
        t
    }

    /// Nodes `1..=n`; `n` must be at least 3 for a proper cycle.
    pub fn ring(n: u32) -> Self {
        let mut t = Topology::path(n);
        if n >= 3 {
            t.add_edge(NodeId(n), NodeId(1)).expect("fresh");
        }
        t
    }

    pub fn path(n: u32) -> Self {
        let mut t = Topology::numbered(n);
        for k in 2..=n {
            t.add_edge(NodeId(k - 1), NodeId(k)).expect("fresh");
        }
        t
    }

    pub fn complete(n: u32) -> Self {
        let mut t = Topology::numbered(n);
        for a in 1..=n {
            for b in a + 1..=n {
                t.add_edge(NodeId(a), NodeId(b)).expect("fresh");
            }
        }
        t
    }

    /// Node 1 is the center.
    pub fn star(n: u32) -> Self {
        let mut t = Topology::numbered(n);
        for k in 2..=n {
            t.add_edge(NodeId(1), NodeId(k)).expect("fresh");
        }
        t
    }

    /// `rows x cols` grid, numbered row by row from 1.
    pub fn grid(rows: u32, cols: u32) -> Self {
        let mut t = Topology::numbered(rows * cols);
        let id = |r: u32, c: u32| NodeId(r * cols + c + 1);
        for r in 0..rows {
            for c in 0..cols {
                if c + 1 < cols {
                    t.add_edge(id(r, c), id(r, c + 1)).expect("fresh");
                }
                if r + 1 < rows {
                    t.add_edge(id(r, c), id(r + 1, c)).expect("fresh");
                }
            }
        }
        t
    }

    /// Random spanning tree on `1..=n` plus each remaining pair with
    /// probability `extra`.
    pub fn random_connected(n: u32, extra: f64, rng: &mut impl Rng) -> Self {
        let mut t = Topology::numbered(n);
        for k in 2..=n {
            let p = rng.gen_range(1..k);
            t.add_edge(NodeId(p), NodeId(k)).expect("fresh");
        }
        for a in 1..=n {
            for b in a + 1..=n {
                if !t.has_edge(NodeId(a), NodeId(b)) && rng.gen_bool(extra) {
                    t.add_edge(NodeId(a), NodeId(b)).expect("fresh");
                }
            }
        }
        t
    }
}
