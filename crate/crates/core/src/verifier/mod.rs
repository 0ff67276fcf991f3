//! Configuration predicates, brute-force oracles and a streaming invariant
//! monitor.

mod monitor;
mod snapshot;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use monitor::{InvariantMonitor, MonitorViolation, NotCorrectWindow};
pub use snapshot::{InFlight, Snapshot, TokenPosition};

use crate::error::{OracleError, ParseError};
use crate::ids::{Color, NodeColor, NodeId};
use crate::sim::{EventRecord, Topology, Trace};

/// Largest node set the divisibility oracle accepts.
pub const ORACLE_CAP: usize = 16;

/// First failing clause of a predicate and what witnesses it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub clause: String,
    pub detail: String,
}

impl Violation {
    fn new(clause: &str, detail: impl Into<String>) -> Self {
        Violation {
            clause: clause.to_string(),
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.clause, self.detail)
    }
}

fn fmt_set(s: &BTreeSet<NodeId>) -> String {
    let v: Vec<String> = s.iter().map(NodeId::to_string).collect();
    format!("{{{}}}", v.join(","))
}

/// True iff `set` splits into two connected parts of at least `m` nodes each.
/// `set` is expected to induce a connected subgraph.
pub fn divisibility_oracle(
    set: &BTreeSet<NodeId>,
    topology: &Topology,
    m: usize,
) -> Result<bool, OracleError> {
    if set.len() > ORACLE_CAP {
        return Err(OracleError::CapExceeded {
            size: set.len(),
            cap: ORACLE_CAP,
        });
    }
    if let Some(v) = set.iter().find(|v| !topology.contains(**v)) {
        return Err(OracleError::UnknownNode(*v));
    }
    let n = set.len();
    if n < 2 * m.max(1) {
        return Ok(false);
    }
    let nodes: Vec<NodeId> = set.iter().copied().collect();
    // The part containing nodes[0] is enumerated over subsets of the rest.
    for mask in 0u32..(1 << (n - 1)) {
        let size = mask.count_ones() as usize + 1;
        if size < m || n - size < m {
            continue;
        }
        let mut a = BTreeSet::from([nodes[0]]);
        let mut b = BTreeSet::new();
        for (k, v) in nodes[1..].iter().enumerate() {
            if mask & (1 << k) != 0 {
                a.insert(*v);
            } else {
                b.insert(*v);
            }
        }
        if topology.induces_connected(&a) && topology.induces_connected(&b) {
            return Ok(true);
        }
    }
    Ok(false)
}

fn tokens_by_color(snap: &Snapshot) -> BTreeMap<Color, Vec<TokenPosition>> {
    let mut out: BTreeMap<Color, Vec<TokenPosition>> = BTreeMap::new();
    for t in snap.tokens() {
        out.entry(t.token.col).or_default().push(t);
    }
    out
}

/// Exactly one token per non-empty cluster, inside the cluster's closed
/// neighborhood, and no token for a color without nodes.
/// Token clauses for every color outside `skip`.
fn check_tokens(snap: &Snapshot, skip: &BTreeSet<Color>) -> Result<(), Violation> {
    let clusters = snap.clusters();
    let tokens = tokens_by_color(snap);
    for (c, nodes) in clusters.iter().filter(|(c, _)| !skip.contains(c)) {
        let found = tokens.get(c).map(Vec::as_slice).unwrap_or(&[]);
        if found.len() != 1 {
            return Err(Violation::new(
                "token",
                format!("cluster {c} {} has {} tokens", fmt_set(nodes), found.len()),
            ));
        }
        let region = snap.topology.closed_neighborhood(nodes);
        if !region.contains(&found[0].at) {
            return Err(Violation::new(
                "token",
                format!("token of {c} is at {}, outside N(V_c)", found[0].at),
            ));
        }
    }
    if let Some(c) = tokens
        .keys()
        .find(|c| !clusters.contains_key(c) && !skip.contains(c))
    {
        return Err(Violation::new(
            "token",
            format!("token of {c} exists but the cluster is empty"),
        ));
    }
    Ok(())
}

/// Clauses, in check order: `total`, `messages`, `size`, `connected`,
/// `token`, `divisible`.
pub fn is_legitimate(snap: &Snapshot, m: usize) -> Result<(), Violation> {
    for (v, s) in &snap.states {
        if !matches!(s.col, NodeColor::Colored(_)) {
            return Err(Violation::new("total", format!("node {v} is {}", s.col)));
        }
    }
    if let Some((id, f)) = snap
        .in_flight
        .iter()
        .find(|(_, f)| f.message.as_token().is_none())
    {
        return Err(Violation::new(
            "messages",
            format!("{} in flight as message {id}", f.message.kind()),
        ));
    }
    if let Some((v, _)) = snap.states.iter().find(|(_, s)| s.in_wave()) {
        return Err(Violation::new(
            "messages",
            format!("node {v} is still part of a wave"),
        ));
    }
    let clusters = snap.clusters();
    for (c, nodes) in &clusters {
        if nodes.len() < m {
            return Err(Violation::new(
                "size",
                format!(
                    "cluster {c} {} has {} < {m} nodes",
                    fmt_set(nodes),
                    nodes.len()
                ),
            ));
        }
    }
    for (c, nodes) in &clusters {
        if !snap.topology.induces_connected(nodes) {
            return Err(Violation::new(
                "connected",
                format!("cluster {c} {} is disconnected", fmt_set(nodes)),
            ));
        }
    }
    check_tokens(snap, &BTreeSet::new())?;
    for (c, nodes) in &clusters {
        match divisibility_oracle(nodes, &snap.topology, m) {
            Ok(false) => {}
            Ok(true) => {
                return Err(Violation::new(
                    "divisible",
                    format!("cluster {c} {} is divisible", fmt_set(nodes)),
                ))
            }
            Err(e) => return Err(Violation::new("divisible", format!("cluster {c}: {e}"))),
        }
    }
    Ok(())
}

/// Clauses, in check order: `connected`, `token`, `word`, `tree-edge`,
/// `delete`.
pub fn is_correct(snap: &Snapshot) -> Result<(), Violation> {
    // Colors in a dissolution or division are mid-transition, as in any
    // static execution: their clusters are exempt from the first three clauses.
    let waves = snap.wave_colors();
    let clusters = snap.clusters();
    for (c, nodes) in clusters.iter().filter(|(c, _)| !waves.contains(c)) {
        if !snap.topology.induces_connected(nodes) {
            return Err(Violation::new(
                "connected",
                format!("cluster {c} {} is disconnected", fmt_set(nodes)),
            ));
        }
    }
    check_tokens(snap, &waves)?;
    let words: BTreeMap<Color, BTreeSet<NodeId>> = snap
        .tokens()
        .into_iter()
        .filter(|t| !waves.contains(&t.token.col))
        .map(|t| (t.token.col, t.token.word.identities()))
        .collect();
    for (v, s) in &snap.states {
        let mine = match s.col {
            NodeColor::Locked => continue,
            NodeColor::Colored(c) if waves.contains(&c) => continue,
            NodeColor::Free => None,
            NodeColor::Colored(c) => Some(c),
        };
        if s.in_wave() {
            continue;
        }
        for (c, ids) in &words {
            let listed = ids.contains(v);
            if listed != (mine == Some(*c)) {
                let what = if listed { "appears" } else { "is missing" };
                return Err(Violation::new(
                    "word",
                    format!("node {v} ({}) {what} in the word of {c}", s.col),
                ));
            }
        }
    }
    for t in snap.tokens() {
        let tree = t
            .token
            .word
            .build_tree()
            .map_err(|e| Violation::new("tree-edge", format!("token {}: {e}", t.token)))?;
        let dead = tree.edges().find(|(a, b)| !snap.topology.has_edge(*a, *b));
        if let Some((a, b)) = dead {
            return Err(Violation::new(
                "tree-edge",
                format!("token {} uses dead link {a}-{b}", t.token.col),
            ));
        }
    }
    if snap.delete_in_flight() {
        return Err(Violation::new("delete", "Delete messages in flight"));
    }
    Ok(())
}

/// Nodes whose color differs between the two snapshots, including nodes
/// present in only one of them.
pub fn locality_diff(before: &Snapshot, after: &Snapshot) -> BTreeSet<NodeId> {
    let nodes: BTreeSet<NodeId> = before
        .states
        .keys()
        .chain(after.states.keys())
        .copied()
        .collect();
    nodes
        .into_iter()
        .filter(|v| before.states.get(v).map(|s| s.col) != after.states.get(v).map(|s| s.col))
        .collect()
}

/// The nodes a change inside cluster `changed` may recolor: the cluster
/// itself and every cluster adjacent to it, as seen in `before`.
pub fn locality_region(before: &Snapshot, changed: Color) -> BTreeSet<NodeId> {
    let clusters = before.clusters();
    let Some(core) = clusters.get(&changed) else {
        return BTreeSet::new();
    };
    let border = before.topology.closed_neighborhood(core);
    let mut out = core.clone();
    for nodes in clusters.values() {
        if !nodes.is_disjoint(&border) {
            out.extend(nodes);
        }
    }
    out
}

/// Replays a trace, handing every record and the snapshot after it to
/// `observe`. Effects whose digest does not match their state are rejected.
pub fn replay(
    trace: &Trace,
    mut observe: impl FnMut(&EventRecord, &Snapshot),
) -> Result<Snapshot, ParseError> {
    let mut snap = Snapshot::initial(trace.header.topology()?);
    for (k, rec) in trace.events.iter().enumerate() {
        if rec.index != k as u64 {
            return Err(ParseError::new(format!(
                "event {} found where {k} was expected",
                rec.index
            )));
        }
        for e in &rec.effects {
            if e.state.digest() != e.digest {
                return Err(ParseError::new(format!(
                    "event {}: digest mismatch for node {}",
                    rec.index, e.node
                )));
            }
        }
        snap.apply(rec)?;
        observe(rec, &snap);
    }
    Ok(snap)
}
