//! Graphviz export of a clustering.
//!
//! ```text
//! graph clustering {
//!   subgraph "cluster_3.0" {
//!     label="3.0";
//!     1;
//!     2 [tokens="3.0 <2,1,3>"];
//!     3;
//!   }
//!   subgraph "free" {
//!     4;
//!   }
//!   1 -- 2;
//! }
//! ```
//!
//! Colored nodes sit in one block per color, free and locked nodes in the
//! `free` and `locked` blocks. A node hosting tokens (in flight towards it, or
//! parked on it) lists them in a `tokens` attribute separated by `;`. Edges
//! follow, smaller id first. Emit and parse round-trip exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use tokencluster::error::ParseError;
use tokencluster::{Color, NodeColor, NodeId, Snapshot, Token, Topology, Word};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExportedClustering {
    pub colors: BTreeMap<NodeId, NodeColor>,
    /// Tokens by hosting node, in snapshot order.
    pub tokens: BTreeMap<NodeId, Vec<Token>>,
    pub edges: Vec<(NodeId, NodeId)>,
}

impl ExportedClustering {
    pub fn from_snapshot(snap: &Snapshot) -> Self {
        let colors = snap.states.iter().map(|(v, s)| (*v, s.col)).collect();
        let mut tokens: BTreeMap<NodeId, Vec<Token>> = BTreeMap::new();
        for p in snap.tokens() {
            tokens.entry(p.at).or_default().push(p.token);
        }
        ExportedClustering {
            colors,
            tokens,
            edges: snap.topology.edges().collect(),
        }
    }

    pub fn topology(&self) -> Result<Topology, ParseError> {
        Topology::from_edges(self.colors.keys().copied(), self.edges.iter().copied())
            .map_err(|e| ParseError::new(e.to_string()))
    }

    /// Number of distinct cluster colors.
    pub fn cluster_count(&self) -> usize {
        let mut seen: Vec<Color> = self.colors.values().filter_map(NodeColor::color).collect();
        seen.sort();
        seen.dedup();
        seen.len()
    }

    pub fn to_dot(&self) -> String {
        let mut blocks: BTreeMap<Block, Vec<NodeId>> = BTreeMap::new();
        for (v, c) in &self.colors {
            blocks.entry(Block::of(*c)).or_default().push(*v);
        }
        let mut out = String::from("graph clustering {\n");
        for (block, nodes) in &blocks {
            match block {
                Block::Cluster(c) => {
                    let _ = writeln!(out, "  subgraph \"cluster_{c}\" {{");
                    let _ = writeln!(out, "    label=\"{c}\";");
                }
                Block::Free => out.push_str("  subgraph \"free\" {\n"),
                Block::Locked => out.push_str("  subgraph \"locked\" {\n"),
            }
            for v in nodes {
                match self.tokens.get(v).filter(|t| !t.is_empty()) {
                    Some(ts) => {
                        let list: Vec<String> =
                            ts.iter().map(|t| format!("{} {}", t.col, t.word)).collect();
                        let _ = writeln!(out, "    {v} [tokens=\"{}\"];", list.join(";"));
                    }
                    None => {
                        let _ = writeln!(out, "    {v};");
                    }
                }
            }
            out.push_str("  }\n");
        }
        for (a, b) in &self.edges {
            let _ = writeln!(out, "  {a} -- {b};");
        }
        out.push_str("}\n");
        out
    }

    /// Parses the output of [`ExportedClustering::to_dot`].
    pub fn from_dot(text: &str) -> Result<Self, ParseError> {
        let mut colors = BTreeMap::new();
        let mut tokens = BTreeMap::new();
        let mut edges = Vec::new();
        let mut block: Option<NodeColor> = None;
        let mut opened = false;
        let mut closed = false;
        for (k, raw) in text.lines().enumerate() {
            let at = |m: String| ParseError::new(m).at_line(k + 1);
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if closed {
                return Err(at("text after the closing brace".into()));
            }
            if !opened {
                if line != "graph clustering {" {
                    return Err(at(format!(
                        "expected `graph clustering {{`, found `{line}`"
                    )));
                }
                opened = true;
                continue;
            }
            if let Some(name) = line
                .strip_prefix("subgraph \"")
                .and_then(|r| r.strip_suffix("\" {"))
            {
                if block.is_some() {
                    return Err(at("nested subgraph".into()));
                }
                block = Some(match name {
                    "free" => NodeColor::Free,
                    "locked" => NodeColor::Locked,
                    _ => {
                        let c = name
                            .strip_prefix("cluster_")
                            .ok_or_else(|| at(format!("unknown block `{name}`")))?;
                        NodeColor::Colored(c.parse().map_err(|e| at(format!("{e}")))?)
                    }
                });
                continue;
            }
            if line == "}" {
                if block.take().is_none() {
                    closed = true;
                }
                continue;
            }
            let stmt = line
                .strip_suffix(';')
                .ok_or_else(|| at(format!("missing `;` in `{line}`")))?;
            if let Some((a, b)) = stmt.split_once(" -- ") {
                if block.is_some() {
                    return Err(at("edge inside a subgraph".into()));
                }
                edges.push((parse_id(a).map_err(at)?, parse_id(b).map_err(at)?));
                continue;
            }
            let Some(col) = block else {
                if stmt.starts_with("label=") {
                    return Err(at("label outside a subgraph".into()));
                }
                return Err(at(format!("node `{stmt}` outside a subgraph")));
            };
            if stmt.starts_with("label=") {
                continue;
            }
            let (id, attrs) = match stmt.split_once(' ') {
                Some((id, attrs)) => (id, Some(attrs)),
                None => (stmt, None),
            };
            let v = parse_id(id).map_err(at)?;
            if colors.insert(v, col).is_some() {
                return Err(at(format!("node {v} listed twice")));
            }
            if let Some(attrs) = attrs {
                let list = attrs
                    .strip_prefix("[tokens=\"")
                    .and_then(|r| r.strip_suffix("\"]"))
                    .ok_or_else(|| at(format!("unrecognized attributes `{attrs}`")))?;
                let parsed = list
                    .split(';')
                    .map(parse_token)
                    .collect::<Result<Vec<Token>, String>>()
                    .map_err(at)?;
                tokens.insert(v, parsed);
            }
        }
        if !closed {
            return Err(ParseError::new("unterminated graph"));
        }
        Ok(ExportedClustering {
            colors,
            tokens,
            edges,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Block {
    Cluster(Color),
    Free,
    Locked,
}

impl Block {
    fn of(c: NodeColor) -> Self {
        match c {
            NodeColor::Colored(c) => Block::Cluster(c),
            NodeColor::Free => Block::Free,
            NodeColor::Locked => Block::Locked,
        }
    }
}

fn parse_id(s: &str) -> Result<NodeId, String> {
    s.trim()
        .parse()
        .map_err(|_| format!("bad node id `{}`", s.trim()))
}

fn parse_token(s: &str) -> Result<Token, String> {
    let (col, word) = s
        .split_once(' ')
        .ok_or_else(|| format!("bad token `{s}`"))?;
    let col: Color = col.parse().map_err(|e| format!("{e}"))?;
    let word: Word = word.parse().map_err(|e| format!("{e}"))?;
    Ok(Token::new(col, word))
}
