//! Line-oriented scenario files.
//!
//! ```text
//! m=3 variant=mobile seed=7
//! node 1
//! node 2
//! node 3
//! edge 1 2
//! edge 2 3
//! at 50 linkdown 1 2
//! at 80 join 4 1 3
//! ```
//!
//! `#` starts a comment. Mobility lines must be in nondecreasing time order.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{SimTime, Topology};
use crate::error::{ParseError, ScenarioError};
use crate::ids::NodeId;
use crate::protocol::Variant;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "change", rename_all = "lowercase")]
pub enum Mobility {
    LinkDown {
        a: NodeId,
        b: NodeId,
    },
    LinkUp {
        a: NodeId,
        b: NodeId,
    },
    Join {
        node: NodeId,
        neighbors: Vec<NodeId>,
    },
    Leave {
        node: NodeId,
    },
}

impl Mobility {
    /// Applies the change, failing if it is inconsistent with `t`.
    pub fn apply(&self, t: &mut Topology) -> Result<(), ScenarioError> {
        match self {
            Mobility::LinkDown { a, b } => t.remove_edge(*a, *b),
            Mobility::LinkUp { a, b } => t.add_edge(*a, *b),
            Mobility::Join { node, neighbors } => {
                t.add_node(*node)?;
                for &v in neighbors {
                    t.add_edge(*node, v)?;
                }
                Ok(())
            }
            Mobility::Leave { node } => t.remove_node(*node).map(|_| ()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduledMobility {
    pub at: SimTime,
    pub change: Mobility,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Scenario {
    pub m: usize,
    pub variant: Variant,
    pub seed: u64,
    pub topology: Topology,
    pub mobility: Vec<ScheduledMobility>,
}

impl Scenario {
    pub fn new(m: usize, variant: Variant, seed: u64, topology: Topology) -> Self {
        Scenario {
            m,
            variant,
            seed,
            topology,
            mobility: Vec::new(),
        }
    }

    pub fn with_change(mut self, at: SimTime, change: Mobility) -> Self {
        self.mobility.push(ScheduledMobility { at, change });
        self
    }

    /// Checks the initial topology and replays the mobility schedule on a copy.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.m == 0 {
            return Err(ScenarioError::ZeroM);
        }
        if self.topology.len() < self.m {
            return Err(ScenarioError::TooFewNodes {
                n: self.topology.len(),
                m: self.m,
            });
        }
        if !self.topology.is_connected() {
            return Err(ScenarioError::Disconnected);
        }
        let mut t = self.topology.clone();
        let mut last = SimTime(0);
        for ev in &self.mobility {
            if ev.at < last {
                return Err(ScenarioError::Config(format!(
                    "mobility at {} precedes an earlier entry at {last}",
                    ev.at
                )));
            }
            last = ev.at;
            ev.change.apply(&mut t)?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("m={} variant={} seed={}\n", self.m, self.variant, self.seed);
        for v in self.topology.nodes() {
            writeln!(out, "node {v}").unwrap();
        }
        for (a, b) in self.topology.edges() {
            writeln!(out, "edge {a} {b}").unwrap();
        }
        for ev in &self.mobility {
            let body = match &ev.change {
                Mobility::LinkDown { a, b } => format!("linkdown {a} {b}"),
                Mobility::LinkUp { a, b } => format!("linkup {a} {b}"),
                Mobility::Join { node, neighbors } => {
                    let mut s = format!("join {node}");
                    for v in neighbors {
                        write!(s, " {v}").unwrap();
                    }
                    s
                }
                Mobility::Leave { node } => format!("leave {node}"),
            };
            writeln!(out, "at {} {body}", ev.at).unwrap();
        }
        out
    }
}

fn ids(args: &[&str]) -> Result<Vec<NodeId>, ParseError> {
    args.iter().map(|a| a.parse()).collect()
}

fn arity(args: &[&str], n: usize, what: &str) -> Result<(), ParseError> {
    if args.len() == n {
        Ok(())
    } else {
        Err(ParseError::new(format!(
            "`{what}` takes {n} argument(s), got {}",
            args.len()
        )))
    }
}

fn parse_header(line: &str) -> Result<(usize, Variant, u64), ParseError> {
    let (mut m, mut variant, mut seed) = (None, None, None);
    for field in line.split_whitespace() {
        let (k, v) = field
            .split_once('=')
            .ok_or_else(|| ParseError::new(format!("expected key=value, got `{field}`")))?;
        let bad = || ParseError::new(format!("invalid value for `{k}`: `{v}`"));
        match k {
            "m" => m = Some(v.parse().map_err(|_| bad())?),
            "variant" => variant = Some(v.parse()?),
            "seed" => seed = Some(v.parse().map_err(|_| bad())?),
            _ => return Err(ParseError::new(format!("unknown header key `{k}`"))),
        }
    }
    let missing = |k: &str| ParseError::new(format!("header is missing `{k}`"));
    Ok((
        m.ok_or_else(|| missing("m"))?,
        variant.ok_or_else(|| missing("variant"))?,
        seed.ok_or_else(|| missing("seed"))?,
    ))
}

impl FromStr for Scenario {
    type Err = ScenarioError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(k, l)| (k + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let (hl, header) = lines
            .next()
            .ok_or_else(|| ParseError::new("empty scenario").at_line(1))?;
        let (m, variant, seed) = parse_header(header).map_err(|e| e.at_line(hl))?;
        let mut sc = Scenario::new(m, variant, seed, Topology::new());
        let mut t = Topology::new();
        let mut last = SimTime(0);
        for (ln, line) in lines {
            let words: Vec<&str> = line.split_whitespace().collect();
            let step = |sc: &mut Scenario, t: &mut Topology, last: &mut SimTime| match words[0] {
                "node" => {
                    arity(&words[1..], 1, "node")?;
                    let v: NodeId = words[1].parse()?;
                    if sc.topology.contains(v) {
                        return Err(ScenarioError::DuplicateNode(v));
                    }
                    sc.topology.add_node(v)?;
                    t.add_node(v)
                }
                "edge" => {
                    arity(&words[1..], 2, "edge")?;
                    let e = ids(&words[1..])?;
                    sc.topology.add_edge(e[0], e[1])?;
                    t.add_edge(e[0], e[1])
                }
                "at" => {
                    if words.len() < 3 {
                        return Err(ParseError::new("`at` needs a time and a change").into());
                    }
                    let at: SimTime = words[1].parse()?;
                    if at < *last {
                        return Err(ScenarioError::Config(format!(
                            "time {at} precedes the previous entry at {last}"
                        )));
                    }
                    *last = at;
                    let args = &words[3..];
                    let change = match words[2] {
                        "linkdown" | "linkup" => {
                            arity(args, 2, words[2])?;
                            let e = ids(args)?;
                            let (a, b) = (e[0], e[1]);
                            if words[2] == "linkdown" {
                                Mobility::LinkDown { a, b }
                            } else {
                                Mobility::LinkUp { a, b }
                            }
                        }
                        "join" => {
                            let v = ids(args)?;
                            let (node, rest) = v
                                .split_first()
                                .ok_or_else(|| ParseError::new("`join` needs a node id"))?;
                            let unique: BTreeSet<_> = rest.iter().collect();
                            if unique.len() != rest.len() {
                                return Err(ParseError::new("`join` lists a neighbor twice").into());
                            }
                            Mobility::Join {
                                node: *node,
                                neighbors: rest.to_vec(),
                            }
                        }
                        "leave" => {
                            arity(args, 1, "leave")?;
                            Mobility::Leave {
                                node: args[0].parse()?,
                            }
                        }
                        other => {
                            return Err(ParseError::new(format!(
                                "unknown mobility change `{other}`"
                            ))
                            .into())
                        }
                    };
                    change.apply(t)?;
                    sc.mobility.push(ScheduledMobility { at, change });
                    Ok(())
                }
                other => Err(ParseError::new(format!("unknown directive `{other}`")).into()),
            };
            step(&mut sc, &mut t, &mut last).map_err(|e| e.at_line(ln))?;
        }
        sc.validate()?;
        Ok(sc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const RING: &str = "\
# ring of four
m=2 variant=mobile seed=9
node 1
node 2
node 3
node 4
edge 1 2
edge 2 3
edge 3 4
edge 4 1
at 10 linkdown 1 2
at 12.5 join 5 1 3
at 20 leave 3
at 30 linkup 1 2
";

    #[test]
    fn parse_and_round_trip() {
        let sc: Scenario = RING.parse().unwrap();
        assert_eq!((sc.m, sc.variant, sc.seed), (2, Variant::Mobile, 9));
        assert_eq!(sc.topology.edges().count(), 4);
        assert_eq!(sc.mobility.len(), 4);
        assert_eq!(sc.mobility[1].at, SimTime(12_500));
        let again: Scenario = sc.to_text().parse().unwrap();
        assert_eq!(again, sc);
    }

    fn err(text: &str) -> String {
        text.parse::<Scenario>().unwrap_err().to_string()
    }

    #[test]
    fn errors_name_lines() {
        assert_eq!(
            err("m=1 variant=static seed=1\nnode 1\nedge 1 1\n"),
            "line 3: self-loop on node 1"
        );
        assert_eq!(
            err("m=1 variant=static seed=1\nnode 1\nedge 1 2\n"),
            "line 3: edge references unknown node 2"
        );
        assert_eq!(
            err("m=1 variant=sideways seed=1\n"),
            "line 1: unknown variant `sideways`"
        );
        assert_eq!(
            err("m=1 variant=static seed=1\nnode 1\nfrobnicate\n"),
            "line 3: unknown directive `frobnicate`"
        );
        assert_eq!(
            err("m=1 variant=static seed=1\nnode 1\nnode 1\n"),
            "line 3: node 1 declared twice"
        );
        assert_eq!(
            err("m=1 variant=static seed=1\nnode 1\nnode 2\nedge 1 2\nat 5 linkdown 1 3\n"),
            "line 5: link 1-3 does not exist"
        );
    }

    #[test]
    fn topology_preconditions() {
        assert_eq!(
            err("m=3 variant=static seed=1\nnode 1\nnode 2\nedge 1 2\n"),
            "topology has 2 nodes but m = 3"
        );
        assert_eq!(
            err("m=1 variant=static seed=1\nnode 1\nnode 2\n"),
            "initial topology is not connected"
        );
        assert_eq!(
            err("m=0 variant=static seed=1\nnode 1\n"),
            "m must be at least 1"
        );
    }
}
