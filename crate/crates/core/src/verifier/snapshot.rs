use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::ParseError;
use crate::ids::{Color, NodeColor, NodeId};
use crate::protocol::{Message, NodeState, Token};
use crate::sim::{EventKind, EventRecord, Mobility, SimTime, Topology};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InFlight {
    pub from: NodeId,
    pub to: NodeId,
    pub message: Message,
    pub at: SimTime,
}

/// A configuration between two events: node states, messages in flight and
/// the current topology.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snapshot {
    pub topology: Topology,
    pub states: BTreeMap<NodeId, NodeState>,
    pub in_flight: BTreeMap<u64, InFlight>,
}

/// Where a token currently is.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenPosition {
    pub token: Token,
    /// Destination of an in-flight token, or the node parking it.
    pub at: NodeId,
    pub message_id: Option<u64>,
}

impl Snapshot {
    /// Every node freshly initialized, nothing in flight.
    pub fn initial(topology: Topology) -> Self {
        let states = topology.nodes().map(|v| (v, NodeState::new(v))).collect();
        Snapshot {
            topology,
            states,
            in_flight: BTreeMap::new(),
        }
    }

    pub fn color_of(&self, v: NodeId) -> NodeColor {
        self.states.get(&v).map(|s| s.col).unwrap_or_default()
    }

    /// Nodes grouped by color; free and locked nodes are left out.
    pub fn clusters(&self) -> BTreeMap<Color, BTreeSet<NodeId>> {
        let mut out: BTreeMap<Color, BTreeSet<NodeId>> = BTreeMap::new();
        for (v, s) in &self.states {
            if let NodeColor::Colored(c) = s.col {
                out.entry(c).or_default().insert(*v);
            }
        }
        out
    }

    /// In-flight tokens, then tokens parked on isolated nodes.
    pub fn tokens(&self) -> Vec<TokenPosition> {
        let mut out: Vec<TokenPosition> = self
            .in_flight
            .iter()
            .filter_map(|(id, f)| {
                f.message.as_token().map(|t| TokenPosition {
                    token: t.clone(),
                    at: f.to,
                    message_id: Some(*id),
                })
            })
            .collect();
        for (v, s) in &self.states {
            if let Some(t) = &s.held_token {
                out.push(TokenPosition {
                    token: t.clone(),
                    at: *v,
                    message_id: None,
                });
            }
        }
        out
    }

    /// Colors in a dissolution or division: named by a wave message in
    /// flight or by a node still taking part in a wave.
    pub fn wave_colors(&self) -> BTreeSet<Color> {
        let mut out: BTreeSet<Color> = self
            .in_flight
            .values()
            .flat_map(|f| f.message.wave_colors())
            .collect();
        for s in self.states.values() {
            out.extend(s.wave_colors());
        }
        out
    }

    pub fn delete_in_flight(&self) -> bool {
        self.in_flight
            .values()
            .any(|f| matches!(f.message, Message::Delete { .. }))
    }

    /// Replays one trace record. Fails on records inconsistent with the
    /// snapshot.
    pub fn apply(&mut self, rec: &EventRecord) -> Result<(), ParseError> {
        let bad = |m: String| ParseError::new(format!("event {}: {m}", rec.index));
        match &rec.event {
            EventKind::Deliver { id, .. } => {
                self.in_flight
                    .remove(id)
                    .ok_or_else(|| bad(format!("message {id} is not in flight")))?;
            }
            EventKind::Awaken { .. } => {}
            EventKind::Mobility { change } => {
                change
                    .apply(&mut self.topology)
                    .map_err(|e| bad(e.to_string()))?;
                match change {
                    Mobility::Join { node, .. } => {
                        self.states.insert(*node, NodeState::new(*node));
                    }
                    Mobility::Leave { node } => {
                        self.states.remove(node);
                    }
                    _ => {}
                }
            }
        }
        for id in &rec.dropped {
            self.in_flight
                .remove(id)
                .ok_or_else(|| bad(format!("dropped message {id} is not in flight")))?;
        }
        for e in &rec.effects {
            if !self.states.contains_key(&e.node) {
                return Err(bad(format!("effect on unknown node {}", e.node)));
            }
            self.states.insert(e.node, e.state.clone());
            for s in &e.sends {
                self.in_flight.insert(
                    s.id,
                    InFlight {
                        from: e.node,
                        to: s.to,
                        message: s.message.clone(),
                        at: s.at,
                    },
                );
            }
        }
        Ok(())
    }
}
