//! JSON-lines trace: a header, then one record per processed event.

use serde::{Deserialize, Serialize};

use super::{Mobility, RunConfig, SimTime, Topology};
use crate::error::ParseError;
use crate::ids::NodeId;
use crate::protocol::{Fault, Message, NodeState};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub config: RunConfig,
    pub nodes: Vec<NodeId>,
    pub edges: Vec<(NodeId, NodeId)>,
}

impl TraceHeader {
    pub fn new(config: RunConfig, topology: &Topology) -> Self {
        TraceHeader {
            config,
            nodes: topology.nodes().collect(),
            edges: topology.edges().collect(),
        }
    }

    pub fn topology(&self) -> Result<Topology, ParseError> {
        Topology::from_edges(self.nodes.iter().copied(), self.edges.iter().copied())
            .map_err(|e| ParseError::new(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EventKind {
    Deliver {
        id: u64,
        from: NodeId,
        to: NodeId,
        message: Message,
    },
    Awaken {
        node: NodeId,
        coin: bool,
    },
    Mobility {
        change: Mobility,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentMessage {
    pub id: u64,
    pub to: NodeId,
    /// Scheduled delivery time.
    pub at: SimTime,
    pub message: Message,
}

/// One handler invocation and the state it left behind.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Effect {
    pub node: NodeId,
    pub handler: String,
    pub sends: Vec<SentMessage>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub faults: Vec<Fault>,
    pub state: NodeState,
    pub digest: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub index: u64,
    pub time: SimTime,
    pub event: EventKind,
    /// In-flight message ids discarded by a topology change.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dropped: Vec<u64>,
    pub effects: Vec<Effect>,
}

impl EventRecord {
    pub fn sends(&self) -> impl Iterator<Item = (NodeId, &SentMessage)> {
        self.effects
            .iter()
            .flat_map(|e| e.sends.iter().map(move |s| (e.node, s)))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "lowercase")]
pub enum TraceRecord {
    Header(TraceHeader),
    Event(EventRecord),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub header: TraceHeader,
    pub events: Vec<EventRecord>,
}

impl Trace {
    pub fn header_line(header: &TraceHeader) -> String {
        serde_json::to_string(&TraceRecord::Header(header.clone())).expect("serializable")
    }

    pub fn event_line(ev: &EventRecord) -> String {
        serde_json::to_string(&TraceRecord::Event(ev.clone())).expect("serializable")
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = Trace::header_line(&self.header);
        out.push('\n');
        for ev in &self.events {
            out.push_str(&Trace::event_line(ev));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Trace, ParseError> {
        let mut header = None;
        let mut events = Vec::new();
        for (k, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: TraceRecord = serde_json::from_str(line).map_err(|e| {
                ParseError::new(format!("malformed trace record: {e}")).at_line(k + 1)
            })?;
            match rec {
                TraceRecord::Header(h) if header.is_none() && events.is_empty() => header = Some(h),
                TraceRecord::Header(_) => {
                    return Err(ParseError::new("unexpected second header").at_line(k + 1))
                }
                TraceRecord::Event(_) if header.is_none() => {
                    return Err(ParseError::new("event before header").at_line(k + 1))
                }
                TraceRecord::Event(e) => events.push(e),
            }
        }
        let header = header.ok_or_else(|| ParseError::new("trace has no header"))?;
        Ok(Trace { header, events })
    }
}
