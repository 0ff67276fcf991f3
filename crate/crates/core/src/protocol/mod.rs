//! The per-node clustering state machine.
//!
//! Every handler is a pure transition `(state, event) -> (state', sends)`.
//! Random choices (the awakening coin and the neighbor a token is forwarded
//! to) are drawn by the caller and passed in through [`Env`].

mod handlers;
mod message;
mod state;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use message::{DivisionWave, Message, Token};
pub use state::{DissolutionRole, DivisionRole, NodeState, PendingToken};

use crate::error::ParseError;
use crate::ids::NodeId;

/// Static networks, or networks whose links and nodes come and go.
///
/// The mobile variant adds token repair, father pointers, versioned colors,
/// `Delete` waves and token regeneration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Static,
    Mobile,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Static => "static",
            Variant::Mobile => "mobile",
        })
    }
}

impl FromStr for Variant {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "static" => Ok(Variant::Static),
            "mobile" => Ok(Variant::Mobile),
            other => Err(ParseError::new(format!("unknown variant `{other}`"))),
        }
    }
}

/// Protocol parameters shared by every node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Protocol {
    pub variant: Variant,
    /// Minimum cluster size.
    pub m: usize,
}

/// What a handler may observe besides its own state.
#[derive(Clone, Copy, Debug)]
pub struct Env<'a> {
    /// Current neighbors of the node.
    pub neighbors: &'a BTreeSet<NodeId>,
    /// Uniformly chosen neighbor, used when the handler forwards a token.
    pub chosen: Option<NodeId>,
}

/// Anomalies a handler detected. The offending input is dropped.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "fault")]
pub enum Fault {
    MalformedToken { from: NodeId },
    NotInTree { message: String },
    OverlappingWave { message: String },
    UnexpectedFeedback { message: String, from: NodeId },
    UnreachableDestination { to: NodeId, message: String },
    OutsideDivision,
}

impl fmt::Display for Fault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fault::MalformedToken { from } => write!(f, "malformed token from {from}"),
            Fault::NotInTree { message } => write!(f, "{message} for a tree without this node"),
            Fault::OverlappingWave { message } => write!(f, "{message} while already in a wave"),
            Fault::UnexpectedFeedback { message, from } => {
                write!(f, "unexpected {message} from {from}")
            }
            Fault::UnreachableDestination { to, message } => {
                write!(f, "{message} to non-neighbor {to} dropped")
            }
            Fault::OutsideDivision => f.write_str("division reached a node in neither half"),
        }
    }
}

/// Result of one handler invocation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HandlerOutput {
    pub state: NodeState,
    /// Outgoing messages in emission order. Every destination is a neighbor.
    pub sends: Vec<(NodeId, Message)>,
    pub faults: Vec<Fault>,
}

impl HandlerOutput {
    pub fn unchanged(state: &NodeState) -> Self {
        HandlerOutput {
            state: state.clone(),
            sends: Vec::new(),
            faults: Vec::new(),
        }
    }
}
