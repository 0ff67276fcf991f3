use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::message::{DivisionWave, Token};
use crate::ids::{Color, NodeColor, NodeId};
use crate::tree::RootedTree;
use crate::word::Word;

/// A token this node sent across a link to a node outside the token's word.
/// Cleared when the token comes back or the receiver acknowledges it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingToken {
    pub neighbor: NodeId,
    pub token: Token,
}

/// Participation in a dissolution wave.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DissolutionRole {
    pub col: Color,
    pub tree: RootedTree,
    /// Whether this node locked itself for the wave (as opposed to relaying).
    pub adopted: bool,
    /// Sons that still owe a feedback.
    pub waiting: BTreeSet<NodeId>,
}

/// Participation in a division wave.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DivisionRole {
    pub wave: DivisionWave,
    pub adopted: bool,
    pub waiting: BTreeSet<NodeId>,
}

/// Protocol variables of one node.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeState {
    pub id: NodeId,
    pub col: NodeColor,
    /// Saved copy of the last own-colored word seen here.
    pub word: Word,
    pub nb_feedback_div: usize,
    pub nb_feedback_diss: usize,
    /// Node this one last sent its cluster's token to (mobile variant).
    pub father: Option<NodeId>,
    pub version: u32,
    pub pending_token: Option<PendingToken>,
    /// Token kept here because the node had no neighbor to forward it to.
    pub held_token: Option<Token>,
    pub dissolution: Option<DissolutionRole>,
    pub division: Option<DivisionRole>,
}

impl NodeState {
    pub fn new(id: NodeId) -> Self {
        NodeState {
            id,
            col: NodeColor::Free,
            word: Word::empty(),
            nb_feedback_div: 0,
            nb_feedback_diss: 0,
            father: None,
            version: 0,
            pending_token: None,
            held_token: None,
            dissolution: None,
            division: None,
        }
    }

    pub fn is_free(&self) -> bool {
        self.col.is_free()
    }

    /// Whether the node wants awakening events: free, or sitting on a token.
    pub fn wants_awaken(&self) -> bool {
        self.is_free() || self.held_token.is_some()
    }

    pub fn in_wave(&self) -> bool {
        self.dissolution.is_some() || self.division.is_some()
    }

    /// Colors this node is currently mid-wave for.
    pub fn wave_colors(&self) -> Vec<Color> {
        let mut out = Vec::new();
        if let Some(d) = &self.dissolution {
            out.push(d.col);
        }
        if let Some(d) = &self.division {
            out.extend(d.wave.colors());
        }
        out
    }

    /// Short hex digest of the full state.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let text = serde_json::to_string(self).expect("state serializes");
        let hash = Sha256::digest(text.as_bytes());
        hash[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}
