use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ids::Color;
use crate::tree::RootedTree;
use crate::word::Word;

/// A random-walk token: the color of its cluster and the circulating word.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub col: Color,
    pub word: Word,
}

impl Token {
    pub fn new(col: Color, word: Word) -> Self {
        Token { col, word }
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Token({},{})", self.col, self.word)
    }
}

/// Payload shared by `Division` and `FeedbackDiv`.
///
/// `old` is the color of the cluster being split; `col1` and `col2` are the
/// colors of the two halves, `w1` (rooted at the divider) and `w2`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DivisionWave {
    pub old: Color,
    pub col1: Color,
    pub col2: Color,
    pub tree: RootedTree,
    pub w1: Word,
    pub w2: Word,
}

impl DivisionWave {
    pub fn colors(&self) -> [Color; 3] {
        [self.old, self.col1, self.col2]
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Message {
    Token(Token),
    Dissolution {
        col: Color,
        tree: RootedTree,
    },
    FeedbackDiss {
        col: Color,
        tree: RootedTree,
    },
    /// `live` is false when the sender relays the wave without having joined
    /// either half; receivers then leave the old cluster instead of joining.
    Division {
        #[serde(flatten)]
        wave: DivisionWave,
        live: bool,
    },
    FeedbackDiv {
        #[serde(flatten)]
        wave: DivisionWave,
    },
    /// Carries the color the sender left, so that nodes of other clusters
    /// that happen to name the sender as father ignore it.
    Delete {
        col: Color,
    },
    TokenAck {
        col: Color,
    },
}

impl Message {
    pub fn kind(&self) -> &'static str {
        match self {
            Message::Token(_) => "Token",
            Message::Dissolution { .. } => "Dissolution",
            Message::FeedbackDiss { .. } => "FeedbackDiss",
            Message::Division { .. } => "Division",
            Message::FeedbackDiv { .. } => "FeedbackDiv",
            Message::Delete { .. } => "Delete",
            Message::TokenAck { .. } => "TokenAck",
        }
    }

    pub fn as_token(&self) -> Option<&Token> {
        match self {
            Message::Token(t) => Some(t),
            _ => None,
        }
    }

    /// Colors whose cluster is in a transient phase while this message is in
    /// flight. Empty for tokens, acknowledgements and `Delete`.
    pub fn wave_colors(&self) -> Vec<Color> {
        match self {
            Message::Token(_) | Message::Delete { .. } | Message::TokenAck { .. } => Vec::new(),
            Message::Dissolution { col, .. } | Message::FeedbackDiss { col, .. } => vec![*col],
            Message::Division { wave, .. } | Message::FeedbackDiv { wave } => {
                wave.colors().to_vec()
            }
        }
    }
}

impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Message::Token(t) => t.fmt(f),
            Message::Dissolution { col, tree } => write!(f, "Dissolution({col},{tree})"),
            Message::FeedbackDiss { col, tree } => write!(f, "FeedbackDiss({col},{tree})"),
            Message::Division { wave, live } => write!(
                f,
                "Division({}->{}|{},{},{},{},live={live})",
                wave.old, wave.col1, wave.col2, wave.tree, wave.w1, wave.w2
            ),
            Message::FeedbackDiv { wave } => write!(
                f,
                "FeedbackDiv({}->{}|{},{},{},{})",
                wave.old, wave.col1, wave.col2, wave.tree, wave.w1, wave.w2
            ),
            Message::Delete { col } => write!(f, "Delete({col})"),
            Message::TokenAck { col } => write!(f, "TokenAck({col})"),
        }
    }
}
