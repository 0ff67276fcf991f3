//! Node identities and cluster colors.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::ParseError;

/// Identity of a node. Distinct per node and totally ordered.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for NodeId {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.trim()
            .parse::<u32>()
            .map(NodeId)
            .map_err(|_| ParseError::new(format!("invalid node id `{s}`")))
    }
}

impl From<u32> for NodeId {
    fn from(v: u32) -> Self {
        NodeId(v)
    }
}

/// Color of a cluster: the node that minted it plus a per-node version.
///
/// Ordered by creator first, then version. The static variant always uses
/// version 0, so the order degenerates to comparing creators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Color {
    pub creator: NodeId,
    pub version: u32,
}

impl Color {
    pub fn new(creator: impl Into<NodeId>, version: u32) -> Self {
        Color {
            creator: creator.into(),
            version,
        }
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.creator, self.version)
    }
}

impl FromStr for Color {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (c, v) = s
            .trim()
            .split_once('.')
            .ok_or_else(|| ParseError::new(format!("invalid color `{s}`")))?;
        let version = v
            .parse::<u32>()
            .map_err(|_| ParseError::new(format!("invalid color version in `{s}`")))?;
        Ok(Color {
            creator: c.parse()?,
            version,
        })
    }
}

impl From<Color> for String {
    fn from(c: Color) -> String {
        c.to_string()
    }
}

impl TryFrom<String> for Color {
    type Error = ParseError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// The `col` variable of a node: free, locked (dissolving) or a cluster color.
#[derive(
    Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(into = "String", try_from = "String")]
pub enum NodeColor {
    #[default]
    Free,
    Locked,
    Colored(Color),
}

impl NodeColor {
    pub fn is_free(&self) -> bool {
        matches!(self, NodeColor::Free)
    }

    pub fn is_locked(&self) -> bool {
        matches!(self, NodeColor::Locked)
    }

    pub fn color(&self) -> Option<Color> {
        match self {
            NodeColor::Colored(c) => Some(*c),
            _ => None,
        }
    }
}

impl From<Color> for NodeColor {
    fn from(c: Color) -> Self {
        NodeColor::Colored(c)
    }
}

impl fmt::Display for NodeColor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeColor::Free => f.write_str("free"),
            NodeColor::Locked => f.write_str("locked"),
            NodeColor::Colored(c) => c.fmt(f),
        }
    }
}

impl FromStr for NodeColor {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "free" => Ok(NodeColor::Free),
            "locked" => Ok(NodeColor::Locked),
            other => other.parse().map(NodeColor::Colored),
        }
    }
}

impl From<NodeColor> for String {
    fn from(c: NodeColor) -> String {
        c.to_string()
    }
}

impl TryFrom<String> for NodeColor {
    type Error = ParseError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}
