use std::fmt;

use thiserror::Error;

use crate::ids::NodeId;

/// A text-format parse failure, optionally tied to a 1-based line number.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ParseError {
    pub line: Option<usize>,
    pub message: String,
}

impl ParseError {
    pub fn new(message: impl Into<String>) -> Self {
        ParseError {
            line: None,
            message: message.into(),
        }
    }

    pub fn at_line(mut self, line: usize) -> Self {
        self.line.get_or_insert(line);
        self
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WordError {
    #[error("empty word")]
    EmptyWord,
    #[error("word must start with executing node {expected}, found {found:?}")]
    WrongHead {
        expected: NodeId,
        found: Option<NodeId>,
    },
    #[error("node {0} is not in the tree")]
    NotInTree(NodeId),
    #[error("tree is not divisible for m = {0}")]
    NotDivisible(usize),
    #[error("malformed tree: {0}")]
    MalformedTree(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("self-loop on node {0}")]
    SelfLoop(NodeId),
    #[error("node {0} declared twice")]
    DuplicateNode(NodeId),
    #[error("edge references unknown node {0}")]
    UnknownNode(NodeId),
    #[error("initial topology is not connected")]
    Disconnected,
    #[error("topology has {n} nodes but m = {m}")]
    TooFewNodes { n: usize, m: usize },
    #[error("m must be at least 1")]
    ZeroM,
    #[error("link {0}-{1} does not exist")]
    LinkAbsent(NodeId, NodeId),
    #[error("link {0}-{1} already exists")]
    LinkPresent(NodeId, NodeId),
    #[error("node {0} already present")]
    NodePresent(NodeId),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("line {line}: {inner}")]
    AtLine {
        line: usize,
        inner: Box<ScenarioError>,
    },
}

impl ScenarioError {
    pub fn at_line(self, line: usize) -> Self {
        match self {
            ScenarioError::Parse(p) => ScenarioError::Parse(p.at_line(line)),
            e @ ScenarioError::AtLine { .. } => e,
            e => ScenarioError::AtLine {
                line,
                inner: Box::new(e),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("node set of size {size} exceeds the oracle cap {cap}")]
    CapExceeded { size: usize, cap: usize },
    #[error("node {0} is not in the topology")]
    UnknownNode(NodeId),
}
