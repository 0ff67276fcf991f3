//! Circulating words: the identifier lists carried by tokens.
//!
//! Index 0 holds the most recently prepended identity. Reading a word left to
//! right and attaching every first occurrence to the entry just before it
//! yields a rooted spanning tree of the nodes the token visited.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ParseError, WordError};
use crate::ids::NodeId;
use crate::tree::RootedTree;

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Word(Vec<NodeId>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn singleton(id: NodeId) -> Self {
        Word(vec![id])
    }

    pub fn from_ids<I, T>(ids: I) -> Self
    where
        I: IntoIterator<Item = T>,
        T: Into<NodeId>,
    {
        Word(ids.into_iter().map(Into::into).collect())
    }

    pub fn entries(&self) -> &[NodeId] {
        &self.0
    }

    pub fn size(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn head(&self) -> Option<NodeId> {
        self.0.first().copied()
    }

    pub fn identities(&self) -> BTreeSet<NodeId> {
        self.0.iter().copied().collect()
    }

    pub fn nb_identities(&self) -> usize {
        self.identities().len()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.0.contains(&id)
    }

    /// Prepends `id`.
    pub fn add_begin(&self, id: NodeId) -> Word {
        let mut v = Vec::with_capacity(self.0.len() + 1);
        v.push(id);
        v.extend_from_slice(&self.0);
        Word(v)
    }

    /// Reduces a word at node `i`, which must be its head.
    ///
    /// First runs the reduction loop: after every occurrence of `i`, entries
    /// that repeat their predecessor or that would hang an unseen non-neighbor
    /// under `i` are deleted. The loop never deletes the last entry. Then only
    /// the entries the tree needs are kept: every first occurrence, plus the
    /// entry right before a first occurrence when it differs from the last
    /// kept one. The result has at most `2 * nb_identities - 1` entries.
    pub fn clean(&self, i: NodeId, neighbors: &BTreeSet<NodeId>) -> Result<Word, WordError> {
        if self.head() != Some(i) {
            return Err(WordError::WrongHead {
                expected: i,
                found: self.head(),
            });
        }
        let mut w = self.0.clone();
        let mut visited = BTreeSet::from([w[0]]);
        let mut z = 0;
        while z + 1 < w.len() {
            if w[z] == i {
                while w.len() > z + 2
                    && (w[z + 1] == w[z]
                        || (!visited.contains(&w[z + 1]) && !neighbors.contains(&w[z + 1])))
                {
                    w.remove(z + 1);
                }
            }
            visited.insert(w[z + 1]);
            z += 1;
        }
        Ok(Word(compact(&w)))
    }

    pub fn build_tree(&self) -> Result<RootedTree, WordError> {
        RootedTree::from_word(self)
    }
}

/// Keeps first occurrences and the anchors they attach to.
fn compact(w: &[NodeId]) -> Vec<NodeId> {
    let mut seen = BTreeSet::new();
    let first: Vec<bool> = w.iter().map(|id| seen.insert(*id)).collect();
    let mut out: Vec<NodeId> = Vec::with_capacity(w.len());
    for k in 0..w.len() {
        let keep = if first[k] {
            true
        } else {
            first.get(k + 1).copied().unwrap_or(false) && out.last() != Some(&w[k])
        };
        if keep {
            out.push(w[k]);
        }
    }
    out
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("<")?;
        for (k, id) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{id}")?;
        }
        f.write_str(">")
    }
}

impl FromStr for Word {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let inner = s
            .trim()
            .strip_prefix('<')
            .and_then(|r| r.strip_suffix('>'))
            .ok_or_else(|| ParseError::new(format!("invalid word `{s}`")))?;
        if inner.trim().is_empty() {
            return Ok(Word::empty());
        }
        inner
            .split(',')
            .map(str::parse)
            .collect::<Result<Vec<_>, _>>()
            .map(Word)
    }
}

impl From<Word> for String {
    fn from(w: Word) -> String {
        w.to_string()
    }
}

impl TryFrom<String> for Word {
    type Error = ParseError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}
