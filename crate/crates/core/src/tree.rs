//! Rooted trees decoded from circulating words, and their division.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ParseError, WordError};
use crate::ids::NodeId;
use crate::word::Word;

/// A rooted tree over node identities.
///
/// Every node has an entry in `children` (possibly empty); every node except
/// the root has an entry in `parent`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct RootedTree {
    root: NodeId,
    parent: BTreeMap<NodeId, NodeId>,
    children: BTreeMap<NodeId, BTreeSet<NodeId>>,
}

impl RootedTree {
    pub fn singleton(root: NodeId) -> Self {
        RootedTree {
            root,
            parent: BTreeMap::new(),
            children: BTreeMap::from([(root, BTreeSet::new())]),
        }
    }

    /// Decodes a word: the head is the root, and each later entry not yet in
    /// the tree becomes a son of the entry preceding it.
    pub fn from_word(w: &Word) -> Result<Self, WordError> {
        let entries = w.entries();
        let root = *entries.first().ok_or(WordError::EmptyWord)?;
        let mut tree = RootedTree::singleton(root);
        for pair in entries.windows(2) {
            let (prev, cur) = (pair[0], pair[1]);
            if !tree.contains(cur) {
                tree.attach(cur, prev);
            }
        }
        Ok(tree)
    }

    /// Builds a tree from explicit `(child, parent)` edges.
    pub fn from_edges(
        root: NodeId,
        edges: impl IntoIterator<Item = (NodeId, NodeId)>,
    ) -> Result<Self, WordError> {
        let mut pending: BTreeMap<NodeId, NodeId> = BTreeMap::new();
        for (child, parent) in edges {
            if child == root || pending.insert(child, parent).is_some() {
                return Err(WordError::MalformedTree(format!(
                    "node {child} has several parents"
                )));
            }
        }
        let mut tree = RootedTree::singleton(root);
        let mut frontier = vec![root];
        while let Some(u) = frontier.pop() {
            let sons: Vec<NodeId> = pending
                .iter()
                .filter(|(_, p)| **p == u)
                .map(|(c, _)| *c)
                .collect();
            for c in sons {
                pending.remove(&c);
                tree.attach(c, u);
                frontier.push(c);
            }
        }
        if let Some((c, _)) = pending.into_iter().next() {
            return Err(WordError::MalformedTree(format!(
                "node {c} is not connected to root {root}"
            )));
        }
        Ok(tree)
    }

    fn attach(&mut self, child: NodeId, parent: NodeId) {
        self.parent.insert(child, parent);
        self.children.entry(parent).or_default().insert(child);
        self.children.entry(child).or_default();
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn len(&self) -> usize {
        self.children.len()
    }

    pub fn is_empty(&self) -> bool {
        self.children.is_empty()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.children.contains_key(&id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.children.keys().copied()
    }

    /// `(child, parent)` pairs.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.parent.iter().map(|(c, p)| (*c, *p))
    }

    pub fn my_sons(&self, id: NodeId) -> Result<&BTreeSet<NodeId>, WordError> {
        self.children.get(&id).ok_or(WordError::NotInTree(id))
    }

    pub fn my_father(&self, id: NodeId) -> Result<Option<NodeId>, WordError> {
        if !self.contains(id) {
            return Err(WordError::NotInTree(id));
        }
        Ok(self.parent.get(&id).copied())
    }

    /// Nodes of the subtree rooted at `v`, in depth-first order.
    pub fn descendants(&self, v: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![v];
        while let Some(u) = stack.pop() {
            out.push(u);
            if let Some(sons) = self.children.get(&u) {
                stack.extend(sons.iter().rev());
            }
        }
        out
    }

    pub fn subtree(&self, v: NodeId) -> Result<RootedTree, WordError> {
        if !self.contains(v) {
            return Err(WordError::NotInTree(v));
        }
        let mut t = RootedTree::singleton(v);
        for u in self.descendants(v) {
            for &c in &self.children[&u] {
                t.attach(c, u);
            }
        }
        Ok(t)
    }

    /// The tree without the subtree rooted at `v`. `v` must not be the root.
    pub fn without_subtree(&self, v: NodeId) -> Result<RootedTree, WordError> {
        if !self.contains(v) {
            return Err(WordError::NotInTree(v));
        }
        if v == self.root {
            return Err(WordError::MalformedTree("cannot remove the root".into()));
        }
        let gone: BTreeSet<NodeId> = self.descendants(v).into_iter().collect();
        let mut t = self.clone();
        for u in &gone {
            t.children.remove(u);
            t.parent.remove(u);
        }
        let p = self.parent[&v];
        t.children.get_mut(&p).expect("parent present").remove(&v);
        Ok(t)
    }

    /// Size of the subtree rooted at every node.
    pub fn subtree_sizes(&self) -> BTreeMap<NodeId, usize> {
        let mut order = self.descendants(self.root);
        order.reverse();
        let mut sizes = BTreeMap::new();
        for u in order {
            let s = 1 + self.children[&u].iter().map(|c| sizes[c]).sum::<usize>();
            sizes.insert(u, s);
        }
        sizes
    }

    /// Encodes the tree as a word: a preorder walk (sons in increasing order)
    /// that re-emits a parent before each son that does not directly follow it.
    pub fn to_word(&self) -> Word {
        let mut out = vec![self.root];
        let mut stack: Vec<(NodeId, NodeId)> = self.children[&self.root]
            .iter()
            .rev()
            .map(|c| (*c, self.root))
            .collect();
        while let Some((u, p)) = stack.pop() {
            if out.last() != Some(&p) {
                out.push(p);
            }
            out.push(u);
            stack.extend(self.children[&u].iter().rev().map(|c| (*c, u)));
        }
        Word::from_ids(out)
    }

    fn split_candidates(&self, m: usize) -> Vec<(NodeId, usize)> {
        let n = self.len();
        self.subtree_sizes()
            .into_iter()
            .filter(|(v, k)| *v != self.root && *k >= m && n - *k >= m)
            .collect()
    }

    /// True iff removing some edge leaves two trees of at least `m` nodes.
    pub fn is_divisible(&self, m: usize) -> bool {
        !self.split_candidates(m).is_empty()
    }

    /// Splits the tree in two along one edge. `w1` keeps the root; `w2` is the
    /// subtree hanging under the cut edge. Among valid cuts, the most balanced
    /// one is chosen, ties broken by the smallest subtree root.
    pub fn divide(&self, m: usize) -> Result<(Word, Word), WordError> {
        let n = self.len();
        let (v, _) = self
            .split_candidates(m)
            .into_iter()
            .min_by_key(|(v, k)| ((2 * k).abs_diff(n), *v))
            .ok_or(WordError::NotDivisible(m))?;
        let w1 = self.without_subtree(v)?.to_word();
        let w2 = self.subtree(v)?.to_word();
        Ok((w1, w2))
    }
}

impl fmt::Display for RootedTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "T{}", self.to_word())
    }
}

impl FromStr for RootedTree {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let w: Word = s
            .trim()
            .strip_prefix('T')
            .ok_or_else(|| ParseError::new(format!("invalid tree `{s}`")))?
            .parse()?;
        RootedTree::from_word(&w).map_err(|e| ParseError::new(e.to_string()))
    }
}

impl From<RootedTree> for String {
    fn from(t: RootedTree) -> String {
        t.to_string()
    }
}

impl TryFrom<String> for RootedTree {
    type Error = ParseError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(ids: &[u32]) -> Word {
        Word::from_ids(ids.iter().copied())
    }

    fn edges(t: &RootedTree) -> BTreeSet<(u32, u32)> {
        t.edges().map(|(c, p)| (p.0, c.0)).collect()
    }

    fn path(n: u32) -> RootedTree {
        RootedTree::from_edges(NodeId(1), (2..=n).map(|k| (NodeId(k), NodeId(k - 1)))).unwrap()
    }

    fn star(leaves: u32) -> RootedTree {
        RootedTree::from_edges(NodeId(0), (1..=leaves).map(|k| (NodeId(k), NodeId(0)))).unwrap()
    }

    #[test]
    fn example_tree_from_long_word() {
        let t = w(&[1, 5, 3, 2, 3, 6, 3, 2, 4]).build_tree().unwrap();
        assert_eq!(t.root(), NodeId(1));
        assert_eq!(
            edges(&t),
            BTreeSet::from([(1, 5), (5, 3), (3, 2), (3, 6), (2, 4)])
        );
        assert_eq!(
            t.my_sons(NodeId(3)).unwrap(),
            &BTreeSet::from([NodeId(2), NodeId(6)])
        );
        assert_eq!(t.my_father(NodeId(4)).unwrap(), Some(NodeId(2)));
        assert_eq!(t.my_father(NodeId(1)).unwrap(), None);
        assert_eq!(t.my_father(NodeId(9)), Err(WordError::NotInTree(NodeId(9))));
    }

    #[test]
    fn example_tree_from_reduced_word() {
        let t = w(&[1, 6, 2, 4, 1, 5, 3]).build_tree().unwrap();
        assert_eq!(
            edges(&t),
            BTreeSet::from([(1, 6), (6, 2), (2, 4), (1, 5), (5, 3)])
        );
    }

    #[test]
    fn singleton_and_empty() {
        let t = w(&[7]).build_tree().unwrap();
        assert_eq!((t.root(), t.len()), (NodeId(7), 1));
        assert_eq!(Word::empty().build_tree(), Err(WordError::EmptyWord));
        assert_eq!(t.to_word(), w(&[7]));
    }

    #[test]
    fn to_word_round_trips() {
        let t = w(&[1, 5, 3]).build_tree().unwrap();
        let enc = t.to_word();
        assert!(enc.size() <= 5);
        assert_eq!(enc.build_tree().unwrap(), t);

        let example = w(&[1, 5, 3, 2, 3, 6, 3, 2, 4]).build_tree().unwrap();
        let enc = example.to_word();
        assert!(enc.size() <= 11);
        assert_eq!(enc.build_tree().unwrap(), example);
        assert_eq!(enc, w(&[1, 5, 3, 2, 4, 3, 6]));
    }

    #[test]
    fn divisibility_small_cases() {
        assert!(path(6).is_divisible(3));
        assert!(!star(5).is_divisible(3));
        assert!(!path(5).is_divisible(3));
        let example = w(&[1, 5, 3, 2, 3, 6, 3, 2, 4]).build_tree().unwrap();
        assert!(!example.is_divisible(3));
        assert_eq!(example.divide(3), Err(WordError::NotDivisible(3)));
    }

    #[test]
    fn divide_path_in_halves() {
        let (w1, w2) = path(6).divide(3).unwrap();
        assert_eq!(w1, w(&[1, 2, 3]));
        assert_eq!(w2, w(&[4, 5, 6]));
    }

    #[test]
    fn divide_prefers_balance_then_smallest_id() {
        // Root 0 with two chains of three: both cuts give 3/4; node 1 wins.
        let t = RootedTree::from_edges(
            NodeId(0),
            [(1, 0), (2, 1), (3, 2), (4, 0), (5, 4), (6, 5)].map(|(c, p)| (NodeId(c), NodeId(p))),
        )
        .unwrap();
        let (w1, w2) = t.divide(3).unwrap();
        assert_eq!(w2, w(&[1, 2, 3]));
        assert_eq!(w1.identities().len(), 4);
        assert_eq!(w1.head(), Some(NodeId(0)));
    }

    #[test]
    fn remove_subtree() {
        let example = w(&[1, 5, 3, 2, 3, 6, 3, 2, 4]).build_tree().unwrap();
        let cut = example.without_subtree(NodeId(2)).unwrap();
        assert_eq!(edges(&cut), BTreeSet::from([(1, 5), (5, 3), (3, 6)]));
        assert!(example.without_subtree(NodeId(1)).is_err());
    }

    #[test]
    fn malformed_edges_rejected() {
        let disconnected = RootedTree::from_edges(NodeId(1), [(NodeId(3), NodeId(2))]);
        assert!(disconnected.is_err());
    }

    #[test]
    fn text_form() {
        let t: RootedTree = "T<1,5,3,1,6>".parse().unwrap();
        assert_eq!(t.to_string(), "T<1,5,3,1,6>");
    }
}
