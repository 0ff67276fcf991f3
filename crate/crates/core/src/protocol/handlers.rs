use std::collections::BTreeSet;

use super::message::{DivisionWave, Message, Token};
use super::state::{DissolutionRole, DivisionRole, NodeState, PendingToken};
use super::{Env, Fault, HandlerOutput, Protocol, Variant};
use crate::ids::{Color, NodeColor, NodeId};
use crate::tree::RootedTree;
use crate::word::Word;

/// Mutable view of one handler run. Sends to non-neighbors become faults.
struct Step<'a> {
    state: NodeState,
    neighbors: &'a BTreeSet<NodeId>,
    chosen: Option<NodeId>,
    sends: Vec<(NodeId, Message)>,
    faults: Vec<Fault>,
}

impl<'a> Step<'a> {
    fn new(state: &NodeState, env: Env<'a>) -> Self {
        Step {
            state: state.clone(),
            neighbors: env.neighbors,
            chosen: env.chosen,
            sends: Vec::new(),
            faults: Vec::new(),
        }
    }

    fn id(&self) -> NodeId {
        self.state.id
    }

    fn send(&mut self, to: NodeId, msg: Message) {
        if self.neighbors.contains(&to) {
            self.sends.push((to, msg));
        } else {
            self.faults.push(Fault::UnreachableDestination {
                to,
                message: msg.kind().to_string(),
            });
        }
    }

    fn reachable(&self, ids: &BTreeSet<NodeId>) -> BTreeSet<NodeId> {
        ids.intersection(self.neighbors).copied().collect()
    }

    fn finish(self) -> HandlerOutput {
        HandlerOutput {
            state: self.state,
            sends: self.sends,
            faults: self.faults,
        }
    }
}

impl Protocol {
    pub fn new(variant: Variant, m: usize) -> Self {
        Protocol { variant, m }
    }

    fn mobile(&self) -> bool {
        self.variant == Variant::Mobile
    }

    pub fn on_init(&self, id: NodeId) -> NodeState {
        NodeState::new(id)
    }

    pub fn on_awaken(&self, s: &NodeState, env: Env<'_>, coin: bool) -> HandlerOutput {
        let mut st = Step::new(s, env);
        if st.state.held_token.is_some() {
            if st.chosen.is_some() {
                let token = st.state.held_token.take().expect("checked");
                self.release_held(&mut st, token);
            }
            return st.finish();
        }
        if !st.state.is_free() || !coin {
            return st.finish();
        }
        let col = self.mint(&mut st.state);
        let word = Word::singleton(st.id());
        st.state.col = NodeColor::Colored(col);
        st.state.word = word.clone();
        self.emit_token(&mut st, Token::new(col, word));
        st.finish()
    }

    pub fn on_message(
        &self,
        s: &NodeState,
        env: Env<'_>,
        from: NodeId,
        msg: &Message,
    ) -> HandlerOutput {
        match msg {
            Message::Token(t) => self.on_token(s, env, from, t),
            Message::Dissolution { col, tree } => self.on_dissolution(s, env, from, *col, tree),
            Message::FeedbackDiss { col, tree } => self.on_feedback_diss(s, env, from, *col, tree),
            Message::Division { wave, live } => self.on_division(s, env, from, wave, *live),
            Message::FeedbackDiv { wave } => self.on_feedback_div(s, env, from, wave),
            Message::Delete { col } => self.on_delete(s, env, from, *col),
            Message::TokenAck { col } => self.on_token_ack(s, env, from, *col),
        }
    }

    pub fn on_token(
        &self,
        s: &NodeState,
        env: Env<'_>,
        from: NodeId,
        token: &Token,
    ) -> HandlerOutput {
        let mut st = Step::new(s, env);
        let Some(head) = token.word.head() else {
            st.faults.push(Fault::MalformedToken { from });
            return st.finish();
        };
        let id = st.id();
        if self.mobile() {
            clear_pending(&mut st.state, token.col);
        }
        let non_member = !token.word.contains(id);
        let word = if self.mobile() {
            let foreign = match st.state.col {
                NodeColor::Free => false,
                NodeColor::Colored(c) => c != token.col,
                NodeColor::Locked => true,
            };
            let word = repair(&token.word, id, st.neighbors);
            if foreign {
                prune_self(&word, id)
            } else {
                word
            }
        } else {
            token.word.clone()
        };
        let token = Token::new(token.col, word);

        match st.state.col {
            NodeColor::Free => self.case_one(&mut st, token, from, non_member),
            NodeColor::Colored(c) if c == token.col => {
                self.case_one(&mut st, token, from, non_member)
            }
            NodeColor::Locked => st.send(head, Message::Token(token)),
            NodeColor::Colored(c) => {
                let small = token.word.nb_identities() < self.m;
                if small && (st.state.word.nb_identities() >= self.m || c > token.col) {
                    let tree = token.word.build_tree().expect("token word is non-empty");
                    st.send(
                        head,
                        Message::Dissolution {
                            col: token.col,
                            tree,
                        },
                    );
                } else {
                    st.send(head, Message::Token(token));
                }
            }
        }
        st.finish()
    }

    fn case_one(&self, st: &mut Step<'_>, token: Token, from: NodeId, non_member: bool) {
        if self.mobile() && non_member {
            st.send(from, Message::TokenAck { col: token.col });
        }
        self.accept(st, token);
    }

    /// Prepend, clean, then divide or join and forward.
    fn accept(&self, st: &mut Step<'_>, token: Token) {
        let id = st.id();
        let word = token
            .word
            .add_begin(id)
            .clean(id, st.neighbors)
            .expect("head is the executing node");
        let tree = word.build_tree().expect("non-empty");
        if let Ok((w1, w2)) = tree.divide(self.m) {
            let (col1, col2) = self.mint_pair(&mut st.state, &w2);
            st.state.col = NodeColor::Colored(col1);
            st.state.word = w1.clone();
            if self.mobile() {
                st.state.father = None;
                st.state.pending_token = None;
            }
            let wave = DivisionWave {
                old: token.col,
                col1,
                col2,
                tree,
                w1,
                w2,
            };
            self.propagate_division(st, wave, true);
        } else {
            st.state.col = NodeColor::Colored(token.col);
            st.state.word = word.clone();
            self.emit_token(st, Token::new(token.col, word));
        }
    }

    /// A token parked on an isolated node is reinjected once a neighbor exists.
    fn release_held(&self, st: &mut Step<'_>, token: Token) {
        match st.state.col {
            NodeColor::Free => self.accept(st, token),
            NodeColor::Colored(c) if c == token.col => self.accept(st, token),
            _ => self.emit_token(st, token),
        }
    }

    fn emit_token(&self, st: &mut Step<'_>, token: Token) {
        let Some(j) = st.chosen else {
            st.state.held_token = Some(token);
            return;
        };
        if self.mobile() {
            st.state.father = Some(j);
            st.state.pending_token = (!token.word.contains(j)).then(|| PendingToken {
                neighbor: j,
                token: token.clone(),
            });
        }
        st.send(j, Message::Token(token));
    }

    fn mint(&self, s: &mut NodeState) -> Color {
        match self.variant {
            Variant::Static => Color::new(s.id, 0),
            Variant::Mobile => {
                let c = Color::new(s.id, s.version);
                s.version += 1;
                c
            }
        }
    }

    fn mint_pair(&self, s: &mut NodeState, w2: &Word) -> (Color, Color) {
        match self.variant {
            Variant::Static => {
                let r2 = w2.head().expect("division halves are non-empty");
                (Color::new(s.id, 0), Color::new(r2, 0))
            }
            Variant::Mobile => {
                let c1 = self.mint(s);
                let c2 = self.mint(s);
                (c1, c2)
            }
        }
    }

    pub fn on_dissolution(
        &self,
        s: &NodeState,
        env: Env<'_>,
        from: NodeId,
        col: Color,
        tree: &RootedTree,
    ) -> HandlerOutput {
        let mut st = Step::new(s, env);
        let id = st.id();
        let Ok(sons) = tree.my_sons(id) else {
            st.faults.push(Fault::NotInTree {
                message: "Dissolution".into(),
            });
            return st.finish();
        };
        if st.state.dissolution.is_some() {
            st.faults.push(Fault::OverlappingWave {
                message: "Dissolution".into(),
            });
            // Already relaying another wave: free the node at once and
            // forward without waiting, so the second wave still completes.
            if self.mobile() {
                clear_pending(&mut st.state, col);
                if st.state.father == Some(from) && st.state.col == NodeColor::Colored(col) {
                    st.state.col = NodeColor::Free;
                    st.state.word = Word::empty();
                    st.state.father = None;
                }
                for j in st.reachable(sons) {
                    st.send(
                        j,
                        Message::Dissolution {
                            col,
                            tree: tree.clone(),
                        },
                    );
                }
            }
            st.send(
                from,
                Message::FeedbackDiss {
                    col,
                    tree: tree.clone(),
                },
            );
            return st.finish();
        }
        let adopted = match self.variant {
            Variant::Static => true,
            Variant::Mobile => {
                clear_pending(&mut st.state, col);
                st.state.father == Some(from) && st.state.col == NodeColor::Colored(col)
            }
        };
        if adopted {
            st.state.col = NodeColor::Locked;
            st.state.word = Word::empty();
        }
        let waiting = st.reachable(sons);
        for &j in &waiting {
            st.send(
                j,
                Message::Dissolution {
                    col,
                    tree: tree.clone(),
                },
            );
        }
        st.state.nb_feedback_diss = 0;
        st.state.dissolution = Some(DissolutionRole {
            col,
            tree: tree.clone(),
            adopted,
            waiting,
        });
        self.check_dissolution(&mut st);
        st.finish()
    }

    pub fn on_feedback_diss(
        &self,
        s: &NodeState,
        env: Env<'_>,
        from: NodeId,
        col: Color,
        tree: &RootedTree,
    ) -> HandlerOutput {
        let mut st = Step::new(s, env);
        let expected = st
            .state
            .dissolution
            .as_mut()
            .filter(|r| r.col == col && &r.tree == tree)
            .map(|r| r.waiting.remove(&from))
            .unwrap_or(false);
        if !expected {
            st.faults.push(Fault::UnexpectedFeedback {
                message: "FeedbackDiss".into(),
                from,
            });
            return st.finish();
        }
        st.state.nb_feedback_diss += 1;
        self.check_dissolution(&mut st);
        st.finish()
    }

    fn check_dissolution(&self, st: &mut Step<'_>) {
        if !st
            .state
            .dissolution
            .as_ref()
            .is_some_and(|r| r.waiting.is_empty())
        {
            return;
        }
        let role = st.state.dissolution.take().expect("checked");
        let id = st.id();
        if let Ok(Some(f)) = role.tree.my_father(id) {
            st.send(
                f,
                Message::FeedbackDiss {
                    col: role.col,
                    tree: role.tree.clone(),
                },
            );
        }
        if role.adopted && st.state.col.is_locked() {
            st.state.col = NodeColor::Free;
            st.state.father = None;
        }
    }

    pub fn on_division(
        &self,
        s: &NodeState,
        env: Env<'_>,
        from: NodeId,
        wave: &DivisionWave,
        live: bool,
    ) -> HandlerOutput {
        let mut st = Step::new(s, env);
        let id = st.id();
        if !wave.tree.contains(id) {
            st.faults.push(Fault::NotInTree {
                message: "Division".into(),
            });
            return st.finish();
        }
        if st.state.division.is_some() {
            st.faults.push(Fault::OverlappingWave {
                message: "Division".into(),
            });
            if wave.w2.head() != Some(id) {
                st.send(from, Message::FeedbackDiv { wave: wave.clone() });
            }
            return st.finish();
        }
        let side = if wave.w1.contains(id) {
            Some((wave.col1, &wave.w1))
        } else if wave.w2.contains(id) {
            Some((wave.col2, &wave.w2))
        } else {
            None
        };
        let adopted = match self.variant {
            Variant::Static => {
                if side.is_none() {
                    st.faults.push(Fault::OutsideDivision);
                    return st.finish();
                }
                true
            }
            Variant::Mobile => {
                clear_pending(&mut st.state, wave.old);
                let own =
                    st.state.father == Some(from) && st.state.col == NodeColor::Colored(wave.old);
                if own && live && side.is_some() {
                    true
                } else {
                    if own {
                        release(&mut st.state);
                    }
                    false
                }
            }
        };
        if adopted {
            let (col, word) = side.expect("adoption requires a side");
            st.state.col = NodeColor::Colored(col);
            st.state.word = word.clone();
            if self.mobile() && word.head() == Some(id) {
                st.state.father = None;
            }
        }
        self.propagate_division(&mut st, wave.clone(), adopted);
        st.finish()
    }

    /// Forwards the wave to reachable sons and waits for those on this
    /// node's own side of the cut.
    fn propagate_division(&self, st: &mut Step<'_>, wave: DivisionWave, adopted: bool) {
        let id = st.id();
        let sons = wave.tree.my_sons(id).cloned().unwrap_or_default();
        let forwarded = st.reachable(&sons);
        for &j in &forwarded {
            st.send(
                j,
                Message::Division {
                    wave: wave.clone(),
                    live: adopted,
                },
            );
        }
        let side_word = if wave.w1.contains(id) {
            Some(&wave.w1)
        } else if wave.w2.contains(id) {
            Some(&wave.w2)
        } else {
            None
        };
        let side_sons = side_word
            .and_then(|w| w.build_tree().ok())
            .and_then(|t| t.my_sons(id).ok().cloned())
            .unwrap_or_default();
        let waiting = forwarded.intersection(&side_sons).copied().collect();
        st.state.nb_feedback_div = 0;
        st.state.division = Some(DivisionRole {
            wave,
            adopted,
            waiting,
        });
        self.check_division(st);
    }

    pub fn on_feedback_div(
        &self,
        s: &NodeState,
        env: Env<'_>,
        from: NodeId,
        wave: &DivisionWave,
    ) -> HandlerOutput {
        let mut st = Step::new(s, env);
        let expected = st
            .state
            .division
            .as_mut()
            .filter(|r| &r.wave == wave)
            .map(|r| r.waiting.remove(&from))
            .unwrap_or(false);
        if !expected {
            st.faults.push(Fault::UnexpectedFeedback {
                message: "FeedbackDiv".into(),
                from,
            });
            return st.finish();
        }
        st.state.nb_feedback_div += 1;
        self.check_division(&mut st);
        st.finish()
    }

    fn check_division(&self, st: &mut Step<'_>) {
        if !st
            .state
            .division
            .as_ref()
            .is_some_and(|r| r.waiting.is_empty())
        {
            return;
        }
        let DivisionRole { wave, adopted, .. } = st.state.division.take().expect("checked");
        let id = st.id();
        let holds = |c: Color| adopted && st.state.col == NodeColor::Colored(c);
        if wave.w1.head() == Some(id) {
            if holds(wave.col1) {
                self.emit_token(st, Token::new(wave.col1, wave.w1));
            }
        } else if wave.w2.head() == Some(id) {
            if holds(wave.col2) {
                self.emit_token(st, Token::new(wave.col2, wave.w2));
            }
        } else if let Ok(Some(f)) = wave.tree.my_father(id) {
            st.send(f, Message::FeedbackDiv { wave });
        }
    }

    pub fn on_delete(
        &self,
        s: &NodeState,
        env: Env<'_>,
        from: NodeId,
        col: Color,
    ) -> HandlerOutput {
        let mut st = Step::new(s, env);
        if self.mobile() && st.state.father == Some(from) && st.state.col == NodeColor::Colored(col)
        {
            release(&mut st.state);
            broadcast_delete(&mut st, col);
        }
        st.finish()
    }

    pub fn on_token_ack(
        &self,
        s: &NodeState,
        env: Env<'_>,
        from: NodeId,
        col: Color,
    ) -> HandlerOutput {
        let mut st = Step::new(s, env);
        if st
            .state
            .pending_token
            .as_ref()
            .is_some_and(|p| p.neighbor == from && p.token.col == col)
        {
            st.state.pending_token = None;
        }
        st.finish()
    }

    /// `env.neighbors` must already exclude `lost`.
    pub fn on_link_down(&self, s: &NodeState, env: Env<'_>, lost: NodeId) -> HandlerOutput {
        let mut st = Step::new(s, env);
        if self.mobile() {
            let pending = st.state.pending_token.take_if(|p| p.neighbor == lost);
            if let Some(p) = pending {
                match st.state.col {
                    NodeColor::Colored(c) if c == p.token.col => self.accept(&mut st, p.token),
                    _ => {}
                }
            } else if st.state.father == Some(lost) {
                let old = st.state.col;
                release(&mut st.state);
                if let NodeColor::Colored(c) = old {
                    broadcast_delete(&mut st, c);
                }
            }
        }
        if let Some(r) = st.state.dissolution.as_mut() {
            if r.waiting.remove(&lost) {
                self.check_dissolution(&mut st);
            }
        }
        if let Some(r) = st.state.division.as_mut() {
            if r.waiting.remove(&lost) {
                self.check_division(&mut st);
            }
        }
        st.finish()
    }
}

fn clear_pending(s: &mut NodeState, col: Color) {
    if s.pending_token.as_ref().is_some_and(|p| p.token.col == col) {
        s.pending_token = None;
    }
}

/// Leaves the cluster. Wave roles stay so that ongoing waves still terminate.
fn release(s: &mut NodeState) {
    s.col = NodeColor::Free;
    s.father = None;
    s.word = Word::empty();
    s.pending_token = None;
}

fn broadcast_delete(st: &mut Step<'_>, col: Color) {
    for &j in st.neighbors {
        st.sends.push((j, Message::Delete { col }));
    }
}

/// Drops the subtrees of sons of `id` that are no longer neighbors.
fn repair(word: &Word, id: NodeId, neighbors: &BTreeSet<NodeId>) -> Word {
    let Ok(mut tree) = word.build_tree() else {
        return word.clone();
    };
    let Ok(sons) = tree.my_sons(id) else {
        return word.clone();
    };
    let gone: Vec<NodeId> = sons.difference(neighbors).copied().collect();
    if gone.is_empty() {
        return word.clone();
    }
    for j in gone {
        tree = tree.without_subtree(j).expect("son is not the root");
    }
    tree.to_word()
}

/// Drops the subtree rooted at a node that the word still lists although the
/// node now belongs elsewhere (freed by a `Delete` wave, then recruited).
fn prune_self(word: &Word, id: NodeId) -> Word {
    let Ok(tree) = word.build_tree() else {
        return word.clone();
    };
    if !tree.contains(id) || tree.root() == id {
        return word.clone();
    }
    tree.without_subtree(id).expect("not the root").to_word()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(x: u32) -> NodeId {
        NodeId(x)
    }

    fn set(ids: &[u32]) -> BTreeSet<NodeId> {
        ids.iter().copied().map(NodeId).collect()
    }

    fn w(ids: &[u32]) -> Word {
        Word::from_ids(ids.iter().copied())
    }

    fn env(nb: &BTreeSet<NodeId>, chosen: Option<u32>) -> Env<'_> {
        Env {
            neighbors: nb,
            chosen: chosen.map(NodeId),
        }
    }

    fn colored(id: u32, col: Color, word: Word) -> NodeState {
        let mut s = NodeState::new(n(id));
        s.col = NodeColor::Colored(col);
        s.word = word;
        s
    }

    const STATIC3: Protocol = Protocol {
        variant: Variant::Static,
        m: 3,
    };
    const MOBILE3: Protocol = Protocol {
        variant: Variant::Mobile,
        m: 3,
    };

    #[test]
    fn init_is_free() {
        let s = STATIC3.on_init(n(5));
        assert!(s.is_free());
        assert!(s.word.is_empty());
        let mut t = STATIC3.on_init(n(6));
        t.id = n(5);
        assert_eq!(s, t);
    }

    #[test]
    fn awaken_coin_false_is_noop() {
        let s = NodeState::new(n(3));
        let nb = set(&[8]);
        let out = MOBILE3.on_awaken(&s, env(&nb, Some(8)), false);
        assert_eq!(out, HandlerOutput::unchanged(&s));
    }

    #[test]
    fn awaken_creates_versioned_token() {
        let s = NodeState::new(n(3));
        let nb = set(&[8]);
        let out = MOBILE3.on_awaken(&s, env(&nb, Some(8)), true);
        let c = Color::new(3u32, 0);
        assert_eq!(out.state.col, NodeColor::Colored(c));
        assert_eq!(out.state.father, Some(n(8)));
        assert_eq!(out.state.version, 1);
        assert_eq!(
            out.sends,
            vec![(n(8), Message::Token(Token::new(c, w(&[3]))))]
        );
    }

    #[test]
    fn awaken_clustered_is_noop() {
        let s = colored(3, Color::new(1u32, 0), w(&[1, 3]));
        let nb = set(&[1]);
        assert!(STATIC3
            .on_awaken(&s, env(&nb, Some(1)), true)
            .sends
            .is_empty());
    }

    #[test]
    fn isolated_node_parks_then_releases_token() {
        let s = NodeState::new(n(4));
        let none = set(&[]);
        let out = STATIC3.on_awaken(&s, env(&none, None), true);
        assert!(out.sends.is_empty());
        assert!(out.state.held_token.is_some());
        let nb = set(&[2]);
        let out = STATIC3.on_awaken(&out.state, env(&nb, Some(2)), true);
        assert!(out.state.held_token.is_none());
        assert_eq!(
            out.sends,
            vec![(
                n(2),
                Message::Token(Token::new(Color::new(4u32, 0), w(&[4])))
            )]
        );
    }

    #[test]
    fn free_node_joins_and_forwards() {
        let s = NodeState::new(n(9));
        let nb = set(&[3, 4]);
        let c = Color::new(3u32, 0);
        let out = STATIC3.on_token(&s, env(&nb, Some(4)), n(3), &Token::new(c, w(&[3])));
        assert_eq!(out.state.col, NodeColor::Colored(c));
        assert_eq!(out.state.word, w(&[9, 3]));
        assert_eq!(
            out.sends,
            vec![(n(4), Message::Token(Token::new(c, w(&[9, 3]))))]
        );
    }

    #[test]
    fn mobile_newcomer_acknowledges() {
        let s = NodeState::new(n(9));
        let nb = set(&[3, 4]);
        let c = Color::new(3u32, 0);
        let out = MOBILE3.on_token(&s, env(&nb, Some(4)), n(3), &Token::new(c, w(&[3])));
        assert_eq!(out.sends[0], (n(3), Message::TokenAck { col: c }));
        assert_eq!(out.state.father, Some(n(4)));
        assert_eq!(out.state.pending_token.as_ref().unwrap().neighbor, n(4));
    }

    #[test]
    fn locked_node_bounces() {
        let mut s = NodeState::new(n(2));
        s.col = NodeColor::Locked;
        let nb = set(&[7]);
        let t = Token::new(Color::new(7u32, 0), w(&[7, 5]));
        let out = STATIC3.on_token(&s, env(&nb, Some(7)), n(7), &t);
        assert_eq!(out.state, s);
        assert_eq!(out.sends, vec![(n(7), Message::Token(t))]);
    }

    #[test]
    fn stable_node_dissolves_small_foreign_cluster() {
        let blue = Color::new(1u32, 0);
        let red = Color::new(8u32, 0);
        let s = colored(2, blue, w(&[1, 2, 3, 4]));
        let nb = set(&[1, 7]);
        let t = Token::new(red, w(&[7, 8]));
        let out = STATIC3.on_token(&s, env(&nb, Some(1)), n(7), &t);
        assert_eq!(out.state, s);
        assert_eq!(
            out.sends,
            vec![(
                n(7),
                Message::Dissolution {
                    col: red,
                    tree: w(&[7, 8]).build_tree().unwrap()
                }
            )]
        );
    }

    #[test]
    fn small_lower_cluster_bounces_foreign_token() {
        let s = colored(2, Color::new(1u32, 0), w(&[2, 1]));
        let nb = set(&[1, 7]);
        let t = Token::new(Color::new(8u32, 0), w(&[7, 8]));
        let out = STATIC3.on_token(&s, env(&nb, Some(1)), n(7), &t);
        assert_eq!(out.sends, vec![(n(7), Message::Token(t))]);
    }

    #[test]
    fn own_token_on_path_of_six_divides() {
        let c = Color::new(5u32, 0);
        let s = colored(1, c, w(&[1, 2, 3, 4, 5, 6]));
        let nb = set(&[2]);
        let t = Token::new(c, w(&[2, 3, 4, 5, 6]));
        let out = STATIC3.on_token(&s, env(&nb, Some(2)), n(2), &t);
        let (to, msg) = &out.sends[0];
        assert_eq!((out.sends.len(), *to), (1, n(2)));
        let Message::Division { wave, live } = msg else {
            panic!("expected a division, got {msg}");
        };
        assert!(live);
        assert_eq!(wave.w1.nb_identities(), 3);
        assert_eq!(wave.w2.nb_identities(), 3);
        assert_eq!(out.state.col, NodeColor::Colored(Color::new(1u32, 0)));
        assert_eq!(out.state.word, wave.w1);
    }

    #[test]
    fn dissolution_leaf_frees_internal_locks() {
        let c = Color::new(1u32, 0);
        let tree = w(&[1, 2, 1, 3]).build_tree().unwrap();
        let leaf = colored(3, c, w(&[1, 3]));
        let nb = set(&[1]);
        let out = STATIC3.on_dissolution(&leaf, env(&nb, None), n(1), c, &tree);
        assert!(out.state.is_free());
        assert_eq!(
            out.sends,
            vec![(
                n(1),
                Message::FeedbackDiss {
                    col: c,
                    tree: tree.clone()
                }
            )]
        );

        let root = colored(1, c, w(&[1, 2]));
        let nb = set(&[2, 3, 9]);
        let out = STATIC3.on_dissolution(&root, env(&nb, None), n(9), c, &tree);
        assert!(out.state.col.is_locked());
        assert_eq!(out.sends.len(), 2);
        let one = STATIC3.on_feedback_diss(&out.state, env(&nb, None), n(2), c, &tree);
        assert!(one.state.col.is_locked() && one.sends.is_empty());
        let two = STATIC3.on_feedback_diss(&one.state, env(&nb, None), n(3), c, &tree);
        assert!(two.state.is_free() && two.sends.is_empty());
        assert!(two.state.dissolution.is_none());
    }

    #[test]
    fn mobile_dissolution_from_non_father_only_relays() {
        let c = Color::new(1u32, 0);
        let tree = w(&[1, 3]).build_tree().unwrap();
        let mut s = colored(3, c, w(&[1, 3]));
        s.father = Some(n(5));
        let nb = set(&[1, 5]);
        let out = MOBILE3.on_dissolution(&s, env(&nb, None), n(1), c, &tree);
        assert_eq!(out.state.col, NodeColor::Colored(c));
        assert_eq!(
            out.sends,
            vec![(n(1), Message::FeedbackDiss { col: c, tree })]
        );
    }

    #[test]
    fn unexpected_feedback_is_a_fault() {
        let c = Color::new(1u32, 0);
        let tree = w(&[1, 3]).build_tree().unwrap();
        let s = colored(1, c, w(&[1, 3]));
        let nb = set(&[3]);
        let out = STATIC3.on_feedback_diss(&s, env(&nb, None), n(3), c, &tree);
        assert_eq!(out.faults.len(), 1);
        assert_eq!(out.state, s);
    }

    fn path6_wave() -> DivisionWave {
        let tree = w(&[1, 2, 3, 4, 5, 6]).build_tree().unwrap();
        let (w1, w2) = tree.divide(3).unwrap();
        DivisionWave {
            old: Color::new(5u32, 0),
            col1: Color::new(1u32, 0),
            col2: Color::new(4u32, 0),
            tree,
            w1,
            w2,
        }
    }

    #[test]
    fn division_pif_on_path_yields_two_tokens() {
        let wave = path6_wave();
        let p = STATIC3;
        let nbs = |i: u32| -> BTreeSet<NodeId> {
            [i.wrapping_sub(1), i + 1]
                .into_iter()
                .filter(|x| (1..=6).contains(x))
                .map(NodeId)
                .collect()
        };
        // Replays the wave with immediate in-order delivery.
        let mut states: Vec<NodeState> = (1..=6).map(|i| colored(i, wave.old, w(&[i]))).collect();
        let n1 = nbs(1);
        let t = Token::new(wave.old, w(&[2, 3, 4, 5, 6]));
        let out = p.on_token(&states[0], env(&n1, Some(2)), n(2), &t);
        states[0] = out.state;
        let mut queue: Vec<(NodeId, NodeId, Message)> =
            out.sends.into_iter().map(|(to, m)| (n(1), to, m)).collect();
        let mut tokens = Vec::new();
        let mut control = 0;
        while let Some((from, to, msg)) = queue.pop() {
            if let Message::Token(t) = msg {
                tokens.push((from, t));
                continue;
            }
            control += 1;
            let k = (to.0 - 1) as usize;
            let nb = nbs(to.0);
            let out = p.on_message(&states[k], env(&nb, nb.first().map(|x| x.0)), from, &msg);
            assert!(out.faults.is_empty(), "{:?}", out.faults);
            states[k] = out.state;
            queue.extend(out.sends.into_iter().map(|(d, m)| (to, d, m)));
        }
        // Division reaches 5 nodes; feedback climbs only inside each half.
        assert_eq!(control, 5 + 4);
        tokens.sort_by_key(|(f, _)| *f);
        assert_eq!(tokens.len(), 2);
        assert_eq!(tokens[0].1, Token::new(wave.col1, wave.w1.clone()));
        assert_eq!(tokens[1].1, Token::new(wave.col2, wave.w2.clone()));
        for s in &states {
            let expect = if s.id.0 <= 3 { wave.col1 } else { wave.col2 };
            assert_eq!(s.col, NodeColor::Colored(expect));
            assert!(s.division.is_none());
        }
    }

    #[test]
    fn division_interior_node_feeds_back_after_sons() {
        let wave = path6_wave();
        let s = colored(2, wave.old, w(&[2]));
        let nb = set(&[1, 3]);
        let out = STATIC3.on_division(&s, env(&nb, None), n(1), &wave, true);
        assert_eq!(out.state.col, NodeColor::Colored(wave.col1));
        assert_eq!(out.sends.len(), 1);
        let out = STATIC3.on_feedback_div(&out.state, env(&nb, None), n(3), &wave);
        assert_eq!(
            out.sends,
            vec![(n(1), Message::FeedbackDiv { wave: wave.clone() })]
        );
    }

    #[test]
    fn mobile_division_from_non_father_keeps_color() {
        let wave = path6_wave();
        let mut s = colored(5, wave.old, w(&[5]));
        s.father = Some(n(6));
        let nb = set(&[4, 6]);
        let out = MOBILE3.on_division(&s, env(&nb, None), n(4), &wave, true);
        assert_eq!(out.state.col, NodeColor::Colored(wave.old));
        assert_eq!(
            out.sends,
            vec![(
                n(6),
                Message::Division {
                    wave: wave.clone(),
                    live: false
                }
            )]
        );
    }

    #[test]
    fn delete_from_father_frees_and_floods() {
        let c = Color::new(1u32, 0);
        let mut s = colored(3, c, w(&[1, 3]));
        s.father = Some(n(1));
        let nb = set(&[1, 4]);
        let out = MOBILE3.on_delete(&s, env(&nb, None), n(1), c);
        assert!(out.state.is_free());
        assert_eq!(out.state.father, None);
        assert_eq!(
            out.sends,
            vec![
                (n(1), Message::Delete { col: c }),
                (n(4), Message::Delete { col: c })
            ]
        );
        let out = MOBILE3.on_delete(&s, env(&nb, None), n(4), c);
        assert_eq!(out.state, s);
    }

    #[test]
    fn delete_of_another_color_is_ignored() {
        // 3 just sent its token to 1, a node of another cluster.
        let c = Color::new(3u32, 0);
        let mut s = colored(3, c, w(&[3, 4]));
        s.father = Some(n(1));
        let nb = set(&[1, 4]);
        let out = MOBILE3.on_delete(&s, env(&nb, None), n(1), Color::new(1u32, 2));
        assert_eq!(out.state, s);
        assert!(out.sends.is_empty());
    }

    #[test]
    fn delete_chain_frees_subtree() {
        // Father pointers 4 -> 3 -> 2 -> 1; the link 2-1 drops.
        let c = Color::new(1u32, 0);
        let line = |i: u32| set(&[i - 1, i + 1]);
        let mut states: Vec<NodeState> = (2..=4)
            .map(|i| {
                let mut s = colored(i, c, w(&[1, 2, 3, 4]));
                s.father = Some(n(i - 1));
                s
            })
            .collect();
        let nb2 = set(&[3]);
        let out = MOBILE3.on_link_down(&states[0], env(&nb2, Some(3)), n(1));
        states[0] = out.state;
        let mut queue: Vec<(NodeId, NodeId)> =
            out.sends.into_iter().map(|(to, _)| (n(2), to)).collect();
        while let Some((from, to)) = queue.pop() {
            if !(2..=4).contains(&to.0) {
                continue;
            }
            let k = (to.0 - 2) as usize;
            let nb = line(to.0);
            let out = MOBILE3.on_delete(&states[k], env(&nb, None), from, c);
            states[k] = out.state;
            queue.extend(out.sends.into_iter().map(|(d, _)| (to, d)));
        }
        assert!(states.iter().all(NodeState::is_free));
    }

    #[test]
    fn link_down_regenerates_pending_token() {
        let c = Color::new(1u32, 0);
        let s = colored(2, c, w(&[1, 2]));
        let nb = set(&[1, 7]);
        let t = Token::new(c, w(&[1]));
        let out = MOBILE3.on_token(&s, env(&nb, Some(7)), n(1), &t);
        assert_eq!(out.sends[0], (n(1), Message::TokenAck { col: c }));
        let sent = out.sends[1].1.clone();
        assert_eq!(out.state.pending_token.as_ref().unwrap().neighbor, n(7));

        let after = set(&[1]);
        let out = MOBILE3.on_link_down(&out.state, env(&after, Some(1)), n(7));
        assert!(out.state.pending_token.is_none());
        assert_eq!(out.sends.len(), 1);
        assert_eq!((out.sends[0].0, &out.sends[0].1), (n(1), &sent));
        assert_eq!(out.state.father, Some(n(1)));
    }

    #[test]
    fn link_down_to_plain_neighbor_is_noop() {
        let c = Color::new(1u32, 0);
        let mut s = colored(2, c, w(&[1, 2, 3]));
        s.father = Some(n(1));
        let nb = set(&[1]);
        let out = MOBILE3.on_link_down(&s, env(&nb, Some(1)), n(3));
        assert_eq!(out, HandlerOutput::unchanged(&s));
    }

    #[test]
    fn token_repair_removes_detached_sons() {
        // 3 hangs under 2 in the word but the 2-3 link is gone.
        let repaired = repair(&w(&[1, 2, 3, 4, 1, 5]), n(2), &set(&[1]));
        assert_eq!(repaired.identities(), set(&[1, 2, 5]));
        assert_eq!(repair(&w(&[1, 2, 3]), n(2), &set(&[1, 3])), w(&[1, 2, 3]));
    }

    #[test]
    fn ack_clears_matching_pending_only() {
        let c = Color::new(1u32, 0);
        let mut s = colored(2, c, w(&[2]));
        s.pending_token = Some(PendingToken {
            neighbor: n(7),
            token: Token::new(c, w(&[2])),
        });
        let nb = set(&[7]);
        let out = MOBILE3.on_token_ack(&s, env(&nb, None), n(7), Color::new(9u32, 0));
        assert!(out.state.pending_token.is_some());
        let out = MOBILE3.on_token_ack(&s, env(&nb, None), n(7), c);
        assert!(out.state.pending_token.is_none());
    }

    #[test]
    fn send_to_non_neighbor_becomes_fault() {
        let mut s = NodeState::new(n(2));
        s.col = NodeColor::Locked;
        let nb = set(&[1]);
        let t = Token::new(Color::new(7u32, 0), w(&[7]));
        let out = STATIC3.on_token(&s, env(&nb, Some(1)), n(7), &t);
        assert!(out.sends.is_empty());
        assert_eq!(out.faults.len(), 1);
    }
}
