use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tokencluster::sim::{RunConfig, Scenario, Simulator, Topology};
use tokencluster::verifier::{divisibility_oracle, is_correct, is_legitimate};
use tokencluster::{NodeId, RootedTree, Variant, Word};

/// A random tree on distinct labels: node k attaches to an earlier node.
fn tree() -> impl Strategy<Value = RootedTree> {
    (1usize..14)
        .prop_flat_map(|n| {
            (
                prop::sample::subsequence((1..=40u32).collect::<Vec<_>>(), n).prop_shuffle(),
                prop::collection::vec(any::<prop::sample::Index>(), n),
            )
        })
        .prop_map(|(labels, parents)| {
            let root = NodeId(labels[0]);
            let edges =
                (1..labels.len()).map(|k| (NodeId(labels[k]), NodeId(labels[parents[k].index(k)])));
            RootedTree::from_edges(root, edges).unwrap()
        })
}

/// A walk on a random connected graph, most recent entry first, together
/// with the graph.
fn walk() -> impl Strategy<Value = (Topology, Vec<NodeId>)> {
    (4u32..12, any::<u64>(), 1usize..60).prop_map(|(n, seed, len)| {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = Topology::random_connected(n, 0.25, &mut rng);
        let mut at = NodeId(rng.gen_range(1..=n));
        let mut path = vec![at];
        for _ in 0..len {
            let nb: Vec<NodeId> = t.neighbors(at).iter().copied().collect();
            at = nb[rng.gen_range(0..nb.len())];
            path.push(at);
        }
        path.reverse();
        (t, path)
    })
}

/// Every edge whose removal leaves two sides of at least `m` nodes, found by
/// a search over the edge list that ignores the tree's own bookkeeping.
fn brute_cuts(tree: &RootedTree, m: usize) -> Vec<(usize, usize)> {
    let edges: Vec<(NodeId, NodeId)> = tree.edges().collect();
    let nodes: BTreeSet<NodeId> = tree.nodes().collect();
    let mut out = Vec::new();
    for skip in 0..edges.len() {
        let mut adj: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        for (k, (a, b)) in edges.iter().enumerate() {
            if k != skip {
                adj.entry(*a).or_default().push(*b);
                adj.entry(*b).or_default().push(*a);
            }
        }
        let start = *nodes.iter().next().unwrap();
        let mut seen = BTreeSet::from([start]);
        let mut stack = vec![start];
        while let Some(u) = stack.pop() {
            for v in adj.get(&u).into_iter().flatten() {
                if seen.insert(*v) {
                    stack.push(*v);
                }
            }
        }
        let (a, b) = (seen.len(), nodes.len() - seen.len());
        if a >= m && b >= m {
            out.push((a.min(b), a.max(b)));
        }
    }
    out
}

proptest! {
    #[test]
    fn tree_word_round_trip(t in tree()) {
        let w = t.to_word();
        prop_assert_eq!(w.build_tree().unwrap(), t.clone());
        prop_assert!(w.size() < 2 * t.len());
        prop_assert_eq!(w.head(), Some(t.root()));
    }

    #[test]
    fn clean_is_bounded_and_idempotent((t, path) in walk()) {
        let head = path[0];
        let w = Word::from_ids(path.iter().copied());
        let nb = t.neighbors(head).clone();
        let c = w.clean(head, &nb).unwrap();
        prop_assert!(c.size() < 2 * c.nb_identities());
        prop_assert_eq!(c.head(), Some(head));
        prop_assert!(c.identities().is_subset(&w.identities()));
        prop_assert_eq!(c.clean(head, &nb).unwrap(), c.clone());
        // Reduction never invents links.
        for (a, b) in c.build_tree().unwrap().edges() {
            prop_assert!(t.has_edge(a, b), "{a}-{b} in {c}");
        }
    }

    #[test]
    fn divide_matches_brute_force(t in tree(), m in 1usize..6) {
        let cuts = brute_cuts(&t, m);
        prop_assert_eq!(t.is_divisible(m), !cuts.is_empty());
        match t.divide(m) {
            Ok((w1, w2)) => {
                let (a, b) = (w1.nb_identities(), w2.nb_identities());
                prop_assert_eq!(a + b, t.len());
                prop_assert_eq!(w1.head(), Some(t.root()));
                let best = cuts.iter().map(|(lo, _)| *lo).max().unwrap();
                prop_assert_eq!(a.min(b), best);
                let mut all = w1.identities();
                all.extend(w2.identities());
                prop_assert_eq!(all.len(), t.len());
            }
            Err(_) => prop_assert!(cuts.is_empty()),
        }
    }

    #[test]
    fn divisible_tree_means_divisible_node_set(t in tree(), m in 1usize..5) {
        let topology = Topology::from_edges(t.nodes(), t.edges()).unwrap();
        let nodes: BTreeSet<NodeId> = t.nodes().collect();
        if t.is_divisible(m) {
            prop_assert!(divisibility_oracle(&nodes, &topology, m).unwrap());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn legitimate_implies_correct(seed in any::<u64>(), n in 5u32..11, mobile in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = Topology::random_connected(n, 0.2, &mut rng);
        let variant = if mobile { Variant::Mobile } else { Variant::Static };
        let sc = Scenario::new(3, variant, seed, t);
        let mut cfg = RunConfig::for_scenario(&sc);
        cfg.max_events = 3_000;
        let mut sim = Simulator::new(cfg, &sc).unwrap();
        let mut bad = None;
        sim.run(|rec, snap| {
            if bad.is_none() && is_legitimate(snap, 3).is_ok() {
                if let Err(v) = is_correct(snap) {
                    bad = Some((rec.index, v));
                }
            }
        });
        prop_assert!(bad.is_none(), "{:?}", bad);
    }
}
