use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{is_correct, tokens_by_color, Snapshot, Violation};
use crate::ids::{NodeColor, NodeId};
use crate::protocol::{Message, Variant};
use crate::sim::{EventKind, EventRecord};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonitorViolation {
    /// Index of the event after which the violation was observed.
    pub index: u64,
    pub invariant: String,
    pub detail: String,
}

impl fmt::Display for MonitorViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "event {}: {}: {}",
            self.index, self.invariant, self.detail
        )
    }
}

/// Maximal run of events after which the configuration was not correct.
/// `end` is the first event after which it was correct again, if any.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NotCorrectWindow {
    pub start: u64,
    pub end: Option<u64>,
    pub first: Violation,
}

/// Checks run invariants on every snapshot of a run.
///
/// * at most one token per color, outside recovery;
/// * exactly one token per non-empty cluster, inside its closed
///   neighborhood, and no token for an empty color, except for colors
///   mid-dissolution or mid-division (and, in the mobile variant, while a
///   `Delete` wave is in flight);
/// * a node that was in a cluster of at least `m` nodes stays in one, outside
///   waves and before the first topology change;
/// * every token word satisfies `size <= 2 * nb_identities - 1`;
/// * every division halves carry at least `m` identities.
///
/// Recovery runs from a topology change to the next correct configuration;
/// token checks are suspended meanwhile.
pub struct InvariantMonitor {
    m: usize,
    variant: Variant,
    before_mobility: bool,
    recovering: bool,
    stable: BTreeSet<NodeId>,
    violations: Vec<MonitorViolation>,
    snapshots: u64,
    faults: u64,
    track_correct: bool,
    windows: Vec<NotCorrectWindow>,
}

impl InvariantMonitor {
    pub fn new(m: usize, variant: Variant) -> Self {
        InvariantMonitor {
            m,
            variant,
            before_mobility: true,
            recovering: false,
            stable: BTreeSet::new(),
            violations: Vec::new(),
            snapshots: 0,
            faults: 0,
            track_correct: false,
            windows: Vec::new(),
        }
    }

    /// Also records the windows during which the configuration is not correct.
    pub fn tracking_correctness(mut self) -> Self {
        self.track_correct = true;
        self
    }

    pub fn violations(&self) -> &[MonitorViolation] {
        &self.violations
    }

    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn snapshots(&self) -> u64 {
        self.snapshots
    }

    /// Handler faults seen in the observed effects.
    pub fn faults(&self) -> u64 {
        self.faults
    }

    pub fn not_correct_windows(&self) -> &[NotCorrectWindow] {
        &self.windows
    }

    fn flag(&mut self, index: u64, invariant: &str, detail: String) {
        self.violations.push(MonitorViolation {
            index,
            invariant: invariant.to_string(),
            detail,
        });
    }

    pub fn observe(&mut self, rec: &EventRecord, snap: &Snapshot) {
        let idx = rec.index;
        self.snapshots += 1;
        if matches!(rec.event, EventKind::Mobility { .. }) {
            self.before_mobility = false;
            self.recovering = true;
        }
        let correct = if self.recovering || self.track_correct {
            Some(is_correct(snap))
        } else {
            None
        };
        if self.recovering && matches!(correct, Some(Ok(()))) {
            self.recovering = false;
        }
        for e in &rec.effects {
            self.faults += e.faults.len() as u64;
        }
        for (from, s) in rec.sends() {
            match &s.message {
                Message::Token(t) => {
                    let (len, nb) = (t.word.size(), t.word.nb_identities());
                    if len + 1 > 2 * nb {
                        self.flag(
                            idx,
                            "word-bound",
                            format!("{from} sent {t} with {len} entries for {nb} identities"),
                        );
                    }
                }
                Message::Division { wave, .. } => {
                    let (a, b) = (wave.w1.nb_identities(), wave.w2.nb_identities());
                    if a < self.m || b < self.m {
                        self.flag(
                            idx,
                            "division-size",
                            format!("{from} sent halves of {a} and {b} identities"),
                        );
                    }
                }
                _ => {}
            }
        }

        let tokens = tokens_by_color(snap);
        let recovering = self.recovering;
        let quiet = !recovering && (self.variant == Variant::Static || !snap.delete_in_flight());
        for (c, found) in tokens.iter().filter(|_| !recovering) {
            if found.len() > 1 {
                self.flag(
                    idx,
                    "single-token",
                    format!("{} tokens of color {c}", found.len()),
                );
            }
        }

        let windows = snap.wave_colors();
        let clusters = snap.clusters();
        if quiet {
            for (c, nodes) in &clusters {
                if windows.contains(c) {
                    continue;
                }
                let found = tokens.get(c).map(Vec::as_slice).unwrap_or(&[]);
                if found.len() != 1 {
                    self.flag(
                        idx,
                        "single-token",
                        format!(
                            "cluster {c} of {} nodes has {} tokens",
                            nodes.len(),
                            found.len()
                        ),
                    );
                } else if !snap
                    .topology
                    .closed_neighborhood(nodes)
                    .contains(&found[0].at)
                {
                    self.flag(
                        idx,
                        "token-locality",
                        format!("token of {c} at {} lies outside N(V_c)", found[0].at),
                    );
                }
            }
            for c in tokens.keys() {
                if !clusters.contains_key(c) && !windows.contains(c) {
                    self.flag(
                        idx,
                        "single-token",
                        format!("token of {c} without a cluster"),
                    );
                }
            }
        }

        if self.before_mobility {
            let size: BTreeMap<NodeId, usize> = clusters
                .values()
                .flat_map(|nodes| nodes.iter().map(move |v| (*v, nodes.len())))
                .collect();
            for (v, s) in &snap.states {
                let in_window = match s.col {
                    NodeColor::Colored(c) => windows.contains(&c),
                    _ => s.in_wave(),
                };
                if in_window {
                    continue;
                }
                let k = size.get(v).copied().unwrap_or(0);
                if k >= self.m {
                    self.stable.insert(*v);
                } else if self.stable.contains(v) {
                    self.flag(
                        idx,
                        "stable-monotonicity",
                        format!("node {v} left a stable cluster ({})", s.col),
                    );
                }
            }
        }

        if self.track_correct {
            let open = self.windows.last().is_some_and(|w| w.end.is_none());
            match (correct.expect("computed when tracking"), open) {
                (Err(first), false) => self.windows.push(NotCorrectWindow {
                    start: idx,
                    end: None,
                    first,
                }),
                (Ok(()), true) => {
                    self.windows.last_mut().expect("open").end = Some(idx);
                }
                _ => {}
            }
        }
    }
}
