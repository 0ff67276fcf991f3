use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::trace::{Effect, EventKind, EventRecord, SentMessage, Trace, TraceHeader};
use super::{Mobility, RunConfig, Scenario, SimTime, Topology};
use crate::error::ScenarioError;
use crate::ids::NodeId;
use crate::protocol::{Env, HandlerOutput, Message, NodeState, Protocol};
use crate::verifier::{self, InFlight, Snapshot};

#[derive(Clone, Debug, PartialEq, Eq)]
enum Pending {
    Deliver(u64),
    Awaken(NodeId),
    Mobility(Mobility),
}

type Key = (SimTime, u64);

/// How a run ended.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunOutcome {
    pub events: u64,
    pub time: SimTime,
    /// The final configuration is legitimate.
    pub legitimate: bool,
    pub faults: u64,
}

pub struct Simulator {
    config: RunConfig,
    protocol: Protocol,
    snap: Snapshot,
    queue: BTreeMap<Key, Pending>,
    message_keys: BTreeMap<u64, Key>,
    awaken_keys: BTreeMap<NodeId, Key>,
    fifo_tail: BTreeMap<(NodeId, NodeId), SimTime>,
    rng: ChaCha8Rng,
    now: SimTime,
    seq: u64,
    next_message: u64,
    processed: u64,
    faults: u64,
    /// Topology once every scheduled change has happened.
    planned: Topology,
    last_planned: SimTime,
    mobility_left: usize,
}

impl Simulator {
    /// `config` supplies `m` and the variant; the scenario's header values are
    /// only defaults for [`RunConfig::for_scenario`].
    pub fn new(config: RunConfig, scenario: &Scenario) -> Result<Self, ScenarioError> {
        scenario.validate()?;
        if scenario.topology.len() < config.m {
            return Err(ScenarioError::TooFewNodes {
                n: scenario.topology.len(),
                m: config.m,
            });
        }
        let mut sim =
            Simulator::from_snapshot(config, Snapshot::initial(scenario.topology.clone()))?;
        for ev in &scenario.mobility {
            sim.schedule_mobility(ev.at, ev.change.clone())?;
        }
        Ok(sim)
    }

    /// Starts from an arbitrary configuration at time 0. In-flight messages
    /// keep their delivery times.
    pub fn from_snapshot(config: RunConfig, snap: Snapshot) -> Result<Self, ScenarioError> {
        config.validate()?;
        let protocol = Protocol::new(config.variant, config.m);
        let mut sim = Simulator {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
            protocol,
            planned: snap.topology.clone(),
            snap,
            queue: BTreeMap::new(),
            message_keys: BTreeMap::new(),
            awaken_keys: BTreeMap::new(),
            fifo_tail: BTreeMap::new(),
            now: SimTime(0),
            seq: 0,
            next_message: 0,
            processed: 0,
            faults: 0,
            last_planned: SimTime(0),
            mobility_left: 0,
        };
        let flights: Vec<(u64, SimTime)> = sim
            .snap
            .in_flight
            .iter()
            .map(|(id, f)| (*id, f.at))
            .collect();
        for (id, at) in flights {
            let key = sim.push(at, Pending::Deliver(id));
            sim.message_keys.insert(id, key);
            sim.next_message = sim.next_message.max(id + 1);
        }
        let nodes: Vec<NodeId> = sim.snap.states.keys().copied().collect();
        for v in nodes {
            sim.maybe_schedule_awaken(v);
        }
        Ok(sim)
    }

    /// Schedules a topology change at absolute time `at`. Changes must be
    /// scheduled in chronological order and consistent with each other.
    pub fn schedule_mobility(
        &mut self,
        at: SimTime,
        change: Mobility,
    ) -> Result<(), ScenarioError> {
        if at < self.now || at < self.last_planned {
            return Err(ScenarioError::Config(format!(
                "mobility at {at} is in the past"
            )));
        }
        change.apply(&mut self.planned)?;
        self.last_planned = at;
        self.mobility_left += 1;
        self.push(at, Pending::Mobility(change));
        Ok(())
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn protocol(&self) -> Protocol {
        self.protocol
    }

    pub fn snapshot(&self) -> &Snapshot {
        &self.snap
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn processed(&self) -> u64 {
        self.processed
    }

    pub fn faults(&self) -> u64 {
        self.faults
    }

    /// Topology changes still to come.
    pub fn mobility_left(&self) -> usize {
        self.mobility_left
    }

    pub fn header(&self) -> TraceHeader {
        TraceHeader::new(self.config.clone(), &self.snap.topology)
    }

    fn push(&mut self, at: SimTime, p: Pending) -> Key {
        let key = (at, self.seq);
        self.seq += 1;
        self.queue.insert(key, p);
        key
    }

    fn uniform(&mut self, (lo, hi): (SimTime, SimTime)) -> SimTime {
        SimTime(self.rng.gen_range(lo.0..=hi.0))
    }

    fn maybe_schedule_awaken(&mut self, v: NodeId) {
        let wants = self
            .snap
            .states
            .get(&v)
            .is_some_and(NodeState::wants_awaken);
        if wants && !self.awaken_keys.contains_key(&v) {
            let at = self.now + self.uniform(self.config.awaken);
            let key = self.push(at, Pending::Awaken(v));
            self.awaken_keys.insert(v, key);
        }
    }

    fn drop_where(&mut self, pred: impl Fn(&InFlight) -> bool) -> Vec<u64> {
        let ids: Vec<u64> = self
            .snap
            .in_flight
            .iter()
            .filter(|(_, f)| pred(f))
            .map(|(id, _)| *id)
            .collect();
        for id in &ids {
            self.snap.in_flight.remove(id);
            if let Some(key) = self.message_keys.remove(id) {
                self.queue.remove(&key);
            }
        }
        ids
    }

    /// Runs one handler on `v` with a freshly drawn neighbor choice and
    /// enqueues its sends.
    fn invoke(
        &mut self,
        v: NodeId,
        handler: &str,
        f: impl FnOnce(&Protocol, &NodeState, Env<'_>) -> HandlerOutput,
    ) -> Effect {
        let neighbors = self.snap.topology.neighbors(v).clone();
        let chosen = if neighbors.is_empty() {
            None
        } else {
            let k = self.rng.gen_range(0..neighbors.len());
            neighbors.iter().nth(k).copied()
        };
        let env = Env {
            neighbors: &neighbors,
            chosen,
        };
        let out = f(&self.protocol, &self.snap.states[&v], env);
        self.faults += out.faults.len() as u64;
        let mut sends = Vec::with_capacity(out.sends.len());
        for (to, message) in out.sends {
            let id = self.next_message;
            self.next_message += 1;
            let mut at = self.now + self.uniform(self.config.delay);
            if self.config.fifo {
                let tail = self.fifo_tail.entry((v, to)).or_default();
                at = at.max(*tail);
                *tail = at;
            }
            let key = self.push(at, Pending::Deliver(id));
            self.message_keys.insert(id, key);
            self.snap.in_flight.insert(
                id,
                InFlight {
                    from: v,
                    to,
                    message: message.clone(),
                    at,
                },
            );
            sends.push(SentMessage {
                id,
                to,
                at,
                message,
            });
        }
        let digest = out.state.digest();
        self.snap.states.insert(v, out.state.clone());
        Effect {
            node: v,
            handler: handler.to_string(),
            sends,
            faults: out.faults,
            state: out.state,
            digest,
        }
    }

    fn link_down(&mut self, a: NodeId, b: NodeId) -> Vec<u64> {
        self.drop_where(|f| (f.from, f.to) == (a, b) || (f.from, f.to) == (b, a))
    }

    /// Processes the next event. `None` once the horizon is reached.
    pub fn step(&mut self) -> Option<EventRecord> {
        if self.processed >= self.config.max_events {
            return None;
        }
        let (&key, _) = self.queue.first_key_value()?;
        if self.config.max_time.is_some_and(|t| key.0 > t) {
            return None;
        }
        let pending = self.queue.remove(&key).expect("present");
        self.now = key.0;
        let index = self.processed;
        self.processed += 1;
        let mut dropped = Vec::new();
        let mut effects = Vec::new();
        let event = match pending {
            Pending::Deliver(id) => {
                self.message_keys.remove(&id);
                let f = self.snap.in_flight.remove(&id).expect("scheduled message");
                let (from, to) = (f.from, f.to);
                let msg = f.message;
                effects.push(self.invoke(to, handler_name(&msg), |p, s, env| {
                    p.on_message(s, env, from, &msg)
                }));
                EventKind::Deliver {
                    id,
                    from,
                    to,
                    message: msg,
                }
            }
            Pending::Awaken(node) => {
                self.awaken_keys.remove(&node);
                let coin = self.rng.gen_bool(0.5);
                effects.push(self.invoke(node, "on_awaken", |p, s, env| p.on_awaken(s, env, coin)));
                EventKind::Awaken { node, coin }
            }
            Pending::Mobility(change) => {
                self.mobility_left -= 1;
                let before = match &change {
                    Mobility::Leave { node } => self.snap.topology.neighbors(*node).clone(),
                    _ => BTreeSet::new(),
                };
                change
                    .apply(&mut self.snap.topology)
                    .expect("checked when scheduled");
                match &change {
                    Mobility::LinkDown { a, b } => {
                        dropped = self.link_down(*a, *b);
                        let (lo, hi) = if a < b { (*a, *b) } else { (*b, *a) };
                        for (v, lost) in [(lo, hi), (hi, lo)] {
                            effects.push(self.invoke(v, "on_link_down", |p, s, env| {
                                p.on_link_down(s, env, lost)
                            }));
                        }
                    }
                    Mobility::LinkUp { .. } => {}
                    Mobility::Join { node, .. } => {
                        let s = self.protocol.on_init(*node);
                        let digest = s.digest();
                        self.snap.states.insert(*node, s.clone());
                        effects.push(Effect {
                            node: *node,
                            handler: "on_init".into(),
                            sends: Vec::new(),
                            faults: Vec::new(),
                            state: s,
                            digest,
                        });
                    }
                    Mobility::Leave { node } => {
                        let node = *node;
                        dropped = self.drop_where(|f| f.from == node || f.to == node);
                        self.snap.states.remove(&node);
                        if let Some(key) = self.awaken_keys.remove(&node) {
                            self.queue.remove(&key);
                        }
                        for u in before {
                            effects.push(self.invoke(u, "on_link_down", |p, s, env| {
                                p.on_link_down(s, env, node)
                            }));
                        }
                    }
                }
                EventKind::Mobility { change }
            }
        };
        let touched: Vec<NodeId> = effects.iter().map(|e| e.node).collect();
        for v in touched {
            self.maybe_schedule_awaken(v);
        }
        Some(EventRecord {
            index,
            time: self.now,
            event,
            dropped,
            effects,
        })
    }

    /// Runs to the horizon, or to the first legitimate configuration after
    /// the last topology change when `stop_when_legitimate` is set.
    pub fn run(&mut self, mut observe: impl FnMut(&EventRecord, &Snapshot)) -> RunOutcome {
        while let Some(rec) = self.step() {
            observe(&rec, &self.snap);
            if self.config.stop_when_legitimate
                && self.mobility_left == 0
                && verifier::is_legitimate(&self.snap, self.config.m).is_ok()
            {
                break;
            }
        }
        RunOutcome {
            events: self.processed,
            time: self.now,
            legitimate: verifier::is_legitimate(&self.snap, self.config.m).is_ok(),
            faults: self.faults,
        }
    }

    /// Runs like [`Simulator::run`] and keeps every record.
    pub fn run_traced(&mut self) -> (Trace, RunOutcome) {
        let header = self.header();
        let mut events = Vec::new();
        let outcome = self.run(|rec, _| events.push(rec.clone()));
        (Trace { header, events }, outcome)
    }
}

fn handler_name(msg: &Message) -> &'static str {
    match msg {
        Message::Token(_) => "on_token",
        Message::Dissolution { .. } => "on_dissolution",
        Message::FeedbackDiss { .. } => "on_feedback_diss",
        Message::Division { .. } => "on_division",
        Message::FeedbackDiv { .. } => "on_feedback_div",
        Message::Delete { .. } => "on_delete",
        Message::TokenAck { .. } => "on_token_ack",
    }
}
