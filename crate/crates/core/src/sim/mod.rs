//! Deterministic discrete-event simulation of the protocol.
//!
//! Every random draw (message delays, awakening times, coins, neighbor
//! choices) comes from one ChaCha stream seeded by [`RunConfig::seed`], so a
//! run is a pure function of its configuration and scenario.

mod engine;
mod scenario;
mod topology;
mod trace;

use std::fmt;
use std::ops::Add;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use engine::{RunOutcome, Simulator};
pub use scenario::{Mobility, Scenario, ScheduledMobility};
pub use topology::Topology;
pub use trace::{Effect, EventKind, EventRecord, SentMessage, Trace, TraceHeader, TraceRecord};

use crate::error::ParseError;
use crate::protocol::Variant;

/// Simulated time in ticks; one time unit is [`SimTime::TICKS_PER_UNIT`] ticks.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const TICKS_PER_UNIT: u64 = 1000;

    pub fn units(u: u64) -> Self {
        SimTime(u * Self::TICKS_PER_UNIT)
    }
}

impl Add for SimTime {
    type Output = SimTime;

    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (u, r) = (self.0 / Self::TICKS_PER_UNIT, self.0 % Self::TICKS_PER_UNIT);
        if r == 0 {
            write!(f, "{u}")
        } else {
            let frac = format!("{r:03}");
            write!(f, "{u}.{}", frac.trim_end_matches('0'))
        }
    }
}

/// Decimal time units with at most three fractional digits.
impl FromStr for SimTime {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ParseError::new(format!("invalid time `{s}`"));
        let (int, frac) = s.trim().split_once('.').unwrap_or((s.trim(), ""));
        if int.is_empty() || frac.len() > 3 || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let u: u64 = int.parse().map_err(|_| bad())?;
        let r: u64 = if frac.is_empty() {
            0
        } else {
            format!("{frac:0<3}").parse().map_err(|_| bad())?
        };
        u.checked_mul(Self::TICKS_PER_UNIT)
            .and_then(|t| t.checked_add(r))
            .map(SimTime)
            .ok_or_else(bad)
    }
}

/// Knobs of one simulation run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub m: usize,
    pub variant: Variant,
    /// Inclusive range of per-message delays.
    pub delay: (SimTime, SimTime),
    /// Inclusive range of gaps between two awakenings of a node.
    pub awaken: (SimTime, SimTime),
    /// Deliver messages of each directed link in send order.
    pub fifo: bool,
    pub max_events: u64,
    pub max_time: Option<SimTime>,
    /// Stop at the first legitimate configuration reached after the last
    /// scheduled mobility event.
    pub stop_when_legitimate: bool,
}

impl RunConfig {
    pub fn new(seed: u64, m: usize, variant: Variant) -> Self {
        RunConfig {
            seed,
            m,
            variant,
            delay: (SimTime::units(1), SimTime::units(10)),
            awaken: (SimTime::units(1), SimTime::units(10)),
            fifo: false,
            max_events: 100_000,
            max_time: None,
            stop_when_legitimate: false,
        }
    }

    /// Header values of a scenario.
    pub fn for_scenario(sc: &Scenario) -> Self {
        RunConfig::new(sc.seed, sc.m, sc.variant)
    }

    pub fn validate(&self) -> Result<(), crate::error::ScenarioError> {
        use crate::error::ScenarioError::{Config, ZeroM};
        if self.m == 0 {
            return Err(ZeroM);
        }
        for (name, (lo, hi)) in [("delay", self.delay), ("awaken", self.awaken)] {
            if lo.0 == 0 || lo > hi {
                return Err(Config(format!("{name} range must satisfy 0 < lo <= hi")));
            }
        }
        Ok(())
    }
}
