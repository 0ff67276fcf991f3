//! Decentralized clustering driven by random-walk tokens.
//!
//! * [`word`] and [`tree`]: circulating words, their reduction, and the trees
//!   they encode.
//! * [`protocol`]: the per-node state machine, static and mobility-adaptive.
//! * [`sim`]: a deterministic discrete-event network simulator.
//! * [`verifier`]: configuration predicates and brute-force oracles.

pub mod error;
pub mod ids;
pub mod protocol;
pub mod sim;
pub mod tree;
pub mod verifier;
pub mod word;

pub use error::{OracleError, ParseError, ScenarioError, WordError};
pub use ids::{Color, NodeColor, NodeId};
pub use protocol::{Env, HandlerOutput, Message, NodeState, Protocol, Token, Variant};
pub use sim::{RunConfig, Scenario, SimTime, Simulator, Topology};
pub use tree::RootedTree;
pub use verifier::{InvariantMonitor, Snapshot};
pub use word::Word;
