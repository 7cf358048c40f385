//! The pluggable asynchronous binary-consensus core behind a recyclable object.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::mmr::MmrLite;
use super::stub::DelayStub;
use crate::NodeId;

/// What a core reports about its decision.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoreOutcome {
    Undecided,
    Decided(bool),
    /// An internal self-check failed; the incarnation is void.
    Error,
}

/// Core traffic carried inside the object's EST field.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoreMsg {
    /// Delay stub: echo of the local proposal (informational only).
    Stub(bool),
    /// MMR-lite estimate broadcast.
    Est(bool),
    /// MMR-lite auxiliary vote, `None` for ⊥.
    Aux(Option<bool>),
}

impl CoreMsg {
    pub(crate) fn encode(&self, out: &mut Vec<u8>) {
        match self {
            CoreMsg::Stub(v) => out.extend_from_slice(&[1, *v as u8]),
            CoreMsg::Est(v) => out.extend_from_slice(&[2, *v as u8]),
            CoreMsg::Aux(None) => out.extend_from_slice(&[3, 0]),
            CoreMsg::Aux(Some(v)) => out.extend_from_slice(&[4, *v as u8]),
        }
    }
}

/// Ground truth the simulator exposes to the delay stub.
///
/// `agreed` is the majority of the correct proposals made into `slot` in its
/// current incarnation; `delay` is the adversary's chosen postponement for
/// one node.
pub trait DecisionOracle {
    fn agreed(&self, slot: usize) -> Option<bool>;
    fn delay(&self, node: NodeId, slot: usize) -> u32;
    fn max_delay(&self) -> u32;
}

/// Oracle with no knowledge: the stub falls back to its own proposal.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoOracle;

impl DecisionOracle for NoOracle {
    fn agreed(&self, _slot: usize) -> Option<bool> {
        None
    }
    fn delay(&self, _node: NodeId, _slot: usize) -> u32 {
        0
    }
    fn max_delay(&self) -> u32 {
        0
    }
}

/// Per-step context handed to a core.
pub struct CoreEnv<'a> {
    pub round: u64,
    pub node: NodeId,
    pub slot: usize,
    pub n: usize,
    pub t: usize,
    /// This round's common coin.
    pub coin: bool,
    pub oracle: &'a dyn DecisionOracle,
}

/// Contract of the asynchronous consensus core: BC-validity, BC-agreement
/// and BC-completion among correct nodes, with completion reached from any
/// (possibly corrupted) starting state.
pub trait ConsensusCore: Clone + fmt::Debug {
    /// Ignored once the core holds a proposal.
    fn propose(&mut self, value: bool);
    /// One do-forever iteration. `inbox[j]` is the core message from `p_j`.
    fn step(&mut self, inbox: &[Option<&CoreMsg>], env: &CoreEnv<'_>) -> Option<CoreMsg>;
    fn outcome(&self) -> CoreOutcome;
    fn reset(&mut self);
    fn is_initial(&self) -> bool;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CoreKind {
    #[default]
    Stub,
    MmrLite,
}

impl FromStr for CoreKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "stub" => Ok(CoreKind::Stub),
            "mmr-lite" => Ok(CoreKind::MmrLite),
            other => Err(format!("unknown core `{other}` (expected stub|mmr-lite)")),
        }
    }
}

impl fmt::Display for CoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CoreKind::Stub => "stub",
            CoreKind::MmrLite => "mmr-lite",
        })
    }
}

/// Runtime-selected core.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AnyCore {
    Stub(DelayStub),
    Mmr(MmrLite),
}

impl AnyCore {
    pub fn new(kind: CoreKind) -> Self {
        match kind {
            CoreKind::Stub => AnyCore::Stub(DelayStub::default()),
            CoreKind::MmrLite => AnyCore::Mmr(MmrLite::default()),
        }
    }
}

impl ConsensusCore for AnyCore {
    fn propose(&mut self, value: bool) {
        match self {
            AnyCore::Stub(c) => c.propose(value),
            AnyCore::Mmr(c) => c.propose(value),
        }
    }

    fn step(&mut self, inbox: &[Option<&CoreMsg>], env: &CoreEnv<'_>) -> Option<CoreMsg> {
        match self {
            AnyCore::Stub(c) => c.step(inbox, env),
            AnyCore::Mmr(c) => c.step(inbox, env),
        }
    }

    fn outcome(&self) -> CoreOutcome {
        match self {
            AnyCore::Stub(c) => c.outcome(),
            AnyCore::Mmr(c) => c.outcome(),
        }
    }

    fn reset(&mut self) {
        match self {
            AnyCore::Stub(c) => c.reset(),
            AnyCore::Mmr(c) => c.reset(),
        }
    }

    fn is_initial(&self) -> bool {
        match self {
            AnyCore::Stub(c) => c.is_initial(),
            AnyCore::Mmr(c) => c.is_initial(),
        }
    }
}
