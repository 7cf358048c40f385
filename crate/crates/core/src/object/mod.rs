//! Recyclable consensus objects.
//!
//! A [`RecyclableObject`] wraps a pluggable asynchronous binary-consensus
//! core with the recyclability layer: the `delivered` indication vector,
//! `was_delivered()` and `recycle()`. The local indication `delivered[i]` is
//! raised whenever `result()` returns a non-⊥ value and is cleared by the
//! per-step consistency test whenever it does not. `delivered[j]` mirrors
//! the last flag that arrived from `p_j`.

pub mod core;
pub mod mmr;
pub mod stub;

use serde::{Deserialize, Serialize};

pub use self::core::{
    AnyCore, ConsensusCore, CoreEnv, CoreKind, CoreMsg, CoreOutcome, DecisionOracle, NoOracle,
};
pub use self::mmr::MmrLite;
pub use self::stub::DelayStub;
use crate::NodeId;

/// What `result()` returns.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObjResult {
    Value(bool),
    /// ⊥: no decision yet.
    Bottom,
    /// ↯: the core detected a transient fault; completed but void.
    Error,
}

impl ObjResult {
    pub fn is_bottom(&self) -> bool {
        matches!(self, ObjResult::Bottom)
    }
}

/// The object's share of an outgoing message: core traffic plus `delivered[i]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EstPayload {
    pub core: Option<CoreMsg>,
    pub delivered: bool,
}

impl EstPayload {
    /// What a fresh (never proposed) object would send.
    pub fn fresh() -> Self {
        EstPayload {
            core: None,
            delivered: false,
        }
    }
}

/// One slot's entry in the multiplexed EST field.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotEst {
    pub slot: u16,
    pub est: EstPayload,
}

/// The EST field of `MSG()`: one entry per live slot of the sender.
///
/// Slots without an entry are fresh at the sender.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EstField {
    pub entries: Vec<SlotEst>,
}

impl EstField {
    pub fn get(&self, slot: usize) -> Option<&EstPayload> {
        self.entries
            .iter()
            .find(|e| e.slot as usize == slot)
            .map(|e| &e.est)
    }

    pub(crate) fn encode(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&(self.entries.len() as u16).to_le_bytes());
        for e in &self.entries {
            out.extend_from_slice(&e.slot.to_le_bytes());
            out.push(e.est.delivered as u8);
            match &e.est.core {
                None => out.push(0),
                Some(m) => m.encode(out),
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecyclableObject<C = AnyCore> {
    pub core: C,
    pub delivered: Vec<bool>,
    pub proposed: Option<bool>,
    me: NodeId,
    t: usize,
}

impl<C: ConsensusCore> RecyclableObject<C> {
    pub fn new(core: C, me: NodeId, n: usize, t: usize) -> Self {
        RecyclableObject {
            core,
            delivered: vec![false; n],
            proposed: None,
            me,
            t,
        }
    }

    pub fn me(&self) -> NodeId {
        self.me
    }

    /// Records `value` and starts the core. A second proposal in the same
    /// incarnation is ignored.
    pub fn propose(&mut self, value: bool) {
        if self.proposed.is_none() {
            self.proposed = Some(value);
            self.core.propose(value);
        }
    }

    pub fn result(&mut self) -> ObjResult {
        match self.core.outcome() {
            CoreOutcome::Decided(v) => {
                self.delivered[self.me.index()] = true;
                ObjResult::Value(v)
            }
            CoreOutcome::Error => {
                self.delivered[self.me.index()] = true;
                ObjResult::Error
            }
            CoreOutcome::Undecided => ObjResult::Bottom,
        }
    }

    /// 1 iff at least `n − t` entries of `delivered` hold.
    pub fn was_delivered(&self) -> bool {
        let n = self.delivered.len();
        self.delivered.iter().filter(|&&d| d).count() >= n - self.t
    }

    pub fn recycle(&mut self) {
        self.core.reset();
        self.delivered.iter_mut().for_each(|d| *d = false);
        self.proposed = None;
    }

    /// In the initial state.
    pub fn is_fresh(&self) -> bool {
        self.proposed.is_none() && self.core.is_initial() && self.delivered.iter().all(|d| !d)
    }

    /// One do-forever iteration: consistency test, merge of arriving flags,
    /// core step. Returns this object's EST payload for every destination.
    ///
    /// `inbox[j]` is the payload from `p_j`, `None` when nothing arrived.
    pub fn pulse_step(&mut self, inbox: &[Option<EstPayload>], env: &CoreEnv<'_>) -> EstPayload {
        let me = self.me.index();
        if self.result().is_bottom() {
            self.delivered[me] = false;
        }
        for (j, arrived) in inbox.iter().enumerate() {
            if j == me {
                continue;
            }
            if let (Some(p), Some(slot)) = (arrived, self.delivered.get_mut(j)) {
                *slot = p.delivered;
            }
        }
        // A transient fault can split the recorded proposal from the core's.
        // A running core without a record gets the default value; a record
        // is re-fed every step, which cores ignore once they hold one.
        if self.proposed.is_none() && !self.core.is_initial() {
            self.proposed = Some(false);
        }
        if let Some(v) = self.proposed {
            self.core.propose(v);
        }
        let msgs: Vec<Option<&CoreMsg>> = inbox
            .iter()
            .map(|p| p.as_ref().and_then(|p| p.core.as_ref()))
            .collect();
        let core = self.core.step(&msgs, env);
        EstPayload {
            core,
            delivered: self.delivered[me],
        }
    }
}
