//! Self-stabilizing synchronous multivalued consensus.
//!
//! The wrapper recomputes the floating output of a non-self-stabilizing
//! `co` every clock cycle. At phase 0 it captures `co.result()` into
//! `current_result`, restarts `co` and proposes the freshly sampled input.
//! At phases `1..=t` it runs one `co` step per round. The messages of the
//! last exchange arrive at phase `t + 1`, where `co` absorbs them without
//! sending anything. Whatever the starting state, the first complete cycle
//! runs `co` in lock-step at every correct node, so every capture from
//! round `2κ` on is a correct consensus decision over the inputs sampled one
//! cycle earlier.

pub mod eig;

use serde::{Deserialize, Serialize};

use self::eig::{CoInstance, CoMsg, EigCo};
use crate::NodeId;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyncMvc<V: Ord> {
    /// Floating output: the decision of the previous cycle, ⊥ if none.
    pub current_result: Option<V>,
    pub co: EigCo<V>,
    n: usize,
    t: usize,
}

impl<V> SyncMvc<V>
where
    V: Clone + Ord + Default,
{
    pub fn new(me: NodeId, n: usize, t: usize) -> Self {
        SyncMvc {
            current_result: None,
            co: EigCo::new(me, n, t),
            n,
            t,
        }
    }

    /// One round. `input` is sampled only at phase 0.
    pub fn pulse(
        &mut self,
        phase: u64,
        inbox: &[Option<CoMsg<V>>],
        input: impl FnOnce() -> V,
    ) -> Vec<Option<CoMsg<V>>> {
        if phase == 0 {
            self.current_result = self.co.result();
            self.co.restart();
            self.co.propose(input())
        } else if phase <= self.t as u64 + 1 {
            self.co.process(inbox)
        } else {
            vec![None; self.n]
        }
    }

    pub fn result(&self) -> Option<V> {
        self.current_result.clone()
    }
}
