//! Window maintenance over the fixed object array.
//!
//! The live window is the `logSize + 1` slots ending at the SIG-index. Every
//! pulse recycles all slots outside it, so stale or corrupted objects never
//! survive longer than one round outside the window.

use serde::{Deserialize, Serialize};

use crate::object::{AnyCore, ConsensusCore, RecyclableObject};
use crate::NodeId;

/// Window geometry: array length and retrieval bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub index_num: usize,
    pub log_size: usize,
}

impl Window {
    /// Slots `{y mod indexNum : y ∈ [z − logSize, z]}` with `z = indexNum + ind`,
    /// oldest first.
    pub fn slots(&self, ind: u64) -> Vec<usize> {
        let z = self.index_num + (ind % self.index_num as u64) as usize;
        (z - self.log_size..=z)
            .map(|y| y % self.index_num)
            .collect()
    }

    pub fn contains(&self, ind: u64, slot: usize) -> bool {
        let head = (ind % self.index_num as u64) as usize;
        (head + self.index_num - slot % self.index_num) % self.index_num <= self.log_size
    }
}

/// The per-node object array.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectArray<C = AnyCore> {
    pub objs: Vec<RecyclableObject<C>>,
    pub window: Window,
}

impl<C: ConsensusCore + Clone> ObjectArray<C> {
    pub fn new(core: C, me: NodeId, n: usize, t: usize, window: Window) -> Self {
        let objs = vec![RecyclableObject::new(core, me, n, t); window.index_num];
        ObjectArray { objs, window }
    }

    /// Recycles every slot outside the window of `ind`. Returns the slots
    /// that were not fresh before the call, ascending.
    pub fn recycler_pulse(&mut self, ind: u64) -> Vec<usize> {
        let window = self.window;
        self.objs
            .iter_mut()
            .enumerate()
            .filter(|(slot, _)| !window.contains(ind, *slot))
            .filter_map(|(slot, obj)| {
                let stale = !obj.is_fresh();
                obj.recycle();
                stale.then_some(slot)
            })
            .collect()
    }

    pub fn non_fresh(&self) -> usize {
        self.objs.iter().filter(|o| !o.is_fresh()).count()
    }
}
