//! Self-stabilizing Byzantine-tolerant recycling of consensus objects.
//!
//! A fixed array of recyclable binary-consensus objects is reused an
//! unbounded number of times. A synchronous multivalued consensus decides,
//! once per clock cycle, whether enough nodes have delivered the current
//! object's result; a simultaneous increment-or-get index then slides the
//! live window and the recycler resets the slot that left it. Everything
//! recovers from an arbitrary starting state with at most `t < n/3`
//! Byzantine nodes.
//!
//! The [`harness`] module drives the protocol in lock-step rounds under a
//! seeded adversary and measures stabilization.

pub mod adversary;
pub mod env;
pub mod error;
pub mod harness;
pub mod mvc;
pub mod node;
pub mod object;
pub mod recycler;
pub mod sig_index;
pub mod transport;

use serde::{Deserialize, Serialize};

pub use error::{Error, Result};

/// Identity of a node, `0..n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}
