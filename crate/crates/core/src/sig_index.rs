//! Self-stabilizing simultaneous increment-or-get index (SIG-index).
//!
//! Runs over the last four phases of every clock cycle:
//!
//! | phase | action |
//! |-------|--------|
//! | κ−4 | broadcast `index` |
//! | κ−3 | `propose` ← `v` seen from `n−t` senders, else ⊥; broadcast |
//! | κ−2 | `save` ← `s` seen from `t+1` senders; `bit` ← `n−t` copies of `save`; broadcast `bit` |
//! | κ−1 | `n−t` ones: `save + inc`; `n−t` zeros: 0; else `coin · (save + inc)` |
//!
//! All arithmetic is mod `I`, the number of index states.

use serde::{Deserialize, Serialize};

/// SIG-index traffic.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SigMsg {
    Index(u64),
    Propose(Option<u64>),
    Bit(bool),
}

impl SigMsg {
    pub(crate) fn encode(&self, out: &mut Vec<u8>) {
        match self {
            SigMsg::Index(v) => {
                out.push(0);
                out.extend_from_slice(&v.to_le_bytes());
            }
            SigMsg::Propose(None) => out.push(1),
            SigMsg::Propose(Some(v)) => {
                out.push(2);
                out.extend_from_slice(&v.to_le_bytes());
            }
            SigMsg::Bit(b) => out.push(3 + *b as u8),
        }
    }
}

/// Support needed at phase κ−2 to adopt a proposal as `save`.
///
/// Correct proposals carry at most one non-⊥ value, so `t + 1` copies
/// identify it. A strict majority is only reached by every correct node
/// when `n > 4t`; at `n = 3t + 1` one Byzantine node can push some correct
/// nodes to `save = v` and others to the default while all of them see
/// `n − t` ones.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum SaveQuorum {
    #[default]
    Witness,
    StrictMajority,
}

impl SaveQuorum {
    pub fn threshold(self, n: usize, t: usize) -> usize {
        match self {
            SaveQuorum::Witness => t + 1,
            SaveQuorum::StrictMajority => n / 2 + 1,
        }
    }
}

/// Which rule set the index at the last phase κ−1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Ones,
    Zeros,
    Coin,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SigIndex {
    pub index: u64,
    pub propose: Option<u64>,
    pub save: Option<u64>,
    pub bit: bool,
    pub inc: bool,
    pub last_branch: Option<Branch>,
    pub save_quorum: SaveQuorum,
    n: usize,
    t: usize,
    states: u64,
    kappa: u64,
}

fn count(inbox: &[Option<SigMsg>], want: &SigMsg) -> usize {
    inbox.iter().filter(|m| m.as_ref() == Some(want)).count()
}

/// The value carried by at least `threshold` messages, if any.
fn supported(
    inbox: &[Option<SigMsg>],
    threshold: usize,
    pick: impl Fn(&SigMsg) -> Option<u64>,
) -> Option<u64> {
    let mut values: Vec<u64> = inbox.iter().flatten().filter_map(&pick).collect();
    values.sort_unstable();
    values
        .chunk_by(|a, b| a == b)
        .find(|run| run.len() >= threshold)
        .map(|run| run[0])
}

impl SigIndex {
    pub fn new(n: usize, t: usize, states: u64, kappa: u64) -> Self {
        SigIndex {
            index: 0,
            propose: None,
            save: None,
            bit: false,
            inc: false,
            last_branch: None,
            save_quorum: SaveQuorum::default(),
            n,
            t,
            states,
            kappa,
        }
    }

    pub fn get_index(&self) -> u64 {
        self.index
    }

    pub fn states(&self) -> u64 {
        self.states
    }

    /// First phase of the SIG-index schedule.
    pub fn first_phase(&self) -> u64 {
        self.kappa - 4
    }

    /// One round. Returns the broadcast message, `None` outside κ−4..κ−1.
    ///
    /// `mvc_result` is only read at phase κ−1 and `coin` only on the coin
    /// branch of that phase.
    pub fn pulse(
        &mut self,
        phase: u64,
        inbox: &[Option<SigMsg>],
        mvc_result: Option<bool>,
        coin: bool,
    ) -> Option<SigMsg> {
        let quorum = self.n - self.t;
        let k = self.kappa;
        if phase == k - 4 {
            Some(SigMsg::Index(self.index))
        } else if phase == k - 3 {
            self.propose = supported(inbox, quorum, |m| match m {
                SigMsg::Index(v) => Some(*v),
                _ => None,
            });
            Some(SigMsg::Propose(self.propose))
        } else if phase == k - 2 {
            let threshold = self.save_quorum.threshold(self.n, self.t);
            self.save = supported(inbox, threshold, |m| match m {
                SigMsg::Propose(v) => *v,
                _ => None,
            });
            self.bit = match self.save {
                Some(s) => count(inbox, &SigMsg::Propose(Some(s))) >= quorum,
                None => false,
            };
            self.save.get_or_insert(0);
            Some(SigMsg::Bit(self.bit))
        } else if phase == k - 1 {
            self.inc = mvc_result == Some(true);
            let advanced = (self.save.unwrap_or(0) % self.states + self.inc as u64) % self.states;
            let (index, branch) = if count(inbox, &SigMsg::Bit(true)) >= quorum {
                (advanced, Branch::Ones)
            } else if count(inbox, &SigMsg::Bit(false)) >= quorum {
                (0, Branch::Zeros)
            } else {
                (if coin { advanced } else { 0 }, Branch::Coin)
            };
            self.index = index;
            self.last_branch = Some(branch);
            None
        } else {
            None
        }
    }
}
