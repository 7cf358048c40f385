//! Assumed environment services: validated protocol parameters, the
//! κ-state global clock and the random common coin (RCC) oracle.
//!
//! The clock and coin are oracles. The clock is modeled as already
//! stabilized, so every node reads `round mod κ` in the same round. The coin
//! is a deterministic function of `(seed, round)`; the round engine reveals
//! it only after all Byzantine outboxes for that round are fixed.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Smallest schedule cycle that leaves room for the four SIG-index phases.
pub const MIN_KAPPA: u64 = 5;

/// Global protocol parameters.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Params {
    /// Number of nodes.
    pub n: usize,
    /// Upper bound on Byzantine nodes.
    pub t: usize,
    /// Schedule cycle length (states of the global clock).
    pub kappa: u64,
    /// Number of states of the SIG-index.
    pub index_states: u64,
    /// Length of the object array.
    pub index_num: usize,
    /// Retrieval window bound, in synchronous rounds.
    pub log_size: usize,
    /// Trial seed.
    pub seed: u64,
}

/// One violated parameter constraint.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    /// `n ≥ 3t + 1` does not hold.
    TooManyFaults { n: usize, t: usize },
    /// κ is below [`MIN_KAPPA`].
    KappaTooSmall { kappa: u64 },
    /// κ leaves no room for the t+1 exchanges of the synchronous consensus.
    KappaBelowConsensus { kappa: u64, t: usize },
    /// `logSize ≤ indexNum − 2` does not hold.
    LogSizeTooLarge { log_size: usize, index_num: usize },
    /// The index state bound differs from the array length.
    IndexStatesMismatch { index_states: u64, index_num: usize },
    /// Node ids must fit the label encoding used on the wire.
    TooManyNodes { n: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TooManyFaults { n, t } => write!(f, "n ≥ 3t+1 violated (n={n}, t={t})"),
            Violation::KappaTooSmall { kappa } => {
                write!(f, "kappa ≥ {MIN_KAPPA} violated (kappa={kappa})")
            }
            Violation::KappaBelowConsensus { kappa, t } => {
                write!(f, "kappa ≥ t+2 violated (kappa={kappa}, t={t})")
            }
            Violation::LogSizeTooLarge {
                log_size,
                index_num,
            } => write!(
                f,
                "logSize ≤ indexNum−2 violated (logSize={log_size}, indexNum={index_num})"
            ),
            Violation::IndexStatesMismatch {
                index_states,
                index_num,
            } => write!(
                f,
                "I = indexNum violated (I={index_states}, indexNum={index_num})"
            ),
            Violation::TooManyNodes { n } => write!(f, "n ≤ 255 violated (n={n})"),
        }
    }
}

impl Params {
    /// Builds parameters with the default schedule `κ = max(t+1, logSize)`,
    /// raised to [`MIN_KAPPA`] when smaller, and `I = indexNum`.
    pub fn new(n: usize, t: usize, index_num: usize, log_size: usize, seed: u64) -> Self {
        Params {
            n,
            t,
            kappa: Self::default_kappa(t, log_size),
            index_states: index_num as u64,
            index_num,
            log_size,
            seed,
        }
    }

    pub fn default_kappa(t: usize, log_size: usize) -> u64 {
        ((t + 1).max(log_size) as u64).max(MIN_KAPPA)
    }

    pub fn with_kappa(mut self, kappa: u64) -> Self {
        self.kappa = kappa;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Returns every violated constraint; empty means the parameters are usable.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.n < 3 * self.t + 1 {
            out.push(Violation::TooManyFaults {
                n: self.n,
                t: self.t,
            });
        }
        if self.n > 255 {
            out.push(Violation::TooManyNodes { n: self.n });
        }
        if self.kappa < MIN_KAPPA {
            out.push(Violation::KappaTooSmall { kappa: self.kappa });
        }
        if self.kappa < self.t as u64 + 2 {
            out.push(Violation::KappaBelowConsensus {
                kappa: self.kappa,
                t: self.t,
            });
        }
        if self.index_num < 2 || self.log_size > self.index_num - 2 {
            out.push(Violation::LogSizeTooLarge {
                log_size: self.log_size,
                index_num: self.index_num,
            });
        }
        if self.index_states != self.index_num as u64 {
            out.push(Violation::IndexStatesMismatch {
                index_states: self.index_states,
                index_num: self.index_num,
            });
        }
        out
    }

    pub fn validate(&self) -> Result<(), Error> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(v))
        }
    }

    /// Non-fatal remarks. The consensus and SIG-index phases share rounds
    /// when `κ < t + 5`; both still run because their message fields are
    /// disjoint.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.kappa < self.t as u64 + 5 {
            out.push(format!(
                "kappa={} < t+5={}: consensus and SIG-index phases overlap",
                self.kappa,
                self.t + 5
            ));
        }
        out
    }

    /// `n − t`, the quorum used throughout.
    pub fn quorum(&self) -> usize {
        self.n - self.t
    }
}

/// Reads the κ-state global clock at `round`.
pub fn clock_read(round: u64, kappa: u64) -> Result<u64, Error> {
    if kappa == 0 {
        return Err(Error::ZeroKappa);
    }
    Ok(round % kappa)
}

/// One revealed coin.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoinRecord {
    pub round: u64,
    pub value: bool,
    /// All correct nodes observe the same value this round.
    pub enabling: bool,
}

/// Random common coin oracle. Always enabling, `p0 = p1 = 1/2`.
#[derive(Clone, Copy, Debug)]
pub struct CommonCoin {
    seed: u64,
}

impl CommonCoin {
    pub fn new(seed: u64) -> Self {
        CommonCoin { seed }
    }

    pub fn draw(&self, round: u64) -> CoinRecord {
        CoinRecord {
            round,
            value: rcc_draw(round, self.seed),
            enabling: true,
        }
    }
}

/// The coin bit for `round` under `seed`.
pub fn rcc_draw(round: u64, seed: u64) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(round);
    rng.gen::<bool>()
}
