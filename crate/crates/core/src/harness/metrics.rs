//! Legality checks over a finished trace.
//!
//! Three starting points are used:
//!
//! - consensus captures are checked from round `2κ`;
//! - index closure is checked from the agreement round `r_agree`, the first
//!   round from which every correct index stays equal;
//! - recycling properties are checked from the clean round: the first round
//!   at or after `max(r_agree, 2κ)` entered with every live object born at
//!   or after `r_agree`. Objects corrupted at round 0, or proposed while the
//!   indices still disagreed, leave the window before that.
//!
//! The stabilization round is one past the last round at which any check
//! failed. It is reported only when at least `2κ` legal rounds follow it.

use serde::{Deserialize, Serialize};

use super::trial::{RoundRecord, Trace};
use crate::sig_index::Branch;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violations {
    pub closure: u64,
    pub cor_agreement: u64,
    pub cor_validity1: u64,
    pub cor_validity2: u64,
    pub unread_retirement: u64,
    pub mvc_agreement: u64,
    pub mvc_validity: u64,
    pub mvc_bottom: u64,
    pub save_agreement: u64,
}

impl Violations {
    pub fn total(&self) -> u64 {
        self.closure
            + self.cor_agreement
            + self.cor_validity1
            + self.cor_validity2
            + self.unread_retirement
            + self.mvc_agreement
            + self.mvc_validity
            + self.mvc_bottom
            + self.save_agreement
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metrics {
    pub stabilization_round: Option<u64>,
    pub agreement_round: Option<u64>,
    pub cycles_to_index_agreement: Option<u64>,
    pub clean_round: Option<u64>,
    pub violations: Violations,
    pub instances_completed: u64,
    /// Largest live-object count at one node from the clean round on.
    pub max_non_fresh: usize,
    /// Cycles that began with disagreeing indices.
    pub convergence_attempts: u64,
    /// Of those, cycles that ended with all indices equal.
    pub convergence_successes: u64,
}

fn all_equal<T: PartialEq>(v: &[T]) -> bool {
    v.windows(2).all(|w| w[0] == w[1])
}

/// Per-round outcome of every check.
#[derive(Clone, Copy, Debug, Default)]
struct RoundChecks {
    indices_equal: bool,
    closure: u64,
    cor_agreement: bool,
    cor_validity1: bool,
    /// Counted at the sampling round that went unanswered.
    cor_validity2: bool,
    unread_retirement: u64,
    mvc_agreement: bool,
    mvc_validity: bool,
    mvc_bottom: bool,
    save_agreement: bool,
}

impl RoundChecks {
    fn legal(&self) -> bool {
        self.indices_equal
            && self.closure == 0
            && !self.cor_agreement
            && !self.cor_validity1
            && !self.cor_validity2
            && self.unread_retirement == 0
            && !self.mvc_agreement
            && !self.mvc_validity
            && !self.mvc_bottom
            && !self.save_agreement
    }
}

fn incremented(prev: &RoundRecord, cur: &RoundRecord, states: u64) -> bool {
    prev.indices
        .iter()
        .zip(&cur.indices)
        .any(|(&a, &b)| b == (a % states + 1) % states && a % states != b)
}

fn all_incremented(prev: &RoundRecord, cur: &RoundRecord, states: u64) -> bool {
    prev.indices
        .iter()
        .zip(&cur.indices)
        .all(|(&a, &b)| b == (a % states + 1) % states)
}

fn check_round(trace: &Trace, r: usize) -> RoundChecks {
    let p = &trace.params;
    let kappa = p.kappa as usize;
    let states = p.index_states;
    let recs = &trace.rounds;
    let cur = &recs[r];
    let mut c = RoundChecks {
        indices_equal: all_equal(&cur.indices),
        cor_agreement: !all_equal(&cur.retired),
        unread_retirement: cur.retirements.iter().filter(|x| !x.read_by_all).count() as u64,
        ..RoundChecks::default()
    };
    let last_phase = cur.phase == p.kappa - 1;

    if r > 0 {
        let prev = &recs[r - 1];
        for k in 0..cur.indices.len() {
            let expected = if last_phase {
                (prev.indices[k] % states + (cur.mvc[k] == Some(true)) as u64) % states
            } else {
                prev.indices[k]
            };
            if cur.indices[k] != expected {
                c.closure += 1;
            }
        }
        // The decision applied now was sampled one full cycle before the
        // capture at this cycle's phase 0.
        if last_phase && incremented(prev, cur, states) {
            c.cor_validity1 = match r.checked_sub(kappa - 1 + kappa) {
                Some(s) => !recs[s].sampled.contains(&Some(true)),
                None => false,
            };
        }
    }

    if cur.phase == 0 && cur.sampled.iter().all(|v| *v == Some(true)) && r + 2 * kappa < recs.len()
    {
        let answered = (r + 1..=r + 2 * kappa).any(|q| {
            recs[q].phase == p.kappa - 1 && all_incremented(&recs[q - 1], &recs[q], states)
        });
        c.cor_validity2 = !answered;
    }

    if r >= 2 * kappa {
        if cur.phase == 0 {
            c.mvc_agreement = !all_equal(&cur.mvc);
            c.mvc_bottom = cur.mvc.iter().any(Option::is_none);
            let inputs = &recs[r - kappa].sampled;
            if let Some(Some(v)) = inputs.first() {
                if inputs.iter().all(|x| *x == Some(*v)) {
                    c.mvc_validity = cur.mvc.iter().any(|m| *m != Some(*v));
                }
            }
        }
        if last_phase && cur.branches.contains(&Some(Branch::Ones)) {
            let pairs: Vec<_> = cur.mvc.iter().zip(&cur.saves).collect();
            c.save_agreement = !all_equal(&pairs);
        }
    }
    c
}

/// First round from which every correct index stays equal.
pub fn agreement_round(trace: &Trace) -> Option<u64> {
    let recs = &trace.rounds;
    if !recs.last().is_some_and(|r| all_equal(&r.indices)) {
        return None;
    }
    let last_bad = recs.iter().rposition(|r| !all_equal(&r.indices));
    Some(last_bad.map_or(0, |b| b as u64 + 1))
}

/// First round from which the whole legality predicate holds, if followed
/// by at least `2κ` observed rounds.
pub fn measure_stabilization(trace: &Trace) -> Option<u64> {
    let checks: Vec<RoundChecks> = (0..trace.rounds.len())
        .map(|r| check_round(trace, r))
        .collect();
    stabilization_from(&checks, trace)
}

fn stabilization_from(checks: &[RoundChecks], trace: &Trace) -> Option<u64> {
    let star = checks
        .iter()
        .rposition(|c| !c.legal())
        .map_or(0, |b| b as u64 + 1);
    let horizon = (trace.rounds.len() as u64).checked_sub(2 * trace.params.kappa)?;
    (star <= horizon).then_some(star)
}

pub fn measure(trace: &Trace) -> Metrics {
    let p = &trace.params;
    let kappa = p.kappa;
    let recs = &trace.rounds;
    let checks: Vec<RoundChecks> = (0..recs.len()).map(|r| check_round(trace, r)).collect();
    let mut m = Metrics {
        stabilization_round: stabilization_from(&checks, trace),
        agreement_round: agreement_round(trace),
        ..Metrics::default()
    };
    m.cycles_to_index_agreement = m.agreement_round.map(|a| (a + 1) / kappa);

    let clean = m.agreement_round.and_then(|a| {
        let from = a.max(2 * kappa).max(1) as usize;
        (from..recs.len())
            .find(|&r| recs[r - 1].oldest_birth.is_none_or(|b| b >= a as i64))
            .map(|r| r as u64)
    });
    m.clean_round = clean;

    let v = &mut m.violations;
    for (r, c) in checks.iter().enumerate() {
        let r = r as u64;
        if r >= 2 * kappa {
            v.mvc_agreement += c.mvc_agreement as u64;
            v.mvc_validity += c.mvc_validity as u64;
            v.mvc_bottom += c.mvc_bottom as u64;
            v.save_agreement += c.save_agreement as u64;
        }
        if m.agreement_round.is_some_and(|a| r > a) {
            v.closure += c.closure;
        }
        if clean.is_some_and(|cl| r >= cl) {
            v.cor_agreement += c.cor_agreement as u64;
            v.cor_validity1 += c.cor_validity1 as u64;
            v.cor_validity2 += c.cor_validity2 as u64;
            v.unread_retirement += c.unread_retirement;
        }
    }

    m.instances_completed = recs
        .iter()
        .flat_map(|r| &r.retirements)
        .filter(|x| x.read_by_all && x.birth >= 0)
        .count() as u64;
    if let Some(cl) = clean {
        m.max_non_fresh = recs[cl as usize..]
            .iter()
            .flat_map(|r| r.non_fresh.iter().copied())
            .max()
            .unwrap_or(0);
    }

    // A cycle's SIG-index reads the indices held just before its last phase.
    let k = kappa as usize;
    let mut end = k - 1;
    while end < recs.len() {
        if end >= 1 && !all_equal(&recs[end - 1].indices) {
            m.convergence_attempts += 1;
            m.convergence_successes += all_equal(&recs[end].indices) as u64;
        }
        end += k;
    }
    m
}
