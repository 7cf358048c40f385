use serde::{Deserialize, Serialize};

use super::core::{ConsensusCore, CoreEnv, CoreMsg, CoreOutcome};

/// Coin-based binary consensus in the Ben-Or/MMR family, run on the global
/// round parity.
///
/// Even rounds broadcast `EST(est)`. Odd rounds that saw `n−t` estimates
/// broadcast `AUX(v)` when `v` had `n−t` support, else `AUX(⊥)`. The next
/// even round, given `n−t` aux votes: decide `v` on `n−t` `AUX(v)`, adopt `v`
/// on `t+1`, otherwise adopt the common coin. Decided nodes keep
/// participating so that late nodes finish.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MmrLite {
    pub est: Option<bool>,
    pub decided: Option<bool>,
    pub fault: bool,
}

fn tally(
    inbox: &[Option<&CoreMsg>],
    pick: impl Fn(&CoreMsg) -> Option<Option<bool>>,
) -> (usize, [usize; 2]) {
    let mut total = 0;
    let mut by_value = [0usize; 2];
    for m in inbox.iter().flatten() {
        if let Some(v) = pick(m) {
            total += 1;
            if let Some(b) = v {
                by_value[b as usize] += 1;
            }
        }
    }
    (total, by_value)
}

impl ConsensusCore for MmrLite {
    fn propose(&mut self, value: bool) {
        if self.est.is_none() {
            self.est = Some(value);
        }
    }

    fn step(&mut self, inbox: &[Option<&CoreMsg>], env: &CoreEnv<'_>) -> Option<CoreMsg> {
        let est = self.est?;
        let quorum = env.n - env.t;
        if env.round.is_multiple_of(2) {
            let (total, aux) = tally(inbox, |m| match m {
                CoreMsg::Aux(v) => Some(*v),
                _ => None,
            });
            if total >= quorum {
                let mut next = None;
                for v in [false, true] {
                    if aux[v as usize] >= quorum {
                        self.decided.get_or_insert(v);
                        next = Some(v);
                    } else if aux[v as usize] > env.t && next.is_none() {
                        next = Some(v);
                    }
                }
                self.est = Some(next.unwrap_or(env.coin));
            }
            Some(CoreMsg::Est(self.est.unwrap_or(est)))
        } else {
            let (total, ests) = tally(inbox, |m| match m {
                CoreMsg::Est(v) => Some(Some(*v)),
                _ => None,
            });
            if total < quorum {
                return None;
            }
            let aux = [false, true]
                .into_iter()
                .find(|&v| ests[v as usize] >= quorum);
            Some(CoreMsg::Aux(aux))
        }
    }

    fn outcome(&self) -> CoreOutcome {
        match self.decided {
            _ if self.fault => CoreOutcome::Error,
            Some(v) if self.est == Some(v) => CoreOutcome::Decided(v),
            Some(_) => CoreOutcome::Error,
            None => CoreOutcome::Undecided,
        }
    }

    fn reset(&mut self) {
        *self = MmrLite::default();
    }

    fn is_initial(&self) -> bool {
        *self == MmrLite::default()
    }
}
