use serde::{Deserialize, Serialize};

use super::core::{ConsensusCore, CoreEnv, CoreMsg, CoreOutcome};

/// Contract-honoring stand-in for an asynchronous consensus core.
///
/// Decides the majority of the correct proposals (read from the simulator's
/// [`DecisionOracle`](super::core::DecisionOracle)) after an
/// adversary-chosen delay of at most `max_delay` steps. Corrupted counters
/// are clamped to that bound, so completion holds from any state.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelayStub {
    pub proposal: Option<bool>,
    pub elapsed: u32,
    pub delay: Option<u32>,
    pub target: Option<bool>,
    pub decided: Option<bool>,
    pub fault: bool,
}

impl ConsensusCore for DelayStub {
    fn propose(&mut self, value: bool) {
        if self.proposal.is_none() {
            self.proposal = Some(value);
        }
    }

    fn step(&mut self, _inbox: &[Option<&CoreMsg>], env: &CoreEnv<'_>) -> Option<CoreMsg> {
        let proposal = self.proposal?;
        if self.decided.is_none() {
            let delay = *self
                .delay
                .get_or_insert_with(|| env.oracle.delay(env.node, env.slot));
            let target = *self
                .target
                .get_or_insert_with(|| env.oracle.agreed(env.slot).unwrap_or(proposal));
            if self.elapsed >= delay.min(env.oracle.max_delay()) {
                self.decided = Some(target);
            }
            self.elapsed = self.elapsed.saturating_add(1);
        }
        Some(CoreMsg::Stub(proposal))
    }

    fn outcome(&self) -> CoreOutcome {
        match (self.fault, self.decided, self.proposal) {
            (true, _, _) | (false, Some(_), None) => CoreOutcome::Error,
            (false, Some(v), Some(_)) => CoreOutcome::Decided(v),
            (false, None, _) => CoreOutcome::Undecided,
        }
    }

    fn reset(&mut self) {
        *self = DelayStub::default();
    }

    fn is_initial(&self) -> bool {
        *self == DelayStub::default()
    }
}
