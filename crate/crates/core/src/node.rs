//! One correct node: the synchronous consensus, the SIG-index and the
//! object array, driven by a single per-round pulse.

use serde::{Deserialize, Serialize};

use crate::env::Params;
use crate::mvc::SyncMvc;
use crate::object::{
    AnyCore, CoreEnv, CoreKind, DecisionOracle, EstField, EstPayload, ObjResult, SlotEst,
};
use crate::recycler::{ObjectArray, Window};
use crate::sig_index::SigIndex;
use crate::transport::{Msg, Outbox, RoundMail};
use crate::NodeId;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub mvc: SyncMvc<bool>,
    pub sig: SigIndex,
    pub objects: ObjectArray<AnyCore>,
    n: usize,
    t: usize,
    kappa: u64,
}

/// What a pulse did, for the trace and the metrics.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PulseReport {
    /// Phase 0 only: the `wasDelivered()` input handed to the consensus.
    pub sampled: Option<bool>,
    /// Slots reset from a non-fresh state this round.
    pub recycled: Vec<usize>,
    /// The subset of `recycled` that held a local proposal.
    pub retired: Vec<usize>,
}

impl Node {
    pub fn new(id: NodeId, params: &Params, core: CoreKind) -> Self {
        let window = Window {
            index_num: params.index_num,
            log_size: params.log_size,
        };
        Node {
            id,
            mvc: SyncMvc::new(id, params.n, params.t),
            sig: SigIndex::new(params.n, params.t, params.index_states, params.kappa),
            objects: ObjectArray::new(AnyCore::new(core), id, params.n, params.t, window),
            n: params.n,
            t: params.t,
            kappa: params.kappa,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kappa(&self) -> u64 {
        self.kappa
    }

    pub fn window(&self) -> Window {
        self.objects.window
    }

    /// The slot of the object currently in use.
    pub fn current_slot(&self) -> usize {
        (self.sig.get_index() % self.window().index_num as u64) as usize
    }

    /// Proposes `value` into the current slot. Returns whether the slot was
    /// fresh, i.e. whether this starts a new incarnation.
    pub fn propose_current(&mut self, value: bool) -> bool {
        let slot = self.current_slot();
        let obj = &mut self.objects.objs[slot];
        let fresh = obj.is_fresh();
        obj.propose(value);
        fresh
    }

    /// Calls `result()` on every non-fresh slot in the window.
    pub fn read_window(&mut self) -> Vec<(usize, ObjResult)> {
        let ind = self.sig.get_index();
        let mut out = Vec::new();
        for s in self.objects.window.slots(ind) {
            let obj = &mut self.objects.objs[s];
            if !obj.is_fresh() {
                out.push((s, obj.result()));
            }
        }
        out
    }

    /// One synchronous round: consensus, SIG-index, recycler, then every
    /// object in the window. Returns the outbox and a report.
    pub fn pulse(
        &mut self,
        round: u64,
        mail: &RoundMail,
        coin: bool,
        oracle: &dyn DecisionOracle,
    ) -> (Outbox, PulseReport) {
        let n = self.n;
        let phase = round % self.kappa;
        let mut report = PulseReport::default();

        let current = self.current_slot();
        let delivered = self.objects.objs[current].was_delivered();
        let co = self.mvc.pulse(phase, &mail.co_fields(), || {
            report.sampled = Some(delivered);
            delivered
        });

        let sig = self
            .sig
            .pulse(phase, &mail.sig_fields(), self.mvc.result(), coin);

        let ind = self.sig.get_index();
        let window = self.window();
        report.retired = (0..window.index_num)
            .filter(|&s| !window.contains(ind, s) && self.objects.objs[s].proposed.is_some())
            .collect();
        report.recycled = self.objects.recycler_pulse(ind);

        let mut est = EstField::default();
        for slot in self.window().slots(ind) {
            let inbox: Vec<Option<EstPayload>> = mail
                .msgs()
                .map(|m| {
                    m.map(|m| {
                        m.est
                            .as_ref()
                            .and_then(|e| e.get(slot))
                            .cloned()
                            .unwrap_or_else(EstPayload::fresh)
                    })
                })
                .collect();
            let obj = &mut self.objects.objs[slot];
            let env = CoreEnv {
                round,
                node: self.id,
                slot,
                n,
                t: self.t,
                coin,
                oracle,
            };
            let payload = obj.pulse_step(&inbox, &env);
            if !obj.is_fresh() {
                est.entries.push(SlotEst {
                    slot: slot as u16,
                    est: payload,
                });
            }
        }
        est.entries.sort_by_key(|e| e.slot);

        let outbox = co
            .into_iter()
            .map(|co| {
                Some(Msg {
                    est: Some(est.clone()),
                    co,
                    sig: sig.clone(),
                })
            })
            .collect();
        (outbox, report)
    }
}
