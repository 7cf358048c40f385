//! The lock-step round engine.
//!
//! Per round: harness proposals (phase 0) → Byzantine outboxes → coin
//! reveal → every correct node pulses → the harness reads every live
//! object → exchange. Round-0 state and channels are corrupted first.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::Config;
use super::metrics::{measure, Metrics};
use crate::adversary::{byz_set, draw_corruption, inject, stream, Adversary, CorruptionMap};
use crate::env::{CommonCoin, Params};
use crate::error::Result;
use crate::node::Node;
use crate::object::{DecisionOracle, ObjResult};
use crate::sig_index::Branch;
use crate::transport::{digest, exchange, Outbox, RoundMail};
use crate::NodeId;

const STREAM_PROPOSALS: u64 = 5 << 40;

/// Birth round of an incarnation corrupted at round 0.
pub const INJECTED: i64 = -1;

/// One round as observed after every correct node pulsed. Per-node vectors
/// follow [`Trace::correct`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u64,
    pub phase: u64,
    pub coin: bool,
    pub indices: Vec<u64>,
    pub mvc: Vec<Option<bool>>,
    /// Phase 0: the sampled `wasDelivered()` input.
    pub sampled: Vec<Option<bool>>,
    /// `delivered` vector of each node's current object.
    pub delivered: Vec<Vec<bool>>,
    pub was_delivered: Vec<bool>,
    pub recycled: Vec<Vec<usize>>,
    /// Recycled slots that held a local proposal.
    pub retired: Vec<Vec<usize>>,
    pub saves: Vec<Option<u64>>,
    pub branches: Vec<Option<Branch>>,
    pub non_fresh: Vec<usize>,
    /// Earliest birth round over every live incarnation, [`INJECTED`] for
    /// round-0 garbage, `None` when nothing is live.
    pub oldest_birth: Option<i64>,
    /// Incarnations retired at every correct node this round.
    pub retirements: Vec<Retirement>,
    pub digest: String,
}

/// A used slot that left the window at every correct node in one round.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Retirement {
    pub slot: usize,
    /// Earliest birth round of the slot over the correct nodes.
    pub birth: i64,
    /// Every correct node read a non-⊥ result before the slot left.
    pub read_by_all: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub correct: Vec<NodeId>,
    pub byz: Vec<NodeId>,
    pub params: Params,
    pub rounds: Vec<RoundRecord>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrialOutput {
    pub trial: usize,
    pub params: Params,
    pub corruption: CorruptionMap,
    pub trace: Trace,
    pub metrics: Metrics,
}

/// Ground truth for the delay stub during one round.
struct RoundOracle {
    agreed: Vec<Option<bool>>,
    seed: u64,
    dmax: u32,
    round: u64,
}

impl DecisionOracle for RoundOracle {
    fn agreed(&self, slot: usize) -> Option<bool> {
        self.agreed.get(slot).copied().flatten()
    }
    fn delay(&self, node: NodeId, slot: usize) -> u32 {
        crate::adversary::stub_delay(self.seed, self.dmax, node, slot, self.round)
    }
    fn max_delay(&self) -> u32 {
        self.dmax
    }
}

/// Majority of the correct proposals per slot, ties to 0.
fn agreed_values(nodes: &[Option<Node>], index_num: usize) -> Vec<Option<bool>> {
    (0..index_num)
        .map(|slot| {
            let (mut ones, mut zeros) = (0, 0);
            for node in nodes.iter().flatten() {
                match node.objects.objs[slot].proposed {
                    Some(true) => ones += 1,
                    Some(false) => zeros += 1,
                    None => {}
                }
            }
            (ones + zeros > 0).then_some(ones > zeros)
        })
        .collect()
}

pub fn run_trial(config: &Config, trial: usize) -> Result<TrialOutput> {
    config.validate()?;
    let params = config.params(trial);
    let (n, seed) = (params.n, params.seed);
    let byz = byz_set(n, config.byz_count(), seed);
    let is_correct: Vec<bool> = (0..n).map(|i| !byz.contains(&NodeId(i))).collect();
    let correct: Vec<NodeId> = (0..n).filter(|&i| is_correct[i]).map(NodeId).collect();

    let mut nodes: Vec<Option<Node>> = (0..n)
        .map(|i| is_correct[i].then(|| Node::new(NodeId(i), &params, config.core)))
        .collect();
    let mut adversary = Adversary::new(config.adversary, byz.clone(), &params, config.core);
    let mut mail = vec![RoundMail::empty(n); n];
    let corruption = draw_corruption(&params, config.inject, &correct, config.core);
    inject(&mut nodes, &mut mail, &corruption);

    let coin = CommonCoin::new(seed);
    let mut proposals = stream(seed, STREAM_PROPOSALS);
    let slots = params.index_num;
    let mut birth: Vec<Vec<Option<i64>>> = correct
        .iter()
        .map(|id| {
            let node = nodes[id.index()].as_ref().expect("correct node");
            node.objects
                .objs
                .iter()
                .map(|o| (!o.is_fresh()).then_some(INJECTED))
                .collect()
        })
        .collect();
    let mut read = vec![vec![false; slots]; correct.len()];

    let mut records = Vec::with_capacity(config.rounds as usize);
    for round in 0..config.rounds {
        let phase = round % params.kappa;
        if phase == 0 {
            for id in &correct {
                let bit = proposals.gen();
                nodes[id.index()]
                    .as_mut()
                    .expect("correct node")
                    .propose_current(bit);
            }
        }
        let byz_out = adversary.outboxes(round, &mail, &nodes);
        let coin_value = coin.draw(round).value;
        let oracle = RoundOracle {
            agreed: agreed_values(&nodes, slots),
            seed,
            dmax: config.dmax,
            round,
        };

        let mut outboxes: Vec<Option<Outbox>> = vec![None; n];
        let mut reports = Vec::with_capacity(correct.len());
        for id in &correct {
            let node = nodes[id.index()].as_mut().expect("correct node");
            let (outbox, report) = node.pulse(round, &mail[id.index()], coin_value, &oracle);
            outboxes[id.index()] = Some(outbox);
            reports.push(report);
        }
        for (id, outbox) in byz_out {
            outboxes[id.index()] = outbox;
        }

        // Judged on reads up to the previous round.
        let retirements: Vec<Retirement> = (0..slots)
            .filter(|slot| reports.iter().all(|r| r.retired.contains(slot)))
            .map(|slot| Retirement {
                slot,
                birth: (0..correct.len())
                    .map(|k| birth[k][slot].unwrap_or(INJECTED))
                    .min()
                    .unwrap_or(INJECTED),
                read_by_all: (0..correct.len()).all(|k| read[k][slot]),
            })
            .collect();
        for (k, report) in reports.iter().enumerate() {
            for &slot in &report.recycled {
                read[k][slot] = false;
                birth[k][slot] = None;
            }
        }

        let mut record = RoundRecord {
            round,
            phase,
            coin: coin_value,
            indices: Vec::with_capacity(correct.len()),
            mvc: Vec::new(),
            sampled: reports.iter().map(|r| r.sampled).collect(),
            delivered: Vec::new(),
            was_delivered: Vec::new(),
            recycled: reports.iter().map(|r| r.recycled.clone()).collect(),
            retired: reports.iter().map(|r| r.retired.clone()).collect(),
            saves: Vec::new(),
            branches: Vec::new(),
            non_fresh: Vec::new(),
            oldest_birth: None,
            retirements,
            digest: String::new(),
        };
        for (k, id) in correct.iter().enumerate() {
            let node = nodes[id.index()].as_mut().expect("correct node");
            for (slot, result) in node.read_window() {
                if result != ObjResult::Bottom {
                    read[k][slot] = true;
                }
            }
            for (slot, obj) in node.objects.objs.iter().enumerate() {
                if obj.is_fresh() {
                    birth[k][slot] = None;
                    read[k][slot] = false;
                } else if birth[k][slot].is_none() {
                    birth[k][slot] = Some(round as i64);
                }
            }
            let current = &node.objects.objs[node.current_slot()];
            record.indices.push(node.sig.get_index());
            record.mvc.push(node.mvc.result());
            record.delivered.push(current.delivered.clone());
            record.was_delivered.push(current.was_delivered());
            record.saves.push(node.sig.save);
            record.branches.push(if phase == params.kappa - 1 {
                node.sig.last_branch
            } else {
                None
            });
            record.non_fresh.push(node.objects.non_fresh());
        }
        record.oldest_birth = birth.iter().flatten().flatten().min().copied();

        mail = exchange(&outboxes, &is_correct)?;
        record.digest = digest(&mail);
        records.push(record);
    }

    let trace = Trace {
        correct,
        byz,
        params: params.clone(),
        rounds: records,
    };
    let metrics = measure(&trace);
    Ok(TrialOutput {
        trial,
        params,
        corruption,
        trace,
        metrics,
    })
}

/// Runs `config.trials` independent trials in parallel, in trial order.
pub fn run_ensemble(config: &Config) -> Result<Vec<TrialOutput>> {
    config.validate()?;
    (0..config.trials)
        .into_par_iter()
        .map(|k| run_trial(config, k))
        .collect()
}
