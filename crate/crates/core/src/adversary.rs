//! Byzantine strategies and the round-0 transient-fault injector.
//!
//! The adversary controls a fixed set of at most `t` nodes. It has full
//! information about correct states and the mail they are about to process,
//! but fixes its outboxes before the round's coin is revealed. Each
//! Byzantine node runs a shadow copy of the protocol to produce well-formed
//! messages, which policies then rewrite per receiver. All randomness comes
//! from the trial seed.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::Params;
use crate::mvc::eig::{labels_of_len, CoMsg, Label};
use crate::node::Node;
use crate::object::{
    AnyCore, CoreKind, CoreMsg, DelayStub, EstField, EstPayload, MmrLite, NoOracle, SlotEst,
};
use crate::sig_index::SigMsg;
use crate::transport::{Envelope, Msg, Outbox, RoundMail};
use crate::NodeId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    #[default]
    Silent,
    Random,
    Equivocate,
    WorstSig,
    WorstEig,
}

impl Policy {
    pub const ALL: [Policy; 5] = [
        Policy::Silent,
        Policy::Random,
        Policy::Equivocate,
        Policy::WorstSig,
        Policy::WorstEig,
    ];
}

impl FromStr for Policy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "silent" => Ok(Policy::Silent),
            "random" => Ok(Policy::Random),
            "equivocate" => Ok(Policy::Equivocate),
            "worst-sig" => Ok(Policy::WorstSig),
            "worst-eig" => Ok(Policy::WorstEig),
            other => Err(format!(
                "unknown adversary `{other}` (expected silent|random|equivocate|worst-sig|worst-eig)"
            )),
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Policy::Silent => "silent",
            Policy::Random => "random",
            Policy::Equivocate => "equivocate",
            Policy::WorstSig => "worst-sig",
            Policy::WorstEig => "worst-eig",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InjectMode {
    #[default]
    None,
    /// Every mutable field of every correct node plus round-0 channels.
    Full,
    /// Distinct indices and a spurious consensus output of 1.
    Targeted,
}

impl FromStr for InjectMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(InjectMode::None),
            "full" => Ok(InjectMode::Full),
            "targeted" => Ok(InjectMode::Targeted),
            other => Err(format!(
                "unknown inject mode `{other}` (expected none|full|targeted)"
            )),
        }
    }
}

impl fmt::Display for InjectMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InjectMode::None => "none",
            InjectMode::Full => "full",
            InjectMode::Targeted => "targeted",
        })
    }
}

/// Derives an independent generator for one purpose of one trial.
pub fn stream(seed: u64, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose);
    rng
}

const STREAM_BYZ_SET: u64 = 1 << 40;
const STREAM_TRAFFIC: u64 = 2 << 40;
const STREAM_INJECT: u64 = 3 << 40;
const STREAM_DELAY: u64 = 4 << 40;

/// Picks `count` Byzantine ids from the seed.
pub fn byz_set(n: usize, count: usize, seed: u64) -> Vec<NodeId> {
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(&mut stream(seed, STREAM_BYZ_SET));
    let mut chosen: Vec<NodeId> = ids.into_iter().take(count).map(NodeId).collect();
    chosen.sort();
    chosen
}

/// Adversary-chosen decision delay of the delay stub, in `0..=max`.
pub fn stub_delay(seed: u64, max: u32, node: NodeId, slot: usize, round: u64) -> u32 {
    let tag = (round << 20) ^ ((node.index() as u64) << 10) ^ slot as u64;
    stream(seed, STREAM_DELAY ^ tag).gen_range(0..=max)
}

pub struct Adversary {
    pub policy: Policy,
    pub byz: Vec<NodeId>,
    shadows: Vec<Node>,
    rng: ChaCha8Rng,
    n: usize,
    t: usize,
    kappa: u64,
    states: u64,
    index_num: usize,
}

impl Adversary {
    pub fn new(policy: Policy, byz: Vec<NodeId>, params: &Params, core: CoreKind) -> Self {
        let shadows = byz.iter().map(|&b| Node::new(b, params, core)).collect();
        Adversary {
            policy,
            byz,
            shadows,
            rng: stream(params.seed, STREAM_TRAFFIC),
            n: params.n,
            t: params.t,
            kappa: params.kappa,
            states: params.index_states,
            index_num: params.index_num,
        }
    }

    pub fn is_byz(&self, id: NodeId) -> bool {
        self.byz.contains(&id)
    }

    /// Outboxes of every Byzantine node for `round`, in `byz` order.
    ///
    /// `mail[i]` is what node `i` processes this round; `nodes[i]` is its
    /// state, `None` for Byzantine ids.
    pub fn outboxes(
        &mut self,
        round: u64,
        mail: &[RoundMail],
        nodes: &[Option<Node>],
    ) -> Vec<(NodeId, Option<Outbox>)> {
        let phase = round % self.kappa;
        let correct: Vec<usize> = (0..self.n).filter(|&i| nodes[i].is_some()).collect();
        let (first, _) = correct.split_at(correct.len().div_ceil(2));
        let first_half: Vec<bool> = (0..self.n).map(|j| first.contains(&j)).collect();
        let predicted = self.predict_sig(phase, mail, nodes);

        let mut out = Vec::with_capacity(self.byz.len());
        for k in 0..self.byz.len() {
            let id = self.byz[k];
            let (honest, _) = self.shadows[k].pulse(round, &mail[id.index()], false, &NoOracle);
            let outbox = match self.policy {
                Policy::Silent => None,
                Policy::Random => Some((0..self.n).map(|_| Some(self.random_msg())).collect()),
                Policy::Equivocate => Some(
                    honest
                        .into_iter()
                        .enumerate()
                        .map(|(j, m)| m.map(|m| if first_half[j] { m } else { self.twist(m) }))
                        .collect(),
                ),
                Policy::WorstEig => Some(
                    honest
                        .into_iter()
                        .enumerate()
                        .map(|(j, m)| {
                            m.map(|mut m| {
                                if !first_half[j] {
                                    m.co = m.co.map(flip_co);
                                }
                                m
                            })
                        })
                        .collect(),
                ),
                Policy::WorstSig => Some(
                    honest
                        .into_iter()
                        .enumerate()
                        .map(|(j, m)| {
                            m.map(|mut m| {
                                m.sig = self.split_sig(phase, &predicted, nodes, first_half[j]);
                                m
                            })
                        })
                        .collect(),
                ),
            };
            out.push((id, outbox));
        }
        out
    }

    /// The SIG messages correct nodes are about to broadcast.
    fn predict_sig(&self, phase: u64, mail: &[RoundMail], nodes: &[Option<Node>]) -> Vec<SigMsg> {
        nodes
            .iter()
            .zip(mail)
            .filter_map(|(node, m)| {
                let node = node.as_ref()?;
                let mut sig = node.sig.clone();
                sig.pulse(phase, &m.sig_fields(), node.mvc.result(), false)
            })
            .collect()
    }

    /// Keeps correct tallies on either side of the `n − t` threshold by
    /// sending the plurality value to one half and a spoiler to the other.
    fn split_sig(
        &self,
        phase: u64,
        predicted: &[SigMsg],
        nodes: &[Option<Node>],
        first: bool,
    ) -> Option<SigMsg> {
        let k = self.kappa;
        if phase == k - 4 {
            let indices: Vec<u64> = nodes.iter().flatten().map(|n| n.sig.get_index()).collect();
            let v = plurality(&indices).unwrap_or(0);
            Some(SigMsg::Index(if first { v } else { (v + 1) % self.states }))
        } else if phase == k - 3 {
            let props: Vec<u64> = predicted
                .iter()
                .filter_map(|m| match m {
                    SigMsg::Propose(Some(v)) => Some(*v),
                    _ => None,
                })
                .collect();
            let s = plurality(&props).unwrap_or(0);
            Some(SigMsg::Propose(first.then_some(s)))
        } else if phase == k - 2 {
            Some(SigMsg::Bit(first))
        } else {
            None
        }
    }

    /// Per-receiver contradiction of an honest message.
    fn twist(&self, mut m: Msg) -> Msg {
        m.co = m.co.map(flip_co);
        m.sig = m.sig.map(|s| match s {
            SigMsg::Index(v) => SigMsg::Index((v + 1) % self.states),
            SigMsg::Propose(Some(v)) => SigMsg::Propose(Some((v + 1) % self.states)),
            SigMsg::Propose(None) => SigMsg::Propose(Some(0)),
            SigMsg::Bit(b) => SigMsg::Bit(!b),
        });
        m.est = m.est.map(|mut e| {
            for entry in &mut e.entries {
                entry.est.delivered = !entry.est.delivered;
            }
            e
        });
        m
    }

    fn random_msg(&mut self) -> Msg {
        random_msg(&mut self.rng, self.n, self.t, self.states, self.index_num)
    }
}

fn plurality(values: &[u64]) -> Option<u64> {
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    sorted
        .chunk_by(|a, b| a == b)
        .max_by_key(|run| run.len())
        .map(|run| run[0])
}

fn flip_co(mut co: CoMsg<bool>) -> CoMsg<bool> {
    for (_, v) in &mut co.entries {
        *v = v.map(|b| !b);
    }
    co
}

fn random_bit_or_bottom(rng: &mut impl Rng) -> Option<bool> {
    match rng.gen_range(0..3) {
        0 => None,
        1 => Some(false),
        _ => Some(true),
    }
}

/// An index value: usually in range, sometimes anywhere in `u64`.
fn random_index(rng: &mut impl Rng, states: u64) -> u64 {
    if rng.gen_ratio(1, 4) {
        rng.gen()
    } else {
        rng.gen_range(0..states)
    }
}

fn random_core_msg(rng: &mut impl Rng) -> CoreMsg {
    match rng.gen_range(0..3) {
        0 => CoreMsg::Stub(rng.gen()),
        1 => CoreMsg::Est(rng.gen()),
        _ => CoreMsg::Aux(random_bit_or_bottom(rng)),
    }
}

fn random_co(rng: &mut impl Rng, n: usize, t: usize) -> CoMsg<bool> {
    let level = rng.gen_range(0..=t + 1);
    let mut entries = Vec::new();
    for l in labels_of_len(n, level) {
        if rng.gen_ratio(7, 8) {
            entries.push((l, random_bit_or_bottom(rng)));
        }
    }
    if rng.gen_ratio(1, 8) {
        let len = rng.gen_range(0..=t + 2);
        let junk = Label((0..len).map(|_| rng.gen_range(0..=n as u8)).collect());
        entries.push((junk, random_bit_or_bottom(rng)));
    }
    CoMsg {
        level: level as u8,
        entries,
    }
}

fn random_sig(rng: &mut impl Rng, states: u64) -> SigMsg {
    match rng.gen_range(0..3) {
        0 => SigMsg::Index(random_index(rng, states)),
        1 => SigMsg::Propose(rng.gen::<bool>().then(|| random_index(rng, states))),
        _ => SigMsg::Bit(rng.gen()),
    }
}

fn random_est(rng: &mut impl Rng, index_num: usize) -> EstField {
    let mut entries = Vec::new();
    for slot in 0..index_num {
        if rng.gen_ratio(1, 2) {
            let core = rng.gen::<bool>().then(|| random_core_msg(rng));
            let est = EstPayload {
                core,
                delivered: rng.gen(),
            };
            entries.push(SlotEst {
                slot: slot as u16,
                est,
            });
        }
    }
    EstField { entries }
}

/// A well-formed message with arbitrary contents in every field.
pub fn random_msg(rng: &mut impl Rng, n: usize, t: usize, states: u64, index_num: usize) -> Msg {
    Msg {
        est: rng.gen_ratio(3, 4).then(|| random_est(rng, index_num)),
        co: rng.gen_ratio(3, 4).then(|| random_co(rng, n, t)),
        sig: rng.gen_ratio(3, 4).then(|| random_sig(rng, states)),
    }
}

/// One replaced field.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Corruption {
    Index(u64),
    Propose(Option<u64>),
    Save(Option<u64>),
    Bit(bool),
    Inc(bool),
    CurrentResult(Option<bool>),
    CoReceived(usize),
    CoTree(Vec<(Label, Option<bool>)>),
    Object {
        slot: usize,
        delivered: Vec<bool>,
        proposed: Option<bool>,
        core: AnyCore,
    },
    /// Round-0 channel content from `sender`; `None` empties the channel.
    Inbox {
        sender: usize,
        msg: Option<Msg>,
    },
}

/// Replacement values per correct node, replayable from the log.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorruptionMap {
    pub nodes: Vec<(NodeId, Vec<Corruption>)>,
}

fn random_core(rng: &mut impl Rng, kind: CoreKind) -> AnyCore {
    let opt = |rng: &mut ChaCha8Rng| rng.gen::<bool>().then(|| rng.gen::<bool>());
    let mut local = ChaCha8Rng::seed_from_u64(rng.gen());
    let rng = &mut local;
    match kind {
        CoreKind::Stub => AnyCore::Stub(DelayStub {
            proposal: opt(rng),
            elapsed: rng.gen(),
            delay: rng.gen::<bool>().then(|| rng.gen()),
            target: opt(rng),
            decided: opt(rng),
            fault: rng.gen_ratio(1, 8),
        }),
        CoreKind::MmrLite => AnyCore::Mmr(MmrLite {
            est: opt(rng),
            decided: opt(rng),
            fault: rng.gen_ratio(1, 8),
        }),
    }
}

fn random_tree(rng: &mut impl Rng, n: usize, t: usize) -> Vec<(Label, Option<bool>)> {
    let mut tree = Vec::new();
    for len in 0..=t + 1 {
        for l in labels_of_len(n, len) {
            if rng.gen_ratio(3, 4) {
                tree.push((l, random_bit_or_bottom(rng)));
            }
        }
    }
    if rng.gen_ratio(1, 4) {
        tree.push((Label(vec![n as u8, 0]), Some(true)));
    }
    tree
}

/// Draws the corruption for every correct node from the trial seed.
pub fn draw_corruption(
    params: &Params,
    mode: InjectMode,
    correct: &[NodeId],
    core: CoreKind,
) -> CorruptionMap {
    let mut rng = stream(params.seed, STREAM_INJECT);
    let (n, t, states) = (params.n, params.t, params.index_states);
    let mut map = CorruptionMap::default();
    // Distinct in-range values where possible, so indices start disagreeing.
    let mut distinct: Vec<u64> = (0..states).collect();
    distinct.shuffle(&mut rng);
    for (k, &id) in correct.iter().enumerate() {
        let mut fields = Vec::new();
        match mode {
            InjectMode::None => {}
            InjectMode::Targeted => {
                fields.push(Corruption::Index(distinct[k % distinct.len()]));
                fields.push(Corruption::CurrentResult(Some(true)));
            }
            InjectMode::Full => {
                fields.push(Corruption::Index(random_index(&mut rng, states)));
                fields.push(Corruption::Propose(
                    rng.gen::<bool>().then(|| random_index(&mut rng, states)),
                ));
                fields.push(Corruption::Save(
                    rng.gen::<bool>().then(|| random_index(&mut rng, states)),
                ));
                fields.push(Corruption::Bit(rng.gen()));
                fields.push(Corruption::Inc(rng.gen()));
                fields.push(Corruption::CurrentResult(random_bit_or_bottom(&mut rng)));
                fields.push(Corruption::CoReceived(rng.gen_range(0..=t + 3)));
                fields.push(Corruption::CoTree(random_tree(&mut rng, n, t)));
                for slot in 0..params.index_num {
                    fields.push(Corruption::Object {
                        slot,
                        delivered: (0..n).map(|_| rng.gen()).collect(),
                        proposed: rng.gen::<bool>().then(|| rng.gen()),
                        core: random_core(&mut rng, core),
                    });
                }
                for sender in 0..n {
                    let msg = rng
                        .gen_ratio(3, 4)
                        .then(|| random_msg(&mut rng, n, t, states, params.index_num));
                    fields.push(Corruption::Inbox { sender, msg });
                }
            }
        }
        map.nodes.push((id, fields));
    }
    map
}

/// Applies `map` to the round-0 configuration.
pub fn inject(nodes: &mut [Option<Node>], mail: &mut [RoundMail], map: &CorruptionMap) {
    for (id, fields) in &map.nodes {
        let Some(node) = nodes.get_mut(id.index()).and_then(Option::as_mut) else {
            continue;
        };
        for field in fields {
            match field.clone() {
                Corruption::Index(v) => node.sig.index = v,
                Corruption::Propose(v) => node.sig.propose = v,
                Corruption::Save(v) => node.sig.save = v,
                Corruption::Bit(b) => node.sig.bit = b,
                Corruption::Inc(b) => node.sig.inc = b,
                Corruption::CurrentResult(v) => node.mvc.current_result = v,
                Corruption::CoReceived(k) => node.mvc.co.received = k,
                Corruption::CoTree(entries) => node.mvc.co.tree = entries.into_iter().collect(),
                Corruption::Object {
                    slot,
                    delivered,
                    proposed,
                    core,
                } => {
                    let obj = &mut node.objects.objs[slot];
                    obj.delivered = delivered;
                    obj.proposed = proposed;
                    obj.core = core;
                }
                Corruption::Inbox { sender, msg } => {
                    let m = &mut mail[id.index()];
                    m.inbox[sender] = msg.map(|msg| Envelope::new(NodeId(sender), msg));
                    m.recompute_complete();
                }
            }
        }
    }
}
