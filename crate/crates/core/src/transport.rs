//! Lock-step reliable exchange of the multiplexed per-round message.
//!
//! Every node sends one [`Msg`] per destination per round. The message has
//! one optional field per sub-protocol: recyclable-object traffic, the
//! synchronous consensus (co) traffic and the SIG-index traffic. Delivery is
//! exact. The sender of an [`Envelope`] is stamped by [`exchange`] from the
//! outbox owner, so a node cannot claim another node's identity.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::mvc::eig::CoMsg;
use crate::object::EstField;
use crate::sig_index::SigMsg;
use crate::NodeId;

/// The multiplexed message `MSG()`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Msg {
    pub est: Option<EstField>,
    pub co: Option<CoMsg<bool>>,
    pub sig: Option<SigMsg>,
}

pub fn multiplex(est: Option<EstField>, co: Option<CoMsg<bool>>, sig: Option<SigMsg>) -> Msg {
    Msg { est, co, sig }
}

pub fn demultiplex(msg: Msg) -> (Option<EstField>, Option<CoMsg<bool>>, Option<SigMsg>) {
    (msg.est, msg.co, msg.sig)
}

impl Msg {
    pub fn is_empty(&self) -> bool {
        self.est.is_none() && self.co.is_none() && self.sig.is_none()
    }

    /// Canonical bytes: one tagged section per present field, each with a
    /// little-endian `u32` length prefix.
    pub fn encode(&self, out: &mut Vec<u8>) {
        let mut buf = Vec::new();
        if let Some(est) = &self.est {
            est.encode(&mut buf);
            put_section(out, 1, &buf);
            buf.clear();
        }
        if let Some(co) = &self.co {
            co.encode(&mut buf);
            put_section(out, 2, &buf);
            buf.clear();
        }
        if let Some(sig) = &self.sig {
            sig.encode(&mut buf);
            put_section(out, 3, &buf);
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.encode(&mut out);
        out
    }
}

fn put_section(out: &mut Vec<u8>, tag: u8, body: &[u8]) {
    out.push(tag);
    out.extend_from_slice(&(body.len() as u32).to_le_bytes());
    out.extend_from_slice(body);
}

/// A delivered message with its authenticated sender.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Envelope {
    sender: NodeId,
    msg: Msg,
}

impl Envelope {
    /// Only the transport and the round-0 channel injector build envelopes.
    pub(crate) fn new(sender: NodeId, msg: Msg) -> Self {
        Envelope { sender, msg }
    }

    pub fn sender(&self) -> NodeId {
        self.sender
    }

    pub fn msg(&self) -> &Msg {
        &self.msg
    }
}

/// Everything a node received at the start of a round, indexed by sender.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundMail {
    pub inbox: Vec<Option<Envelope>>,
    /// Every sender delivered an envelope.
    pub complete: bool,
}

impl RoundMail {
    pub fn empty(n: usize) -> Self {
        RoundMail {
            inbox: vec![None; n],
            complete: false,
        }
    }

    pub fn from(&self, sender: NodeId) -> Option<&Msg> {
        self.inbox.get(sender.index())?.as_ref().map(Envelope::msg)
    }

    pub fn msgs(&self) -> impl Iterator<Item = Option<&Msg>> + '_ {
        self.inbox.iter().map(|e| e.as_ref().map(Envelope::msg))
    }

    pub fn co_fields(&self) -> Vec<Option<CoMsg<bool>>> {
        self.msgs().map(|m| m.and_then(|m| m.co.clone())).collect()
    }

    pub fn sig_fields(&self) -> Vec<Option<SigMsg>> {
        self.msgs().map(|m| m.and_then(|m| m.sig.clone())).collect()
    }

    pub(crate) fn recompute_complete(&mut self) {
        self.complete = self.inbox.iter().all(Option::is_some);
    }
}

/// One node's messages for this round, one entry per destination.
pub type Outbox = Vec<Option<Msg>>;

/// Delivers every outbox: `inbox[j][i] = outbox[i][j]`.
///
/// `outboxes[i]` is `None` only for a silent Byzantine node; a missing
/// outbox for a correct node is a simulator bug.
pub fn exchange(outboxes: &[Option<Outbox>], correct: &[bool]) -> Result<Vec<RoundMail>> {
    let n = outboxes.len();
    let mut mail: Vec<RoundMail> = (0..n).map(|_| RoundMail::empty(n)).collect();
    for (i, outbox) in outboxes.iter().enumerate() {
        let Some(outbox) = outbox else {
            if correct[i] {
                return Err(Error::MissingOutbox(i));
            }
            continue;
        };
        if outbox.len() != n {
            return Err(Error::OutboxShape {
                node: i,
                got: outbox.len(),
                expected: n,
            });
        }
        for (j, msg) in outbox.iter().enumerate() {
            if let Some(msg) = msg {
                mail[j].inbox[i] = Some(Envelope::new(NodeId(i), msg.clone()));
            }
        }
    }
    for m in &mut mail {
        m.recompute_complete();
    }
    Ok(mail)
}

/// Checks the reliable-delivery invariant between correct nodes.
pub fn delivery_exact(outboxes: &[Option<Outbox>], mail: &[RoundMail], correct: &[bool]) -> bool {
    for (i, outbox) in outboxes.iter().enumerate() {
        if !correct[i] {
            continue;
        }
        let Some(outbox) = outbox else { return false };
        for (j, sent) in outbox.iter().enumerate() {
            if !correct[j] {
                continue;
            }
            let got = mail[j].inbox[i].as_ref();
            match (sent, got) {
                (None, None) => {}
                (Some(s), Some(e)) if e.sender() == NodeId(i) && e.msg() == s => {}
                _ => return false,
            }
        }
    }
    true
}

/// Trace log lines: `round,sender,receiver,hex(canonical bytes)`.
pub fn trace_lines(round: u64, mail: &[RoundMail]) -> Vec<String> {
    let mut lines = Vec::new();
    for (receiver, m) in mail.iter().enumerate() {
        for env in m.inbox.iter().flatten() {
            lines.push(format!(
                "{round},{},{receiver},{}",
                env.sender().index(),
                hex::encode(env.msg().to_bytes())
            ));
        }
    }
    lines
}

/// Short digest over all envelopes of a round, in (receiver, sender) order.
pub fn digest(mail: &[RoundMail]) -> String {
    let mut h = Sha256::new();
    for (receiver, m) in mail.iter().enumerate() {
        for env in m.inbox.iter().flatten() {
            h.update((receiver as u32).to_le_bytes());
            h.update((env.sender().index() as u32).to_le_bytes());
            let bytes = env.msg().to_bytes();
            h.update((bytes.len() as u32).to_le_bytes());
            h.update(&bytes);
        }
    }
    hex::encode(&h.finalize()[..8])
}
