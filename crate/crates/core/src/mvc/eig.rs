//! Exponential information gathering (EIG) Byzantine agreement, used as the
//! non-self-stabilizing synchronous consensus object `co`.
//!
//! Each node keeps a tree whose labels are strings of distinct node ids of
//! length at most `t + 1`. Exchange `k` fills level `k`: a value relayed by
//! `p_j` for label `σ` (with `j ∉ σ`) is stored at `σ·j`. After `t + 1`
//! exchanges the root is resolved bottom-up by strict majority over
//! children, with the default value on no majority. Requires `n > 3t`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::NodeId;

/// A path in the EIG tree: distinct node ids, root is empty.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
pub struct Label(pub Vec<u8>);

impl Label {
    pub fn root() -> Self {
        Label(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, node: usize) -> bool {
        self.0.iter().any(|&x| x as usize == node)
    }

    pub fn child(&self, node: usize) -> Label {
        let mut v = self.0.clone();
        v.push(node as u8);
        Label(v)
    }

    /// Ids in range and pairwise distinct.
    pub fn is_valid(&self, n: usize) -> bool {
        self.0
            .iter()
            .enumerate()
            .all(|(i, &a)| (a as usize) < n && !self.0[..i].contains(&a))
    }
}

impl fmt::Debug for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("ε");
        }
        let parts: Vec<String> = self.0.iter().map(u8::to_string).collect();
        f.write_str(&parts.join("."))
    }
}

/// All labels of length `len` over `n` ids.
pub fn labels_of_len(n: usize, len: usize) -> Vec<Label> {
    let mut out = vec![Label::root()];
    for _ in 0..len {
        out = out
            .iter()
            .flat_map(|l| (0..n).filter(|&j| !l.contains(j)).map(move |j| l.child(j)))
            .collect();
    }
    out
}

/// One co message: the sender's entries for tree level `level`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoMsg<V> {
    pub level: u8,
    pub entries: Vec<(Label, Option<V>)>,
}

impl CoMsg<bool> {
    pub(crate) fn encode(&self, out: &mut Vec<u8>) {
        out.push(self.level);
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for (label, v) in &self.entries {
            out.push(label.len() as u8);
            out.extend_from_slice(&label.0);
            out.push(match v {
                None => 2,
                Some(b) => *b as u8,
            });
        }
    }
}

/// Interface of the synchronous consensus object `co`.
///
/// `propose` and `process` return the message for each destination.
/// `result` is `Some` once the instance completed; it satisfies BC-validity
/// and BC-agreement when every correct node restarted, proposed and
/// processed in lock-step.
pub trait CoInstance<V> {
    type Msg;
    fn restart(&mut self);
    fn propose(&mut self, value: V) -> Vec<Option<Self::Msg>>;
    fn process(&mut self, inbox: &[Option<Self::Msg>]) -> Vec<Option<Self::Msg>>;
    fn result(&self) -> Option<V>;
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EigCo<V: Ord> {
    n: usize,
    t: usize,
    me: NodeId,
    /// Exchanges absorbed since the last proposal.
    pub received: usize,
    pub tree: BTreeMap<Label, Option<V>>,
}

impl<V> EigCo<V>
where
    V: Clone + Ord + Default,
{
    pub fn new(me: NodeId, n: usize, t: usize) -> Self {
        EigCo {
            n,
            t,
            me,
            received: 0,
            tree: BTreeMap::new(),
        }
    }

    pub fn rounds(&self) -> usize {
        self.t + 1
    }

    fn broadcast(&self, msg: Option<CoMsg<V>>) -> Vec<Option<CoMsg<V>>> {
        vec![msg; self.n]
    }

    fn entries_at(&self, level: usize) -> Vec<(Label, Option<V>)> {
        labels_of_len(self.n, level)
            .into_iter()
            .filter(|l| !l.contains(self.me.index()))
            .map(|l| {
                let v = self.tree.get(&l).cloned().flatten();
                (l, v)
            })
            .collect()
    }

    fn resolve(&self, label: &Label) -> V {
        if label.len() > self.t {
            return self.tree.get(label).cloned().flatten().unwrap_or_default();
        }
        let children: Vec<V> = (0..self.n)
            .filter(|&j| !label.contains(j))
            .map(|j| self.resolve(&label.child(j)))
            .collect();
        let mut counts: BTreeMap<&V, usize> = BTreeMap::new();
        for v in &children {
            *counts.entry(v).or_default() += 1;
        }
        let winner = counts
            .into_iter()
            .find(|&(_, c)| 2 * c > children.len())
            .map(|(v, _)| v.clone());
        winner.unwrap_or_default()
    }
}

/// Entries of a well-formed message for `level`; labels that repeat are ⊥.
fn index_entries<V: Clone>(msg: &CoMsg<V>, level: usize) -> Option<BTreeMap<&Label, Option<V>>> {
    if msg.level as usize != level {
        return None;
    }
    let mut map: BTreeMap<&Label, Option<V>> = BTreeMap::new();
    let mut dup = Vec::new();
    for (l, v) in &msg.entries {
        if map.insert(l, v.clone()).is_some() {
            dup.push(l);
        }
    }
    for l in dup {
        map.insert(l, None);
    }
    Some(map)
}

impl<V> CoInstance<V> for EigCo<V>
where
    V: Clone + Ord + Default,
{
    type Msg = CoMsg<V>;

    fn restart(&mut self) {
        self.received = 0;
        self.tree.clear();
    }

    fn propose(&mut self, value: V) -> Vec<Option<CoMsg<V>>> {
        self.tree.insert(Label::root(), Some(value.clone()));
        self.broadcast(Some(CoMsg {
            level: 0,
            entries: vec![(Label::root(), Some(value))],
        }))
    }

    fn process(&mut self, inbox: &[Option<CoMsg<V>>]) -> Vec<Option<CoMsg<V>>> {
        if self.received >= self.rounds() {
            return self.broadcast(None);
        }
        let level = self.received;
        let parents = labels_of_len(self.n, level);
        for j in 0..self.n {
            let entries = inbox
                .get(j)
                .and_then(Option::as_ref)
                .and_then(|m| index_entries(m, level));
            for parent in parents.iter().filter(|p| !p.contains(j)) {
                let v = entries
                    .as_ref()
                    .and_then(|e| e.get(parent).cloned())
                    .flatten();
                self.tree.insert(parent.child(j), v);
            }
        }
        self.received += 1;
        if self.received < self.rounds() {
            let entries = self.entries_at(self.received);
            self.broadcast(Some(CoMsg {
                level: self.received as u8,
                entries,
            }))
        } else {
            self.broadcast(None)
        }
    }

    fn result(&self) -> Option<V> {
        (self.received >= self.rounds()).then(|| self.resolve(&Label::root()))
    }
}
