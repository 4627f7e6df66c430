//! Double-echo Byzantine reliable broadcast (INIT / ECHO / READY).
//!
//! One [`BrbLayer`] per process multiplexes instances keyed by
//! `(sender, round, kind)`. The layer never touches the network itself: it
//! returns the messages to broadcast and the payloads delivered, and the
//! owner forwards them. Requires `n >= 3f + 1`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Debug;

use serde::{Deserialize, Serialize};

use crate::types::ProcessId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BrbKind {
    Init,
    Echo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BrbKey {
    pub sender: ProcessId,
    pub round: u64,
    pub kind: BrbKind,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BrbStage {
    Send,
    Echo,
    Ready,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BrbMessage<P> {
    pub stage: BrbStage,
    pub key: BrbKey,
    pub payload: P,
}

/// `ceil((n+f+1)/2)` matching ECHOs trigger READY.
pub fn echo_threshold(n: usize, f: usize) -> usize {
    (n + f + 2) / 2
}

/// `f+1` matching READYs trigger READY.
pub fn ready_amplify_threshold(f: usize) -> usize {
    f + 1
}

/// `2f+1` matching READYs trigger delivery.
pub fn deliver_threshold(f: usize) -> usize {
    2 * f + 1
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Instance<P: Ord> {
    got_send: bool,
    sent_echo: bool,
    sent_ready: bool,
    echoes: BTreeMap<P, BTreeSet<ProcessId>>,
    echoed_by: BTreeSet<ProcessId>,
    readies: BTreeMap<P, BTreeSet<ProcessId>>,
    readied_by: BTreeSet<ProcessId>,
    delivered: Option<P>,
}

impl<P: Ord> Default for Instance<P> {
    fn default() -> Self {
        Instance {
            got_send: false,
            sent_echo: false,
            sent_ready: false,
            echoes: BTreeMap::new(),
            echoed_by: BTreeSet::new(),
            readies: BTreeMap::new(),
            readied_by: BTreeSet::new(),
            delivered: None,
        }
    }
}

/// Output of one BRB step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BrbOutput<P> {
    pub broadcasts: Vec<BrbMessage<P>>,
    pub delivered: Vec<(BrbKey, P)>,
}

impl<P> Default for BrbOutput<P> {
    fn default() -> Self {
        BrbOutput {
            broadcasts: Vec::new(),
            delivered: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BrbLayer<P: Ord> {
    me: ProcessId,
    n: usize,
    f: usize,
    instances: BTreeMap<BrbKey, Instance<P>>,
    broadcast_keys: BTreeMap<BrbKey, P>,
    log: Vec<(BrbKey, P)>,
}

impl<P: Clone + Ord + Debug> BrbLayer<P> {
    pub fn new(me: ProcessId, n: usize, f: usize) -> Self {
        BrbLayer {
            me,
            n,
            f,
            instances: BTreeMap::new(),
            broadcast_keys: BTreeMap::new(),
            log: Vec::new(),
        }
    }

    /// Start an instance as its sender. A second broadcast for the same key
    /// is a protocol bug.
    pub fn broadcast(&mut self, round: u64, kind: BrbKind, payload: P) -> BrbMessage<P> {
        let key = BrbKey {
            sender: self.me,
            round,
            kind,
        };
        let prev = self.broadcast_keys.insert(key, payload.clone());
        assert!(prev.is_none(), "duplicate reliable broadcast for {key:?}");
        BrbMessage {
            stage: BrbStage::Send,
            key,
            payload,
        }
    }

    /// Payloads this process itself broadcast, by key.
    pub fn own_broadcasts(&self) -> &BTreeMap<BrbKey, P> {
        &self.broadcast_keys
    }

    /// Every delivery in order.
    pub fn delivery_log(&self) -> &[(BrbKey, P)] {
        &self.log
    }

    pub fn delivered(&self, key: &BrbKey) -> Option<&P> {
        self.instances.get(key).and_then(|i| i.delivered.as_ref())
    }

    pub fn on_message(&mut self, from: ProcessId, msg: BrbMessage<P>) -> BrbOutput<P> {
        let mut out = BrbOutput::default();
        let (n, f) = (self.n, self.f);
        let key = msg.key;
        let inst = self.instances.entry(key).or_default();
        match msg.stage {
            BrbStage::Send => {
                // Only the sender may start its instance, and only once.
                if from != key.sender || inst.got_send {
                    return out;
                }
                inst.got_send = true;
                if !inst.sent_echo {
                    inst.sent_echo = true;
                    out.broadcasts.push(BrbMessage {
                        stage: BrbStage::Echo,
                        key,
                        payload: msg.payload,
                    });
                }
            }
            BrbStage::Echo => {
                if !inst.echoed_by.insert(from) {
                    return out;
                }
                let set = inst.echoes.entry(msg.payload.clone()).or_default();
                set.insert(from);
                if set.len() >= echo_threshold(n, f) && !inst.sent_ready {
                    inst.sent_ready = true;
                    out.broadcasts.push(BrbMessage {
                        stage: BrbStage::Ready,
                        key,
                        payload: msg.payload,
                    });
                }
            }
            BrbStage::Ready => {
                if !inst.readied_by.insert(from) {
                    return out;
                }
                let set = inst.readies.entry(msg.payload.clone()).or_default();
                set.insert(from);
                let count = set.len();
                if count >= ready_amplify_threshold(f) && !inst.sent_ready {
                    inst.sent_ready = true;
                    out.broadcasts.push(BrbMessage {
                        stage: BrbStage::Ready,
                        key,
                        payload: msg.payload.clone(),
                    });
                }
                if count >= deliver_threshold(f) && inst.delivered.is_none() {
                    inst.delivered = Some(msg.payload.clone());
                    self.log.push((key, msg.payload.clone()));
                    out.delivered.push((key, msg.payload));
                }
            }
        }
        out
    }
}

/// Per-process view used by the five property monitors.
#[derive(Debug, Clone)]
pub struct BrbView<'a, P> {
    pub process: ProcessId,
    pub broadcasts: &'a BTreeMap<BrbKey, P>,
    pub deliveries: &'a [(BrbKey, P)],
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BrbVerdict {
    pub validity: bool,
    pub no_duplication: bool,
    pub integrity: bool,
    pub consistency: bool,
    pub totality: bool,
}

impl BrbVerdict {
    pub fn all(&self) -> bool {
        self.validity && self.no_duplication && self.integrity && self.consistency && self.totality
    }

    pub fn failures(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        if !self.validity {
            v.push("brb-validity");
        }
        if !self.no_duplication {
            v.push("brb-no-duplication");
        }
        if !self.integrity {
            v.push("brb-integrity");
        }
        if !self.consistency {
            v.push("brb-consistency");
        }
        if !self.totality {
            v.push("brb-totality");
        }
        v
    }
}

/// Check the five broadcast properties over the views of correct processes.
/// Liveness properties (validity, totality) are only meaningful after the
/// run has been drained to quiescence.
pub fn check_brb<P: Clone + Ord>(views: &[BrbView<'_, P>]) -> BrbVerdict {
    let correct: BTreeSet<ProcessId> = views.iter().map(|v| v.process).collect();
    let mut verdict = BrbVerdict {
        validity: true,
        no_duplication: true,
        integrity: true,
        consistency: true,
        totality: true,
    };
    let mut delivered_by_key: BTreeMap<BrbKey, BTreeMap<ProcessId, &P>> = BTreeMap::new();
    for v in views {
        let mut seen = BTreeSet::new();
        for (k, p) in v.deliveries {
            if !seen.insert(*k) {
                verdict.no_duplication = false;
            }
            delivered_by_key
                .entry(*k)
                .or_default()
                .entry(v.process)
                .or_insert(p);
        }
    }
    let sent: BTreeMap<BrbKey, &P> = views
        .iter()
        .flat_map(|v| v.broadcasts.iter())
        .map(|(k, p)| (*k, p))
        .collect();
    for (k, by) in &delivered_by_key {
        let mut values = by.values();
        let first = values.next().expect("nonempty");
        if values.any(|p| *p != *first) {
            verdict.consistency = false;
        }
        if correct.contains(&k.sender) {
            match sent.get(k) {
                Some(m) => {
                    if by.values().any(|p| *p != *m) {
                        verdict.integrity = false;
                    }
                }
                None => verdict.integrity = false,
            }
        }
        if by.len() != correct.len() {
            verdict.totality = false;
        }
    }
    for (k, m) in &sent {
        let ok = delivered_by_key
            .get(k)
            .is_some_and(|by| by.len() == correct.len() && by.values().all(|p| *p == *m));
        if !ok {
            verdict.validity = false;
        }
    }
    verdict
}
