// SPDX-License-Identifier: Apache-2.0

//! Domain types shared by every module: nodes, committees, transactions,
//! simulated signatures and the per-round committee configuration.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::digest::{sha256, Digest, Encoder};
use crate::error::{Error, Result};

/// Dense node index in `[0, n)`, stable across rounds.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u32> for NodeId {
    fn from(v: u32) -> Self {
        NodeId(v)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub id: NodeId,
    /// `false` once the adversary has designated the node for corruption.
    pub honest: bool,
    /// Computation units available per round.
    pub resource: f64,
    pub reputation: f64,
    /// Round at which a designated corruption takes effect.
    pub corrupted_at: Option<u64>,
}

impl Node {
    pub fn new(id: NodeId, resource: f64) -> Self {
        Node {
            id,
            honest: true,
            resource,
            reputation: 0.0,
            corrupted_at: None,
        }
    }

    /// Designates the node for corruption effective from `round`.
    pub fn corrupt_from(&mut self, round: u64) {
        self.honest = false;
        self.corrupted_at = Some(round);
    }

    /// Whether the node follows the protocol in `round`.
    pub fn is_honest_at(&self, round: u64) -> bool {
        match self.corrupted_at {
            Some(r) if !self.honest => round < r,
            _ => true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Committee {
    /// Sorted ascending.
    pub members: Vec<NodeId>,
    pub leader: NodeId,
    /// Sorted ascending; excludes the leader.
    pub partial_set: Vec<NodeId>,
}

impl Committee {
    pub fn contains(&self, id: NodeId) -> bool {
        self.members.binary_search(&id).is_ok()
    }

    pub fn in_partial_set(&self, id: NodeId) -> bool {
        self.partial_set.binary_search(&id).is_ok()
    }
}

/// One round's full assignment: referee committee, the `m` common committees,
/// their leaders and partial sets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CommitteeConfig {
    pub round: u64,
    /// Sorted ascending.
    pub referee: Vec<NodeId>,
    pub committees: Vec<Committee>,
}

impl CommitteeConfig {
    pub fn leaders(&self) -> Vec<NodeId> {
        self.committees.iter().map(|c| c.leader).collect()
    }

    /// Committee index of every node (`None` for referee members), indexed by
    /// node id.
    pub fn assignment(&self, n: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; n];
        for (k, c) in self.committees.iter().enumerate() {
            for id in &c.members {
                if let Some(slot) = out.get_mut(id.index()) {
                    *slot = Some(k);
                }
            }
        }
        out
    }

    pub fn is_referee(&self, id: NodeId) -> bool {
        self.referee.binary_search(&id).is_ok()
    }
}

/// Reference to output `output_index` of transaction `tx_id`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct InputRef {
    pub tx_id: Digest,
    pub output_index: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transaction {
    pub tx_id: Digest,
    pub inputs: Vec<InputRef>,
    /// Ground-truth validity read by honest verifiers.
    pub valid: bool,
}

impl Transaction {
    /// A transaction with `n_inputs` placeholder input references derived
    /// from its id.
    pub fn synthetic(tx_id: Digest, n_inputs: usize, valid: bool) -> Self {
        let inputs = (0..n_inputs)
            .map(|i| InputRef {
                tx_id: sha256(&Encoder::new().digest(&tx_id).u32(i as u32).finish()),
                output_index: 0,
            })
            .collect();
        Transaction { tx_id, inputs, valid }
    }

    pub fn n_inputs(&self) -> usize {
        self.inputs.len()
    }

    /// Verification cost in resource units: one per input.
    pub fn cost(&self) -> f64 {
        self.inputs.len() as f64
    }
}

/// Simulated signature. Only the signing registry can mint one that verifies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct SimSignature {
    pub signer: NodeId,
    pub message_digest: Digest,
}

/// Stand-in PKI: a roster of registered nodes plus the set of signatures
/// actually produced for them.
#[derive(Clone, Debug, Default)]
pub struct SignatureRegistry {
    roster: u32,
    issued: BTreeSet<SimSignature>,
}

impl SignatureRegistry {
    /// Registers nodes `0..n`.
    pub fn new(n: usize) -> Self {
        SignatureRegistry {
            roster: n as u32,
            issued: BTreeSet::new(),
        }
    }

    pub fn is_registered(&self, id: NodeId) -> bool {
        id.0 < self.roster
    }

    pub fn sign(&mut self, node: NodeId, message: &[u8]) -> Result<SimSignature> {
        if !self.is_registered(node) {
            return Err(Error::UnknownNode(node));
        }
        let sig = SimSignature {
            signer: node,
            message_digest: sha256(message),
        };
        self.issued.insert(sig);
        Ok(sig)
    }

    pub fn verify(&self, sig: &SimSignature, node: NodeId, message: &[u8]) -> bool {
        sig.signer == node && sig.message_digest == sha256(message) && self.issued.contains(sig)
    }

    /// Forgets issued signatures; the roster is kept.
    pub fn clear(&mut self) {
        self.issued.clear();
    }
}

/// Global protocol parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemParams {
    pub n: usize,
    pub m: usize,
    pub c: usize,
    pub lambda: usize,
    pub f: f64,
    pub alpha: f64,
    /// Corruption delay in rounds.
    pub d: u32,
    pub sigma: f64,
    pub omega: f64,
    pub p_l: f64,
    pub p_m: f64,
}

impl SystemParams {
    /// 20 committees of 100 plus a 100-member referee committee, with the
    /// scoring and budget constants of the reference simulation.
    pub fn reference_simulation() -> Self {
        SystemParams {
            n: 2100,
            m: 20,
            c: 100,
            lambda: 40,
            f: 0.0,
            alpha: 0.5,
            d: 1,
            sigma: 0.1,
            omega: 0.5,
            p_l: 0.7,
            p_m: 0.9,
        }
    }

    /// Smallest consistent parameter set with the given shape; scoring
    /// constants match [`SystemParams::reference_simulation`].
    pub fn with_shape(m: usize, c: usize, lambda: usize) -> Self {
        SystemParams {
            n: (m + 1) * c,
            m,
            c,
            lambda,
            ..Self::reference_simulation()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::param("m", "must be positive"));
        }
        if self.c == 0 {
            return Err(Error::param("c", "must be positive"));
        }
        if self.lambda == 0 {
            return Err(Error::param("lambda", "must be positive"));
        }
        if self.n != (self.m + 1) * self.c {
            return Err(Error::param("n", "must equal (m + 1) * c"));
        }
        if self.lambda >= self.c {
            return Err(Error::param("lambda", "must be smaller than c"));
        }
        if !(0.0..1.0).contains(&self.f) {
            return Err(Error::param("f", "must lie in [0, 1)"));
        }
        if !(self.alpha >= 0.0 && self.alpha <= 1.0) {
            return Err(Error::param("alpha", "must lie in [0, 1]"));
        }
        if self.d == 0 {
            return Err(Error::param("d", "must be at least 1"));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::param("sigma", "must be positive"));
        }
        if !(self.omega > 0.0) {
            return Err(Error::param("omega", "must be positive"));
        }
        if !(self.p_l > 0.0 && self.p_l <= 1.0) {
            return Err(Error::param("p_l", "must lie in (0, 1]"));
        }
        if !(self.p_m > 0.0 && self.p_m <= 1.0) {
            return Err(Error::param("p_m", "must lie in (0, 1]"));
        }
        if self.p_l >= self.p_m {
            return Err(Error::param("p_l", "must be smaller than p_m"));
        }
        Ok(())
    }
}

/// A broken structural invariant of a [`CommitteeConfig`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    ParamsInconsistent(String),
    CommitteeCount {
        expected: usize,
        actual: usize,
    },
    CommitteeSize {
        committee: Option<usize>,
        expected: usize,
        actual: usize,
    },
    UnsortedMembers {
        committee: Option<usize>,
    },
    DuplicateMembership {
        node: NodeId,
    },
    UnknownNode {
        node: NodeId,
    },
    MissingNode {
        node: NodeId,
    },
    LeaderNotMember {
        committee: usize,
        leader: NodeId,
    },
    PartialSetSize {
        committee: usize,
        expected: usize,
        actual: usize,
    },
    PartialSetContainsLeader {
        committee: usize,
    },
    PartialSetNotMember {
        committee: usize,
        node: NodeId,
    },
}

fn committee_name(k: &Option<usize>) -> String {
    match k {
        Some(k) => alloc::format!("committee {k}"),
        None => "referee committee".to_string(),
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ParamsInconsistent(why) => write!(f, "parameters: {why}"),
            Violation::CommitteeCount { expected, actual } => {
                write!(f, "committee count: expected {expected}, found {actual}")
            }
            Violation::CommitteeSize {
                committee,
                expected,
                actual,
            } => write!(
                f,
                "committee size: {} has {actual} members, expected {expected}",
                committee_name(committee)
            ),
            Violation::UnsortedMembers { committee } => {
                write!(f, "member list not sorted: {}", committee_name(committee))
            }
            Violation::DuplicateMembership { node } => {
                write!(f, "duplicate membership: node {node} appears more than once")
            }
            Violation::UnknownNode { node } => write!(f, "unknown node: {node} is outside [0, n)"),
            Violation::MissingNode { node } => write!(f, "missing node: {node} is in no committee"),
            Violation::LeaderNotMember { committee, leader } => {
                write!(f, "leader: {leader} is not a member of committee {committee}")
            }
            Violation::PartialSetSize {
                committee,
                expected,
                actual,
            } => write!(
                f,
                "partial set size: committee {committee} has {actual}, expected {expected}"
            ),
            Violation::PartialSetContainsLeader { committee } => {
                write!(f, "partial set: committee {committee} includes its leader")
            }
            Violation::PartialSetNotMember { committee, node } => {
                write!(f, "partial set: node {node} is not a member of committee {committee}")
            }
        }
    }
}

/// Checks every structural invariant of `config` against `params`. Returns
/// an empty list iff the configuration is well formed.
pub fn validate_config(config: &CommitteeConfig, params: &SystemParams) -> Vec<Violation> {
    let mut out = Vec::new();
    if params.n != (params.m + 1) * params.c {
        out.push(Violation::ParamsInconsistent(alloc::format!(
            "n = {} but (m + 1) * c = {}",
            params.n,
            (params.m + 1) * params.c
        )));
    }
    if config.committees.len() != params.m {
        out.push(Violation::CommitteeCount {
            expected: params.m,
            actual: config.committees.len(),
        });
    }

    let mut seen = vec![false; params.n];
    let mut groups: Vec<(Option<usize>, &[NodeId])> = vec![(None, &config.referee)];
    groups.extend(
        config
            .committees
            .iter()
            .enumerate()
            .map(|(k, c)| (Some(k), c.members.as_slice())),
    );
    for (k, members) in groups {
        if members.len() != params.c {
            out.push(Violation::CommitteeSize {
                committee: k,
                expected: params.c,
                actual: members.len(),
            });
        }
        if members.windows(2).any(|w| w[0] > w[1]) {
            out.push(Violation::UnsortedMembers { committee: k });
        }
        for &id in members {
            match seen.get_mut(id.index()) {
                None => out.push(Violation::UnknownNode { node: id }),
                Some(s) if *s => out.push(Violation::DuplicateMembership { node: id }),
                Some(s) => *s = true,
            }
        }
    }
    for (i, s) in seen.iter().enumerate() {
        if !s {
            out.push(Violation::MissingNode { node: NodeId(i as u32) });
        }
    }

    for (k, c) in config.committees.iter().enumerate() {
        if !c.contains(c.leader) {
            out.push(Violation::LeaderNotMember {
                committee: k,
                leader: c.leader,
            });
        }
        if c.partial_set.len() != params.lambda {
            out.push(Violation::PartialSetSize {
                committee: k,
                expected: params.lambda,
                actual: c.partial_set.len(),
            });
        }
        if c.in_partial_set(c.leader) {
            out.push(Violation::PartialSetContainsLeader { committee: k });
        }
        for &p in &c.partial_set {
            if !c.contains(p) {
                out.push(Violation::PartialSetNotMember { committee: k, node: p });
            }
        }
    }
    out
}
