// SPDX-License-Identifier: Apache-2.0

//! One committee's round: proposal, voting, the consensus oracle, the
//! semi-commitment exchange with the referee committee, witnesses and
//! leader eviction.
//!
//! Byzantine agreement is modelled as an oracle that succeeds iff strictly
//! more than half of the participants are honest. Behaviour flags only take
//! effect for nodes that are corrupt in the current round.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::digest::{sha256, Decoder, Digest, Encoder};
use crate::error::{Error, Result};
use crate::model::{
    Committee, CommitteeConfig, Node, NodeId, SignatureRegistry, SimSignature, SystemParams, Transaction,
};
use crate::reputation::{majority_decide, punish_leader, score_member, DecisionVector, ScoreList, Vote, VoteVector};

const TAG_MEMBER_LIST: u8 = 1;
const TAG_TXLIST: u8 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    Configuration,
    SemiCommitment,
    Voting,
    Recovery,
}

impl Phase {
    pub const ALL: [Phase; 4] = [
        Phase::Configuration,
        Phase::SemiCommitment,
        Phase::Voting,
        Phase::Recovery,
    ];

    fn slot(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counter {
    pub sent: u64,
    pub received: u64,
    pub bytes_stored: u64,
}

impl Counter {
    fn add(&mut self, other: &Counter) {
        self.sent += other.sent;
        self.received += other.received;
        self.bytes_stored += other.bytes_stored;
    }
}

/// Per-node, per-phase message accounting. Sparse: untouched nodes read as
/// zero.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MessageCounters {
    per_node: BTreeMap<NodeId, [Counter; 4]>,
}

impl MessageCounters {
    pub fn new() -> Self {
        Self::default()
    }

    fn entry(&mut self, id: NodeId, phase: Phase) -> &mut Counter {
        &mut self.per_node.entry(id).or_default()[phase.slot()]
    }

    pub fn record_sent(&mut self, id: NodeId, phase: Phase, count: u64) {
        self.entry(id, phase).sent += count;
    }

    pub fn record_received(&mut self, id: NodeId, phase: Phase, count: u64, bytes: u64) {
        let e = self.entry(id, phase);
        e.received += count;
        e.bytes_stored += bytes;
    }

    /// One message from `from` to each of `to`.
    pub fn broadcast(&mut self, from: NodeId, to: &[NodeId], phase: Phase, bytes: u64) {
        self.record_sent(from, phase, to.len() as u64);
        for &id in to {
            self.record_received(id, phase, 1, bytes);
        }
    }

    pub fn get(&self, id: NodeId, phase: Phase) -> Counter {
        self.per_node.get(&id).map(|c| c[phase.slot()]).unwrap_or_default()
    }

    /// Sent plus received in `phase`.
    pub fn phase_messages(&self, id: NodeId, phase: Phase) -> u64 {
        let c = self.get(id, phase);
        c.sent + c.received
    }

    /// Sent plus received over all phases.
    pub fn total_messages(&self, id: NodeId) -> u64 {
        Phase::ALL.iter().map(|&p| self.phase_messages(id, p)).sum()
    }

    pub fn merge(&mut self, other: &MessageCounters) {
        for (id, counters) in &other.per_node {
            let mine = self.per_node.entry(*id).or_default();
            for (a, b) in mine.iter_mut().zip(counters.iter()) {
                a.add(b);
            }
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.per_node.keys().copied()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LeaderBehavior {
    #[default]
    Honest,
    /// Registers the digest of a forged member list with the referee while
    /// showing the true list to its partial set.
    ForgeMemberList,
    /// Sends the referee a digest that does not match the attached list.
    InconsistentDigest,
    /// Slips a fabricated invalid transaction into its proposal.
    ProposeInvalidTx,
    EmptyProposal,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MemberBehavior {
    #[default]
    Honest,
    /// Votes against the ground truth on every transaction.
    InvertVotes,
    AllUnknown,
}

/// Misbehaviour flags, consulted only for nodes corrupt in the current round.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Behaviors {
    pub leaders: BTreeMap<NodeId, LeaderBehavior>,
    pub members: BTreeMap<NodeId, MemberBehavior>,
}

impl Behaviors {
    pub fn leader(&self, id: NodeId) -> LeaderBehavior {
        self.leaders.get(&id).copied().unwrap_or_default()
    }

    pub fn member(&self, id: NodeId) -> MemberBehavior {
        self.members.get(&id).copied().unwrap_or_default()
    }
}

/// Read-only view of the round shared by all committees.
#[derive(Clone, Copy, Debug)]
pub struct RoundContext<'a> {
    pub nodes: &'a [Node],
    pub params: &'a SystemParams,
    pub round: u64,
    pub behaviors: &'a Behaviors,
}

impl RoundContext<'_> {
    pub fn is_honest(&self, id: NodeId) -> bool {
        self.nodes.get(id.index()).is_some_and(|n| n.is_honest_at(self.round))
    }

    fn leader_behavior(&self, id: NodeId) -> LeaderBehavior {
        if self.is_honest(id) {
            LeaderBehavior::Honest
        } else {
            self.behaviors.leader(id)
        }
    }

    fn member_behavior(&self, id: NodeId) -> MemberBehavior {
        if self.is_honest(id) {
            MemberBehavior::Honest
        } else {
            self.behaviors.member(id)
        }
    }

    fn reputation(&self, id: NodeId) -> f64 {
        self.nodes.get(id.index()).map_or(0.0, |n| n.reputation)
    }
}

/// A leader's proposal for one round.
/// Round, proposer and `(tx_id, n_inputs, valid)` entries of an encoded
/// [`TxList`].
pub type DecodedTxList = (u64, NodeId, Vec<(Digest, u32, bool)>);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TxList {
    pub proposer: NodeId,
    pub round: u64,
    pub txs: Vec<Transaction>,
}

impl TxList {
    /// Signed byte form. Each entry carries the transaction content that
    /// determines its validity.
    pub fn encode(&self) -> Vec<u8> {
        let mut enc = Encoder::new()
            .u8(TAG_TXLIST)
            .u64(self.round)
            .u32(self.proposer.0)
            .u32(self.txs.len() as u32);
        for tx in &self.txs {
            enc = enc.digest(&tx.tx_id).u32(tx.n_inputs() as u32).u8(u8::from(tx.valid));
        }
        enc.finish()
    }

    /// Parses the `(tx_id, n_inputs, valid)` entries of an encoded list.
    pub fn decode_entries(bytes: &[u8]) -> Result<DecodedTxList> {
        let mut dec = Decoder::new(bytes);
        if dec.u8()? != TAG_TXLIST {
            return Err(Error::Malformed("not a transaction list"));
        }
        let round = dec.u64()?;
        let proposer = NodeId(dec.u32()?);
        let count = dec.u32()?;
        let mut entries = Vec::new();
        for _ in 0..count {
            let id = dec.digest()?;
            let inputs = dec.u32()?;
            let valid = match dec.u8()? {
                0 => false,
                1 => true,
                _ => return Err(Error::Malformed("validity flag")),
            };
            entries.push((id, inputs, valid));
        }
        dec.finish()?;
        Ok((round, proposer, entries))
    }

    pub fn total_cost(&self) -> f64 {
        self.txs.iter().map(Transaction::cost).sum()
    }
}

/// Every member's vote over the current `TxList`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VList {
    pub votes: BTreeMap<NodeId, VoteVector>,
}

/// Result of an honest leader's proposal step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Proposal {
    pub txlist: TxList,
    /// Invalid transactions the leader verified and left out.
    pub rejected: Vec<Digest>,
}

/// Greedy prefix of `pending` whose cumulative cost stays within
/// `p_l * leader.resource`. The leader verifies what it reads and leaves
/// invalid transactions out of the list.
pub fn propose_txlist(leader: &Node, pending: &[Transaction], p_l: f64, round: u64) -> Proposal {
    let budget = p_l * leader.resource;
    let mut spent = 0.0;
    let mut txs = Vec::new();
    let mut rejected = Vec::new();
    for tx in pending {
        if spent + tx.cost() > budget {
            break;
        }
        spent += tx.cost();
        if tx.valid {
            txs.push(tx.clone());
        } else {
            rejected.push(tx.tx_id);
        }
    }
    Proposal {
        txlist: TxList {
            proposer: leader.id,
            round,
            txs,
        },
        rejected,
    }
}

/// Honest vote: verifies transactions in order while the cumulative cost
/// fits in `p * resource`, `Unknown` from the first one that does not fit.
pub fn cast_vote(member: &Node, txlist: &TxList, p: f64) -> VoteVector {
    let budget = p * member.resource;
    let mut spent = 0.0;
    let mut exhausted = false;
    let votes = txlist
        .txs
        .iter()
        .map(|tx| {
            if !exhausted && spent + tx.cost() <= budget {
                spent += tx.cost();
                if tx.valid {
                    Vote::Yes
                } else {
                    Vote::No
                }
            } else {
                exhausted = true;
                Vote::Unknown
            }
        })
        .collect();
    VoteVector(votes)
}

fn malicious_vote(behavior: MemberBehavior, honest: VoteVector, txlist: &TxList) -> VoteVector {
    match behavior {
        MemberBehavior::Honest => honest,
        MemberBehavior::AllUnknown => VoteVector::unknown(txlist.txs.len()),
        MemberBehavior::InvertVotes => VoteVector(
            txlist
                .txs
                .iter()
                .map(|tx| if tx.valid { Vote::No } else { Vote::Yes })
                .collect(),
        ),
    }
}

/// Agreement oracle: succeeds iff strictly more than half of `participants`
/// are honest. Every participant sends and receives `|participants|`
/// messages.
pub fn intra_committee_consensus<T>(
    ctx: &RoundContext<'_>,
    participants: &[NodeId],
    payload: T,
    phase: Phase,
    counters: &mut MessageCounters,
) -> Option<T> {
    let size = participants.len() as u64;
    for &id in participants {
        counters.record_sent(id, phase, size);
        counters.record_received(id, phase, size, 0);
    }
    let honest = participants.iter().filter(|&&id| ctx.is_honest(id)).count();
    (2 * honest > participants.len()).then_some(payload)
}

/// Digest of a member list: ids sorted ascending, each as 8 big-endian
/// bytes, concatenated.
pub fn compute_semi_commitment(members: &[NodeId]) -> Result<Digest> {
    if members.is_empty() {
        return Err(Error::Empty("member list"));
    }
    let mut sorted = members.to_vec();
    sorted.sort_unstable();
    let mut bytes = Vec::with_capacity(sorted.len() * 8);
    for id in sorted {
        bytes.extend_from_slice(&u64::from(id.0).to_be_bytes());
    }
    Ok(sha256(&bytes))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SemiCommitment {
    pub committee: usize,
    pub digest: Digest,
    pub members: Vec<NodeId>,
}

impl SemiCommitment {
    pub fn encode(&self) -> Vec<u8> {
        let mut enc = Encoder::new()
            .u8(TAG_MEMBER_LIST)
            .u64(self.committee as u64)
            .digest(&self.digest)
            .u32(self.members.len() as u32);
        for id in &self.members {
            enc = enc.u64(u64::from(id.0));
        }
        enc.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut dec = Decoder::new(bytes);
        if dec.u8()? != TAG_MEMBER_LIST {
            return Err(Error::Malformed("not a member list"));
        }
        let committee = dec.u64()? as usize;
        let digest = dec.digest()?;
        let count = dec.u32()?;
        let mut members = Vec::new();
        for _ in 0..count {
            let id = u32::try_from(dec.u64()?).map_err(|_| Error::Malformed("node id"))?;
            members.push(NodeId(id));
        }
        dec.finish()?;
        Ok(SemiCommitment {
            committee,
            digest,
            members,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignedMessage {
    pub payload: Vec<u8>,
    pub signature: SimSignature,
}

impl SignedMessage {
    pub fn sign(registry: &mut SignatureRegistry, signer: NodeId, payload: Vec<u8>) -> Result<Self> {
        let signature = registry.sign(signer, &payload)?;
        Ok(SignedMessage { payload, signature })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WitnessKind {
    SemiCommitmentMismatch,
    InvalidProposal,
}

/// Evidence against a leader: a message it signed and a reference message
/// that together show a protocol violation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Witness {
    pub kind: WitnessKind,
    pub committee: usize,
    pub accused: NodeId,
    pub m_l: SignedMessage,
    /// Registered or claimed digest for a mismatch; offending transaction id
    /// for an invalid proposal.
    pub m_0: Digest,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DismissReason {
    BadSignature,
    Malformed,
    NoViolation,
    CommitteeRejected,
    RefereeFailed,
}

/// Checks a witness: the leader's signature must verify and the pair must
/// show a violation. For a mismatch, `m_0` has to be a digest the leader
/// vouched for (the registered one or the one in its own message) and differ
/// from the digest of the list it signed.
pub fn verify_witness(
    witness: &Witness,
    registry: &SignatureRegistry,
    registered: Option<Digest>,
) -> core::result::Result<(), DismissReason> {
    if !registry.verify(&witness.m_l.signature, witness.accused, &witness.m_l.payload) {
        return Err(DismissReason::BadSignature);
    }
    match witness.kind {
        WitnessKind::SemiCommitmentMismatch => {
            let msg = SemiCommitment::decode(&witness.m_l.payload).map_err(|_| DismissReason::Malformed)?;
            if msg.committee != witness.committee {
                return Err(DismissReason::Malformed);
            }
            let vouched = registered == Some(witness.m_0) || msg.digest == witness.m_0;
            let actual = compute_semi_commitment(&msg.members).map_err(|_| DismissReason::Malformed)?;
            if vouched && actual != witness.m_0 {
                Ok(())
            } else {
                Err(DismissReason::NoViolation)
            }
        }
        WitnessKind::InvalidProposal => {
            let (_, proposer, entries) =
                TxList::decode_entries(&witness.m_l.payload).map_err(|_| DismissReason::Malformed)?;
            if proposer != witness.accused {
                return Err(DismissReason::Malformed);
            }
            if entries.iter().any(|(id, _, valid)| *id == witness.m_0 && !valid) {
                Ok(())
            } else {
                Err(DismissReason::NoViolation)
            }
        }
    }
}

/// Strict majority of a committee of size `c`.
pub fn approval_passes(approvals: usize, c: usize) -> bool {
    2 * approvals > c
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SemiCommitmentOutcome {
    Registered(Digest),
    LeaderAccused {
        witness: Witness,
        prosecutor: NodeId,
        registered: Option<Digest>,
    },
    /// The referee committee could not reach agreement.
    RefereeFailed,
}

fn forged_members(committee: &Committee, n: usize) -> Vec<NodeId> {
    let mut forged = committee.members.clone();
    let victim = committee
        .members
        .iter()
        .position(|&id| id != committee.leader && !committee.in_partial_set(id))
        .or_else(|| committee.members.iter().position(|&id| id != committee.leader));
    let outsider = (0..n as u32).map(NodeId).find(|id| !committee.contains(*id));
    if let (Some(pos), Some(out)) = (victim, outsider) {
        forged[pos] = out;
        forged.sort_unstable();
    }
    forged
}

/// Semi-commitment registration for committee `k` with its current leader.
pub fn commit_committee(
    ctx: &RoundContext<'_>,
    k: usize,
    committee: &Committee,
    referee: &[NodeId],
    registry: &mut SignatureRegistry,
    counters: &mut MessageCounters,
) -> Result<SemiCommitmentOutcome> {
    let leader = committee.leader;
    let behavior = ctx.leader_behavior(leader);
    let true_digest = compute_semi_commitment(&committee.members)?;
    let honest_msg = SemiCommitment {
        committee: k,
        digest: true_digest,
        members: committee.members.clone(),
    };
    let to_referee = match behavior {
        LeaderBehavior::ForgeMemberList => {
            let members = forged_members(committee, ctx.nodes.len());
            SemiCommitment {
                committee: k,
                digest: compute_semi_commitment(&members)?,
                members,
            }
        }
        LeaderBehavior::InconsistentDigest => SemiCommitment {
            digest: sha256(&Encoder::new().u64(ctx.round).u64(k as u64).finish()),
            ..honest_msg.clone()
        },
        _ => honest_msg.clone(),
    };
    let to_referee = SignedMessage::sign(registry, leader, to_referee.encode())?;
    let to_partial = SignedMessage::sign(registry, leader, honest_msg.encode())?;

    let bytes = to_referee.payload.len() as u64;
    counters.broadcast(leader, referee, Phase::SemiCommitment, bytes);
    counters.broadcast(leader, &committee.partial_set, Phase::SemiCommitment, bytes);

    // the referee checks registration and digest consistency, agrees, and
    // forwards the commitment to every leader and partial-set member
    let received = SemiCommitment::decode(&to_referee.payload)?;
    let consistent = compute_semi_commitment(&received.members)? == received.digest
        && received.members.iter().all(|&id| registry.is_registered(id));
    let Some(()) = intra_committee_consensus(ctx, referee, (), Phase::SemiCommitment, counters) else {
        return Ok(SemiCommitmentOutcome::RefereeFailed);
    };
    let prosecutor_ref = referee.iter().copied().find(|&id| ctx.is_honest(id));
    if !consistent {
        return Ok(SemiCommitmentOutcome::LeaderAccused {
            witness: Witness {
                kind: WitnessKind::SemiCommitmentMismatch,
                committee: k,
                accused: leader,
                m_l: to_referee,
                m_0: received.digest,
            },
            prosecutor: prosecutor_ref.unwrap_or(referee[0]),
            registered: None,
        });
    }
    let registered = received.digest;
    let forward = (ctx.params.m * (1 + ctx.params.lambda)) as u64;
    for &id in referee {
        counters.record_sent(id, Phase::SemiCommitment, forward);
    }
    counters.record_received(leader, Phase::SemiCommitment, referee.len() as u64, 32);
    for &id in &committee.partial_set {
        counters.record_received(id, Phase::SemiCommitment, referee.len() as u64, 32);
    }

    let shown = SemiCommitment::decode(&to_partial.payload)?;
    let mismatch = compute_semi_commitment(&shown.members)? != registered;
    let watcher = committee.partial_set.iter().copied().find(|&id| ctx.is_honest(id));
    match watcher {
        Some(prosecutor) if mismatch => Ok(SemiCommitmentOutcome::LeaderAccused {
            witness: Witness {
                kind: WitnessKind::SemiCommitmentMismatch,
                committee: k,
                accused: leader,
                m_l: to_partial,
                m_0: registered,
            },
            prosecutor,
            registered: Some(registered),
        }),
        _ => Ok(SemiCommitmentOutcome::Registered(registered)),
    }
}

/// Runs the exchange for every committee of `config`.
pub fn run_semi_commitment_exchange(
    ctx: &RoundContext<'_>,
    config: &CommitteeConfig,
    registry: &mut SignatureRegistry,
    counters: &mut MessageCounters,
) -> Result<Vec<SemiCommitmentOutcome>> {
    config
        .committees
        .iter()
        .enumerate()
        .map(|(k, c)| commit_committee(ctx, k, c, &config.referee, registry, counters))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Eviction {
    pub committee: usize,
    pub leader: NodeId,
    pub kind: WitnessKind,
    /// Reputation after punishment, before this round's scores.
    pub punished_reputation: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Accusation {
    Evicted { eviction: Eviction, committee: Committee },
    Dismissed(DismissReason),
}

/// Prosecutes `witness`: the committee votes on it, a strict majority
/// forwards it to the referee, which re-verifies it and agrees. On success
/// the leader is evicted and replaced by the highest-reputation member not in
/// `excluded` (ties to the smaller id); a partial set that contained the new
/// leader gets a uniform replacement.
#[allow(clippy::too_many_arguments)]
pub fn accuse_and_reselect<R: Rng + ?Sized>(
    ctx: &RoundContext<'_>,
    committee: &Committee,
    witness: &Witness,
    prosecutor: NodeId,
    referee: &[NodeId],
    registry: &SignatureRegistry,
    registered: Option<Digest>,
    excluded: &BTreeSet<NodeId>,
    counters: &mut MessageCounters,
    rng: &mut R,
) -> Accusation {
    let bytes = witness.m_l.payload.len() as u64 + 32;
    let others: Vec<NodeId> = committee
        .members
        .iter()
        .copied()
        .filter(|&id| id != prosecutor)
        .collect();
    counters.broadcast(prosecutor, &others, Phase::Recovery, bytes);

    let validity = verify_witness(witness, registry, registered);
    let approvals = committee
        .members
        .iter()
        .filter(|&&id| ctx.is_honest(id) == validity.is_ok())
        .count();
    let c = committee.members.len() as u64;
    for &id in &committee.members {
        counters.record_sent(id, Phase::Recovery, c);
        counters.record_received(id, Phase::Recovery, c, 0);
    }
    if !approval_passes(approvals, committee.members.len()) {
        return Accusation::Dismissed(DismissReason::CommitteeRejected);
    }
    counters.broadcast(prosecutor, referee, Phase::Recovery, bytes);
    if intra_committee_consensus(ctx, referee, (), Phase::Recovery, counters).is_none() {
        return Accusation::Dismissed(DismissReason::RefereeFailed);
    }
    if let Err(reason) = validity {
        return Accusation::Dismissed(reason);
    }

    let old = committee.leader;
    let new_leader = committee
        .members
        .iter()
        .copied()
        .filter(|&id| id != old && !excluded.contains(&id))
        .max_by(|&a, &b| ctx.reputation(a).total_cmp(&ctx.reputation(b)).then(b.cmp(&a)));
    let Some(new_leader) = new_leader else {
        return Accusation::Dismissed(DismissReason::CommitteeRejected);
    };
    let mut next = committee.clone();
    next.leader = new_leader;
    if let Ok(pos) = next.partial_set.binary_search(&new_leader) {
        next.partial_set.remove(pos);
        let candidates: Vec<NodeId> = next
            .members
            .iter()
            .copied()
            .filter(|&id| id != new_leader && !next.in_partial_set(id))
            .collect();
        if let Some(&pick) = candidates.choose(rng) {
            next.partial_set.push(pick);
            next.partial_set.sort_unstable();
        }
    }
    for &id in referee {
        counters.record_sent(id, Phase::Recovery, c);
    }
    for &id in &committee.members {
        counters.record_received(id, Phase::Recovery, referee.len() as u64, 0);
    }
    Accusation::Evicted {
        eviction: Eviction {
            committee: witness.committee,
            leader: old,
            kind: witness.kind,
            punished_reputation: punish_leader(ctx.reputation(old)),
        },
        committee: next,
    }
}

/// Pending accusation carried into the committee round.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PendingWitness {
    pub witness: Witness,
    pub prosecutor: NodeId,
    pub registered: Option<Digest>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CommitteeRoundOutcome {
    pub index: usize,
    /// Final committee, possibly re-led.
    pub committee: Committee,
    pub registered: Option<Digest>,
    pub txlist: TxList,
    pub vlist: VList,
    pub decision: DecisionVector,
    /// Agreed `TXdecSET`, as transaction ids in list order.
    pub accepted: Vec<Digest>,
    pub agreed: bool,
    pub scores: ScoreList,
    pub evictions: Vec<Eviction>,
    pub dismissals: Vec<DismissReason>,
    /// Invalid transactions that were read and must leave the queue.
    pub discarded: Vec<Digest>,
    pub counters: MessageCounters,
}

fn fabricated_invalid(round: u64, leader: NodeId) -> Transaction {
    let id = sha256(&Encoder::new().u64(round).u32(leader.0).u8(0xff).finish());
    Transaction::synthetic(id, 1, false)
}

/// Semi-commitment outcome reduced to what the committee round consumes.
pub fn pending_from_outcome(outcome: &SemiCommitmentOutcome) -> (Option<Digest>, Option<PendingWitness>) {
    match outcome {
        SemiCommitmentOutcome::Registered(d) => (Some(*d), None),
        SemiCommitmentOutcome::LeaderAccused {
            witness,
            prosecutor,
            registered,
        } => (
            *registered,
            Some(PendingWitness {
                witness: witness.clone(),
                prosecutor: *prosecutor,
                registered: *registered,
            }),
        ),
        SemiCommitmentOutcome::RefereeFailed => (None, None),
    }
}

/// Everything committee `index` does in one round after the initial
/// semi-commitment exchange: prosecuting any witness, proposal, audit by the
/// partial set, voting, majority decision, agreement and scoring. After an
/// eviction the new leader re-registers and re-proposes; at most `c` leaders
/// are tried.
#[allow(clippy::too_many_arguments)]
pub fn run_committee_round<R: Rng + ?Sized>(
    ctx: &RoundContext<'_>,
    index: usize,
    committee: &Committee,
    referee: &[NodeId],
    registered: Option<Digest>,
    pending_witness: Option<PendingWitness>,
    pending: &[Transaction],
    registry: &mut SignatureRegistry,
    rng: &mut R,
) -> Result<CommitteeRoundOutcome> {
    let params = ctx.params;
    let mut counters = MessageCounters::new();
    let mut committee = committee.clone();
    let mut registered = registered;
    let mut witness = pending_witness;
    let mut evictions = Vec::new();
    let mut dismissals = Vec::new();
    let mut excluded = BTreeSet::new();
    let c = committee.members.len();

    for _ in 0..c.max(1) {
        if let Some(pw) = witness.take() {
            let outcome = accuse_and_reselect(
                ctx,
                &committee,
                &pw.witness,
                pw.prosecutor,
                referee,
                registry,
                pw.registered,
                &excluded,
                &mut counters,
                rng,
            );
            match outcome {
                Accusation::Evicted {
                    eviction,
                    committee: next,
                } => {
                    excluded.insert(eviction.leader);
                    evictions.push(eviction);
                    committee = next;
                    let redo = commit_committee(ctx, index, &committee, referee, registry, &mut counters)?;
                    let (reg, w) = pending_from_outcome(&redo);
                    registered = reg;
                    if w.is_some() {
                        witness = w;
                        continue;
                    }
                }
                Accusation::Dismissed(reason) => dismissals.push(reason),
            }
        }

        let leader = committee.leader;
        let leader_node = &ctx.nodes[leader.index()];
        let behavior = ctx.leader_behavior(leader);
        let Proposal { mut txlist, rejected } = propose_txlist(leader_node, pending, params.p_l, ctx.round);
        match behavior {
            LeaderBehavior::ProposeInvalidTx => txlist.txs.insert(0, fabricated_invalid(ctx.round, leader)),
            LeaderBehavior::EmptyProposal => txlist.txs.clear(),
            _ => {}
        }
        let signed = SignedMessage::sign(registry, leader, txlist.encode())?;
        let others: Vec<NodeId> = committee.members.iter().copied().filter(|&id| id != leader).collect();
        counters.broadcast(leader, &others, Phase::Voting, signed.payload.len() as u64);

        // honest partial-set members audit the whole signed list
        let offending = txlist.txs.iter().find(|tx| !tx.valid).map(|tx| tx.tx_id);
        let auditor = committee.partial_set.iter().copied().find(|&id| ctx.is_honest(id));
        if let (Some(tx_id), Some(prosecutor)) = (offending, auditor) {
            witness = Some(PendingWitness {
                witness: Witness {
                    kind: WitnessKind::InvalidProposal,
                    committee: index,
                    accused: leader,
                    m_l: signed,
                    m_0: tx_id,
                },
                prosecutor,
                registered,
            });
            continue;
        }

        let mut vlist = VList::default();
        for &id in &committee.members {
            let node = &ctx.nodes[id.index()];
            let p = if id == leader { params.p_l } else { params.p_m };
            let honest = cast_vote(node, &txlist, p);
            let vote = if id == leader && behavior == LeaderBehavior::ProposeInvalidTx {
                VoteVector(alloc::vec![Vote::Yes; txlist.txs.len()])
            } else {
                malicious_vote(ctx.member_behavior(id), honest, &txlist)
            };
            if id != leader {
                counters.broadcast(id, &[leader], Phase::Voting, 0);
            }
            vlist.votes.insert(id, vote);
        }
        let collected: Vec<(NodeId, VoteVector)> = vlist.votes.iter().map(|(id, v)| (*id, v.clone())).collect();
        let (decision, set) = majority_decide(&collected, c)?;
        let agreed = intra_committee_consensus(ctx, &committee.members, (), Phase::Voting, &mut counters).is_some();

        let mut scores = ScoreList::default();
        let mut accepted = Vec::new();
        if agreed {
            accepted = set.iter().map(|&i| txlist.txs[i].tx_id).collect();
            if !decision.is_empty() {
                for (id, vote) in &vlist.votes {
                    let s = score_member(vote, &decision, *id == leader, params.sigma, params.omega)?;
                    scores.scores.insert(*id, s);
                }
            }
        }
        let mut discarded = rejected;
        if agreed {
            discarded.extend(
                txlist
                    .txs
                    .iter()
                    .enumerate()
                    .filter(|(i, tx)| !tx.valid && !decision.is_accepted(*i))
                    .map(|(_, tx)| tx.tx_id),
            );
        }
        return Ok(CommitteeRoundOutcome {
            index,
            committee,
            registered,
            txlist,
            vlist,
            decision,
            accepted,
            agreed,
            scores,
            evictions,
            dismissals,
            discarded,
            counters,
        });
    }
    Err(Error::InsufficientNodes {
        needed: evictions.len() + 1,
        available: c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::digest::Digest;
    use crate::reshuffle::bootstrap;
    use crate::rng::rng_from_seed;
    use alloc::vec;

    fn tx(i: u64, inputs: usize, valid: bool) -> Transaction {
        Transaction::synthetic(Digest::from_u64(i), inputs, valid)
    }

    fn node(id: u32, resource: f64) -> Node {
        Node::new(NodeId(id), resource)
    }

    #[test]
    fn proposal_respects_budget() {
        let pending = vec![tx(1, 3, true), tx(2, 3, true), tx(3, 3, true)];
        let p = propose_txlist(&node(0, 10.0), &pending, 0.7, 0);
        assert_eq!(p.txlist.txs.len(), 2);
        assert!(p.txlist.total_cost() <= 7.0);
        assert!(propose_txlist(&node(0, 10.0), &[], 0.7, 0).txlist.txs.is_empty());
        assert_eq!(propose_txlist(&node(0, 1e9), &pending, 0.7, 0).txlist.txs.len(), 3);
    }

    #[test]
    fn proposal_leaves_out_invalid() {
        let pending = vec![tx(1, 1, true), tx(2, 1, false), tx(3, 1, true)];
        let p = propose_txlist(&node(0, 10.0), &pending, 0.7, 0);
        assert_eq!(p.txlist.txs.len(), 2);
        assert_eq!(p.rejected, vec![Digest::from_u64(2)]);
    }

    #[test]
    fn votes_follow_budget() {
        let list = |txs| TxList {
            proposer: NodeId(0),
            round: 0,
            txs,
        };
        let all_valid = list(vec![tx(1, 3, true), tx(2, 3, true), tx(3, 3, true), tx(4, 3, true)]);
        assert_eq!(
            cast_vote(&node(1, 10.0), &all_valid, 0.9).0,
            vec![Vote::Yes, Vote::Yes, Vote::Yes, Vote::Unknown]
        );
        let second_bad = list(vec![tx(1, 1, true), tx(2, 1, false)]);
        assert_eq!(cast_vote(&node(1, 10.0), &second_bad, 0.9).0[1], Vote::No);
        let poor = list(vec![tx(1, 1, true), tx(2, 1, true)]);
        assert!(cast_vote(&node(1, 0.5), &poor, 0.9).is_all_unknown());
    }

    #[test]
    fn unknown_stays_after_first_overflow() {
        let list = TxList {
            proposer: NodeId(0),
            round: 0,
            txs: vec![tx(1, 5, true), tx(2, 1, true)],
        };
        assert_eq!(
            cast_vote(&node(1, 4.0), &list, 1.0).0,
            vec![Vote::Unknown, Vote::Unknown]
        );
    }

    #[test]
    fn semi_commitment_is_canonical() {
        let a = compute_semi_commitment(&[NodeId(3), NodeId(1), NodeId(2)]).unwrap();
        let b = compute_semi_commitment(&[NodeId(1), NodeId(2), NodeId(3)]).unwrap();
        let c = compute_semi_commitment(&[NodeId(1), NodeId(2), NodeId(4)]).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let mut bytes = Vec::new();
        for i in [1u64, 2, 3] {
            bytes.extend_from_slice(&i.to_be_bytes());
        }
        assert_eq!(a, sha256(&bytes));
        assert!(compute_semi_commitment(&[]).is_err());
    }

    #[test]
    fn encodings_round_trip() {
        let sc = SemiCommitment {
            committee: 4,
            digest: Digest::from_u64(9),
            members: vec![NodeId(1), NodeId(7)],
        };
        assert_eq!(SemiCommitment::decode(&sc.encode()).unwrap(), sc);
        let list = TxList {
            proposer: NodeId(5),
            round: 2,
            txs: vec![tx(1, 2, true), tx(2, 1, false)],
        };
        let (round, proposer, entries) = TxList::decode_entries(&list.encode()).unwrap();
        assert_eq!((round, proposer), (2, NodeId(5)));
        assert_eq!(entries[1], (Digest::from_u64(2), 1, false));
    }

    #[test]
    fn consensus_needs_strict_honest_majority() {
        let params = SystemParams::with_shape(1, 10, 2);
        let mut nodes: Vec<Node> = (0..20).map(|i| node(i, 1.0)).collect();
        for n in nodes.iter_mut().take(3) {
            n.corrupt_from(0);
        }
        let behaviors = Behaviors::default();
        let ctx = RoundContext {
            nodes: &nodes,
            params: &params,
            round: 0,
            behaviors: &behaviors,
        };
        let ids: Vec<NodeId> = (0..10).map(NodeId).collect();
        let mut counters = MessageCounters::new();
        assert_eq!(
            intra_committee_consensus(&ctx, &ids, b"payload".to_vec(), Phase::Voting, &mut counters),
            Some(b"payload".to_vec())
        );
        assert_eq!(counters.get(NodeId(4), Phase::Voting).sent, 10);
        for n in nodes.iter_mut().take(5) {
            n.corrupt_from(0);
        }
        let ctx = RoundContext {
            nodes: &nodes,
            params: &params,
            round: 0,
            behaviors: &behaviors,
        };
        assert_eq!(
            intra_committee_consensus(&ctx, &ids, (), Phase::Voting, &mut counters),
            None
        );
    }

    #[test]
    fn approval_is_strict() {
        assert!(!approval_passes(50, 100));
        assert!(approval_passes(51, 100));
    }

    struct World {
        nodes: Vec<Node>,
        params: SystemParams,
        config: CommitteeConfig,
        registry: SignatureRegistry,
    }

    fn world(seed: u64) -> World {
        let params = SystemParams::with_shape(3, 10, 3);
        let nodes: Vec<Node> = (0..params.n as u32)
            .map(|i| {
                let mut n = node(i, 10.0);
                n.reputation = f64::from(i % 7);
                n
            })
            .collect();
        let config = bootstrap(&nodes, &params, &mut rng_from_seed(seed)).unwrap();
        let registry = SignatureRegistry::new(params.n);
        World {
            nodes,
            params,
            config,
            registry,
        }
    }

    #[test]
    fn honest_exchange_registers_everything() {
        let mut w = world(1);
        let behaviors = Behaviors::default();
        let ctx = RoundContext {
            nodes: &w.nodes,
            params: &w.params,
            round: 0,
            behaviors: &behaviors,
        };
        let mut counters = MessageCounters::new();
        let out = run_semi_commitment_exchange(&ctx, &w.config, &mut w.registry, &mut counters).unwrap();
        for (k, o) in out.iter().enumerate() {
            let expected = compute_semi_commitment(&w.config.committees[k].members).unwrap();
            assert_eq!(*o, SemiCommitmentOutcome::Registered(expected));
        }
    }

    #[test]
    fn forged_list_is_caught_and_leader_evicted() {
        let mut w = world(2);
        let leader = w.config.committees[0].leader;
        w.nodes[leader.index()].corrupt_from(0);
        let mut behaviors = Behaviors::default();
        behaviors.leaders.insert(leader, LeaderBehavior::ForgeMemberList);
        let ctx = RoundContext {
            nodes: &w.nodes,
            params: &w.params,
            round: 0,
            behaviors: &behaviors,
        };
        let mut counters = MessageCounters::new();
        let out = run_semi_commitment_exchange(&ctx, &w.config, &mut w.registry, &mut counters).unwrap();
        let SemiCommitmentOutcome::LeaderAccused {
            witness,
            prosecutor,
            registered,
        } = &out[0]
        else {
            panic!("expected an accusation, got {:?}", out[0]);
        };
        assert_eq!(verify_witness(witness, &w.registry, *registered), Ok(()));
        let pending: Vec<Transaction> = (0..5).map(|i| tx(i, 1, true)).collect();
        let round = run_committee_round(
            &ctx,
            0,
            &w.config.committees[0],
            &w.config.referee,
            *registered,
            Some(PendingWitness {
                witness: witness.clone(),
                prosecutor: *prosecutor,
                registered: *registered,
            }),
            &pending,
            &mut w.registry,
            &mut rng_from_seed(3),
        )
        .unwrap();
        assert_eq!(round.evictions.len(), 1);
        assert_eq!(round.evictions[0].leader, leader);
        assert_ne!(round.committee.leader, leader);
        assert!(round.committee.contains(round.committee.leader));
        assert!(!round.committee.in_partial_set(round.committee.leader));
        assert_eq!(round.accepted.len(), 5);
        assert_eq!(
            round.registered,
            Some(compute_semi_commitment(&round.committee.members).unwrap())
        );
    }

    #[test]
    fn forged_list_undetected_without_honest_watcher() {
        let mut w = world(4);
        let committee = w.config.committees[1].clone();
        w.nodes[committee.leader.index()].corrupt_from(0);
        for id in &committee.partial_set {
            w.nodes[id.index()].corrupt_from(0);
        }
        let mut behaviors = Behaviors::default();
        behaviors
            .leaders
            .insert(committee.leader, LeaderBehavior::ForgeMemberList);
        let ctx = RoundContext {
            nodes: &w.nodes,
            params: &w.params,
            round: 0,
            behaviors: &behaviors,
        };
        let mut counters = MessageCounters::new();
        let out = commit_committee(&ctx, 1, &committee, &w.config.referee, &mut w.registry, &mut counters).unwrap();
        let SemiCommitmentOutcome::Registered(d) = out else {
            panic!("expected registration");
        };
        assert_ne!(d, compute_semi_commitment(&committee.members).unwrap());
    }

    #[test]
    fn inconsistent_digest_is_caught_by_referee() {
        let mut w = world(5);
        let committee = w.config.committees[2].clone();
        w.nodes[committee.leader.index()].corrupt_from(0);
        let mut behaviors = Behaviors::default();
        behaviors
            .leaders
            .insert(committee.leader, LeaderBehavior::InconsistentDigest);
        let ctx = RoundContext {
            nodes: &w.nodes,
            params: &w.params,
            round: 0,
            behaviors: &behaviors,
        };
        let mut counters = MessageCounters::new();
        let out = commit_committee(&ctx, 2, &committee, &w.config.referee, &mut w.registry, &mut counters).unwrap();
        let SemiCommitmentOutcome::LeaderAccused {
            witness, registered, ..
        } = out
        else {
            panic!("expected accusation");
        };
        assert_eq!(registered, None);
        assert_eq!(verify_witness(&witness, &w.registry, registered), Ok(()));
    }

    #[test]
    fn forged_signature_is_dismissed() {
        let mut w = world(6);
        let committee = w.config.committees[0].clone();
        let behaviors = Behaviors::default();
        let ctx = RoundContext {
            nodes: &w.nodes,
            params: &w.params,
            round: 0,
            behaviors: &behaviors,
        };
        // a list the leader never signed, with a signature object made up
        let fake = SemiCommitment {
            committee: 0,
            digest: Digest::from_u64(1),
            members: committee.members.clone(),
        };
        let payload = fake.encode();
        let witness = Witness {
            kind: WitnessKind::SemiCommitmentMismatch,
            committee: 0,
            accused: committee.leader,
            m_l: SignedMessage {
                signature: SimSignature {
                    signer: committee.leader,
                    message_digest: sha256(&payload),
                },
                payload,
            },
            m_0: Digest::from_u64(1),
        };
        assert_eq!(
            verify_witness(&witness, &w.registry, None),
            Err(DismissReason::BadSignature)
        );
        let mut counters = MessageCounters::new();
        let out = accuse_and_reselect(
            &ctx,
            &committee,
            &witness,
            committee.partial_set[0],
            &w.config.referee,
            &w.registry,
            None,
            &BTreeSet::new(),
            &mut counters,
            &mut rng_from_seed(1),
        );
        assert!(matches!(out, Accusation::Dismissed(_)));
        let _ = &mut w.registry;
    }

    #[test]
    fn invalid_proposal_leads_to_eviction() {
        let mut w = world(7);
        let committee = w.config.committees[0].clone();
        w.nodes[committee.leader.index()].corrupt_from(0);
        let mut behaviors = Behaviors::default();
        behaviors
            .leaders
            .insert(committee.leader, LeaderBehavior::ProposeInvalidTx);
        let ctx = RoundContext {
            nodes: &w.nodes,
            params: &w.params,
            round: 0,
            behaviors: &behaviors,
        };
        let pending: Vec<Transaction> = (0..4).map(|i| tx(i, 1, true)).collect();
        let reg = compute_semi_commitment(&committee.members).unwrap();
        let out = run_committee_round(
            &ctx,
            0,
            &committee,
            &w.config.referee,
            Some(reg),
            None,
            &pending,
            &mut w.registry,
            &mut rng_from_seed(8),
        )
        .unwrap();
        assert_eq!(out.evictions.len(), 1);
        assert_eq!(out.evictions[0].kind, WitnessKind::InvalidProposal);
        assert!(out.agreed);
        assert!(out.txlist.txs.iter().all(|t| t.valid));
        assert_eq!(out.accepted.len(), 4);
    }

    #[test]
    fn honest_round_scores_everyone() {
        let mut w = world(9);
        let committee = w.config.committees[1].clone();
        let behaviors = Behaviors::default();
        let ctx = RoundContext {
            nodes: &w.nodes,
            params: &w.params,
            round: 0,
            behaviors: &behaviors,
        };
        let pending: Vec<Transaction> = (0..3).map(|i| tx(i, 2, true)).collect();
        let out = run_committee_round(
            &ctx,
            1,
            &committee,
            &w.config.referee,
            None,
            None,
            &pending,
            &mut w.registry,
            &mut rng_from_seed(1),
        )
        .unwrap();
        assert!(out.evictions.is_empty());
        assert_eq!(out.scores.scores.len(), committee.members.len());
        // resource 10 at p_m covers all three: perfect member score 3 + 0.3
        let member = committee.members.iter().find(|&&id| id != committee.leader).unwrap();
        assert!((out.scores.scores[member] - 3.3).abs() < 1e-12);
        assert!((out.scores.scores[&committee.leader] - (3.0 + 0.3 - 0.5 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn counters_merge() {
        let mut a = MessageCounters::new();
        a.broadcast(NodeId(0), &[NodeId(1), NodeId(2)], Phase::Voting, 10);
        let mut b = MessageCounters::new();
        b.record_sent(NodeId(1), Phase::Voting, 3);
        a.merge(&b);
        assert_eq!(a.get(NodeId(0), Phase::Voting).sent, 2);
        assert_eq!(a.get(NodeId(1), Phase::Voting).bytes_stored, 10);
        assert_eq!(a.total_messages(NodeId(1)), 4);
        assert_eq!(a.phase_messages(NodeId(9), Phase::Recovery), 0);
    }
}
