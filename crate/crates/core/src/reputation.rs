// SPDX-License-Identifier: Apache-2.0

//! Voting, scoring, reward mapping, punishment and leader selection.
//!
//! A member's score for one voting round is `D * cos(v, u)` plus a bonus
//! for a vote that matches the committee decision exactly. The perfect-vote
//! bonus is `sigma * D` for ordinary members and `sigma * D - omega / D` for
//! the leader, so a perfect member always out-earns its leader by `omega / D`.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::NodeId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Vote {
    No = -1,
    Unknown = 0,
    Yes = 1,
}

impl Vote {
    pub fn value(self) -> i32 {
        self as i32
    }
}

/// One member's ternary opinions over a `TXList` of length `D`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VoteVector(pub Vec<Vote>);

impl VoteVector {
    pub fn unknown(len: usize) -> Self {
        VoteVector(alloc::vec![Vote::Unknown; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_all_unknown(&self) -> bool {
        self.0.iter().all(|v| *v == Vote::Unknown)
    }
}

/// Committee decision per transaction. Never contains `Unknown`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecisionVector(Vec<bool>);

impl DecisionVector {
    pub fn from_accepted(accepted: Vec<bool>) -> Self {
        DecisionVector(accepted)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_accepted(&self, k: usize) -> bool {
        self.0[k]
    }

    /// `+1` for accepted entries, `-1` otherwise.
    pub fn value(&self, k: usize) -> i32 {
        if self.0[k] {
            1
        } else {
            -1
        }
    }

    pub fn accepted_indices(&self) -> Vec<usize> {
        self.0.iter().enumerate().filter_map(|(k, a)| a.then_some(k)).collect()
    }
}

/// Majority rule over the collected votes of a committee of size `c`.
///
/// Transaction `k` is accepted iff strictly more than `c / 2` votes are
/// `Yes`. Members without a vote vector count as all-`Unknown`. Returns the
/// decision vector and the accepted indices (`TXdecSET`).
pub fn majority_decide(votes: &[(NodeId, VoteVector)], c: usize) -> Result<(DecisionVector, Vec<usize>)> {
    let first = votes.first().ok_or(Error::Empty("vote list"))?;
    let d = first.1.len();
    if let Some((_, bad)) = votes.iter().find(|(_, v)| v.len() != d) {
        return Err(Error::LengthMismatch {
            expected: d,
            actual: bad.len(),
        });
    }
    if votes.len() > c {
        return Err(Error::param("votes", "more vote vectors than committee members"));
    }
    let accepted: Vec<bool> = (0..d)
        .map(|k| {
            let yes = votes.iter().filter(|(_, v)| v.0[k] == Vote::Yes).count();
            2 * yes > c
        })
        .collect();
    let decision = DecisionVector(accepted);
    let set = decision.accepted_indices();
    Ok((decision, set))
}

/// Score of one member for one voting round.
///
/// An all-`Unknown` vote has no defined cosine and scores zero.
pub fn score_member(
    vote: &VoteVector,
    decision: &DecisionVector,
    is_leader: bool,
    sigma: f64,
    omega: f64,
) -> Result<f64> {
    let d = decision.len();
    if d == 0 {
        return Err(Error::Empty("decision vector"));
    }
    if vote.len() != d {
        return Err(Error::LengthMismatch {
            expected: d,
            actual: vote.len(),
        });
    }
    let mut dot = 0i64;
    let mut norm_sq = 0i64;
    for (k, v) in vote.0.iter().enumerate() {
        let v = i64::from(v.value());
        dot += v * i64::from(decision.value(k));
        norm_sq += v * v;
    }
    if norm_sq == 0 {
        return Ok(0.0);
    }
    let df = d as f64;
    // cos = 1 exactly when every entry matches the decision
    let perfect = dot == d as i64 && norm_sq == d as i64;
    if perfect {
        let bonus = if is_leader { sigma * df - omega / df } else { sigma * df };
        return Ok(df + bonus);
    }
    let cos = dot as f64 / (libm::sqrt(norm_sq as f64) * libm::sqrt(df));
    Ok(df * cos)
}

/// Monotone positive map used for reward shares: `e^x` for `x <= 0`,
/// `1 + ln(x + 1)` above.
pub fn map_reputation(x: f64) -> f64 {
    if x <= 0.0 {
        libm::exp(x)
    } else {
        1.0 + libm::log1p(x)
    }
}

/// Splits `total_reward` proportionally to `map_reputation` of each node.
pub fn distribute_rewards(reputations: &BTreeMap<NodeId, f64>, total_reward: f64) -> Result<BTreeMap<NodeId, f64>> {
    if reputations.is_empty() {
        return Err(Error::Empty("reward recipients"));
    }
    if !(total_reward > 0.0 && total_reward.is_finite()) {
        return Err(Error::param("total_reward", "must be positive"));
    }
    let mapped: Vec<(NodeId, f64)> = reputations.iter().map(|(&id, &r)| (id, map_reputation(r))).collect();
    let norm: f64 = mapped.iter().map(|(_, g)| g).sum();
    Ok(mapped
        .into_iter()
        .map(|(id, g)| (id, total_reward * g / norm))
        .collect())
}

/// Misbehaving leaders keep the real cube root of their reputation.
///
/// For reputations in `(-1, 1)` this moves the value away from zero; the
/// formula is applied as is.
pub fn punish_leader(reputation: f64) -> f64 {
    libm::cbrt(reputation)
}

/// The `m` highest-reputation nodes of `eligible` (ties to the smaller id),
/// in ranking order.
pub fn top_reputations(reputations: impl Fn(NodeId) -> f64, eligible: &[NodeId], m: usize) -> Result<Vec<NodeId>> {
    if eligible.len() < m {
        return Err(Error::InsufficientNodes {
            needed: m,
            available: eligible.len(),
        });
    }
    let mut ranked: Vec<(f64, NodeId)> = eligible.iter().map(|&id| (reputations(id), id)).collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    Ok(ranked.into_iter().take(m).map(|(_, id)| id).collect())
}

/// Picks the `m` highest-reputation eligible nodes and assigns them to
/// committees `0..m` by a uniform random permutation. Entry `k` of the
/// result leads committee `k`.
pub fn select_leaders<R: Rng + ?Sized>(
    reputations: &BTreeMap<NodeId, f64>,
    eligible: &BTreeSet<NodeId>,
    m: usize,
    rng: &mut R,
) -> Result<Vec<NodeId>> {
    let eligible: Vec<NodeId> = eligible.iter().copied().collect();
    for id in &eligible {
        if !reputations.contains_key(id) {
            return Err(Error::UnknownNode(*id));
        }
    }
    let mut leaders = top_reputations(|id| reputations[&id], &eligible, m)?;
    leaders.shuffle(rng);
    Ok(leaders)
}

/// Per-member scores of one committee round.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScoreList {
    pub scores: BTreeMap<NodeId, f64>,
}

/// Adds each listed score to the node's reputation.
pub fn update_reputations(
    reputations: &BTreeMap<NodeId, f64>,
    score_list: &ScoreList,
) -> Result<BTreeMap<NodeId, f64>> {
    let mut out = reputations.clone();
    for (id, s) in &score_list.scores {
        match out.get_mut(id) {
            Some(r) => *r += s,
            None => return Err(Error::UnknownNode(*id)),
        }
    }
    Ok(out)
}
