// SPDX-License-Identifier: Apache-2.0

//! Committee formation and expected-constant-fraction reshuffling (ECFR).
//!
//! Under ECFR with parameter `alpha`, every eligible node is marked
//! independently with probability `alpha`; marked nodes are pooled, the pool
//! is uniformly permuted and dealt back into the vacated slots, so every
//! committee keeps exactly `c` members.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{Committee, CommitteeConfig, Node, NodeId, SystemParams};
use crate::reputation::top_reputations;

/// How leaders are chosen when committees are formed from scratch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LeaderRule {
    /// The `m` highest-reputation non-referee nodes, one per committee.
    Reputation,
    /// One uniformly random member per committee.
    UniformRandom,
}

fn check_roster(nodes: &[Node], params: &SystemParams) -> Result<()> {
    params.validate()?;
    if nodes.len() != params.n {
        return Err(Error::LengthMismatch {
            expected: params.n,
            actual: nodes.len(),
        });
    }
    if let Some(node) = nodes.iter().enumerate().find(|(i, n)| n.id.index() != *i) {
        return Err(Error::UnknownNode(node.1.id));
    }
    Ok(())
}

/// Uniform `lambda`-subset of `members` without `leader`, sorted.
pub fn sample_partial_set<R: Rng + ?Sized>(
    members: &[NodeId],
    leader: NodeId,
    lambda: usize,
    rng: &mut R,
) -> Vec<NodeId> {
    let candidates: Vec<NodeId> = members.iter().copied().filter(|&id| id != leader).collect();
    let mut set: Vec<NodeId> = candidates.choose_multiple(rng, lambda).copied().collect();
    set.sort_unstable();
    set
}

/// Forms a fresh configuration: a uniform referee committee, then `m`
/// committees of `c` built from the remaining nodes under `rule`, each with a
/// uniform partial set.
pub fn form_committees<R: Rng + ?Sized>(
    nodes: &[Node],
    params: &SystemParams,
    rule: LeaderRule,
    round: u64,
    rng: &mut R,
) -> Result<CommitteeConfig> {
    check_roster(nodes, params)?;
    let (m, c) = (params.m, params.c);
    let mut ids: Vec<NodeId> = nodes.iter().map(|n| n.id).collect();
    ids.shuffle(rng);
    let mut referee = ids[..c].to_vec();
    referee.sort_unstable();
    let rest = &ids[c..];

    let mut groups: Vec<(NodeId, Vec<NodeId>)> = Vec::with_capacity(m);
    match rule {
        LeaderRule::Reputation => {
            let mut leaders = top_reputations(|id| nodes[id.index()].reputation, rest, m)?;
            leaders.shuffle(rng);
            let chosen: BTreeSet<NodeId> = leaders.iter().copied().collect();
            let others: Vec<NodeId> = rest.iter().copied().filter(|id| !chosen.contains(id)).collect();
            for (leader, chunk) in leaders.into_iter().zip(others.chunks(c - 1)) {
                let mut members = chunk.to_vec();
                members.push(leader);
                groups.push((leader, members));
            }
        }
        LeaderRule::UniformRandom => {
            for chunk in rest.chunks(c) {
                let leader = *chunk.choose(rng).expect("committee is non-empty");
                groups.push((leader, chunk.to_vec()));
            }
        }
    }

    let committees = groups
        .into_iter()
        .map(|(leader, mut members)| {
            members.sort_unstable();
            let partial_set = sample_partial_set(&members, leader, params.lambda, rng);
            Committee {
                members,
                leader,
                partial_set,
            }
        })
        .collect();
    Ok(CommitteeConfig {
        round,
        referee,
        committees,
    })
}

/// Initial configuration with reputation-ranked leaders.
pub fn bootstrap<R: Rng + ?Sized>(nodes: &[Node], params: &SystemParams, rng: &mut R) -> Result<CommitteeConfig> {
    form_committees(nodes, params, LeaderRule::Reputation, 0, rng)
}

/// Marks each eligible member of `groups` with probability `alpha` and deals
/// the shuffled pool of marked nodes back into the vacated slots. Group sizes
/// are preserved and every group is left sorted. Returns the marked nodes in
/// marking order.
pub fn ecfr_reassign<R: Rng + ?Sized>(
    groups: &mut [Vec<NodeId>],
    is_eligible: impl Fn(NodeId) -> bool,
    alpha: f64,
    rng: &mut R,
) -> Vec<NodeId> {
    let alpha = alpha.clamp(0.0, 1.0);
    let mut marked = Vec::new();
    let mut vacated = Vec::new();
    for (k, group) in groups.iter_mut().enumerate() {
        group.retain(|&id| {
            if is_eligible(id) && rng.random_bool(alpha) {
                marked.push(id);
                vacated.push(k);
                false
            } else {
                true
            }
        });
    }
    let mut pool = marked.clone();
    pool.shuffle(rng);
    for (k, id) in vacated.into_iter().zip(pool) {
        groups[k].push(id);
    }
    for g in groups.iter_mut() {
        g.sort_unstable();
    }
    marked
}

/// Keeps partial-set members that are still in the committee and refills the
/// rest uniformly from the other non-leader members.
fn repair_partial_set<R: Rng + ?Sized>(committee: &mut Committee, lambda: usize, rng: &mut R) {
    let Committee {
        members,
        leader,
        partial_set,
    } = committee;
    partial_set.retain(|id| id != leader && members.binary_search(id).is_ok());
    if partial_set.len() < lambda {
        let candidates: Vec<NodeId> = members
            .iter()
            .copied()
            .filter(|id| id != leader && partial_set.binary_search(id).is_err())
            .collect();
        let need = lambda - partial_set.len();
        partial_set.extend(candidates.choose_multiple(rng, need).copied());
        partial_set.sort_unstable();
    }
}

/// One round of `alpha`-ECFR over the common committees. Leaders and referee
/// members are never marked. Returns the next configuration and the marked
/// set.
pub fn ecfr_step<R: Rng + ?Sized>(
    config: &CommitteeConfig,
    params: &SystemParams,
    rng: &mut R,
) -> (CommitteeConfig, BTreeSet<NodeId>) {
    let leaders: BTreeSet<NodeId> = config.leaders().into_iter().collect();
    let mut groups: Vec<Vec<NodeId>> = config.committees.iter().map(|c| c.members.clone()).collect();
    let marked = ecfr_reassign(&mut groups, |id| !leaders.contains(&id), params.alpha, rng);
    let committees = config
        .committees
        .iter()
        .zip(groups)
        .map(|(old, members)| {
            let mut next = Committee {
                members,
                leader: old.leader,
                partial_set: old.partial_set.clone(),
            };
            repair_partial_set(&mut next, params.lambda, rng);
            next
        })
        .collect();
    let next = CommitteeConfig {
        round: config.round + 1,
        referee: config.referee.clone(),
        committees,
    };
    (next, marked.into_iter().collect())
}

/// Draws a fresh referee committee uniformly from all non-leader nodes.
/// Departing referee members are dealt uniformly into the slots the incoming
/// members vacate.
pub fn reselect_referee<R: Rng + ?Sized>(
    config: &CommitteeConfig,
    params: &SystemParams,
    rng: &mut R,
) -> CommitteeConfig {
    let leaders: BTreeSet<NodeId> = config.leaders().into_iter().collect();
    let mut candidates: Vec<NodeId> = config.referee.clone();
    for c in &config.committees {
        candidates.extend(c.members.iter().copied().filter(|id| !leaders.contains(id)));
    }
    let mut referee: Vec<NodeId> = candidates.choose_multiple(rng, params.c).copied().collect();
    referee.sort_unstable();

    let mut committees = config.committees.clone();
    let mut vacated = Vec::new();
    for (k, c) in committees.iter_mut().enumerate() {
        c.members.retain(|id| {
            let leaving = referee.binary_search(id).is_ok();
            if leaving {
                vacated.push(k);
            }
            !leaving
        });
    }
    let mut departing: Vec<NodeId> = config
        .referee
        .iter()
        .copied()
        .filter(|id| referee.binary_search(id).is_err())
        .collect();
    departing.shuffle(rng);
    for (k, id) in vacated.into_iter().zip(departing) {
        committees[k].members.push(id);
    }
    for c in committees.iter_mut() {
        c.members.sort_unstable();
        repair_partial_set(c, params.lambda, rng);
    }
    CommitteeConfig {
        round: config.round,
        referee,
        committees,
    }
}

/// Fraction of a committee still unmarked after `d` rounds in the proof's
/// bookkeeping: `beta = (1 - alpha^2)^d`.
pub fn beta_for_alpha(alpha: f64, d: u32) -> f64 {
    libm::pow(1.0 - alpha * alpha, f64::from(d))
}

/// Inverse of [`beta_for_alpha`]: `alpha = sqrt(1 - beta^(1/d))`.
pub fn alpha_for_beta(beta: f64, d: u32) -> Result<f64> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::param("beta", "must lie in (0, 1)"));
    }
    if d == 0 {
        return Err(Error::param("d", "must be at least 1"));
    }
    Ok(libm::sqrt(1.0 - libm::pow(beta, 1.0 / f64::from(d))))
}

/// Upper bound on the malicious fraction of any committee after reshuffling:
/// `beta + f (1 + beta)^2 (1 - beta)`.
pub fn malicious_fraction_bound(f: f64, beta: f64) -> f64 {
    beta + f * (1.0 + beta) * (1.0 + beta) * (1.0 - beta)
}

/// Whether `(f, beta)` keeps every committee below one half malicious.
pub fn theorem_predicate(f: f64, beta: f64) -> bool {
    malicious_fraction_bound(f, beta) < 0.5
}
