// SPDX-License-Identifier: Apache-2.0

//! Round-based simulator: resource sampling, transaction ingestion, committee
//! formation, per-committee rounds and reputation evolution.
//!
//! Every source of randomness has its own stream derived from the seed
//! (resources, arrivals, formation, adversary), so two schemes run with the
//! same seed see identical nodes and identical transactions.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::vec::Vec;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::committee::{
    pending_from_outcome, run_committee_round, run_semi_commitment_exchange, Behaviors, CommitteeRoundOutcome,
    LeaderBehavior, MemberBehavior, MessageCounters, Phase, RoundContext,
};
use crate::digest::{sha256, Digest, Encoder};
use crate::error::{Error, Result};
use crate::model::{CommitteeConfig, Node, NodeId, SignatureRegistry, SystemParams, Transaction};
use crate::reputation::{distribute_rewards, top_reputations};
use crate::reshuffle::{ecfr_step, form_committees, sample_partial_set, LeaderRule};
use crate::rng::{stream_rng, SimRng};
use crate::shard::{assign_shard, InputCountDistribution, ShardingScheme};

const STREAM_RESOURCES: u64 = 1;
const STREAM_TXS: u64 = 2;
const STREAM_FORMATION: u64 = 3;
const STREAM_ADVERSARY: u64 = 4;
const STREAM_COMMITTEE: u64 = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scheme {
    Reputation,
    Random,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Reputation => "reputation",
            Scheme::Random => "random",
        }
    }

    fn leader_rule(self) -> LeaderRule {
        match self {
            Scheme::Reputation => LeaderRule::Reputation,
            Scheme::Random => LeaderRule::UniformRandom,
        }
    }
}

/// How committees are built each round.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Formation {
    /// Every node is re-split uniformly at the start of each round.
    #[default]
    Uniform,
    /// Uniform split in the first round, `alpha`-ECFR afterwards.
    Ecfr,
}

/// Resources are `scale * Beta(a, b)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResourceDist {
    pub a: f64,
    pub b: f64,
    pub scale: f64,
}

impl Default for ResourceDist {
    fn default() -> Self {
        ResourceDist {
            a: 2.0,
            b: 5.0,
            scale: 100.0,
        }
    }
}

/// One row of a transaction trace. Rounds are numbered from 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceRecord {
    pub round: u64,
    pub tx_id: Digest,
    pub n_inputs: usize,
    pub valid: bool,
}

impl TraceRecord {
    pub fn to_transaction(&self) -> Transaction {
        Transaction::synthetic(self.tx_id, self.n_inputs, self.valid)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TxSource {
    Synthetic {
        inputs: InputCountDistribution,
        per_round: usize,
        invalid_fraction: f64,
    },
    /// Rows must be sorted by round.
    Trace(Vec<TraceRecord>),
}

impl Default for TxSource {
    fn default() -> Self {
        TxSource::Synthetic {
            inputs: InputCountDistribution::bitcoin_like(),
            per_round: 500,
            invalid_fraction: 0.0,
        }
    }
}

/// Forces the leader of `committee` in `round` to misbehave; the node stays
/// corrupt afterwards.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Injection {
    pub round: u64,
    pub committee: usize,
    pub behavior: LeaderBehavior,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AdversaryConfig {
    /// Fraction of nodes designated before round 1.
    pub f: f64,
    /// Designated nodes turn malicious from round `d`.
    pub d: u32,
    pub leader_behavior: LeaderBehavior,
    pub member_behavior: MemberBehavior,
    pub injections: Vec<Injection>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub params: SystemParams,
    pub rounds: u64,
    pub scheme: Scheme,
    pub formation: Formation,
    pub resources: ResourceDist,
    pub tx_source: TxSource,
    pub sharding: ShardingScheme,
    pub adversary: AdversaryConfig,
    pub total_reward_per_round: f64,
    pub seed: u64,
}

impl SimConfig {
    /// 2,000 processing nodes in 20 committees of 100 plus a referee
    /// committee of 100, 1,000 rounds.
    pub fn reference() -> Self {
        let params = SystemParams::reference_simulation();
        let sharding = ShardingScheme::modulo(params.m as u32).expect("m is positive");
        SimConfig {
            params,
            rounds: 1000,
            scheme: Scheme::Reputation,
            formation: Formation::Uniform,
            resources: ResourceDist::default(),
            tx_source: TxSource::default(),
            sharding,
            adversary: AdversaryConfig::default(),
            total_reward_per_round: 100.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.rounds == 0 {
            return Err(Error::param("rounds", "rounds >= 1"));
        }
        let r = &self.resources;
        if !(r.a > 0.0 && r.b > 0.0) {
            return Err(Error::param("resource_dist", "beta shapes must be positive"));
        }
        if !(r.scale > 0.0 && r.scale.is_finite()) {
            return Err(Error::param("resource_dist", "scale must be positive"));
        }
        if self.sharding.shard_count() as usize != self.params.m {
            return Err(Error::param("sharding", "shard count must equal m"));
        }
        if !(self.total_reward_per_round > 0.0 && self.total_reward_per_round.is_finite()) {
            return Err(Error::param("total_reward_per_round", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.adversary.f) {
            return Err(Error::param("adversary.f", "must lie in [0, 1)"));
        }
        if let Some(bad) = self.adversary.injections.iter().find(|i| i.committee >= self.params.m) {
            return Err(Error::param(
                "adversary.injections",
                alloc::format!("committee {} out of range", bad.committee),
            ));
        }
        match &self.tx_source {
            TxSource::Synthetic { invalid_fraction, .. } if !(0.0..=1.0).contains(invalid_fraction) => {
                return Err(Error::param("tx_source.invalid_fraction", "must lie in [0, 1]"));
            }
            TxSource::Trace(rows) if rows.windows(2).any(|w| w[1].round < w[0].round) => {
                return Err(Error::param("tx_source", "trace rows must be sorted by round"));
            }
            _ => {}
        }
        Ok(())
    }
}

/// `n` draws of `scale * Beta(a, b)`; exact zeros are drawn again.
pub fn sample_resources<R: Rng + ?Sized>(n: usize, dist: ResourceDist, rng: &mut R) -> Result<Vec<f64>> {
    if !(dist.a > 0.0 && dist.b > 0.0 && dist.scale > 0.0) {
        return Err(Error::param("resource_dist", "a, b and scale must be positive"));
    }
    let beta = Beta::new(dist.a, dist.b).map_err(|_| Error::param("resource_dist", "invalid beta shapes"))?;
    Ok((0..n)
        .map(|_| loop {
            let x = dist.scale * beta.sample(rng);
            if x > 0.0 {
                break x;
            }
        })
        .collect())
}

/// Id of the `index`-th synthetic transaction of a run.
pub fn synthetic_tx_id(seed: u64, index: u64) -> Digest {
    sha256(&Encoder::new().u64(seed).u64(index).finish())
}

/// Transactions arriving in `round` (numbered from 1).
pub fn arrivals(source: &TxSource, round: u64, seed: u64) -> Vec<Transaction> {
    match source {
        TxSource::Synthetic {
            inputs,
            per_round,
            invalid_fraction,
        } => {
            let mut rng = stream_rng(seed, STREAM_TXS, round);
            let base = (round - 1) * *per_round as u64;
            (0..*per_round as u64)
                .map(|i| {
                    let k = inputs.sample(&mut rng);
                    let valid = !rng.random_bool(*invalid_fraction);
                    Transaction::synthetic(synthetic_tx_id(seed, base + i), k, valid)
                })
                .collect()
        }
        TxSource::Trace(rows) => {
            let start = rows.partition_point(|r| r.round < round);
            rows[start..]
                .iter()
                .take_while(|r| r.round == round)
                .map(TraceRecord::to_transaction)
                .collect()
        }
    }
}

/// Routes arriving transactions to per-committee queues, keeping arrival
/// order.
pub fn ingest_transactions(txs: Vec<Transaction>, scheme: &ShardingScheme, queues: &mut [VecDeque<Transaction>]) {
    for tx in txs {
        let k = assign_shard(&tx.tx_id, scheme) as usize;
        queues[k].push_back(tx);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundMetrics {
    pub round: u64,
    pub scheme: Scheme,
    /// Mean leader resource over the mean of the `m` largest resources.
    pub leader_resource_ratio: f64,
    pub txs_processed: u64,
    pub cumulative_txs: u64,
    pub evictions: u64,
    pub msgs_leader: f64,
    pub msgs_member: f64,
    pub msgs_referee: f64,
    pub rewards_paid: f64,
}

#[derive(Clone, Debug)]
pub struct SimState {
    pub round: u64,
    pub nodes: Vec<Node>,
    pub queues: Vec<VecDeque<Transaction>>,
    pub config: Option<CommitteeConfig>,
    pub behaviors: Behaviors,
    pub registry: SignatureRegistry,
    pub cumulative_txs: u64,
    pub rewards: Vec<f64>,
    top_mean: f64,
}

impl SimState {
    /// Samples resources and designates the adversary's nodes.
    pub fn new(config: &SimConfig) -> Result<Self> {
        config.validate()?;
        let n = config.params.n;
        let resources = sample_resources(n, config.resources, &mut stream_rng(config.seed, STREAM_RESOURCES, 0))?;
        let mut nodes: Vec<Node> = resources
            .iter()
            .enumerate()
            .map(|(i, &r)| Node::new(NodeId(i as u32), r))
            .collect();
        let adv = &config.adversary;
        let t = libm::round(adv.f * n as f64) as usize;
        let mut behaviors = Behaviors::default();
        if t > 0 {
            let ids: Vec<NodeId> = nodes.iter().map(|n| n.id).collect();
            let mut rng = stream_rng(config.seed, STREAM_ADVERSARY, 0);
            for id in ids.choose_multiple(&mut rng, t) {
                nodes[id.index()].corrupt_from(u64::from(adv.d));
                behaviors.leaders.insert(*id, adv.leader_behavior);
                behaviors.members.insert(*id, adv.member_behavior);
            }
        }
        let mut sorted = resources;
        sorted.sort_by(|a, b| b.total_cmp(a));
        let m = config.params.m;
        let top_mean = sorted[..m].iter().sum::<f64>() / m as f64;
        Ok(SimState {
            round: 0,
            nodes,
            queues: alloc::vec![VecDeque::new(); m],
            config: None,
            behaviors,
            registry: SignatureRegistry::new(n),
            cumulative_txs: 0,
            rewards: alloc::vec![0.0; n],
            top_mean,
        })
    }

    pub fn reputations(&self) -> BTreeMap<NodeId, f64> {
        self.nodes.iter().map(|n| (n.id, n.reputation)).collect()
    }
}

fn form_round_config(state: &SimState, config: &SimConfig, round: u64, rng: &mut SimRng) -> Result<CommitteeConfig> {
    let params = &config.params;
    let rule = config.scheme.leader_rule();
    let previous = match (config.formation, &state.config) {
        (Formation::Ecfr, Some(prev)) => prev,
        _ => return form_committees(&state.nodes, params, rule, round, rng),
    };
    let (mut next, _) = ecfr_step(previous, params, rng);
    next.round = round;
    for committee in next.committees.iter_mut() {
        let leader = match config.scheme {
            Scheme::Reputation => top_reputations(|id| state.nodes[id.index()].reputation, &committee.members, 1)?[0],
            Scheme::Random => *committee.members.choose(rng).ok_or(Error::Empty("committee"))?,
        };
        committee.leader = leader;
        committee.partial_set = sample_partial_set(&committee.members, leader, params.lambda, rng);
    }
    Ok(next)
}

fn record_configuration(config: &CommitteeConfig, n: usize, counters: &mut MessageCounters) {
    let c = config.referee.len() as u64;
    let others = n as u64 - c;
    for &id in &config.referee {
        counters.record_sent(id, Phase::Configuration, c + others);
        counters.record_received(id, Phase::Configuration, c, 0);
    }
    for committee in &config.committees {
        for &id in &committee.members {
            counters.record_received(id, Phase::Configuration, c, 0);
        }
    }
}

fn role_means(config: &CommitteeConfig, counters: &MessageCounters) -> (f64, f64, f64) {
    let mean = |ids: &mut dyn Iterator<Item = NodeId>| {
        let (mut sum, mut k) = (0u64, 0u64);
        for id in ids {
            sum += counters.total_messages(id);
            k += 1;
        }
        if k == 0 {
            0.0
        } else {
            sum as f64 / k as f64
        }
    };
    let leaders: BTreeSet<NodeId> = config.leaders().into_iter().collect();
    let l = mean(&mut leaders.iter().copied());
    let m = mean(
        &mut config
            .committees
            .iter()
            .flat_map(|c| c.members.iter().copied())
            .filter(|id| !leaders.contains(id)),
    );
    let r = mean(&mut config.referee.iter().copied());
    (l, m, r)
}

/// Per-round details kept alongside the metrics, for inspection and tests.
#[derive(Clone, Debug)]
pub struct RoundReport {
    pub metrics: RoundMetrics,
    pub config: CommitteeConfig,
    pub outcomes: Vec<CommitteeRoundOutcome>,
}

/// Advances `state` by one round.
pub fn run_round(state: &mut SimState, config: &SimConfig) -> Result<RoundReport> {
    let params = &config.params;
    let round = state.round + 1;

    ingest_transactions(
        arrivals(&config.tx_source, round, config.seed),
        &config.sharding,
        &mut state.queues,
    );

    let mut rng = stream_rng(config.seed, STREAM_FORMATION, round);
    let committees = form_round_config(state, config, round, &mut rng)?;
    for inj in config.adversary.injections.iter().filter(|i| i.round == round) {
        let leader = committees.committees[inj.committee].leader;
        state.nodes[leader.index()].corrupt_from(round);
        state.behaviors.leaders.insert(leader, inj.behavior);
    }

    state.registry.clear();
    let mut counters = MessageCounters::new();
    record_configuration(&committees, params.n, &mut counters);
    let ctx = RoundContext {
        nodes: &state.nodes,
        params,
        round,
        behaviors: &state.behaviors,
    };
    let exchange = run_semi_commitment_exchange(&ctx, &committees, &mut state.registry, &mut counters)?;

    let mut outcomes = Vec::with_capacity(params.m);
    for (k, committee) in committees.committees.iter().enumerate() {
        let (registered, witness) = pending_from_outcome(&exchange[k]);
        let pending = state.queues[k].make_contiguous();
        let mut crng = stream_rng(config.seed, STREAM_COMMITTEE, round * params.m as u64 + k as u64);
        let out = run_committee_round(
            &ctx,
            k,
            committee,
            &committees.referee,
            registered,
            witness,
            pending,
            &mut state.registry,
            &mut crng,
        )?;
        outcomes.push(out);
    }

    // single synchronisation point: queues, punishments, scores, rewards
    let mut processed = 0u64;
    let mut evictions = 0u64;
    for out in &outcomes {
        counters.merge(&out.counters);
        let gone: BTreeSet<Digest> = out.accepted.iter().chain(out.discarded.iter()).copied().collect();
        state.queues[out.index].retain(|tx| !gone.contains(&tx.tx_id));
        processed += out.accepted.len() as u64;
        evictions += out.evictions.len() as u64;
        for ev in &out.evictions {
            state.nodes[ev.leader.index()].reputation = ev.punished_reputation;
        }
    }
    for out in &outcomes {
        for (id, s) in &out.scores.scores {
            state.nodes[id.index()].reputation += s;
        }
    }
    let rewards = distribute_rewards(&state.reputations(), config.total_reward_per_round)?;
    let mut rewards_paid = 0.0;
    for (id, r) in rewards {
        state.rewards[id.index()] += r;
        rewards_paid += r;
    }

    let final_config = CommitteeConfig {
        committees: outcomes.iter().map(|o| o.committee.clone()).collect(),
        ..committees
    };
    let leader_mean = final_config
        .leaders()
        .iter()
        .map(|id| state.nodes[id.index()].resource)
        .sum::<f64>()
        / params.m as f64;
    let (msgs_leader, msgs_member, msgs_referee) = role_means(&final_config, &counters);
    state.cumulative_txs += processed;
    state.round = round;
    state.config = Some(final_config.clone());
    Ok(RoundReport {
        metrics: RoundMetrics {
            round,
            scheme: config.scheme,
            leader_resource_ratio: (leader_mean / state.top_mean).clamp(0.0, 1.0),
            txs_processed: processed,
            cumulative_txs: state.cumulative_txs,
            evictions,
            msgs_leader,
            msgs_member,
            msgs_referee,
            rewards_paid,
        },
        config: final_config,
        outcomes,
    })
}

/// Runs `config.rounds` rounds from a fresh state.
pub fn run(config: &SimConfig) -> Result<Vec<RoundMetrics>> {
    let mut state = SimState::new(config)?;
    (0..config.rounds)
        .map(|_| run_round(&mut state, config).map(|r| r.metrics))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub reputation: Vec<RoundMetrics>,
    pub random: Vec<RoundMetrics>,
}

impl Comparison {
    /// Cumulative transactions of the reputation run over the random run,
    /// per round; `None` while the random run has processed nothing.
    pub fn cumulative_ratio(&self) -> Vec<Option<f64>> {
        self.reputation
            .iter()
            .zip(&self.random)
            .map(|(a, b)| (b.cumulative_txs > 0).then(|| a.cumulative_txs as f64 / b.cumulative_txs as f64))
            .collect()
    }
}

/// Runs both schemes on the same seed, hence the same nodes and arrivals.
pub fn run_comparison(config: &SimConfig) -> Result<Comparison> {
    let with = |scheme| SimConfig {
        scheme,
        ..config.clone()
    };
    Ok(Comparison {
        reputation: run(&with(Scheme::Reputation))?,
        random: run(&with(Scheme::Random))?,
    })
}
