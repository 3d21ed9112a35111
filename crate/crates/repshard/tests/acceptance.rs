// SPDX-License-Identifier: Apache-2.0

//! Acceptance suite. Prints one PASS or FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Hypergeometric};

use repshard::config::load_config;
use repshard::core::committee::{
    pending_from_outcome, run_committee_round, run_semi_commitment_exchange, Behaviors, LeaderBehavior, MemberBehavior,
    MessageCounters, Phase, RoundContext,
};
use repshard::core::model::{Node, NodeId, SignatureRegistry, SystemParams, Transaction};
use repshard::core::reputation::{map_reputation, punish_leader, score_member, DecisionVector, Vote, VoteVector};
use repshard::core::reshuffle::{alpha_for_beta, form_committees, LeaderRule};
use repshard::core::rng::stream_rng;
use repshard::core::security::{hypergeometric_tail_exact, AdversaryStrategy};
use repshard::core::shard::{cross_shard_fraction, InputCountDistribution, ShardingScheme};
use repshard::core::sim::{run_round, synthetic_tx_id, Scheme, SimConfig, SimState};
use repshard::drivers;

// Tolerances and limits.
const HYPERGEOMETRIC_ANCHOR: f64 = 2.8e-8;
const HYPERGEOMETRIC_RUNTIME: Duration = Duration::from_secs(5);
const PARTIAL_SET_SINGLE: f64 = 8.2e-20;
const PARTIAL_SET_REL_TOL: f64 = 0.01;
const PARTIAL_SET_CLAIM: f64 = 8e-19;
const PUBLISHED_UNION_VALUE: f64 = 2e-19;
const RESHUFFLE_TRIALS: u64 = 1000;
const RESHUFFLE_RUNTIME: Duration = Duration::from_secs(120);
const RESHUFFLE_TARGET_TAKEN: u64 = 999;
const WHITE_TRIALS: u64 = 10_000;
const WHITE_SIGMAS: f64 = 3.0;
const UNIFORMITY_TRIALS: u64 = 10_000;
const CHI_SQUARE_P_MIN: f64 = 0.001;
const SCORE_TOL: f64 = 1e-12;
const LEADER_REPUTATION_MIN: f64 = 0.95;
const LEADER_RANDOM_RANGE: (f64, f64) = (0.2, 0.55);
const REFERENCE_RUNTIME: Duration = Duration::from_secs(600);
const THROUGHPUT_RATIO_RANGE: (f64, f64) = (3.5, 8.0);
const THROUGHPUT_FLOOR_FROM_ROUND: usize = 50;
const CROSS_SHARD_M20: (f64, f64) = (0.96, 0.03);
const CROSS_SHARD_M100_MIN: f64 = 0.99;
const CROSS_SHARD_MC_SAMPLES: u64 = 1_000_000;
const CROSS_SHARD_MC_TOL: f64 = 0.005;
const SAFETY_RUNS: u64 = 1000;
const VOTING_FACTOR: (f64, f64) = (1.6, 2.4);
const SEMI_COMMITMENT_FACTOR: (f64, f64) = (3.0, 5.0);

type Check<'a> = (&'static str, Box<dyn FnOnce() -> Verdict + 'a>);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_repshard"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// Runs the CLI and returns its standard output.
fn cli(args: &[&str]) -> Result<String, String> {
    let out = bin().args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "{args:?} exited {:?}: {}",
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

/// Field `col` of the CSV data rows in `text`.
fn column(text: &str, col: &str) -> Vec<f64> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or_default().split(',').collect();
    let i = header.iter().position(|h| *h == col).expect("column present");
    lines.map(|l| l.split(',').nth(i).unwrap().parse().unwrap()).collect()
}

fn binomial(n: u128, k: u128) -> u128 {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

fn pearson(observed: &[u64], expected: &[f64]) -> (f64, f64) {
    let total: u64 = observed.iter().sum();
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for (&ob, &p) in observed.iter().zip(expected) {
        o += ob as f64;
        e += p * total as f64;
        if e >= 5.0 {
            cells.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    if let Some(last) = cells.last_mut() {
        last.0 += o;
        last.1 += e;
    }
    let stat: f64 = cells.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    (stat, ChiSquared::new((cells.len() - 1) as f64).unwrap().sf(stat))
}

fn hypergeometric_anchor() -> Verdict {
    let start = Instant::now();
    let out = match cli(&[
        "analyze",
        "committee-failure",
        "--n",
        "4000",
        "--t",
        "1333",
        "--c",
        "240",
    ]) {
        Ok(o) => o,
        Err(e) => return verdict(false, e),
    };
    let elapsed = start.elapsed();
    let tail = column(&out, "exact_tail")[0];
    // 3 malicious of 10, committee of 4, at least 2 malicious:
    // (C(3,2) C(7,2) + C(3,3) C(7,1)) / C(10,4) = 70 / 210
    let num = binomial(3, 2) * binomial(7, 2) + binomial(3, 3) * binomial(7, 1);
    let den = binomial(10, 4);
    let small = hypergeometric_tail_exact(3, 10, 4, 2).unwrap();
    let cross = 3 * num == den && (small - 1.0 / 3.0).abs() < 1e-15;
    verdict(
        tail <= HYPERGEOMETRIC_ANCHOR && elapsed < HYPERGEOMETRIC_RUNTIME && cross,
        format!("tail(4000,1333,240) = {tail:.3e} in {elapsed:.2?}; small case {num}/{den} vs {small}"),
    )
}

fn partial_set_anchor() -> Verdict {
    let out = match cli(&[
        "analyze",
        "partial-set",
        "--f",
        "0.3333333",
        "--lambda",
        "40",
        "--m",
        "20",
    ]) {
        Ok(o) => o,
        Err(e) => return verdict(false, e),
    };
    let single = column(&out, "single")[0];
    let union = column(&out, "union")[0];
    let close = (single - PARTIAL_SET_SINGLE).abs() <= PARTIAL_SET_REL_TOL * PARTIAL_SET_SINGLE;
    verdict(
        close && single < PARTIAL_SET_CLAIM,
        format!(
            "single = {single:.3e}; note: union over 20 committees = {union:.2e}, larger than the published {PUBLISHED_UNION_VALUE:.0e}"
        ),
    )
}

fn bound_dominance() -> Verdict {
    let mut cells = 0;
    let mut worst = f64::NEG_INFINITY;
    for n in [1000u64, 4000] {
        for f in [0.2, 0.3, 1.0 / 3.0] {
            let t = (f * n as f64).floor() as u64;
            for c in (50..=400).step_by(10) {
                let tail = hypergeometric_tail_exact(t, n, c, c.div_ceil(2)).unwrap();
                // D(1/2 || f), written out independently of the library
                let d = 0.5 * (0.5 / f).ln() + 0.5 * (0.5 / (1.0 - f)).ln();
                let bound = (-d * c as f64).exp();
                worst = worst.max(tail / bound);
                cells += 1;
            }
        }
    }
    verdict(worst <= 1.0, format!("{cells} cells, max tail/bound = {worst:.3e}"))
}

fn reshuffle_params(alpha: f64) -> SystemParams {
    SystemParams {
        f: 0.3,
        alpha,
        ..SystemParams::with_shape(10, 100, 40)
    }
}

fn reshuffle_majorities() -> Verdict {
    let start = Instant::now();
    let alpha = alpha_for_beta(1.0 / 8.0, 2).unwrap();
    let strategy = AdversaryStrategy::WorstCaseCommittee;
    let (_, with) = drivers::ecfr_trials(&reshuffle_params(alpha), 2, strategy, RESHUFFLE_TRIALS, 1, jobs()).unwrap();
    let (_, without) = drivers::ecfr_trials(&reshuffle_params(0.0), 2, strategy, RESHUFFLE_TRIALS, 1, jobs()).unwrap();
    let elapsed = start.elapsed();
    verdict(
        with.failures == 0 && without.target_fully_malicious >= RESHUFFLE_TARGET_TAKEN && elapsed < RESHUFFLE_RUNTIME,
        format!(
            "alpha = {alpha:.4}: {} of {} trials lost a majority; alpha = 0: target taken in {} of {}; {elapsed:.1?}",
            with.failures, with.trials, without.target_fully_malicious, without.trials
        ),
    )
}

fn white_fraction() -> Verdict {
    let (alpha, d, m, c) = (0.6, 2u32, 10usize, 100usize);
    let params = SystemParams {
        f: 0.3,
        alpha,
        ..SystemParams::with_shape(m, c, 40)
    };
    let report = drivers::lemma1(&params, d, WHITE_TRIALS, 2, jobs()).unwrap();
    let beta = (1.0 - alpha * alpha).powi(d as i32);
    let bound = (m as f64) * f64::from(d) * (-0.5 * ((1.0 - alpha) * alpha / (1.0 + alpha)) * beta * c as f64).exp();
    let p = report.exact_value;
    let se = (p * (1.0 - p) / WHITE_TRIALS as f64).sqrt();
    verdict(
        p <= bound + WHITE_SIGMAS * se && (report.bound_value - bound).abs() < 1e-12,
        format!("empirical {p:.4} (se {se:.4}) vs bound {bound:.4}"),
    )
}

fn uniformity() -> Verdict {
    let params = reshuffle_params(1.0);
    let (stats, _) = drivers::ecfr_trials(
        &params,
        1,
        AdversaryStrategy::RandomFraction,
        UNIFORMITY_TRIALS,
        3,
        jobs(),
    )
    .unwrap();
    let mut counts = vec![0u64; params.c + 1];
    for s in &stats {
        counts[s.committees[(s.trial % params.m as u64) as usize].malicious] += 1;
    }
    let h = Hypergeometric::new(1100, 330, 100).unwrap();
    let expected: Vec<f64> = (0..=100u64).map(|x| h.pmf(x)).collect();
    let (stat, p) = pearson(&counts, &expected);
    verdict(p > CHI_SQUARE_P_MIN, format!("chi-square {stat:.2}, p = {p:.4}"))
}

fn scoring() -> Verdict {
    let yes = VoteVector(vec![Vote::Yes; 4]);
    let all = DecisionVector::from_accepted(vec![true; 4]);
    let member = score_member(&yes, &all, false, 0.1, 0.5).unwrap();
    let leader = score_member(&yes, &all, true, 0.1, 0.5).unwrap();
    let g0 = map_reputation(0.0);
    let p27 = punish_leader(27.0);
    let ok = (member - 4.4).abs() <= SCORE_TOL
        && (leader - 4.275).abs() <= SCORE_TOL
        && (g0 - 1.0).abs() <= SCORE_TOL
        && (p27 - 3.0).abs() <= SCORE_TOL;
    verdict(
        ok,
        format!("member {member}, leader {leader}, g(0) {g0}, punish(27) {p27}"),
    )
}

struct ReferenceRun {
    reputation_tail: f64,
    random_tail: f64,
    final_ratio: f64,
    min_ratio_late: f64,
    elapsed: Duration,
}

fn reference_run() -> Result<ReferenceRun, String> {
    let loaded = load_config(&configs().join("reference.json")).map_err(|e| e.to_string())?;
    let config = loaded.to_sim_config(Scheme::Reputation).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let cmp = drivers::comparison(&config, 2).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let tail = |v: &[repshard::core::sim::RoundMetrics]| {
        let w: Vec<f64> = v
            .iter()
            .filter(|m| m.round >= 900)
            .map(|m| m.leader_resource_ratio)
            .collect();
        w.iter().sum::<f64>() / w.len() as f64
    };
    let ratios = cmp.cumulative_ratio();
    Ok(ReferenceRun {
        reputation_tail: tail(&cmp.reputation),
        random_tail: tail(&cmp.random),
        final_ratio: ratios.last().copied().flatten().unwrap_or(f64::NAN),
        min_ratio_late: ratios[THROUGHPUT_FLOOR_FROM_ROUND - 1..]
            .iter()
            .map(|r| r.unwrap_or(f64::NAN))
            .fold(f64::INFINITY, f64::min),
        elapsed,
    })
}

fn leader_ratio(run: &Result<ReferenceRun, String>) -> Verdict {
    match run {
        Err(e) => verdict(false, e.clone()),
        Ok(r) => verdict(
            r.reputation_tail >= LEADER_REPUTATION_MIN
                && (LEADER_RANDOM_RANGE.0..=LEADER_RANDOM_RANGE.1).contains(&r.random_tail)
                && r.elapsed < REFERENCE_RUNTIME,
            format!(
                "rounds 900-1000 mean leader ratio: reputation {:.3} (need >= {LEADER_REPUTATION_MIN}), random {:.3}; {:.1?}",
                r.reputation_tail, r.random_tail, r.elapsed
            ),
        ),
    }
}

fn throughput_ratio(run: &Result<ReferenceRun, String>) -> Verdict {
    match run {
        Err(e) => verdict(false, e.clone()),
        Ok(r) => verdict(
            (THROUGHPUT_RATIO_RANGE.0..=THROUGHPUT_RATIO_RANGE.1).contains(&r.final_ratio) && r.min_ratio_late >= 1.0,
            format!(
                "final cumulative ratio {:.3} (need {:?}), min from round {THROUGHPUT_FLOOR_FROM_ROUND} {:.3}",
                r.final_ratio, THROUGHPUT_RATIO_RANGE, r.min_ratio_late
            ),
        ),
    }
}

fn cross_shard() -> Verdict {
    let dist = InputCountDistribution::bitcoin_like();
    let f20 = cross_shard_fraction(&dist, 20).unwrap();
    let f100 = cross_shard_fraction(&dist, 100).unwrap();
    let mut rng = stream_rng(17, 0, 0);
    let mut worst: f64 = 0.0;
    for m in [20u32, 100] {
        let cross = (0..CROSS_SHARD_MC_SAMPLES)
            .filter(|_| {
                let k = dist.sample(&mut rng);
                let home = rng.random_range(0..m);
                (0..k).any(|_| rng.random_range(0..m) != home)
            })
            .count();
        let mc = cross as f64 / CROSS_SHARD_MC_SAMPLES as f64;
        worst = worst.max((mc - cross_shard_fraction(&dist, m).unwrap()).abs());
    }
    verdict(
        (f20 - CROSS_SHARD_M20.0).abs() <= CROSS_SHARD_M20.1
            && f100 > CROSS_SHARD_M100_MIN
            && worst < CROSS_SHARD_MC_TOL,
        format!("m=20: {f20:.4}, m=100: {f100:.4}, max |closed form - sampled| {worst:.4}"),
    )
}

#[derive(Default)]
struct SafetyTally {
    invalid_accepted: u64,
    honest_evicted: u64,
    malicious_rounds: u64,
    malicious_unresolved: u64,
}

/// One adversarial round over a fresh small system. Malicious leaders forge
/// their member list or propose an invalid transaction, malicious members
/// invert their votes. Every partial set keeps an honest member and every
/// committee, referee included, keeps an honest majority.
fn safety_run(seed: u64, tally: &mut SafetyTally) {
    let params = SystemParams::with_shape(4, 20, 5);
    let (n, c) = (params.n, params.c);
    let mut rng = stream_rng(seed, 0x5afe, 0);
    let mut nodes: Vec<Node> = (0..n as u32)
        .map(|i| {
            let mut node = Node::new(NodeId(i), rng.random_range(10.0..100.0));
            node.reputation = rng.random_range(0.0..5.0);
            node
        })
        .collect();
    let config = form_committees(&nodes, &params, LeaderRule::UniformRandom, 1, &mut rng).unwrap();

    let max_bad = (c - 1) / 2;
    let mut corrupt: BTreeSet<NodeId> = BTreeSet::new();
    let mut malicious_leader = Vec::new();
    for committee in &config.committees {
        let bad_leader = rng.random_bool(0.5);
        malicious_leader.push(bad_leader);
        let mut others: Vec<NodeId> = committee
            .members
            .iter()
            .copied()
            .filter(|&id| id != committee.leader)
            .collect();
        others.shuffle(&mut rng);
        let budget = rng.random_range(0..=max_bad).saturating_sub(usize::from(bad_leader));
        let mut chosen: Vec<NodeId> = others.into_iter().take(budget).collect();
        if committee.partial_set.iter().all(|id| chosen.contains(id)) {
            let spare = *committee.partial_set.choose(&mut rng).unwrap();
            chosen.retain(|&id| id != spare);
        }
        corrupt.extend(chosen);
        if bad_leader {
            corrupt.insert(committee.leader);
        }
    }
    let mut referee = config.referee.clone();
    referee.shuffle(&mut rng);
    corrupt.extend(referee.into_iter().take(rng.random_range(0..=max_bad)));

    let mut behaviors = Behaviors::default();
    for &id in &corrupt {
        nodes[id.index()].corrupt_from(1);
        let lb = *[LeaderBehavior::ForgeMemberList, LeaderBehavior::ProposeInvalidTx]
            .choose(&mut rng)
            .unwrap();
        behaviors.leaders.insert(id, lb);
        behaviors.members.insert(id, MemberBehavior::InvertVotes);
    }

    let ctx = RoundContext {
        nodes: &nodes,
        params: &params,
        round: 1,
        behaviors: &behaviors,
    };
    let mut registry = SignatureRegistry::new(n);
    let mut counters = MessageCounters::new();
    let exchange = run_semi_commitment_exchange(&ctx, &config, &mut registry, &mut counters).unwrap();
    for (k, committee) in config.committees.iter().enumerate() {
        let pending: Vec<Transaction> = (0..30u64)
            .map(|i| {
                let id = synthetic_tx_id(seed, k as u64 * 1000 + i);
                Transaction::synthetic(id, rng.random_range(1..=3), !rng.random_bool(0.2))
            })
            .collect();
        let (registered, witness) = pending_from_outcome(&exchange[k]);
        let mut crng = stream_rng(seed, 0x5afe, 1 + k as u64);
        let out = run_committee_round(
            &ctx,
            k,
            committee,
            &config.referee,
            registered,
            witness,
            &pending,
            &mut registry,
            &mut crng,
        )
        .unwrap();
        for id in &out.accepted {
            let proposed = out.txlist.txs.iter().find(|tx| tx.tx_id == *id);
            let known = pending.iter().find(|tx| tx.tx_id == *id);
            if !proposed.or(known).is_some_and(|tx| tx.valid) {
                tally.invalid_accepted += 1;
            }
        }
        tally.honest_evicted += out.evictions.iter().filter(|e| !corrupt.contains(&e.leader)).count() as u64;
        if malicious_leader[k] {
            tally.malicious_rounds += 1;
            if out.evictions.is_empty() || !out.agreed {
                tally.malicious_unresolved += 1;
            }
        }
    }
}

fn safety_liveness() -> Verdict {
    let mut tally = SafetyTally::default();
    for seed in 0..SAFETY_RUNS {
        safety_run(seed, &mut tally);
    }
    verdict(
        tally.invalid_accepted == 0 && tally.honest_evicted == 0 && tally.malicious_unresolved == 0,
        format!(
            "{SAFETY_RUNS} runs: {} invalid accepted, {} honest evictions, {} of {} malicious-leader rounds unresolved",
            tally.invalid_accepted, tally.honest_evicted, tally.malicious_unresolved, tally.malicious_rounds
        ),
    )
}

/// Mean voting-phase messages per common member in one round.
fn voting_per_member(c: usize) -> f64 {
    let mut config = SimConfig {
        scheme: Scheme::Random,
        rounds: 1,
        seed: 4,
        ..SimConfig::reference()
    };
    config.params = SystemParams {
        n: 11 * c,
        m: 10,
        c,
        lambda: c / 4,
        ..config.params
    };
    config.sharding = ShardingScheme::modulo(10).unwrap();
    let mut state = SimState::new(&config).unwrap();
    let report = run_round(&mut state, &config).unwrap();
    let leaders = report.config.leaders();
    let (mut sum, mut k) = (0u64, 0u64);
    for out in &report.outcomes {
        for &id in out.committee.members.iter().filter(|id| !leaders.contains(id)) {
            sum += out.counters.phase_messages(id, Phase::Voting);
            k += 1;
        }
    }
    sum as f64 / k as f64
}

/// Total semi-commitment-phase messages handled by the referee committee.
fn referee_semi_commitment(m: usize) -> f64 {
    let params = SystemParams::with_shape(m, 100, 40);
    let nodes: Vec<Node> = (0..params.n as u32).map(|i| Node::new(NodeId(i), 50.0)).collect();
    let config = form_committees(&nodes, &params, LeaderRule::UniformRandom, 1, &mut stream_rng(6, 0, 0)).unwrap();
    let behaviors = Behaviors::default();
    let ctx = RoundContext {
        nodes: &nodes,
        params: &params,
        round: 1,
        behaviors: &behaviors,
    };
    let mut registry = SignatureRegistry::new(params.n);
    let mut counters = MessageCounters::new();
    run_semi_commitment_exchange(&ctx, &config, &mut registry, &mut counters).unwrap();
    config
        .referee
        .iter()
        .map(|&id| counters.phase_messages(id, Phase::SemiCommitment))
        .sum::<u64>() as f64
}

fn complexity() -> Verdict {
    let voting = voting_per_member(100) / voting_per_member(50);
    let semi = referee_semi_commitment(20) / referee_semi_commitment(10);
    verdict(
        (VOTING_FACTOR.0..=VOTING_FACTOR.1).contains(&voting)
            && (SEMI_COMMITMENT_FACTOR.0..=SEMI_COMMITMENT_FACTOR.1).contains(&semi),
        format!("voting x{voting:.3} when c doubles, referee semi-commitment x{semi:.3} when m doubles"),
    )
}

fn determinism() -> Verdict {
    let dir = match tempfile::tempdir() {
        Ok(d) => d,
        Err(e) => return verdict(false, e.to_string()),
    };
    let cfg = dir.path().join("small.json");
    fs::write(
        &cfg,
        r#"{"params": {"m": 4, "c": 25, "lambda": 6}, "rounds": 20, "seed": 9,
            "adversary": {"f": 0.1, "d": 3, "leader_behavior": "forge_member_list"}}"#,
    )
    .unwrap();
    let dist = configs().join("btc_inputs.csv");
    let (cfg, dist) = (cfg.to_str().unwrap().to_string(), dist.to_str().unwrap().to_string());
    let commands: Vec<Vec<&str>> = vec![
        vec!["simulate", "--config", &cfg, "--jobs", "2"],
        vec![
            "analyze",
            "committee-failure",
            "--n",
            "4000",
            "--t",
            "1333",
            "--c",
            "10:500:10",
        ],
        vec![
            "analyze",
            "partial-set",
            "--f",
            "0.1:0.4:0.1",
            "--lambda",
            "10:40:10",
            "--m",
            "20",
        ],
        vec!["analyze", "ecfr", "--trials", "100", "--seed", "3", "--jobs", "4"],
        vec![
            "analyze",
            "lemma1",
            "--c",
            "50:100:50",
            "--trials",
            "200",
            "--jobs",
            "3",
        ],
        vec!["analyze", "cross-shard", "--dist", &dist, "--m", "1:100:1"],
        vec![
            "gen-txs", "--count", "2000", "--dist", &dist, "--rounds", "20", "--seed", "8",
        ],
    ];
    let mut differing = Vec::new();
    for (i, cmd) in commands.iter().enumerate() {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let target = dir.path().join(format!("out{i}_{rep}"));
            let mut args = cmd.clone();
            args.extend(["--out", target.to_str().unwrap()]);
            if let Err(e) = cli(&args) {
                return verdict(false, e);
            }
            let bytes = if target.is_dir() {
                let mut all = Vec::new();
                for name in ["metrics_reputation.csv", "metrics_random.csv"] {
                    all.extend(fs::read(target.join(name)).unwrap_or_default());
                }
                all
            } else {
                fs::read(&target).unwrap_or_default()
            };
            outputs.push(bytes);
        }
        if outputs[0].is_empty() || outputs[0] != outputs[1] {
            differing.push(cmd[..2].join(" "));
        }
    }
    verdict(
        differing.is_empty(),
        format!("{} commands run twice; differing: {differing:?}", commands.len()),
    )
}

fn main() -> ExitCode {
    let reference = reference_run();
    let checks: Vec<Check<'_>> = vec![
        ("hypergeometric anchor", Box::new(hypergeometric_anchor)),
        ("partial-set anchor", Box::new(partial_set_anchor)),
        ("bound dominance", Box::new(bound_dominance)),
        ("reshuffling keeps honest majorities", Box::new(reshuffle_majorities)),
        ("white-fraction bound", Box::new(white_fraction)),
        ("full reshuffle uniformity", Box::new(uniformity)),
        ("scoring golden values", Box::new(scoring)),
        ("leader resource ratio", Box::new(|| leader_ratio(&reference))),
        ("cumulative throughput ratio", Box::new(|| throughput_ratio(&reference))),
        ("cross-shard anchors", Box::new(cross_shard)),
        ("safety and liveness", Box::new(safety_liveness)),
        ("complexity order", Box::new(complexity)),
        ("determinism", Box::new(determinism)),
    ];
    let total = checks.len();
    let mut failed = 0;
    for (name, check) in checks {
        let v = check();
        if !v.pass {
            failed += 1;
        }
        println!("{} {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    println!("acceptance: {} of {total} criteria passed", total - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
