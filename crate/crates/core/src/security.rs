// SPDX-License-Identifier: Apache-2.0

//! Analytic bounds and Monte-Carlo experiments on committee security.
//!
//! Hypergeometric tails are summed exactly in log space. Binomial
//! coefficients are accumulated as sums of logarithms rather than through
//! log-gamma, which keeps the relative error near machine precision for the
//! population sizes used here.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use rand::seq::{IndexedRandom, SliceRandom};

use crate::error::{Error, Result};
use crate::model::{Node, NodeId, SystemParams};
use crate::reshuffle::{beta_for_alpha, ecfr_reassign, form_committees, LeaderRule};
use crate::rng::stream_rng;

const ECFR_STREAM: u64 = 0x0ecf;

/// `D(a || p) = a ln(a/p) + (1-a) ln((1-a)/(1-p))`.
pub fn kl_divergence(a: f64, p: f64) -> Result<f64> {
    let inside = |x: f64| x > 0.0 && x < 1.0;
    if !inside(a) {
        return Err(Error::param("a", "must lie strictly inside (0, 1)"));
    }
    if !inside(p) {
        return Err(Error::param("p", "must lie strictly inside (0, 1)"));
    }
    let d = a * libm::log(a / p) + (1.0 - a) * libm::log((1.0 - a) / (1.0 - p));
    Ok(d.max(0.0))
}

/// `ln C(n, k)`; negative infinity outside `0 <= k <= n`.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    (1..=k).map(|i| libm::log((n - k + i) as f64 / i as f64)).sum()
}

fn check_hypergeometric(t: u64, n: u64, c: u64) -> Result<()> {
    if t > n {
        return Err(Error::param("t", "must not exceed n"));
    }
    if c == 0 || c > n {
        return Err(Error::param("c", "must lie in [1, n]"));
    }
    Ok(())
}

/// `ln P[X = x]` for `X ~ H(t, n, c)`: `x` malicious in a uniform `c`-sample
/// from `n` nodes of which `t` are malicious.
pub fn ln_hypergeometric_pmf(t: u64, n: u64, c: u64, x: u64) -> f64 {
    if x > t || x > c || c - x > n - t {
        return f64::NEG_INFINITY;
    }
    ln_binomial(t, x) + ln_binomial(n - t, c - x) - ln_binomial(n, c)
}

pub fn hypergeometric_pmf(t: u64, n: u64, c: u64, x: u64) -> Result<f64> {
    check_hypergeometric(t, n, c)?;
    Ok(libm::exp(ln_hypergeometric_pmf(t, n, c, x)))
}

/// `P[X >= threshold]` for `X ~ H(t, n, c)`, by exact summation in log space.
pub fn hypergeometric_tail_exact(t: u64, n: u64, c: u64, threshold: u64) -> Result<f64> {
    check_hypergeometric(t, n, c)?;
    let lo = c.saturating_sub(n - t).max(threshold);
    let hi = t.min(c);
    if lo > hi {
        return Ok(0.0);
    }
    // successive ratios P[x+1] / P[x] keep the work linear in the support
    let mut terms = Vec::with_capacity((hi - lo + 1) as usize);
    let mut ln_p = ln_hypergeometric_pmf(t, n, c, lo);
    terms.push(ln_p);
    for x in lo..hi {
        let num = ((t - x) * (c - x)) as f64;
        let den = ((x + 1) * (n - t + x + 1 - c)) as f64;
        ln_p += libm::log(num / den);
        terms.push(ln_p);
    }
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = terms.iter().map(|l| libm::exp(l - max)).sum();
    Ok((libm::exp(max) * sum).clamp(0.0, 1.0))
}

/// Smallest malicious count that breaks an honest majority: `ceil(c / 2)`.
pub fn failure_threshold(c: u64) -> u64 {
    c.div_ceil(2)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FailureRow {
    pub c: u64,
    pub exact_tail: f64,
    /// `exp(-D(1/2 || f) c)`; 1 when `f >= 1/2`.
    pub kl_bound: f64,
    /// `exp(-c / 12)`, listed for comparison; not implied by the KL bound.
    pub c12_bound: f64,
}

/// Exact sampling failure probability and its Chernoff-Hoeffding bound for
/// each committee size.
pub fn committee_failure_curve(n: u64, t: u64, c_values: &[u64]) -> Result<Vec<FailureRow>> {
    if n == 0 {
        return Err(Error::param("n", "must be positive"));
    }
    let f = t as f64 / n as f64;
    let rate = if f > 0.0 && f < 0.5 {
        Some(kl_divergence(0.5, f)?)
    } else {
        None
    };
    c_values
        .iter()
        .map(|&c| {
            let exact_tail = hypergeometric_tail_exact(t, n, c, failure_threshold(c))?;
            let kl_bound = match rate {
                Some(d) => libm::exp(-d * c as f64),
                None if f == 0.0 => 0.0,
                None => 1.0,
            };
            Ok(FailureRow {
                c,
                exact_tail,
                kl_bound,
                c12_bound: libm::exp(-(c as f64) / 12.0),
            })
        })
        .collect()
}

/// Probability that one partial set of `lambda` uniform members is fully
/// malicious (`f^lambda`) and the union bound over `m` committees.
pub fn partial_set_insecurity(f: f64, lambda: u32, m: u32) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&f) {
        return Err(Error::param("f", "must lie in [0, 1)"));
    }
    if lambda == 0 {
        return Err(Error::param("lambda", "must be at least 1"));
    }
    if m == 0 {
        return Err(Error::param("m", "must be at least 1"));
    }
    let single = libm::pow(f, f64::from(lambda));
    Ok((single, f64::from(m) * single))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdversaryStrategy {
    /// Corrupts the whole membership of committee 0 at round `r`, and enough
    /// uniformly chosen other nodes to reach `f n` in total.
    WorstCaseCommittee,
    /// Corrupts `f n` uniformly chosen nodes.
    RandomFraction,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CommitteeTrial {
    /// First-time marks per round offset `1..=d`, among members at the start
    /// of that round.
    pub newly_marked: Vec<usize>,
    pub white: usize,
    pub black: usize,
    pub corrupted_black: usize,
    pub malicious: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EcfrTrialStats {
    pub trial: u64,
    pub committees: Vec<CommitteeTrial>,
    pub referee_malicious: usize,
    /// Nodes marked at least once.
    pub y: usize,
    /// Marked nodes that are corrupt at round `r + d`.
    pub z: usize,
    pub max_white_frac: f64,
    /// Some common committee or the referee holds at least `c / 2` corrupt
    /// members.
    pub any_committee_failed: bool,
    pub target_fully_malicious: bool,
}

/// One trial: a uniform secure configuration at round `r`, the adversary's
/// designation at `r`, `d` rounds of `alpha`-ECFR over all members of the
/// common committees, then corruption takes effect.
pub fn ecfr_trial(
    params: &SystemParams,
    d: u32,
    strategy: AdversaryStrategy,
    seed: u64,
    trial: u64,
) -> Result<EcfrTrialStats> {
    let params = SystemParams {
        d: d.max(1),
        ..params.clone()
    };
    params.validate()?;
    let (n, c) = (params.n, params.c);
    let mut rng = stream_rng(seed, ECFR_STREAM, trial);
    let nodes: Vec<Node> = (0..n as u32).map(|i| Node::new(NodeId(i), 1.0)).collect();
    let config = form_committees(&nodes, &params, LeaderRule::UniformRandom, 0, &mut rng)?;

    let t = libm::round(params.f * n as f64) as usize;
    let mut corrupt = alloc::vec![false; n];
    let target = &config.committees[0].members;
    let mut pool: Vec<NodeId> = match strategy {
        AdversaryStrategy::WorstCaseCommittee => {
            for id in target.iter().take(t) {
                corrupt[id.index()] = true;
            }
            (0..n as u32)
                .map(NodeId)
                .filter(|id| !corrupt[id.index()] && !target.contains(id))
                .collect()
        }
        AdversaryStrategy::RandomFraction => (0..n as u32).map(NodeId).collect(),
    };
    let already = corrupt.iter().filter(|&&b| b).count();
    pool.shuffle(&mut rng);
    for id in pool.iter().take(t.saturating_sub(already)) {
        corrupt[id.index()] = true;
    }

    let mut groups: Vec<Vec<NodeId>> = config.committees.iter().map(|c| c.members.clone()).collect();
    let mut black: BTreeSet<NodeId> = BTreeSet::new();
    let mut newly: Vec<Vec<usize>> = alloc::vec![Vec::with_capacity(d as usize); groups.len()];
    for _ in 0..d {
        let owner: Vec<(NodeId, usize)> = groups
            .iter()
            .enumerate()
            .flat_map(|(k, g)| g.iter().map(move |&id| (id, k)))
            .collect();
        let marked = ecfr_reassign(&mut groups, |_| true, params.alpha, &mut rng);
        let marked: BTreeSet<NodeId> = marked.into_iter().collect();
        let mut counts = alloc::vec![0usize; groups.len()];
        for (id, k) in owner {
            if marked.contains(&id) && !black.contains(&id) {
                counts[k] += 1;
            }
        }
        for (k, cnt) in counts.into_iter().enumerate() {
            newly[k].push(cnt);
        }
        black.extend(marked);
    }

    let committees: Vec<CommitteeTrial> = groups
        .iter()
        .zip(newly)
        .map(|(g, newly_marked)| {
            let blk = g.iter().filter(|id| black.contains(id)).count();
            CommitteeTrial {
                newly_marked,
                white: g.len() - blk,
                black: blk,
                corrupted_black: g.iter().filter(|id| black.contains(id) && corrupt[id.index()]).count(),
                malicious: g.iter().filter(|id| corrupt[id.index()]).count(),
            }
        })
        .collect();
    let referee_malicious = config.referee.iter().filter(|id| corrupt[id.index()]).count();
    let breaks = |mal: usize| 2 * mal >= c;
    Ok(EcfrTrialStats {
        trial,
        y: black.len(),
        z: black.iter().filter(|id| corrupt[id.index()]).count(),
        max_white_frac: committees
            .iter()
            .map(|ct| ct.white as f64 / c as f64)
            .fold(0.0, f64::max),
        any_committee_failed: committees.iter().any(|ct| breaks(ct.malicious)) || breaks(referee_malicious),
        target_fully_malicious: committees[0].malicious == c,
        committees,
        referee_malicious,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EcfrSummary {
    pub trials: u64,
    pub beta: f64,
    pub white_exceeds_beta: u64,
    pub failures: u64,
    pub target_fully_malicious: u64,
}

impl EcfrSummary {
    pub fn white_exceeds_beta_rate(&self) -> f64 {
        rate(self.white_exceeds_beta, self.trials)
    }

    pub fn failure_rate(&self) -> f64 {
        rate(self.failures, self.trials)
    }

    pub fn target_fully_malicious_rate(&self) -> f64 {
        rate(self.target_fully_malicious, self.trials)
    }
}

fn rate(k: u64, n: u64) -> f64 {
    if n == 0 {
        0.0
    } else {
        k as f64 / n as f64
    }
}

/// Folds trial results; order does not matter.
pub fn summarize<'a>(stats: impl IntoIterator<Item = &'a EcfrTrialStats>, beta: f64) -> EcfrSummary {
    let mut s = EcfrSummary {
        beta,
        ..EcfrSummary::default()
    };
    for t in stats {
        s.trials += 1;
        s.white_exceeds_beta += u64::from(t.max_white_frac > beta);
        s.failures += u64::from(t.any_committee_failed);
        s.target_fully_malicious += u64::from(t.target_fully_malicious);
    }
    s
}

/// Runs `trials` independent trials sequentially. Trial `i` draws from its
/// own stream, so any partition of the indices gives the same results.
pub fn ecfr_montecarlo(
    params: &SystemParams,
    d: u32,
    strategy: AdversaryStrategy,
    trials: u64,
    seed: u64,
) -> Result<(Vec<EcfrTrialStats>, EcfrSummary)> {
    let stats = (0..trials)
        .map(|i| ecfr_trial(params, d, strategy, seed, i))
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(&stats, beta_for_alpha(params.alpha, d));
    Ok((stats, summary))
}

/// `m d exp(-(1/2) ((1 - alpha) alpha / (1 + alpha)) beta c)` with
/// `beta = (1 - alpha^2)^d`.
pub fn lemma1_bound(m: usize, d: u32, alpha: f64, c: usize) -> f64 {
    let beta = beta_for_alpha(alpha, d);
    let rate = 0.5 * ((1.0 - alpha) * alpha / (1.0 + alpha)) * beta * c as f64;
    m as f64 * f64::from(d) * libm::exp(-rate)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundReport {
    pub exact_value: f64,
    pub bound_value: f64,
    /// One binomial standard error of `exact_value`.
    pub std_error: f64,
    pub trials: u64,
    pub beta: f64,
}

impl BoundReport {
    /// Empirical value within `k` standard errors of the bound.
    pub fn holds_within(&self, k: f64) -> bool {
        self.exact_value <= self.bound_value + k * self.std_error
    }
}

/// Empirical frequency of "some committee keeps more than a `beta` fraction
/// white after `d` rounds", next to the analytic bound.
pub fn lemma1_check(params: &SystemParams, d: u32, trials: u64, seed: u64) -> Result<BoundReport> {
    let (_, summary) = ecfr_montecarlo(params, d, AdversaryStrategy::RandomFraction, trials, seed)?;
    Ok(lemma1_report(&summary, params, d))
}

/// Builds the report from an already computed summary.
pub fn lemma1_report(summary: &EcfrSummary, params: &SystemParams, d: u32) -> BoundReport {
    let p = summary.white_exceeds_beta_rate();
    let trials = summary.trials.max(1) as f64;
    BoundReport {
        exact_value: p,
        bound_value: lemma1_bound(params.m, d, params.alpha, params.c),
        std_error: libm::sqrt(p * (1.0 - p) / trials),
        trials: summary.trials,
        beta: summary.beta,
    }
}

/// Uniformly random `k`-subset of `0..n`, sorted; handy for tests and tools
/// that need a designated corruption set.
pub fn random_subset<R: rand::Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Vec<NodeId> {
    let ids: Vec<NodeId> = (0..n as u32).map(NodeId).collect();
    let mut out: Vec<NodeId> = ids.choose_multiple(rng, k).copied().collect();
    out.sort_unstable();
    out
}
