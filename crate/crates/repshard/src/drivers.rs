// SPDX-License-Identifier: Apache-2.0

//! Parallel and file-producing drivers around the core routines.

use rand::Rng as _;
use rayon::prelude::*;

use repshard_core::model::SystemParams;
use repshard_core::reshuffle::beta_for_alpha;
use repshard_core::rng::stream_rng;
use repshard_core::security::{
    ecfr_trial, lemma1_report, summarize, AdversaryStrategy, BoundReport, EcfrSummary, EcfrTrialStats,
};
use repshard_core::shard::{InputCountDistribution, MAX_INPUTS};
use repshard_core::sim::{run, synthetic_tx_id, Comparison, RoundMetrics, Scheme, SimConfig, TraceRecord};

use crate::error::{AppError, Result};

const STREAM_GEN_TXS: u64 = 0x6e7;

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| AppError::Usage(format!("cannot start worker pool: {e}")))
}

/// `trials` ECFR trials on up to `jobs` threads. Trial `i` always uses
/// stream `i`, so results do not depend on `jobs`.
pub fn ecfr_trials(
    params: &SystemParams,
    d: u32,
    strategy: AdversaryStrategy,
    trials: u64,
    seed: u64,
    jobs: usize,
) -> Result<(Vec<EcfrTrialStats>, EcfrSummary)> {
    let stats = pool(jobs)?.install(|| {
        (0..trials)
            .into_par_iter()
            .map(|i| ecfr_trial(params, d, strategy, seed, i))
            .collect::<repshard_core::Result<Vec<_>>>()
    })?;
    let summary = summarize(&stats, beta_for_alpha(params.alpha, d));
    Ok((stats, summary))
}

/// White-fraction bound check with trials spread over `jobs` threads.
pub fn lemma1(params: &SystemParams, d: u32, trials: u64, seed: u64, jobs: usize) -> Result<BoundReport> {
    let (_, summary) = ecfr_trials(params, d, AdversaryStrategy::RandomFraction, trials, seed, jobs)?;
    Ok(lemma1_report(&summary, params, d))
}

/// Runs the requested schemes, concurrently when `jobs > 1`.
pub fn simulate(config: &SimConfig, schemes: &[Scheme], jobs: usize) -> Result<Vec<Vec<RoundMetrics>>> {
    let one = |scheme: &Scheme| {
        run(&SimConfig {
            scheme: *scheme,
            ..config.clone()
        })
    };
    let out = if jobs > 1 {
        pool(jobs)?.install(|| schemes.par_iter().map(one).collect::<repshard_core::Result<Vec<_>>>())?
    } else {
        schemes.iter().map(one).collect::<repshard_core::Result<Vec<_>>>()?
    };
    Ok(out)
}

/// Reputation-versus-random pair with the schemes run concurrently.
pub fn comparison(config: &SimConfig, jobs: usize) -> Result<Comparison> {
    let mut runs = simulate(config, &[Scheme::Reputation, Scheme::Random], jobs)?;
    let random = runs.pop().expect("two runs");
    let reputation = runs.pop().expect("two runs");
    Ok(Comparison { reputation, random })
}

/// Synthetic trace of `count` transactions spread evenly over `rounds`
/// rounds. Input counts are drawn from `dist` restricted to at most twelve
/// inputs; ids are digests of `(seed, index)`.
pub fn generate_trace(
    count: u64,
    dist: &InputCountDistribution,
    rounds: u64,
    invalid_fraction: f64,
    seed: u64,
) -> Result<Vec<TraceRecord>> {
    if rounds == 0 {
        return Err(AppError::config("rounds", "rounds >= 1"));
    }
    if !(0.0..=1.0).contains(&invalid_fraction) {
        return Err(AppError::config("invalid_fraction", "must lie in [0, 1]"));
    }
    let dist = dist.truncated(MAX_INPUTS)?;
    let mut rng = stream_rng(seed, STREAM_GEN_TXS, 0);
    Ok((0..count)
        .map(|i| {
            let n_inputs = dist.sample(&mut rng);
            let valid = !rng.random_bool(invalid_fraction);
            TraceRecord {
                round: 1 + (u128::from(i) * u128::from(rounds) / u128::from(count)) as u64,
                tx_id: synthetic_tx_id(seed, i),
                n_inputs,
                valid,
            }
        })
        .collect())
}
