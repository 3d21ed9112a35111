// SPDX-License-Identifier: Apache-2.0

//! Command-line front end. Exit codes: 0 success, 2 usage or configuration
//! error, 3 failure writing an output.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use repshard_core::model::SystemParams;
use repshard_core::reshuffle::alpha_for_beta;
use repshard_core::security::{committee_failure_curve, partial_set_insecurity, AdversaryStrategy};
use repshard_core::shard::{cross_shard_fraction, InputCountDistribution};
use repshard_core::sim::Scheme;

use crate::config::{load_config, SchemeChoice};
use crate::drivers;
use crate::error::{AppError, Result, EXIT_USAGE};
use crate::formats::{self, Lemma1Row, PartialSetRow};

/// Inclusive sweep written `min:max:step`, or a single value.
#[derive(Clone, Debug, PartialEq)]
pub struct Range<T> {
    pub min: T,
    pub max: T,
    pub step: T,
}

fn parse_part<T: FromStr>(s: &str, what: &str) -> std::result::Result<T, String> {
    s.trim().parse().map_err(|_| format!("invalid {what} `{s}`"))
}

impl<T: FromStr + Copy> FromStr for Range<T> {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            [v] => {
                let v = parse_part(v, "value")?;
                Ok(Range {
                    min: v,
                    max: v,
                    step: v,
                })
            }
            [a, b, c] => Ok(Range {
                min: parse_part(a, "range start")?,
                max: parse_part(b, "range end")?,
                step: parse_part(c, "range step")?,
            }),
            _ => Err(format!("expected `min:max:step` or a single value, got `{s}`")),
        }
    }
}

impl Range<u64> {
    pub fn values(&self, flag: &str) -> Result<Vec<u64>> {
        if self.min > self.max {
            return Err(AppError::config(flag, "range start exceeds end"));
        }
        if self.min == self.max {
            return Ok(vec![self.min]);
        }
        if self.step == 0 {
            return Err(AppError::config(flag, "range step must be positive"));
        }
        Ok((self.min..=self.max).step_by(self.step as usize).collect())
    }
}

impl Range<f64> {
    pub fn values(&self, flag: &str) -> Result<Vec<f64>> {
        if !(self.min.is_finite() && self.max.is_finite() && self.step.is_finite()) || self.min > self.max {
            return Err(AppError::config(flag, "range must be finite with start <= end"));
        }
        if self.min == self.max {
            return Ok(vec![self.min]);
        }
        if self.step <= 0.0 {
            return Err(AppError::config(flag, "range step must be positive"));
        }
        let count = ((self.max - self.min) / self.step + 1e-9).floor() as u64;
        Ok((0..=count).map(|i| self.min + i as f64 * self.step).collect())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "repshard",
    version,
    about = "Reputation-driven sharded committee simulator and analysis toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the round-based simulator.
    #[command(after_help = "Writes metrics_<scheme>.csv into --out with header\n  \
        round,scheme,leader_resource_ratio,txs_processed,cumulative_txs,evictions,msgs_leader,msgs_member,msgs_referee\n\
        and prints a summary line to standard output.")]
    Simulate(SimulateArgs),
    /// Analytic bounds and Monte-Carlo experiments.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Write a synthetic transaction trace.
    #[command(after_help = "CSV header: round,tx_id,n_inputs,valid (tx_id hex, valid 0 or 1).\n\
        Input counts above twelve are dropped and the distribution renormalised.")]
    GenTxs(GenTxsArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON config file.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config's scheme.
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeChoice>,
    #[arg(long)]
    pub rounds: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "results")]
    pub out: PathBuf,
    /// Worker threads; both schemes run concurrently when above one.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Subcommand)]
pub enum AnalyzeCommand {
    /// Exact hypergeometric failure probability of one committee against the
    /// KL bound.
    #[command(after_help = "CSV header: c,exact_tail,kl_bound,c12_bound")]
    CommitteeFailure(CommitteeFailureArgs),
    /// Probability that a partial set holds no honest member.
    #[command(after_help = "CSV header: f,lambda,m,single,union")]
    PartialSet(PartialSetArgs),
    /// Monte-Carlo of reshuffling against a delayed adversary.
    #[command(after_help = "CSV header: trial,max_white_frac,Y,Z,any_committee_failed")]
    Ecfr(EcfrArgs),
    /// Empirical white-fraction event frequency against its analytic bound.
    #[command(after_help = "CSV header: c,alpha,d,m,beta,trials,empirical,std_error,bound,holds")]
    Lemma1(Lemma1Args),
    /// Fraction of cross-shard transactions against the shard count.
    #[command(after_help = "CSV header: m,fraction. --dist reads n_inputs,probability.")]
    CrossShard(CrossShardArgs),
}

#[derive(Debug, Args)]
pub struct OutArg {
    /// Output CSV; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CommitteeFailureArgs {
    /// Population size.
    #[arg(long)]
    pub n: u64,
    /// Malicious nodes in the population.
    #[arg(long)]
    pub t: u64,
    /// Committee sizes, `min:max:step` or a single value.
    #[arg(long)]
    pub c: Range<u64>,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct PartialSetArgs {
    /// Malicious fraction.
    #[arg(long, allow_hyphen_values = true)]
    pub f: Range<f64>,
    #[arg(long)]
    pub lambda: Range<u64>,
    /// Number of committees in the union bound.
    #[arg(long)]
    pub m: Range<u64>,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    WorstCase,
    Random,
}

impl From<StrategyArg> for AdversaryStrategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::WorstCase => AdversaryStrategy::WorstCaseCommittee,
            StrategyArg::Random => AdversaryStrategy::RandomFraction,
        }
    }
}

#[derive(Debug, Args)]
pub struct EcfrArgs {
    /// Number of common committees; n is (m + 1) * c.
    #[arg(long, default_value_t = 10)]
    pub m: usize,
    #[arg(long, default_value_t = 100)]
    pub c: usize,
    #[arg(long, default_value_t = 0.3)]
    pub f: f64,
    /// Rounds between designation and corruption.
    #[arg(long, default_value_t = 2)]
    pub d: u32,
    /// Marking probability; derived from --beta when absent.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Target white fraction used when --alpha is absent.
    #[arg(long, default_value_t = 0.125)]
    pub beta: f64,
    #[arg(long, value_enum, default_value_t = StrategyArg::WorstCase)]
    pub strategy: StrategyArg,
    #[arg(long, default_value_t = 1000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct Lemma1Args {
    #[arg(long, default_value_t = 10)]
    pub m: usize,
    #[arg(long, default_value = "100")]
    pub c: Range<u64>,
    #[arg(long, default_value = "0.6")]
    pub alpha: Range<f64>,
    #[arg(long, default_value_t = 2)]
    pub d: u32,
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct CrossShardArgs {
    /// `n_inputs,probability` CSV; the built-in Bitcoin-like mix when absent.
    #[arg(long)]
    pub dist: Option<PathBuf>,
    #[arg(long)]
    pub m: Range<u64>,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct GenTxsArgs {
    #[arg(long)]
    pub count: u64,
    /// `n_inputs,probability` CSV; the built-in Bitcoin-like mix when absent.
    #[arg(long)]
    pub dist: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub rounds: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.0)]
    pub invalid_fraction: f64,
    #[arg(long)]
    pub out: PathBuf,
}

fn write_to(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| AppError::output(dir, e))?;
            }
            let file = File::create(p).map_err(|e| AppError::output(p, e))?;
            let mut w = BufWriter::new(file);
            f(&mut w).and_then(|()| w.flush()).map_err(|e| AppError::output(p, e))
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock).map_err(|e| AppError::output("<stdout>", e))
        }
    }
}

fn distribution(path: Option<&Path>) -> Result<InputCountDistribution> {
    match path {
        Some(p) => formats::read_input_distribution(p),
        None => Ok(InputCountDistribution::bitcoin_like()),
    }
}

fn to_u32(v: u64, flag: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| AppError::config(flag, "value too large"))
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let mut loaded = load_config(&args.config)?;
    if let Some(r) = args.rounds {
        loaded.file.rounds = r;
    }
    if let Some(s) = args.seed {
        loaded.file.seed = s;
    }
    let choice = args.scheme.unwrap_or(loaded.file.scheme);
    let config = loaded.to_sim_config(Scheme::Reputation)?;
    let schemes = choice.schemes();
    let runs = drivers::simulate(&config, &schemes, args.jobs)?;

    fs::create_dir_all(&args.out).map_err(|e| AppError::output(&args.out, e))?;
    for (scheme, metrics) in schemes.iter().zip(&runs) {
        let path = args.out.join(format!("metrics_{}.csv", scheme.name()));
        write_to(Some(&path), |w| formats::write_metrics(metrics, w))?;
    }

    let mut summary = Vec::new();
    for (scheme, metrics) in schemes.iter().zip(&runs) {
        let last = metrics.last().expect("rounds >= 1");
        let evictions: u64 = metrics.iter().map(|m| m.evictions).sum();
        summary.push(format!(
            "{}: cumulative_txs={} leader_resource_ratio={:.4} evictions={}",
            scheme.name(),
            last.cumulative_txs,
            last.leader_resource_ratio,
            evictions
        ));
    }
    if let [rep, rnd] = runs.as_slice() {
        let (a, b) = (rep.last().unwrap().cumulative_txs, rnd.last().unwrap().cumulative_txs);
        let ratio = if b == 0 { f64::NAN } else { a as f64 / b as f64 };
        summary.push(format!("final cumulative ratio (reputation/random)={ratio:.4}"));
    }
    println!("{}", summary.join("; "));
    Ok(())
}

fn cmd_committee_failure(args: &CommitteeFailureArgs) -> Result<()> {
    let cs = args.c.values("c")?;
    let rows = committee_failure_curve(args.n, args.t, &cs)?;
    write_to(args.out.out.as_deref(), |w| formats::write_failure_curve(&rows, w))?;
    if args.out.out.is_some() {
        if let [row] = rows.as_slice() {
            println!(
                "c={} exact_tail={:e} kl_bound={:e}",
                row.c, row.exact_tail, row.kl_bound
            );
        }
    }
    Ok(())
}

fn cmd_partial_set(args: &PartialSetArgs) -> Result<()> {
    let mut rows = Vec::new();
    for f in args.f.values("f")? {
        for lambda in args.lambda.values("lambda")? {
            for m in args.m.values("m")? {
                let (lambda, m) = (to_u32(lambda, "lambda")?, to_u32(m, "m")?);
                let (single, union) = partial_set_insecurity(f, lambda, m)?;
                rows.push(PartialSetRow {
                    f,
                    lambda,
                    m,
                    single,
                    union,
                });
            }
        }
    }
    write_to(args.out.out.as_deref(), |w| formats::write_partial_set(&rows, w))
}

fn ecfr_params(m: usize, c: usize, f: f64, alpha: f64) -> SystemParams {
    SystemParams {
        f,
        alpha,
        ..SystemParams::with_shape(m, c, (c / 2).max(1).min(c.saturating_sub(1).max(1)))
    }
}

fn cmd_ecfr(args: &EcfrArgs) -> Result<()> {
    let alpha = match args.alpha {
        Some(a) => a,
        None => alpha_for_beta(args.beta, args.d)?,
    };
    let params = ecfr_params(args.m, args.c, args.f, alpha);
    let (stats, summary) =
        drivers::ecfr_trials(&params, args.d, args.strategy.into(), args.trials, args.seed, args.jobs)?;
    write_to(args.out.out.as_deref(), |w| formats::write_ecfr_trials(&stats, w))?;
    eprintln!(
        "alpha={alpha} beta={} trials={} failures={} white_exceeds_beta={} target_fully_malicious={}",
        summary.beta, summary.trials, summary.failures, summary.white_exceeds_beta, summary.target_fully_malicious
    );
    Ok(())
}

fn cmd_lemma1(args: &Lemma1Args) -> Result<()> {
    let mut rows = Vec::new();
    for c in args.c.values("c")? {
        for alpha in args.alpha.values("alpha")? {
            let params = ecfr_params(args.m, c as usize, 0.0, alpha);
            let report = drivers::lemma1(&params, args.d, args.trials, args.seed, args.jobs)?;
            rows.push(Lemma1Row::new(c as usize, alpha, args.d, args.m, &report));
        }
    }
    write_to(args.out.out.as_deref(), |w| formats::write_lemma1(&rows, w))
}

fn cmd_cross_shard(args: &CrossShardArgs) -> Result<()> {
    let dist = distribution(args.dist.as_deref())?;
    let rows = args
        .m
        .values("m")?
        .into_iter()
        .map(|m| Ok((to_u32(m, "m")?, cross_shard_fraction(&dist, to_u32(m, "m")?)?)))
        .collect::<Result<Vec<_>>>()?;
    write_to(args.out.out.as_deref(), |w| formats::write_cross_shard(&rows, w))
}

fn cmd_gen_txs(args: &GenTxsArgs) -> Result<()> {
    let dist = distribution(args.dist.as_deref())?;
    let rows = drivers::generate_trace(args.count, &dist, args.rounds, args.invalid_fraction, args.seed)?;
    write_to(Some(&args.out), |w| formats::write_trace(&rows, w))
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Analyze(AnalyzeCommand::CommitteeFailure(a)) => cmd_committee_failure(a),
        Command::Analyze(AnalyzeCommand::PartialSet(a)) => cmd_partial_set(a),
        Command::Analyze(AnalyzeCommand::Ecfr(a)) => cmd_ecfr(a),
        Command::Analyze(AnalyzeCommand::Lemma1(a)) => cmd_lemma1(a),
        Command::Analyze(AnalyzeCommand::CrossShard(a)) => cmd_cross_shard(a),
        Command::GenTxs(a) => cmd_gen_txs(a),
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
