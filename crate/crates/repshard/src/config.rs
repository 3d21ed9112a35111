// SPDX-License-Identifier: Apache-2.0

//! JSON simulation config. Field names mirror the simulator's; every field
//! has a default, so `{}` is a valid document describing the reference run.
//! Relative file paths are resolved against the config file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use repshard_core::committee::{LeaderBehavior, MemberBehavior};
use repshard_core::model::SystemParams;
use repshard_core::shard::{InputCountDistribution, ShardMode, ShardingScheme};
use repshard_core::sim::{AdversaryConfig, Formation, Injection, ResourceDist, Scheme, SimConfig, TxSource};

use crate::error::{AppError, Result};
use crate::formats;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SchemeChoice {
    #[default]
    Both,
    Reputation,
    Random,
}

impl SchemeChoice {
    pub fn schemes(self) -> Vec<Scheme> {
        match self {
            SchemeChoice::Both => vec![Scheme::Reputation, Scheme::Random],
            SchemeChoice::Reputation => vec![Scheme::Reputation],
            SchemeChoice::Random => vec![Scheme::Random],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamsFile {
    /// Derived as `(m + 1) * c` when absent.
    pub n: Option<usize>,
    pub m: usize,
    pub c: usize,
    pub lambda: usize,
    pub f: f64,
    pub alpha: f64,
    pub d: u32,
    pub sigma: f64,
    pub omega: f64,
    pub p_l: f64,
    pub p_m: f64,
}

impl Default for ParamsFile {
    fn default() -> Self {
        let p = SystemParams::reference_simulation();
        ParamsFile {
            n: None,
            m: p.m,
            c: p.c,
            lambda: p.lambda,
            f: p.f,
            alpha: p.alpha,
            d: p.d,
            sigma: p.sigma,
            omega: p.omega,
            p_l: p.p_l,
            p_m: p.p_m,
        }
    }
}

impl ParamsFile {
    pub fn to_params(&self) -> SystemParams {
        SystemParams {
            n: self.n.unwrap_or((self.m + 1) * self.c),
            m: self.m,
            c: self.c,
            lambda: self.lambda,
            f: self.f,
            alpha: self.alpha,
            d: self.d,
            sigma: self.sigma,
            omega: self.omega,
            p_l: self.p_l,
            p_m: self.p_m,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResourceDistFile {
    pub a: f64,
    pub b: f64,
    pub scale: f64,
}

impl Default for ResourceDistFile {
    fn default() -> Self {
        let d = ResourceDist::default();
        ResourceDistFile {
            a: d.a,
            b: d.b,
            scale: d.scale,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TxSourceFile {
    Synthetic {
        /// `n_inputs,probability` CSV; the built-in Bitcoin-like mix if absent.
        #[serde(default)]
        dist: Option<PathBuf>,
        #[serde(default = "default_per_round")]
        per_round: usize,
        #[serde(default)]
        invalid_fraction: f64,
    },
    Trace {
        path: PathBuf,
    },
}

fn default_per_round() -> usize {
    500
}

impl Default for TxSourceFile {
    fn default() -> Self {
        TxSourceFile::Synthetic {
            dist: None,
            per_round: default_per_round(),
            invalid_fraction: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShardModeFile {
    #[default]
    Modulo,
    PrefixBits,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShardingFile {
    pub mode: ShardModeFile,
    pub salt: Option<String>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeaderBehaviorFile {
    #[default]
    Honest,
    ForgeMemberList,
    InconsistentDigest,
    ProposeInvalidTx,
    EmptyProposal,
}

impl From<LeaderBehaviorFile> for LeaderBehavior {
    fn from(b: LeaderBehaviorFile) -> Self {
        match b {
            LeaderBehaviorFile::Honest => LeaderBehavior::Honest,
            LeaderBehaviorFile::ForgeMemberList => LeaderBehavior::ForgeMemberList,
            LeaderBehaviorFile::InconsistentDigest => LeaderBehavior::InconsistentDigest,
            LeaderBehaviorFile::ProposeInvalidTx => LeaderBehavior::ProposeInvalidTx,
            LeaderBehaviorFile::EmptyProposal => LeaderBehavior::EmptyProposal,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemberBehaviorFile {
    #[default]
    Honest,
    InvertVotes,
    AllUnknown,
}

impl From<MemberBehaviorFile> for MemberBehavior {
    fn from(b: MemberBehaviorFile) -> Self {
        match b {
            MemberBehaviorFile::Honest => MemberBehavior::Honest,
            MemberBehaviorFile::InvertVotes => MemberBehavior::InvertVotes,
            MemberBehaviorFile::AllUnknown => MemberBehavior::AllUnknown,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InjectionFile {
    pub round: u64,
    pub committee: usize,
    pub behavior: LeaderBehaviorFile,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdversaryFile {
    pub f: f64,
    pub d: u32,
    pub leader_behavior: LeaderBehaviorFile,
    pub member_behavior: MemberBehaviorFile,
    pub injections: Vec<InjectionFile>,
}

impl Default for AdversaryFile {
    fn default() -> Self {
        AdversaryFile {
            f: 0.0,
            d: 1,
            leader_behavior: LeaderBehaviorFile::default(),
            member_behavior: MemberBehaviorFile::default(),
            injections: Vec::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormationFile {
    #[default]
    Uniform,
    Ecfr,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub params: ParamsFile,
    pub rounds: u64,
    pub scheme: SchemeChoice,
    pub formation: FormationFile,
    pub resource_dist: ResourceDistFile,
    pub tx_source: TxSourceFile,
    pub sharding: ShardingFile,
    pub adversary: AdversaryFile,
    pub total_reward_per_round: f64,
    pub seed: u64,
}

impl Default for ConfigFile {
    fn default() -> Self {
        ConfigFile {
            params: ParamsFile::default(),
            rounds: 1000,
            scheme: SchemeChoice::Both,
            formation: FormationFile::Uniform,
            resource_dist: ResourceDistFile::default(),
            tx_source: TxSourceFile::default(),
            sharding: ShardingFile::default(),
            adversary: AdversaryFile::default(),
            total_reward_per_round: 100.0,
            seed: 0,
        }
    }
}

/// A parsed config plus the directory its relative paths refer to.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub file: ConfigFile,
    pub base_dir: PathBuf,
}

/// Parses a JSON document; errors name the offending field path.
pub fn parse_config(text: &str) -> Result<ConfigFile> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." { "config".to_string() } else { path };
        AppError::config(field, e.into_inner().to_string())
    })
}

pub fn load_config(path: &Path) -> Result<LoadedConfig> {
    let text = fs::read_to_string(path).map_err(|e| AppError::Input {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let file = parse_config(&text)?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(LoadedConfig { file, base_dir })
}

impl LoadedConfig {
    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Builds the simulator config for `scheme`, reading any referenced
    /// files, and validates it.
    pub fn to_sim_config(&self, scheme: Scheme) -> Result<SimConfig> {
        let f = &self.file;
        let params = f.params.to_params();
        let tx_source = match &f.tx_source {
            TxSourceFile::Synthetic {
                dist,
                per_round,
                invalid_fraction,
            } => TxSource::Synthetic {
                inputs: match dist {
                    Some(p) => formats::read_input_distribution(&self.resolve(p))?,
                    None => InputCountDistribution::bitcoin_like(),
                },
                per_round: *per_round,
                invalid_fraction: *invalid_fraction,
            },
            TxSourceFile::Trace { path } => TxSource::Trace(formats::read_trace(&self.resolve(path))?),
        };
        let mode = match f.sharding.mode {
            ShardModeFile::Modulo => ShardMode::Modulo,
            ShardModeFile::PrefixBits => ShardMode::PrefixBits,
        };
        let shard_count = u32::try_from(params.m).map_err(|_| AppError::config("params.m", "too large"))?;
        let sharding = ShardingScheme::new(
            mode,
            shard_count,
            f.sharding.salt.as_ref().map(|s| s.as_bytes().to_vec()),
        )
        .map_err(|e| prefix_field("sharding", e))?;
        let config = SimConfig {
            params,
            rounds: f.rounds,
            scheme,
            formation: match f.formation {
                FormationFile::Uniform => Formation::Uniform,
                FormationFile::Ecfr => Formation::Ecfr,
            },
            resources: ResourceDist {
                a: f.resource_dist.a,
                b: f.resource_dist.b,
                scale: f.resource_dist.scale,
            },
            tx_source,
            sharding,
            adversary: AdversaryConfig {
                f: f.adversary.f,
                d: f.adversary.d,
                leader_behavior: f.adversary.leader_behavior.into(),
                member_behavior: f.adversary.member_behavior.into(),
                injections: f
                    .adversary
                    .injections
                    .iter()
                    .map(|i| Injection {
                        round: i.round,
                        committee: i.committee,
                        behavior: i.behavior.into(),
                    })
                    .collect(),
            },
            total_reward_per_round: f.total_reward_per_round,
            seed: f.seed,
        };
        config.validate().map_err(|e| match e {
            repshard_core::Error::InvalidParameter { field, reason } => {
                let known_params = [
                    "n", "m", "c", "lambda", "f", "alpha", "d", "sigma", "omega", "p_l", "p_m",
                ];
                let field = if known_params.contains(&field) {
                    format!("params.{field}")
                } else {
                    field.to_string()
                };
                AppError::config(field, reason)
            }
            other => other.into(),
        })?;
        Ok(config)
    }
}

fn prefix_field(prefix: &str, e: repshard_core::Error) -> AppError {
    match e {
        repshard_core::Error::InvalidParameter { field, reason } => {
            AppError::config(format!("{prefix}.{field}"), reason)
        }
        other => other.into(),
    }
}
