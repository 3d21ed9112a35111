// SPDX-License-Identifier: Apache-2.0

//! Transaction-to-shard assignment, intra/cross classification and the
//! analytic cross-shard fraction.

use alloc::vec::Vec;

use rand::Rng;

use crate::digest::{sha256, Digest};
use crate::error::{Error, Result};
use crate::model::Transaction;

/// Largest input count kept by the synthetic generators.
pub const MAX_INPUTS: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShardMode {
    /// Top `log2(m)` bits of the id.
    PrefixBits,
    /// Id read as a big-endian integer, modulo `m`.
    Modulo,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShardingScheme {
    mode: ShardMode,
    shard_count: u32,
    salt: Option<Vec<u8>>,
}

impl ShardingScheme {
    pub fn new(mode: ShardMode, shard_count: u32, salt: Option<Vec<u8>>) -> Result<Self> {
        if shard_count == 0 {
            return Err(Error::param("shard_count", "must be positive"));
        }
        if mode == ShardMode::PrefixBits && !shard_count.is_power_of_two() {
            return Err(Error::param("shard_count", "prefix-bits mode requires a power of two"));
        }
        Ok(ShardingScheme {
            mode,
            shard_count,
            salt,
        })
    }

    pub fn modulo(shard_count: u32) -> Result<Self> {
        Self::new(ShardMode::Modulo, shard_count, None)
    }

    pub fn mode(&self) -> ShardMode {
        self.mode
    }

    pub fn shard_count(&self) -> u32 {
        self.shard_count
    }

    pub fn salt(&self) -> Option<&[u8]> {
        self.salt.as_deref()
    }
}

/// Shard owning `tx_id` under `scheme`; always in `[0, shard_count)`.
pub fn assign_shard(tx_id: &Digest, scheme: &ShardingScheme) -> u32 {
    let id = match &scheme.salt {
        Some(salt) => {
            let mut buf = Vec::with_capacity(salt.len() + 32);
            buf.extend_from_slice(salt);
            buf.extend_from_slice(tx_id.as_bytes());
            sha256(&buf)
        }
        None => *tx_id,
    };
    match scheme.mode {
        ShardMode::PrefixBits => id.top_bits(scheme.shard_count.trailing_zeros()) as u32,
        ShardMode::Modulo => id.mod_u64(u64::from(scheme.shard_count)) as u32,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TxClass {
    Intra,
    Cross,
}

/// A transaction is intra-shard iff every referenced input lives in its home
/// shard.
pub fn classify(tx: &Transaction, input_shards: &[u32], home_shard: u32) -> Result<TxClass> {
    if tx.n_inputs() == 0 {
        return Err(Error::Empty("transaction inputs"));
    }
    if input_shards.len() != tx.n_inputs() {
        return Err(Error::LengthMismatch {
            expected: tx.n_inputs(),
            actual: input_shards.len(),
        });
    }
    if input_shards.iter().all(|&s| s == home_shard) {
        Ok(TxClass::Intra)
    } else {
        Ok(TxClass::Cross)
    }
}

/// Probability mass over transaction input counts `1..=K`.
#[derive(Clone, Debug, PartialEq)]
pub struct InputCountDistribution {
    /// `probs[k - 1]` is the probability of exactly `k` inputs.
    probs: Vec<f64>,
}

impl InputCountDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Empty("input-count distribution"));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::param("probability", "must be finite and non-negative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::param("probability", "must sum to 1"));
        }
        Ok(InputCountDistribution { probs })
    }

    /// Builds from `(inputs, probability)` pairs; missing counts get zero mass.
    pub fn from_pairs(pairs: &[(usize, f64)]) -> Result<Self> {
        let max = pairs.iter().map(|(k, _)| *k).max().unwrap_or(0);
        if pairs.iter().any(|(k, _)| *k == 0) {
            return Err(Error::param("inputs", "input counts start at 1"));
        }
        let mut probs = alloc::vec![0.0; max];
        for &(k, p) in pairs {
            probs[k - 1] += p;
        }
        Self::new(probs)
    }

    /// Approximate Bitcoin input-count mix: mostly one to three inputs,
    /// 45/30/12/6 percent for one to four, and a halving tail over five to
    /// twelve that carries the remaining seven percent.
    pub fn bitcoin_like() -> Self {
        let head = [0.45, 0.30, 0.12, 0.06];
        let rest = 1.0 - head.iter().sum::<f64>();
        let weights: Vec<f64> = (0..MAX_INPUTS - head.len()).map(|i| libm::pow(0.5, i as f64)).collect();
        let norm: f64 = weights.iter().sum();
        let mut probs: Vec<f64> = head.to_vec();
        probs.extend(weights.iter().map(|w| rest * w / norm));
        InputCountDistribution { probs }
    }

    pub fn single_input() -> Self {
        InputCountDistribution {
            probs: alloc::vec![1.0],
        }
    }

    pub fn max_inputs(&self) -> usize {
        self.probs.len()
    }

    pub fn prob(&self, inputs: usize) -> f64 {
        match inputs {
            0 => 0.0,
            k => self.probs.get(k - 1).copied().unwrap_or(0.0),
        }
    }

    /// `(inputs, probability)` pairs in increasing input order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.probs.iter().enumerate().map(|(i, &p)| (i + 1, p))
    }

    pub fn mean(&self) -> f64 {
        self.pairs().map(|(k, p)| k as f64 * p).sum()
    }

    /// Same distribution restricted to at most `max` inputs and renormalised.
    pub fn truncated(&self, max: usize) -> Result<Self> {
        let kept: Vec<f64> = self.probs.iter().take(max).copied().collect();
        let total: f64 = kept.iter().sum();
        if total <= 0.0 {
            return Err(Error::Empty("input-count distribution after truncation"));
        }
        Self::new(kept.iter().map(|p| p / total).collect())
    }

    /// Draws an input count.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (k, p) in self.pairs() {
            acc += p;
            if u < acc {
                return k;
            }
        }
        // rounding slack: fall back to the largest count with mass
        self.pairs()
            .filter(|(_, p)| *p > 0.0)
            .map(|(k, _)| k)
            .last()
            .unwrap_or(1)
    }
}

impl Default for InputCountDistribution {
    fn default() -> Self {
        Self::bitcoin_like()
    }
}

/// Probability that a random transaction is cross-shard when each input's
/// shard is independent and uniform over `m` shards: `1 - sum_k p_k m^-k`.
pub fn cross_shard_fraction(dist: &InputCountDistribution, m: u32) -> Result<f64> {
    if m == 0 {
        return Err(Error::param("m", "must be at least 1"));
    }
    let inv = 1.0 / f64::from(m);
    let intra: f64 = dist.pairs().map(|(k, p)| p * libm::pow(inv, k as f64)).sum();
    Ok((1.0 - intra).clamp(0.0, 1.0))
}

/// One `(m, fraction)` row per shard count in `m_min..=m_max` stepping by `step`.
pub fn sweep_cross_shard(dist: &InputCountDistribution, m_min: u32, m_max: u32, step: u32) -> Result<Vec<(u32, f64)>> {
    if m_min == 0 || m_min > m_max {
        return Err(Error::param("m", "need 1 <= m_min <= m_max"));
    }
    if step == 0 {
        return Err(Error::param("step", "must be positive"));
    }
    (m_min..=m_max)
        .step_by(step as usize)
        .map(|m| Ok((m, cross_shard_fraction(dist, m)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn modulo_assignment() {
        let scheme = ShardingScheme::modulo(20).unwrap();
        assert_eq!(assign_shard(&Digest::from_u64(43), &scheme), 3);
        assert_eq!(assign_shard(&Digest::from_u64(43), &scheme), 3);
    }

    #[test]
    fn prefix_assignment() {
        let scheme = ShardingScheme::new(ShardMode::PrefixBits, 8, None).unwrap();
        let mut bytes = [0xffu8; 32];
        bytes[0] = 0b0100_0000;
        assert_eq!(assign_shard(&Digest(bytes), &scheme), 2);
        assert!(ShardingScheme::new(ShardMode::PrefixBits, 20, None).is_err());
        let single = ShardingScheme::new(ShardMode::PrefixBits, 1, None).unwrap();
        assert_eq!(assign_shard(&Digest(bytes), &single), 0);
    }

    #[test]
    fn salt_rehashes() {
        let id = Digest::from_u64(43);
        let salted = ShardingScheme::new(ShardMode::Modulo, 1 << 20, Some(b"s1".to_vec())).unwrap();
        let expected = {
            let mut buf = b"s1".to_vec();
            buf.extend_from_slice(id.as_bytes());
            sha256(&buf).mod_u64(1 << 20) as u32
        };
        assert_eq!(assign_shard(&id, &salted), expected);
    }

    #[test]
    fn classification() {
        let tx = Transaction::synthetic(Digest::from_u64(1), 3, true);
        assert_eq!(classify(&tx, &[4, 4, 4], 4).unwrap(), TxClass::Intra);
        assert_eq!(classify(&tx, &[4, 1, 4], 4).unwrap(), TxClass::Cross);
        assert!(matches!(classify(&tx, &[4, 4], 4), Err(Error::LengthMismatch { .. })));
        let empty = Transaction::synthetic(Digest::from_u64(2), 0, true);
        assert_eq!(classify(&empty, &[], 0), Err(Error::Empty("transaction inputs")));
    }

    #[test]
    fn single_input_fractions() {
        let d = InputCountDistribution::single_input();
        assert!((cross_shard_fraction(&d, 20).unwrap() - 0.95).abs() < 1e-15);
        assert_eq!(cross_shard_fraction(&d, 1).unwrap(), 0.0);
        assert_eq!(
            sweep_cross_shard(&d, 2, 4, 2).unwrap(),
            alloc::vec![(2, 0.5), (4, 0.75)]
        );
    }

    #[test]
    fn default_distribution_is_normalised() {
        let d = InputCountDistribution::bitcoin_like();
        assert_eq!(d.max_inputs(), MAX_INPUTS);
        let total: f64 = d.pairs().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(d.prob(2), 0.30);
        assert_eq!(d.prob(13), 0.0);
    }

    #[test]
    fn distribution_rejects_bad_mass() {
        assert!(InputCountDistribution::new(alloc::vec![0.5, 0.4]).is_err());
        assert!(InputCountDistribution::new(alloc::vec![1.5, -0.5]).is_err());
        assert!(InputCountDistribution::from_pairs(&[(0, 1.0)]).is_err());
        let d = InputCountDistribution::from_pairs(&[(2, 0.5), (1, 0.5)]).unwrap();
        assert_eq!(d.prob(1), 0.5);
    }

    #[test]
    fn sampling_stays_in_support() {
        let d = InputCountDistribution::from_pairs(&[(1, 0.0), (2, 0.5), (3, 0.5)]).unwrap();
        let mut rng = rng_from_seed(1);
        for _ in 0..1000 {
            let k = d.sample(&mut rng);
            assert!(k == 2 || k == 3);
        }
    }
}
