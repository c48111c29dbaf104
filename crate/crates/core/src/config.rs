//! Plain-text `key = value` configuration.
//!
//! ```text
//! # loss model
//! l0 = 0
//! round_length = 1
//! blocks = 1, 1, 1, 1, 1
//! tail = 0
//! r_max = 10
//! ```
//!
//! Numbers are exact decimals or fractions. Unknown keys are kept so that
//! callers can pick up their own settings.

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use thiserror::Error;

use crate::loss::{LossError, LossProfile, VictimParams};
use crate::mechanism::{MechanismError, MechanismParams};
use crate::money::{parse_rational, ParseMoneyError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: duplicate key `{key}`")]
    Duplicate { line: usize, key: String },
    #[error("missing key `{0}`")]
    Missing(&'static str),
    #[error("key `{key}`: {source}")]
    Number {
        key: String,
        #[source]
        source: ParseMoneyError,
    },
    #[error("key `{key}`: expected {expected}")]
    Invalid { key: String, expected: &'static str },
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Mechanism(#[from] MechanismError),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or(ConfigError::Syntax { line })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(ConfigError::Syntax { line });
            }
            if entries.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(ConfigError::Duplicate {
                    line,
                    key: key.to_string(),
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn rational(&self, key: &'static str) -> Result<Option<BigRational>, ConfigError> {
        self.get(key)
            .map(|v| {
                parse_rational(v).map_err(|source| ConfigError::Number {
                    key: key.to_string(),
                    source,
                })
            })
            .transpose()
    }

    pub fn require_rational(&self, key: &'static str) -> Result<BigRational, ConfigError> {
        self.rational(key)?.ok_or(ConfigError::Missing(key))
    }

    pub fn rational_list(&self, key: &'static str) -> Result<Option<Vec<BigRational>>, ConfigError> {
        let Some(v) = self.get(key) else {
            return Ok(None);
        };
        if v.trim().is_empty() {
            return Ok(Some(Vec::new()));
        }
        v.split(',')
            .map(|item| {
                parse_rational(item).map_err(|source| ConfigError::Number {
                    key: key.to_string(),
                    source,
                })
            })
            .collect::<Result<_, _>>()
            .map(Some)
    }

    pub fn bits(&self, key: &'static str) -> Result<Option<u32>, ConfigError> {
        self.get(key)
            .map(|v| {
                v.parse::<u32>().map_err(|_| ConfigError::Invalid {
                    key: key.to_string(),
                    expected: "a non-negative integer",
                })
            })
            .transpose()
    }

    /// Hex-encoded unsigned integer, with or without a `0x` prefix.
    pub fn hex_u64(&self, key: &'static str) -> Result<Option<u64>, ConfigError> {
        self.get(key)
            .map(|v| {
                let digits = v.strip_prefix("0x").or_else(|| v.strip_prefix("0X")).unwrap_or(v);
                u64::from_str_radix(digits, 16).map_err(|_| ConfigError::Invalid {
                    key: key.to_string(),
                    expected: "a hexadecimal integer",
                })
            })
            .transpose()
    }

    /// `l0`, `round_length`, `blocks` and `tail`. Missing entries default to
    /// zero, except `round_length` which defaults to one.
    pub fn loss_profile(&self) -> Result<LossProfile<BigRational>, ConfigError> {
        let l0 = self.rational("l0")?.unwrap_or_else(BigRational::zero);
        let round_length = self
            .rational("round_length")?
            .unwrap_or_else(|| BigRational::from_integer(1.into()));
        let blocks = self.rational_list("blocks")?.unwrap_or_default();
        let tail = self.rational("tail")?.unwrap_or_else(BigRational::zero);
        Ok(LossProfile::new(l0, blocks, tail, round_length)?)
    }

    pub fn victim_params(&self) -> Result<VictimParams<BigRational>, ConfigError> {
        Ok(VictimParams::new(self.require_rational("r_max")?, self.loss_profile()?)?)
    }

    /// `q` plus `k` and `k_theta`. `p_bar` is derived from `q` when absent.
    pub fn mechanism_params(&self) -> Result<MechanismParams<BigRational>, ConfigError> {
        let q = self.require_rational("q")?;
        let k = self.bits("k")?.ok_or(ConfigError::Missing("k"))?;
        let k_theta = self.bits("k_theta")?.ok_or(ConfigError::Missing("k_theta"))?;
        Ok(match self.rational("p_bar")? {
            Some(p_bar) => MechanismParams::new(q, p_bar, k_theta, k)?,
            None => MechanismParams::from_q(q, k_theta, k)?,
        })
    }

    /// Exchange time `t_e`, if present.
    pub fn exchange_time(&self) -> Result<Option<BigRational>, ConfigError> {
        self.rational("t_e")
    }
}

/// Round in progress at time `t`, `⌊t / T⌋`.
pub fn round_at(profile: &LossProfile<BigRational>, t: &BigRational) -> Option<usize> {
    if t < &BigRational::zero() {
        return None;
    }
    (t / profile.round_length()).floor().to_integer().to_usize()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    const SAMPLE: &str = "
        # victim
        l0 = 0.5
        round_length = 2
        blocks = 1, 1.5, 2/3
        tail = 4
        r_max = 10   # cap
        q = 0.25
        k = 8
        k_theta = 16
        theta_hex = 0x64
        t_e = 3
    ";

    #[test]
    fn parses_sample() {
        let cfg = Config::parse(SAMPLE).unwrap();
        let profile = cfg.loss_profile().unwrap();
        assert_eq!(profile.l0(), &r(1, 2));
        assert_eq!(profile.blocks(), &[r(1, 1), r(3, 2), r(2, 3)]);
        assert_eq!(profile.tail(), &r(4, 1));
        assert_eq!(cfg.victim_params().unwrap().r_max(), &r(10, 1));
        let mech = cfg.mechanism_params().unwrap();
        assert_eq!(mech.p_bar(), &r(2, 3));
        assert_eq!((mech.k(), mech.k_theta()), (8, 16));
        assert_eq!(cfg.hex_u64("theta_hex").unwrap(), Some(100));
        assert_eq!(round_at(&profile, &cfg.exchange_time().unwrap().unwrap()), Some(1));
    }

    #[test]
    fn reports_errors() {
        assert!(matches!(Config::parse("novalue"), Err(ConfigError::Syntax { line: 1 })));
        assert!(matches!(
            Config::parse("a = 1\na = 2"),
            Err(ConfigError::Duplicate { line: 2, .. })
        ));
        let cfg = Config::parse("blocks = 1, x").unwrap();
        assert!(matches!(cfg.loss_profile(), Err(ConfigError::Number { .. })));
        let cfg = Config::parse("blocks = 1, -1").unwrap();
        assert!(matches!(cfg.loss_profile(), Err(ConfigError::Loss(_))));
        let cfg = Config::parse("q = 0.25\nk = 8").unwrap();
        assert!(matches!(cfg.mechanism_params(), Err(ConfigError::Missing("k_theta"))));
        let cfg = Config::parse("q = 0.25\np_bar = 0.5\nk = 8\nk_theta = 8").unwrap();
        assert!(matches!(cfg.mechanism_params(), Err(ConfigError::Mechanism(_))));
    }

    #[test]
    fn empty_blocks_allowed() {
        let cfg = Config::parse("blocks =\ntail = 7\nr_max = 1").unwrap();
        assert_eq!(cfg.loss_profile().unwrap().total_value(), r(7, 1));
    }
}
