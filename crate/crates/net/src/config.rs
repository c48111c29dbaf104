use std::fmt;
use std::str::FromStr;

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use parley_core::config::{round_at, Config, ConfigError};
use parley_core::mechanism::{MechanismParams, ScaledParams};
use parley_core::MechanismError;
use thiserror::Error;

use crate::message::Hello;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Victim,
    Attacker,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Victim => "victim",
            Role::Attacker => "attacker",
        })
    }
}

impl FromStr for Role {
    type Err = NegotiationConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "victim" => Ok(Role::Victim),
            "attacker" => Ok(Role::Attacker),
            _ => Err(NegotiationConfigError::Role(s.to_string())),
        }
    }
}

#[derive(Debug, Error)]
pub enum NegotiationConfigError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Mechanism(#[from] MechanismError),
    #[error("unknown role `{0}`")]
    Role(String),
    #[error("config `role = {found}` does not match the {expected} command")]
    RoleMismatch { expected: Role, found: Role },
    #[error("theta_hex is required for the attacker")]
    MissingTheta,
    #[error("theta {value} does not fit in k_theta = {bits} bits")]
    ThetaRange { value: u64, bits: u32 },
    #[error("victim valuation needs theta_hex or t_e with a loss profile and r_max")]
    NoValuation,
    #[error("exchange time is past the end of the loss profile's representable rounds")]
    ExchangeTime,
    #[error("{0} must be a non-negative fraction with 64-bit numerator and denominator")]
    Unrepresentable(&'static str),
}

/// Everything one party needs to run a session.
#[derive(Debug, Clone, PartialEq)]
pub struct NegotiationConfig {
    pub role: Role,
    pub params: MechanismParams<BigRational>,
    /// `t_e`. `None` on an attacker that accepts whatever the victim proposes.
    pub exchange_time: Option<BigRational>,
    /// Private report, an integer below `2^k_θ`.
    pub theta: u64,
    pub peer: Option<String>,
}

impl NegotiationConfig {
    pub fn new(
        role: Role,
        params: MechanismParams<BigRational>,
        exchange_time: Option<BigRational>,
        theta: u64,
    ) -> Result<Self, NegotiationConfigError> {
        ScaledParams::from_params(&params)?;
        let bits = params.k_theta();
        if bits < 64 && theta >> bits != 0 {
            return Err(NegotiationConfigError::ThetaRange { value: theta, bits });
        }
        let cfg = Self {
            role,
            params,
            exchange_time,
            theta,
            peer: None,
        };
        cfg.hello()?;
        Ok(cfg)
    }

    /// Reads `q`, `p_bar`, `k`, `k_theta`, `t_e`, `theta_hex` and, for a
    /// victim without `theta_hex`, the loss model and `r_max` to evaluate
    /// `θ^V = ψ(t_e)`. An optional `role` key must agree with `role`;
    /// `peer` is kept as given.
    pub fn from_config(cfg: &Config, role: Role) -> Result<Self, NegotiationConfigError> {
        if let Some(found) = cfg.get("role") {
            let found: Role = found.parse()?;
            if found != role {
                return Err(NegotiationConfigError::RoleMismatch { expected: role, found });
            }
        }
        let params = cfg.mechanism_params()?;
        let exchange_time = cfg.exchange_time()?;
        let theta = match (cfg.hex_u64("theta_hex")?, role) {
            (Some(t), _) => t,
            (None, Role::Attacker) => return Err(NegotiationConfigError::MissingTheta),
            (None, Role::Victim) => {
                let t_e = exchange_time.clone().ok_or(NegotiationConfigError::NoValuation)?;
                if cfg.get("r_max").is_none() {
                    return Err(NegotiationConfigError::NoValuation);
                }
                valuation_at(&cfg.victim_params()?, &t_e)?
            }
        };
        let exchange_time = match role {
            Role::Victim => Some(exchange_time.unwrap_or_else(BigRational::zero)),
            Role::Attacker => exchange_time,
        };
        let mut out = Self::new(role, params, exchange_time, theta)?;
        out.peer = cfg.get("peer").map(str::to_string);
        Ok(out)
    }

    pub fn scaled(&self) -> ScaledParams {
        ScaledParams::from_params(&self.params).expect("validated at construction")
    }

    /// The victim's proposal. An attacker without `t_e` proposes zero.
    pub fn hello(&self) -> Result<Hello, NegotiationConfigError> {
        let hello = Hello {
            q: self.params.q().clone(),
            p_bar: self.params.p_bar().clone(),
            k: self.params.k(),
            k_theta: self.params.k_theta(),
            exchange_time: self.exchange_time.clone().unwrap_or_else(BigRational::zero),
        };
        let encoded = hello.encode();
        if encoded.is_none() {
            let name = if crate::message::rational_to_u64_pair(&hello.exchange_time).is_none() {
                "t_e"
            } else {
                "q and p_bar"
            };
            return Err(NegotiationConfigError::Unrepresentable(name));
        }
        Ok(hello)
    }

    /// Whether a proposal matches this party's own profile. A missing
    /// exchange time matches any.
    pub fn accepts(&self, proposal: &Hello) -> bool {
        let own = match self.hello() {
            Ok(h) => h,
            Err(_) => return false,
        };
        own.q == proposal.q
            && own.p_bar == proposal.p_bar
            && own.k == proposal.k
            && own.k_theta == proposal.k_theta
            && self
                .exchange_time
                .as_ref()
                .is_none_or(|t| *t == proposal.exchange_time)
    }
}

/// `ψ(t_e)`: the victim's reservation in the round in progress at `t_e`,
/// rounded down to an integer.
pub fn valuation_at(
    victim: &parley_core::VictimParams<BigRational>,
    t_e: &BigRational,
) -> Result<u64, NegotiationConfigError> {
    let round = round_at(victim.profile(), t_e).ok_or(NegotiationConfigError::ExchangeTime)?;
    victim
        .reservation(round)
        .floor()
        .to_integer()
        .to_u64()
        .ok_or(NegotiationConfigError::ExchangeTime)
}
