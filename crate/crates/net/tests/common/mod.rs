#![allow(dead_code)]

use std::time::Duration;

use num_rational::BigRational;
use parley_core::mechanism::{outcome_fixed, FixedReport, MechanismOutcome, MechanismParams, ScaledParams};
use parley_net::bench::run_loopback;
use parley_net::{NegotiationConfig, Role, SessionOptions, SessionReport, Tamper};

pub fn r(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

pub fn params(q: BigRational, k_theta: u32, k: u32) -> MechanismParams<BigRational> {
    MechanismParams::from_q(q, k_theta, k).unwrap()
}

pub fn pair(
    params: &MechanismParams<BigRational>,
    theta_v: u64,
    theta_a: u64,
) -> (NegotiationConfig, NegotiationConfig) {
    (
        NegotiationConfig::new(Role::Victim, params.clone(), Some(r(0, 1)), theta_v).unwrap(),
        NegotiationConfig::new(Role::Attacker, params.clone(), None, theta_a).unwrap(),
    )
}

pub fn seeded(tag: u64, role: u8) -> SessionOptions {
    let mut seed = [0u8; 32];
    seed[..8].copy_from_slice(&tag.to_le_bytes());
    seed[8] = role;
    SessionOptions {
        step_timeout: Duration::from_secs(5),
        ..SessionOptions::seeded(seed)
    }
}

pub fn with_tamper(mut o: SessionOptions, tamper: Tamper) -> SessionOptions {
    o.tamper = tamper;
    o
}

pub fn loopback(
    victim: &NegotiationConfig,
    attacker: &NegotiationConfig,
    vo: &SessionOptions,
    ao: &SessionOptions,
) -> (SessionReport, SessionReport) {
    run_loopback(victim, attacker, vo, ao).expect("loopback transport")
}

/// The plaintext reference for a completed seeded run.
pub fn expected(
    params: &MechanismParams<BigRational>,
    theta_v: u64,
    theta_a: u64,
    v: &SessionReport,
    a: &SessionReport,
) -> MechanismOutcome<u64> {
    let vs = v.result.as_ref().unwrap().shares.unwrap();
    let as_ = a.result.as_ref().unwrap().shares.unwrap();
    let scaled = ScaledParams::from_params(params).unwrap();
    outcome_fixed(
        &scaled,
        &FixedReport { theta_v, theta_a },
        vs.s0 ^ as_.s0,
        vs.s1 ^ as_.s1,
    )
    .unwrap()
}
