//! Game-theoretic core of the negotiation stack.
//!
//! Every analytical routine is generic over [`Money`], so the same code runs
//! with exact rationals ([`Rational`]) or with floats.

pub mod bargaining;
pub mod config;
pub mod loss;
pub mod mechanism;
pub mod money;
pub mod stage_game;

pub use bargaining::{
    backward_induction_offers, closed_form_offer, closed_form_schedule, determine_horizon, rubinstein_split,
    BargainingError, BargainingInstance, OfferSchedule,
};
pub use loss::{LossError, LossProfile, Settlement, VictimParams};
pub use mechanism::{
    outcome_fixed, outcome_real, FixedReport, MechanismError, MechanismOutcome, MechanismParams, Report,
    ScaledParams,
};
pub use money::{format_decimal, format_rational, parse_rational, Money};
pub use stage_game::{spne, AttackerAction, ReputationParams, StageSolution, VictimAction};

pub type Rational = num_rational::BigRational;

pub type ExactLossProfile = LossProfile<Rational>;
pub type ExactVictimParams = VictimParams<Rational>;
pub type ExactBargaining = BargainingInstance<Rational>;
pub type ExactMechanismParams = MechanismParams<Rational>;
pub type ExactReputation = ReputationParams<Rational>;

pub type LossProfileF64 = LossProfile<f64>;
pub type VictimParamsF64 = VictimParams<f64>;
pub type BargainingF64 = BargainingInstance<f64>;
pub type MechanismParamsF64 = MechanismParams<f64>;
pub type ReputationF64 = ReputationParams<f64>;
