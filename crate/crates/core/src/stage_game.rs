//! The one-shot ransomware game with a reputation system.
//!
//! The victim moves first (pay or refuse) and the attacker then picks a
//! follow-up action. The final ransom `r_f` is taken as given; negotiation is
//! handled by [`crate::bargaining`].

use std::fmt;

use thiserror::Error;

use crate::money::Money;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VictimAction {
    /// Pay the ransom.
    V1,
    /// Refuse to pay.
    V2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AttackerAction {
    /// Paid: release the data.
    A4,
    /// Paid: delete the data anyway.
    A5,
    /// Unpaid: release the data.
    A6,
    /// Unpaid: punish by deleting.
    A7,
}

impl AttackerAction {
    /// The two actions available after `victim` moved, in tree order.
    pub fn responses_to(victim: VictimAction) -> [AttackerAction; 2] {
        match victim {
            VictimAction::V1 => [AttackerAction::A4, AttackerAction::A5],
            VictimAction::V2 => [AttackerAction::A6, AttackerAction::A7],
        }
    }
}

impl fmt::Display for VictimAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl fmt::Display for AttackerAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StageGameError {
    #[error("{attacker} is not a response to {victim}")]
    IllegalActionPair {
        victim: VictimAction,
        attacker: AttackerAction,
    },
    #[error("reputation parameter {field} must be non-negative")]
    NegativeParameter { field: &'static str },
    #[error("release cost must exceed deletion cost")]
    CostOrdering,
    #[error("ransom must be non-negative")]
    NegativeRansom,
}

/// Trust gain/loss, threat-credibility gain/loss and release/delete costs.
#[derive(Debug, Clone, PartialEq)]
pub struct ReputationParams<T> {
    pub tau_g: T,
    pub tau_l: T,
    pub kappa_g: T,
    pub kappa_l: T,
    pub c_r: T,
    pub c_d: T,
}

impl<T: Money> ReputationParams<T> {
    pub fn new(tau_g: T, tau_l: T, kappa_g: T, kappa_l: T, c_r: T, c_d: T) -> Result<Self, StageGameError> {
        let params = Self {
            tau_g,
            tau_l,
            kappa_g,
            kappa_l,
            c_r,
            c_d,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), StageGameError> {
        for (field, value) in [
            ("tau_g", &self.tau_g),
            ("tau_l", &self.tau_l),
            ("kappa_g", &self.kappa_g),
            ("kappa_l", &self.kappa_l),
            ("c_d", &self.c_d),
        ] {
            if value.is_negative() {
                return Err(StageGameError::NegativeParameter { field });
            }
        }
        if self.c_r <= self.c_d {
            return Err(StageGameError::CostOrdering);
        }
        Ok(())
    }

    fn tau(&self) -> T {
        self.tau_g.clone() + self.tau_l.clone()
    }

    fn kappa(&self) -> T {
        self.kappa_g.clone() + self.kappa_l.clone()
    }
}

/// Leaf payoffs `(victim, attacker)` of the game tree.
pub fn payoffs<T: Money>(
    rep: &ReputationParams<T>,
    r_f: &T,
    v: &T,
    victim: VictimAction,
    attacker: AttackerAction,
) -> Result<(T, T), StageGameError> {
    use AttackerAction::*;
    use VictimAction::*;
    let r_f = r_f.clone();
    let v = v.clone();
    let pair = match (victim, attacker) {
        (V1, A4) => (-r_f.clone(), r_f - rep.c_r.clone() + rep.tau_g.clone()),
        (V1, A5) => (-r_f.clone() - v, r_f - rep.c_d.clone() - rep.tau_l.clone()),
        (V2, A6) => (T::zero(), -rep.c_r.clone() - rep.kappa_l.clone() + rep.tau_g.clone()),
        (V2, A7) => (-v, -rep.c_d.clone() + rep.kappa_g.clone()),
        _ => return Err(StageGameError::IllegalActionPair { victim, attacker }),
    };
    Ok(pair)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageOutcome<T> {
    pub victim_action: VictimAction,
    pub attacker_action: AttackerAction,
    pub victim_payoff: T,
    pub attacker_payoff: T,
}

/// Premise of one of the two closed-form equilibrium results that the given
/// parameters fail to meet. Informational only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PremiseWarning {
    /// Neither the anonymous-attacker regime (no trust, positive credibility)
    /// nor the reputable regime (credibility > trust > 0) applies.
    NoKnownRegime,
    /// Reputable regime requires `τ_g + τ_l > c_r`.
    TrustBelowReleaseCost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `τ ≈ 0`, `κ > 0`: unique equilibrium is refusal and punishment.
    Anonymous,
    /// `κ > τ > 0`: payment is an equilibrium when the ransom is affordable.
    Reputable,
    Unclassified,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageSolution<T> {
    pub outcome: StageOutcome<T>,
    pub regime: Regime,
    pub warnings: Vec<PremiseWarning>,
}

/// Classifies the reputation parameters against the two known regimes.
pub fn classify<T: Money>(rep: &ReputationParams<T>) -> (Regime, Vec<PremiseWarning>) {
    let tau = rep.tau();
    let kappa = rep.kappa();
    if tau.approx_eq(&T::zero()) && kappa > T::zero() {
        return (Regime::Anonymous, Vec::new());
    }
    if kappa > tau && tau > T::zero() {
        let mut warnings = Vec::new();
        if tau <= rep.c_r {
            warnings.push(PremiseWarning::TrustBelowReleaseCost);
        }
        return (Regime::Reputable, warnings);
    }
    (Regime::Unclassified, vec![PremiseWarning::NoKnownRegime])
}

/// Attacker's best response after `victim` moved. Ties go to the release
/// action (A4 or A6).
pub fn attacker_best_response<T: Money>(
    rep: &ReputationParams<T>,
    r_f: &T,
    v: &T,
    victim: VictimAction,
) -> AttackerAction {
    let [release, delete] = AttackerAction::responses_to(victim);
    let (_, u_release) = payoffs(rep, r_f, v, victim, release).expect("legal pair");
    let (_, u_delete) = payoffs(rep, r_f, v, victim, delete).expect("legal pair");
    if u_delete > u_release {
        delete
    } else {
        release
    }
}

/// Subgame perfect equilibrium by backward induction.
///
/// The victim can only pay when `r_f < r_max`, and refuses at payoff
/// indifference. Together these make payment the equilibrium exactly when
/// `r_f < min(v, r_max)` in the reputable regime.
pub fn spne<T: Money>(
    rep: &ReputationParams<T>,
    r_f: &T,
    v: &T,
    r_max: &T,
) -> Result<StageSolution<T>, StageGameError> {
    if r_f.is_negative() {
        return Err(StageGameError::NegativeRansom);
    }
    let (regime, warnings) = classify(rep);

    let refuse = attacker_best_response(rep, r_f, v, VictimAction::V2);
    let refuse_payoffs = payoffs(rep, r_f, v, VictimAction::V2, refuse)?;

    let mut outcome = StageOutcome {
        victim_action: VictimAction::V2,
        attacker_action: refuse,
        victim_payoff: refuse_payoffs.0,
        attacker_payoff: refuse_payoffs.1,
    };

    if r_f < r_max {
        let pay = attacker_best_response(rep, r_f, v, VictimAction::V1);
        let (victim_payoff, attacker_payoff) = payoffs(rep, r_f, v, VictimAction::V1, pay)?;
        if victim_payoff > outcome.victim_payoff {
            outcome = StageOutcome {
                victim_action: VictimAction::V1,
                attacker_action: pay,
                victim_payoff,
                attacker_payoff,
            };
        }
    }

    Ok(StageSolution {
        outcome,
        regime,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rep(tau: f64, kappa: f64, c_r: f64, c_d: f64) -> ReputationParams<f64> {
        ReputationParams::new(tau, tau, kappa, kappa, c_r, c_d).unwrap()
    }

    #[test]
    fn leaf_payoffs() {
        let r = ReputationParams::new(2.0, 0.0, 1.0, 0.0, 1.0, 0.0).unwrap();
        assert_eq!(
            payoffs(&r, &5.0, &10.0, VictimAction::V1, AttackerAction::A4).unwrap(),
            (-5.0, 6.0)
        );
        assert_eq!(
            payoffs(&r, &5.0, &10.0, VictimAction::V2, AttackerAction::A7).unwrap(),
            (-10.0, 1.0)
        );
        let zero = ReputationParams::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        assert_eq!(zero, Err(StageGameError::CostOrdering));
        let tiny = ReputationParams::new(0.0, 0.0, 0.0, 0.0, 1e-9, 0.0).unwrap();
        let (vp, ap): (f64, f64) = payoffs(&tiny, &0.0, &0.0, VictimAction::V1, AttackerAction::A4).unwrap();
        assert_eq!(vp, 0.0);
        assert!(ap.abs() < 1e-6);
    }

    #[test]
    fn illegal_pairs_rejected() {
        let r = rep(1.0, 2.0, 1.0, 0.0);
        assert!(matches!(
            payoffs(&r, &1.0, &1.0, VictimAction::V1, AttackerAction::A7),
            Err(StageGameError::IllegalActionPair { .. })
        ));
        assert!(payoffs(&r, &1.0, &1.0, VictimAction::V2, AttackerAction::A4).is_err());
    }

    #[test]
    fn anonymous_attacker_gets_refused() {
        let r = rep(0.0, 3.0, 1.0, 0.0);
        for r_f in [0.5, 4.0, 50.0] {
            let s = spne(&r, &r_f, &10.0, &100.0).unwrap();
            assert_eq!(s.regime, Regime::Anonymous);
            assert_eq!(
                (s.outcome.victim_action, s.outcome.attacker_action),
                (VictimAction::V2, AttackerAction::A7)
            );
        }
    }

    #[test]
    fn reputable_attacker_gets_paid_when_affordable() {
        let r = rep(2.0, 3.0, 1.0, 0.0);
        let s = spne(&r, &4.0, &10.0, &10.0).unwrap();
        assert_eq!(s.regime, Regime::Reputable);
        assert!(s.warnings.is_empty());
        assert_eq!(
            (s.outcome.victim_action, s.outcome.attacker_action),
            (VictimAction::V1, AttackerAction::A4)
        );

        let s = spne(&r, &12.0, &10.0, &10.0).unwrap();
        assert_eq!(
            (s.outcome.victim_action, s.outcome.attacker_action),
            (VictimAction::V2, AttackerAction::A7)
        );
    }

    #[test]
    fn indifference_and_cap_boundaries_refuse() {
        let r = rep(2.0, 3.0, 1.0, 0.0);
        let at_v = spne(&r, &10.0, &10.0, &20.0).unwrap();
        assert_eq!(at_v.outcome.victim_action, VictimAction::V2);
        let at_cap = spne(&r, &8.0, &10.0, &8.0).unwrap();
        assert_eq!(at_cap.outcome.victim_action, VictimAction::V2);
        let below = spne(&r, &7.99, &10.0, &8.0).unwrap();
        assert_eq!(below.outcome.victim_action, VictimAction::V1);
    }

    #[test]
    fn premise_warnings() {
        let weak = rep(0.25, 3.0, 1.0, 0.0);
        let (regime, warnings) = classify(&weak);
        assert_eq!(regime, Regime::Reputable);
        assert_eq!(warnings, vec![PremiseWarning::TrustBelowReleaseCost]);

        let odd = rep(3.0, 1.0, 1.0, 0.0);
        let s = spne(&odd, &1.0, &10.0, &10.0).unwrap();
        assert_eq!(s.regime, Regime::Unclassified);
        assert_eq!(s.warnings, vec![PremiseWarning::NoKnownRegime]);
    }
}
