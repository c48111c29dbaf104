//! Finite-horizon alternating-offers bargaining over the ransom.
//!
//! Odd rounds are attacker demands, even rounds are victim counteroffers. No
//! discounting is involved: delay costs the victim one loss block per round
//! and costs the attacker nothing, which is what drives the equilibrium.
//!
//! Two independent routes compute the equilibrium schedule:
//! [`closed_form_offer`] evaluates the closed-form sum directly and
//! [`backward_induction_offers`] unrolls the game from the last round. They
//! must agree exactly.

use thiserror::Error;

use crate::loss::{LossProfile, VictimParams};
use crate::money::{max_of, min_of, sum, Money};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BargainingError {
    #[error("attacker reservation is at or above the value after round 1; no deal is feasible")]
    NoFeasibleHorizon,
    #[error("attacker reservation is at or below the tail mass; bargaining never ends")]
    InfiniteHorizon,
    #[error("the last bargaining round would be {horizon}, which is even")]
    NonOddHorizon { horizon: usize },
    #[error("attacker reservation equals the residual value after round {round}")]
    TiedReservation { round: usize },
    #[error("horizon {horizon} must be odd and positive")]
    InvalidHorizon { horizon: usize },
    #[error("horizon {horizon} needs {horizon} loss blocks but the profile has {blocks}")]
    HorizonBeyondProfile { horizon: usize, blocks: usize },
    #[error("round {round} is outside 1..={horizon}")]
    RoundOutOfRange { round: usize, horizon: usize },
    #[error("attacker reservation exceeds what the victim can pay")]
    NoDeal,
    #[error("reservation must be non-negative")]
    NegativeReservation,
    #[error("probability {name} violates its bound: {detail}")]
    ProfileBound { name: &'static str, detail: &'static str },
}

/// A complete-information bargaining problem.
#[derive(Debug, Clone, PartialEq)]
pub struct BargainingInstance<T> {
    pub victim: VictimParams<T>,
    pub r_min: T,
    pub horizon: Option<usize>,
}

/// Equilibrium offers for rounds `1..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct OfferSchedule<T> {
    offers: Vec<T>,
}

impl<T: Money> OfferSchedule<T> {
    pub fn horizon(&self) -> usize {
        self.offers.len()
    }

    /// Offer in round `n` (1-based).
    pub fn offer(&self, n: usize) -> Option<&T> {
        n.checked_sub(1).and_then(|i| self.offers.get(i))
    }

    pub fn offers(&self) -> &[T] {
        &self.offers
    }

    /// `(round, offer)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &T)> {
        self.offers.iter().enumerate().map(|(i, o)| (i + 1, o))
    }
}

fn check_horizon<T: Money>(profile: &LossProfile<T>, horizon: usize) -> Result<(), BargainingError> {
    if horizon == 0 || horizon % 2 == 0 {
        return Err(BargainingError::InvalidHorizon { horizon });
    }
    if horizon > profile.block_count() {
        return Err(BargainingError::HorizonBeyondProfile {
            horizon,
            blocks: profile.block_count(),
        });
    }
    Ok(())
}

/// Last bargaining round `N`: the unique round with `v(N) > r_min > v(N+1)`.
pub fn determine_horizon<T: Money>(inst: &BargainingInstance<T>) -> Result<usize, BargainingError> {
    let profile = inst.victim.profile();
    let r_min = &inst.r_min;
    if r_min.is_negative() {
        return Err(BargainingError::NegativeReservation);
    }
    if *r_min >= profile.residual_value(1) {
        return Err(BargainingError::NoFeasibleHorizon);
    }
    if r_min <= profile.tail() {
        return Err(BargainingError::InfiniteHorizon);
    }
    // v(n) reaches the tail at n = block_count, and r_min is above it, so the
    // scan terminates inside the block range.
    let mut n = 1;
    loop {
        let next = profile.residual_value(n + 1);
        if next == *r_min {
            return Err(BargainingError::TiedReservation { round: n + 1 });
        }
        if next < *r_min {
            break;
        }
        n += 1;
    }
    if n % 2 == 0 {
        return Err(BargainingError::NonOddHorizon { horizon: n });
    }
    Ok(n)
}

/// Equilibrium offer in round `n` of an `N`-round game, from the closed form
///
/// `r*_n = V − Σ_{k=0}^{⌊(N−n)/2⌋−1} b_{N−1−2k} − Σ_{j < 2⌊n/2⌋+1} b_j`.
pub fn closed_form_offer<T: Money>(
    profile: &LossProfile<T>,
    n: usize,
    horizon: usize,
) -> Result<T, BargainingError> {
    check_horizon(profile, horizon)?;
    if n == 0 || n > horizon {
        return Err(BargainingError::RoundOutOfRange { round: n, horizon });
    }
    let block = |j: usize| profile.block(j).cloned().expect("horizon checked");
    let late_terms = (horizon - n) / 2;
    let late = sum((0..late_terms).map(|k| block(horizon - 1 - 2 * k)));
    let early = profile.elapsed_loss(2 * (n / 2) + 1);
    Ok(profile.total_value() - late - early)
}

pub fn closed_form_schedule<T: Money>(
    profile: &LossProfile<T>,
    horizon: usize,
) -> Result<OfferSchedule<T>, BargainingError> {
    let offers = (1..=horizon)
        .map(|n| closed_form_offer(profile, n, horizon))
        .collect::<Result<_, _>>()?;
    Ok(OfferSchedule { offers })
}

/// Equilibrium schedule by unrolling the game from its last round.
///
/// In round `N` the attacker can ask for at most `v(N)`. In a victim round the
/// attacker gains nothing by waiting, so the victim offers exactly what the
/// attacker would demand next. In an attacker round the victim weighs paying
/// now against one more block of losses, so the attacker adds that block to
/// the next round's price.
pub fn backward_induction_offers<T: Money>(
    profile: &LossProfile<T>,
    horizon: usize,
) -> Result<OfferSchedule<T>, BargainingError> {
    check_horizon(profile, horizon)?;
    let mut offers = vec![T::zero(); horizon];
    offers[horizon - 1] = profile.residual_value(horizon);
    for n in (1..horizon).rev() {
        let next = offers[n].clone();
        offers[n - 1] = if n % 2 == 0 {
            next
        } else {
            next + delay_cost(profile, n)
        };
    }
    Ok(OfferSchedule { offers })
}

/// Loss the victim suffers by rejecting the demand in round `n` and moving to round `n+1`.
fn delay_cost<T: Money>(profile: &LossProfile<T>, n: usize) -> T {
    profile.residual_value(n) - profile.residual_value(n + 1)
}

impl<T: Money> BargainingInstance<T> {
    pub fn new(victim: VictimParams<T>, r_min: T) -> Result<Self, BargainingError> {
        if r_min.is_negative() {
            return Err(BargainingError::NegativeReservation);
        }
        Ok(Self {
            victim,
            r_min,
            horizon: None,
        })
    }

    pub fn with_horizon(mut self, horizon: usize) -> Self {
        self.horizon = Some(horizon);
        self
    }

    /// The explicit horizon if one was given, otherwise the derived one.
    pub fn resolved_horizon(&self) -> Result<usize, BargainingError> {
        match self.horizon {
            Some(h) => {
                check_horizon(self.victim.profile(), h)?;
                Ok(h)
            }
            None => determine_horizon(self),
        }
    }

    pub fn schedule(&self) -> Result<OfferSchedule<T>, BargainingError> {
        closed_form_schedule(self.victim.profile(), self.resolved_horizon()?)
    }

    /// A deal in round `n` is feasible iff `r_min ≤ R(n, N)`.
    pub fn deal_feasible(&self, n: usize) -> Result<bool, BargainingError> {
        let horizon = self.resolved_horizon()?;
        Ok(self.r_min <= closed_form_offer(self.victim.profile(), n, horizon)?)
    }

    /// Highest ransom the attacker can obtain, `R(1, N)`.
    pub fn max_attainable_ransom(&self) -> Result<T, BargainingError> {
        let horizon = self.resolved_horizon()?;
        closed_form_offer(self.victim.profile(), 1, horizon)
    }
}

/// Infinite-horizon split for a flat loss: midpoint of the two reservations.
pub fn rubinstein_split<T: Money>(v: &T, r_max: &T, r_min: &T) -> Result<T, BargainingError> {
    let cap = min_of(v.clone(), r_max.clone());
    if *r_min > cap {
        return Err(BargainingError::NoDeal);
    }
    Ok((cap + r_min.clone()) * T::half())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Round1Limit<T> {
    /// Sum of the odd-indexed blocks plus half the tail.
    pub exact: T,
    /// Half of the total value.
    pub approx: T,
    /// Set when part of `exact` came from splitting the tail.
    pub tail_attributed: bool,
}

/// Round-1 price as the horizon grows without bound.
pub fn round1_limit<T: Money>(profile: &LossProfile<T>) -> Round1Limit<T> {
    let odd_blocks = sum(profile.blocks().iter().skip(1).step_by(2).cloned());
    let tail_attributed = profile.tail() > &T::zero();
    Round1Limit {
        exact: odd_blocks + profile.tail().clone() * T::half(),
        approx: profile.total_value() * T::half(),
        tail_attributed,
    }
}

/// Lowest round-1 payment the victim should accept outright: `min(V/2, r_max)`.
pub fn round1_floor<T: Money>(victim: &VictimParams<T>) -> T {
    min_of(round1_limit(victim.profile()).approx, victim.r_max().clone())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginalLossWarning<T> {
    pub horizon: usize,
    pub last_block: T,
    pub future_mass: T,
}

/// Flags profiles where the last round's loss is not small next to the loss
/// still to come, `b_{N−1} > ratio · v(N+1)`.
pub fn marginal_loss_lint<T: Money>(
    profile: &LossProfile<T>,
    horizon: usize,
    ratio: &T,
) -> Option<MarginalLossWarning<T>> {
    let last_block = profile.block(horizon.checked_sub(1)?)?.clone();
    let future_mass = profile.residual_value(horizon + 1);
    (last_block > ratio.clone() * future_mass.clone()).then_some(MarginalLossWarning {
        horizon,
        last_block,
        future_mass,
    })
}

/// Victim mixing probabilities for the incomplete-information strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct IncompleteInfoProfile<T> {
    pub q: T,
    pub p_bar: T,
    pub rho: T,
}

impl<T: Money> IncompleteInfoProfile<T> {
    /// Validates the bounds that make accepting in round 3 the attacker's best
    /// response, with `B_k = Σ_{j<k} b_j` and `V` the total value:
    /// `B_2/V ≤ q ≤ B_2/B_3`, `ρ ≥ max(0, (qV − B_2)/v(3))` and
    /// `p̄ ≥ v(2) / (ρ·v(3) + (1−q)·V)`, all at most one.
    pub fn new(q: T, p_bar: T, rho: T, loss: &LossProfile<T>) -> Result<Self, BargainingError> {
        let bound = |name, detail| Err(BargainingError::ProfileBound { name, detail });
        let total = loss.total_value();
        let b2 = loss.elapsed_loss(2);
        let b3 = loss.elapsed_loss(3);
        let v2 = loss.residual_value(2);
        let v3 = loss.residual_value(3);
        let one = T::one();

        for (name, p) in [("q", &q), ("p_bar", &p_bar), ("rho", &rho)] {
            if p.is_negative() || *p > one {
                return bound(name, "outside [0, 1]");
            }
        }
        if q.clone() * total.clone() < b2 {
            return bound("q", "below B2/V");
        }
        if q.clone() * b3 > b2 {
            return bound("q", "above B2/B3");
        }
        let rho_need = q.clone() * total.clone() - b2;
        if rho_need > rho.clone() * v3.clone() {
            return bound("rho", "below (qV - B2)/v(3)");
        }
        let denom = rho.clone() * v3 + (one - q.clone()) * total;
        if v2 > p_bar.clone() * denom {
            return bound("p_bar", "below v(2)/(rho v(3) + (1-q) V)");
        }
        Ok(Self { q, p_bar, rho })
    }
}

/// Victim's low round-2 counteroffer, `q·V − B_2`.
pub fn tilde_r2<T: Money>(q: &T, loss: &LossProfile<T>) -> T {
    q.clone() * loss.total_value() - loss.elapsed_loss(2)
}

#[derive(Debug, Clone, PartialEq)]
pub enum AttackerResponse<T> {
    /// A1: accept the victim's round-2 offer.
    Accept,
    /// A3: counter with the given round-3 demand.
    Counter(T),
}

/// Attacker's round-3 reply to the victim's round-2 offer `r2`.
pub fn prop4_best_response<T: Money>(
    profile: &IncompleteInfoProfile<T>,
    r2: &T,
    r_min: &T,
) -> AttackerResponse<T> {
    if r_min <= r2 {
        AttackerResponse::Accept
    } else {
        AttackerResponse::Counter(max_of(r2.clone() / profile.q.clone(), r_min.clone()))
    }
}
