//! Victim loss dynamics over bargaining rounds.
//!
//! The loss rate is never stored as a function. Everything downstream only
//! needs its integral over each round `[jT, (j+1)T)` plus the mass left after
//! the last explicit round, so that is all a [`LossProfile`] holds.

use thiserror::Error;

use crate::money::{min_of, sum, Money};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LossError {
    #[error("{field} must be non-negative")]
    Negative { field: &'static str },
    #[error("block {index} is negative")]
    NegativeBlock { index: usize },
    #[error("round length must be positive")]
    NonPositiveRoundLength,
    #[error("ransom must be non-negative")]
    NegativeRansom,
}

/// Per-round loss masses `b_j`, the remaining tail mass, and the immediate
/// downtime loss.
#[derive(Debug, Clone, PartialEq)]
pub struct LossProfile<T> {
    l0: T,
    blocks: Vec<T>,
    tail: T,
    round_length: T,
}

impl<T: Money> LossProfile<T> {
    pub fn new(l0: T, blocks: Vec<T>, tail: T, round_length: T) -> Result<Self, LossError> {
        if l0.is_negative() {
            return Err(LossError::Negative { field: "l0" });
        }
        if tail.is_negative() {
            return Err(LossError::Negative { field: "tail" });
        }
        if let Some(index) = blocks.iter().position(|b| b.is_negative()) {
            return Err(LossError::NegativeBlock { index });
        }
        if round_length <= T::zero() {
            return Err(LossError::NonPositiveRoundLength);
        }
        Ok(Self {
            l0,
            blocks,
            tail,
            round_length,
        })
    }

    /// Profile with no downtime loss and unit round length.
    pub fn from_blocks(blocks: Vec<T>, tail: T) -> Result<Self, LossError> {
        Self::new(T::zero(), blocks, tail, T::one())
    }

    pub fn l0(&self) -> &T {
        &self.l0
    }

    pub fn blocks(&self) -> &[T] {
        &self.blocks
    }

    pub fn block(&self, j: usize) -> Option<&T> {
        self.blocks.get(j)
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn tail(&self) -> &T {
        &self.tail
    }

    pub fn round_length(&self) -> &T {
        &self.round_length
    }

    /// Total value of the encrypted data: every block plus the tail.
    pub fn total_value(&self) -> T {
        sum(self.blocks.iter().cloned()) + self.tail.clone()
    }

    /// Loss accumulated over the first `n` rounds, `Σ_{j<n} b_j`.
    ///
    /// Past the last block the tail is not time-resolved, so this saturates at
    /// the sum of all blocks.
    pub fn elapsed_loss(&self, n: usize) -> T {
        sum(self.blocks.iter().take(n).cloned())
    }

    /// Value of the data remaining after `n` rounds, `v(n)`.
    pub fn residual_value(&self, n: usize) -> T {
        self.total_value() - self.elapsed_loss(n)
    }
}

/// A victim: its loss profile plus the most it can pay.
#[derive(Debug, Clone, PartialEq)]
pub struct VictimParams<T> {
    r_max: T,
    profile: LossProfile<T>,
}

/// How a negotiation ended for loss accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Settlement {
    /// Data released at the end of the given round.
    Released { round: usize },
    NeverReleased,
}

impl<T: Money> VictimParams<T> {
    pub fn new(r_max: T, profile: LossProfile<T>) -> Result<Self, LossError> {
        if r_max.is_negative() {
            return Err(LossError::Negative { field: "r_max" });
        }
        Ok(Self { r_max, profile })
    }

    pub fn r_max(&self) -> &T {
        &self.r_max
    }

    pub fn profile(&self) -> &LossProfile<T> {
        &self.profile
    }

    /// Reservation value after `n` rounds: `min(v(n), r_max)`.
    pub fn reservation(&self, n: usize) -> T {
        min_of(self.profile.residual_value(n), self.r_max.clone())
    }

    /// Total financial loss with the intangible-loss term fixed at zero.
    pub fn total_loss(&self, settlement: Settlement, r_f: T) -> Result<T, LossError> {
        if r_f.is_negative() {
            return Err(LossError::NegativeRansom);
        }
        let accumulated = match settlement {
            Settlement::Released { round } => self.profile.elapsed_loss(round),
            Settlement::NeverReleased => self.profile.total_value(),
        };
        Ok(self.profile.l0.clone() + accumulated + r_f)
    }
}

#[cfg(test)]
mod tests {
    use num_rational::BigRational;
    use proptest::prelude::*;

    use super::*;

    fn q(n: i64) -> BigRational {
        BigRational::from_integer(n.into())
    }

    fn ones() -> LossProfile<BigRational> {
        LossProfile::from_blocks(vec![q(1); 5], q(0)).unwrap()
    }

    #[test]
    fn total_value_examples() {
        assert_eq!(ones().total_value(), q(5));
        let tail_only = LossProfile::from_blocks(vec![], q(7)).unwrap();
        assert_eq!(tail_only.total_value(), q(7));
        let p = LossProfile::from_blocks(vec![2.0, 3.0], 1.5).unwrap();
        assert_eq!(p.total_value(), 6.5);
    }

    #[test]
    fn residual_value_examples() {
        assert_eq!(ones().residual_value(3), q(2));
        assert_eq!(ones().residual_value(0), ones().total_value());
        let p = LossProfile::from_blocks(vec![2.0, 3.0], 1.5).unwrap();
        assert_eq!(p.residual_value(5), 1.5);
    }

    #[test]
    fn reservation_examples() {
        let v = VictimParams::new(q(10), ones()).unwrap();
        assert_eq!(v.reservation(1), q(4));
        let capped = VictimParams::new(BigRational::new(5.into(), 2.into()), ones()).unwrap();
        assert_eq!(capped.reservation(1), BigRational::new(5.into(), 2.into()));
        let flat = VictimParams::new(q(7), LossProfile::from_blocks(vec![], q(7)).unwrap()).unwrap();
        for n in 0..10 {
            assert_eq!(flat.reservation(n), q(7));
        }
    }

    #[test]
    fn total_loss_examples() {
        let profile = LossProfile::new(q(1), vec![q(1); 5], q(0), q(1)).unwrap();
        let v = VictimParams::new(q(10), profile).unwrap();
        assert_eq!(
            v.total_loss(Settlement::Released { round: 2 }, q(2)).unwrap(),
            q(5)
        );
        assert_eq!(v.total_loss(Settlement::NeverReleased, q(0)).unwrap(), q(6));
        assert_eq!(
            v.total_loss(Settlement::Released { round: 1 }, q(-1)),
            Err(LossError::NegativeRansom)
        );

        let zero = VictimParams::new(q(10), ones()).unwrap();
        assert_eq!(
            zero.total_loss(Settlement::Released { round: 0 }, q(0)).unwrap(),
            q(0)
        );
    }

    #[test]
    fn rejects_invalid_profiles() {
        assert_eq!(
            LossProfile::from_blocks(vec![1.0, -1.0], 0.0),
            Err(LossError::NegativeBlock { index: 1 })
        );
        assert_eq!(
            LossProfile::from_blocks(vec![1.0], -0.5),
            Err(LossError::Negative { field: "tail" })
        );
        assert_eq!(
            LossProfile::new(-1.0, vec![], 0.0, 1.0),
            Err(LossError::Negative { field: "l0" })
        );
        assert_eq!(
            LossProfile::new(0.0, vec![], 0.0, 0.0),
            Err(LossError::NonPositiveRoundLength)
        );
        assert!(VictimParams::new(-1.0, LossProfile::from_blocks(vec![], 1.0).unwrap()).is_err());
    }

    fn profile_strategy() -> impl Strategy<Value = (LossProfile<BigRational>, BigRational)> {
        (
            prop::collection::vec((0i64..50, 1i64..8), 0..12),
            (0i64..30, 1i64..5),
            (0i64..200, 1i64..4),
        )
            .prop_map(|(blocks, (tn, td), (rn, rd))| {
                let blocks = blocks
                    .into_iter()
                    .map(|(n, d)| BigRational::new(n.into(), d.into()))
                    .collect();
                let profile =
                    LossProfile::from_blocks(blocks, BigRational::new(tn.into(), td.into())).unwrap();
                (profile, BigRational::new(rn.into(), rd.into()))
            })
    }

    proptest! {
        #[test]
        fn residual_value_is_non_increasing((profile, _) in profile_strategy(), n in 0usize..20) {
            prop_assert!(profile.residual_value(n + 1) <= profile.residual_value(n));
            prop_assert_eq!(profile.residual_value(0), profile.total_value());
            prop_assert_eq!(profile.residual_value(profile.block_count() + n), profile.tail().clone());
        }

        #[test]
        fn reservation_is_min_of_caps((profile, r_max) in profile_strategy(), n in 0usize..20) {
            let victim = VictimParams::new(r_max.clone(), profile.clone()).unwrap();
            let res = victim.reservation(n);
            let v = profile.residual_value(n);
            prop_assert!(res <= r_max && res <= v);
            prop_assert!(res == r_max || res == v);
        }

        #[test]
        fn later_settlement_never_cheaper((profile, r_max) in profile_strategy(), n in 0usize..20, r_f in 0i64..100) {
            let victim = VictimParams::new(r_max, profile).unwrap();
            let r_f = BigRational::from_integer(r_f.into());
            let early = victim.total_loss(Settlement::Released { round: n }, r_f.clone()).unwrap();
            let late = victim.total_loss(Settlement::Released { round: n + 1 }, r_f).unwrap();
            prop_assert!(early <= late);
        }
    }
}
