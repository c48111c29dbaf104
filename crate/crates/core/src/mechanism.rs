//! The negotiation mechanism in plaintext.
//!
//! Both parties report a type (the victim its valuation, the attacker its
//! reservation). Two biased coins then pick the path through a short
//! four-round exchange:
//!
//! * round 2: with probability `p̄` the victim offers `q·θ̂V`, otherwise `θ̂V`;
//! * round 3: the attacker accepts if `θ̂A ≤ r₂`, else demands `max(r₂/q, θ̂A)`;
//! * round 4: if that demand is within `θ̂V`, the victim pays it with
//!   probability `q` and otherwise gets the data back for nothing.
//!
//! [`outcome_real`] evaluates this over any [`Money`] type. [`outcome_fixed`]
//! evaluates the integer version with `k`-bit coins and `k_θ`-bit reports,
//! which is the semantics the boolean circuit must reproduce bit for bit.

use thiserror::Error;

use crate::money::{max_of, Money};

/// Largest product the fixed-point path may form.
pub const MAX_PRODUCT_BITS: u32 = 64;
/// Largest supported report width.
pub const MAX_THETA_BITS: u32 = 32;
/// Largest supported coin width.
pub const MAX_COIN_BITS: u32 = 48;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MechanismError {
    #[error("{name} is outside its allowed range {range}")]
    InvalidProbability { name: &'static str, range: &'static str },
    #[error("p_bar * (1 - q) must equal 1/2")]
    Unbalanced,
    #[error("{name} = {bits} bits is outside 1..={max}")]
    InvalidBitwidth { name: &'static str, bits: u32, max: u32 },
    #[error("a scaled constant does not fit in 128 bits")]
    ScaleOverflow,
    #[error("products need {width} bits, more than {MAX_PRODUCT_BITS}")]
    ProductOverflow { width: u32 },
    #[error("report {name} is negative")]
    NegativeReport { name: &'static str },
    #[error("report {name} = {value} does not fit in {bits} bits")]
    ReportOutOfRange { name: &'static str, value: u64, bits: u32 },
    #[error("coin {name} = {value} does not fit in {bits} bits")]
    CoinOutOfRange { name: &'static str, value: u64, bits: u32 },
    #[error("uniform draw {name} is outside [0, 1)")]
    DrawOutOfRange { name: &'static str },
    #[error("prior needs lo < hi")]
    EmptyPrior,
}

/// Coin biases and bitwidths shared by both parties.
#[derive(Debug, Clone, PartialEq)]
pub struct MechanismParams<T> {
    q: T,
    p_bar: T,
    k_theta: u32,
    k: u32,
}

impl<T: Money> MechanismParams<T> {
    /// `q` must lie in `(0, 1/2]` and satisfy `p̄·(1−q) = 1/2`.
    pub fn new(q: T, p_bar: T, k_theta: u32, k: u32) -> Result<Self, MechanismError> {
        if q <= T::zero() || q > T::half() {
            return Err(MechanismError::InvalidProbability {
                name: "q",
                range: "(0, 1/2]",
            });
        }
        if p_bar < T::half() || p_bar > T::one() {
            return Err(MechanismError::InvalidProbability {
                name: "p_bar",
                range: "[1/2, 1]",
            });
        }
        if !(p_bar.clone() * (T::one() - q.clone())).approx_eq(&T::half()) {
            return Err(MechanismError::Unbalanced);
        }
        for (name, bits, max) in [("k_theta", k_theta, MAX_THETA_BITS), ("k", k, MAX_COIN_BITS)] {
            if bits == 0 || bits > max {
                return Err(MechanismError::InvalidBitwidth { name, bits, max });
            }
        }
        Ok(Self { q, p_bar, k_theta, k })
    }

    /// Derives `p̄ = 1/(2(1−q))`.
    pub fn from_q(q: T, k_theta: u32, k: u32) -> Result<Self, MechanismError> {
        let two = T::one() + T::one();
        let p_bar = T::one() / (two * (T::one() - q.clone()));
        Self::new(q, p_bar, k_theta, k)
    }

    pub fn q(&self) -> &T {
        &self.q
    }

    pub fn p_bar(&self) -> &T {
        &self.p_bar
    }

    pub fn k_theta(&self) -> u32 {
        self.k_theta
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    /// `1 − p̄ + p̄·q`, the expected fraction of the victim's report it pays.
    pub fn payment_fraction(&self) -> T {
        T::one() - self.p_bar.clone() + self.p_bar.clone() * self.q.clone()
    }
}

/// Fixed-point images of `p̄`, `q` and `1/q` at `k` fractional bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ScaledParams {
    pub p_scale: u64,
    pub q_scale: u64,
    pub inv_q_scale: u64,
    pub k: u32,
    pub k_theta: u32,
}

fn bit_length(x: u64) -> u32 {
    u64::BITS - x.leading_zeros()
}

impl ScaledParams {
    pub fn from_params<T: Money>(params: &MechanismParams<T>) -> Result<Self, MechanismError> {
        let k = params.k;
        let scale = |x: &T| {
            x.floor_scaled(k)
                .and_then(|v| u64::try_from(v).ok())
                .ok_or(MechanismError::ScaleOverflow)
        };
        let p_scale = scale(&params.p_bar)?;
        let q_scale = scale(&params.q)?;
        let inv_q_scale = scale(&(T::one() / params.q.clone()))?;
        let scaled = Self {
            p_scale,
            q_scale,
            inv_q_scale,
            k,
            k_theta: params.k_theta,
        };
        let width = scaled.product_width();
        if width > MAX_PRODUCT_BITS {
            return Err(MechanismError::ProductOverflow { width });
        }
        Ok(scaled)
    }

    /// Bits needed for the wider of `q_scale·θ̂V` and `r₂·inv_q_scale`.
    pub fn product_width(&self) -> u32 {
        self.k_theta + bit_length(self.inv_q_scale).max(bit_length(self.q_scale))
    }

    /// `(q_scale·θ) >> k`.
    pub fn scale_by_q(&self, theta: u64) -> u64 {
        ((self.q_scale as u128 * theta as u128) >> self.k) as u64
    }

    /// `(r·inv_q_scale) >> k`.
    pub fn divide_by_q(&self, r: u64) -> u64 {
        ((r as u128 * self.inv_q_scale as u128) >> self.k) as u64
    }
}

/// The mechanism's result: allocation `alpha`, payment `r_f` and the
/// release-without-payment flag `sigma`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MechanismOutcome<T> {
    pub alpha: bool,
    pub r_f: T,
    pub sigma: bool,
}

impl<T: PartialOrd + num_traits::Zero> MechanismOutcome<T> {
    fn settled(r_f: T, sigma: bool) -> Self {
        let alpha = sigma || r_f > T::zero();
        Self { alpha, r_f, sigma }
    }

    fn rejected() -> Self {
        Self {
            alpha: false,
            r_f: T::zero(),
            sigma: false,
        }
    }

    /// `alpha ⇔ (r_f > 0 ∨ sigma)` and `sigma ⇒ r_f = 0`.
    pub fn is_consistent(&self) -> bool {
        self.alpha == (self.sigma || self.r_f > T::zero()) && (!self.sigma || self.r_f.is_zero())
    }
}

/// Reported types.
#[derive(Debug, Clone, PartialEq)]
pub struct Report<T> {
    pub theta_v: T,
    pub theta_a: T,
}

impl<T: Money> Report<T> {
    pub fn new(theta_v: T, theta_a: T) -> Result<Self, MechanismError> {
        if theta_v.is_negative() {
            return Err(MechanismError::NegativeReport { name: "theta_v" });
        }
        if theta_a.is_negative() {
            return Err(MechanismError::NegativeReport { name: "theta_a" });
        }
        Ok(Self { theta_v, theta_a })
    }
}

/// Reports as `k_θ`-bit integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FixedReport {
    pub theta_v: u64,
    pub theta_a: u64,
}

/// Which leaf of the exchange was reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    /// The attacker accepted the round-2 offer.
    AcceptRound2,
    /// The victim paid the round-3 demand.
    PaidRound4,
    /// The victim got the data back without paying.
    ReleasedUnpaid,
    /// The round-3 demand exceeded the victim's report.
    Rejected,
}

/// Outcome plus the intermediate offers that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace<T> {
    /// Whether the round-2 coin chose the low offer.
    pub low_offer: bool,
    pub r2: T,
    pub r3: Option<T>,
    pub branch: Branch,
    pub outcome: MechanismOutcome<T>,
}

/// Coin results: `low` with probability `p̄`, `pay` with probability `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Coins {
    pub low: bool,
    pub pay: bool,
}

impl Coins {
    pub const ALL: [Coins; 4] = [
        Coins { low: true, pay: true },
        Coins { low: true, pay: false },
        Coins { low: false, pay: true },
        Coins { low: false, pay: false },
    ];

    pub fn probability<T: Money>(&self, params: &MechanismParams<T>) -> T {
        let pick = |hit: bool, p: &T| if hit { p.clone() } else { T::one() - p.clone() };
        pick(self.low, &params.p_bar) * pick(self.pay, &params.q)
    }
}

/// Shared branch logic over any ordered value type.
fn run<T: Clone + PartialOrd + num_traits::Zero>(
    theta_v: &T,
    theta_a: &T,
    coins: Coins,
    times_q: impl FnOnce(&T) -> T,
    over_q: impl FnOnce(&T) -> T,
) -> Trace<T> {
    let r2 = if coins.low { times_q(theta_v) } else { theta_v.clone() };
    if *theta_a <= r2 {
        return Trace {
            low_offer: coins.low,
            outcome: MechanismOutcome::settled(r2.clone(), false),
            r2,
            r3: None,
            branch: Branch::AcceptRound2,
        };
    }
    let r3 = max_of(over_q(&r2), theta_a.clone());
    let (branch, outcome) = if r3 <= *theta_v {
        if coins.pay {
            (Branch::PaidRound4, MechanismOutcome::settled(r3.clone(), false))
        } else {
            (Branch::ReleasedUnpaid, MechanismOutcome::settled(T::zero(), true))
        }
    } else {
        (Branch::Rejected, MechanismOutcome::rejected())
    };
    Trace {
        low_offer: coins.low,
        r2,
        r3: Some(r3),
        branch,
        outcome,
    }
}

/// Real-valued path with the coins already flipped.
pub fn trace_with_coins<T: Money>(params: &MechanismParams<T>, rep: &Report<T>, coins: Coins) -> Trace<T> {
    run(
        &rep.theta_v,
        &rep.theta_a,
        coins,
        |v| params.q.clone() * v.clone(),
        |r| r.clone() / params.q.clone(),
    )
}

/// Real-valued path driven by uniform draws `u0, u1 ∈ [0, 1)`.
pub fn trace_real<T: Money>(
    params: &MechanismParams<T>,
    rep: &Report<T>,
    u0: &T,
    u1: &T,
) -> Result<Trace<T>, MechanismError> {
    for (name, u) in [("u0", u0), ("u1", u1)] {
        if u.is_negative() || *u >= T::one() {
            return Err(MechanismError::DrawOutOfRange { name });
        }
    }
    let coins = Coins {
        low: *u0 < params.p_bar,
        pay: *u1 < params.q,
    };
    Ok(trace_with_coins(params, rep, coins))
}

pub fn outcome_real<T: Money>(
    params: &MechanismParams<T>,
    rep: &Report<T>,
    u0: &T,
    u1: &T,
) -> Result<MechanismOutcome<T>, MechanismError> {
    trace_real(params, rep, u0, u1).map(|t| t.outcome)
}

/// Integer path: the reference the circuit is checked against.
pub fn trace_fixed(
    scaled: &ScaledParams,
    rep: &FixedReport,
    s0: u64,
    s1: u64,
) -> Result<Trace<u64>, MechanismError> {
    for (name, value) in [("theta_v", rep.theta_v), ("theta_a", rep.theta_a)] {
        if bit_length(value) > scaled.k_theta {
            return Err(MechanismError::ReportOutOfRange {
                name,
                value,
                bits: scaled.k_theta,
            });
        }
    }
    for (name, value) in [("s0", s0), ("s1", s1)] {
        if bit_length(value) > scaled.k {
            return Err(MechanismError::CoinOutOfRange {
                name,
                value,
                bits: scaled.k,
            });
        }
    }
    let coins = Coins {
        low: s0 < scaled.p_scale,
        pay: s1 < scaled.q_scale,
    };
    Ok(run(
        &rep.theta_v,
        &rep.theta_a,
        coins,
        |v| scaled.scale_by_q(*v),
        |r| scaled.divide_by_q(*r),
    ))
}

pub fn outcome_fixed(
    scaled: &ScaledParams,
    rep: &FixedReport,
    s0: u64,
    s1: u64,
) -> Result<MechanismOutcome<u64>, MechanismError> {
    trace_fixed(scaled, rep, s0, s1).map(|t| t.outcome)
}

/// Every coin outcome with its probability.
pub fn outcome_distribution<T: Money>(
    params: &MechanismParams<T>,
    rep: &Report<T>,
) -> Vec<(T, Trace<T>)> {
    Coins::ALL
        .iter()
        .map(|c| (c.probability(params), trace_with_coins(params, rep, *c)))
        .collect()
}

/// `β − α·θA` for one outcome.
pub fn attacker_utility<T: Money>(outcome: &MechanismOutcome<T>, theta_a: &T) -> T {
    if outcome.alpha {
        outcome.r_f.clone() - theta_a.clone()
    } else {
        outcome.r_f.clone()
    }
}

/// `α·θV − β` for one outcome.
pub fn victim_utility<T: Money>(outcome: &MechanismOutcome<T>, theta_v: &T) -> T {
    if outcome.alpha {
        theta_v.clone() - outcome.r_f.clone()
    } else {
        -outcome.r_f.clone()
    }
}

/// Attacker's expected utility over both coins when its true reservation
/// is `theta_a_true` and it reports `report_a` against `theta_v_report`.
pub fn expected_attacker_utility<T: Money>(
    params: &MechanismParams<T>,
    theta_a_true: &T,
    report_a: &T,
    theta_v_report: &T,
) -> T {
    let rep = Report {
        theta_v: theta_v_report.clone(),
        theta_a: report_a.clone(),
    };
    outcome_distribution(params, &rep)
        .into_iter()
        .fold(T::zero(), |acc, (p, t)| acc + p * attacker_utility(&t.outcome, theta_a_true))
}

/// Uniform belief over the other party's type.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformPrior<T> {
    lo: T,
    hi: T,
}

impl<T: Money> UniformPrior<T> {
    pub fn new(lo: T, hi: T) -> Result<Self, MechanismError> {
        if lo >= hi {
            return Err(MechanismError::EmptyPrior);
        }
        Ok(Self { lo, hi })
    }

    /// `Unif[0, 1]`.
    pub fn unit() -> Self {
        Self {
            lo: T::zero(),
            hi: T::one(),
        }
    }

    pub fn lo(&self) -> &T {
        &self.lo
    }

    pub fn hi(&self) -> &T {
        &self.hi
    }

    pub fn cdf(&self, x: &T) -> T {
        if *x <= self.lo {
            T::zero()
        } else if *x >= self.hi {
            T::one()
        } else {
            (x.clone() - self.lo.clone()) / (self.hi.clone() - self.lo.clone())
        }
    }
}

/// Victim's interim expected utility for reporting `report_v` when its true
/// valuation is `theta_v_true` and the attacker reports truthfully from `prior`.
///
/// The attacker's type splits into three regions: at most `q·θ̂V`, in
/// `(q·θ̂V, θ̂V]`, and above `θ̂V`. The last always ends in rejection.
pub fn expected_victim_utility<T: Money>(
    params: &MechanismParams<T>,
    theta_v_true: &T,
    report_v: &T,
    prior: &UniformPrior<T>,
) -> T {
    let q = params.q.clone();
    let p = params.p_bar.clone();
    let one = T::one();
    let theta = theta_v_true.clone();
    let low_offer = q.clone() * report_v.clone();

    let f_low = prior.cdf(&low_offer);
    let f_mid = prior.cdf(report_v) - f_low.clone();

    // θA ≤ qθ̂V: accepted in round 2 at either offer.
    let below = p.clone() * (theta.clone() - low_offer) + (one.clone() - p.clone()) * (theta.clone() - report_v.clone());
    // qθ̂V < θA ≤ θ̂V: the low offer leads to round 4, the high one is accepted.
    let between = p.clone() * q.clone() * (theta.clone() - report_v.clone())
        + p.clone() * (one.clone() - q) * theta.clone()
        + (one - p) * (theta - report_v.clone());
    f_low * below + f_mid * between
}

/// Victim's expected payment when it reports its valuation truthfully and
/// the attacker's report is at most that valuation: `(1 − p̄ + p̄q)·θV`.
pub fn expected_payment<T: Money>(params: &MechanismParams<T>, theta_v: &T) -> T {
    params.payment_fraction() * theta_v.clone()
}

/// Largest gap found by a grid search.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCheck<T> {
    pub checked: usize,
    pub violations: usize,
    /// `(gap, θ̂V or θV, true type, best deviation)` of the worst violation.
    pub worst: Option<(T, T, T, T)>,
}

impl<T> GridCheck<T> {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

fn unit_grid<T: Money>(points: usize) -> Vec<T> {
    let last = (points.max(2) - 1) as i64;
    (0..=last).map(|i| T::from_ratio(i, last)).collect()
}

/// Checks that truthful reporting is a best response for the attacker at
/// every `(θ̂V, θA, report)` on a `points`-per-axis grid over `[0, 1]`.
pub fn check_attacker_dominance<T: Money>(params: &MechanismParams<T>, points: usize) -> GridCheck<T> {
    let grid = unit_grid::<T>(points);
    let mut check = GridCheck {
        checked: 0,
        violations: 0,
        worst: None,
    };
    for theta_v in &grid {
        for theta_a in &grid {
            let truthful = expected_attacker_utility(params, theta_a, theta_a, theta_v);
            for report in &grid {
                check.checked += 1;
                let gap = expected_attacker_utility(params, theta_a, report, theta_v) - truthful.clone();
                if gap > T::tolerance() {
                    check.violations += 1;
                    if check.worst.as_ref().is_none_or(|w| gap > w.0) {
                        check.worst = Some((gap, theta_v.clone(), theta_a.clone(), report.clone()));
                    }
                }
            }
        }
    }
    check
}

/// Report in `{0, 2^-bits, …, 1}` maximizing the victim's interim utility.
/// Ties resolve to the smallest report.
pub fn best_victim_report<T: Money>(
    params: &MechanismParams<T>,
    theta_v: &T,
    prior: &UniformPrior<T>,
    step_bits: u32,
) -> (T, T) {
    let steps = 1i64 << step_bits;
    let mut best: Option<(T, T)> = None;
    for i in 0..=steps {
        let report = T::from_ratio(i, steps);
        let u = expected_victim_utility(params, theta_v, &report, prior);
        if best.as_ref().is_none_or(|(_, b)| u > *b) {
            best = Some((report, u));
        }
    }
    best.expect("grid is non-empty")
}

/// Checks that the best grid report lies within one step of the truth for
/// every true valuation on a `points`-per-axis grid.
pub fn check_victim_optimality<T: Money>(
    params: &MechanismParams<T>,
    prior: &UniformPrior<T>,
    step_bits: u32,
    points: usize,
) -> GridCheck<T> {
    let step = T::from_ratio(1, 1i64 << step_bits);
    let mut check = GridCheck {
        checked: 0,
        violations: 0,
        worst: None,
    };
    for theta in unit_grid::<T>(points) {
        check.checked += 1;
        let (best, _) = best_victim_report(params, &theta, prior, step_bits);
        let gap = (best.clone() - theta.clone()).abs();
        if gap > step {
            check.violations += 1;
            if check.worst.as_ref().is_none_or(|w| gap > w.0) {
                check.worst = Some((gap, theta.clone(), theta.clone(), best));
            }
        }
    }
    check
}
