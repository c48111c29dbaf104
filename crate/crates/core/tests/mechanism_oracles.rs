use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use parley_core::mechanism::{
    check_attacker_dominance, expected_attacker_utility, expected_payment, expected_victim_utility,
    outcome_distribution, outcome_fixed, outcome_real, trace_fixed, trace_real, victim_utility, FixedReport,
    MechanismParams, Report, ScaledParams, UniformPrior,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn int(n: u64) -> BigRational {
    BigRational::from_integer(n.into())
}

fn dyadic_params(m: u32, k_theta: u32, k: u32) -> MechanismParams<BigRational> {
    MechanismParams::from_q(rat(1, 1 << m), k_theta, k).unwrap()
}

/// Attacker utility as the three-case piecewise expression.
fn attacker_piecewise(p: &MechanismParams<BigRational>, theta_a: &BigRational, report: &BigRational, theta_v: &BigRational) -> BigRational {
    let (q, pb) = (p.q().clone(), p.p_bar().clone());
    let one = int(1);
    if *report <= q.clone() * theta_v {
        pb.clone() * (q * theta_v - theta_a) + (one - pb) * (theta_v - theta_a)
    } else if report <= theta_v {
        (one.clone() - pb.clone()) * (theta_v - theta_a) + pb.clone() * q.clone() * (theta_v - theta_a)
            + pb * (one - q) * (-theta_a.clone())
    } else {
        BigRational::zero()
    }
}

/// Uniform draws whose threshold tests agree with the integer coin tests.
fn coupled_draws(s: &ScaledParams, p: &MechanismParams<BigRational>, s0: u64, s1: u64) -> (BigRational, BigRational) {
    let full = 1u64 << s.k;
    let p_bar = p.p_bar().clone();
    let u0 = if s0 < s.p_scale {
        p_bar * int(s0) / int(s.p_scale)
    } else {
        p_bar.clone() + (int(1) - p_bar) * int(s0 - s.p_scale) / int(full - s.p_scale)
    };
    (u0, int(s1) / int(full))
}

#[test]
fn attacker_enumeration_matches_piecewise_formula() {
    for m in 1..=4 {
        let p = dyadic_params(m, 8, 8);
        // A zero victim report makes every accepted offer zero, which the
        // allocation rule counts as no trade; covered separately below.
        for tv in 1..=16 {
            for ta in 0..=16 {
                for rep in 0..=20 {
                    let (tv, ta, rep) = (rat(tv, 16), rat(ta, 16), rat(rep, 16));
                    assert_eq!(
                        expected_attacker_utility(&p, &ta, &rep, &tv),
                        attacker_piecewise(&p, &ta, &rep, &tv)
                    );
                }
            }
        }
    }
}

#[test]
fn zero_victim_report_is_no_trade() {
    let p = dyadic_params(2, 8, 8);
    for ta in 0..=4 {
        let ta = rat(ta, 4);
        assert_eq!(expected_attacker_utility(&p, &ta, &int(0), &int(0)), int(0));
        assert_eq!(expected_attacker_utility(&p, &ta, &ta, &int(0)), int(0));
    }
}

#[test]
fn attacker_worked_example() {
    let p = MechanismParams::new(rat(1, 4), rat(2, 3), 8, 8).unwrap();
    assert_eq!(expected_attacker_utility(&p, &int(30), &int(30), &int(100)), int(20));
    assert_eq!(expected_attacker_utility(&p, &int(30), &int(150), &int(100)), int(0));
}

#[test]
fn attacker_truthful_dominant_when_reservation_low_or_above_report() {
    // Truth-telling is a best response whenever θA ≤ θ̂V/2 or θA > θ̂V.
    let p = dyadic_params(2, 8, 8);
    let grid: Vec<BigRational> = (0..=32).map(|i| rat(i, 32)).collect();
    for tv in &grid {
        for ta in &grid {
            if !(ta.clone() * int(2) <= *tv || ta > tv) {
                continue;
            }
            let truthful = expected_attacker_utility(&p, ta, ta, tv);
            for rep in &grid {
                assert!(expected_attacker_utility(&p, ta, rep, tv) <= truthful);
            }
        }
    }
}

#[test]
fn attacker_overreport_beats_truth_between_half_and_full_report() {
    // With θ̂V/2 < θA ≤ θ̂V the truthful utility θ̂V/2 − θA is negative while
    // any report above θ̂V ends in rejection and zero utility.
    let p = dyadic_params(2, 8, 8);
    let (tv, ta) = (rat(1, 2), rat(3, 8));
    let truthful = expected_attacker_utility(&p, &ta, &ta, &tv);
    assert_eq!(truthful, rat(-1, 8));
    assert_eq!(expected_attacker_utility(&p, &ta, &rat(3, 4), &tv), int(0));
    let check = check_attacker_dominance(&p, 9);
    assert!(!check.passed());
}

#[test]
fn victim_utility_matches_quadrature() {
    let cells = 1 << 12;
    for (q, theta, report) in [(0.25, 0.6, 0.6), (0.25, 0.6, 0.3), (0.125, 0.9, 1.0), (0.5, 0.2, 0.7), (0.25, 0.5, 0.0)] {
        let p = MechanismParams::<f64>::from_q(q, 8, 8).unwrap();
        let mut total = 0.0;
        for c in 0..cells {
            let theta_a = (c as f64 + 0.5) / cells as f64;
            let rep = Report::new(report, theta_a).unwrap();
            for (prob, trace) in outcome_distribution(&p, &rep) {
                total += prob * victim_utility(&trace.outcome, &theta) / cells as f64;
            }
        }
        let closed = expected_victim_utility(&p, &theta, &report, &UniformPrior::unit());
        assert!((total - closed).abs() < 4.0 / cells as f64, "q={q} θ={theta} r={report}: {total} vs {closed}");
    }
}

#[test]
fn victim_argmax_on_shifted_prior() {
    let p = MechanismParams::<f64>::from_q(0.25, 8, 8).unwrap();
    let prior = UniformPrior::new(0.2, 1.2).unwrap();
    let theta = 0.7;
    let best = (0..=1200)
        .map(|i| i as f64 / 1000.0)
        .max_by(|a, b| {
            let ua = expected_victim_utility(&p, &theta, a, &prior);
            let ub = expected_victim_utility(&p, &theta, b, &prior);
            ua.partial_cmp(&ub).unwrap()
        })
        .unwrap();
    assert!((best - (theta + 0.1)).abs() <= 1e-3 + 1e-12);
}

#[test]
fn expected_payment_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let m = rng.gen_range(1..=6);
        let p = dyadic_params(m, 16, 16);
        let theta_v = rat(rng.gen_range(0..1 << 16), 1 << rng.gen_range(0..8));
        let theta_a = theta_v.clone() * rat(rng.gen_range(0..=64), 64);
        let rep = Report::new(theta_v.clone(), theta_a).unwrap();
        let mean = outcome_distribution(&p, &rep)
            .into_iter()
            .fold(BigRational::zero(), |acc, (prob, t)| acc + prob * t.outcome.r_f);
        assert_eq!(mean, theta_v.clone() / int(2));
        assert_eq!(expected_payment(&p, &theta_v), mean);
    }
}

#[test]
fn expected_payment_monte_carlo() {
    let p = MechanismParams::<f64>::from_q(0.25, 8, 8).unwrap();
    let theta_v = 100.0;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for theta_a in [10.0, 60.0] {
        let rep = Report::new(theta_v, theta_a).unwrap();
        let n = 1_000_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let o = outcome_real(&p, &rep, &rng.gen::<f64>(), &rng.gen::<f64>()).unwrap();
            s += o.r_f;
            s2 += o.r_f * o.r_f;
        }
        let mean = s / n as f64;
        let sd = (s2 / n as f64 - mean * mean).sqrt();
        assert!((mean - theta_v / 2.0).abs() <= 3.0 * sd / (n as f64).sqrt(), "θA={theta_a} mean={mean}");
    }
}

#[test]
fn outcome_invariant_exhaustive_small_width() {
    for m in 1..=2 {
        let s = ScaledParams::from_params(&dyadic_params(m, 4, 4)).unwrap();
        for theta_v in 0..16 {
            for theta_a in 0..16 {
                for s0 in 0..16 {
                    for s1 in 0..16 {
                        let o = outcome_fixed(&s, &FixedReport { theta_v, theta_a }, s0, s1).unwrap();
                        assert!(o.is_consistent());
                        assert!(o.r_f <= theta_v);
                    }
                }
            }
        }
    }
}

#[test]
fn fixed_equals_real_on_representable_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for m in 1..=4u32 {
        let p = dyadic_params(m, 16, 12);
        let s = ScaledParams::from_params(&p).unwrap();
        for _ in 0..2000 {
            let theta_v = (rng.gen_range(0..1u64 << 16) >> m) << m;
            let theta_a = rng.gen_range(0..1u64 << 16);
            let (s0, s1) = (rng.gen_range(0..1u64 << 12), rng.gen_range(0..1u64 << 12));
            let (u0, u1) = coupled_draws(&s, &p, s0, s1);
            let fixed = trace_fixed(&s, &FixedReport { theta_v, theta_a }, s0, s1).unwrap();
            let real = trace_real(&p, &Report::new(int(theta_v), int(theta_a)).unwrap(), &u0, &u1).unwrap();
            assert_eq!(fixed.branch, real.branch);
            assert_eq!(fixed.low_offer, real.low_offer);
            assert_eq!(int(fixed.outcome.r_f), real.outcome.r_f);
        }
    }
}

proptest! {
    #[test]
    fn fixed_rounding_error_is_bounded(
        m in 1u32..=5,
        k in 8u32..=24,
        theta_v in 0u64..1 << 16,
        theta_a in 0u64..1 << 16,
        s0f in 0.0f64..1.0,
        s1f in 0.0f64..1.0,
    ) {
        let p = dyadic_params(m, 16, k);
        let s = ScaledParams::from_params(&p).unwrap();
        let (s0, s1) = ((s0f * (1u64 << k) as f64) as u64, (s1f * (1u64 << k) as f64) as u64);
        let (u0, u1) = coupled_draws(&s, &p, s0, s1);
        let fixed = trace_fixed(&s, &FixedReport { theta_v, theta_a }, s0, s1).unwrap();
        let real = trace_real(&p, &Report::new(int(theta_v), int(theta_a)).unwrap(), &u0, &u1).unwrap();
        prop_assert_eq!(fixed.low_offer, real.low_offer);
        if fixed.branch == real.branch {
            let diff = (int(fixed.outcome.r_f) - real.outcome.r_f).abs().to_f64().unwrap();
            let q = p.q().to_f64().unwrap();
            let bound = (theta_v as f64 * 2f64.powi(1 - k as i32) + 1.0) / q + 1.0;
            prop_assert!(diff <= bound, "diff {} bound {}", diff, bound);
        }
    }
}
