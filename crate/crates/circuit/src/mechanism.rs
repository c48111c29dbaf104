use parley_core::mechanism::{MechanismOutcome, MechanismParams, ScaledParams, MAX_PRODUCT_BITS};
use parley_core::Money;

use crate::{from_bits, to_bits, Builder, Circuit, CircuitError, Owner};

/// Bit widths of the mechanism circuit's inputs and outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MechanismLayout {
    pub k: u32,
    pub k_theta: u32,
}

/// One party's private inputs: its two coin shares and its reported type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PartyInputs {
    pub s0: u64,
    pub s1: u64,
    pub theta: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MechanismInputs {
    pub victim: PartyInputs,
    pub attacker: PartyInputs,
}

impl MechanismInputs {
    /// Coins after combining both shares.
    pub fn combined(&self) -> (u64, u64) {
        (self.victim.s0 ^ self.attacker.s0, self.victim.s1 ^ self.attacker.s1)
    }
}

impl MechanismLayout {
    /// Bits each party contributes.
    pub fn party_bits(&self) -> u32 {
        2 * self.k + self.k_theta
    }

    /// `r_f` width; the top bit is always zero.
    pub fn r_f_bits(&self) -> u32 {
        self.k_theta + 1
    }

    pub fn encode_party(&self, p: &PartyInputs) -> Vec<bool> {
        let mut bits = to_bits(p.s0, self.k);
        bits.extend(to_bits(p.s1, self.k));
        bits.extend(to_bits(p.theta, self.k_theta));
        bits
    }

    /// Victim bits followed by attacker bits.
    pub fn encode(&self, inputs: &MechanismInputs) -> Vec<bool> {
        let mut bits = self.encode_party(&inputs.victim);
        bits.extend(self.encode_party(&inputs.attacker));
        bits
    }

    /// Reads `(r_f, alpha, sigma)` from the output bits.
    pub fn decode(&self, bits: &[bool]) -> Result<MechanismOutcome<u64>, CircuitError> {
        let n = self.r_f_bits() as usize;
        if bits.len() != n + 2 {
            return Err(CircuitError::InputLength {
                expected: n + 2,
                got: bits.len(),
            });
        }
        Ok(MechanismOutcome {
            r_f: from_bits(&bits[..n]),
            alpha: bits[n],
            sigma: bits[n + 1],
        })
    }
}

/// The mechanism circuit together with its layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MechanismCircuit {
    pub circuit: Circuit,
    pub layout: MechanismLayout,
}

impl MechanismCircuit {
    pub fn eval(&self, inputs: &MechanismInputs) -> Result<MechanismOutcome<u64>, CircuitError> {
        let out = self.circuit.eval_plain(&self.layout.encode(inputs))?;
        self.layout.decode(&out)
    }
}

fn bit_length(x: u64) -> u32 {
    u64::BITS - x.leading_zeros()
}

/// Circuit computing the fixed-point outcome from both parties' shares.
///
/// Inputs in order: `s0_v`, `s1_v`, `theta_v` (victim, garbler) then
/// `s0_a`, `s1_a`, `theta_a` (attacker, evaluator). Outputs: `r_f`
/// (`k_θ + 1` bits), `alpha`, `sigma`.
pub fn build_mechanism_circuit<T: Money>(
    params: &MechanismParams<T>,
    scaled: &ScaledParams,
) -> Result<MechanismCircuit, CircuitError> {
    if params.k() != scaled.k || params.k_theta() != scaled.k_theta {
        return Err(CircuitError::Malformed("bit widths differ between parameter sets"));
    }
    build_from_scaled(scaled)
}

/// As [`build_mechanism_circuit`], from the scaled constants alone.
pub fn build_from_scaled(scaled: &ScaledParams) -> Result<MechanismCircuit, CircuitError> {
    let (k, kt) = (scaled.k, scaled.k_theta);
    if k == 0 || kt == 0 || k >= 64 || kt >= 64 {
        return Err(CircuitError::TooLarge("bit widths"));
    }
    if scaled.product_width() > MAX_PRODUCT_BITS {
        return Err(CircuitError::TooLarge("product width"));
    }
    if scaled.q_scale >= 1 << k || scaled.p_scale > 1 << k {
        return Err(CircuitError::Malformed("scaled probability out of range"));
    }
    // 1/q ≥ 2 keeps the shifted product at least k_θ bits wide.
    let inv_width = bit_length(scaled.inv_q_scale).max(k + 1);

    let mut b = Builder::new();
    let s0_v = b.input("s0_v", Owner::Garbler, k);
    let s1_v = b.input("s1_v", Owner::Garbler, k);
    let theta_v = b.input("theta_v", Owner::Garbler, kt);
    let s0_a = b.input("s0_a", Owner::Evaluator, k);
    let s1_a = b.input("s1_a", Owner::Evaluator, k);
    let theta_a = b.input("theta_a", Owner::Evaluator, kt);

    let s0: Vec<_> = s0_v.iter().zip(&s0_a).map(|(&x, &y)| b.xor(x, y)).collect();
    let s1: Vec<_> = s1_v.iter().zip(&s1_a).map(|(&x, &y)| b.xor(x, y)).collect();

    // p_scale may equal 2^k, so compare at k+1 bits.
    let s0_wide = b.extend(&s0, k as usize + 1);
    let p_const = b.constant(scaled.p_scale, k + 1);
    let low = b.lt(&s0_wide, &p_const);
    let q_const = b.constant(scaled.q_scale, k);
    let pay = b.lt(&s1, &q_const);

    // Round 2: r₂ = low ? (q_scale·θV) >> k : θV.
    let qv_full = b.mul(&theta_v, &q_const);
    let qv = qv_full[k as usize..].to_vec();
    let r2 = b.mux(low, &qv, &theta_v);

    // Round 3: accept if θA ≤ r₂, else r₃ = max((r₂·inv_q_scale) >> k, θA).
    let accept = b.le(&theta_a, &r2);
    let inv_const = b.constant(scaled.inv_q_scale, inv_width);
    let over_q_full = b.mul(&r2, &inv_const);
    let over_q = over_q_full[k as usize..].to_vec();
    let wide = over_q.len();
    let theta_a_wide = b.extend(&theta_a, wide);
    let theta_v_wide = b.extend(&theta_v, wide);
    let a_above = b.lt(&over_q, &theta_a_wide);
    let r3 = b.mux(a_above, &theta_a_wide, &over_q);

    // Round 4.
    let within = b.le(&r3, &theta_v_wide);
    let paid = b.and(within, pay);
    let paid_amount = b.gate_word(paid, &r3[..kt as usize]);
    let r_f = b.mux(accept, &r2, &paid_amount);

    let not_accept = b.not(accept);
    let not_pay = b.not(pay);
    let reached_round4 = b.and(not_accept, within);
    let sigma = b.and(reached_round4, not_pay);
    let nonzero = b.any(&r_f);
    let alpha = b.or(nonzero, sigma);

    let mut r_f_out = r_f;
    r_f_out.push(b.zero());
    b.output("r_f", r_f_out);
    b.output("alpha", vec![alpha]);
    b.output("sigma", vec![sigma]);

    Ok(MechanismCircuit {
        circuit: b.finish(),
        layout: MechanismLayout { k, k_theta: kt },
    })
}
