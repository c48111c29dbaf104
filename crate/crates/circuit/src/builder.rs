use crate::{Circuit, Gate, GateKind, InputRange, OutputRange, Owner, Wire, NO_WIRE};

/// Incremental circuit construction with arithmetic gadgets.
///
/// Words are little-endian `Vec<Wire>`. No gadget inspects constant values,
/// so the gate structure depends only on word widths.
#[derive(Debug, Default)]
pub struct Builder {
    wire_count: u32,
    gates: Vec<Gate>,
    inputs: Vec<InputRange>,
    outputs: Vec<OutputRange>,
    zero: Option<Wire>,
    one: Option<Wire>,
}

impl Builder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declares an input word. All inputs must be declared before any gate.
    pub fn input(&mut self, label: &str, owner: Owner, len: u32) -> Vec<Wire> {
        assert!(self.gates.is_empty(), "inputs must precede gates");
        let start = self.wire_count;
        self.wire_count += len;
        self.inputs.push(InputRange {
            label: label.to_string(),
            owner,
            start,
            len,
        });
        (start..start + len).collect()
    }

    pub fn output(&mut self, label: &str, wires: Vec<Wire>) {
        self.outputs.push(OutputRange {
            label: label.to_string(),
            wires,
        });
    }

    pub fn finish(self) -> Circuit {
        Circuit::new(self.wire_count, self.gates, self.inputs, self.outputs).expect("builder keeps invariants")
    }

    fn gate(&mut self, kind: GateKind, in_a: Wire, in_b: Wire) -> Wire {
        let out = self.wire_count;
        self.wire_count += 1;
        self.gates.push(Gate { kind, in_a, in_b, out });
        out
    }

    pub fn xor(&mut self, a: Wire, b: Wire) -> Wire {
        self.gate(GateKind::Xor, a, b)
    }

    pub fn and(&mut self, a: Wire, b: Wire) -> Wire {
        self.gate(GateKind::And, a, b)
    }

    pub fn not(&mut self, a: Wire) -> Wire {
        self.gate(GateKind::Not, a, NO_WIRE)
    }

    pub fn or(&mut self, a: Wire, b: Wire) -> Wire {
        let x = self.xor(a, b);
        let y = self.and(a, b);
        self.xor(x, y)
    }

    /// Constant 0, as `w0 ⊕ w0`.
    pub fn zero(&mut self) -> Wire {
        if let Some(z) = self.zero {
            return z;
        }
        assert!(self.wire_count > 0, "constants need at least one input wire");
        let z = self.xor(0, 0);
        self.zero = Some(z);
        z
    }

    pub fn one(&mut self) -> Wire {
        if let Some(o) = self.one {
            return o;
        }
        let z = self.zero();
        let o = self.not(z);
        self.one = Some(o);
        o
    }

    /// `value` hard-wired as a `width`-bit word.
    pub fn constant(&mut self, value: u64, width: u32) -> Vec<Wire> {
        let (zero, one) = (self.zero(), self.one());
        (0..width)
            .map(|i| if i < 64 && (value >> i) & 1 == 1 { one } else { zero })
            .collect()
    }

    /// `word` padded with zero wires to `width`.
    pub fn extend(&mut self, word: &[Wire], width: usize) -> Vec<Wire> {
        assert!(word.len() <= width);
        let zero = self.zero();
        let mut out = word.to_vec();
        out.resize(width, zero);
        out
    }

    /// Full adder with a single AND: `cout = c ⊕ ((a⊕c) ∧ (b⊕c))`.
    fn full_add(&mut self, a: Wire, b: Wire, c: Wire) -> (Wire, Wire) {
        let ac = self.xor(a, c);
        let bc = self.xor(b, c);
        let sum = self.xor(ac, b);
        let t = self.and(ac, bc);
        let carry = self.xor(c, t);
        (sum, carry)
    }

    /// Sum of two equal-width words plus the carry out.
    pub fn add(&mut self, a: &[Wire], b: &[Wire]) -> (Vec<Wire>, Wire) {
        assert_eq!(a.len(), b.len());
        let mut carry = self.zero();
        let mut sum = Vec::with_capacity(a.len());
        for (&x, &y) in a.iter().zip(b) {
            let (s, c) = self.full_add(x, y, carry);
            sum.push(s);
            carry = c;
        }
        (sum, carry)
    }

    /// Unsigned `a < b` for equal-width words: no carry out of `a + ¬b + 1`.
    pub fn lt(&mut self, a: &[Wire], b: &[Wire]) -> Wire {
        assert_eq!(a.len(), b.len());
        let mut carry = self.one();
        for (&x, &y) in a.iter().zip(b) {
            let ny = self.not(y);
            let xc = self.xor(x, carry);
            let yc = self.xor(ny, carry);
            let t = self.and(xc, yc);
            carry = self.xor(carry, t);
        }
        self.not(carry)
    }

    /// Unsigned `a ≤ b`.
    pub fn le(&mut self, a: &[Wire], b: &[Wire]) -> Wire {
        let gt = self.lt(b, a);
        self.not(gt)
    }

    /// `s ? x1 : x0`, bitwise.
    pub fn mux(&mut self, s: Wire, x1: &[Wire], x0: &[Wire]) -> Vec<Wire> {
        assert_eq!(x1.len(), x0.len());
        x1.iter()
            .zip(x0)
            .map(|(&one, &zero)| {
                let d = self.xor(one, zero);
                let m = self.and(s, d);
                self.xor(zero, m)
            })
            .collect()
    }

    /// Each bit of `word` ANDed with `s`.
    pub fn gate_word(&mut self, s: Wire, word: &[Wire]) -> Vec<Wire> {
        word.iter().map(|&w| self.and(s, w)).collect()
    }

    /// OR of all bits.
    pub fn any(&mut self, word: &[Wire]) -> Wire {
        let mut acc = self.zero();
        for &w in word {
            acc = self.or(acc, w);
        }
        acc
    }

    /// Full-width product, `a.len() + b.len()` bits, by shift and add.
    pub fn mul(&mut self, a: &[Wire], b: &[Wire]) -> Vec<Wire> {
        let n = a.len();
        let zero = self.zero();
        let mut acc = vec![zero; n + b.len()];
        for (i, &bi) in b.iter().enumerate() {
            let row = self.gate_word(bi, a);
            // acc < 2^(n+i) here, so the carry lands in a zero bit.
            let (sum, carry) = self.add(&acc[i..i + n], &row);
            acc[i..i + n].copy_from_slice(&sum);
            acc[i + n] = carry;
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{from_bits, to_bits};

    /// Builds a two-operand circuit and evaluates it on every input pair.
    fn exhaustive<F, G>(wa: u32, wb: u32, build: F, expect: G)
    where
        F: Fn(&mut Builder, &[Wire], &[Wire]) -> Vec<Wire>,
        G: Fn(u64, u64) -> u64,
    {
        let mut b = Builder::new();
        let x = b.input("a", Owner::Garbler, wa);
        let y = b.input("b", Owner::Evaluator, wb);
        let out = build(&mut b, &x, &y);
        b.output("out", out);
        let c = b.finish();
        for a in 0..1u64 << wa {
            for bv in 0..1u64 << wb {
                let mut bits = to_bits(a, wa);
                bits.extend(to_bits(bv, wb));
                assert_eq!(from_bits(&c.eval_plain(&bits).unwrap()), expect(a, bv), "a={a} b={bv}");
            }
        }
    }

    #[test]
    fn adder_exhaustive() {
        for w in 1..=6 {
            exhaustive(
                w,
                w,
                |b, x, y| {
                    let (mut s, c) = b.add(x, y);
                    s.push(c);
                    s
                },
                |a, b| a + b,
            );
        }
    }

    #[test]
    fn comparators_exhaustive() {
        for w in 1..=6 {
            exhaustive(w, w, |b, x, y| vec![b.lt(x, y)], |a, b| (a < b) as u64);
            exhaustive(w, w, |b, x, y| vec![b.le(x, y)], |a, b| (a <= b) as u64);
        }
    }

    #[test]
    fn multiplier_exhaustive() {
        for wa in 1..=6 {
            for wb in 1..=6 {
                if wa + wb <= 12 {
                    exhaustive(wa, wb, |b, x, y| b.mul(x, y), |a, b| a * b);
                }
            }
        }
    }

    #[test]
    fn mux_and_any_exhaustive() {
        for w in 1..=5 {
            exhaustive(
                1,
                2 * w,
                |b, s, xy| {
                    let (x1, x0) = xy.split_at(w as usize);
                    b.mux(s[0], x1, x0)
                },
                |s, xy| {
                    let mask = (1 << w) - 1;
                    if s == 1 { xy & mask } else { xy >> w }
                },
            );
            exhaustive(w, 1, |b, x, _| vec![b.any(x)], |a, _| (a != 0) as u64);
        }
    }

    #[test]
    fn constants_compare() {
        for w in 1..=6u32 {
            for k in 0..1u64 << w {
                exhaustive(
                    w,
                    1,
                    |b, x, _| {
                        let c = b.constant(k, w);
                        vec![b.lt(x, &c)]
                    },
                    |a, _| (a < k) as u64,
                );
            }
        }
    }

    #[test]
    fn and_count_ignores_constant_value() {
        let count = |k: u64| {
            let mut b = Builder::new();
            let x = b.input("x", Owner::Garbler, 6);
            let c = b.constant(k, 6);
            let p = b.mul(&x, &c);
            b.output("p", p);
            b.finish().and_count()
        };
        assert_eq!(count(0), count(63));
        assert_eq!(count(5), count(32));
    }
}
