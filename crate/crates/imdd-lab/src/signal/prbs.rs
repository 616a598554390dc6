//! Maximal-length pseudo-random binary sequences from a Fibonacci LFSR.

use super::waveform::BitSequence;
use crate::error::{Error, Result};

/// Feedback stage numbers (1-indexed) of maximal-length Fibonacci LFSRs for
/// register orders 2..=31. Order n implements x^n + x^t1 + ... + 1; order 15
/// is x^15 + x^14 + 1. Entries 0 and 1 are unused placeholders.
const FEEDBACK_STAGES: [&[u32]; 32] = [
    &[],
    &[],
    &[2, 1],
    &[3, 2],
    &[4, 3],
    &[5, 3],
    &[6, 5],
    &[7, 6],
    &[8, 6, 5, 4],
    &[9, 5],
    &[10, 7],
    &[11, 9],
    &[12, 6, 4, 1],
    &[13, 4, 3, 1],
    &[14, 5, 3, 1],
    &[15, 14],
    &[16, 15, 13, 4],
    &[17, 14],
    &[18, 11],
    &[19, 6, 2, 1],
    &[20, 17],
    &[21, 19],
    &[22, 21],
    &[23, 18],
    &[24, 23, 22, 17],
    &[25, 22],
    &[26, 6, 2, 1],
    &[27, 5, 2, 1],
    &[28, 25],
    &[29, 27],
    &[30, 6, 4, 1],
    &[31, 28],
];

/// Fibonacci LFSR; stage i (1-indexed) lives in state bit i-1. Each step
/// emits stage `order`, then shifts every stage up by one and feeds the XOR
/// of the feedback stages into stage 1.
struct Lfsr {
    state: u32,
    order: u32,
    feedback_mask: u32,
}

impl Lfsr {
    fn new(order: u32, seed: u32) -> Result<Self> {
        if !(2..=31).contains(&order) {
            return Err(Error::invalid(format!("LFSR order must be in 2..=31, got {order}")));
        }
        let mask = ((1u64 << order) - 1) as u32;
        let state = seed & mask;
        if state == 0 {
            return Err(Error::invalid(
                "LFSR seed must be nonzero in the low `order` bits (the all-zero state is fixed)",
            ));
        }
        let feedback_mask =
            FEEDBACK_STAGES[order as usize].iter().fold(0u32, |m, &stage| m | 1 << (stage - 1));
        Ok(Self { state, order, feedback_mask })
    }

    fn step(&mut self) -> u8 {
        let out = ((self.state >> (self.order - 1)) & 1) as u8;
        let fb = (self.state & self.feedback_mask).count_ones() & 1;
        let mask = ((1u64 << self.order) - 1) as u32;
        self.state = ((self.state << 1) | fb) & mask;
        out
    }
}

/// Generates `length` bits from the maximal-length LFSR of the given order.
/// Bits above the register width of `seed` are ignored; the retained bits
/// must be nonzero. The sequence wraps cyclically once `length` exceeds the
/// period 2^order - 1, and is deterministic for fixed (order, seed).
pub fn generate_prbs(order: u32, seed: u32, length: usize) -> Result<BitSequence> {
    if length < 1 {
        return Err(Error::invalid("PRBS length must be at least 1"));
    }
    let mut lfsr = Lfsr::new(order, seed)?;
    let bits = (0..length).map(|_| lfsr.step()).collect();
    BitSequence::new(bits)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent step-by-step LFSR simulation on a plain bit vector,
    /// transcribed directly from the shift-register definition.
    fn lfsr_oracle(order: usize, stages: &[usize], seed: &[u8], n: usize) -> Vec<u8> {
        let mut reg = seed.to_vec(); // reg[i] holds stage i+1
        assert_eq!(reg.len(), order);
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(reg[order - 1]);
            let fb = stages.iter().fold(0u8, |acc, &s| acc ^ reg[s - 1]);
            for i in (1..order).rev() {
                reg[i] = reg[i - 1];
            }
            reg[0] = fb;
        }
        out
    }

    #[test]
    fn matches_bitwise_oracle() {
        for (order, stages) in [
            (7usize, vec![7usize, 6]),
            (15, vec![15, 14]),
            (23, vec![23, 18]),
            (31, vec![31, 28]),
        ] {
            let got = generate_prbs(order as u32, u32::MAX, 64).unwrap();
            let want = lfsr_oracle(order, &stages, &vec![1u8; order], 64);
            assert_eq!(got.bits(), &want[..], "order {order}");
        }
    }

    #[test]
    fn order7_wraps_at_period() {
        let bits = generate_prbs(7, u32::MAX, 254).unwrap();
        assert_eq!(&bits.bits()[..127], &bits.bits()[127..254]);
    }

    #[test]
    fn full_period_for_small_orders() {
        // Exhaustive state-cycle check: a maximal-length register visits all
        // 2^n - 1 nonzero states before returning to the seed.
        for order in 2..=20u32 {
            let mut lfsr = Lfsr::new(order, u32::MAX).unwrap();
            let seed = lfsr.state;
            let period = 2u64.pow(order) - 1;
            let mut count = 0u64;
            loop {
                lfsr.step();
                count += 1;
                if lfsr.state == seed {
                    break;
                }
                assert!(count <= period, "order {order}: period exceeds 2^n - 1");
            }
            assert_eq!(count, period, "order {order}");
        }
    }

    #[test]
    fn prbs15_balance() {
        let period = (1usize << 15) - 1;
        let bits = generate_prbs(15, u32::MAX, period).unwrap();
        assert_eq!(bits.ones(), 1 << 14);
        assert_eq!(period - bits.ones(), (1 << 14) - 1);
    }

    #[test]
    fn prbs15_frame_wraps_one_bit() {
        let bits = generate_prbs(15, u32::MAX, 1 << 15).unwrap();
        assert_eq!(bits.len(), 32768);
        // The first 2^15 - 1 bits form one full period; the last bit repeats
        // the first.
        assert_eq!(bits.bits()[32767], bits.bits()[0]);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(generate_prbs(1, 1, 8).is_err());
        assert!(generate_prbs(32, 1, 8).is_err());
        assert!(generate_prbs(15, 0, 8).is_err());
        // Seed bits above the register width are masked away first.
        assert!(generate_prbs(15, 1 << 20, 8).is_err());
        assert!(generate_prbs(15, 1, 0).is_err());
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let a = generate_prbs(15, 0x1234, 500).unwrap();
        let b = generate_prbs(15, 0x1234, 500).unwrap();
        assert_eq!(a.bits(), b.bits());
        let c = generate_prbs(15, 0x1235, 500).unwrap();
        assert_ne!(a.bits(), c.bits());
    }
}
