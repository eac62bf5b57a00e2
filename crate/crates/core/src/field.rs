//! Arithmetic in GF(2^n) for n <= 32 in the polynomial basis `1, α, ..., α^{n-1}`.

use crate::error::{Error, Result};
use crate::pauli::MAX_SYMBOLIC_QUBITS;

/// Lexicographically smallest irreducible polynomial of each degree 1..=32 over GF(2),
/// including the leading term.
pub const IRREDUCIBLE: [u64; MAX_SYMBOLIC_QUBITS] = [
    0x3, 0x7, 0xb, 0x13, 0x25, 0x43, 0x83, 0x11b, 0x203, 0x409, 0x805, 0x1009, 0x201b, 0x4021,
    0x8003, 0x1002b, 0x20009, 0x40009, 0x80027, 0x100009, 0x200005, 0x400003, 0x800021,
    0x100001b, 0x2000009, 0x400001b, 0x8000027, 0x10000003, 0x20000005, 0x40000003,
    0x80000009, 0x10000008d,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GaloisField {
    degree: usize,
    modulus: u64,
    /// Bit `j` holds `tr(α^j)`.
    trace_mask: u64,
}

impl GaloisField {
    pub fn new(degree: usize) -> Result<Self> {
        if degree == 0 || degree > MAX_SYMBOLIC_QUBITS {
            return Err(Error::UnsupportedQubitCount { n: degree, min: 1, max: MAX_SYMBOLIC_QUBITS });
        }
        let mut f = GaloisField { degree, modulus: IRREDUCIBLE[degree - 1], trace_mask: 0 };
        let mut mask = 0u64;
        for j in 0..degree {
            if f.slow_trace(1u64 << j) == 1 {
                mask |= 1 << j;
            }
        }
        f.trace_mask = mask;
        Ok(f)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn mul(&self, mut a: u64, mut b: u64) -> u64 {
        let top = 1u64 << self.degree;
        let mut acc = 0u64;
        while b != 0 {
            if b & 1 == 1 {
                acc ^= a;
            }
            b >>= 1;
            a <<= 1;
            if a & top != 0 {
                a ^= self.modulus;
            }
        }
        acc
    }

    /// Absolute trace to GF(2).
    pub fn trace(&self, a: u64) -> u8 {
        ((a & self.trace_mask).count_ones() & 1) as u8
    }

    fn slow_trace(&self, a: u64) -> u8 {
        let mut acc = 0u64;
        let mut p = a;
        for _ in 0..self.degree {
            acc ^= p;
            p = self.mul(p, p);
        }
        debug_assert!(acc <= 1, "trace must land in the prime field");
        acc as u8
    }
}
