//! Phase-free n-qubit Pauli labels in symplectic (x, z) bit-vector form.
//!
//! Qubit `q` (position `q` in the string form, leftmost first) is stored at bit `n - 1 - q`
//! of both words, so the bit layout coincides with the computational basis index of the
//! dense representation, where qubit 0 is the most significant tensor factor.
//!
//! The dense representative of a label is the Hermitian tensor product of `I, X, Y, Z`,
//! i.e. `i^{|x & z|} X^x Z^z`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalar::{czero, i_pow, Real, C};

/// Largest qubit count supported by the symbolic layer.
pub const MAX_SYMBOLIC_QUBITS: usize = 32;

/// Largest qubit count for which dense `D x D` matrices are built.
pub const DENSE_CAP: usize = 6;

pub(crate) fn check_dense(n: usize) -> Result<()> {
    if n > DENSE_CAP {
        Err(Error::DenseCapExceeded { n, cap: DENSE_CAP })
    } else {
        Ok(())
    }
}

pub(crate) fn check_symbolic(n: usize) -> Result<()> {
    if n == 0 || n > MAX_SYMBOLIC_QUBITS {
        Err(Error::UnsupportedQubitCount { n, min: 1, max: MAX_SYMBOLIC_QUBITS })
    } else {
        Ok(())
    }
}

#[inline]
pub(crate) fn mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

#[inline]
fn parity(v: u64) -> u8 {
    (v.count_ones() & 1) as u8
}

/// Exponent `θ` of a phase `i^θ`, kept in `0..4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct PhaseExponent(u8);

impl PhaseExponent {
    pub const ONE: PhaseExponent = PhaseExponent(0);

    pub fn new(value: u32) -> Self {
        PhaseExponent((value & 3) as u8)
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn add(self, other: PhaseExponent) -> Self {
        PhaseExponent((self.0 + other.0) & 3)
    }

    pub fn neg(self) -> Self {
        PhaseExponent((4 - self.0) & 3)
    }

    pub fn to_complex<T: Real>(self) -> C<T> {
        i_pow(self.0)
    }
}

/// Single-qubit Pauli factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// An n-qubit Pauli operator without phase.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliLabel {
    n: u8,
    x: u64,
    z: u64,
}

impl PauliLabel {
    pub fn identity(n: usize) -> Result<Self> {
        check_symbolic(n)?;
        Ok(PauliLabel { n: n as u8, x: 0, z: 0 })
    }

    /// Builds a label from raw words; bits above `n` are rejected.
    pub fn from_bits(n: usize, x: u64, z: u64) -> Result<Self> {
        check_symbolic(n)?;
        let m = mask(n);
        if x & !m != 0 || z & !m != 0 {
            return Err(Error::InvalidLabel(format!("bits beyond {n} qubits set")));
        }
        Ok(PauliLabel { n: n as u8, x, z })
    }

    pub(crate) fn from_bits_unchecked(n: usize, x: u64, z: u64) -> Self {
        PauliLabel { n: n as u8, x, z }
    }

    /// A single-qubit Pauli acting on `qubit`, identity elsewhere.
    pub fn single(n: usize, qubit: usize, p: Pauli) -> Result<Self> {
        check_symbolic(n)?;
        if qubit >= n {
            return Err(Error::InvalidLabel(format!("qubit {qubit} out of range for n = {n}")));
        }
        let (bx, bz) = p.bits();
        let bit = 1u64 << (n - 1 - qubit);
        Ok(PauliLabel {
            n: n as u8,
            x: if bx { bit } else { 0 },
            z: if bz { bit } else { 0 },
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.n as usize
    }

    pub fn x_bits(&self) -> u64 {
        self.x
    }

    pub fn z_bits(&self) -> u64 {
        self.z
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    pub fn weight(&self) -> u32 {
        (self.x | self.z).count_ones()
    }

    pub fn factor(&self, qubit: usize) -> Pauli {
        let bit = 1u64 << (self.num_qubits() - 1 - qubit);
        Pauli::from_bits(self.x & bit != 0, self.z & bit != 0)
    }

    /// Dense index `x * D + z`; the identity has index 0.
    pub fn index(&self) -> usize {
        ((self.x as usize) << self.n) | self.z as usize
    }

    pub fn from_index(n: usize, index: usize) -> Result<Self> {
        check_dense(n)?;
        check_symbolic(n)?;
        if index >= 1usize << (2 * n) {
            return Err(Error::InvalidLabel(format!("index {index} out of range for n = {n}")));
        }
        Ok(PauliLabel {
            n: n as u8,
            x: (index >> n) as u64,
            z: (index as u64) & mask(n),
        })
    }

    /// Number of Hermitian phase factors `|x & z|` (count of `Y` factors).
    pub(crate) fn y_count(&self) -> u32 {
        (self.x & self.z).count_ones()
    }

    fn same_n(&self, other: &PauliLabel) -> Result<()> {
        if self.n != other.n {
            Err(Error::QubitMismatch(self.num_qubits(), other.num_qubits()))
        } else {
            Ok(())
        }
    }
}

/// All `4^n` labels in index order.
pub fn all_labels(n: usize) -> Result<impl Iterator<Item = PauliLabel>> {
    check_symbolic(n)?;
    check_dense(n)?;
    Ok((0..1usize << (2 * n)).map(move |i| PauliLabel {
        n: n as u8,
        x: (i >> n) as u64,
        z: (i as u64) & mask(n),
    }))
}

/// Product `P_a P_b = i^θ P_c`.
pub fn pauli_mul(a: &PauliLabel, b: &PauliLabel) -> Result<(PauliLabel, PhaseExponent)> {
    a.same_n(b)?;
    Ok(pauli_mul_unchecked(a, b))
}

pub(crate) fn pauli_mul_unchecked(a: &PauliLabel, b: &PauliLabel) -> (PauliLabel, PhaseExponent) {
    let c = PauliLabel { n: a.n, x: a.x ^ b.x, z: a.z ^ b.z };
    let theta = a.y_count() + b.y_count() + 2 * (a.z & b.x).count_ones() + 3 * c.y_count();
    (c, PhaseExponent::new(theta))
}

/// 0 if the operators commute, 1 if they anticommute.
pub fn symplectic_product(a: &PauliLabel, b: &PauliLabel) -> Result<u8> {
    a.same_n(b)?;
    Ok(symplectic_unchecked(a, b))
}

#[inline]
pub(crate) fn symplectic_unchecked(a: &PauliLabel, b: &PauliLabel) -> u8 {
    parity((a.x & b.z) ^ (a.z & b.x))
}

/// Dense `D x D` matrix of the Hermitian representative.
pub fn pauli_matrix<T: Real>(a: &PauliLabel) -> Result<DMatrix<C<T>>> {
    let n = a.num_qubits();
    check_dense(n)?;
    let d = 1usize << n;
    let mut m = DMatrix::from_element(d, d, czero::<T>());
    let base = a.y_count() as u8;
    for col in 0..d {
        let sign = 2 * parity(a.z & col as u64);
        m[(col ^ a.x as usize, col)] = i_pow(base + sign);
    }
    Ok(m)
}

/// `P_a |v⟩` without materialising the matrix.
pub(crate) fn apply_to_vector<T: Real>(a: &PauliLabel, v: &[C<T>]) -> Vec<C<T>> {
    let mut out = vec![czero::<T>(); v.len()];
    let base = a.y_count() as u8;
    for (col, amp) in v.iter().enumerate() {
        let sign = 2 * parity(a.z & col as u64);
        out[col ^ a.x as usize] = *amp * i_pow::<T>(base + sign);
    }
    out
}

/// `P_a · A` without materialising `P_a`.
pub(crate) fn left_multiply<T: Real>(a: &PauliLabel, m: &DMatrix<C<T>>) -> DMatrix<C<T>> {
    let d = m.nrows();
    let base = a.y_count() as u8;
    let mut out = DMatrix::from_element(d, m.ncols(), czero::<T>());
    for row_in in 0..d {
        let phase: C<T> = i_pow(base + 2 * parity(a.z & row_in as u64));
        let row_out = row_in ^ a.x as usize;
        for col in 0..m.ncols() {
            out[(row_out, col)] = phase * m[(row_in, col)];
        }
    }
    out
}

/// `Tr[P_a · A]`.
pub(crate) fn trace_product<T: Real>(a: &PauliLabel, m: &DMatrix<C<T>>) -> C<T> {
    let base = a.y_count() as u8;
    let mut acc = czero::<T>();
    for col in 0..m.nrows() {
        let phase: C<T> = i_pow(base + 2 * parity(a.z & col as u64));
        acc += phase * m[(col, col ^ a.x as usize)];
    }
    acc
}

impl fmt::Display for PauliLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in 0..self.num_qubits() {
            write!(f, "{}", self.factor(q).as_char())?;
        }
        Ok(())
    }
}

impl fmt::Debug for PauliLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PauliLabel({self})")
    }
}

impl FromStr for PauliLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let n = s.chars().count();
        if n == 0 || n > MAX_SYMBOLIC_QUBITS {
            return Err(Error::InvalidLabel(format!("{s:?}: length must be 1..={MAX_SYMBOLIC_QUBITS}")));
        }
        let mut x = 0u64;
        let mut z = 0u64;
        for (q, ch) in s.chars().enumerate() {
            let p = match ch.to_ascii_uppercase() {
                'I' => Pauli::I,
                'X' => Pauli::X,
                'Y' => Pauli::Y,
                'Z' => Pauli::Z,
                other => return Err(Error::InvalidLabel(format!("{s:?}: unexpected character {other:?}"))),
            };
            let (bx, bz) = p.bits();
            let bit = 1u64 << (n - 1 - q);
            if bx {
                x |= bit;
            }
            if bz {
                z |= bit;
            }
        }
        Ok(PauliLabel { n: n as u8, x, z })
    }
}
