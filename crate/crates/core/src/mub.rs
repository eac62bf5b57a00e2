//! Partition of the non-identity Pauli labels into `D + 1` maximal commuting classes.
//!
//! Labels are identified with pairs `(x, z)` of GF(2^n) elements; the symplectic form
//! becomes `tr(x1 z2 + x2 z1)` once the z-part is read in the trace-dual basis. Class 0
//! is `{(0, z)}` (the computational Z class) and class `1 + a` is the Lagrangian
//! subspace `{(x, a x)}`. Generators are produced on demand from `J` alone.

use crate::error::{Error, Result};
use crate::field::GaloisField;
use crate::gf2;
use crate::pauli::{check_symbolic, mask, symplectic_unchecked, PauliLabel};

/// Largest `n` for which [`mub_classes`] materialises the full class list.
pub const MAX_LISTED_QUBITS: usize = 12;

/// Number of classes (and bases): `D + 1`.
pub fn num_classes(n: usize) -> u64 {
    (1u64 << n) + 1
}

/// The `J`-th maximal commuting class, described by `n` independent commuting generators.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MubClass {
    index: u64,
    generators: Vec<PauliLabel>,
}

impl MubClass {
    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn generators(&self) -> &[PauliLabel] {
        &self.generators
    }

    pub fn num_qubits(&self) -> usize {
        self.generators.len()
    }

    /// All `D` elements of the generated group, indexed by the combination bit-vector
    /// (bit `i` selects generator `i`).
    pub fn group_elements(&self) -> Vec<PauliLabel> {
        let n = self.num_qubits();
        (0..1u64 << n)
            .map(|combo| {
                let (x, z) = self
                    .generators
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| combo >> i & 1 == 1)
                    .fold((0, 0), |(x, z), (_, g)| (x ^ g.x_bits(), z ^ g.z_bits()));
                PauliLabel::from_bits_unchecked(n, x, z)
            })
            .collect()
    }
}

/// Bit `i` is set iff the label anticommutes with generator `i` of the class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CommutationVector {
    n: u8,
    bits: u64,
}

impl CommutationVector {
    pub fn new(n: usize, bits: u64) -> Result<Self> {
        check_symbolic(n)?;
        if bits & !mask(n) != 0 {
            return Err(Error::InvalidDesignState(format!("commutation vector wider than {n} bits")));
        }
        Ok(CommutationVector { n: n as u8, bits })
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn num_qubits(&self) -> usize {
        self.n as usize
    }
}

/// Generator set of class `index` for `n` qubits; computed directly without enumerating
/// other classes.
pub fn mub_class(n: usize, index: u64) -> Result<MubClass> {
    check_symbolic(n)?;
    if index >= num_classes(n) {
        return Err(Error::InvalidDesignState(format!(
            "base index {index} out of range for n = {n} (D + 1 = {})",
            num_classes(n)
        )));
    }
    let generators = if index == 0 {
        (0..n)
            .map(|i| PauliLabel::from_bits_unchecked(n, 0, 1 << (n - 1 - i)))
            .collect()
    } else {
        let field = GaloisField::new(n)?;
        let a = index - 1;
        (0..n)
            .map(|i| {
                let x = 1u64 << (n - 1 - i);
                let ax = field.mul(a, x);
                let z = (0..n).fold(0u64, |acc, j| acc | (field.trace(field.mul(ax, 1 << j)) as u64) << j);
                PauliLabel::from_bits_unchecked(n, x, z)
            })
            .collect()
    };
    Ok(MubClass { index, generators })
}

/// All `D + 1` classes, for `n <= MAX_LISTED_QUBITS`.
pub fn mub_classes(n: usize) -> Result<Vec<MubClass>> {
    if n == 0 || n > MAX_LISTED_QUBITS {
        return Err(Error::UnsupportedQubitCount { n, min: 1, max: MAX_LISTED_QUBITS });
    }
    (0..num_classes(n)).map(|j| mub_class(n, j)).collect()
}

pub fn commutation_vector(a: &PauliLabel, class: &MubClass) -> Result<CommutationVector> {
    if a.num_qubits() != class.num_qubits() {
        return Err(Error::QubitMismatch(a.num_qubits(), class.num_qubits()));
    }
    Ok(commutation_vector_unchecked(a, class))
}

#[inline]
pub(crate) fn commutation_vector_unchecked(a: &PauliLabel, class: &MubClass) -> CommutationVector {
    let bits = class
        .generators
        .iter()
        .enumerate()
        .fold(0u64, |acc, (i, g)| acc | (symplectic_unchecked(a, g) as u64) << i);
    CommutationVector { n: class.num_qubits() as u8, bits }
}

/// Precomputed inverse of the `2n x 2n` GF(2) system pairing two distinct classes, so that
/// each pair of commutation vectors resolves to a label in `O(n)` word operations.
#[derive(Debug, Clone)]
pub struct LabelSolver {
    n: usize,
    inverse: Vec<u64>,
}

impl LabelSolver {
    pub fn new(a: &MubClass, b: &MubClass) -> Result<Self> {
        let n = a.num_qubits();
        if n != b.num_qubits() {
            return Err(Error::QubitMismatch(n, b.num_qubits()));
        }
        if a.index == b.index {
            return Err(Error::InvalidDesignState(format!(
                "label solving needs two distinct bases, got {} twice",
                a.index
            )));
        }
        // Unknown packed as x | z << n; symp(v, g) = v.x . g.z + v.z . g.x.
        let rows: Vec<u64> = a
            .generators
            .iter()
            .chain(&b.generators)
            .map(|g| g.z_bits() | g.x_bits() << n)
            .collect();
        let inverse = gf2::invert(&rows).ok_or_else(|| {
            Error::Internal(format!("classes {} and {} do not span the symplectic space", a.index, b.index))
        })?;
        Ok(LabelSolver { n, inverse })
    }

    #[inline]
    pub fn solve_bits(&self, p_a: u64, p_b: u64) -> PauliLabel {
        let u = gf2::apply(&self.inverse, p_a | p_b << self.n);
        PauliLabel::from_bits_unchecked(self.n, u & mask(self.n), u >> self.n)
    }

    pub fn solve(&self, p_a: &CommutationVector, p_b: &CommutationVector) -> Result<PauliLabel> {
        if p_a.num_qubits() != self.n || p_b.num_qubits() != self.n {
            return Err(Error::QubitMismatch(self.n, p_a.num_qubits().max(p_b.num_qubits())));
        }
        Ok(self.solve_bits(p_a.bits, p_b.bits))
    }
}

/// The unique label whose commutation vectors with respect to two distinct classes are
/// `p_a` and `p_b`.
pub fn solve_label_from_constraints(
    class_a: &MubClass,
    p_a: &CommutationVector,
    class_b: &MubClass,
    p_b: &CommutationVector,
) -> Result<PauliLabel> {
    LabelSolver::new(class_a, class_b)?.solve(p_a, p_b)
}
