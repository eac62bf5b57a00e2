//! The MUB state 2-design: `D (D + 1)` states `|ψ^J_k⟩`, where `J` selects a commuting
//! class and bit `i` of `k` fixes the `(−1)^{k_i}` eigenvalue of generator `i`.
//!
//! Each state is the normalised image of a computational fiducial under the projectors
//! `(I + (−1)^{k_i} P^J_i) / 2`; the global phase makes the first nonzero amplitude real
//! and positive.

use std::sync::OnceLock;

use nalgebra::DMatrix;
use rand::Rng;

use crate::channel::DensityMatrix;
use crate::error::{Error, Result};
use crate::mub::{commutation_vector_unchecked, mub_class, num_classes, MubClass};
use crate::pauli::{apply_to_vector, check_dense, check_symbolic, mask, PauliLabel};
use crate::scalar::{c, cabs, czero, Real, C};

/// Address `(J, k)` of a design state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DesignStateId {
    n: u8,
    base: u64,
    k: u64,
}

impl DesignStateId {
    pub fn new(n: usize, base: u64, k: u64) -> Result<Self> {
        check_symbolic(n)?;
        if base >= num_classes(n) {
            return Err(Error::InvalidDesignState(format!("base {base} out of range for n = {n}")));
        }
        if k & !mask(n) != 0 {
            return Err(Error::InvalidDesignState(format!("label {k:#b} wider than {n} bits")));
        }
        Ok(DesignStateId { n: n as u8, base, k })
    }

    pub fn num_qubits(&self) -> usize {
        self.n as usize
    }

    pub fn base(&self) -> u64 {
        self.base
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    /// Position in the `J`-major enumeration of the design (dense `n` only).
    pub fn flat_index(&self) -> usize {
        ((self.base as usize) << self.n) | self.k as usize
    }
}

/// Normalised amplitudes of an `n`-qubit pure state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector<T: Real> {
    n: usize,
    amplitudes: Vec<C<T>>,
}

impl<T: Real> StateVector<T> {
    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[C<T>] {
        &self.amplitudes
    }

    pub fn inner(&self, other: &StateVector<T>) -> C<T> {
        inner(&self.amplitudes, &other.amplitudes)
    }

    pub fn projector(&self) -> DensityMatrix<T> {
        let d = self.amplitudes.len();
        let m = DMatrix::from_fn(d, d, |r, col| self.amplitudes[r] * self.amplitudes[col].conj());
        DensityMatrix::from_raw(self.n, m)
    }
}

/// `⟨a|b⟩`.
#[inline]
pub(crate) fn inner<T: Real>(a: &[C<T>], b: &[C<T>]) -> C<T> {
    a.iter().zip(b).fold(czero::<T>(), |acc, (x, y)| acc + x.conj() * y)
}

fn project_fiducial<T: Real>(class: &MubClass, k: u64, fiducial: usize, d: usize) -> Vec<C<T>> {
    let half = c(T::lit(0.5), T::zero());
    let mut v = vec![czero::<T>(); d];
    v[fiducial] = c(T::one(), T::zero());
    for (i, g) in class.generators().iter().enumerate() {
        let pv = apply_to_vector(g, &v);
        let negate = (k >> i) & 1 == 1;
        for (a, b) in v.iter_mut().zip(pv) {
            *a = if negate { (*a - b) * half } else { (*a + b) * half };
        }
    }
    v
}

fn build_state<T: Real>(class: &MubClass, k: u64) -> Result<Vec<C<T>>> {
    let n = class.num_qubits();
    let d = 1usize << n;
    // Surviving weight is |⟨ψ|b⟩|², either 0 or at least 1/D.
    let floor = T::lit(0.5) / T::from_usize(d).unwrap();
    for fiducial in 0..d {
        let v = project_fiducial::<T>(class, k, fiducial, d);
        let weight = v.iter().fold(T::zero(), |acc, a| acc + a.norm_sqr());
        if weight < floor {
            continue;
        }
        let scale = weight.sqrt();
        let lead = v
            .iter()
            .find(|a| a.norm_sqr() >= floor * floor)
            .copied()
            .ok_or_else(|| Error::Internal("projected fiducial has no leading amplitude".into()))?;
        let phase = lead.conj() / c(cabs(lead) * scale, T::zero());
        return Ok(v.into_iter().map(|a| a * phase).collect());
    }
    Err(Error::Internal(format!("every fiducial annihilated for base {} k {k:#b}", class.index())))
}

/// The design state `|ψ^J_k⟩`.
pub fn mub_state<T: Real>(id: &DesignStateId) -> Result<StateVector<T>> {
    let n = id.num_qubits();
    check_dense(n)?;
    let class = mub_class(n, id.base)?;
    Ok(StateVector { n, amplitudes: build_state(&class, id.k)? })
}

/// One measurement basis: the class and its `D` states as matrix columns (column `k`).
#[derive(Debug, Clone)]
pub struct MubBasis<T: Real> {
    class: MubClass,
    states: DMatrix<C<T>>,
}

impl<T: Real> MubBasis<T> {
    pub fn new(n: usize, base: u64) -> Result<Self> {
        check_dense(n)?;
        let class = mub_class(n, base)?;
        let d = 1usize << n;
        let mut states = DMatrix::from_element(d, d, czero::<T>());
        for k in 0..d {
            let v = build_state::<T>(&class, k as u64)?;
            states.set_column(k, &nalgebra::DVector::from_vec(v));
        }
        Ok(MubBasis { class, states })
    }

    pub fn class(&self) -> &MubClass {
        &self.class
    }

    /// Columns are the basis states ordered by `k`; the matrix is unitary.
    pub fn states(&self) -> &DMatrix<C<T>> {
        &self.states
    }

    pub fn state(&self, k: u64) -> &[C<T>] {
        let d = self.states.nrows();
        &self.states.as_slice()[k as usize * d..(k as usize + 1) * d]
    }

    /// `⟨ψ^J_k|ρ|ψ^J_k⟩` for every `k`, as `f64`.
    pub fn outcome_probabilities(&self, rho: &DMatrix<C<T>>) -> Vec<f64> {
        let d = self.states.nrows();
        (0..d)
            .map(|k| {
                let s = self.state(k as u64);
                let rs = rho * nalgebra::DVector::from_column_slice(s);
                inner(s, rs.as_slice()).re.as_f64()
            })
            .collect()
    }
}

/// All `D + 1` bases for a dense `n`, built lazily and shared read-only.
#[derive(Debug)]
pub struct Design<T: Real> {
    n: usize,
    bases: Vec<OnceLock<MubBasis<T>>>,
}

impl<T: Real> Design<T> {
    pub fn new(n: usize) -> Result<Self> {
        check_symbolic(n)?;
        check_dense(n)?;
        let bases = (0..num_classes(n)).map(|_| OnceLock::new()).collect();
        Ok(Design { n, bases })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    /// `D (D + 1)`.
    pub fn len(&self) -> usize {
        self.dim() * (self.dim() + 1)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn basis(&self, base: u64) -> Result<&MubBasis<T>> {
        let slot = self
            .bases
            .get(base as usize)
            .ok_or_else(|| Error::InvalidDesignState(format!("base {base} out of range")))?;
        if let Some(b) = slot.get() {
            return Ok(b);
        }
        let built = MubBasis::new(self.n, base)?;
        Ok(slot.get_or_init(|| built))
    }

    pub fn state(&self, id: &DesignStateId) -> Result<&[C<T>]> {
        if id.num_qubits() != self.n {
            return Err(Error::QubitMismatch(self.n, id.num_qubits()));
        }
        Ok(self.basis(id.base)?.state(id.k))
    }

    /// Every state id in `J`-major order.
    pub fn ids(&self) -> impl Iterator<Item = DesignStateId> + '_ {
        let d = self.dim() as u64;
        let n = self.n as u8;
        (0..=d).flat_map(move |base| (0..d).map(move |k| DesignStateId { n, base, k }))
    }

    /// `(1 / D(D+1)) Σ_ψ ⟨ψ|O_1 P_ψ O_2|ψ⟩` over the full design.
    pub fn average_survival(&self, op1: &DMatrix<C<T>>, op2: &DMatrix<C<T>>) -> Result<C<T>> {
        let d = self.dim();
        for op in [op1, op2] {
            if op.nrows() != d || op.ncols() != d {
                return Err(Error::DimensionMismatch { expected: d, found: op.nrows() });
            }
        }
        let mut acc = czero::<T>();
        for id in self.ids() {
            let s = nalgebra::DVector::from_column_slice(self.state(&id)?);
            let a = s.dotc(&(op1 * &s));
            let b = s.dotc(&(op2 * &s));
            acc += a * b;
        }
        Ok(acc / c(T::from_usize(self.len()).unwrap(), T::zero()))
    }

    pub fn measure<R: Rng + ?Sized>(&self, rho: &DensityMatrix<T>, base: u64, rng: &mut R) -> Result<u64> {
        if rho.num_qubits() != self.n {
            return Err(Error::QubitMismatch(self.n, rho.num_qubits()));
        }
        let mut probs = self.basis(base)?.outcome_probabilities(rho.matrix());
        normalize_probabilities(&mut probs)?;
        Ok(sample_categorical(&probs, rng.random::<f64>()) as u64)
    }
}

pub fn design_average_survival<T: Real>(op1: &DMatrix<C<T>>, op2: &DMatrix<C<T>>) -> Result<C<T>> {
    let d = op1.nrows();
    if !d.is_power_of_two() || d < 2 {
        return Err(Error::DimensionMismatch { expected: d.next_power_of_two().max(2), found: d });
    }
    Design::<T>::new(d.trailing_zeros() as usize)?.average_survival(op1, op2)
}

/// Uniform draw over all `D (D + 1)` ids without touching any state vector.
pub fn sample_design_state<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<DesignStateId> {
    check_symbolic(n)?;
    let base = rng.random_range(0..num_classes(n));
    let k = rng.random::<u64>() & mask(n);
    Ok(DesignStateId { n: n as u8, base, k })
}

/// `(J, k ⊕ p)` where `p` is the commutation vector of `a` against class `J`:
/// `P_a |ψ^J_k⟩ ∝ |ψ^J_{k⊕p}⟩`.
pub fn transition_target(id: &DesignStateId, a: &PauliLabel) -> Result<DesignStateId> {
    if a.num_qubits() != id.num_qubits() {
        return Err(Error::QubitMismatch(id.num_qubits(), a.num_qubits()));
    }
    let class = mub_class(id.num_qubits(), id.base)?;
    let p = commutation_vector_unchecked(a, &class);
    Ok(DesignStateId { k: id.k ^ p.bits(), ..*id })
}

/// Projective measurement of `ρ` in base `J`, returning the observed label `k′`.
pub fn measure_in_base<T: Real, R: Rng + ?Sized>(rho: &DensityMatrix<T>, base: u64, rng: &mut R) -> Result<u64> {
    let basis = MubBasis::<T>::new(rho.num_qubits(), base)?;
    let mut probs = basis.outcome_probabilities(rho.matrix());
    normalize_probabilities(&mut probs)?;
    Ok(sample_categorical(&probs, rng.random::<f64>()) as u64)
}

/// Mass deviating from 1 by more than this marks an invalid state.
pub const PROBABILITY_MASS_TOL: f64 = 1e-6;

/// Clamps negative entries to zero and renormalises; fails when the raw mass is off by more
/// than [`PROBABILITY_MASS_TOL`].
pub(crate) fn normalize_probabilities(probs: &mut [f64]) -> Result<()> {
    let mass: f64 = probs.iter().sum();
    if !mass.is_finite() || (mass - 1.0).abs() > PROBABILITY_MASS_TOL {
        return Err(Error::InvalidState(format!("outcome probabilities sum to {mass}")));
    }
    let clamped: f64 = probs.iter().filter(|p| **p < 0.0).map(|p| -p).sum();
    if clamped > 0.0 {
        log::debug!("clamped {clamped:e} of negative outcome probability");
    }
    for p in probs.iter_mut() {
        *p = p.max(0.0);
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        log::debug!("renormalised outcome mass {total}");
    }
    for p in probs.iter_mut() {
        *p /= total;
    }
    Ok(())
}

/// Inverse-CDF draw with `u` in `[0, 1)`.
pub(crate) fn sample_categorical(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(probs.len() - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::haar_closed_form;
    use crate::pauli::pauli_matrix;
    use crate::random::random_matrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn l(s: &str) -> PauliLabel {
        s.parse().unwrap()
    }

    fn id(n: usize, j: u64, k: u64) -> DesignStateId {
        DesignStateId::new(n, j, k).unwrap()
    }

    #[test]
    fn single_qubit_states() {
        let zero = mub_state::<f64>(&id(1, 0, 0)).unwrap();
        assert_eq!(zero.amplitudes(), &[C::new(1.0, 0.0), C::new(0.0, 0.0)]);
        let plus = mub_state::<f64>(&id(1, 1, 0)).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        for a in plus.amplitudes() {
            assert!((a - C::new(r, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn unbiased_and_orthonormal_n_le_4() {
        for n in 1..=4 {
            let design = Design::<f64>::new(n).unwrap();
            let ids: Vec<_> = design.ids().collect();
            let inv_d = 1.0 / (1u64 << n) as f64;
            for a in &ids {
                let sa = design.state(a).unwrap();
                for b in &ids {
                    let ov = inner(sa, design.state(b).unwrap()).norm_sqr();
                    let expected = if a.base() != b.base() {
                        inv_d
                    } else if a.k() == b.k() {
                        1.0
                    } else {
                        0.0
                    };
                    assert!((ov - expected).abs() < 1e-10, "n={n} {a:?} {b:?}: {ov}");
                }
            }
        }
    }

    #[test]
    fn eigenvalue_labels_hold_n_le_3() {
        for n in 1..=3 {
            let design = Design::<f64>::new(n).unwrap();
            for sid in design.ids() {
                let s = design.state(&sid).unwrap();
                let class = mub_class(n, sid.base()).unwrap();
                for (i, g) in class.generators().iter().enumerate() {
                    let gs = apply_to_vector(g, s);
                    let sign = if (sid.k() >> i) & 1 == 1 { -1.0 } else { 1.0 };
                    for (x, y) in gs.iter().zip(s) {
                        assert!((x - y * sign).norm() < 1e-12);
                    }
                }
                let lead = s.iter().find(|a| a.norm() > 1e-9).unwrap();
                assert!(lead.im.abs() < 1e-14 && lead.re > 0.0);
            }
        }
    }

    #[test]
    fn survival_average_examples() {
        let i2 = DMatrix::<C<f64>>::identity(2, 2);
        assert!((design_average_survival(&i2, &i2).unwrap() - C::new(1.0, 0.0)).norm() < 1e-14);
        let z = pauli_matrix::<f64>(&l("Z")).unwrap();
        assert!((design_average_survival(&z, &z).unwrap() - C::new(1.0 / 3.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn two_design_identity_random_operators() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..=3 {
            let design = Design::<f64>::new(n).unwrap();
            for _ in 0..20 {
                let a = random_matrix::<f64, _>(1 << n, &mut rng);
                let b = random_matrix::<f64, _>(1 << n, &mut rng);
                let lhs = design.average_survival(&a, &b).unwrap();
                let rhs = haar_closed_form(&a, &b).unwrap();
                assert!((lhs - rhs).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn sampling_is_uniform_and_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut counts = [0usize; 6];
        let draws = 60_000;
        for _ in 0..draws {
            let s = sample_design_state(1, &mut rng).unwrap();
            counts[s.flat_index()] += 1;
        }
        let expected = draws as f64 / 6.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // 5 dof, p = 0.001 critical value.
        assert!(chi2 < 20.515, "chi2 = {chi2}");

        let run = |seed| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            (0..100).map(|_| sample_design_state(3, &mut r).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(run(42), run(42));

        let mut r = ChaCha8Rng::seed_from_u64(1);
        let big = sample_design_state(10, &mut r).unwrap();
        assert!(big.base() <= 1024 && big.k() < 1024);
    }

    #[test]
    fn transition_examples() {
        let s = id(2, 3, 1);
        assert_eq!(transition_target(&s, &PauliLabel::identity(2).unwrap()).unwrap(), s);
        assert_eq!(transition_target(&id(1, 0, 0), &l("X")).unwrap(), id(1, 0, 1));
    }

    #[test]
    fn transition_matches_matrix_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for n in 1..=3 {
            for _ in 0..70 {
                let s = sample_design_state(n, &mut rng).unwrap();
                let a = PauliLabel::from_bits(n, rng.random::<u64>() & mask(n), rng.random::<u64>() & mask(n)).unwrap();
                let moved = apply_to_vector(&a, mub_state::<f64>(&s).unwrap().amplitudes());
                let target = mub_state::<f64>(&transition_target(&s, &a).unwrap()).unwrap();
                let fid = inner(target.amplitudes(), &moved).norm_sqr();
                assert!((fid - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn measurement_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let design = Design::<f64>::new(2).unwrap();
        let s = id(2, 4, 2);
        let rho = mub_state::<f64>(&s).unwrap().projector();
        for _ in 0..50 {
            assert_eq!(design.measure(&rho, 4, &mut rng).unwrap(), 2);
            assert_eq!(measure_in_base(&rho, 4, &mut rng).unwrap(), 2);
        }

        let flipped = mub_state::<f64>(&id(1, 0, 1)).unwrap().projector();
        for _ in 0..20 {
            assert_eq!(measure_in_base(&flipped, 0, &mut rng).unwrap(), 1);
        }

        let mixed = DensityMatrix::<f64>::maximally_mixed(2).unwrap();
        let mut counts = [0usize; 4];
        for _ in 0..10_000 {
            counts[design.measure(&mixed, 3, &mut rng).unwrap() as usize] += 1;
        }
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - 2500.0).powi(2) / 2500.0).sum();
        assert!(chi2 < 16.266, "chi2 = {chi2}");
    }

    #[test]
    fn invalid_mass_is_rejected() {
        let mut p = vec![0.5, 0.6];
        assert!(normalize_probabilities(&mut p).is_err());
        let mut q = vec![1.0 + 1e-8, -1e-8];
        normalize_probabilities(&mut q).unwrap();
        assert_eq!(q[1], 0.0);
        assert!((q[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ids_are_validated() {
        assert!(DesignStateId::new(2, 5, 0).is_err());
        assert!(DesignStateId::new(2, 0, 4).is_err());
        assert!(Design::<f64>::new(7).is_err());
    }

    #[test]
    fn single_precision_unbiasedness() {
        let design = Design::<f32>::new(3).unwrap();
        let a = design.state(&id(3, 2, 5)).unwrap();
        let b = design.state(&id(3, 7, 1)).unwrap();
        assert!((inner(a, b).norm_sqr() - 0.125).abs() < 1e-5);
    }
}
