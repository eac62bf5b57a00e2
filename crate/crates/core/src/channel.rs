//! Completely positive trace-preserving maps in operator-sum and χ-matrix form.
//!
//! The χ-matrix is taken in the Hermitian Pauli base, indexed by [`PauliLabel::index`]:
//! `E(ρ) = Σ_{mn} χ_{mn} P_m ρ P_n†`.

use std::borrow::Cow;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::pauli::{
    all_labels, check_dense, left_multiply, pauli_mul_unchecked, trace_product, PauliLabel,
};
use crate::scalar::{c, cabs, cone, czero, i_pow, Real, C};

/// Largest qubit count for which a `D² x D²` χ-matrix is materialised.
pub const CHI_CAP: usize = 5;

pub(crate) fn check_chi_cap(n: usize) -> Result<()> {
    if n > CHI_CAP {
        Err(Error::DenseCapExceeded { n, cap: CHI_CAP })
    } else {
        Ok(())
    }
}

fn max_abs<T: Real>(m: &DMatrix<C<T>>) -> T {
    m.iter().fold(T::zero(), |acc, v| acc.max(cabs(*v)))
}

fn dim_of(n: usize) -> usize {
    1usize << n
}

fn check_square<T: Real>(m: &DMatrix<C<T>>, d: usize) -> Result<()> {
    if m.nrows() != d || m.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, found: m.nrows().max(m.ncols()) });
    }
    Ok(())
}

/// Smallest eigenvalue of the Hermitian part of `m`.
pub(crate) fn min_hermitian_eigenvalue<T: Real>(m: &DMatrix<C<T>>) -> T {
    let half = c(T::lit(0.5), T::zero());
    let h = (m + m.adjoint()) * half;
    h.symmetric_eigenvalues().iter().fold(T::max_value().unwrap_or(T::one()), |a, &b| a.min(b))
}

/// A density matrix on `n` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix<T: Real> {
    n: usize,
    matrix: DMatrix<C<T>>,
}

impl<T: Real> DensityMatrix<T> {
    /// Validates hermiticity, unit trace and positivity at the scalar's default tolerance.
    pub fn new(n: usize, matrix: DMatrix<C<T>>) -> Result<Self> {
        Self::with_tolerance(n, matrix, T::default_tol())
    }

    pub fn with_tolerance(n: usize, matrix: DMatrix<C<T>>, tol: T) -> Result<Self> {
        check_dense(n)?;
        check_square(&matrix, dim_of(n))?;
        let herm = max_abs(&(&matrix - matrix.adjoint()));
        if herm > tol {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {herm})")));
        }
        let tr = matrix.trace();
        if cabs(tr - cone::<T>()) > tol {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min = min_hermitian_eigenvalue(&matrix);
        if min < -tol {
            return Err(Error::InvalidState(format!("negative eigenvalue {min}")));
        }
        Ok(DensityMatrix { n, matrix })
    }

    /// Wraps a matrix produced by a trusted computation. Small negativity is kept as is.
    pub(crate) fn from_raw(n: usize, matrix: DMatrix<C<T>>) -> Self {
        DensityMatrix { n, matrix }
    }

    /// `|ψ⟩⟨ψ|` for a normalised amplitude vector.
    pub fn pure(n: usize, amplitudes: &[C<T>]) -> Result<Self> {
        check_dense(n)?;
        if amplitudes.len() != dim_of(n) {
            return Err(Error::DimensionMismatch { expected: dim_of(n), found: amplitudes.len() });
        }
        let v = DVector::from_column_slice(amplitudes);
        let norm = v.norm();
        if (norm - T::one()).abs() > T::default_tol() {
            return Err(Error::InvalidState(format!("state norm {norm} differs from 1")));
        }
        Ok(DensityMatrix { n, matrix: &v * v.adjoint() })
    }

    pub fn maximally_mixed(n: usize) -> Result<Self> {
        check_dense(n)?;
        let d = dim_of(n);
        let w = T::one() / T::from_usize(d).unwrap();
        Ok(DensityMatrix { n, matrix: DMatrix::identity(d, d) * c(w, T::zero()) })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &DMatrix<C<T>> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C<T>> {
        self.matrix
    }

    pub fn trace(&self) -> C<T> {
        self.matrix.trace()
    }

    pub fn min_eigenvalue(&self) -> T {
        min_hermitian_eigenvalue(&self.matrix)
    }
}

/// Operator-sum representation `ρ ↦ Σ_k A_k ρ A_k†`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausSet<T: Real> {
    n: usize,
    operators: Vec<DMatrix<C<T>>>,
}

impl<T: Real> KrausSet<T> {
    pub fn new(n: usize, operators: Vec<DMatrix<C<T>>>) -> Result<Self> {
        Self::with_tolerance(n, operators, T::default_tol())
    }

    pub fn with_tolerance(n: usize, operators: Vec<DMatrix<C<T>>>, tol: T) -> Result<Self> {
        check_dense(n)?;
        if operators.is_empty() {
            return Err(Error::InvalidChannel("empty Kraus set".into()));
        }
        let d = dim_of(n);
        for op in &operators {
            check_square(op, d)?;
        }
        let set = KrausSet { n, operators };
        let dev = set.completeness_deviation();
        if dev > tol {
            return Err(Error::InvalidChannel(format!(
                "Kraus operators are not trace preserving (deviation {dev})"
            )));
        }
        Ok(set)
    }

    pub(crate) fn from_raw(n: usize, operators: Vec<DMatrix<C<T>>>) -> Self {
        KrausSet { n, operators }
    }

    /// Max-norm of `Σ A_k† A_k − I`.
    pub fn completeness_deviation(&self) -> T {
        let d = dim_of(self.n);
        let mut acc = -DMatrix::<C<T>>::identity(d, d);
        for a in &self.operators {
            acc += a.adjoint() * a;
        }
        max_abs(&acc)
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn operators(&self) -> &[DMatrix<C<T>>] {
        &self.operators
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    pub fn apply(&self, rho: &DensityMatrix<T>) -> Result<DensityMatrix<T>> {
        if rho.n != self.n {
            return Err(Error::QubitMismatch(self.n, rho.n));
        }
        let d = dim_of(self.n);
        let mut out = DMatrix::from_element(d, d, czero::<T>());
        for a in &self.operators {
            out += a * &rho.matrix * a.adjoint();
        }
        Ok(DensityMatrix::from_raw(self.n, out))
    }

    /// Sequential composition: `self` first, then `next`.
    pub fn then(&self, next: &KrausSet<T>) -> Result<KrausSet<T>> {
        if self.n != next.n {
            return Err(Error::QubitMismatch(self.n, next.n));
        }
        let ops = next
            .operators
            .iter()
            .flat_map(|b| self.operators.iter().map(move |a| b * a))
            .collect();
        Ok(KrausSet { n: self.n, operators: ops })
    }
}

/// χ-matrix in the Pauli base; entries are `D² x D²` indexed by label index.
#[derive(Debug, Clone, PartialEq)]
pub struct ChiMatrix<T: Real> {
    n: usize,
    entries: DMatrix<C<T>>,
}

impl<T: Real> ChiMatrix<T> {
    /// Wraps raw entries; use [`validate_chi`] to check physicality.
    pub fn new(n: usize, entries: DMatrix<C<T>>) -> Result<Self> {
        check_dense(n)?;
        check_chi_cap(n)?;
        check_square(&entries, dim_of(2 * n))?;
        Ok(ChiMatrix { n, entries })
    }

    pub fn zeros(n: usize) -> Result<Self> {
        check_chi_cap(n)?;
        let d2 = dim_of(2 * n);
        Ok(ChiMatrix { n, entries: DMatrix::from_element(d2, d2, czero::<T>()) })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &DMatrix<C<T>> {
        &self.entries
    }

    pub fn get(&self, m: &PauliLabel, n_label: &PauliLabel) -> Result<C<T>> {
        if m.num_qubits() != self.n || n_label.num_qubits() != self.n {
            return Err(Error::QubitMismatch(self.n, m.num_qubits().max(n_label.num_qubits())));
        }
        Ok(self.entries[(m.index(), n_label.index())])
    }

    pub fn set(&mut self, m: &PauliLabel, n_label: &PauliLabel, value: C<T>) -> Result<()> {
        if m.num_qubits() != self.n || n_label.num_qubits() != self.n {
            return Err(Error::QubitMismatch(self.n, m.num_qubits().max(n_label.num_qubits())));
        }
        self.entries[(m.index(), n_label.index())] = value;
        Ok(())
    }

    pub fn diagonal(&self, m: &PauliLabel) -> Result<T> {
        Ok(self.get(m, m)?.re)
    }

    /// `Σ_{mn} χ_{mn} P_m ρ P_n†`.
    pub fn apply(&self, rho: &DensityMatrix<T>) -> Result<DensityMatrix<T>> {
        if rho.n != self.n {
            return Err(Error::QubitMismatch(self.n, rho.n));
        }
        let d = dim_of(self.n);
        let labels: Vec<PauliLabel> = all_labels(self.n)?.collect();
        let left: Vec<DMatrix<C<T>>> = labels.iter().map(|m| left_multiply(m, &rho.matrix)).collect();
        let mut out = DMatrix::from_element(d, d, czero::<T>());
        for (ni, nl) in labels.iter().enumerate() {
            let mut s = DMatrix::from_element(d, d, czero::<T>());
            let mut any = false;
            for (mi, lm) in left.iter().enumerate() {
                let w = self.entries[(mi, ni)];
                if w != czero() {
                    s += lm * w;
                    any = true;
                }
            }
            if any {
                // S P_n† = (P_n S†)† for Hermitian P_n.
                out += left_multiply(nl, &s.adjoint()).adjoint();
            }
        }
        Ok(DensityMatrix::from_raw(self.n, out))
    }
}

/// A channel held in either representation.
#[derive(Debug, Clone, PartialEq)]
pub enum Channel<T: Real> {
    Kraus(KrausSet<T>),
    Chi(ChiMatrix<T>),
}

impl<T: Real> From<KrausSet<T>> for Channel<T> {
    fn from(k: KrausSet<T>) -> Self {
        Channel::Kraus(k)
    }
}

impl<T: Real> From<ChiMatrix<T>> for Channel<T> {
    fn from(c: ChiMatrix<T>) -> Self {
        Channel::Chi(c)
    }
}

impl<T: Real> Channel<T> {
    pub fn identity(n: usize) -> Result<Self> {
        check_dense(n)?;
        let d = dim_of(n);
        Ok(Channel::Kraus(KrausSet::from_raw(n, vec![DMatrix::identity(d, d)])))
    }

    pub fn num_qubits(&self) -> usize {
        match self {
            Channel::Kraus(k) => k.n,
            Channel::Chi(c) => c.n,
        }
    }

    pub fn apply(&self, rho: &DensityMatrix<T>) -> Result<DensityMatrix<T>> {
        match self {
            Channel::Kraus(k) => k.apply(rho),
            Channel::Chi(c) => c.apply(rho),
        }
    }

    /// Operator-sum form; χ inputs are decomposed (and must be PSD).
    pub fn kraus(&self) -> Result<Cow<'_, KrausSet<T>>> {
        match self {
            Channel::Kraus(k) => Ok(Cow::Borrowed(k)),
            Channel::Chi(c) => chi_to_kraus(c).map(Cow::Owned),
        }
    }

    pub fn chi(&self) -> Result<Cow<'_, ChiMatrix<T>>> {
        match self {
            Channel::Kraus(k) => kraus_to_chi(k).map(Cow::Owned),
            Channel::Chi(c) => Ok(Cow::Borrowed(c)),
        }
    }

    /// Checks trace preservation and complete positivity at `tol`.
    pub fn validate(&self, tol: T) -> Result<()> {
        match self {
            Channel::Kraus(k) => {
                let dev = k.completeness_deviation();
                if dev > tol {
                    return Err(Error::InvalidChannel(format!("completeness deviation {dev}")));
                }
                Ok(())
            }
            Channel::Chi(c) => {
                let report = validate_chi(c, tol)?;
                if report.passed {
                    Ok(())
                } else {
                    Err(Error::InvalidChannel(format!("{report:?}")))
                }
            }
        }
    }
}

pub fn apply_channel<T: Real>(channel: &Channel<T>, rho: &DensityMatrix<T>) -> Result<DensityMatrix<T>> {
    channel.apply(rho)
}

/// Outcome of [`validate_chi`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiValidation<T: Real> {
    /// `max |χ_mn − conj χ_nm|`.
    pub hermiticity_deviation: T,
    pub min_eigenvalue: T,
    /// Max-norm of `Σ_mn χ_mn E_n† E_m − I`.
    pub trace_deviation: T,
    pub tolerance: T,
    pub passed: bool,
}

pub fn validate_chi<T: Real>(chi: &ChiMatrix<T>, tol: T) -> Result<ChiValidation<T>> {
    let n = chi.n;
    let e = &chi.entries;
    let hermiticity_deviation = max_abs(&(e - e.adjoint()));
    let min_eigenvalue = min_hermitian_eigenvalue(e);

    // E_n† E_m = E_n E_m = i^θ E_{n⋆m}; accumulate coefficients per label.
    let labels: Vec<PauliLabel> = all_labels(n)?.collect();
    let mut coeff = vec![czero::<T>(); labels.len()];
    for (mi, m) in labels.iter().enumerate() {
        for (ni, nl) in labels.iter().enumerate() {
            let w = e[(mi, ni)];
            if w == czero() {
                continue;
            }
            let (prod, theta) = pauli_mul_unchecked(nl, m);
            coeff[prod.index()] += w * i_pow::<T>(theta.value());
        }
    }
    let d = dim_of(n);
    let mut dense = -DMatrix::<C<T>>::identity(d, d);
    for (label, w) in labels.iter().zip(&coeff) {
        if *w == czero() {
            continue;
        }
        let y = label.y_count() as u8;
        for col in 0..d {
            let sign = 2 * ((label.z_bits() & col as u64).count_ones() & 1) as u8;
            dense[(col ^ label.x_bits() as usize, col)] += *w * i_pow::<T>(y + sign);
        }
    }
    let trace_deviation = max_abs(&dense);
    let passed = hermiticity_deviation <= tol && min_eigenvalue >= -tol && trace_deviation <= tol;
    Ok(ChiValidation { hermiticity_deviation, min_eigenvalue, trace_deviation, tolerance: tol, passed })
}

/// Pauli-base expansion coefficients `c_m = Tr[E_m† A] / D` of one operator.
pub(crate) fn pauli_coefficients<T: Real>(n: usize, a: &DMatrix<C<T>>) -> Result<Vec<C<T>>> {
    let inv_d = c(T::one() / T::from_usize(dim_of(n)).unwrap(), T::zero());
    Ok(all_labels(n)?.map(|m| trace_product(&m, a) * inv_d).collect())
}

/// `χ_mn = Σ_k c_km conj(c_kn)` with `c_km = Tr[E_m† A_k] / D`.
pub fn kraus_to_chi<T: Real>(k: &KrausSet<T>) -> Result<ChiMatrix<T>> {
    let n = k.n;
    check_chi_cap(n)?;
    let d2 = dim_of(2 * n);
    let mut entries = DMatrix::from_element(d2, d2, czero::<T>());
    for a in &k.operators {
        let coeffs = DVector::from_vec(pauli_coefficients(n, a)?);
        entries += &coeffs * coeffs.adjoint();
    }
    Ok(ChiMatrix { n, entries })
}

/// Eigendecomposition of χ into Kraus operators, with what was discarded.
#[derive(Debug, Clone)]
pub struct KrausDecomposition<T: Real> {
    pub kraus: KrausSet<T>,
    pub min_eigenvalue: T,
    /// Sum of the absolute values of dropped eigenvalues.
    pub discarded_weight: T,
}

/// Decomposes χ with the default tolerance; see [`chi_to_kraus_with`].
pub fn chi_to_kraus<T: Real>(chi: &ChiMatrix<T>) -> Result<KrausSet<T>> {
    chi_to_kraus_with(chi, T::default_tol()).map(|d| d.kraus)
}

/// Eigenvalues below `1e-12 · λ_max` are dropped; nothing is renormalised. Fails if the
/// smallest eigenvalue is below `-tol`.
pub fn chi_to_kraus_with<T: Real>(chi: &ChiMatrix<T>, tol: T) -> Result<KrausDecomposition<T>> {
    let n = chi.n;
    let half = c(T::lit(0.5), T::zero());
    let herm = (&chi.entries + chi.entries.adjoint()) * half;
    let eig = herm.symmetric_eigen();
    let max = eig.eigenvalues.iter().fold(T::zero(), |a, &b| a.max(b));
    let min = eig.eigenvalues.iter().fold(max, |a, &b| a.min(b));
    if min < -tol {
        return Err(Error::InvalidChannel(format!("χ is not positive semidefinite (min eigenvalue {min})")));
    }
    let cutoff = max * T::lit(1e-12);
    let labels: Vec<PauliLabel> = all_labels(n)?.collect();
    let d = dim_of(n);
    let mut ops = Vec::new();
    let mut discarded = T::zero();
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda <= cutoff {
            discarded += lambda.abs();
            continue;
        }
        let scale = lambda.sqrt();
        let mut a = DMatrix::from_element(d, d, czero::<T>());
        for (mi, m) in labels.iter().enumerate() {
            let w = eig.eigenvectors[(mi, j)] * c(scale, T::zero());
            if w == czero() {
                continue;
            }
            let y = m.y_count() as u8;
            for col in 0..d {
                let sign = 2 * ((m.z_bits() & col as u64).count_ones() & 1) as u8;
                a[(col ^ m.x_bits() as usize, col)] += w * i_pow::<T>(y + sign);
            }
        }
        ops.push(a);
    }
    if ops.is_empty() {
        return Err(Error::InvalidChannel("χ has no positive spectrum".into()));
    }
    Ok(KrausDecomposition { kraus: KrausSet::from_raw(n, ops), min_eigenvalue: min, discarded_weight: discarded })
}

/// `ρ ↦ E_m† E(ρ) E_m`, returned in operator-sum form.
pub fn modified_channel_diag<T: Real>(channel: &Channel<T>, m: &PauliLabel) -> Result<Channel<T>> {
    let n = channel.num_qubits();
    if m.num_qubits() != n {
        return Err(Error::QubitMismatch(n, m.num_qubits()));
    }
    let kraus = channel.kraus()?;
    // E_m is Hermitian, so E_m† A = E_m A.
    let ops = kraus.operators.iter().map(|a| left_multiply(m, a)).collect();
    Ok(Channel::Kraus(KrausSet::from_raw(n, ops)))
}

/// The `(n+1)`-qubit map of the ancilla-assisted off-diagonal circuit, ancilla as the most
/// significant qubit: Hadamard on the ancilla, `E_m†` controlled on ancilla `1`, `E_n†`
/// controlled on ancilla `0`, then the channel on the main register.
pub fn modified_channel_offdiag<T: Real>(
    channel: &Channel<T>,
    m: &PauliLabel,
    n_label: &PauliLabel,
) -> Result<KrausSet<T>> {
    let n = channel.num_qubits();
    if m.num_qubits() != n {
        return Err(Error::QubitMismatch(n, m.num_qubits()));
    }
    if n_label.num_qubits() != n {
        return Err(Error::QubitMismatch(n, n_label.num_qubits()));
    }
    let kraus = channel.kraus()?;
    let d = dim_of(n);
    let h = c(T::lit(std::f64::consts::FRAC_1_SQRT_2), T::zero());
    let ops = kraus
        .operators
        .iter()
        .map(|a| {
            // A E_n† and A E_m†, with Hermitian Paulis: (E A†)†.
            let a_n = left_multiply(n_label, &a.adjoint()).adjoint();
            let a_m = left_multiply(m, &a.adjoint()).adjoint();
            let mut k = DMatrix::from_element(2 * d, 2 * d, czero::<T>());
            for r in 0..d {
                for col in 0..d {
                    k[(r, col)] = a_n[(r, col)] * h;
                    k[(r, d + col)] = a_n[(r, col)] * h;
                    k[(d + r, col)] = a_m[(r, col)] * h;
                    k[(d + r, d + col)] = -a_m[(r, col)] * h;
                }
            }
            k
        })
        .collect();
    Ok(KrausSet::from_raw(n + 1, ops))
}
