//! Exact ground truth at desk scale: χ from any Kraus form, and full design enumerations of
//! every average the estimators target.

use std::borrow::Cow;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::channel::{modified_channel_diag, modified_channel_offdiag, Channel, ChiMatrix, KrausSet};
use crate::design::Design;
use crate::error::{Error, Result};
use crate::pauli::{all_labels, pauli_matrix, pauli_mul_unchecked, PauliLabel};
use crate::scalar::{c, czero, Real, C};

/// Default oracle cap (χ is `256 x 256` at n = 4).
pub const ORACLE_CAP: usize = 4;

/// Cap reachable through [`Oracle::with_extended_cap`].
pub const ORACLE_CAP_EXTENDED: usize = 5;

/// `(Tr O_1 Tr O_2 + Tr O_1 O_2) / (D (D + 1))`.
pub fn haar_closed_form<T: Real>(op1: &DMatrix<C<T>>, op2: &DMatrix<C<T>>) -> Result<C<T>> {
    let d = op1.nrows();
    for op in [op1, op2] {
        if op.nrows() != d || op.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: op.ncols().max(op.nrows()) });
        }
    }
    let df = T::from_usize(d).unwrap();
    let num = op1.trace() * op2.trace() + (op1 * op2).trace();
    Ok(num / c(df * (df + T::one()), T::zero()))
}

/// Design averages behind the off-diagonal identities for one label pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffdiagAverage<T: Real> {
    /// `avg_ψ ⟨ψ|E(E_m† P_ψ E_n)|ψ⟩`.
    pub integral: C<T>,
    /// `avg_ψ Tr[E_mn(|0⟩⟨0| ⊗ P_ψ) σ_x ⊗ P_ψ]`.
    pub ancilla_x: T,
    /// Same with `σ_y`.
    pub ancilla_y: T,
    /// `(D χ_mn + δ_mn) / (D + 1)` from the exact χ.
    pub expected: C<T>,
}

/// One identity check: the largest absolute residual seen and whether it is within tolerance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityResidual {
    pub identity: String,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl IdentityResidual {
    pub fn new(identity: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        IdentityResidual { identity: identity.into(), residual, tolerance, passed: residual <= tolerance }
    }
}

/// Exact χ plus identity residuals; residuals are always reported.
#[derive(Debug, Clone)]
pub struct OracleReport<T: Real> {
    pub chi: ChiMatrix<T>,
    pub residuals: Vec<IdentityResidual>,
}

/// Brute-force evaluator bound to one channel.
pub struct Oracle<'a, T: Real> {
    channel: &'a Channel<T>,
    kraus: Cow<'a, KrausSet<T>>,
    design: Design<T>,
    chi: ChiMatrix<T>,
}

impl<'a, T: Real> Oracle<'a, T> {
    pub fn new(channel: &'a Channel<T>) -> Result<Self> {
        Self::with_cap(channel, ORACLE_CAP)
    }

    /// Allows n = 5 (χ is `1024 x 1024`).
    pub fn with_extended_cap(channel: &'a Channel<T>) -> Result<Self> {
        if channel.num_qubits() == ORACLE_CAP_EXTENDED {
            log::warn!("oracle at n = 5 holds a 1024 x 1024 χ-matrix and enumerates 1056 states");
        }
        Self::with_cap(channel, ORACLE_CAP_EXTENDED)
    }

    fn with_cap(channel: &'a Channel<T>, cap: usize) -> Result<Self> {
        let n = channel.num_qubits();
        if n > cap {
            return Err(Error::DenseCapExceeded { n, cap });
        }
        let kraus = channel.kraus()?;
        let chi = crate::channel::kraus_to_chi(&kraus)?;
        Ok(Oracle { channel, kraus, design: Design::new(n)?, chi })
    }

    pub fn num_qubits(&self) -> usize {
        self.channel.num_qubits()
    }

    pub fn dim(&self) -> usize {
        1 << self.num_qubits()
    }

    pub fn design(&self) -> &Design<T> {
        &self.design
    }

    pub fn chi(&self) -> &ChiMatrix<T> {
        &self.chi
    }

    fn check_label(&self, m: &PauliLabel) -> Result<()> {
        if m.num_qubits() != self.num_qubits() {
            return Err(Error::QubitMismatch(self.num_qubits(), m.num_qubits()));
        }
        Ok(())
    }

    fn mean(&self, total: C<T>) -> C<T> {
        total / c(T::from_usize(self.design.len()).unwrap(), T::zero())
    }

    /// Average survival `avg_ψ ⟨ψ|E(P_ψ)|ψ⟩ = avg_ψ Σ_A |⟨ψ|A|ψ⟩|²` of an arbitrary channel on
    /// this register.
    pub fn design_fidelity(&self, channel: &Channel<T>) -> Result<T> {
        if channel.num_qubits() != self.num_qubits() {
            return Err(Error::QubitMismatch(self.num_qubits(), channel.num_qubits()));
        }
        let kraus = channel.kraus()?;
        let mut acc = T::zero();
        for id in self.design.ids() {
            let s = DVector::from_column_slice(self.design.state(&id)?);
            for a in kraus.operators() {
                acc += s.dotc(&(a * &s)).norm_sqr();
            }
        }
        Ok(acc / T::from_usize(self.design.len()).unwrap())
    }

    /// `F(E)` by full design enumeration.
    pub fn average_fidelity(&self) -> Result<T> {
        self.design_fidelity(self.channel)
    }

    /// `F(E_m)` for `E_m(ρ) = E_m† E(ρ) E_m`.
    pub fn modified_fidelity(&self, m: &PauliLabel) -> Result<T> {
        self.check_label(m)?;
        self.design_fidelity(&modified_channel_diag(self.channel, m)?)
    }

    pub fn expected_offdiag(&self, m: &PauliLabel, n_label: &PauliLabel) -> Result<C<T>> {
        let d = T::from_usize(self.dim()).unwrap();
        let delta = if m == n_label { T::one() } else { T::zero() };
        let chi = self.chi.get(m, n_label)?;
        Ok((chi * c(d, T::zero()) + c(delta, T::zero())) / c(d + T::one(), T::zero()))
    }

    /// Both realisations of the off-diagonal average: the direct design integral and the
    /// ancilla-polarisation readout of the `(n+1)`-qubit circuit.
    pub fn offdiag_average(&self, m: &PauliLabel, n_label: &PauliLabel) -> Result<OffdiagAverage<T>> {
        self.check_label(m)?;
        self.check_label(n_label)?;
        let d = self.dim();
        let em = pauli_matrix::<T>(m)?;
        let en = pauli_matrix::<T>(n_label)?;
        let ext = modified_channel_offdiag(self.channel, m, n_label)?;

        let mut integral = czero::<T>();
        let mut ax = czero::<T>();
        let mut ay = czero::<T>();
        for id in self.design.ids() {
            let s = DVector::from_column_slice(self.design.state(&id)?);
            // ⟨ψ|A E_m† P_ψ E_n A†|ψ⟩ = ⟨ψ|A E_m†|ψ⟩ conj(⟨ψ|A E_n†|ψ⟩).
            let sm = em.adjoint() * &s;
            let sn = en.adjoint() * &s;
            for a in self.kraus.operators() {
                integral += s.dotc(&(a * &sm)) * s.dotc(&(a * &sn)).conj();
            }

            // The input |0⟩ ⊗ |ψ⟩ is pure. Splitting u = K(|0⟩ ⊗ |ψ⟩) into ancilla blocks
            // (t, b), ⟨u|σ ⊗ P_ψ|u⟩ depends only on ⟨ψ|t⟩ and ⟨ψ|b⟩.
            for k in ext.operators() {
                let u = k.columns(0, d) * &s;
                let a0 = s.dotc(&u.rows(0, d));
                let a1 = s.dotc(&u.rows(d, d));
                let cross = a0.conj() * a1;
                ax += c(cross.re + cross.re, T::zero());
                ay += c(cross.im + cross.im, T::zero());
            }
        }
        Ok(OffdiagAverage {
            integral: self.mean(integral),
            ancilla_x: self.mean(ax).re,
            ancilla_y: self.mean(ay).re,
            expected: self.expected_offdiag(m, n_label)?,
        })
    }

    /// Largest `|Σ_{m'n'} χ_{m'n'} Tr[E_{m'} E_m† E_n E_{n'}†] − D δ_mn|` over all label pairs.
    pub fn trace_condition_residual(&self) -> Result<f64> {
        let n = self.num_qubits();
        let labels: Vec<PauliLabel> = all_labels(n)?.collect();
        let d = T::from_usize(self.dim()).unwrap();
        let mut worst = 0.0f64;
        let entries = self.chi.entries();
        let nonzero: Vec<(usize, usize)> = (0..labels.len())
            .flat_map(|a| (0..labels.len()).map(move |b| (a, b)))
            .filter(|&(a, b)| entries[(a, b)] != czero())
            .collect();
        for m in &labels {
            for nl in &labels {
                let mut acc = czero::<T>();
                // Hermitian Paulis: E† = E, and Tr[P] = D iff P is the identity.
                let (mn, t0) = pauli_mul_unchecked(m, nl);
                for &(a, b) in &nonzero {
                    let (x, t1) = pauli_mul_unchecked(&labels[a], &mn);
                    let (y, t2) = pauli_mul_unchecked(&x, &labels[b]);
                    if y.is_identity() {
                        let phase = t0.add(t1).add(t2).to_complex::<T>();
                        acc += entries[(a, b)] * phase * c(d, T::zero());
                    }
                }
                let target = if m == nl { d } else { T::zero() };
                worst = worst.max((acc - c(target, T::zero())).norm_sqr().sqrt().as_f64());
            }
        }
        Ok(worst)
    }

    /// Residuals of the fidelity (`F(E_m)`) and off-diagonal identities for the given labels.
    pub fn report(&self, diag: &[PauliLabel], pairs: &[(PauliLabel, PauliLabel)], tol: f64) -> Result<OracleReport<T>> {
        let d = T::from_usize(self.dim()).unwrap();
        let mut residuals = Vec::new();
        let f = self.average_fidelity()?;
        let chi00 = self.chi.entries()[(0, 0)].re;
        let closed = (d * chi00 + T::one()) / (d + T::one());
        residuals.push(IdentityResidual::new("average_fidelity", (f - closed).abs().as_f64(), tol));
        let mut worst = 0.0f64;
        for m in diag {
            let fm = self.modified_fidelity(m)?;
            let closed = (d * self.chi.diagonal(m)? + T::one()) / (d + T::one());
            worst = worst.max((fm - closed).abs().as_f64());
        }
        residuals.push(IdentityResidual::new("modified_fidelity", worst, tol));
        let (mut w_int, mut w_anc) = (0.0f64, 0.0f64);
        for (m, nl) in pairs {
            let avg = self.offdiag_average(m, nl)?;
            w_int = w_int.max((avg.integral - avg.expected).norm_sqr().sqrt().as_f64());
            // σ_x reads (D Re χ + δ) / (D + 1), σ_y reads D Im χ / (D + 1).
            let anc = c(avg.ancilla_x, avg.ancilla_y);
            let target = avg.expected;
            w_anc = w_anc.max((anc - target).norm_sqr().sqrt().as_f64());
        }
        residuals.push(IdentityResidual::new("offdiag_integral", w_int, tol));
        residuals.push(IdentityResidual::new("offdiag_ancilla", w_anc, tol));
        residuals.push(IdentityResidual::new("trace_condition", self.trace_condition_residual()?, tol.max(1e-8)));
        Ok(OracleReport { chi: self.chi.clone(), residuals })
    }
}

pub fn exact_chi<T: Real>(channel: &Channel<T>) -> Result<ChiMatrix<T>> {
    Ok(Oracle::new(channel)?.chi)
}

pub fn exact_average_fidelity<T: Real>(channel: &Channel<T>) -> Result<T> {
    Oracle::new(channel)?.average_fidelity()
}

pub fn exact_offdiag_average<T: Real>(
    channel: &Channel<T>,
    m: &PauliLabel,
    n_label: &PauliLabel,
) -> Result<OffdiagAverage<T>> {
    Oracle::new(channel)?.offdiag_average(m, n_label)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{chi_to_kraus, kraus_to_chi};
    use crate::random::random_channel;
    use crate::spec::{standard_channels, ChannelSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn l(s: &str) -> PauliLabel {
        s.parse().unwrap()
    }

    #[test]
    fn closed_form_examples() {
        let i = DMatrix::<C<f64>>::identity(2, 2);
        assert!((haar_closed_form(&i, &i).unwrap() - C::new(1.0, 0.0)).norm() < 1e-15);
        let z = pauli_matrix::<f64>(&l("Z")).unwrap();
        assert!((haar_closed_form(&z, &z).unwrap() - C::new(1.0 / 3.0, 0.0)).norm() < 1e-15);
        assert!(haar_closed_form(&i, &DMatrix::identity(4, 4)).is_err());
    }

    #[test]
    fn exact_chi_examples() {
        let id = exact_chi(&Channel::<f64>::identity(1).unwrap()).unwrap();
        assert_eq!(id.entries()[(0, 0)], C::new(1.0, 0.0));
        assert!(id.entries().iter().skip(1).all(|v| *v == C::new(0.0, 0.0)));

        let rot = ChannelSpec::rotation(1, "X", std::f64::consts::FRAC_PI_2).build::<f64>().unwrap();
        let chi = exact_chi(&rot).unwrap();
        assert!((chi.diagonal(&l("I")).unwrap() - 0.5).abs() < 1e-15);
        assert!((chi.diagonal(&l("X")).unwrap() - 0.5).abs() < 1e-15);
        assert!((chi.get(&l("I"), &l("X")).unwrap().im - 0.5).abs() < 1e-15);

        let p = 0.3;
        let dep = exact_chi(&ChannelSpec::depolarizing(2, p).build::<f64>().unwrap()).unwrap();
        for m in all_labels(2).unwrap() {
            let expected = if m.is_identity() { 1.0 - p + p / 16.0 } else { p / 16.0 };
            assert!((dep.diagonal(&m).unwrap() - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn fidelity_examples() {
        let id = Channel::<f64>::identity(1).unwrap();
        assert!((exact_average_fidelity(&id).unwrap() - 1.0).abs() < 1e-14);
        let flip = ChannelSpec::pauli_mixture(1, [("X", 1.0)]).build::<f64>().unwrap();
        assert!((exact_average_fidelity(&flip).unwrap() - 1.0 / 3.0).abs() < 1e-14);
        let dep = ChannelSpec::depolarizing(1, 0.2).build::<f64>().unwrap();
        assert!((exact_average_fidelity(&dep).unwrap() - 0.9).abs() < 1e-14);
    }

    #[test]
    fn offdiag_examples() {
        let id = Channel::<f64>::identity(1).unwrap();
        let avg = exact_offdiag_average(&id, &l("I"), &l("I")).unwrap();
        assert!((avg.integral - C::new(1.0, 0.0)).norm() < 1e-14);
        assert!((avg.ancilla_x - 1.0).abs() < 1e-14);
        let avg = exact_offdiag_average(&id, &l("I"), &l("X")).unwrap();
        assert!(avg.integral.norm() < 1e-14 && avg.ancilla_x.abs() < 1e-14);

        let theta = std::f64::consts::FRAC_PI_3;
        let rot = ChannelSpec::rotation(1, "X", theta).build::<f64>().unwrap();
        let avg = exact_offdiag_average(&rot, &l("I"), &l("X")).unwrap();
        // c_I = cos(θ/2), c_X = −i sin(θ/2): χ_IX = i sin(θ/2) cos(θ/2).
        let chi_ix = C::new(0.0, (theta / 2.0).sin() * (theta / 2.0).cos());
        assert!((avg.integral - chi_ix * (2.0 / 3.0)).norm() < 1e-14);
        assert!(avg.ancilla_x.abs() < 1e-14);
        assert!((avg.ancilla_y - 2.0 * chi_ix.im / 3.0).abs() < 1e-14);

        let rot = ChannelSpec::rotation(1, "X", std::f64::consts::FRAC_PI_2).build::<f64>().unwrap();
        let avg = exact_offdiag_average(&rot, &l("I"), &l("X")).unwrap();
        assert!((avg.ancilla_y - 2.0 * 0.5 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn identities_for_standard_channels() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for n in 1..=2 {
            for (name, spec) in standard_channels(n) {
                let ch = spec.build::<f64>().unwrap();
                let oracle = Oracle::new(&ch).unwrap();
                let labels: Vec<_> = all_labels(n).unwrap().collect();
                let diag: Vec<_> = (0..10).map(|_| labels[rng.random_range(0..labels.len())]).collect();
                let pairs: Vec<_> = (0..10)
                    .map(|_| (labels[rng.random_range(0..labels.len())], labels[rng.random_range(0..labels.len())]))
                    .collect();
                let report = oracle.report(&diag, &pairs, 1e-9).unwrap();
                for r in &report.residuals {
                    assert!(r.passed, "{name} n={n}: {r:?}");
                }
            }
        }
    }

    #[test]
    fn identities_for_random_channels_n3() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..5 {
            let ch = random_channel::<f64, _>(3, &mut rng).unwrap();
            let oracle = Oracle::new(&ch).unwrap();
            let labels: Vec<_> = all_labels(3).unwrap().collect();
            let m = labels[rng.random_range(0..64)];
            let nl = labels[rng.random_range(0..64)];
            let fm = oracle.modified_fidelity(&m).unwrap();
            assert!((fm - (8.0 * oracle.chi().diagonal(&m).unwrap() + 1.0) / 9.0).abs() < 1e-9);
            assert!(fm >= 1.0 / 9.0 - 1e-9);
            let avg = oracle.offdiag_average(&m, &nl).unwrap();
            assert!((avg.integral - avg.expected).norm() < 1e-9);
            assert!((avg.ancilla_x - avg.expected.re).abs() < 1e-9);
            assert!((avg.ancilla_y - avg.expected.im).abs() < 1e-9);
        }
    }

    #[test]
    fn chi_is_decomposition_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for n in 1..=2 {
            let ch = random_channel::<f64, _>(n, &mut rng).unwrap();
            let chi = exact_chi(&ch).unwrap();
            let other = Channel::Kraus(chi_to_kraus(&chi).unwrap());
            let again = exact_chi(&other).unwrap();
            let diff = (chi.entries() - again.entries()).iter().fold(0.0f64, |a, v| a.max(v.norm()));
            assert!(diff < 1e-9);
            assert_eq!(kraus_to_chi(&ch.kraus().unwrap()).unwrap(), chi);
        }
    }

    #[test]
    fn oracle_cap() {
        let ch = Channel::<f64>::identity(5).unwrap();
        assert!(matches!(Oracle::new(&ch), Err(Error::DenseCapExceeded { n: 5, cap: 4 })));
        assert!(Oracle::with_extended_cap(&ch).is_ok());
    }
}
