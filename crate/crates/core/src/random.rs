//! Seeded random states, unitaries and channels for tests and verification suites.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::channel::{Channel, DensityMatrix, KrausSet};
use crate::error::Result;
use crate::pauli::{all_labels, check_dense, pauli_matrix};
use crate::scalar::{c, cabs, Real, C};

fn gaussian<T: Real, R: Rng + ?Sized>(rng: &mut R) -> C<T> {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c(T::lit(re), T::lit(im))
}

pub fn random_matrix<T: Real, R: Rng + ?Sized>(d: usize, rng: &mut R) -> DMatrix<C<T>> {
    DMatrix::from_fn(d, d, |_, _| gaussian(rng))
}

/// Haar-distributed unitary from the QR decomposition of a complex Gaussian matrix.
pub fn random_unitary<T: Real, R: Rng + ?Sized>(d: usize, rng: &mut R) -> DMatrix<C<T>> {
    let qr = random_matrix::<T, R>(d, rng).qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        let v = r[(j, j)];
        let norm = cabs(v);
        if norm > T::zero() {
            let phase = v / c(norm, T::zero());
            for i in 0..d {
                q[(i, j)] *= phase;
            }
        }
    }
    q
}

pub fn random_state<T: Real, R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Vec<C<T>>> {
    check_dense(n)?;
    let v = DVector::from_fn(1 << n, |_, _| gaussian::<T, R>(rng));
    let norm = v.norm();
    Ok(v.iter().map(|a| *a / c(norm, T::zero())).collect())
}

/// Mixture of a few random pure states with random weights.
pub fn random_density_matrix<T: Real, R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<DensityMatrix<T>> {
    check_dense(n)?;
    let d = 1usize << n;
    let terms = 1 + rng.random_range(0..3usize);
    let weights: Vec<f64> = (0..terms).map(|_| rng.random::<f64>() + 0.05).collect();
    let total: f64 = weights.iter().sum();
    let mut m = DMatrix::from_element(d, d, c(T::zero(), T::zero()));
    for w in weights {
        let v = DVector::from_vec(random_state::<T, R>(n, rng)?);
        m += (&v * v.adjoint()) * c(T::lit(w / total), T::zero());
    }
    DensityMatrix::new(n, m)
}

/// Equal-weight mixture of a Haar-random unitary and a random Pauli mixture with a few
/// random support labels.
pub fn random_channel<T: Real, R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Channel<T>> {
    check_dense(n)?;
    let d = 1usize << n;
    let half = T::lit(0.5);
    let mut ops = vec![random_unitary::<T, R>(d, rng) * c(half.sqrt(), T::zero())];
    let labels: Vec<_> = all_labels(n)?.collect();
    let support = 1 + rng.random_range(0..labels.len().min(4));
    let raw: Vec<f64> = (0..support).map(|_| rng.random::<f64>() + 0.05).collect();
    let total: f64 = raw.iter().sum();
    for w in raw {
        let label = labels[rng.random_range(0..labels.len())];
        let scale = T::lit(0.5 * w / total).sqrt();
        ops.push(pauli_matrix::<T>(&label)? * c(scale, T::zero()));
    }
    Ok(Channel::Kraus(KrausSet::new(n, ops)?))
}
