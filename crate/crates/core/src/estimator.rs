//! Seeded Monte Carlo estimators for single χ coefficients.
//!
//! Every experiment owns a ChaCha8 stream keyed by `(seed, campaign, index)`, so experiments
//! run in parallel and the reduction happens afterwards in index order.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{modified_channel_offdiag, Channel};
use crate::design::{inner, sample_design_state, Design, DesignStateId};
use crate::error::{Error, Result};
use crate::pauli::{apply_to_vector, check_dense, PauliLabel};
use crate::scalar::{c, Real, C};

/// How outcomes are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Bernoulli or three-valued draws, as a device would report them.
    #[default]
    Sampled,
    /// Sampled states, but each experiment records its exact expected outcome.
    Exact,
    /// Exact expected outcomes over every design state once; the experiment count is ignored.
    Enumerate,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sampled" => Ok(Mode::Sampled),
            "exact" | "exact-expectation" | "exact_expectation" => Ok(Mode::Exact),
            "enumerate" => Ok(Mode::Enumerate),
            other => Err(Error::InvalidConfig(format!("unknown mode `{other}`"))),
        }
    }
}

/// Which averaged observable a precision target refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Fidelity,
    Offdiagonal,
}

/// Experiment count, given directly or derived from a target precision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleSize {
    Experiments(usize),
    Epsilon(f64),
}

/// `ceil(ε⁻² / 4)` for fidelities, `ceil(ε⁻²)` for off-diagonal polarisations. Both bound the
/// precision of the averaged observable, not of χ itself.
pub fn required_sample_size(epsilon: f64, kind: Protocol) -> Result<usize> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidConfig(format!("epsilon must lie in (0, 1], got {epsilon}")));
    }
    let inv = 1.0 / (epsilon * epsilon);
    let raw = match kind {
        Protocol::Fidelity => inv / 4.0,
        Protocol::Offdiagonal => inv,
    };
    // Guard against 1/ε² landing a hair above an integer.
    let rounded = raw.round();
    let m = if (raw - rounded).abs() <= 1e-9 * rounded.max(1.0) { rounded } else { raw.ceil() };
    Ok((m as usize).max(1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub sample_size: SampleSize,
    pub seed: u64,
    pub mode: Mode,
}

impl EstimatorConfig {
    pub fn new(experiments: usize, seed: u64) -> Self {
        EstimatorConfig { sample_size: SampleSize::Experiments(experiments), seed, mode: Mode::Sampled }
    }

    pub fn from_epsilon(epsilon: f64, seed: u64) -> Self {
        EstimatorConfig { sample_size: SampleSize::Epsilon(epsilon), seed, mode: Mode::Sampled }
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    /// Resolved experiment count for a protocol.
    pub fn experiments(&self, kind: Protocol) -> Result<usize> {
        match self.sample_size {
            SampleSize::Experiments(0) => Err(Error::InvalidConfig("experiment count must be at least 1".into())),
            SampleSize::Experiments(m) => Ok(m),
            SampleSize::Epsilon(eps) => required_sample_size(eps, kind),
        }
    }
}

/// A χ estimate with separate standard errors for its real and imaginary parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate<T: Real> {
    pub value: C<T>,
    pub std_error_re: T,
    pub std_error_im: T,
    /// Mean of the measured observable before the affine inversion.
    pub observable: C<T>,
    /// Experiments per campaign.
    pub experiments: usize,
    pub dim: usize,
}

impl<T: Real> Estimate<T> {
    pub fn re(&self) -> T {
        self.value.re
    }

    pub fn im(&self) -> T {
        self.value.im
    }

    /// `sqrt(σ_re² + σ_im²)`; equals `std_error_re` for diagonal estimates.
    pub fn std_error(&self) -> T {
        (self.std_error_re * self.std_error_re + self.std_error_im * self.std_error_im).sqrt()
    }

    /// Standard error on the observable's scale, `D / (D + 1)` times the χ-scale error.
    pub fn observable_std_error(&self) -> T {
        let d = T::from_usize(self.dim).unwrap();
        self.std_error() * d / (d + T::one())
    }

    /// `|Δ| / σ` against a reference value, signed for real-only comparisons.
    pub fn z_score(&self, reference: C<T>) -> f64 {
        let diff = self.value - reference;
        let sigma = self.std_error().as_f64();
        let (re, im) = (diff.re.as_f64(), diff.im.as_f64());
        let delta = if self.std_error_im == T::zero() && im == 0.0 { re } else { re.hypot(im) };
        if sigma > 0.0 {
            delta / sigma
        } else if delta.abs() <= 1e-9 {
            0.0
        } else {
            delta.signum() * f64::MAX
        }
    }
}

pub(crate) const CAMPAIGN_DIAG: u64 = 0;
pub(crate) const CAMPAIGN_RE: u64 = 1;
pub(crate) const CAMPAIGN_IM: u64 = 2;
pub(crate) const CAMPAIGN_TRIPLETS: u64 = 3;
pub(crate) const CAMPAIGN_SIEVE: u64 = 4;

/// Independent stream for one experiment.
pub(crate) fn experiment_rng(seed: u64, campaign: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((campaign << 56) | index);
    rng
}

/// Sample mean and standard error of the mean (`M − 1` denominator).
pub(crate) fn mean_and_error(samples: &[f64]) -> (f64, f64) {
    let m = samples.len();
    if m == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = samples.iter().sum::<f64>() / m as f64;
    if m == 1 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1) as f64;
    (mean, (var / m as f64).sqrt())
}

/// Draws for one campaign: which design state each experiment used and the uniform variate
/// that resolves its outcome.
struct Draws {
    states: Vec<DesignStateId>,
    uniforms: Vec<f64>,
    enumerated: bool,
}

fn draw(n: usize, cfg: &EstimatorConfig, kind: Protocol, campaign: u64, design: &Design<impl Real>) -> Result<Draws> {
    if cfg.mode == Mode::Enumerate {
        let states: Vec<_> = design.ids().collect();
        let uniforms = vec![0.0; states.len()];
        return Ok(Draws { states, uniforms, enumerated: true });
    }
    let m = cfg.experiments(kind)?;
    let pairs: Vec<(DesignStateId, f64)> = (0..m as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = experiment_rng(cfg.seed, campaign, i);
            let id = sample_design_state(n, &mut rng)?;
            Ok((id, rng.random::<f64>()))
        })
        .collect::<Result<_>>()?;
    let (states, uniforms) = pairs.into_iter().unzip();
    Ok(Draws { states, uniforms, enumerated: false })
}

/// Evaluates `f` once per distinct state among the draws.
fn tabulate<V: Send + Sync, F>(draws: &Draws, f: F) -> Result<HashMap<DesignStateId, V>>
where
    F: Fn(&DesignStateId) -> Result<V> + Sync,
{
    let mut unique = draws.states.clone();
    unique.sort_unstable();
    unique.dedup();
    unique.into_par_iter().map(|id| Ok((id, f(&id)?))).collect()
}

fn check_label<T: Real>(channel: &Channel<T>, label: &PauliLabel) -> Result<()> {
    if label.num_qubits() != channel.num_qubits() {
        return Err(Error::QubitMismatch(channel.num_qubits(), label.num_qubits()));
    }
    Ok(())
}

fn dense_vec<T: Real>(amplitudes: &[C<T>]) -> nalgebra::DVector<C<T>> {
    nalgebra::DVector::from_column_slice(amplitudes)
}

/// `⟨ψ|E_m† E(P_ψ) E_m|ψ⟩ = Σ_A |⟨E_m ψ|A|ψ⟩|²`.
fn survival<T: Real>(kraus: &[DMatrix<C<T>>], m: &PauliLabel, psi: &[C<T>]) -> f64 {
    let w = apply_to_vector(m, psi);
    let v = dense_vec(psi);
    kraus
        .iter()
        .map(|a| inner(&w, (a * &v).as_slice()).norm_sqr().as_f64())
        .sum::<f64>()
        .clamp(0.0, 1.0)
}

/// `χ̂_mm = ((D + 1) F̂ − 1) / D` from survival of the `E_m`-modified channel.
pub fn estimate_chi_diag<T: Real>(channel: &Channel<T>, m: &PauliLabel, cfg: &EstimatorConfig) -> Result<Estimate<T>> {
    let n = channel.num_qubits();
    check_dense(n)?;
    check_label(channel, m)?;
    let design = Design::<T>::new(n)?;
    let kraus = channel.kraus()?;
    let draws = draw(n, cfg, Protocol::Fidelity, CAMPAIGN_DIAG, &design)?;
    let table = tabulate(&draws, |id| Ok(survival(kraus.operators(), m, design.state(id)?)))?;

    let outcomes: Vec<f64> = draws
        .states
        .iter()
        .zip(&draws.uniforms)
        .map(|(id, u)| {
            let p = table[id];
            match cfg.mode {
                Mode::Sampled => f64::from(u8::from(*u < p)),
                Mode::Exact | Mode::Enumerate => p,
            }
        })
        .collect();
    let (mean, se) = mean_and_error(&outcomes);
    let d = (1usize << n) as f64;
    let scale = (d + 1.0) / d;
    let se = if draws.enumerated { 0.0 } else { se * scale };
    Ok(Estimate {
        value: c(T::lit(((d + 1.0) * mean - 1.0) / d), T::zero()),
        std_error_re: T::lit(se),
        std_error_im: T::zero(),
        observable: c(T::lit(mean), T::zero()),
        experiments: outcomes.len(),
        dim: 1 << n,
    })
}

/// Per-state ancilla statistics given main-register survival: `(p_survive, ⟨σ_x⟩, ⟨σ_y⟩)`,
/// where the polarisations are unnormalised (already weighted by survival).
fn ancilla_moments<T: Real>(ext: &[DMatrix<C<T>>], psi: &[C<T>]) -> (f64, f64, f64) {
    let d = psi.len();
    let mut input = vec![C::<T>::new(T::zero(), T::zero()); 2 * d];
    input[..d].copy_from_slice(psi);
    let input = dense_vec(&input);
    let (mut surv, mut sx, mut sy) = (0.0, 0.0, 0.0);
    for k in ext {
        let out = k * &input;
        let a0 = inner(psi, &out.as_slice()[..d]);
        let a1 = inner(psi, &out.as_slice()[d..]);
        let cross = a0.conj() * a1;
        surv += (a0.norm_sqr() + a1.norm_sqr()).as_f64();
        sx += 2.0 * cross.re.as_f64();
        sy += 2.0 * cross.im.as_f64();
    }
    (surv, sx, sy)
}

/// Three-valued draw: `+1`, `−1`, or `0` when the main register fails its projective test.
fn polarisation_outcome(surv: f64, pol: f64, u: f64) -> f64 {
    let plus = ((surv + pol) / 2.0).max(0.0);
    let minus = ((surv - pol) / 2.0).max(0.0);
    if u < plus {
        1.0
    } else if u < plus + minus {
        -1.0
    } else {
        0.0
    }
}

/// `χ̂_mn` from two ancilla-polarisation campaigns: `σ_x` for the real part and `σ_y` for the
/// imaginary part, `M` experiments each.
pub fn estimate_chi_offdiag<T: Real>(
    channel: &Channel<T>,
    m: &PauliLabel,
    n_label: &PauliLabel,
    cfg: &EstimatorConfig,
) -> Result<Estimate<T>> {
    let n = channel.num_qubits();
    check_dense(n)?;
    check_label(channel, m)?;
    check_label(channel, n_label)?;
    let design = Design::<T>::new(n)?;
    let ext = modified_channel_offdiag(channel, m, n_label)?;
    let d = (1usize << n) as f64;
    let delta = if m == n_label { 1.0 } else { 0.0 };

    let mut parts = [(0.0, 0.0, 0); 2];
    for (slot, campaign) in [CAMPAIGN_RE, CAMPAIGN_IM].into_iter().enumerate() {
        let draws = draw(n, cfg, Protocol::Offdiagonal, campaign, &design)?;
        let table = tabulate(&draws, |id| Ok(ancilla_moments(ext.operators(), design.state(id)?)))?;
        let outcomes: Vec<f64> = draws
            .states
            .iter()
            .zip(&draws.uniforms)
            .map(|(id, u)| {
                let (surv, sx, sy) = table[id];
                let pol = if slot == 0 { sx } else { sy };
                match cfg.mode {
                    Mode::Sampled => polarisation_outcome(surv, pol, *u),
                    Mode::Exact | Mode::Enumerate => pol,
                }
            })
            .collect();
        let (mean, se) = mean_and_error(&outcomes);
        parts[slot] = (mean, if draws.enumerated { 0.0 } else { se }, outcomes.len());
    }
    let scale = (d + 1.0) / d;
    let (mx, sx, count) = parts[0];
    let (my, sy, _) = parts[1];
    Ok(Estimate {
        value: c(T::lit(((d + 1.0) * mx - delta) / d), T::lit((d + 1.0) * my / d)),
        std_error_re: T::lit(sx * scale),
        std_error_im: T::lit(sy * scale),
        observable: c(T::lit(mx), T::lit(my)),
        experiments: count,
        dim: 1 << n,
    })
}
