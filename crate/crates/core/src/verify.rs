//! Self-check suites: MUB structure, the 2-design identity, and the exact fidelity,
//! off-diagonal and trace identities for the standard channels.

use std::collections::HashSet;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::channel::{chi_to_kraus, kraus_to_chi, Channel};
use crate::design::{inner, Design};
use crate::error::{Error, Result};
use crate::mub::{commutation_vector, mub_classes};
use crate::oracle::{haar_closed_form, IdentityResidual, Oracle, ORACLE_CAP};
use crate::pauli::{all_labels, apply_to_vector, pauli_mul, symplectic_product, PauliLabel, DENSE_CAP};
use crate::random::{random_channel, random_matrix};
use crate::spec::standard_channels;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyLevel {
    Quick,
    Full,
}

impl std::str::FromStr for VerifyLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "quick" => Ok(VerifyLevel::Quick),
            "full" => Ok(VerifyLevel::Full),
            other => Err(Error::InvalidConfig(format!("unknown verify level `{other}`"))),
        }
    }
}

impl VerifyLevel {
    fn operator_pairs(self) -> usize {
        match self {
            VerifyLevel::Quick => 5,
            VerifyLevel::Full => 20,
        }
    }

    fn labels(self) -> usize {
        match self {
            VerifyLevel::Quick => 3,
            VerifyLevel::Full => 10,
        }
    }

    fn random_channels(self) -> usize {
        match self {
            VerifyLevel::Quick => 1,
            VerifyLevel::Full => 5,
        }
    }
}

/// Largest `n` for which the trace condition, which loops over all `D⁴` label pairs, is run.
pub const TRACE_CONDITION_CAP: usize = 3;

#[derive(Debug, Clone, Serialize)]
pub struct VerifySummary {
    pub n: usize,
    pub level: VerifyLevel,
    pub residuals: Vec<IdentityResidual>,
    /// Suites not run at this size, with the reason.
    pub skipped: Vec<String>,
    #[serde(skip)]
    pub elapsed_seconds: f64,
    pub passed: bool,
}

impl VerifySummary {
    /// Fixed-width residual table.
    pub fn table(&self) -> String {
        let mut out = format!("{:<40} {:>12} {:>10}  status\n", "identity", "residual", "tolerance");
        for r in &self.residuals {
            out += &format!(
                "{:<40} {:>12.3e} {:>10.1e}  {}\n",
                r.identity,
                r.residual,
                r.tolerance,
                if r.passed { "pass" } else { "FAIL" }
            );
        }
        for s in &self.skipped {
            out += &format!("{s:<40} {:>12} {:>10}  skipped\n", "-", "-");
        }
        out
    }
}

const EXACT_TOL: f64 = 1e-9;
const OVERLAP_TOL: f64 = 1e-10;

/// Runs every suite that fits `n`: all of them up to the oracle cap, only the MUB and design
/// suites up to the dense cap.
pub fn run_verify(n: usize, level: VerifyLevel) -> Result<VerifySummary> {
    if n == 0 {
        return Err(Error::UnsupportedQubitCount { n, min: 1, max: DENSE_CAP });
    }
    if n > DENSE_CAP {
        return Err(Error::DenseCapExceeded { n, cap: DENSE_CAP });
    }
    let start = Instant::now();
    let mut residuals = Vec::new();
    let mut skipped = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 + n as u64);

    residuals.extend(mub_suite(n)?);
    let design = Design::<f64>::new(n)?;
    residuals.extend(design_suite(n, &design, level, &mut rng)?);

    if n <= ORACLE_CAP {
        residuals.extend(oracle_suite(n, level, &mut rng)?);
    } else {
        skipped.push(format!("channel identities (n > {ORACLE_CAP})"));
    }
    let passed = residuals.iter().all(|r| r.passed);
    Ok(VerifySummary { n, level, residuals, skipped, elapsed_seconds: start.elapsed().as_secs_f64(), passed })
}

/// Count of structural violations: generators commute and are independent, classes are
/// disjoint and together cover every non-identity label.
fn mub_suite(n: usize) -> Result<Vec<IdentityResidual>> {
    let classes = mub_classes(n)?;
    let d = 1usize << n;
    let mut violations = 0usize;
    let mut seen: HashSet<PauliLabel> = HashSet::new();
    for class in &classes {
        let g = class.generators();
        violations += usize::from(g.len() != n);
        for a in g {
            for b in g {
                violations += usize::from(symplectic_product(a, b)? != 0);
            }
        }
        let elements = class.group_elements();
        let distinct: HashSet<_> = elements.iter().collect();
        violations += d - distinct.len();
        for e in elements.into_iter().filter(|e| !e.is_identity()) {
            violations += usize::from(!seen.insert(e));
        }
    }
    violations += d * d - 1 - seen.len();
    Ok(vec![IdentityResidual::new("mub_partition_violations", violations as f64, 0.0)])
}

fn design_suite(n: usize, design: &Design<f64>, level: VerifyLevel, rng: &mut ChaCha8Rng) -> Result<Vec<IdentityResidual>> {
    let d = design.dim();
    let df = d as f64;
    let bases = d as u64 + 1;
    let (mut ortho, mut cross) = (0.0f64, 0.0f64);
    for a in 0..bases {
        let ba = design.basis(a)?;
        for b in a..bases {
            let bb = design.basis(b)?;
            // One Gram matrix per pair of bases.
            let gram = ba.states().adjoint() * bb.states();
            for v in gram.iter().enumerate() {
                let (i, j) = (v.0 % d, v.0 / d);
                if a == b {
                    let target = if i == j { 1.0 } else { 0.0 };
                    ortho = ortho.max((v.1 - nalgebra::Complex::new(target, 0.0)).norm());
                } else {
                    cross = cross.max((v.1.norm_sqr() - 1.0 / df).abs());
                }
            }
        }
    }

    // P_a |ψ^J_k⟩ is |ψ^J_{k ⊕ p}⟩ up to phase.
    let labels: Vec<PauliLabel> = all_labels(n)?.collect();
    let mut transition = 0.0f64;
    for _ in 0..level.labels() * 4 {
        let a = labels[rng.random_range(0..labels.len())];
        let base = rng.random_range(0..bases);
        let k = rng.random_range(0..d as u64);
        let basis = design.basis(base)?;
        let p = commutation_vector(&a, basis.class())?.bits();
        let moved = apply_to_vector(&a, basis.state(k));
        transition = transition.max(1.0 - inner(basis.state(k ^ p), &moved).norm_sqr());
    }

    let mut two_design = 0.0f64;
    for _ in 0..level.operator_pairs() {
        let o1 = random_matrix::<f64, _>(d, rng);
        let o2 = random_matrix::<f64, _>(d, rng);
        let got = design.average_survival(&o1, &o2)?;
        two_design = two_design.max((got - haar_closed_form(&o1, &o2)?).norm());
    }
    Ok(vec![
        IdentityResidual::new("mub_orthonormality", ortho, OVERLAP_TOL),
        IdentityResidual::new("mub_cross_overlap", cross, OVERLAP_TOL),
        IdentityResidual::new("commutation_transition", transition, OVERLAP_TOL),
        IdentityResidual::new("two_design_average", two_design, EXACT_TOL),
    ])
}

fn oracle_suite(n: usize, level: VerifyLevel, rng: &mut ChaCha8Rng) -> Result<Vec<IdentityResidual>> {
    let labels: Vec<PauliLabel> = all_labels(n)?.collect();
    let mut channels: Vec<(String, Channel<f64>)> = standard_channels(n)
        .into_iter()
        .map(|(name, spec)| Ok((name, spec.build::<f64>()?)))
        .collect::<Result<_>>()?;
    for i in 0..level.random_channels() {
        channels.push((format!("random_{i}"), random_channel::<f64, _>(n, rng)?));
    }
    let d = (1usize << n) as f64;

    let (mut fid, mut modified, mut integral, mut ancilla, mut trace, mut roundtrip, mut floor) =
        (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (name, channel) in &channels {
        let oracle = Oracle::new(channel)?;
        let chi = oracle.chi();
        let f = oracle.average_fidelity()?;
        fid = fid.max((f - (d * chi.entries()[(0, 0)].re + 1.0) / (d + 1.0)).abs());
        for _ in 0..level.labels() {
            let m = labels[rng.random_range(0..labels.len())];
            let fm = oracle.modified_fidelity(&m)?;
            modified = modified.max((fm - (d * chi.diagonal(&m)? + 1.0) / (d + 1.0)).abs());
            floor = floor.max(1.0 / (d + 1.0) - fm);

            let nl = labels[rng.random_range(0..labels.len())];
            let avg = oracle.offdiag_average(&m, &nl)?;
            integral = integral.max((avg.integral - avg.expected).norm());
            ancilla = ancilla.max((avg.ancilla_x - avg.expected.re).abs().max((avg.ancilla_y - avg.expected.im).abs()));
        }
        if n <= TRACE_CONDITION_CAP {
            trace = trace.max(oracle.trace_condition_residual()?);
        }
        let again = kraus_to_chi(&chi_to_kraus(chi)?)?;
        let diff = (chi.entries() - again.entries()).iter().fold(0.0f64, |a, v| a.max(v.norm()));
        roundtrip = roundtrip.max(diff);
        log::debug!("verify n={n}: {name} done");
    }

    // The product of any label with itself is the identity with trivial phase.
    let mut phase = 0usize;
    for a in &labels {
        let (p, theta) = pauli_mul(a, a)?;
        phase += usize::from(!p.is_identity() || theta.value() != 0);
    }

    let mut out = vec![
        IdentityResidual::new("pauli_square_violations", phase as f64, 0.0),
        IdentityResidual::new("average_fidelity", fid, EXACT_TOL),
        IdentityResidual::new("modified_fidelity", modified, EXACT_TOL),
        IdentityResidual::new("fidelity_floor", floor.max(0.0), EXACT_TOL),
        IdentityResidual::new("offdiag_integral", integral, EXACT_TOL),
        IdentityResidual::new("offdiag_ancilla", ancilla, EXACT_TOL),
        IdentityResidual::new("chi_kraus_roundtrip", roundtrip, EXACT_TOL),
    ];
    if n <= TRACE_CONDITION_CAP {
        out.push(IdentityResidual::new("trace_condition", trace, 1e-8));
    }
    Ok(out)
}
