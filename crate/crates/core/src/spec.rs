//! JSON channel specifications and the factory that turns them into channels.
//!
//! ```json
//! {"n": 1, "kind": "depolarizing", "p": 0.2}
//! {"n": 2, "kind": "pauli_mixture", "weights": {"II": 0.7, "XI": 0.2, "ZZ": 0.1}}
//! {"n": 1, "kind": "unitary", "generator": "X", "theta": 1.5707963267948966}
//! {"n": 1, "kind": "unitary", "matrix": [[[0, 0], [1, 0]], [[1, 0], [0, 0]]]}
//! {"n": 1, "kind": "compose", "children": [{"n": 1, "kind": "amplitude_damping", "gamma": 0.3}, ...]}
//! ```
//!
//! Complex matrices are row-major nested arrays of `[re, im]` pairs. Composition applies
//! children in listed order.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{chi_to_kraus, kraus_to_chi, Channel, KrausSet, CHI_CAP};
use crate::error::{Error, Result};
use crate::pauli::{all_labels, check_dense, left_multiply, pauli_matrix, PauliLabel};
use crate::scalar::{c, cabs, czero, Real, C};

/// Row-major complex matrix as `[[ [re, im], ... ], ...]`.
pub type MatrixJson = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub n: usize,
    #[serde(flatten)]
    pub kind: ChannelKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChannelKind {
    Identity,
    Depolarizing {
        p: f64,
    },
    PauliMixture {
        weights: BTreeMap<String, f64>,
    },
    /// Either an explicit `matrix`, or `exp(−i θ P / 2)` for a Pauli string `generator`.
    Unitary {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        matrix: Option<MatrixJson>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        generator: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta: Option<f64>,
    },
    /// Independent amplitude damping with rate `gamma` on every qubit.
    AmplitudeDamping {
        gamma: f64,
    },
    Kraus {
        operators: Vec<MatrixJson>,
    },
    Compose {
        children: Vec<ChannelSpec>,
    },
}

/// Weights must sum to one within this.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

/// Unitarity is checked to this tolerance.
pub const UNITARITY_TOL: f64 = 1e-9;

impl ChannelSpec {
    pub fn identity(n: usize) -> Self {
        ChannelSpec { n, kind: ChannelKind::Identity }
    }

    pub fn depolarizing(n: usize, p: f64) -> Self {
        ChannelSpec { n, kind: ChannelKind::Depolarizing { p } }
    }

    pub fn pauli_mixture<S: Into<String>>(n: usize, weights: impl IntoIterator<Item = (S, f64)>) -> Self {
        let weights = weights.into_iter().map(|(k, v)| (k.into(), v)).collect();
        ChannelSpec { n, kind: ChannelKind::PauliMixture { weights } }
    }

    pub fn rotation(n: usize, generator: &str, theta: f64) -> Self {
        ChannelSpec {
            n,
            kind: ChannelKind::Unitary { matrix: None, generator: Some(generator.to_string()), theta: Some(theta) },
        }
    }

    pub fn amplitude_damping(n: usize, gamma: f64) -> Self {
        ChannelSpec { n, kind: ChannelKind::AmplitudeDamping { gamma } }
    }

    pub fn compose(n: usize, children: Vec<ChannelSpec>) -> Self {
        ChannelSpec { n, kind: ChannelKind::Compose { children } }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::MalformedSpec(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    /// Compact serialisation with a fixed field order and sorted weight keys.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(self).expect("channel specs always serialise")
    }

    /// Hex SHA-256 of [`Self::to_canonical_json`].
    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.to_canonical_json().as_bytes()))
    }

    pub fn build<T: Real>(&self) -> Result<Channel<T>> {
        channel_factory(self)
    }
}

fn malformed(msg: impl Into<String>) -> Error {
    Error::MalformedSpec(msg.into())
}

fn parse_label(s: &str, n: usize) -> Result<PauliLabel> {
    let label: PauliLabel = s.parse().map_err(|e: Error| malformed(e.to_string()))?;
    if label.num_qubits() != n {
        return Err(malformed(format!("{s:?} has {} qubits, channel has {n}", label.num_qubits())));
    }
    Ok(label)
}

fn matrix_from_json<T: Real>(m: &MatrixJson, d: usize) -> Result<DMatrix<C<T>>> {
    if m.len() != d || m.iter().any(|row| row.len() != d) {
        return Err(malformed(format!("matrix must be {d} x {d}")));
    }
    Ok(DMatrix::from_fn(d, d, |r, col| {
        let [re, im] = m[r][col];
        c(T::lit(re), T::lit(im))
    }))
}

pub fn matrix_to_json<T: Real>(m: &DMatrix<C<T>>) -> MatrixJson {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|col| [m[(r, col)].re.as_f64(), m[(r, col)].im.as_f64()]).collect())
        .collect()
}

fn scaled_pauli<T: Real>(label: &PauliLabel, w: f64) -> Result<DMatrix<C<T>>> {
    Ok(pauli_matrix::<T>(label)? * c(T::lit(w.sqrt()), T::zero()))
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) || !p.is_finite() {
        return Err(malformed(format!("{name} must lie in [0, 1], got {p}")));
    }
    Ok(())
}

/// Builds the channel described by `spec`, in operator-sum form.
pub fn channel_factory<T: Real>(spec: &ChannelSpec) -> Result<Channel<T>> {
    build_kraus(spec).map(Channel::Kraus)
}

fn build_kraus<T: Real>(spec: &ChannelSpec) -> Result<KrausSet<T>> {
    let n = spec.n;
    if n == 0 {
        return Err(malformed("n must be at least 1"));
    }
    check_dense(n)?;
    let d = 1usize << n;
    let tol = T::lit(UNITARITY_TOL).max(T::default_tol());
    match &spec.kind {
        ChannelKind::Identity => KrausSet::new(n, vec![DMatrix::identity(d, d)]),
        ChannelKind::Depolarizing { p } => {
            check_probability("p", *p)?;
            let d2 = (d * d) as f64;
            let ops = all_labels(n)?
                .filter_map(|m| {
                    let w = if m.is_identity() { 1.0 - p + p / d2 } else { p / d2 };
                    (w > 0.0).then(|| scaled_pauli::<T>(&m, w))
                })
                .collect::<Result<Vec<_>>>()?;
            KrausSet::new(n, ops)
        }
        ChannelKind::PauliMixture { weights } => {
            if weights.is_empty() {
                return Err(malformed("pauli_mixture needs at least one weight"));
            }
            let mut seen = std::collections::HashSet::new();
            let mut ops = Vec::with_capacity(weights.len());
            let mut total = 0.0;
            for (key, &w) in weights {
                let label = parse_label(key, n)?;
                if !seen.insert(label) {
                    return Err(malformed(format!("label {label} listed twice")));
                }
                if w < 0.0 || !w.is_finite() {
                    return Err(malformed(format!("weight for {key} must be non-negative")));
                }
                total += w;
                if w > 0.0 {
                    ops.push(scaled_pauli::<T>(&label, w)?);
                }
            }
            if (total - 1.0).abs() > WEIGHT_SUM_TOL {
                return Err(malformed(format!("weights sum to {total}, not 1")));
            }
            KrausSet::new(n, ops)
        }
        ChannelKind::Unitary { matrix, generator, theta } => {
            let u = match (matrix, generator, theta) {
                (Some(m), None, None) => matrix_from_json::<T>(m, d)?,
                (None, Some(g), Some(t)) => {
                    let label = parse_label(g, n)?;
                    // exp(−iθP/2) = cos(θ/2) I − i sin(θ/2) P
                    let half = t / 2.0;
                    let p = pauli_matrix::<T>(&label)?;
                    DMatrix::identity(d, d) * c(T::lit(half.cos()), T::zero())
                        + p * c(T::zero(), T::lit(-half.sin()))
                }
                _ => return Err(malformed("unitary needs either `matrix` or both `generator` and `theta`")),
            };
            let dev = (u.adjoint() * &u - DMatrix::identity(d, d)).iter().fold(T::zero(), |a, v| a.max(cabs(*v)));
            if dev > tol {
                return Err(malformed(format!("matrix is not unitary (deviation {dev})")));
            }
            KrausSet::new(n, vec![u])
        }
        ChannelKind::AmplitudeDamping { gamma } => {
            check_probability("gamma", *gamma)?;
            let s = (1.0 - gamma).sqrt();
            let single = [
                DMatrix::from_row_slice(2, 2, &[c(T::one(), T::zero()), czero(), czero(), c(T::lit(s), T::zero())]),
                DMatrix::from_row_slice(2, 2, &[czero(), c(T::lit(gamma.sqrt()), T::zero()), czero(), czero()]),
            ];
            let mut ops: Vec<DMatrix<C<T>>> = vec![DMatrix::identity(1, 1)];
            for _ in 0..n {
                ops = ops
                    .iter()
                    .flat_map(|a| single.iter().map(move |b| a.kronecker(b)))
                    .collect();
            }
            if *gamma == 0.0 {
                ops.retain(|op| op.iter().any(|v| *v != czero()));
            }
            KrausSet::new(n, ops)
        }
        ChannelKind::Kraus { operators } => {
            if operators.is_empty() {
                return Err(malformed("kraus needs at least one operator"));
            }
            let ops = operators.iter().map(|m| matrix_from_json::<T>(m, d)).collect::<Result<Vec<_>>>()?;
            KrausSet::with_tolerance(n, ops, tol).map_err(|e| malformed(e.to_string()))
        }
        ChannelKind::Compose { children } => {
            let mut iter = children.iter();
            let first = iter.next().ok_or_else(|| malformed("compose needs at least one child"))?;
            let mut acc = build_kraus::<T>(first)?;
            if acc.num_qubits() != n {
                return Err(malformed("compose children must share the parent's n"));
            }
            for child in iter {
                if child.n != n {
                    return Err(malformed("compose children must share the parent's n"));
                }
                acc = acc.then(&build_kraus::<T>(child)?)?;
                if acc.len() > d * d && n <= CHI_CAP {
                    acc = chi_to_kraus(&kraus_to_chi(&acc)?)?;
                }
            }
            Ok(acc)
        }
    }
}

/// A spread of named channels exercising coherent and incoherent χ structure.
pub fn standard_channels(n: usize) -> Vec<(String, ChannelSpec)> {
    let ident = "I".repeat(n);
    let with = |q: char| {
        let mut s: Vec<char> = ident.chars().collect();
        s[0] = q;
        s.into_iter().collect::<String>()
    };
    let last_z = {
        let mut s: Vec<char> = ident.chars().collect();
        s[n - 1] = 'Z';
        s[0] = 'Z';
        s.into_iter().collect::<String>()
    };
    let mut weights = BTreeMap::new();
    weights.insert(ident.clone(), 0.7);
    weights.insert(with('X'), 0.2);
    *weights.entry(last_z).or_insert(0.0) += 0.1;
    vec![
        ("identity".into(), ChannelSpec::identity(n)),
        ("depolarizing".into(), ChannelSpec::depolarizing(n, 0.2)),
        ("pauli_mixture".into(), ChannelSpec { n, kind: ChannelKind::PauliMixture { weights } }),
        ("rotation".into(), ChannelSpec::rotation(n, &with('X'), std::f64::consts::FRAC_PI_3)),
        ("amplitude_damping".into(), ChannelSpec::amplitude_damping(n, 0.3)),
        (
            "damped_rotation".into(),
            ChannelSpec::compose(n, vec![ChannelSpec::amplitude_damping(n, 0.25), ChannelSpec::rotation(n, &with('Y'), 0.7)]),
        ),
    ]
}

/// Applies `P` after the channel: handy for building Pauli-twisted test channels.
pub fn with_pauli_after<T: Real>(channel: &Channel<T>, p: &PauliLabel) -> Result<Channel<T>> {
    let k = channel.kraus()?;
    let ops = k.operators().iter().map(|a| left_multiply(p, a)).collect();
    Ok(Channel::Kraus(KrausSet::new(k.num_qubits(), ops)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::validate_chi;
    use proptest::prelude::*;

    fn l(s: &str) -> PauliLabel {
        s.parse().unwrap()
    }

    #[test]
    fn identity_spec() {
        let ch: Channel<f64> = ChannelSpec::from_json(r#"{"n": 2, "kind": "identity"}"#).unwrap().build().unwrap();
        let chi = ch.chi().unwrap();
        assert!((chi.diagonal(&l("II")).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pauli_mixture_spec() {
        let spec = ChannelSpec::from_json(r#"{"n": 2, "kind": "pauli_mixture", "weights": {"II": 0.7, "XI": 0.2, "ZZ": 0.1}}"#).unwrap();
        let chi = spec.build::<f64>().unwrap().chi().unwrap().into_owned();
        for (s, w) in [("II", 0.7), ("XI", 0.2), ("ZZ", 0.1)] {
            assert!((chi.diagonal(&l(s)).unwrap() - w).abs() < 1e-14);
        }
        let total: f64 = chi.entries().iter().map(|v| v.norm()).sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn depolarizing_spec() {
        let chi = ChannelSpec::depolarizing(1, 0.2).build::<f64>().unwrap().chi().unwrap().into_owned();
        for (s, w) in [("I", 0.85), ("X", 0.05), ("Y", 0.05), ("Z", 0.05)] {
            assert!((chi.diagonal(&l(s)).unwrap() - w).abs() < 1e-14);
        }
    }

    #[test]
    fn rotation_chi() {
        let chi = ChannelSpec::rotation(1, "X", std::f64::consts::FRAC_PI_2)
            .build::<f64>()
            .unwrap()
            .chi()
            .unwrap()
            .into_owned();
        let v = chi.get(&l("I"), &l("X")).unwrap();
        assert!(v.re.abs() < 1e-15 && (v.im - 0.5).abs() < 1e-15);
    }

    #[test]
    fn malformed_specs() {
        let bad = [
            r#"{"n": 1, "kind": "pauli_mixture", "weights": {"I": 0.7, "X": 0.2}}"#,
            r#"{"n": 1, "kind": "pauli_mixture", "weights": {"II": 1.0}}"#,
            r#"{"n": 1, "kind": "unitary", "matrix": [[[1, 0], [1, 0]], [[0, 0], [1, 0]]]}"#,
            r#"{"n": 1, "kind": "unitary", "generator": "X"}"#,
            r#"{"n": 1, "kind": "depolarizing", "p": 1.5}"#,
            r#"{"n": 1, "kind": "compose", "children": []}"#,
            r#"{"n": 1, "kind": "kraus", "operators": [[[[0.5, 0], [0, 0]], [[0, 0], [0.5, 0]]]]}"#,
            r#"{"n": 1, "kind": "teleport"}"#,
        ];
        for text in bad {
            let res = ChannelSpec::from_json(text).and_then(|s| s.build::<f64>());
            assert!(res.is_err(), "{text} should fail");
        }
        assert!(matches!(ChannelSpec::from_json("{").unwrap_err(), Error::MalformedSpec(_)));
        let big = ChannelSpec::identity(7).build::<f64>();
        assert!(matches!(big, Err(Error::DenseCapExceeded { .. })));
    }

    #[test]
    fn explicit_kraus_and_compose() {
        let text = r#"{"n": 1, "kind": "compose", "children": [
            {"n": 1, "kind": "kraus", "operators": [[[[1, 0], [0, 0]], [[0, 0], [0, 0]]], [[[0, 0], [0, 0]], [[0, 0], [1, 0]]]]},
            {"n": 1, "kind": "unitary", "matrix": [[[0, 0], [1, 0]], [[1, 0], [0, 0]]]}
        ]}"#;
        // Full dephasing then a bit flip: |0⟩⟨0| -> |1⟩⟨1|.
        let ch = ChannelSpec::from_json(text).unwrap().build::<f64>().unwrap();
        let chi = ch.chi().unwrap();
        assert!((chi.diagonal(&l("X")).unwrap() - 0.5).abs() < 1e-14);
        assert!((chi.diagonal(&l("Y")).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn standard_channels_validate() {
        for n in 1..=3 {
            for (name, spec) in standard_channels(n) {
                let ch = spec.build::<f64>().unwrap();
                let report = validate_chi(&ch.chi().unwrap(), 1e-10).unwrap();
                assert!(report.passed, "{name} at n={n}: {report:?}");
            }
        }
    }

    #[test]
    fn hash_is_stable_and_content_sensitive() {
        let a = ChannelSpec::depolarizing(1, 0.2);
        let b = ChannelSpec::from_json(&a.to_canonical_json()).unwrap();
        assert_eq!(a.sha256(), b.sha256());
        assert_ne!(a.sha256(), ChannelSpec::depolarizing(1, 0.21).sha256());
        let pretty = serde_json::to_string_pretty(&a).unwrap();
        assert_eq!(ChannelSpec::from_json(&pretty).unwrap().sha256(), a.sha256());
    }

    fn spec_strategy() -> impl Strategy<Value = ChannelSpec> {
        let leaf = prop_oneof![
            Just(ChannelSpec::identity(2)),
            any::<f64>().prop_map(|p| ChannelSpec::depolarizing(2, p)),
            (any::<f64>(), any::<f64>()).prop_map(|(a, b)| ChannelSpec::pauli_mixture(2, [("II", a), ("XY", b)])),
            (any::<f64>(), any::<f64>()).prop_map(|(re, im)| ChannelSpec {
                n: 2,
                kind: ChannelKind::Unitary { matrix: Some(vec![vec![[re, im]; 4]; 4]), generator: None, theta: None },
            }),
            any::<f64>().prop_map(|t| ChannelSpec::rotation(2, "ZX", t)),
        ];
        leaf.prop_recursive(2, 8, 3, |inner| {
            prop::collection::vec(inner, 1..3).prop_map(|children| ChannelSpec::compose(2, children))
        })
    }

    proptest! {
        #[test]
        fn json_round_trip_is_exact(spec in spec_strategy()) {
            prop_assume!(spec.to_canonical_json().find("null").is_none());
            let text = spec.to_canonical_json();
            let back = ChannelSpec::from_json(&text).unwrap();
            prop_assert_eq!(&back, &spec);
            prop_assert_eq!(back.to_canonical_json(), text);
        }
    }
}
