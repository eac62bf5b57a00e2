//! Selective estimation of process-matrix (χ) coefficients of multi-qubit channels from
//! fidelity-type experiments over the mutually unbiased bases of `n` qubits.
//!
//! Symbolic Pauli algebra, MUB classes and label solving work up to 32 qubits; dense
//! simulation (states, channels, estimators) is capped at [`pauli::DENSE_CAP`] qubits and the
//! exact oracle at [`oracle::ORACLE_CAP`].
//!
//! Numerical types are generic over [`Real`] (`f32` or `f64`); the aliases below fix one.

pub mod channel;
pub mod design;
pub mod error;
pub mod estimator;
pub mod field;
pub mod gf2;
pub mod mub;
pub mod oracle;
pub mod pauli;
pub mod random;
pub mod report;
pub mod scalar;
pub mod spec;
pub mod triplet;
pub mod verify;

pub use channel::{Channel, ChiMatrix, DensityMatrix, KrausSet};
pub use design::{Design, DesignStateId, StateVector};
pub use error::{Error, Result};
pub use estimator::{Estimate, EstimatorConfig, Mode};
pub use mub::{CommutationVector, LabelSolver, MubClass};
pub use oracle::Oracle;
pub use pauli::{Pauli, PauliLabel, PhaseExponent};
pub use scalar::Real;
pub use spec::ChannelSpec;
pub use triplet::{Triplet, TripletSet};

pub type Channel64 = Channel<f64>;
pub type Channel32 = Channel<f32>;
pub type ChiMatrix64 = ChiMatrix<f64>;
pub type ChiMatrix32 = ChiMatrix<f32>;
pub type KrausSet64 = KrausSet<f64>;
pub type KrausSet32 = KrausSet<f32>;
pub type DensityMatrix64 = DensityMatrix<f64>;
pub type DensityMatrix32 = DensityMatrix<f32>;
pub type StateVector64 = StateVector<f64>;
pub type StateVector32 = StateVector<f32>;
pub type Estimate64 = Estimate<f64>;
pub type Estimate32 = Estimate<f32>;
