//! Quantum Fisher information, Bures geometry and query-complexity bounds for
//! Grover-type search under dephasing.
//!
//! The numerical core is generic over the scalar type (`f32` or `f64`, see
//! [`Real`]); the `*64` aliases below fix it to `f64`.

// Validation uses `!(x > 0.0)` style checks on purpose so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod channels;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod linalg;
pub mod probeopt;
pub mod protocol;
pub mod random;
pub mod scalar;
pub mod states;

pub use bounds::{BoundReport, Direction};
pub use channels::{DephasingChannel, KrausChannel, OracleUnitary};
pub use error::{Error, Result};
pub use geometry::{bures_angle, fidelity, qfi_pure, qfi_sld, QfiMethod, QfiResult, StateFamily};
pub use probeopt::{OptimizationResult, OptimizerOptions};
pub use protocol::{run_scheme, Intertwiner, SchemeConfig, Trajectory};
pub use scalar::{CMatrix, CVector, Real};
pub use states::{DensityMatrix, Hamiltonian, Label, PureState};

pub type DensityMatrix64 = DensityMatrix<f64>;
pub type PureState64 = PureState<f64>;
pub type Hamiltonian64 = Hamiltonian<f64>;
pub type SchemeConfig64 = SchemeConfig<f64>;
pub type Trajectory64 = Trajectory<f64>;
pub type DephasingChannel64 = DephasingChannel<f64>;
pub type OracleUnitary64 = OracleUnitary<f64>;
pub type CMatrix64 = CMatrix<f64>;
