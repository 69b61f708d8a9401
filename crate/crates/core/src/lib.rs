//! Numerical laboratory for modulated wave packets on the two-dimensional
//! scalar FPUT lattice with cubic nearest-neighbour forces.
//!
//! * [`dispersion`]: closed-form carrier data (frequency, group velocity,
//!   Hessian, NLS coefficients, correction factors).
//! * [`lattice`]: periodic lattice dynamics in displacement and strain form.
//! * [`nls`]: split-step Fourier solver for the envelope equation.
//! * [`ansatz`]: envelope-to-lattice approximations, compatible initial data
//!   and residuals.
//! * [`harness`]: coupled experiments, error sweeps and order fits.
//! * [`snapshot`]: binary field snapshots.

// Negated comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ansatz;
pub mod dispersion;
pub mod harness;
pub mod lattice;
pub mod nls;
pub mod snapshot;
pub mod spectral;

pub use dispersion::{DispersionData, DispersionError, Variant, WaveVector};
pub use lattice::{ForceLaw, Form, LatticeError, LatticeState};
pub use nls::{EnvelopeField, NlsError, NlsProblem, NlsSolver};
