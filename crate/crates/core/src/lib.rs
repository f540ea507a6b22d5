//! Maximal Clauser-Horne violations for qubit and qutrit states, the minimal
//! detection efficiency that still allows a violation, and the white-noise
//! threshold.
//!
//! Modules build on each other bottom-up:
//!
//! - [`qcore`]: dense complex vectors and operators, tensor products and
//!   projection probabilities.
//! - [`scenarios`]: tritter qutrits, biphoton qutrits and polarization qubits
//!   as (state family, measurement family) pairs.
//! - [`bell`]: functionals as signed term tables, the joint/single split,
//!   efficiency and noise models, and the deterministic local bound.
//! - [`optim`]: multistart simplex maximization and the threshold searches.
//! - [`scan`]: parameter grids for contour plots, CSV/JSON export.

pub mod bell;
pub mod error;
pub mod optim;
pub mod qcore;
pub mod scan;
pub mod scenarios;

pub use bell::{BellFunctional, BellValue};
pub use error::{Error, Result};
pub use optim::{Entanglement, OptimOptions, Problem, ViolationResult};
pub use scenarios::{EntanglementParams, OutcomePair, Scenario, SettingParams};
