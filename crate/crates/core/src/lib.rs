//! Floquet data, Prüfer variables and decaying Wigner–von Neumann type
//! perturbations for one-dimensional periodic Dirac operators.

pub mod error;
pub mod floquet;
pub mod integrate;
pub mod periodic;
pub mod pruefer;
pub mod synth;
pub mod verify;

pub use error::{Error, ResonanceKind, Result};
pub use floquet::{
    band_scan, derived_data, floquet_solution, monodromy, quasimomentum, BandStructure, DerivedPeriodicData,
    FloquetSolution, Monodromy, Quasimomentum,
};
pub use integrate::{integrate, IntegratorSpec, Trajectory};
pub use periodic::{Coefficients, PeriodicCoefficient, Potential, RealState2};
pub use pruefer::{from_prufer, to_prufer, PrueferState};
