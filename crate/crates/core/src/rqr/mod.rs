//! The resonator-coupler-resonator model: Hamiltonian, spectra and couplings.

pub mod analytic;
pub mod couplings;
pub mod hamiltonian;
mod params;
pub mod spectrum;

pub use analytic::{chi_perturbative, delta_e2, hint_coefficient, jc_spectrum_analytic, ChiEstimate, JcDoublet};
pub use couplings::{effective_couplings, scan_couplings, CouplingScan, CouplingSummary};
pub use hamiltonian::{build_hamiltonian, build_hamiltonian_rotating, HamiltonianTerms};
pub use params::RqrParams;
pub use spectrum::{diagonalize_labeled, diagonalize_with_references, Reference, Spectrum, SpectrumSolver};
