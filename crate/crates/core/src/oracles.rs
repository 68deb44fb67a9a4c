//! Numeric spectra checked against the closed-form and perturbative results.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::HilbertSpace;
use crate::kerr::NumericLevels;
use crate::rqr::analytic::{chi_perturbative, hint_coefficient, jc_spectrum_analytic, jc_unpaired_energy};
use crate::rqr::couplings::effective_couplings;
use crate::rqr::spectrum::{qubit_references, SpectrumSolver};
use crate::rqr::RqrParams;

/// Largest deviation between block eigenvalues and the two-mode ladder.
#[derive(Debug, Clone, Serialize)]
pub struct LadderCheck {
    pub nu_q: f64,
    pub states: usize,
    pub max_error_ghz: f64,
}

/// Every eigenvalue with up to `max_excitation` excitations, for a two-level
/// coupler with equal resonators and no direct coupling.
pub fn ladder_oracle(nu: f64, g: f64, nu_q: &[f64], max_excitation: usize) -> Result<Vec<LadderCheck>> {
    let space = HilbertSpace::rqr(max_excitation, 2)?;
    let solver = SpectrumSolver::new(&space)?;
    nu_q.iter()
        .map(|&q| {
            let p = RqrParams::symmetric(nu, q, 0.0, g, 0.0, 2);
            let mut states = 0;
            let mut worst = 0.0_f64;
            for blk in solver.diagonalize_blocks(&p, max_excitation)? {
                let n = blk.excitation;
                let mut expect = vec![jc_unpaired_energy(&p, n)?];
                for np in 1..=n {
                    let d = jc_spectrum_analytic(&p, n - np, np)?;
                    expect.extend([d.e_minus, d.e_plus]);
                }
                expect.sort_by(f64::total_cmp);
                if expect.len() != blk.energies.len() {
                    return Err(Error::DimensionMismatch { expected: expect.len(), found: blk.energies.len() });
                }
                states += expect.len();
                worst = expect.iter().zip(&blk.energies).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
            }
            Ok(LadderCheck { nu_q: q, states, max_error_ghz: worst })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ChiCheck {
    pub detuning: f64,
    pub gz_numeric: f64,
    pub chi_full: f64,
    pub chi_simplified: f64,
    pub relative_error: f64,
}

/// `g_z` of the dressed qubit states against the fourth-order cross-Kerr,
/// with no direct coupling.
pub fn chi_oracle(nu: f64, alpha: f64, g: f64, detunings: &[f64]) -> Result<Vec<ChiCheck>> {
    let space = HilbertSpace::rqr(2, 3)?;
    let solver = SpectrumSolver::new(&space)?;
    let refs = qubit_references(&space)?;
    detunings
        .iter()
        .map(|&d| {
            let p = RqrParams::symmetric(nu, nu + d, alpha, g, 0.0, 3);
            let s = solver.diagonalize(&p, &refs)?;
            let gz = effective_couplings(&s)?.gz;
            let chi = chi_perturbative(&p)?;
            Ok(ChiCheck {
                detuning: d,
                gz_numeric: gz,
                chi_full: chi.full,
                chi_simplified: chi.simplified,
                relative_error: (gz - chi.full) / chi.full,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct HintCheck {
    pub delta: f64,
    /// `E(1,1) - E(1,0) - E(0,1) + E(0,0)` of the lower dressed states, GHz.
    pub numeric: f64,
    pub formula: f64,
    pub relative_error: f64,
}

/// Resonant (Delta = 0) two-body energy at one photon per normal mode
/// against `3/(4 sqrt 2) delta^2/g`, two-level coupler.
pub fn hint_oracle(nu: f64, g: f64, deltas: &[f64]) -> Result<Vec<HintCheck>> {
    deltas
        .iter()
        .map(|&delta| {
            let levels = NumericLevels {
                nu,
                g,
                delta,
                coupler_detuning: 0.0,
                alpha: 0.0,
                coupler_levels: 2,
                steps: 10,
            };
            let h = levels.interaction(1)?.values / std::f64::consts::TAU;
            let numeric = h[(1, 1)] - h[(1, 0)] - h[(0, 1)] + h[(0, 0)];
            let mut p = RqrParams::symmetric(nu, nu, 0.0, g, 0.0, 2);
            p.nu_a = nu - 0.5 * delta;
            p.nu_b = nu + 0.5 * delta;
            let formula = hint_coefficient(&p)?;
            Ok(HintCheck { delta, numeric, formula, relative_error: (numeric - formula) / formula })
        })
        .collect()
}
