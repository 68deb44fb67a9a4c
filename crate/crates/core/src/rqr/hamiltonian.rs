use std::f64::consts::TAU;

use nalgebra::DMatrix;

use super::RqrParams;
use crate::error::{Error, Result};
use crate::fock::{mode_op, HilbertSpace, LadderKind, LinearOp, ModeKind, C64};

pub const MODE_A: usize = 0;
pub const MODE_Q: usize = 1;
pub const MODE_B: usize = 2;

/// The parameter-independent operator pieces of the circuit Hamiltonian,
/// stored as real matrices in the Fock basis.
#[derive(Debug, Clone)]
pub struct HamiltonianTerms {
    space: HilbertSpace,
    pub n_a: DMatrix<f64>,
    pub n_q: DMatrix<f64>,
    pub n_b: DMatrix<f64>,
    /// Diagonal `-k(k-1)/2` on the coupler.
    pub anharm: DMatrix<f64>,
    pub hop_ab: DMatrix<f64>,
    pub hop_a: DMatrix<f64>,
    pub hop_b: DMatrix<f64>,
}

fn real(op: &LinearOp) -> DMatrix<f64> {
    op.matrix().map(|z| z.re)
}

/// Checks the `[bosonic, coupler, bosonic]` layout.
pub fn check_layout(space: &HilbertSpace) -> Result<()> {
    let kinds: Vec<ModeKind> = space.modes().iter().map(|m| m.kind).collect();
    if kinds != [ModeKind::Bosonic, ModeKind::Coupler, ModeKind::Bosonic] {
        return Err(Error::SpaceMismatch(format!("expected [bosonic, coupler, bosonic], got {kinds:?}")));
    }
    Ok(())
}

impl HamiltonianTerms {
    pub fn new(space: &HilbertSpace) -> Result<Self> {
        check_layout(space)?;
        let a = real(&mode_op(space, MODE_A, LadderKind::Lower)?);
        let b = real(&mode_op(space, MODE_B, LadderKind::Lower)?);
        let s = real(&mode_op(space, MODE_Q, LadderKind::Lower)?);
        let n_q = real(&mode_op(space, MODE_Q, LadderKind::Number)?);
        let anharm = DMatrix::from_diagonal(&n_q.diagonal().map(|k| -0.5 * k * (k - 1.0)));
        let hop = |x: &DMatrix<f64>, y: &DMatrix<f64>| {
            let m = x.transpose() * y;
            &m + m.transpose()
        };
        Ok(Self {
            space: space.clone(),
            n_a: real(&mode_op(space, MODE_A, LadderKind::Number)?),
            n_b: real(&mode_op(space, MODE_B, LadderKind::Number)?),
            hop_ab: hop(&a, &b),
            hop_a: hop(&a, &s),
            hop_b: hop(&b, &s),
            n_q,
            anharm,
        })
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    /// Static part: everything except the three mode frequencies, in GHz.
    pub fn couplings_ghz(&self, p: &RqrParams) -> DMatrix<f64> {
        self.anharm.scale(p.alpha) + self.hop_ab.scale(p.g_ab) + self.hop_a.scale(p.g_a) + self.hop_b.scale(p.g_b)
    }

    /// Hamiltonian / 2pi in GHz, in a frame rotating at `frame` GHz per
    /// excitation (frame = 0 is the lab frame).
    pub fn assemble_ghz(&self, p: &RqrParams, frame: f64) -> DMatrix<f64> {
        self.couplings_ghz(p)
            + self.n_a.scale(p.nu_a - frame)
            + self.n_b.scale(p.nu_b - frame)
            + self.n_q.scale(p.nu_q - frame)
    }
}

fn check_levels(p: &RqrParams, space: &HilbertSpace) -> Result<()> {
    p.validate()?;
    check_layout(space)?;
    let levels = space.modes()[MODE_Q].dim();
    if levels != p.coupler_levels {
        return Err(Error::SpaceMismatch(format!(
            "space has a {levels}-level coupler, parameters ask for {}",
            p.coupler_levels
        )));
    }
    Ok(())
}

/// Circuit Hamiltonian in angular units (rad/ns), lab frame.
pub fn build_hamiltonian(params: &RqrParams, space: &HilbertSpace) -> Result<LinearOp> {
    build_hamiltonian_rotating(params, space, 0.0)
}

/// Same as [`build_hamiltonian`] minus `2pi frame N_tot`. The frame term
/// commutes with H, so it only changes phases.
pub fn build_hamiltonian_rotating(params: &RqrParams, space: &HilbertSpace, frame: f64) -> Result<LinearOp> {
    check_levels(params, space)?;
    let terms = HamiltonianTerms::new(space)?;
    let h = terms.assemble_ghz(params, frame).map(|x| C64::new(TAU * x, 0.0));
    LinearOp::new(space.clone(), h)
}

pub(crate) fn check_model(params: &RqrParams, space: &HilbertSpace) -> Result<()> {
    check_levels(params, space)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{total_number, Ket};
    use approx::assert_abs_diff_eq;

    #[test]
    fn uncoupled_is_diagonal() {
        let space = HilbertSpace::rqr(2, 3).unwrap();
        let p = RqrParams { g_a: 0.0, g_b: 0.0, g_ab: 0.0, ..RqrParams::reference(8.0) };
        let h = build_hamiltonian(&p, &space).unwrap();
        for i in 0..space.dim() {
            for j in 0..space.dim() {
                if i != j {
                    assert_eq!(h.matrix()[(i, j)].norm(), 0.0);
                }
            }
        }
        let ket = Ket::basis(&space, &[1, 0, 1]).unwrap();
        assert_abs_diff_eq!(ket.expectation(&h).re / TAU, 14.0, epsilon = 1e-12);
    }

    #[test]
    fn qutrit_second_level() {
        let space = HilbertSpace::rqr(1, 3).unwrap();
        let p = RqrParams { g_a: 0.0, g_b: 0.0, g_ab: 0.0, ..RqrParams::reference(8.0) };
        let h = build_hamiltonian(&p, &space).unwrap();
        let idx = space.index_of(&[0, 2, 0]).unwrap();
        assert_abs_diff_eq!(h.matrix()[(idx, idx)].re / TAU, 15.7, epsilon = 1e-12);
    }

    #[test]
    fn conserves_excitations() {
        let space = HilbertSpace::rqr(5, 3).unwrap();
        let h = build_hamiltonian(&RqrParams::reference(7.99), &space).unwrap();
        assert!(h.is_hermitian(0.0));
        assert!(h.commutator(&total_number(&space)).max_abs() < 1e-12);
    }

    #[test]
    fn rejects_mismatched_space() {
        let space = HilbertSpace::rqr(2, 2).unwrap();
        assert!(matches!(
            build_hamiltonian(&RqrParams::reference(8.0), &space),
            Err(Error::SpaceMismatch(_))
        ));
        let wrong = crate::fock::make_space(vec![
            crate::fock::ModeSpec::bosonic(2),
            crate::fock::ModeSpec::bosonic(2),
            crate::fock::ModeSpec::coupler(3),
        ])
        .unwrap();
        assert!(build_hamiltonian(&RqrParams::reference(8.0), &wrong).is_err());
    }
}
