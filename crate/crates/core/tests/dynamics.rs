use nalgebra::{DMatrix, DVector};
use rqrsim::dynamics::{
    lindblad_propagate, propagate_pure, schrodinger_propagate, ControlledHamiltonian, FrequencyRamp, LindbladSpec,
    Observable, PulseSchedule, Reversed,
};
use rqrsim::fock::{DensityMatrix, HilbertSpace, Ket, C64};
use rqrsim::integrate::OdeOptions;
use rqrsim::rqr::spectrum::{qubit_references, SpectrumSolver};
use rqrsim::rqr::RqrParams;

const IDLE: f64 = 7.993434690468169;

fn space() -> HilbertSpace {
    HilbertSpace::rqr(2, 3).unwrap()
}

// occupations are given as (n_a, n_b, n_q)
fn bare(space: &HilbertSpace, a: usize, b: usize, q: usize) -> DVector<C64> {
    Ket::basis(space, &[a, q, b]).unwrap().data().clone()
}

fn hold(params: &RqrParams, duration: f64) -> FrequencyRamp {
    FrequencyRamp { from: *params, to: *params, ramp_time: duration }
}

fn uncoupled() -> RqrParams {
    RqrParams::symmetric(7.0, 7.05, 0.3, 0.0, 0.0, 3)
}

#[test]
fn dressed_state_is_stationary_at_idle() {
    let params = RqrParams::reference(IDLE);
    let s = space();
    let spectrum = SpectrumSolver::new(&s).unwrap().diagonalize(&params, &qubit_references(&s).unwrap()).unwrap();
    let psi = spectrum.ket("v7").unwrap();
    let obs = [Observable::new("v7", psi.data().clone())];
    let grid: Vec<f64> = (1..=15).map(|k| 5.0 * k as f64).collect();
    let schedule = PulseSchedule::reference().idle();
    let traj = schrodinger_propagate(&params, &s, &schedule, &psi, &grid, &obs, &OdeOptions::with_rtol(1e-12)).unwrap();
    for p in &traj.probabilities {
        assert!((p[0] - 1.0).abs() < 1e-9, "{}", p[0]);
    }
}

#[test]
fn photon_decay_is_exponential() {
    let params = uncoupled();
    let s = space();
    let spec = LindbladSpec { t_r: 1000.0, t_q: f64::INFINITY, t_phi: f64::INFINITY };
    let psi = Ket::basis(&s, &[1, 0, 0]).unwrap();
    let rho = DensityMatrix::from_ket(&psi);
    let grid: Vec<f64> = (1..=8).map(|k| 250.0 * k as f64).collect();
    let obs = [Observable::new("a1", bare(&s, 1, 0, 0))];
    let traj = lindblad_propagate(&params, &s, &hold(&params, 2000.0), &spec, &rho, &grid, &obs, &OdeOptions::default())
        .unwrap();
    for (t, p) in traj.times.iter().zip(&traj.probabilities) {
        let expect = (-t / 1000.0).exp();
        assert!((p[0] - expect).abs() < 1e-8, "t = {t}: {} vs {expect}", p[0]);
    }
    assert!(traj.max_norm_error() < 1e-8);
}

#[test]
fn coupler_coherence_decay_rate() {
    let params = uncoupled();
    let s = space();
    let (t_q, t_phi) = (2000.0, 3000.0);
    let spec = LindbladSpec { t_r: f64::INFINITY, t_q, t_phi };
    let psi = Ket::new(&s, bare(&s, 0, 0, 0) + bare(&s, 0, 0, 1)).unwrap();
    let t = 1500.0;
    let traj = lindblad_propagate(
        &params,
        &s,
        &hold(&params, t),
        &spec,
        &DensityMatrix::from_ket(&psi),
        &[t],
        &[],
        &OdeOptions::with_rtol(1e-12),
    )
    .unwrap();
    let rho = traj.final_density().unwrap();
    let (i0, i1) = (s.index_of(&[0, 0, 0]).unwrap(), s.index_of(&[0, 1, 0]).unwrap());
    let expect = 0.5 * (-t * (0.5 / t_q + 1.0 / t_phi)).exp();
    assert!((rho.data()[(i0, i1)].norm() - expect).abs() < 1e-9, "{} vs {expect}", rho.data()[(i0, i1)].norm());
    assert!(((rho.data()[(i1, i1)].re) - 0.5 * (-t / t_q).exp()).abs() < 1e-9);
}

#[test]
fn closed_master_equation_matches_schrodinger() {
    let params = RqrParams::reference(IDLE);
    let s = space();
    let psi = Ket::new(&s, bare(&s, 1, 0, 0) + bare(&s, 1, 1, 0) * C64::new(0.0, 1.0)).unwrap();
    let schedule = PulseSchedule::reference();
    let t = schedule.gate_time();
    let opts = OdeOptions::default();
    let pure = schrodinger_propagate(&params, &s, &schedule, &psi, &[t], &[], &opts).unwrap();
    let mixed = lindblad_propagate(
        &params,
        &s,
        &schedule,
        &LindbladSpec::closed(),
        &DensityMatrix::from_ket(&psi),
        &[t],
        &[],
        &opts,
    )
    .unwrap();
    let out = pure.final_ket().unwrap().data();
    let diff: DMatrix<C64> = out * out.adjoint() - mixed.final_density().unwrap().data();
    assert!(diff.iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-8);
}

#[test]
fn reversed_controls_undo_conjugated_evolution() {
    let params = RqrParams::reference(IDLE);
    let s = space();
    let v = bare(&s, 1, 0, 0) * C64::new(0.6, 0.1) + bare(&s, 0, 1, 0) * C64::new(-0.2, 0.5) + bare(&s, 0, 0, 1);
    let psi0 = Ket::new(&s, v).unwrap();
    let schedule = PulseSchedule::reference();
    let t = schedule.gate_time();
    let opts = OdeOptions::with_rtol(1e-12);
    let fwd = schrodinger_propagate(&params, &s, &schedule, &psi0, &[t], &[], &opts).unwrap();
    let back_in = Ket::from_raw(&s, fwd.final_ket().unwrap().data().map(|z| z.conj())).unwrap();
    let back = schrodinger_propagate(&params, &s, &Reversed(&schedule), &back_in, &[t], &[], &opts).unwrap();
    let err = (back.final_ket().unwrap().data().map(|z| z.conj()) - psi0.data()).norm();
    assert!(err < 1e-8, "{err}");
}

#[test]
fn excitation_blocks_stay_decoupled() {
    let params = RqrParams::reference(IDLE);
    let s = space();
    let model = ControlledHamiltonian::up_to(&params, &s, 4).unwrap();
    let psi = Ket::basis(&s, &[1, 0, 0]).unwrap();
    let schedule = PulseSchedule::reference();
    let traj = propagate_pure(&model, &schedule, &psi, &[schedule.gate_time()], &[], &OdeOptions::default()).unwrap();
    let out = traj.final_ket().unwrap();
    let outside: f64 = (0..s.dim()).filter(|&i| s.excitation(i) != 1).map(|i| out.data()[i].norm_sqr()).sum();
    assert!(outside < 1e-14);
}

#[test]
fn halving_tolerance_changes_little() {
    let params = RqrParams::reference(IDLE);
    let s = space();
    let psi = Ket::basis(&s, &[1, 0, 1]).unwrap();
    let schedule = PulseSchedule::reference();
    let t = schedule.gate_time();
    let opts = OdeOptions::default();
    let a = schrodinger_propagate(&params, &s, &schedule, &psi, &[t], &[], &opts).unwrap();
    let b = schrodinger_propagate(&params, &s, &schedule, &psi, &[t], &[], &opts.halved()).unwrap();
    let diff = (a.final_ket().unwrap().data() - b.final_ket().unwrap().data()).norm();
    assert!(diff < 1e-8, "{diff}");
}

#[test]
fn initial_state_outside_model_is_rejected() {
    let params = RqrParams::reference(IDLE);
    let s = space();
    let model = ControlledHamiltonian::new(&params, &s, &[1]).unwrap();
    let psi = Ket::basis(&s, &[1, 0, 1]).unwrap();
    let schedule = PulseSchedule::reference();
    assert!(propagate_pure(&model, &schedule, &psi, &[1.0], &[], &OdeOptions::default()).is_err());
    let psi = Ket::basis(&s, &[1, 0, 0]).unwrap();
    assert!(propagate_pure(&model, &schedule, &psi, &[100.0], &[], &OdeOptions::default()).is_err());
}
