use rqrsim::dynamics::{LindbladSpec, PulseSchedule};
use rqrsim::gates::cz::{idle_point, CzSetup};
use rqrsim::gates::{cz, process_fidelity, UnitaryGate};
use rqrsim::integrate::OdeOptions;
use rqrsim::pulseopt::{infidelity, optimize_cz, OptimizationProblem};
use rqrsim::rqr::couplings::linear_grid;
use rqrsim::rqr::{scan_couplings, RqrParams};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn setup() -> CzSetup {
    let base = RqrParams::reference(8.0);
    let idle = idle_point(&base, &linear_grid(7.0, 9.0, 201)).unwrap();
    CzSetup::new(&base.with_nu_q(idle), 2).unwrap()
}

#[test]
fn idle_point_location() {
    let idle = setup().params.nu_q;
    assert!((idle - 7.9934).abs() < 1e-3, "{idle}");
}

#[test]
fn zero_amplitude_pulses_give_local_phases_only() {
    let s = setup();
    let out = s.closed(&PulseSchedule::reference().idle(), &OdeOptions::default()).unwrap();
    assert!(out.leakage.abs() < 1e-10);
    // the only off-diagonal element left is the residual |01> <-> |10> swap
    let scan = scan_couplings(&RqrParams::reference(8.0), &linear_grid(7.0, 9.0, 201)).unwrap();
    let g1 = scan.idle.unwrap().g1;
    let u = out.gate.unwrap();
    let swap = (std::f64::consts::TAU * g1 * 75.0).sin().abs();
    assert!((u.matrix[(1, 2)].norm() - swap).abs() < 1e-6, "{} vs {swap}", u.matrix[(1, 2)].norm());
    for r in 0..4 {
        for c in 0..4 {
            if r != c && (r, c) != (1, 2) && (r, c) != (2, 1) {
                assert!(u.matrix[(r, c)].norm() < 1e-10);
            }
        }
    }
    // a conditional phase phi matches CZ up to local phases with
    // F = (1 + |sin(phi/2)|)/2; here phi = 2 pi gz T is the idle residue
    let gz = scan.idle.unwrap().gz;
    let expect = 0.5 * (1.0 + (std::f64::consts::PI * gz * 75.0).sin().abs());
    assert!((out.fidelity - expect).abs() < 1e-3, "{} vs {expect}", out.fidelity);
    let id = UnitaryGate::new(nalgebra::DMatrix::identity(4, 4)).unwrap();
    assert!((process_fidelity(&id, &cz(), 2).unwrap() - 0.25).abs() < 1e-15);
}

#[test]
fn objective_is_pure() {
    let s = setup();
    let p = PulseSchedule::reference();
    let a = infidelity(&s, &p, &OdeOptions::default());
    let b = infidelity(&s, &p, &OdeOptions::default());
    assert!((a - b).abs() < 1e-12);
    assert_eq!(p.gate_time(), 75.0);
}

#[test]
fn choi_route_matches_unitary_route_without_dissipation() {
    let s = setup();
    let p = PulseSchedule::reference();
    let u = s.closed(&p, &OdeOptions::default()).unwrap();
    let c = s.open(&p, &LindbladSpec::closed(), &OdeOptions::default()).unwrap();
    assert!((u.fidelity - c.fidelity).abs() < 1e-6);
    assert!((u.leakage - c.leakage).abs() < 1e-8);
    assert!(c.choi_min_eigenvalue.unwrap() > -1e-8);
}

#[test]
fn optimization_from_published_seed() {
    let s = setup();
    let mut problem = OptimizationProblem::new(s.clone(), PulseSchedule::reference());
    problem.restarts = 1;
    let r = optimize_cz(&problem).unwrap();
    assert!(r.fidelity >= r.seed_fidelity);
    assert!(r.fidelity >= 0.9999, "{}", r.fidelity);
    assert!(!r.below_threshold);
    assert_eq!(r.schedule.gate_time(), 75.0);
    let check = s.closed(&r.schedule, &OdeOptions::default()).unwrap();
    assert!(check.leakage < 1e-3 && check.coupler_population < 1e-3);

    let open = s.open(&r.schedule, &LindbladSpec::reference(), &OdeOptions::default()).unwrap();
    assert!((0.996..=0.9995).contains(&open.fidelity), "{}", open.fidelity);
    assert!((1e-4..=1e-3).contains(&open.leakage), "{}", open.leakage);
    assert!(open.choi_min_eigenvalue.unwrap() >= -1e-8);
    assert!(open.process.unwrap().trace() <= 4.0 + 1e-9);
}

#[test]
fn optimization_recovers_from_perturbed_seed() {
    let s = setup();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x: Vec<f64> =
        PulseSchedule::reference().free_parameters().iter().map(|v| v * (1.0 + 0.05 * rng.gen_range(-1.0..1.0))).collect();
    let seed = PulseSchedule::reference().with_free_parameters(&x.try_into().unwrap());
    let mut problem = OptimizationProblem::new(s, seed);
    problem.restarts = 1;
    problem.max_evals = 2000;
    let r = optimize_cz(&problem).unwrap();
    assert!(r.evaluations <= 2001);
    assert!(r.fidelity >= 0.9999, "{} from {}", r.fidelity, r.seed_fidelity);
}

#[test]
fn uncoupled_circuit_cannot_entangle() {
    let params = RqrParams::symmetric(7.0, 7.9934, 0.3, 0.0, 0.0, 3);
    let s = CzSetup::new(&params, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..4 {
        let x: Vec<f64> = PulseSchedule::reference()
            .free_parameters()
            .iter()
            .map(|v| v + 0.2 * rng.gen_range(-1.0..1.0))
            .collect();
        let sched = PulseSchedule::reference().with_free_parameters(&x.try_into().unwrap());
        let out = s.closed(&sched, &OdeOptions::default()).unwrap();
        assert!(out.fidelity <= 0.5 + 1e-9, "{}", out.fidelity);
    }
}
