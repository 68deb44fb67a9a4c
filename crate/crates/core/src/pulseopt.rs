//! Derivative-free search over the eight pulse-shape parameters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{PulseSchedule, FREE_PARAMETERS};
use crate::error::{Error, Result};
use crate::gates::cz::CzSetup;
use crate::integrate::OdeOptions;
use crate::optim::{nelder_mead, NelderMeadOptions};

/// Largest allowed frequency excursion (GHz) for either pulse amplitude.
pub const MAX_DETUNING: f64 = 3.0;

/// Bounds on `[d_omega1, a1, a2, a3, b1, b2, b3, d_omega2]`.
pub fn parameter_bounds() -> Vec<(f64, f64)> {
    let mut b = vec![(-MAX_DETUNING, MAX_DETUNING)];
    b.extend(std::iter::repeat_n((-1.0, 1.0), 6));
    b.push((-MAX_DETUNING, MAX_DETUNING));
    b
}

#[derive(Debug, Clone)]
pub struct OptimizationProblem {
    pub setup: CzSetup,
    /// Seed schedule; its times stay fixed.
    pub seed: PulseSchedule,
    /// Evaluations per restart.
    pub max_evals: usize,
    pub restarts: usize,
    pub rng_seed: u64,
    /// Relative size of the random offsets of restarts after the first.
    pub perturbation: f64,
    pub threshold: f64,
    pub ode: OdeOptions,
}

impl OptimizationProblem {
    pub fn new(setup: CzSetup, seed: PulseSchedule) -> Self {
        Self {
            setup,
            seed,
            max_evals: 600,
            restarts: 8,
            rng_seed: 7,
            perturbation: 0.05,
            threshold: 0.9999,
            ode: OdeOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub restart: usize,
    pub iteration: usize,
    pub infidelity: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimizationResult {
    pub schedule: PulseSchedule,
    #[serde(rename = "F")]
    pub fidelity: f64,
    pub seed_fidelity: f64,
    pub evaluations: usize,
    /// Best fidelity reached by each restart.
    pub restart_fidelities: Vec<f64>,
    pub best_restart: usize,
    /// Set when the best fidelity is below the problem threshold.
    pub below_threshold: bool,
    pub rng_seed: u64,
    #[serde(skip)]
    pub trace: Vec<TracePoint>,
}

/// `1 - F` of the closed-system gate, or `+inf` when the propagation fails.
pub fn infidelity(setup: &CzSetup, schedule: &PulseSchedule, ode: &OdeOptions) -> f64 {
    match setup.closed(schedule, ode) {
        Ok(o) => 1.0 - o.fidelity,
        Err(e) => {
            log::debug!("objective evaluation failed: {e}");
            f64::INFINITY
        }
    }
}

fn in_bounds(x: &[f64]) -> bool {
    x.iter().zip(parameter_bounds()).all(|(v, (lo, hi))| *v >= lo && *v <= hi)
}

/// Nelder-Mead from the seed plus `restarts - 1` randomly perturbed starts.
/// The result is deterministic for a given problem and never worse than the
/// seed itself.
pub fn optimize_cz(problem: &OptimizationProblem) -> Result<OptimizationResult> {
    problem.seed.validate()?;
    let x_seed = problem.seed.free_parameters();
    if !in_bounds(&x_seed) || x_seed[0].abs() >= MAX_DETUNING || x_seed[7].abs() >= MAX_DETUNING {
        return Err(Error::InvalidParameter(format!("seed parameters {x_seed:?} are outside the search box")));
    }
    if problem.restarts == 0 {
        return Err(Error::InvalidParameter("at least one restart is needed".into()));
    }
    let seed_infidelity = infidelity(&problem.setup, &problem.seed, &problem.ode);

    let mut rng = ChaCha8Rng::seed_from_u64(problem.rng_seed);
    let starts: Vec<Vec<f64>> = (0..problem.restarts)
        .map(|r| {
            let noise: Vec<f64> = (0..FREE_PARAMETERS).map(|_| rng.gen_range(-1.0..1.0)).collect();
            if r == 0 {
                x_seed.to_vec()
            } else {
                x_seed.iter().zip(noise).map(|(v, n)| v * (1.0 + problem.perturbation * n)).collect()
            }
        })
        .collect();

    let bounds = parameter_bounds();
    let runs: Vec<_> = starts
        .par_iter()
        .map(|x0| {
            let step: Vec<f64> = x0.iter().map(|v| (0.05 * v.abs()).max(0.005)).collect();
            let mut opts = NelderMeadOptions::new(step, problem.max_evals);
            opts.bounds = Some(bounds.clone());
            opts.ftol = 1e-12;
            opts.xtol = 1e-9;
            nelder_mead(
                |x| {
                    let arr: [f64; FREE_PARAMETERS] = x.try_into().expect("eight parameters");
                    infidelity(&problem.setup, &problem.seed.with_free_parameters(&arr), &problem.ode)
                },
                x0,
                &opts,
            )
        })
        .collect();

    let mut trace = Vec::new();
    for (r, m) in runs.iter().enumerate() {
        trace.extend(m.trace.iter().enumerate().map(|(i, v)| TracePoint { restart: r, iteration: i, infidelity: *v }));
    }
    let evaluations = runs.iter().map(|m| m.evaluations).sum::<usize>() + 1;
    let restart_fidelities: Vec<f64> = runs.iter().map(|m| 1.0 - m.value).collect();
    let (best_restart, best) = runs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.value.total_cmp(&b.1.value))
        .expect("at least one restart");
    let (schedule, value) = if best.value < seed_infidelity {
        let arr: [f64; FREE_PARAMETERS] = best.x.as_slice().try_into().expect("eight parameters");
        (problem.seed.with_free_parameters(&arr), best.value)
    } else {
        (problem.seed, seed_infidelity)
    };
    let fidelity = 1.0 - value;
    if fidelity < problem.threshold {
        log::warn!("optimized fidelity {fidelity:.6} is below the threshold {}", problem.threshold);
    }
    Ok(OptimizationResult {
        schedule,
        fidelity,
        seed_fidelity: 1.0 - seed_infidelity,
        evaluations,
        restart_fidelities,
        best_restart,
        below_threshold: fidelity < problem.threshold,
        rng_seed: problem.rng_seed,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rqr::RqrParams;

    #[test]
    fn bounds_cover_reference() {
        let x = PulseSchedule::reference().free_parameters();
        assert!(in_bounds(&x));
        let mut far = x;
        far[0] = -3.5;
        assert!(!in_bounds(&far));
    }

    #[test]
    fn rejects_out_of_box_seed() {
        let setup = CzSetup::new(&RqrParams::reference(7.99343), 2).unwrap();
        let mut seed = PulseSchedule::reference();
        seed.coupler.d_omega1 = -3.2;
        let p = OptimizationProblem::new(setup, seed);
        assert!(matches!(optimize_cz(&p), Err(Error::InvalidParameter(_))));
    }
}
