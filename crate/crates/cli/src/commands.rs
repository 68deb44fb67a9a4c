//! The five experiments. Each returns its report after writing its files.

use nalgebra::DMatrix;
use rqrsim::dynamics::{LindbladSpec, PulseSchedule, CONSERVATION_TOL};
use rqrsim::fock::C64;
use rqrsim::gates::cz::{idle_point, CzOutcome, CzSetup};
use rqrsim::gates::qubit_labels;
use rqrsim::integrate::OdeOptions;
use rqrsim::kerr::{
    binomial_operating_points, encoded_gate_demo, optimize_weights, qudit_gate_error_scan, refine_weights,
    DiagonalInteraction, Encoding, ErrorRow, InteractionSource, OperatingPoint, PhaseTable, SynthesisPlan,
};
use rqrsim::oracles::{chi_oracle, hint_oracle, ladder_oracle, ChiCheck, HintCheck, LadderCheck};
use rqrsim::pulseopt::{optimize_cz, OptimizationProblem, OptimizationResult};
use rqrsim::rqr::{scan_couplings, CouplingScan};
use serde::Serialize;

use crate::config::{RunConfig, Source};
use crate::output::{num, opt, Writer};
use crate::CliError;

/// Tolerance shared by the conservation, positivity and convergence checks.
pub const HYGIENE_TOL: f64 = CONSERVATION_TOL;

#[derive(Debug, Clone, Serialize)]
pub struct ScanSummary {
    pub idle_omega01: Option<f64>,
    pub idle_g1: Option<f64>,
    pub idle_g2: Option<f64>,
    pub idle_gz: Option<f64>,
    pub on_off_ratio: Option<f64>,
    pub max_coupling: f64,
    pub points: usize,
    pub failures: usize,
}

pub fn scan(cfg: &RunConfig, w: &mut Writer) -> Result<(CouplingScan, ScanSummary), CliError> {
    let scan = scan_couplings(&cfg.model, &cfg.scan.grid.values())?;
    let rows: Vec<Vec<String>> = scan
        .rows
        .iter()
        .map(|r| {
            let s = r.summary;
            vec![
                num(r.omega01),
                opt(s.map(|s| s.g1)),
                opt(s.map(|s| s.g2)),
                opt(s.map(|s| s.gz)),
                r.flag.clone().unwrap_or_default(),
            ]
        })
        .collect();
    w.csv("couplings.csv", &["omega01_GHz", "g1_GHz", "g2_GHz", "gz_GHz", "flag"], &rows)?;
    let summary = ScanSummary {
        idle_omega01: scan.idle.map(|s| s.omega01),
        idle_g1: scan.idle.map(|s| s.g1),
        idle_g2: scan.idle.map(|s| s.g2),
        idle_gz: scan.idle.map(|s| s.gz),
        on_off_ratio: scan.on_off_ratio,
        max_coupling: scan.max_coupling,
        points: scan.rows.len(),
        failures: scan.failures(),
    };
    w.json("couplings_summary.json", &summary)?;
    if summary.failures > 0 || summary.idle_omega01.is_none() {
        return Err(CliError::Numerical(format!(
            "{} of {} scan points could not be labeled",
            summary.failures, summary.points
        )));
    }
    Ok((scan, summary))
}

/// Conservation, positivity and tolerance-halving checks of one run.
#[derive(Debug, Clone, Serialize)]
pub struct Hygiene {
    pub max_norm_error: f64,
    pub choi_min_eigenvalue: Option<f64>,
    /// Largest change of the gate (closed) or Choi matrix (open) entries
    /// when both integrator tolerances are halved.
    pub halving_difference: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CzReport {
    pub idle_nu_q: f64,
    #[serde(rename = "F")]
    pub fidelity: f64,
    pub leakage: f64,
    pub gate_time_ns: f64,
    pub schedule: PulseSchedule,
    pub closed: CzOutcome,
    pub open: Option<CzOutcome>,
    pub optimization: Option<OptimizationResult>,
    pub hygiene: Hygiene,
}

fn max_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn cz_gate(cfg: &RunConfig, w: &mut Writer, lindblad: bool, optimize: bool) -> Result<CzReport, CliError> {
    let c = &cfg.cz;
    let idle = match c.idle_nu_q {
        Some(q) => q,
        None => idle_point(&cfg.model, &c.idle_grid.values())?,
    };
    let setup = CzSetup::new(&cfg.model.with_nu_q(idle), c.resonator_cutoff)?;
    let ode = OdeOptions::with_rtol(c.rtol);

    let mut schedule = c.schedule;
    let mut optimization = None;
    if optimize {
        let mut problem = OptimizationProblem::new(setup.clone(), schedule);
        problem.restarts = c.optimize.restarts;
        problem.max_evals = c.optimize.max_evals;
        problem.perturbation = c.optimize.perturbation;
        problem.threshold = c.optimize.threshold;
        problem.rng_seed = cfg.seed;
        problem.ode = ode;
        let result = optimize_cz(&problem)?;
        schedule = result.schedule;
        let rows: Vec<Vec<String>> = result
            .trace
            .iter()
            .map(|p| vec![p.restart.to_string(), p.iteration.to_string(), num(p.infidelity)])
            .collect();
        w.csv("cz_convergence.csv", &["restart", "iteration", "infidelity"], &rows)?;
        w.json("cz_schedule.json", &schedule)?;
        optimization = Some(result);
    }

    let closed = setup.closed(&schedule, &ode)?;
    let t = schedule.gate_time();
    let n = c.trajectory_points;
    let grid: Vec<f64> = (0..n).map(|i| t * i as f64 / (n - 1) as f64).collect();
    let trajectories = setup.trajectories(&schedule, &grid, &ode)?;
    let mut max_norm_error = 0.0_f64;
    for (label, traj) in qubit_labels().iter().zip(&trajectories) {
        max_norm_error = max_norm_error.max(traj.max_norm_error());
        let mut header = vec!["time_ns".to_string()];
        header.extend(traj.names.iter().cloned());
        header.push("norm".into());
        let rows: Vec<Vec<String>> = traj
            .times
            .iter()
            .zip(&traj.probabilities)
            .zip(&traj.norms)
            .map(|((t, p), n)| std::iter::once(num(*t)).chain(p.iter().map(|x| num(*x))).chain([num(*n)]).collect())
            .collect();
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        w.csv(&format!("trajectory_{label}.csv"), &header, &rows)?;
    }
    let halved = setup.closed(&schedule, &ode.halved())?;
    let mut halving_difference = match (&closed.gate, &halved.gate) {
        (Some(a), Some(b)) => max_diff(&a.matrix, &b.matrix),
        _ => f64::INFINITY,
    };

    let mut open = None;
    let mut choi_min_eigenvalue = None;
    if lindblad {
        let spec: LindbladSpec = c.lindblad;
        let o = setup.open(&schedule, &spec, &ode)?;
        let h = setup.open(&schedule, &spec, &ode.halved())?;
        if let (Some(a), Some(b)) = (&o.process, &h.process) {
            halving_difference = halving_difference.max(max_diff(&a.choi, &b.choi));
        }
        choi_min_eigenvalue = o.choi_min_eigenvalue;
        open = Some(o);
    }
    let passed = max_norm_error <= HYGIENE_TOL
        && halving_difference <= HYGIENE_TOL
        && choi_min_eigenvalue.is_none_or(|m| m >= -HYGIENE_TOL);
    let hygiene = Hygiene { max_norm_error, choi_min_eigenvalue, halving_difference, passed };
    let headline = open.as_ref().unwrap_or(&closed);
    let report = CzReport {
        idle_nu_q: idle,
        fidelity: headline.fidelity,
        leakage: headline.leakage,
        gate_time_ns: t,
        schedule,
        closed: closed.clone(),
        open: open.clone(),
        optimization,
        hygiene,
    };
    w.json("cz_report.json", &report)?;
    if !report.hygiene.passed {
        return Err(CliError::Numerical(format!("hygiene checks failed: {:?}", report.hygiene)));
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct KerrPlanReport {
    pub n: usize,
    pub fitted: SynthesisPlan,
    pub fit_residual: f64,
    /// Weights after maximizing the fidelity of the `2 pi/(N+1)` gate.
    pub refined_weights: Vec<f64>,
    pub refined_error: f64,
    pub refined_total_time: f64,
    pub time_unit: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct KerrReport {
    pub plan: KerrPlanReport,
    pub scan: Vec<ErrorRow>,
    /// Largest exact dimension for each requested iteration count.
    pub largest_exact: Vec<(usize, usize)>,
    pub binomial: Option<Vec<OperatingPoint>>,
}

pub fn kerr_synth(cfg: &RunConfig, w: &mut Writer) -> Result<KerrReport, CliError> {
    let k = &cfg.kerr;
    let fit = optimize_weights(k.plan_n, k.plan_iterations)?;
    let fitted = SynthesisPlan { weights: fit.weights.clone(), shift: fit.shift, ..SynthesisPlan::new(k.plan_n, k.plan_iterations)? };
    let h = match k.source {
        Source::Ideal => DiagonalInteraction::ideal(k.plan_n, 1.0),
        Source::Numeric => k.levels.interaction(k.plan_n)?,
    };
    let d = k.plan_n + 1;
    let (refined, gate) = refine_weights(&h, &fitted, std::f64::consts::TAU / d as f64, d)?;
    let plan = KerrPlanReport {
        n: k.plan_n,
        fitted,
        fit_residual: fit.residual,
        refined_weights: refined.weights,
        refined_error: gate.error,
        refined_total_time: gate.total_time,
        time_unit: h.time_unit.clone(),
    };

    let source = match k.source {
        Source::Ideal => InteractionSource::Ideal,
        Source::Numeric => InteractionSource::Numeric(k.levels),
    };
    let scan = qudit_gate_error_scan(&k.dims, &k.n_iters, source)?;
    let rows: Vec<Vec<String>> = scan
        .iter()
        .map(|r| {
            vec![
                r.d.to_string(),
                r.n_iter.to_string(),
                r.n_iter_used.to_string(),
                num(r.error),
                num(r.total_time),
                r.exact.to_string(),
            ]
        })
        .collect();
    w.csv(
        "kerr_error_scan.csv",
        &["d", "N_iter", "N_iter_used", "error", "total_time_units", "exact"],
        &rows,
    )?;
    let mut iters = k.n_iters.clone();
    iters.sort_unstable();
    iters.dedup();
    let largest_exact = iters
        .iter()
        .map(|&n| (n, scan.iter().filter(|r| r.n_iter == n && r.exact).map(|r| r.d).max().unwrap_or(0)))
        .collect();

    let binomial = if k.binomial.enabled {
        let b = &k.binomial;
        let ops = binomial_operating_points(&k.levels, &b.detunings, b.t_max, b.dt, b.threshold)?;
        let rows: Vec<Vec<String>> = ops
            .iter()
            .map(|o| {
                vec![
                    num(o.coupler_detuning),
                    num(o.best_fidelity),
                    num(o.best_time_ns),
                    opt(o.first_fidelity),
                    opt(o.first_time_ns),
                ]
            })
            .collect();
        w.csv(
            "binomial_operating_points.csv",
            &["coupler_detuning_GHz", "best_F", "best_time_ns", "first_F", "first_time_ns"],
            &rows,
        )?;
        Some(ops)
    } else {
        None
    };
    let report = KerrReport { plan, scan, largest_exact, binomial };
    w.json("kerr_plan.json", &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct EncodedCase {
    pub encoding: Encoding,
    pub time_ns: f64,
    pub table: PhaseTable,
}

pub fn encoded_demo(cfg: &RunConfig, w: &mut Writer) -> Result<Vec<EncodedCase>, CliError> {
    let chi = std::f64::consts::TAU * cfg.encoded.chi;
    let pi = std::f64::consts::PI;
    let cases = cfg
        .encoded
        .encodings
        .iter()
        .map(|e| {
            let t = match e {
                Encoding::Binomial { .. } => pi / (4.0 * chi),
                Encoding::Cat { .. } => pi / chi,
            };
            Ok(EncodedCase { encoding: *e, time_ns: t, table: encoded_gate_demo(e, chi, t)? })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    w.json("encoded_phases.json", &cases)?;
    Ok(cases)
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub ladder: Vec<LadderCheck>,
    pub chi: Vec<ChiCheck>,
    pub hint: Vec<HintCheck>,
    pub ladder_ok: bool,
    pub chi_ok: bool,
    pub hint_ok: bool,
}

/// Ladder eigenvalues to 1e-12 GHz; perturbative formulas to 20%.
pub fn oracles(cfg: &RunConfig, w: &mut Writer) -> Result<OracleReport, CliError> {
    let o = &cfg.oracles;
    let ladder = ladder_oracle(o.nu, o.g, &o.ladder_nu_q, o.ladder_max_excitation)?;
    let chi = chi_oracle(o.nu, o.alpha, o.g, &o.chi_detunings)?;
    let hint = hint_oracle(o.nu, o.g, &o.hint_deltas)?;
    let report = OracleReport {
        ladder_ok: ladder.iter().all(|r| r.max_error_ghz < 1e-12),
        chi_ok: chi.iter().all(|r| r.relative_error.abs() < 0.2),
        hint_ok: hint.iter().all(|r| r.relative_error.abs() < 0.2),
        ladder,
        chi,
        hint,
    };
    w.json("oracles.json", &report)?;
    if !(report.ladder_ok && report.chi_ok && report.hint_ok) {
        return Err(CliError::Numerical("oracle tolerances exceeded".into()));
    }
    Ok(report)
}
