//! Controlled-phase gate between the two resonator qubits, evaluated by
//! propagating the dressed computational states of the idle circuit.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use super::{
    choi_process, cz, extract_unitary, qubit_labels, remove_local_phases, tomography_inputs, PhaseFrame, ProbeKind,
    ProcessMatrix, UnitaryGate,
};
use crate::dynamics::{
    propagate_operator, propagate_pure, schrodinger_propagate, ControlledHamiltonian, LindbladSpec,
    Observable, PulseSchedule, Trajectory, CONSERVATION_TOL,
};
use crate::error::{Error, Result};
use crate::fock::{HilbertSpace, Ket, C64};
use crate::integrate::OdeOptions;
use crate::rqr::spectrum::{qubit_references, SpectrumSolver};
use crate::rqr::{scan_couplings, RqrParams};

/// Coupler frequency (GHz) where `|g1| + |g2|` is smallest on `grid`.
pub fn idle_point(base: &RqrParams, grid: &[f64]) -> Result<f64> {
    let scan = scan_couplings(base, grid)?;
    scan.idle
        .map(|s| s.omega01)
        .ok_or_else(|| Error::Labeling("no labeled point on the idle search grid".into()))
}

/// Dressed two-qubit basis of the idle circuit.
///
/// The qubit states are built from the symmetric and antisymmetric
/// eigenstates: |01> = (v1 - v2)/sqrt 2, |10> = (v1 + v2)/sqrt 2 and
/// |11> = (v4 - v6)/sqrt 2.
#[derive(Debug, Clone)]
pub struct CzSetup {
    pub params: RqrParams,
    space: HilbertSpace,
    basis: Vec<Ket>,
    coupler_states: Vec<(String, DVector<C64>)>,
}

/// Result of one gate evaluation.
#[derive(Debug, Clone, Serialize)]
pub struct CzOutcome {
    #[serde(rename = "F")]
    pub fidelity: f64,
    pub leakage: f64,
    /// Largest final population in coupler-excited dressed states over the
    /// computational inputs.
    pub coupler_population: f64,
    pub phase_frame: PhaseFrame,
    pub gate_time_ns: f64,
    /// Smallest Choi eigenvalue; open-system runs only.
    pub choi_min_eigenvalue: Option<f64>,
    #[serde(skip)]
    pub gate: Option<UnitaryGate>,
    #[serde(skip)]
    pub process: Option<ProcessMatrix>,
}

impl CzSetup {
    /// `resonator_cutoff` must be at least 2 to hold |11>.
    pub fn new(idle: &RqrParams, resonator_cutoff: usize) -> Result<Self> {
        if resonator_cutoff < 2 {
            return Err(Error::Truncation("the |11> state needs a resonator cutoff of at least 2".into()));
        }
        idle.validate()?;
        let space = HilbertSpace::rqr(resonator_cutoff, idle.coupler_levels)?;
        let refs = qubit_references(&space)?;
        let spectrum = SpectrumSolver::new(&space)?.diagonalize(idle, &refs)?;
        let v = |n: &str| spectrum.label(n).map(|l| l.vector.clone());
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let real = [v("v0")?, (v("v1")? - v("v2")?) * s, (v("v1")? + v("v2")?) * s, (v("v4")? - v("v6")?) * s];
        let basis = real
            .iter()
            .map(|r| Ket::from_raw(&space, r.map(|x| C64::new(x, 0.0))))
            .collect::<Result<Vec<_>>>()?;
        let mut coupler_states = Vec::new();
        for name in ["v3", "v7", "v8", "v9"] {
            if let Ok(l) = spectrum.label(name) {
                coupler_states.push((name.to_string(), l.vector.map(|x| C64::new(x, 0.0))));
            }
        }
        Ok(Self { params: *idle, space, basis, coupler_states })
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    /// |00>, |01>, |10>, |11>
    pub fn basis(&self) -> &[Ket] {
        &self.basis
    }

    /// Projectors recorded along trajectories: the four qubit states, then
    /// the coupler-excited dressed states.
    pub fn observables(&self) -> Vec<Observable> {
        let mut out: Vec<Observable> = qubit_labels()
            .into_iter()
            .zip(&self.basis)
            .map(|(l, k)| Observable::new(format!("|{l}>"), k.data().clone()))
            .collect();
        out.extend(self.coupler_states.iter().map(|(n, v)| Observable::new(n.clone(), v.clone())));
        out
    }

    fn coupler_population(&self, psi: &DVector<C64>) -> f64 {
        self.coupler_states.iter().map(|(_, v)| v.dotc(psi).norm_sqr()).sum()
    }

    /// Trajectories of the four computational inputs, recorded on `grid`.
    pub fn trajectories(&self, schedule: &PulseSchedule, grid: &[f64], opts: &OdeOptions) -> Result<Vec<Trajectory>> {
        schedule.validate()?;
        let obs = self.observables();
        self.basis
            .par_iter()
            .map(|psi| schrodinger_propagate(&self.params, &self.space, schedule, psi, grid, &obs, opts))
            .collect()
    }

    /// Unitary evaluation against CZ after local-phase removal.
    pub fn closed(&self, schedule: &PulseSchedule, opts: &OdeOptions) -> Result<CzOutcome> {
        schedule.validate()?;
        let t = schedule.gate_time();
        let finals: Vec<Ket> = self
            .basis
            .par_iter()
            .map(|psi| {
                let blocks = [self.space.excitation(dominant_index(psi))];
                let model = ControlledHamiltonian::new(&self.params, &self.space, &blocks)?;
                let traj = propagate_pure(&model, schedule, psi, &[t], &[], opts)?;
                Ok(traj.final_ket().cloned().expect("pure propagation"))
            })
            .collect::<Result<_>>()?;
        let coupler_population = finals.iter().map(|k| self.coupler_population(k.data())).fold(0.0, f64::max);
        let wrapped: Vec<Option<Ket>> = finals.into_iter().map(Some).collect();
        let (u, leakage) = extract_unitary(&wrapped, &self.basis, &qubit_labels())?;
        let (fixed, frame, fidelity) = remove_local_phases(&u, &cz(), 2)?;
        Ok(CzOutcome {
            fidelity,
            leakage,
            coupler_population,
            phase_frame: frame,
            gate_time_ns: t,
            choi_min_eigenvalue: None,
            gate: Some(fixed),
            process: None,
        })
    }

    /// Process tomography under the master equation. Each of the 16 inputs
    /// is propagated independently.
    pub fn open(&self, schedule: &PulseSchedule, spec: &LindbladSpec, opts: &OdeOptions) -> Result<CzOutcome> {
        schedule.validate()?;
        spec.validate()?;
        let t = schedule.gate_time();
        let model = ControlledHamiltonian::up_to(&self.params, &self.space, 2)?;
        let q = DMatrix::from_columns(&self.basis.iter().map(|k| k.data().clone()).collect::<Vec<_>>());
        let inputs = tomography_inputs(4);
        let runs: Vec<(ProbeKind, DMatrix<C64>, f64)> = inputs
            .par_iter()
            .map(|(kind, amp)| {
                let v = &q * amp;
                let rho = &v * v.adjoint();
                let (out, traj) = propagate_operator(&model, schedule, spec, &rho, &[t], &[], opts)?;
                let drift = traj.max_norm_error();
                if drift > CONSERVATION_TOL {
                    return Err(Error::Quality(format!("trace drift {drift:.2e} for input {kind:?}")));
                }
                let coupler: f64 = self.coupler_states.iter().map(|(_, c)| c.dotc(&(&out * c)).re).sum();
                Ok((*kind, q.adjoint() * &out * &q, coupler))
            })
            .collect::<Result<_>>()?;
        let coupler_population = runs
            .iter()
            .filter(|(k, _, _)| matches!(k, ProbeKind::Diagonal(_)))
            .map(|r| r.2)
            .fold(0.0, f64::max);
        let outputs: Vec<(ProbeKind, DMatrix<C64>)> = runs.into_iter().map(|(k, m, _)| (k, m)).collect();
        let process = ProcessMatrix::from_outputs(4, &outputs)?;
        let min = process.min_eigenvalue();
        if min < -CONSERVATION_TOL {
            return Err(Error::Quality(format!("Choi matrix eigenvalue {min:.2e}")));
        }
        let f = choi_process(&process, &cz(), 2)?;
        Ok(CzOutcome {
            fidelity: f.fidelity,
            leakage: f.leakage,
            coupler_population,
            phase_frame: f.frame,
            gate_time_ns: t,
            choi_min_eigenvalue: Some(min),
            gate: None,
            process: Some(process),
        })
    }
}

fn dominant_index(psi: &Ket) -> usize {
    psi.data()
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr()))
        .map(|(i, _)| i)
        .unwrap_or(0)
}
