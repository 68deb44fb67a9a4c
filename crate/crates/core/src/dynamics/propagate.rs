use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::pulses::{Controls, Shifts};
use crate::error::{Error, Result};
use crate::fock::{excitation_blocks, DensityMatrix, HilbertSpace, Ket, C64};
use crate::integrate::{integrate, OdeOptions, OdeStats};
use crate::rqr::hamiltonian::{check_model, HamiltonianTerms, MODE_A, MODE_B, MODE_Q};
use crate::rqr::spectrum::{Reference, SpectrumSolver};
use crate::rqr::RqrParams;

/// Tolerance on norm and trace drift, and on negative eigenvalues.
pub const CONSERVATION_TOL: f64 = 1e-8;

/// Coherence times in ns. `f64::INFINITY` switches a channel off.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LindbladSpec {
    #[serde(rename = "T_r")]
    pub t_r: f64,
    #[serde(rename = "T_q")]
    pub t_q: f64,
    #[serde(rename = "T_phi")]
    pub t_phi: f64,
}

impl LindbladSpec {
    /// 100 us resonators, 40 us coupler relaxation, 30 us coupler dephasing.
    pub fn reference() -> Self {
        Self { t_r: 100_000.0, t_q: 40_000.0, t_phi: 30_000.0 }
    }

    pub fn closed() -> Self {
        Self { t_r: f64::INFINITY, t_q: f64::INFINITY, t_phi: f64::INFINITY }
    }

    pub fn validate(&self) -> Result<()> {
        if [self.t_r, self.t_q, self.t_phi].iter().any(|t| t.is_nan() || *t <= 0.0) {
            return Err(Error::InvalidParameter("coherence times must be positive".into()));
        }
        Ok(())
    }

    /// `(1/T_r, 1/T_q, 2/T_phi)` in 1/ns.
    pub fn rates(&self) -> (f64, f64, f64) {
        (1.0 / self.t_r, 1.0 / self.t_q, 2.0 / self.t_phi)
    }
}

/// A named projector `|v><v|` recorded along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    pub name: String,
    pub vector: DVector<C64>,
}

impl Observable {
    pub fn new(name: impl Into<String>, vector: DVector<C64>) -> Self {
        Self { name: name.into(), vector }
    }

    pub fn from_reference(r: &Reference) -> Self {
        Self::new(r.name.clone(), r.vector.map(|x| C64::new(x, 0.0)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FinalState {
    Pure(Ket),
    Mixed(DensityMatrix),
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub names: Vec<String>,
    /// `probabilities[k][i]` is observable `i` at `times[k]`.
    pub probabilities: Vec<Vec<f64>>,
    /// Norm (pure) or trace (mixed) at each recorded time.
    pub norms: Vec<f64>,
    pub final_state: FinalState,
    pub stats: OdeStats,
}

impl Trajectory {
    pub fn final_ket(&self) -> Option<&Ket> {
        match &self.final_state {
            FinalState::Pure(k) => Some(k),
            FinalState::Mixed(_) => None,
        }
    }

    pub fn final_density(&self) -> Option<&DensityMatrix> {
        match &self.final_state {
            FinalState::Mixed(r) => Some(r),
            FinalState::Pure(_) => None,
        }
    }

    pub fn max_norm_error(&self) -> f64 {
        self.norms.iter().map(|n| (n - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// The circuit Hamiltonian restricted to a set of excitation blocks, split
/// into a static part and the three frequency controls.
#[derive(Debug, Clone)]
pub struct ControlledHamiltonian {
    space: HilbertSpace,
    base: RqrParams,
    frame: f64,
    /// Full-space indices of the retained basis states.
    pub indices: Vec<usize>,
    /// GHz, rotating at `frame` per excitation.
    pub h0: DMatrix<f64>,
    pub n_a: DVector<f64>,
    pub n_b: DVector<f64>,
    pub n_q: DVector<f64>,
}

impl ControlledHamiltonian {
    /// Keep the blocks with excitation number in `blocks`.
    pub fn new(base: &RqrParams, space: &HilbertSpace, blocks: &[usize]) -> Result<Self> {
        check_model(base, space)?;
        let terms = HamiltonianTerms::new(space)?;
        let frame = base.mean_resonator();
        let all = excitation_blocks(space);
        let mut indices: Vec<usize> = blocks.iter().filter_map(|&n| all.get(n)).flatten().cloned().collect();
        indices.sort_unstable();
        let full = terms.assemble_ghz(base, frame);
        let pick = |m: &DMatrix<f64>| DVector::from_iterator(indices.len(), indices.iter().map(|&i| m[(i, i)]));
        Ok(Self {
            h0: DMatrix::from_fn(indices.len(), indices.len(), |r, c| full[(indices[r], indices[c])]),
            n_a: pick(&terms.n_a),
            n_b: pick(&terms.n_b),
            n_q: pick(&terms.n_q),
            indices,
            space: space.clone(),
            base: *base,
            frame,
        })
    }

    /// All blocks up to and including `max_excitation`.
    pub fn up_to(base: &RqrParams, space: &HilbertSpace, max_excitation: usize) -> Result<Self> {
        Self::new(base, space, &(0..=max_excitation).collect::<Vec<_>>())
    }

    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    pub fn frame(&self) -> f64 {
        self.frame
    }

    pub fn base(&self) -> &RqrParams {
        &self.base
    }

    /// Diagonal of the control part for the given shifts, GHz.
    fn control_diag(&self, s: Shifts) -> DVector<f64> {
        &self.n_a * s.nu_a + &self.n_b * s.nu_b + &self.n_q * s.nu_q
    }

    /// `-2 pi i H(t)` applied to `psi`.
    fn apply(&self, diag: &DVector<f64>, psi: &DVector<C64>, out: &mut DVector<C64>) {
        let n = psi.len();
        for r in 0..n {
            let mut acc = C64::new(diag[r], 0.0) * psi[r];
            for c in 0..n {
                let h = self.h0[(r, c)];
                if h != 0.0 {
                    acc += psi[c] * h;
                }
            }
            out[r] = C64::new(acc.im, -acc.re) * TAU;
        }
    }

    pub fn restrict_vector(&self, v: &DVector<C64>) -> DVector<C64> {
        DVector::from_iterator(self.dim(), self.indices.iter().map(|&i| v[i]))
    }

    pub fn embed_vector(&self, v: &DVector<C64>) -> DVector<C64> {
        let mut out = DVector::zeros(self.space.dim());
        for (k, &i) in self.indices.iter().enumerate() {
            out[i] = v[k];
        }
        out
    }

    fn restrict_matrix(&self, m: &DMatrix<C64>) -> DMatrix<C64> {
        DMatrix::from_fn(self.dim(), self.dim(), |r, c| m[(self.indices[r], self.indices[c])])
    }

    fn embed_matrix(&self, m: &DMatrix<C64>) -> DMatrix<C64> {
        let mut out = DMatrix::zeros(self.space.dim(), self.space.dim());
        for (r, &i) in self.indices.iter().enumerate() {
            for (c, &j) in self.indices.iter().enumerate() {
                out[(i, j)] = m[(r, c)];
            }
        }
        out
    }

    fn lowering(&self, mode: usize) -> Result<DMatrix<C64>> {
        let op = crate::fock::mode_op(&self.space, mode, crate::fock::LadderKind::Lower)?;
        Ok(self.restrict_matrix(op.matrix()))
    }
}

fn excitations_of(space: &HilbertSpace, weight: impl Fn(usize) -> f64) -> Vec<usize> {
    let mut blocks: Vec<usize> = (0..space.dim()).filter(|&i| weight(i) > 0.0).map(|i| space.excitation(i)).collect();
    blocks.sort_unstable();
    blocks.dedup();
    blocks
}

fn stop_times(controls: &dyn Controls, grid: &[f64]) -> Result<Vec<f64>> {
    let d = controls.duration();
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty time grid".into()));
    }
    if let Some(&t) = grid.iter().find(|&&t| !(0.0..=d).contains(&t)) {
        return Err(Error::TimeOutOfRange { t, duration: d });
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("time grid must be strictly ascending".into()));
    }
    let mut stops: Vec<f64> = grid.to_vec();
    stops.extend(controls.breakpoints().into_iter().filter(|&t| t > 0.0 && t < d));
    stops.push(d);
    stops.sort_by(f64::total_cmp);
    stops.dedup();
    Ok(stops)
}

fn is_recorded(grid: &[f64], t: f64) -> bool {
    grid.binary_search_by(|g| g.total_cmp(&t)).is_ok()
}

/// Solve `i psi' = 2 pi H(t) psi` on the excitation blocks populated by
/// `psi0`, in the frame rotating at the mean resonator frequency. `grid`
/// lists the times (ascending, within the control window) to record.
pub fn schrodinger_propagate(
    base: &RqrParams,
    space: &HilbertSpace,
    controls: &dyn Controls,
    psi0: &Ket,
    grid: &[f64],
    observables: &[Observable],
    opts: &OdeOptions,
) -> Result<Trajectory> {
    let blocks = excitations_of(space, |i| psi0.data()[i].norm_sqr());
    let model = ControlledHamiltonian::new(base, space, &blocks)?;
    propagate_pure(&model, controls, psi0, grid, observables, opts)
}

/// [`schrodinger_propagate`] with a prebuilt model.
pub fn propagate_pure(
    model: &ControlledHamiltonian,
    controls: &dyn Controls,
    psi0: &Ket,
    grid: &[f64],
    observables: &[Observable],
    opts: &OdeOptions,
) -> Result<Trajectory> {
    if psi0.space() != &model.space {
        return Err(Error::SpaceMismatch("initial state lives in a different space".into()));
    }
    let outside: f64 = (0..model.space.dim())
        .filter(|i| !model.indices.contains(i))
        .map(|i| psi0.data()[i].norm_sqr())
        .sum();
    if outside > 0.0 {
        return Err(Error::InvalidParameter("initial state has weight outside the propagated blocks".into()));
    }
    let stops = stop_times(controls, grid)?;
    let obs: Vec<DVector<C64>> = observables.iter().map(|o| model.restrict_vector(&o.vector)).collect();
    let mut times = Vec::new();
    let mut probabilities = Vec::new();
    let mut norms = Vec::new();
    let y0 = model.restrict_vector(psi0.data());
    let (y, stats) = integrate(
        |t, psi, out| model.apply(&model.control_diag(controls.shifts(t)), psi, out),
        0.0,
        y0,
        &stops,
        opts,
        |t, psi| {
            if is_recorded(grid, t) {
                times.push(t);
                norms.push(psi.norm());
                probabilities.push(obs.iter().map(|v| v.dotc(psi).norm_sqr()).collect());
            }
        },
    )?;
    let traj = Trajectory {
        times,
        names: observables.iter().map(|o| o.name.clone()).collect(),
        probabilities,
        norms,
        final_state: FinalState::Pure(Ket::from_raw(&model.space, model.embed_vector(&y))?),
        stats,
    };
    let drift = traj.max_norm_error();
    if drift > CONSERVATION_TOL {
        return Err(Error::Quality(format!("norm drift {drift:.2e} exceeds {CONSERVATION_TOL:e}")));
    }
    Ok(traj)
}

/// Dissipative part of the master equation on a model's subspace.
struct Dissipator {
    /// `-2 pi i H0 - 1/2 sum_k rate_k L_k^dag L_k`
    k0: DMatrix<C64>,
    jumps: Vec<(f64, DMatrix<C64>)>,
}

impl Dissipator {
    fn new(model: &ControlledHamiltonian, spec: &LindbladSpec) -> Result<Self> {
        let (gr, gq, gphi) = spec.rates();
        let a = model.lowering(MODE_A)?;
        let b = model.lowering(MODE_B)?;
        let s = model.lowering(MODE_Q)?;
        let nq = DMatrix::from_diagonal(&model.n_q.map(|x| C64::new(x, 0.0)));
        let jumps: Vec<(f64, DMatrix<C64>)> =
            [(gr, a), (gr, b), (gq, s), (gphi, nq)].into_iter().filter(|(r, _)| *r > 0.0).collect();
        let mut k0 = model.h0.map(|h| C64::new(0.0, -TAU * h));
        for (rate, l) in &jumps {
            k0 -= (l.adjoint() * l) * C64::new(0.5 * rate, 0.0);
        }
        Ok(Self { k0, jumps })
    }

    fn apply(&self, diag: &DVector<f64>, rho: &DMatrix<C64>, out: &mut DMatrix<C64>) {
        let mut k = self.k0.clone();
        for (i, d) in diag.iter().enumerate() {
            k[(i, i)] += C64::new(0.0, -TAU * d);
        }
        let kr = &k * rho;
        out.copy_from(&kr);
        *out += kr.adjoint();
        for (rate, l) in &self.jumps {
            *out += (l * rho * l.adjoint()) * C64::new(*rate, 0.0);
        }
        // keep every stage Hermitian
        let h = (&*out + out.adjoint()) * C64::new(0.5, 0.0);
        out.copy_from(&h);
    }
}

/// Solve the master equation with relaxation of both resonators and of the
/// coupler plus coupler dephasing. Propagates every block up to the highest
/// excitation present in `rho0`, since decay only moves population down.
#[allow(clippy::too_many_arguments)]
pub fn lindblad_propagate(
    base: &RqrParams,
    space: &HilbertSpace,
    controls: &dyn Controls,
    spec: &LindbladSpec,
    rho0: &DensityMatrix,
    grid: &[f64],
    observables: &[Observable],
    opts: &OdeOptions,
) -> Result<Trajectory> {
    let top = excitations_of(space, |i| rho0.data()[(i, i)].re.abs()).last().cloned().unwrap_or(0);
    let model = ControlledHamiltonian::up_to(base, space, top)?;
    propagate_mixed(&model, controls, spec, rho0, grid, observables, opts)
}

/// [`lindblad_propagate`] with a prebuilt model. `rho0` may be any operator
/// supported on the model's blocks (used for process tomography); the
/// trace and positivity checks apply only when `rho0` is a valid state.
pub fn propagate_mixed(
    model: &ControlledHamiltonian,
    controls: &dyn Controls,
    spec: &LindbladSpec,
    rho0: &DensityMatrix,
    grid: &[f64],
    observables: &[Observable],
    opts: &OdeOptions,
) -> Result<Trajectory> {
    spec.validate()?;
    let out = propagate_operator(model, controls, spec, rho0.data(), grid, observables, opts)?;
    let (final_matrix, traj) = out;
    let state = DensityMatrix::from_raw(&model.space, final_matrix);
    let drift = traj.max_norm_error();
    if drift > CONSERVATION_TOL {
        return Err(Error::Quality(format!("trace drift {drift:.2e} exceeds {CONSERVATION_TOL:e}")));
    }
    let min = state.min_eigenvalue();
    if min < -CONSERVATION_TOL {
        return Err(Error::Quality(format!("density matrix eigenvalue {min:.2e}")));
    }
    Ok(Trajectory { final_state: FinalState::Mixed(state), ..traj })
}

/// Propagate an arbitrary operator (not necessarily a state) under the master
/// equation. Returns the final full-space operator and a trajectory whose
/// `norms` hold the trace.
pub fn propagate_operator(
    model: &ControlledHamiltonian,
    controls: &dyn Controls,
    spec: &LindbladSpec,
    x0: &DMatrix<C64>,
    grid: &[f64],
    observables: &[Observable],
    opts: &OdeOptions,
) -> Result<(DMatrix<C64>, Trajectory)> {
    spec.validate()?;
    let n = model.dim();
    let stops = stop_times(controls, grid)?;
    let diss = Dissipator::new(model, spec)?;
    let obs: Vec<DVector<C64>> = observables.iter().map(|o| model.restrict_vector(&o.vector)).collect();
    let x = model.restrict_matrix(x0);
    let leftover = x0.iter().map(|z| z.norm()).sum::<f64>() - x.iter().map(|z| z.norm()).sum::<f64>();
    if leftover > 1e-14 {
        return Err(Error::InvalidParameter("initial operator has weight outside the propagated blocks".into()));
    }
    let mut times = Vec::new();
    let mut probabilities = Vec::new();
    let mut norms = Vec::new();
    let mut out_m = DMatrix::zeros(n, n);
    let (y, stats) = integrate(
        |t, v, dv| {
            let rho = DMatrix::from_column_slice(n, n, v.as_slice());
            diss.apply(&model.control_diag(controls.shifts(t)), &rho, &mut out_m);
            dv.copy_from_slice(out_m.as_slice());
        },
        0.0,
        DVector::from_column_slice(x.as_slice()),
        &stops,
        opts,
        |t, v| {
            if is_recorded(grid, t) {
                let rho = DMatrix::from_column_slice(n, n, v.as_slice());
                times.push(t);
                norms.push(rho.trace().re);
                probabilities.push(obs.iter().map(|o| o.dotc(&(&rho * o)).re).collect());
            }
        },
    )?;
    let fin = DMatrix::from_column_slice(n, n, y.as_slice());
    let fin = (&fin + fin.adjoint()) * C64::new(0.5, 0.0);
    let traj = Trajectory {
        times,
        names: observables.iter().map(|o| o.name.clone()).collect(),
        probabilities,
        norms,
        final_state: FinalState::Mixed(DensityMatrix::from_raw(&model.space, model.embed_matrix(&fin))),
        stats,
    };
    Ok((model.embed_matrix(&fin), traj))
}

/// Cosine interpolation between two parameter sets that differ only in
/// their mode frequencies.
#[derive(Debug, Clone, Copy)]
pub struct FrequencyRamp {
    pub from: RqrParams,
    pub to: RqrParams,
    pub ramp_time: f64,
}

impl Controls for FrequencyRamp {
    fn duration(&self) -> f64 {
        self.ramp_time
    }

    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }

    fn shifts(&self, t: f64) -> Shifts {
        let s = if self.ramp_time > 0.0 { 0.5 * (1.0 - (PI * t / self.ramp_time).cos()) } else { 1.0 };
        Shifts {
            nu_a: s * (self.to.nu_a - self.from.nu_a),
            nu_b: s * (self.to.nu_b - self.from.nu_b),
            nu_q: s * (self.to.nu_q - self.from.nu_q),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RampResult {
    pub state: Ket,
    /// Squared overlap with the target eigenstate of the final parameters.
    pub overlap: f64,
}

/// Sweep the frequencies from `from` to `to` along a cosine profile and
/// report the overlap with the eigenstate of `to` selected by `target`.
///
/// The returned state is in the frame rotating at `from`'s mean resonator
/// frequency, which leaves overlaps with eigenstates unchanged.
pub fn adiabatic_ramp(
    from: &RqrParams,
    to: &RqrParams,
    ramp_time: f64,
    psi0: &Ket,
    target: &Reference,
    opts: &OdeOptions,
) -> Result<RampResult> {
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // also rejects NaN
    if !(ramp_time >= 0.0) {
        return Err(Error::InvalidParameter("ramp time must be non-negative".into()));
    }
    let same_couplings = from.alpha == to.alpha
        && from.g_a == to.g_a
        && from.g_b == to.g_b
        && from.g_ab == to.g_ab
        && from.coupler_levels == to.coupler_levels;
    if !same_couplings {
        return Err(Error::InvalidParameter("ramp endpoints may differ only in frequencies".into()));
    }
    let space = psi0.space();
    let state = if ramp_time == 0.0 {
        psi0.clone()
    } else {
        let ramp = FrequencyRamp { from: *from, to: *to, ramp_time };
        let traj = schrodinger_propagate(from, space, &ramp, psi0, &[ramp_time], &[], opts)?;
        traj.final_ket().cloned().expect("pure propagation")
    };
    let spectrum = SpectrumSolver::new(space)?.diagonalize(to, std::slice::from_ref(target))?;
    let label = spectrum.label(&target.name)?;
    let v = label.vector.map(|x| C64::new(x, 0.0));
    let overlap = v.dotc(state.data()).norm_sqr();
    Ok(RampResult { state, overlap })
}
