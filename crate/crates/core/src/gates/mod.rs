//! Gate extraction, local-phase removal and process fidelity.

pub mod cz;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{Ket, C64};
use crate::optim::{nelder_mead, NelderMeadOptions};

const ONE: C64 = C64::new(1.0, 0.0);
const ZERO: C64 = C64::new(0.0, 0.0);

/// Gate on a `D`-dimensional computational subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryGate {
    pub matrix: DMatrix<C64>,
    pub labels: Vec<String>,
}

impl UnitaryGate {
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), found: matrix.ncols() });
        }
        let labels = (0..matrix.nrows()).map(|i| i.to_string()).collect();
        Ok(Self { matrix, labels })
    }

    pub fn diagonal(phases: &[f64]) -> Self {
        let d = DVector::from_iterator(phases.len(), phases.iter().map(|p| C64::from_polar(1.0, *p)));
        Self::new(DMatrix::from_diagonal(&d)).expect("square")
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `max |U^dag U - I|` entry.
    pub fn unitarity_error(&self) -> f64 {
        let d = self.dim();
        (self.matrix.adjoint() * &self.matrix - DMatrix::<C64>::identity(d, d))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

/// Two-qubit labels in the order |00>, |01>, |10>, |11>.
pub fn qubit_labels() -> Vec<String> {
    ["00", "01", "10", "11"].iter().map(|s| s.to_string()).collect()
}

/// Swap by `theta` between |01> and |10> with phase `exp(-i phi)` on |11>.
pub fn u_theta_phi(theta: f64, phi: f64) -> UnitaryGate {
    let (c, s) = (C64::new(theta.cos(), 0.0), C64::new(0.0, -theta.sin()));
    let mut m = DMatrix::zeros(4, 4);
    m[(0, 0)] = ONE;
    m[(1, 1)] = c;
    m[(1, 2)] = s;
    m[(2, 1)] = s;
    m[(2, 2)] = c;
    m[(3, 3)] = C64::from_polar(1.0, -phi);
    UnitaryGate { matrix: m, labels: qubit_labels() }
}

pub fn cz() -> UnitaryGate {
    u_theta_phi(0.0, std::f64::consts::PI)
}

/// Phase flip of the first qubit: diag(1, 1, -1, -1).
pub fn z1() -> UnitaryGate {
    UnitaryGate { labels: qubit_labels(), ..UnitaryGate::diagonal(&[0.0, 0.0, std::f64::consts::PI, std::f64::consts::PI]) }
}

/// `|j>|k> -> exp(i theta j k)|j>|k>` on two qudits of dimension `d`.
pub fn qudit_cphase(d: usize, theta: f64) -> UnitaryGate {
    let phases: Vec<f64> = (0..d * d).map(|m| theta * ((m / d) * (m % d)) as f64).collect();
    UnitaryGate::diagonal(&phases)
}

/// `U[m][n] = <basis_m | final_n>`, with leakage `1 - mean column norm^2`.
pub fn extract_unitary(finals: &[Option<Ket>], basis: &[Ket], labels: &[String]) -> Result<(UnitaryGate, f64)> {
    if finals.len() != basis.len() || labels.len() != basis.len() {
        return Err(Error::Incomplete(format!(
            "{} propagated states and {} labels for a {}-state basis",
            finals.len(),
            labels.len(),
            basis.len()
        )));
    }
    let d = basis.len();
    let mut m = DMatrix::zeros(d, d);
    for (n, f) in finals.iter().enumerate() {
        let f = f.as_ref().ok_or_else(|| Error::Incomplete(format!("missing trajectory for {}", labels[n])))?;
        for (r, b) in basis.iter().enumerate() {
            m[(r, n)] = b.inner(f);
        }
    }
    let leakage = 1.0 - m.column_iter().map(|c| c.norm_squared()).sum::<f64>() / d as f64;
    Ok((UnitaryGate { matrix: m, labels: labels.to_vec() }, leakage))
}

/// Product of single-qudit diagonal phases, `phi_a[0] = phi_b[0] = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseFrame {
    pub phi_a: Vec<f64>,
    pub phi_b: Vec<f64>,
}

impl PhaseFrame {
    pub fn identity(d: usize) -> Self {
        Self { phi_a: vec![0.0; d], phi_b: vec![0.0; d] }
    }

    fn from_angles(d: usize, x: &[f64]) -> Self {
        let mut phi_a = vec![0.0];
        phi_a.extend_from_slice(&x[..d - 1]);
        let mut phi_b = vec![0.0];
        phi_b.extend_from_slice(&x[d - 1..]);
        Self { phi_a, phi_b }
    }

    fn gauge_fixed(mut self) -> Self {
        let (a0, b0) = (self.phi_a[0], self.phi_b[0]);
        self.phi_a.iter_mut().for_each(|p| *p = wrap(*p - a0));
        self.phi_b.iter_mut().for_each(|p| *p = wrap(*p - b0));
        self
    }

    pub fn dim(&self) -> usize {
        self.phi_a.len()
    }

    /// Diagonal entries `exp(i (phi_a[j] + phi_b[k]))` in |j k> order.
    pub fn diagonal(&self) -> DVector<C64> {
        let d = self.dim();
        DVector::from_iterator(d * d, (0..d * d).map(|m| C64::from_polar(1.0, self.phi_a[m / d] + self.phi_b[m % d])))
    }

    /// `D U`
    pub fn apply(&self, u: &DMatrix<C64>) -> DMatrix<C64> {
        let diag = self.diagonal();
        DMatrix::from_fn(u.nrows(), u.ncols(), |r, c| diag[r] * u[(r, c)])
    }
}

fn wrap(x: f64) -> f64 {
    let t = std::f64::consts::TAU;
    let y = x.rem_euclid(t);
    if y > std::f64::consts::PI {
        y - t
    } else {
        y
    }
}

fn qudit_dim(total: usize, d: usize) -> Result<()> {
    if d < 2 || d * d != total {
        return Err(Error::DimensionMismatch { expected: d * d, found: total });
    }
    Ok(())
}

/// `|tr(U_ideal^dag U)|^2 / d^4` for two qudits of dimension `d`.
pub fn process_fidelity(u: &UnitaryGate, ideal: &UnitaryGate, d: usize) -> Result<f64> {
    if u.dim() != ideal.dim() {
        return Err(Error::DimensionMismatch { expected: ideal.dim(), found: u.dim() });
    }
    qudit_dim(u.dim(), d)?;
    let tr = (ideal.matrix.adjoint() * &u.matrix).trace();
    Ok(tr.norm_sqr() / (u.dim() * u.dim()) as f64)
}

/// `|sum_jk exp(i(a_j + b_k)) w_jk|`
fn frame_overlap(w: &DMatrix<C64>, a: &[f64], b: &[f64]) -> f64 {
    let mut s = ZERO;
    for j in 0..w.nrows() {
        for k in 0..w.ncols() {
            s += C64::from_polar(1.0, a[j] + b[k]) * w[(j, k)];
        }
    }
    s.norm()
}

/// Coordinate ascent on `|sum exp(i(a_j + b_k)) w_jk|`; each half-step is an
/// exact maximization, so the objective never decreases.
fn alternate(w: &DMatrix<C64>, mut a: Vec<f64>, mut b: Vec<f64>) -> (Vec<f64>, Vec<f64>, f64) {
    let d = w.nrows();
    let mut best = frame_overlap(w, &a, &b);
    for _ in 0..500 {
        for (j, aj) in a.iter_mut().enumerate() {
            let c: C64 = (0..d).map(|k| C64::from_polar(1.0, b[k]) * w[(j, k)]).sum();
            *aj = -c.arg();
        }
        for (k, bk) in b.iter_mut().enumerate() {
            let c: C64 = (0..d).map(|j| C64::from_polar(1.0, a[j]) * w[(j, k)]).sum();
            *bk = -c.arg();
        }
        let v = frame_overlap(w, &a, &b);
        if v - best <= 1e-15 * v.max(1.0) {
            best = best.max(v);
            break;
        }
        best = v;
    }
    (a, b, best)
}

pub const PHASE_RESTARTS: usize = 16;

/// Product frame maximizing `|sum_jk exp(i(a_j + b_k)) w_jk|`, and that
/// maximum. Coordinate ascent from [`PHASE_RESTARTS`] deterministic starts;
/// for a 2x2 `w` one start is the frame that aligns w00, w01 and w10.
pub fn best_product_phases(w: &DMatrix<C64>) -> (PhaseFrame, f64) {
    let d = w.nrows();
    let mut starts: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(PHASE_RESTARTS);
    starts.push((vec![0.0; d], vec![0.0; d]));
    if d == 2 {
        let arg = |j: usize, k: usize| w[(j, k)].arg();
        starts.push((vec![0.0, arg(0, 0) - arg(1, 0)], vec![0.0, arg(0, 0) - arg(0, 1)]));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let t = std::f64::consts::TAU;
    while starts.len() < PHASE_RESTARTS {
        starts.push(((0..d).map(|_| rng.gen::<f64>() * t).collect(), (0..d).map(|_| rng.gen::<f64>() * t).collect()));
    }
    let (a, b, best) = starts
        .into_iter()
        .map(|(a, b)| alternate(w, a, b))
        .max_by(|x, y| x.2.total_cmp(&y.2))
        .expect("at least one start");
    (PhaseFrame { phi_a: a, phi_b: b }.gauge_fixed(), best)
}

/// Coordinate ascent from a single start; cheaper than
/// [`best_product_phases`] when the start is already close.
pub fn product_phases_from(w: &DMatrix<C64>, start: &PhaseFrame) -> (PhaseFrame, f64) {
    let (a, b, best) = alternate(w, start.phi_a.clone(), start.phi_b.clone());
    (PhaseFrame { phi_a: a, phi_b: b }.gauge_fixed(), best)
}

/// Product phase frame `D` maximizing `|tr(U_ideal^dag D U)|`.
///
/// Returns `D U`, the frame and the process fidelity after removal.
pub fn remove_local_phases(u: &UnitaryGate, ideal: &UnitaryGate, d: usize) -> Result<(UnitaryGate, PhaseFrame, f64)> {
    if u.dim() != ideal.dim() {
        return Err(Error::DimensionMismatch { expected: ideal.dim(), found: u.dim() });
    }
    qudit_dim(u.dim(), d)?;
    // tr(I^dag D U) = sum_m D_m (U I^dag)_mm
    let prod = &u.matrix * ideal.matrix.adjoint();
    let w = DMatrix::from_fn(d, d, |j, k| prod[(j * d + k, j * d + k)]);
    let (frame, _) = best_product_phases(&w);
    let fixed = UnitaryGate { matrix: frame.apply(&u.matrix), labels: u.labels.clone() };
    let f = process_fidelity(&fixed, ideal, d)?;
    Ok((fixed, frame, f))
}

/// One tomography input on the computational subspace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeKind {
    /// `|m><m|`
    Diagonal(usize),
    /// `(|m> + |n>)(<m| + <n|)/2`
    Plus(usize, usize),
    /// `(|m> + i|n>)(<m| - i<n|)/2`
    PlusI(usize, usize),
}

/// The `D^2` input states, as amplitude vectors over the subspace basis.
pub fn tomography_inputs(dim: usize) -> Vec<(ProbeKind, DVector<C64>)> {
    let e = |m: usize| {
        let mut v = DVector::zeros(dim);
        v[m] = ONE;
        v
    };
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out: Vec<(ProbeKind, DVector<C64>)> = (0..dim).map(|m| (ProbeKind::Diagonal(m), e(m))).collect();
    for m in 0..dim {
        for n in m + 1..dim {
            out.push((ProbeKind::Plus(m, n), (e(m) + e(n)) * C64::new(s, 0.0)));
            out.push((ProbeKind::PlusI(m, n), (e(m) + e(n) * C64::new(0.0, 1.0)) * C64::new(s, 0.0)));
        }
    }
    out
}

/// Choi matrix `J = sum_mn E(|m><n|) (x) |m><n|`, indexed `(out, in)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessMatrix {
    pub choi: DMatrix<C64>,
    pub dim: usize,
}

impl ProcessMatrix {
    /// Build from projected outputs `<a|E(rho)|b>` of every input in
    /// [`tomography_inputs`].
    pub fn from_outputs(dim: usize, outputs: &[(ProbeKind, DMatrix<C64>)]) -> Result<Self> {
        let find = |k: ProbeKind| {
            outputs
                .iter()
                .find(|(p, _)| *p == k)
                .map(|(_, m)| m)
                .ok_or_else(|| Error::Incomplete(format!("missing tomography input {k:?}")))
        };
        let mut blocks: Vec<Vec<DMatrix<C64>>> = vec![vec![DMatrix::zeros(dim, dim); dim]; dim];
        for (m, row) in blocks.iter_mut().enumerate() {
            row[m] = find(ProbeKind::Diagonal(m))?.clone();
        }
        let half = C64::new(0.5, 0.5);
        for m in 0..dim {
            for n in m + 1..dim {
                let p = find(ProbeKind::Plus(m, n))?;
                let q = find(ProbeKind::PlusI(m, n))?;
                let mn = p + q * C64::new(0.0, 1.0) - (&blocks[m][m] + &blocks[n][n]) * half;
                blocks[n][m] = mn.adjoint();
                blocks[m][n] = mn;
            }
        }
        let mut choi = DMatrix::zeros(dim * dim, dim * dim);
        for m in 0..dim {
            for n in 0..dim {
                for a in 0..dim {
                    for b in 0..dim {
                        choi[(a * dim + m, b * dim + n)] = blocks[m][n][(a, b)];
                    }
                }
            }
        }
        Ok(Self { choi, dim })
    }

    /// Choi matrix of `rho -> K rho K^dag`.
    pub fn from_kraus(ops: &[DMatrix<C64>]) -> Self {
        let dim = ops[0].nrows();
        let mut choi = DMatrix::zeros(dim * dim, dim * dim);
        for k in ops {
            let v = choi_vector(k);
            choi += &v * v.adjoint();
        }
        Self { choi, dim }
    }

    pub fn trace(&self) -> f64 {
        self.choi.trace().re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.choi + self.choi.adjoint()) * C64::new(0.5, 0.0);
        h.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn leakage(&self) -> f64 {
        1.0 - self.trace() / self.dim as f64
    }

    /// `<<U|J|U>> / D^2`
    pub fn fidelity(&self, u: &DMatrix<C64>) -> f64 {
        let v = choi_vector(u);
        v.dotc(&(&self.choi * &v)).re / (self.dim * self.dim) as f64
    }
}

/// `|U>> = sum_m U|m> (x) |m>`, indexed `(out, in)`.
fn choi_vector(u: &DMatrix<C64>) -> DVector<C64> {
    let d = u.nrows();
    DVector::from_iterator(d * d, (0..d * d).map(|i| u[(i / d, i % d)]))
}

/// Process fidelity of a channel against `ideal` after the best product
/// phase frame, and its leakage.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelFidelity {
    pub fidelity: f64,
    pub leakage: f64,
    pub frame: PhaseFrame,
}

/// Fidelity `<<D^dag U_ideal|J|D^dag U_ideal>>/D^2` maximized over product
/// phase frames `D`. The frame search starts from the frame of the dominant
/// Kraus operator and is polished by Nelder-Mead over the `2(d-1)` angles.
pub fn choi_process(process: &ProcessMatrix, ideal: &UnitaryGate, d: usize) -> Result<ChannelFidelity> {
    qudit_dim(process.dim, d)?;
    if ideal.dim() != process.dim {
        return Err(Error::DimensionMismatch { expected: process.dim, found: ideal.dim() });
    }
    let dim = process.dim;
    let h = (&process.choi + process.choi.adjoint()) * C64::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let top = eig.eigenvalues.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap_or(0);
    let v = eig.eigenvectors.column(top);
    let kraus = DMatrix::from_fn(dim, dim, |a, m| v[a * dim + m]);
    let (_, seed, _) = remove_local_phases(&UnitaryGate::new(kraus)?, ideal, d)?;

    let score = |x: &[f64]| {
        let frame = PhaseFrame::from_angles(d, x);
        let conj = frame.diagonal().map(|z| z.conj());
        let target = DMatrix::from_fn(dim, dim, |r, c| conj[r] * ideal.matrix[(r, c)]);
        -process.fidelity(&target)
    };
    let mut x0: Vec<f64> = seed.phi_a[1..].to_vec();
    x0.extend_from_slice(&seed.phi_b[1..]);
    let mut opts = NelderMeadOptions::new(vec![0.05; x0.len()], 400 * x0.len());
    opts.ftol = 1e-15;
    let m = nelder_mead(score, &x0, &opts);
    let (x, value) = if m.value <= score(&x0) { (m.x, m.value) } else { (x0.clone(), score(&x0)) };
    Ok(ChannelFidelity {
        fidelity: -value,
        leakage: process.leakage(),
        frame: PhaseFrame::from_angles(d, &x).gauge_fixed(),
    })
}

/// Scalar gate summary written by the command-line tools.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GateReport {
    #[serde(rename = "F")]
    pub fidelity: f64,
    pub leakage: f64,
    pub phase_frame: PhaseFrame,
    pub gate_time_ns: f64,
    pub model_params_hash: String,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn max_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn u_theta_phi_cases() {
        let id = DMatrix::<C64>::identity(4, 4);
        assert_eq!(max_diff(&u_theta_phi(0.0, 0.0).matrix, &id), 0.0);
        let expect = UnitaryGate::diagonal(&[0.0, 0.0, 0.0, PI]).matrix;
        assert!(max_diff(&cz().matrix, &expect) < 1e-15);
    }

    #[test]
    fn z_sandwich_identity() {
        let (theta, phi) = (0.3, 0.7);
        let u = u_theta_phi(theta, phi).matrix;
        let z = z1().matrix;
        let lhs = &z * &u * &z * &u;
        assert!(max_diff(&lhs, &u_theta_phi(0.0, 2.0 * phi).matrix) < 1e-12);
    }

    #[test]
    fn fidelity_values() {
        let c = cz();
        assert_abs_diff_eq!(process_fidelity(&c, &c, 2).unwrap(), 1.0, epsilon = 1e-15);
        let id = UnitaryGate::new(DMatrix::identity(4, 4)).unwrap();
        // |tr(CZ)|^2 / 16 = 4 / 16
        assert_abs_diff_eq!(process_fidelity(&id, &c, 2).unwrap(), 0.25, epsilon = 1e-15);
        assert!(process_fidelity(&id, &c, 3).is_err());
        assert!(process_fidelity(&qudit_cphase(3, 1.0), &c, 2).is_err());
    }

    #[test]
    fn identity_frame_for_exact_gate() {
        let (fixed, frame, f) = remove_local_phases(&cz(), &cz(), 2).unwrap();
        assert_abs_diff_eq!(f, 1.0, epsilon = 1e-14);
        assert!(frame.phi_a.iter().chain(&frame.phi_b).all(|p| p.abs() < 1e-12));
        assert!(max_diff(&fixed.matrix, &cz().matrix) < 1e-12);
    }

    #[test]
    fn removes_dressing_qubits() {
        let dress = PhaseFrame { phi_a: vec![0.0, 1.1], phi_b: vec![0.0, -2.3] };
        let u = UnitaryGate::new(dress.apply(&cz().matrix)).unwrap();
        let (_, _, f) = remove_local_phases(&u, &cz(), 2).unwrap();
        assert_abs_diff_eq!(f, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn qutrit_dressing_round_trip() {
        let target = qudit_cphase(3, 2.0 * PI / 3.0);
        // an imperfect gate: the target with a small extra two-body phase
        let flawed = UnitaryGate::diagonal(
            &(0..9).map(|m| 2.0 * PI / 3.0 * ((m / 3) * (m % 3)) as f64 + 0.05 * (((m / 3) * (m % 3)) as f64).powi(2)).collect::<Vec<_>>(),
        );
        let (_, _, f0) = remove_local_phases(&flawed, &target, 3).unwrap();
        let dress = PhaseFrame { phi_a: vec![0.0, 0.4, -1.9], phi_b: vec![0.0, 2.5, 0.8] };
        let dressed = UnitaryGate::new(dress.apply(&flawed.matrix)).unwrap();
        let (_, _, f1) = remove_local_phases(&dressed, &target, 3).unwrap();
        assert_abs_diff_eq!(f0, f1, epsilon = 1e-9);
        assert!(f0 < 1.0);
    }

    #[test]
    fn extraction_needs_every_column() {
        let space = crate::fock::HilbertSpace::rqr(1, 2).unwrap();
        let basis: Vec<Ket> = [[0, 0, 0], [1, 0, 0]].iter().map(|t| Ket::basis(&space, t).unwrap()).collect();
        let finals = vec![Some(basis[0].clone()), None];
        let labels = vec!["0".to_string(), "1".to_string()];
        assert!(matches!(extract_unitary(&finals, &basis, &labels), Err(Error::Incomplete(_))));
        let finals = vec![Some(basis[0].clone()), Some(basis[1].clone())];
        let (u, leak) = extract_unitary(&finals, &basis, &labels).unwrap();
        assert!(leak.abs() < 1e-15);
        assert!(u.unitarity_error() < 1e-15);
    }

    #[test]
    fn identity_channel() {
        let id = DMatrix::<C64>::identity(4, 4);
        let p = ProcessMatrix::from_kraus(std::slice::from_ref(&id));
        let ideal = UnitaryGate::new(id).unwrap();
        let f = choi_process(&p, &ideal, 2).unwrap();
        assert_abs_diff_eq!(f.fidelity, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.leakage, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn depolarizing_channel() {
        // Choi of the fully depolarizing channel is I/D
        let p = ProcessMatrix { choi: DMatrix::identity(16, 16) * C64::new(0.25, 0.0), dim: 4 };
        let f = choi_process(&p, &cz(), 2).unwrap();
        assert_abs_diff_eq!(f.fidelity, 1.0 / 16.0, epsilon = 1e-12);
    }

    #[test]
    fn tomography_reconstructs_unitary_channel() {
        let dress = PhaseFrame { phi_a: vec![0.0, 0.7], phi_b: vec![0.0, -0.4] };
        let u = dress.apply(&u_theta_phi(0.2, 1.3).matrix);
        let outputs: Vec<(ProbeKind, DMatrix<C64>)> = tomography_inputs(4)
            .into_iter()
            .map(|(k, v)| {
                let out = &u * &v;
                (k, &out * out.adjoint())
            })
            .collect();
        assert_eq!(outputs.len(), 16);
        let p = ProcessMatrix::from_outputs(4, &outputs).unwrap();
        let direct = ProcessMatrix::from_kraus(std::slice::from_ref(&u));
        assert!(max_diff(&p.choi, &direct.choi) < 1e-12);
        let ideal = u_theta_phi(0.2, 1.3);
        let f = choi_process(&p, &ideal, 2).unwrap();
        assert_abs_diff_eq!(f.fidelity, 1.0, epsilon = 1e-10);
        assert!(ProcessMatrix::from_outputs(4, &outputs[..15]).is_err());
    }

    proptest! {
        #[test]
        fn conditional_phase_against_cz(phi in -3.1f64..3.1) {
            let u = UnitaryGate::diagonal(&[0.0, 0.0, 0.0, phi]);
            let (_, _, f) = remove_local_phases(&u, &cz(), 2).unwrap();
            prop_assert!((f - 0.5 * (1.0 + (0.5 * phi).sin().abs())).abs() < 1e-10);
        }

        #[test]
        fn fidelity_bounded_and_phase_invariant(
            phases in proptest::collection::vec(-3.2f64..3.2, 4),
            global in -3.2f64..3.2,
        ) {
            let u = UnitaryGate::diagonal(&phases);
            let f = process_fidelity(&u, &cz(), 2).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&f));
            let shifted = UnitaryGate::new(u.matrix.map(|z| z * C64::from_polar(1.0, global))).unwrap();
            let g = process_fidelity(&shifted, &cz(), 2).unwrap();
            prop_assert!((f - g).abs() < 1e-12);
            let (_, _, best) = remove_local_phases(&u, &cz(), 2).unwrap();
            prop_assert!(best + 1e-12 >= f);
            prop_assert!(best <= 1.0 + 1e-12);
        }
    }
}
