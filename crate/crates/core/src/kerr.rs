//! Cross-Kerr synthesis from the `n_- sqrt(n_+)` interaction by conjugating
//! with single-resonator photon-number permutations.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{cat_amplitudes, coherent_amplitudes, Parity, C64};
use crate::gates::{best_product_phases, process_fidelity, product_phases_from, qudit_cphase, PhaseFrame, UnitaryGate};
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::rqr::spectrum::{dressed_reference, Branch, Reference, SpectrumSolver};
use crate::rqr::RqrParams;
use crate::fock::HilbertSpace;

/// Largest permutation index in the family.
pub const MAX_PERMUTATION: usize = 4;

/// Linearity tolerance on the `n_-` coefficient.
pub const LINEARITY_TOL: f64 = 1e-12;

/// A bijection of the photon numbers `0..=n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    map: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Self { map: (0..=n).collect() }
    }

    pub fn from_map(map: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; map.len()];
        for &m in &map {
            if m >= map.len() || seen[m] {
                return Err(Error::InvalidParameter(format!("{map:?} is not a bijection")));
            }
            seen[m] = true;
        }
        Ok(Self { map })
    }

    /// Largest photon number.
    pub fn n(&self) -> usize {
        self.map.len() - 1
    }

    pub fn apply(&self, j: usize) -> usize {
        self.map[j]
    }

    pub fn map(&self) -> &[usize] {
        &self.map
    }

    /// `self` after `other`.
    pub fn compose(&self, other: &Permutation) -> Permutation {
        Permutation { map: other.map.iter().map(|&j| self.map[j]).collect() }
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.map.len()];
        for (j, &m) in self.map.iter().enumerate() {
            inv[m] = j;
        }
        Permutation { map: inv }
    }

    pub fn is_involution(&self) -> bool {
        self.map.iter().enumerate().all(|(j, &m)| self.map[m] == j)
    }

    /// Non-trivial cycles, each starting at its smallest element.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.map.len()];
        let mut out = Vec::new();
        for start in 0..self.map.len() {
            if seen[start] || self.map[start] == start {
                continue;
            }
            let mut cycle = vec![start];
            seen[start] = true;
            let mut j = self.map[start];
            while j != start {
                seen[j] = true;
                cycle.push(j);
                j = self.map[j];
            }
            out.push(cycle);
        }
        out
    }
}

/// `P_1` flips every photon number, `|j> -> |N - j>`; `P_k` for `k >= 2`
/// swaps only `j <-> N - j` for `j < k - 1`.
pub fn permutation_p(k: usize, n: usize) -> Result<Permutation> {
    if k == 0 || k > MAX_PERMUTATION {
        return Err(Error::InvalidParameter(format!("permutation index {k} outside 1..={MAX_PERMUTATION}")));
    }
    let min = 2 * k - 2;
    if n < min {
        return Err(Error::PermutationTooSmall { k, n, min });
    }
    let swapped = |j: usize| k == 1 || j < k - 1 || j > n - (k - 1);
    Ok(Permutation { map: (0..=n).map(|j| if swapped(j) { n - j } else { j }).collect() })
}

/// `P^(a) (x) P^(b)` on two resonators.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProductPermutation {
    pub a: Permutation,
    pub b: Permutation,
}

impl Serialize for Permutation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.cycles().serialize(s)
    }
}

impl Serialize for ProductPermutation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("ProductPermutation", 2)?;
        st.serialize_field("a", &self.a)?;
        st.serialize_field("b", &self.b)?;
        st.end()
    }
}

fn rows<S: serde::Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    let v: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().cloned().collect()).collect();
    v.serialize(s)
}

fn pairs<S: serde::Serializer>(z: &[C64], s: S) -> std::result::Result<S::Ok, S::Error> {
    let v: Vec<[f64; 2]> = z.iter().map(|c| [c.re, c.im]).collect();
    v.serialize(s)
}

/// Diagonal two-resonator Hamiltonian `h(n_-, n_+)` on `0..=N` squared,
/// stored as angular rates so that an interval `t` gives phases `-h t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagonalInteraction {
    pub n: usize,
    /// `values[(n_minus, n_plus)]`
    #[serde(serialize_with = "rows")]
    pub values: DMatrix<f64>,
    /// Unit of the evolution time these rates pair with.
    pub time_unit: String,
}

impl DiagonalInteraction {
    /// `chi n_- sqrt(n_+)` with time measured in units of `1/chi`.
    pub fn ideal(n: usize, chi: f64) -> Self {
        Self {
            n,
            values: DMatrix::from_fn(n + 1, n + 1, |m, p| chi * m as f64 * (p as f64).sqrt()),
            time_unit: "1/chi".into(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n + 1
    }

    /// `P H P^-1`, i.e. `h(P^-1 m, P^-1 p)`.
    pub fn conjugate(&self, p: &ProductPermutation) -> Result<Self> {
        if p.a.n() != self.n || p.b.n() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: p.a.n().max(p.b.n()) });
        }
        let (ia, ib) = (p.a.inverse(), p.b.inverse());
        Ok(Self {
            values: DMatrix::from_fn(self.dim(), self.dim(), |m, q| self.values[(ia.apply(m), ib.apply(q))]),
            ..self.clone()
        })
    }

    /// Coefficient of `n_-` as a function of `n_+`, after checking that no
    /// term is nonlinear in `n_-`.
    pub fn minus_coefficient(&self) -> Result<Vec<f64>> {
        let h = &self.values;
        let c: Vec<f64> = (0..self.dim()).map(|p| h[(1.min(self.n), p)] - h[(0, p)]).collect();
        let scale = h.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()));
        for m in 0..self.dim() {
            for p in 0..self.dim() {
                let r = h[(m, p)] - h[(0, p)] - m as f64 * c[p];
                if r.abs() > LINEARITY_TOL * scale {
                    return Err(Error::Quality(format!("term nonlinear in n_- at ({m}, {p}): residue {r:.3e}")));
                }
            }
        }
        Ok(c)
    }

    /// Least-squares coefficient `kappa` of `n_- n_+` in
    /// `h ~ kappa n_- n_+ + u(n_-) + v(n_+)`.
    pub fn cross_kerr_estimate(&self) -> f64 {
        let d = self.dim();
        let h = &self.values;
        // double-centering removes u and v exactly
        let row: Vec<f64> = (0..d).map(|m| h.row(m).mean()).collect();
        let col: Vec<f64> = (0..d).map(|p| h.column(p).mean()).collect();
        let all = h.mean();
        let mean_n = (d - 1) as f64 / 2.0;
        let (mut num, mut den) = (0.0, 0.0);
        for m in 0..d {
            for p in 0..d {
                let x = (m as f64 - mean_n) * (p as f64 - mean_n);
                num += x * (h[(m, p)] - row[m] - col[p] + all);
                den += x * x;
            }
        }
        if den == 0.0 {
            0.0
        } else {
            num / den
        }
    }
}

/// One iteration of the circuit: `H_j = (P1 H P1^-1 + P2 H P2^-1)/2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanIteration {
    pub first: ProductPermutation,
    pub second: ProductPermutation,
}

/// Permutations and weights of an `N_iter`-step synthesis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthesisPlan {
    pub n: usize,
    pub iterations: Vec<PlanIteration>,
    /// Relative time of each of the two conjugated segments of an
    /// iteration, so iteration `j` lasts `2 lambda_j`.
    pub weights: Vec<f64>,
    /// Constant offset of the weighted profile fit.
    pub shift: f64,
}

fn qudit_permutation(j: usize, n: usize) -> Result<Permutation> {
    if j == 1 {
        Ok(Permutation::identity(n))
    } else {
        permutation_p(j, n)
    }
}

impl SynthesisPlan {
    /// Iteration 1 pairs `I (x) I` with `P1 (x) P1`; iteration `j >= 2` pairs
    /// `I (x) P_j` with `P1 (x) P1 P_j`. Weights start at one.
    pub fn new(n: usize, n_iter: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("N must be at least 1".into()));
        }
        if n_iter == 0 || n_iter > MAX_PERMUTATION {
            return Err(Error::InvalidParameter(format!("N_iter must be in 1..={MAX_PERMUTATION}, got {n_iter}")));
        }
        let p1 = permutation_p(1, n)?;
        let iterations = (1..=n_iter)
            .map(|j| {
                let q = qudit_permutation(j, n)?;
                Ok(PlanIteration {
                    first: ProductPermutation { a: Permutation::identity(n), b: q.clone() },
                    second: ProductPermutation { a: p1.clone(), b: p1.compose(&q) },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { n, iterations, weights: vec![1.0; n_iter], shift: 0.0 })
    }

    pub fn n_iter(&self) -> usize {
        self.iterations.len()
    }

    /// `sum_j 2 lambda_j H_j`
    pub fn total_hamiltonian(&self, h: &DiagonalInteraction) -> Result<DiagonalInteraction> {
        let mut acc = DMatrix::zeros(h.dim(), h.dim());
        for (j, w) in self.weights.iter().enumerate() {
            acc += conjugated_hamiltonian(h, self, j + 1)?.values * (2.0 * w);
        }
        Ok(DiagonalInteraction { values: acc, ..h.clone() })
    }
}

/// `H_j` for iteration `j` (1-based) of `plan`.
pub fn conjugated_hamiltonian(h: &DiagonalInteraction, plan: &SynthesisPlan, j: usize) -> Result<DiagonalInteraction> {
    let it = plan
        .iterations
        .get(j.wrapping_sub(1))
        .ok_or_else(|| Error::InvalidParameter(format!("plan has no iteration {j}")))?;
    let a = h.conjugate(&it.first)?;
    let b = h.conjugate(&it.second)?;
    Ok(DiagonalInteraction { values: (a.values + b.values) * 0.5, ..h.clone() })
}

/// `f_j(n)`: the `n_-` coefficient of `H_j` built from `n_- sqrt(n_+)`.
pub fn f_profile(j: usize, n: usize) -> Result<Vec<f64>> {
    let plan = SynthesisPlan::new(n, j)?;
    conjugated_hamiltonian(&DiagonalInteraction::ideal(n, 1.0), &plan, j)?.minus_coefficient()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightFit {
    pub weights: Vec<f64>,
    pub shift: f64,
    /// Euclidean norm of the fit residual over `n = 0..=N`.
    pub residual: f64,
}

/// Number of independent linearity conditions for photon numbers `0..=n`.
pub fn independent_conditions(n: usize) -> usize {
    n.div_ceil(2).max(1)
}

/// Minimum-norm least-squares fit of `sum_j 2 lambda_j f_j(n) + shift` to
/// the line `n` on `0..=N`.
pub fn optimize_weights(n: usize, n_iter: usize) -> Result<WeightFit> {
    let k = independent_conditions(n);
    if n_iter > k {
        return Err(Error::RankDeficient(format!(
            "N = {n} gives {k} independent conditions, fewer than N_iter = {n_iter}"
        )));
    }
    let profiles: Vec<Vec<f64>> = (1..=n_iter).map(|j| f_profile(j, n)).collect::<Result<_>>()?;
    let a = DMatrix::from_fn(n + 1, n_iter + 1, |r, c| if c < n_iter { 2.0 * profiles[c][r] } else { 1.0 });
    let y = DVector::from_fn(n + 1, |r, _| r as f64);
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let rank = svd.rank(1e-12 * smax.max(1.0));
    if rank < n_iter + 1 {
        return Err(Error::RankDeficient(format!("profile matrix has rank {rank} < {}", n_iter + 1)));
    }
    let x = svd
        .solve(&y, 1e-12 * smax.max(1.0))
        .map_err(|e| Error::RankDeficient(e.to_string()))?;
    let residual = (&a * &x - &y).norm();
    Ok(WeightFit { weights: x.rows(0, n_iter).iter().cloned().collect(), shift: x[n_iter], residual })
}

/// Diagonal of `exp(-i t H)` in `|n_-, n_+>` order.
fn evolve(h: &DMatrix<f64>, t: f64) -> DVector<C64> {
    let d = h.nrows();
    DVector::from_fn(d * d, |i, _| C64::from_polar(1.0, -t * h[(i / d, i % d)]))
}

fn phase_target(u: &DVector<C64>, d: usize, theta: f64) -> DMatrix<C64> {
    DMatrix::from_fn(d, d, |j, k| u[j * d + k] * C64::from_polar(1.0, -theta * (j * k) as f64))
}

fn error_of(s: f64, d: usize) -> f64 {
    1.0 - (s / (d * d) as f64).powi(2).min(1.0)
}

/// Error `1 - F` of a diagonal gate against `exp(i theta j k)` after
/// product-phase removal, and the frame.
fn diagonal_error(u: &DVector<C64>, d: usize, theta: f64) -> (f64, PhaseFrame) {
    let (frame, s) = best_product_phases(&phase_target(u, d, theta));
    (error_of(s, d), frame)
}

/// Single-start version of [`diagonal_error`] used inside searches.
fn quick_error(u: &DVector<C64>, d: usize, theta: f64) -> f64 {
    error_of(product_phases_from(&phase_target(u, d, theta), &PhaseFrame::identity(d)).1, d)
}

#[derive(Debug, Clone, Serialize)]
pub struct SynthesizedGate {
    #[serde(skip)]
    pub gate: UnitaryGate,
    pub error: f64,
    pub frame: PhaseFrame,
    /// Segment time scale `t`: each conjugation of iteration `j` lasts
    /// `lambda_j t`.
    pub time_scale: f64,
    /// Total interaction time, in the time unit of the interaction.
    pub total_time: f64,
}

/// Smallest positive `t` with `-kappa t = theta (mod 2 pi)`.
fn phase_time(kappa: f64, theta: f64) -> Option<f64> {
    if kappa == 0.0 || !kappa.is_finite() {
        return None;
    }
    let tau = std::f64::consts::TAU;
    let target = if kappa > 0.0 { (-theta).rem_euclid(tau) } else { theta.rem_euclid(tau) };
    let target = if target == 0.0 { tau } else { target };
    Some(target / kappa.abs())
}

fn golden_max(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64, iters: usize) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..iters {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

fn gate_at(total: &DMatrix<f64>, plan: &SynthesisPlan, t: f64, theta: f64, d: usize) -> Result<SynthesizedGate> {
    let u = evolve(total, t);
    let (error, frame) = diagonal_error(&u, d, theta);
    let gate = UnitaryGate::new(DMatrix::from_diagonal(&u))?;
    let total_time = 2.0 * t * plan.weights.iter().sum::<f64>();
    Ok(SynthesizedGate { gate, error, frame, time_scale: t, total_time })
}

fn check_dims(h: &DiagonalInteraction, plan: &SynthesisPlan, d: usize) -> Result<()> {
    if d != h.dim() || plan.n != h.n {
        return Err(Error::DimensionMismatch { expected: h.dim(), found: d });
    }
    Ok(())
}

/// Compose the plan's segments (each conjugation of iteration `j` runs for
/// `lambda_j t`) and choose the scale `t` so the gate best matches
/// `exp(i theta j k)` on `d = N + 1` levels.
pub fn synthesized_gate(h: &DiagonalInteraction, plan: &SynthesisPlan, theta: f64, d: usize) -> Result<SynthesizedGate> {
    check_dims(h, plan, d)?;
    let total = plan.total_hamiltonian(h)?;
    let kappa = total.cross_kerr_estimate();
    let t0 = phase_time(kappa, theta)
        .ok_or_else(|| Error::Singular("synthesized Hamiltonian has no cross-Kerr part".into()))?;
    let err = |t: f64| quick_error(&evolve(&total.values, t), d, theta);
    // scan +-2% around the slope estimate, then polish
    let grid: Vec<(f64, f64)> = (0..=80).map(|i| t0 * (0.98 + 0.0005 * i as f64)).map(|t| (t, err(t))).collect();
    let (best, best_err) = grid.iter().cloned().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap_or((t0, err(t0)));
    let step = 0.0005 * t0;
    let (t, neg) = golden_max(|t| -err(t), best - step, best + step, 50);
    let t = if -neg <= best_err { t } else { best };
    gate_at(&total.values, plan, t, theta, d)
}

/// Nelder-Mead on the segment times `mu_j = lambda_j t`, starting from
/// `plan` at its best scale. Returns the refined plan (scale folded back so
/// that `t` is unchanged) and its gate; the start is returned when it is
/// already exact or nothing better is found.
pub fn refine_weights(
    h: &DiagonalInteraction,
    plan: &SynthesisPlan,
    theta: f64,
    d: usize,
) -> Result<(SynthesisPlan, SynthesizedGate)> {
    let start = synthesized_gate(h, plan, theta, d)?;
    if start.error < 1e-12 {
        return Ok((plan.clone(), start));
    }
    let t = start.time_scale;
    let terms: Vec<DMatrix<f64>> = (1..=plan.n_iter())
        .map(|j| conjugated_hamiltonian(h, plan, j).map(|c| c.values * 2.0))
        .collect::<Result<_>>()?;
    let total = |mu: &[f64]| terms.iter().zip(mu).fold(DMatrix::zeros(d, d), |acc, (m, w)| acc + m * *w);
    let objective = |mu: &[f64]| quick_error(&evolve(&total(mu), 1.0), d, theta);
    let mu0: Vec<f64> = plan.weights.iter().map(|w| w * t).collect();
    let step: Vec<f64> = mu0.iter().map(|m| (0.02 * m.abs()).max(1e-3 * t)).collect();
    let mut opts = NelderMeadOptions::new(step, 400 * plan.n_iter());
    opts.ftol = 1e-16;
    let m = nelder_mead(objective, &mu0, &opts);
    let refined = SynthesisPlan { weights: m.x.iter().map(|x| x / t).collect(), ..plan.clone() };
    let gate = gate_at(&total(&m.x), &refined, 1.0, theta, d)?;
    if gate.error < start.error {
        Ok((refined, SynthesizedGate { time_scale: t, total_time: 2.0 * m.x.iter().sum::<f64>(), ..gate }))
    } else {
        Ok((plan.clone(), start))
    }
}

/// Interaction values for the error scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InteractionSource {
    /// `n_- sqrt(n_+)`, time in units of `1/chi`.
    Ideal,
    /// Labeled energies of the circuit.
    Numeric(NumericLevels),
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorRow {
    pub d: usize,
    pub n_iter: usize,
    /// Iterations actually used: at most the number of independent
    /// linearity conditions for `d` levels.
    pub n_iter_used: usize,
    pub error: f64,
    pub total_time: f64,
    pub exact: bool,
    pub weights: Vec<f64>,
}

/// Errors below this count as numerically exact.
pub const EXACT_ERROR: f64 = 1e-10;

/// `1 - F` of the `theta_d = 2 pi / d` gate for every `d` and `N_iter`.
/// Weights come from the line fit and are then refined against the gate; at
/// each `d` the best weights of `N_iter - 1` (padded with zero) also seed
/// the `N_iter` refinement, so the error never grows with `N_iter`.
pub fn qudit_gate_error_scan(dims: &[usize], n_iters: &[usize], source: InteractionSource) -> Result<Vec<ErrorRow>> {
    if dims.iter().any(|&d| d < 2) {
        return Err(Error::InvalidParameter("qudit dimension must be at least 2".into()));
    }
    let mut iters = n_iters.to_vec();
    iters.sort_unstable();
    iters.dedup();
    let per_dim: Vec<Vec<ErrorRow>> = dims
        .par_iter()
        .map(|&d| {
            let n = d - 1;
            let h = match source {
                InteractionSource::Ideal => DiagonalInteraction::ideal(n, 1.0),
                InteractionSource::Numeric(levels) => levels.interaction(n)?,
            };
            let theta = std::f64::consts::TAU / d as f64;
            let mut rows = Vec::new();
            let mut previous: Option<(SynthesisPlan, SynthesizedGate)> = None;
            for &requested in &iters {
                let used = requested.min(independent_conditions(n));
                let fit = optimize_weights(n, used)?;
                let seed = SynthesisPlan { weights: fit.weights.clone(), shift: fit.shift, ..SynthesisPlan::new(n, used)? };
                let (mut best, mut best_gate) = refine_weights(&h, &seed, theta, d)?;
                if let Some((prev, prev_gate)) = &previous {
                    let mut w = prev.weights.clone();
                    w.resize(used, 0.0);
                    let padded = SynthesisPlan { weights: w, ..seed.clone() };
                    // the padded plan reproduces the previous gate exactly
                    let mut candidates = vec![(padded.clone(), prev_gate.clone())];
                    candidates.push(refine_weights(&h, &padded, theta, d)?);
                    for (plan, gate) in candidates {
                        if gate.error < best_gate.error {
                            best = plan;
                            best_gate = gate;
                        }
                    }
                }
                rows.push(ErrorRow {
                    d,
                    n_iter: requested,
                    n_iter_used: used,
                    error: best_gate.error,
                    total_time: best_gate.total_time,
                    exact: best_gate.error < EXACT_ERROR,
                    weights: best.weights.clone(),
                });
                previous = Some((best, best_gate));
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    Ok(per_dim.into_iter().flatten().collect())
}

/// Labeled-spectrum interaction of the circuit at resonator splitting
/// `delta = nu_b - nu_a` and coupler detuning `Delta` from the mean
/// resonator frequency, with no direct resonator coupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericLevels {
    /// Mean resonator frequency, GHz.
    pub nu: f64,
    pub g: f64,
    pub delta: f64,
    pub coupler_detuning: f64,
    pub alpha: f64,
    pub coupler_levels: usize,
    /// Continuation steps from `delta = 0`.
    pub steps: usize,
}

impl NumericLevels {
    /// g = 100 MHz, delta = 50 MHz, resonant two-level coupler.
    pub fn reference() -> Self {
        Self { nu: 7.0, g: 0.1, delta: 0.05, coupler_detuning: 0.0, alpha: 0.3, coupler_levels: 2, steps: 10 }
    }

    fn params(&self, delta: f64) -> RqrParams {
        RqrParams {
            nu_a: self.nu - 0.5 * delta,
            nu_b: self.nu + 0.5 * delta,
            nu_q: self.nu + self.coupler_detuning,
            alpha: self.alpha,
            g_a: self.g,
            g_b: self.g,
            g_ab: 0.0,
            coupler_levels: self.coupler_levels,
        }
    }

    /// `h(n_-, n_+) = 2 pi [E_delta - E_0]` in rad/ns for the lower-branch
    /// states up to `n` photons per mode. The `delta = 0` energies are
    /// single-mode terms, so subtracting them only moves local phases.
    pub fn interaction(&self, n: usize) -> Result<DiagonalInteraction> {
        if self.steps == 0 {
            return Err(Error::InvalidParameter("continuation needs at least one step".into()));
        }
        let space = HilbertSpace::rqr(2 * n, self.coupler_levels)?;
        let solver = SpectrumSolver::new(&space)?;
        let theta = |p: usize| 0.5 * (2.0 * (2.0 * p as f64).sqrt() * self.g).atan2(self.coupler_detuning);
        let mut refs: Vec<Reference> = Vec::new();
        for m in 0..=n {
            for p in 0..=n {
                let mut r = dressed_reference(&space, theta(p), m, p, Branch::Lower)?;
                r.name = format!("{m},{p}");
                refs.push(r);
            }
        }
        let start = solver.diagonalize(&self.params(0.0), &refs)?;
        let e0: Vec<f64> = refs.iter().map(|r| start.energy(&r.name)).collect::<Result<_>>()?;
        let mut current = start.references();
        let mut spectrum = start;
        for s in 1..=self.steps {
            let delta = self.delta * s as f64 / self.steps as f64;
            spectrum = solver.diagonalize(&self.params(delta), &current)?;
            if !spectrum.flags.is_empty() {
                return Err(Error::Labeling(format!("delta = {delta}: {}", spectrum.flags.join("; "))));
            }
            current = spectrum.references();
        }
        let mut values = DMatrix::zeros(n + 1, n + 1);
        for (i, r) in refs.iter().enumerate() {
            let (m, p) = (i / (n + 1), i % (n + 1));
            values[(m, p)] = std::f64::consts::TAU * (spectrum.energy(&r.name)? - e0[i]);
        }
        Ok(DiagonalInteraction { n, values, time_unit: "ns".into() })
    }
}

/// Logical states of the binomial code: |0_L> = |2>, |1_L> = (|0> + |4>)/sqrt 2.
pub fn binomial_code(cutoff: usize) -> Result<[DVector<C64>; 2]> {
    if cutoff < 4 {
        return Err(Error::Truncation(format!("binomial code needs cutoff >= 4, got {cutoff}")));
    }
    let mut zero = DVector::zeros(cutoff + 1);
    zero[2] = C64::new(1.0, 0.0);
    let mut one = DVector::zeros(cutoff + 1);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    one[0] = C64::new(s, 0.0);
    one[4] = C64::new(s, 0.0);
    Ok([zero, one])
}

/// Process fidelity on a two-qubit code space: `|tr(T^dag P^dag D U P)|^2/16`
/// maximized over Fock-level product phases `D`, for diagonal `U` given on
/// `d x d` levels and logical target phases `target` in |00>,|01>,|10>,|11> order.
pub fn code_fidelity(u: &DVector<C64>, d: usize, code: &[DVector<C64>; 2], target: &[C64; 4]) -> Result<(f64, PhaseFrame)> {
    if u.len() != d * d || code[0].len() != d || code[1].len() != d {
        return Err(Error::DimensionMismatch { expected: d * d, found: u.len() });
    }
    let mut w = DMatrix::zeros(d, d);
    for (l, t) in target.iter().enumerate() {
        let (x, y) = (&code[l / 2], &code[l % 2]);
        for j in 0..d {
            for k in 0..d {
                w[(j, k)] += t.conj() * x[j].norm_sqr() * y[k].norm_sqr() * u[j * d + k];
            }
        }
    }
    let (frame, s) = best_product_phases(&w);
    Ok(((s / 4.0).powi(2), frame))
}

/// Binomial-code CZ from one circuit iteration at one coupler detuning.
#[derive(Debug, Clone, Serialize)]
pub struct OperatingPoint {
    pub coupler_detuning: f64,
    /// Best fidelity on the time grid (refined).
    pub best_fidelity: f64,
    pub best_time_ns: f64,
    /// First local maximum above the threshold, if any.
    pub first_time_ns: Option<f64>,
    pub first_fidelity: Option<f64>,
}

/// Scan the interaction time of the one-iteration binomial CZ (N = 4) for
/// each coupler detuning. Times are total interaction times in ns.
pub fn binomial_operating_points(
    levels: &NumericLevels,
    detunings: &[f64],
    t_max: f64,
    dt: f64,
    threshold: f64,
) -> Result<Vec<OperatingPoint>> {
    if !(dt > 0.0 && t_max > dt) {
        return Err(Error::InvalidParameter("time grid needs 0 < dt < t_max".into()));
    }
    let code = binomial_code(4)?;
    let one = C64::new(1.0, 0.0);
    let target = [-one, one, one, one];
    detunings
        .par_iter()
        .map(|&det| {
            let lv = NumericLevels { coupler_detuning: det, ..*levels };
            let h = lv.interaction(4)?;
            // half weight: the two segments share the total time
            let plan = SynthesisPlan { weights: vec![0.5], ..SynthesisPlan::new(4, 1)? };
            let total = plan.total_hamiltonian(&h)?;
            let fid = |t: f64| code_fidelity(&evolve(&total.values, t), 5, &code, &target).map(|r| r.0).unwrap_or(0.0);
            let steps = (t_max / dt).floor() as usize;
            let ts: Vec<f64> = (1..=steps).map(|i| i as f64 * dt).collect();
            let fs: Vec<f64> = ts.iter().map(|&t| fid(t)).collect();
            let refine = |i: usize| {
                let lo = ts[i] - dt;
                let hi = (ts[i] + dt).min(t_max);
                let (t, f) = golden_max(fid, lo.max(0.0), hi, 60);
                if f >= fs[i] {
                    (t, f)
                } else {
                    (ts[i], fs[i])
                }
            };
            let best_i = (0..fs.len()).max_by(|&a, &b| fs[a].total_cmp(&fs[b])).unwrap_or(0);
            let (best_t, best_f) = refine(best_i);
            let mut first = None;
            for i in 0..fs.len() {
                let left = if i == 0 { 0.0 } else { fs[i - 1] };
                let right = fs.get(i + 1).cloned().unwrap_or(0.0);
                if fs[i] >= left && fs[i] >= right {
                    let (t, f) = refine(i);
                    if f > threshold {
                        first = Some((t, f));
                        break;
                    }
                }
            }
            Ok(OperatingPoint {
                coupler_detuning: det,
                best_fidelity: best_f,
                best_time_ns: best_t,
                first_time_ns: first.map(|x| x.0),
                first_fidelity: first.map(|x| x.1),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Encoding {
    Cat { alpha: f64, beta: f64, cutoff: usize },
    Binomial { cutoff: usize },
}

/// Phases acquired by the four logical products under `exp(-i chi t n_a n_b)`.
#[derive(Debug, Clone, Serialize)]
pub struct PhaseTable {
    pub labels: [String; 4],
    /// `<L|U|L>` for each logical product, as `[re, im]`.
    #[serde(serialize_with = "pairs")]
    pub overlaps: Vec<C64>,
    /// Largest `1 - |<L|U|L>|^2`.
    pub off_target: f64,
    /// Probability beyond the cutoff of the untruncated states.
    pub truncation: f64,
}

fn poisson_tail(alpha: f64, cutoff: usize) -> f64 {
    let kept: f64 = coherent_amplitudes(cutoff, C64::new(alpha, 0.0)).iter().map(|c| c.norm_sqr()).sum();
    (1.0 - kept).max(0.0)
}

/// Apply the ideal cross-Kerr evolution to every logical product state.
pub fn encoded_gate_demo(encoding: &Encoding, chi: f64, t: f64) -> Result<PhaseTable> {
    let (code_a, code_b, labels, truncation) = match *encoding {
        Encoding::Binomial { cutoff } => {
            let c = binomial_code(cutoff)?;
            (c.clone(), c, ["0L0L", "0L1L", "1L0L", "1L1L"], 0.0)
        }
        Encoding::Cat { alpha, beta, cutoff } => {
            for a in [alpha, beta] {
                if a * a > cutoff as f64 / 2.0 {
                    log::warn!("cat amplitude {a} is large for cutoff {cutoff}");
                }
            }
            let cat = |x: f64, p| DVector::from_vec(cat_amplitudes(cutoff, C64::new(x, 0.0), p));
            (
                [cat(alpha, Parity::Even), cat(alpha, Parity::Odd)],
                [cat(beta, Parity::Even), cat(beta, Parity::Odd)],
                ["++", "+-", "-+", "--"],
                poisson_tail(alpha, cutoff).max(poisson_tail(beta, cutoff)),
            )
        }
    };
    let (da, db) = (code_a[0].len(), code_b[0].len());
    let mut overlaps = Vec::with_capacity(4);
    for x in &code_a {
        for y in &code_b {
            let mut s = C64::new(0.0, 0.0);
            for j in 0..da {
                for k in 0..db {
                    s += (x[j] * y[k]).norm_sqr() * C64::from_polar(1.0, -chi * t * (j * k) as f64);
                }
            }
            overlaps.push(s);
        }
    }
    let off_target = overlaps.iter().map(|o| 1.0 - o.norm_sqr()).fold(0.0, f64::max);
    Ok(PhaseTable { labels: labels.map(String::from), overlaps, off_target, truncation })
}

/// Process fidelity of a diagonal gate against `exp(i theta j k)` without any
/// phase removal; used to cross-check [`synthesized_gate`].
pub fn raw_fidelity(gate: &UnitaryGate, theta: f64, d: usize) -> Result<f64> {
    process_fidelity(gate, &qudit_cphase(d, theta), d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn p1_flips() {
        let p = permutation_p(1, 4).unwrap();
        assert_eq!(p.map(), &[4, 3, 2, 1, 0]);
        assert_eq!(p.cycles(), vec![vec![0, 4], vec![1, 3]]);
    }

    #[test]
    fn p2_swaps_ends_only() {
        let p = permutation_p(2, 9).unwrap();
        assert_eq!(p.map(), &[9, 1, 2, 3, 4, 5, 6, 7, 8, 0]);
    }

    #[test]
    fn p3_p4_cases() {
        assert_eq!(permutation_p(3, 9).unwrap().map(), &[9, 8, 2, 3, 4, 5, 6, 7, 1, 0]);
        assert_eq!(permutation_p(4, 9).unwrap().map(), &[9, 8, 7, 3, 4, 5, 6, 2, 1, 0]);
        let p3 = permutation_p(3, 9).unwrap();
        assert_eq!(p3.compose(&p3), Permutation::identity(9));
    }

    #[test]
    fn too_small_n() {
        assert_eq!(permutation_p(4, 5), Err(Error::PermutationTooSmall { k: 4, n: 5, min: 6 }));
        assert!(permutation_p(4, 6).is_ok());
        assert!(permutation_p(5, 20).is_err());
        assert!(Permutation::from_map(vec![0, 0, 1]).is_err());
    }

    #[test]
    fn first_iteration_hamiltonian() {
        let n = 6;
        let chi = 0.7;
        let h = DiagonalInteraction::ideal(n, chi);
        let plan = SynthesisPlan::new(n, 1).unwrap();
        let h1 = conjugated_hamiltonian(&h, &plan, 1).unwrap();
        for m in 0..=n {
            for p in 0..=n {
                let (mf, pf, nf) = (m as f64, p as f64, n as f64);
                let expect = 0.5 * chi * (mf * pf.sqrt() + (nf - mf) * (nf - pf).sqrt());
                assert!((h1.values[(m, p)] - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn identity_conjugation() {
        let h = DiagonalInteraction::ideal(5, 1.0);
        let id = ProductPermutation { a: Permutation::identity(5), b: Permutation::identity(5) };
        assert_eq!(h.conjugate(&id).unwrap(), h);
    }

    #[test]
    fn f1_closed_form() {
        let n = 9;
        let f = f_profile(1, n).unwrap();
        for (p, v) in f.iter().enumerate() {
            // the sqrt(N)/2 constant is an n_- only term and is not kept
            let expect = 0.5 * ((p as f64).sqrt() - ((n - p) as f64).sqrt());
            assert!((v - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn profiles_bounded_and_antisymmetric() {
        let n = 9;
        for j in 1..=4 {
            let f = f_profile(j, n).unwrap();
            for p in 0..=n {
                assert!(f[p].abs() <= (n as f64).sqrt());
                assert!((f[p] + f[n - p]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn published_weights() {
        let fit = optimize_weights(9, 4).unwrap();
        let expect = [1.7967, 0.2071, 0.0579, 0.0317];
        for (w, e) in fit.weights.iter().zip(expect) {
            assert!((w - e).abs() < 1e-3, "{:?}", fit.weights);
        }
        assert!((fit.shift - 4.5).abs() < 1e-12);
    }

    #[test]
    fn residual_shrinks_with_iterations() {
        let r: Vec<f64> = (1..=4).map(|k| optimize_weights(9, k).unwrap().residual).collect();
        assert!(r.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{r:?}");
    }

    #[test]
    fn single_photon_is_linear() {
        let fit = optimize_weights(1, 1).unwrap();
        assert_eq!(fit.weights.len(), 1);
        assert!(fit.residual < 1e-14);
        assert!(matches!(optimize_weights(1, 2), Err(Error::RankDeficient(_))));
        assert!(matches!(optimize_weights(4, 3), Err(Error::RankDeficient(_))));
    }

    #[test]
    fn qubit_gate_is_exact() {
        let h = DiagonalInteraction::ideal(1, 1.0);
        let fit = optimize_weights(1, 1).unwrap();
        let plan = SynthesisPlan { weights: fit.weights, ..SynthesisPlan::new(1, 1).unwrap() };
        let g = synthesized_gate(&h, &plan, std::f64::consts::PI, 2).unwrap();
        assert!(g.error < 1e-10, "{}", g.error);
    }

    #[test]
    fn cross_kerr_estimate_recovers_coefficient() {
        let d = 6;
        let values = DMatrix::from_fn(d, d, |m, p| 0.37 * (m * p) as f64 + (m * m) as f64 - 2.0 * (p as f64).sqrt());
        let h = DiagonalInteraction { n: d - 1, values, time_unit: "ns".into() };
        assert!((h.cross_kerr_estimate() - 0.37).abs() < 1e-12);
    }

    #[test]
    fn binomial_table() {
        let chi = 0.013;
        let t = std::f64::consts::PI / (4.0 * chi);
        let table = encoded_gate_demo(&Encoding::Binomial { cutoff: 6 }, chi, t).unwrap();
        let expect = [-1.0, 1.0, 1.0, 1.0];
        for (o, e) in table.overlaps.iter().zip(expect) {
            assert!((o - C64::new(e, 0.0)).norm() < 1e-12, "{o}");
        }
        assert!(matches!(encoded_gate_demo(&Encoding::Binomial { cutoff: 3 }, chi, t), Err(Error::Truncation(_))));
    }

    #[test]
    fn zero_time_is_identity() {
        let table = encoded_gate_demo(&Encoding::Cat { alpha: 1.0, beta: 1.2, cutoff: 20 }, 1.0, 0.0).unwrap();
        assert!(table.overlaps.iter().all(|o| (o - C64::new(1.0, 0.0)).norm() < 1e-14));
    }

    #[test]
    fn cat_phase_table() {
        let s = std::f64::consts::SQRT_2;
        let table = encoded_gate_demo(&Encoding::Cat { alpha: s, beta: s, cutoff: 25 }, 1.0, std::f64::consts::PI).unwrap();
        let expect = [1.0, 1.0, 1.0, -1.0];
        for (o, e) in table.overlaps.iter().zip(expect) {
            assert!((o - C64::new(e, 0.0)).norm() < 1e-8, "{o}");
        }
        assert!(table.truncation < 1e-8);
    }

    proptest! {
        #[test]
        fn family_members_are_involutions(k in 1usize..=4, extra in 0usize..12) {
            let n = 2 * k - 2 + extra;
            prop_assert!(permutation_p(k, n).unwrap().is_involution());
        }

        #[test]
        fn conjugation_preserves_values(k in 1usize..=4, extra in 0usize..6) {
            let n = (2 * k - 2 + extra).max(1);
            let h = DiagonalInteraction::ideal(n, 1.3);
            let plan = SynthesisPlan::new(n, k).unwrap();
            let hj = conjugated_hamiltonian(&h, &plan, k).unwrap();
            let max = h.values.amax();
            prop_assert!(hj.values.amax() <= max + 1e-12);
            let mut a: Vec<f64> = h.conjugate(&plan.iterations[k - 1].second).unwrap().values.iter().cloned().collect();
            let mut b: Vec<f64> = h.values.iter().cloned().collect();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            prop_assert_eq!(a, b);
        }

        #[test]
        fn cross_kerr_is_diagonal(chi in 0.01f64..1.0, t in 0.0f64..10.0) {
            let table = encoded_gate_demo(&Encoding::Binomial { cutoff: 4 }, chi, t).unwrap();
            // diagonal evolution keeps every product state's norm
            prop_assert!(table.overlaps.iter().all(|o| o.norm() <= 1.0 + 1e-12));
        }
    }
}
