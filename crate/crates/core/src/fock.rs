//! Truncated Fock spaces for two resonators and a few-level coupler.
//!
//! Basis states are occupation tuples ordered lexicographically with the last
//! mode varying fastest. The RQR layout used throughout the crate is
//! `[a, coupler, b]`, so a serialized state vector indexes as
//! `(n_a * dim_q + n_q) * dim_b + n_b`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// What kind of degree of freedom a mode is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeKind {
    Bosonic,
    Coupler,
}

/// One tensor factor. `cutoff` is the highest occupation kept, so the factor
/// has `cutoff + 1` levels (a qubit coupler has cutoff 1, a qutrit cutoff 2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeSpec {
    pub kind: ModeKind,
    pub cutoff: usize,
}

impl ModeSpec {
    pub fn bosonic(cutoff: usize) -> Self {
        Self { kind: ModeKind::Bosonic, cutoff }
    }

    /// Coupler with `levels` levels.
    pub fn coupler(levels: usize) -> Self {
        Self { kind: ModeKind::Coupler, cutoff: levels.saturating_sub(1) }
    }

    pub fn dim(&self) -> usize {
        self.cutoff + 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HilbertSpace {
    modes: Vec<ModeSpec>,
    dims: Vec<usize>,
    strides: Vec<usize>,
    dim: usize,
}

/// Build a product space from an ordered list of modes.
pub fn make_space(modes: Vec<ModeSpec>) -> Result<HilbertSpace> {
    HilbertSpace::new(modes)
}

impl HilbertSpace {
    pub fn new(modes: Vec<ModeSpec>) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::EmptySpace);
        }
        if let Some((index, m)) = modes.iter().enumerate().find(|(_, m)| m.cutoff < 1) {
            return Err(Error::InvalidCutoff { index, cutoff: m.cutoff });
        }
        let dims: Vec<usize> = modes.iter().map(ModeSpec::dim).collect();
        let mut strides = vec![1; dims.len()];
        for k in (0..dims.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * dims[k + 1];
        }
        let dim = dims.iter().product();
        Ok(Self { modes, dims, strides, dim })
    }

    /// The `[a, coupler, b]` space with equal resonator cutoffs.
    pub fn rqr(resonator_cutoff: usize, coupler_levels: usize) -> Result<Self> {
        Self::new(vec![
            ModeSpec::bosonic(resonator_cutoff),
            ModeSpec::coupler(coupler_levels),
            ModeSpec::bosonic(resonator_cutoff),
        ])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn modes(&self) -> &[ModeSpec] {
        &self.modes
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn index_of(&self, occupation: &[usize]) -> Option<usize> {
        if occupation.len() != self.dims.len() {
            return None;
        }
        let mut idx = 0;
        for ((&n, &d), &s) in occupation.iter().zip(&self.dims).zip(&self.strides) {
            if n >= d {
                return None;
            }
            idx += n * s;
        }
        Some(idx)
    }

    pub fn tuple_of(&self, index: usize) -> Vec<usize> {
        self.dims
            .iter()
            .zip(&self.strides)
            .map(|(&d, &s)| (index / s) % d)
            .collect()
    }

    /// Total excitation number of a basis state.
    pub fn excitation(&self, index: usize) -> usize {
        self.tuple_of(index).iter().sum()
    }

    /// Largest total excitation whose block is not cut by any truncation.
    pub fn complete_excitation(&self) -> usize {
        self.modes.iter().map(|m| m.cutoff).min().unwrap_or(0)
    }

    fn check_mode(&self, index: usize) -> Result<()> {
        if index >= self.modes.len() {
            return Err(Error::InvalidModeIndex { index, modes: self.modes.len() });
        }
        Ok(())
    }
}

/// Partition of the basis by total excitation `sum(occupation)`; entry `n`
/// lists the basis indices of the block with `n` excitations.
pub fn excitation_blocks(space: &HilbertSpace) -> Vec<Vec<usize>> {
    let max: usize = space.modes.iter().map(|m| m.cutoff).sum();
    let mut blocks = vec![Vec::new(); max + 1];
    for i in 0..space.dim() {
        blocks[space.excitation(i)].push(i);
    }
    blocks
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LadderKind {
    Lower,
    Raise,
    Number,
}

/// A dense operator in the fixed product basis of `space`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearOp {
    space: HilbertSpace,
    matrix: DMatrix<C64>,
}

impl LinearOp {
    pub fn new(space: HilbertSpace, matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != space.dim() || matrix.ncols() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                found: matrix.nrows().max(matrix.ncols()),
            });
        }
        Ok(Self { space, matrix })
    }

    pub fn identity(space: &HilbertSpace) -> Self {
        let d = space.dim();
        Self { space: space.clone(), matrix: DMatrix::identity(d, d) }
    }

    pub fn zeros(space: &HilbertSpace) -> Self {
        let d = space.dim();
        Self { space: space.clone(), matrix: DMatrix::zeros(d, d) }
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn adjoint(&self) -> Self {
        Self { space: self.space.clone(), matrix: self.matrix.adjoint() }
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self { space: self.space.clone(), matrix: self.matrix.scale(factor) }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { space: self.space.clone(), matrix: &self.matrix + &other.matrix }
    }

    pub fn compose(&self, other: &Self) -> Self {
        Self { space: self.space.clone(), matrix: &self.matrix * &other.matrix }
    }

    pub fn commutator(&self, other: &Self) -> Self {
        Self {
            space: self.space.clone(),
            matrix: &self.matrix * &other.matrix - &other.matrix * &self.matrix,
        }
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        (&self.matrix - self.matrix.adjoint()).iter().all(|z| z.norm() <= tol)
    }

    /// Submatrix on the given basis indices.
    pub fn restrict(&self, indices: &[usize]) -> DMatrix<C64> {
        DMatrix::from_fn(indices.len(), indices.len(), |i, j| self.matrix[(indices[i], indices[j])])
    }

    /// Real part of the submatrix, for Hamiltonians that are real in the Fock basis.
    pub fn restrict_real(&self, indices: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(indices.len(), indices.len(), |i, j| self.matrix[(indices[i], indices[j])].re)
    }
}

fn single_mode(spec: &ModeSpec, kind: LadderKind) -> DMatrix<f64> {
    let d = spec.dim();
    let mut m = DMatrix::zeros(d, d);
    for n in 1..d {
        let amp = (n as f64).sqrt();
        match kind {
            LadderKind::Lower => m[(n - 1, n)] = amp,
            LadderKind::Raise => m[(n, n - 1)] = amp,
            LadderKind::Number => m[(n, n)] = n as f64,
        }
    }
    m
}

/// Ladder or number operator of one mode embedded in the product space.
///
/// The coupler lowering operator is `|0><1| + sqrt(2)|1><2| + ...`, i.e. the
/// same ladder as a truncated oscillator.
pub fn mode_op(space: &HilbertSpace, mode_index: usize, kind: LadderKind) -> Result<LinearOp> {
    space.check_mode(mode_index)?;
    let local = single_mode(&space.modes[mode_index], kind);
    let stride = space.strides[mode_index];
    let d = space.dims[mode_index];
    let dim = space.dim();
    let mut m = DMatrix::<C64>::zeros(dim, dim);
    for col in 0..dim {
        let n = (col / stride) % d;
        for row_local in 0..d {
            let v = local[(row_local, n)];
            if v != 0.0 {
                let row = col + row_local * stride - n * stride;
                m[(row, col)] = C64::new(v, 0.0);
            }
        }
    }
    Ok(LinearOp { space: space.clone(), matrix: m })
}

/// Diagonal total-excitation operator.
pub fn total_number(space: &HilbertSpace) -> LinearOp {
    let d = space.dim();
    let mut m = DMatrix::<C64>::zeros(d, d);
    for i in 0..d {
        m[(i, i)] = C64::new(space.excitation(i) as f64, 0.0);
    }
    LinearOp { space: space.clone(), matrix: m }
}

/// Normalized pure state.
#[derive(Debug, Clone, PartialEq)]
pub struct Ket {
    space: HilbertSpace,
    data: DVector<C64>,
}

impl Ket {
    /// Normalizes `data`; fails on the zero vector.
    pub fn new(space: &HilbertSpace, data: DVector<C64>) -> Result<Self> {
        if data.len() != space.dim() {
            return Err(Error::DimensionMismatch { expected: space.dim(), found: data.len() });
        }
        let norm = data.norm();
        if norm < 1e-300 || !norm.is_finite() {
            return Err(Error::InvalidParameter("cannot normalize a zero state".into()));
        }
        Ok(Self { space: space.clone(), data: data.unscale(norm) })
    }

    /// Wrap without renormalizing (propagated states).
    pub fn from_raw(space: &HilbertSpace, data: DVector<C64>) -> Result<Self> {
        if data.len() != space.dim() {
            return Err(Error::DimensionMismatch { expected: space.dim(), found: data.len() });
        }
        Ok(Self { space: space.clone(), data })
    }

    pub fn basis(space: &HilbertSpace, occupation: &[usize]) -> Result<Self> {
        let idx = space.index_of(occupation).ok_or_else(|| {
            Error::InvalidParameter(format!("occupation {occupation:?} not in space"))
        })?;
        let mut data = DVector::zeros(space.dim());
        data[idx] = C64::new(1.0, 0.0);
        Ok(Self { space: space.clone(), data })
    }

    /// Product of per-mode amplitude vectors (each renormalized).
    pub fn product(space: &HilbertSpace, factors: &[Vec<C64>]) -> Result<Self> {
        if factors.len() != space.dims.len() {
            return Err(Error::DimensionMismatch { expected: space.dims.len(), found: factors.len() });
        }
        for (f, &d) in factors.iter().zip(&space.dims) {
            if f.len() != d {
                return Err(Error::DimensionMismatch { expected: d, found: f.len() });
            }
        }
        let data = DVector::from_fn(space.dim(), |i, _| {
            space
                .tuple_of(i)
                .iter()
                .zip(factors)
                .map(|(&n, f)| f[n])
                .product::<C64>()
        });
        Self::new(space, data)
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn data(&self) -> &DVector<C64> {
        &self.data
    }

    pub fn norm(&self) -> f64 {
        self.data.norm()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Ket) -> C64 {
        self.data.dotc(&other.data)
    }

    pub fn expectation(&self, op: &LinearOp) -> C64 {
        self.data.dotc(&(op.matrix() * &self.data))
    }

    /// Probability weight on the listed basis indices.
    pub fn weight_on(&self, indices: &[usize]) -> f64 {
        indices.iter().map(|&i| self.data[i].norm_sqr()).sum()
    }
}

/// Truncated coherent-state amplitudes `e^{-|a|^2/2} a^n / sqrt(n!)` for
/// `n = 0..=cutoff`, not renormalized.
pub fn coherent_amplitudes(cutoff: usize, alpha: C64) -> Vec<C64> {
    let mut amps = Vec::with_capacity(cutoff + 1);
    let mut c = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    amps.push(c);
    for n in 1..=cutoff {
        c = c * alpha / (n as f64).sqrt();
        amps.push(c);
    }
    amps
}

fn vacuum_factors(space: &HilbertSpace) -> Vec<Vec<C64>> {
    space
        .dims
        .iter()
        .map(|&d| {
            let mut v = vec![C64::new(0.0, 0.0); d];
            v[0] = C64::new(1.0, 0.0);
            v
        })
        .collect()
}

fn warn_truncation(space: &HilbertSpace, mode: usize, alpha: C64) {
    let cutoff = space.modes[mode].cutoff as f64;
    if alpha.norm_sqr() > cutoff / 2.0 {
        log::warn!(
            "coherent amplitude |alpha|^2 = {:.3} exceeds cutoff/2 = {:.1}; state renormalized after truncation",
            alpha.norm_sqr(),
            cutoff / 2.0
        );
    }
}

/// Coherent state in one mode, vacuum elsewhere, renormalized after truncation.
pub fn coherent_state(space: &HilbertSpace, mode_index: usize, amplitude: C64) -> Result<Ket> {
    space.check_mode(mode_index)?;
    warn_truncation(space, mode_index, amplitude);
    let mut factors = vacuum_factors(space);
    factors[mode_index] = coherent_amplitudes(space.modes[mode_index].cutoff, amplitude);
    Ket::product(space, &factors)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

/// Single-mode cat amplitudes `N(|a> +- |-a>)`, normalized.
pub fn cat_amplitudes(cutoff: usize, alpha: C64, parity: Parity) -> Vec<C64> {
    let amps: Vec<C64> = coherent_amplitudes(cutoff, alpha)
        .into_iter()
        .enumerate()
        .map(|(n, c)| match (parity, n % 2) {
            (Parity::Even, 0) | (Parity::Odd, 1) => c,
            _ => C64::new(0.0, 0.0),
        })
        .collect();
    let norm = amps.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    amps.into_iter().map(|c| c / norm).collect()
}

/// Cat state `N(|a> + |-a>)` (even) or `N(|a> - |-a>)` (odd) in one mode.
pub fn cat_state(space: &HilbertSpace, mode_index: usize, alpha: C64, parity: Parity) -> Result<Ket> {
    space.check_mode(mode_index)?;
    if alpha.norm() == 0.0 && parity == Parity::Odd {
        return Err(Error::InvalidParameter("odd cat state needs a nonzero amplitude".into()));
    }
    warn_truncation(space, mode_index, alpha);
    let mut factors = vacuum_factors(space);
    factors[mode_index] = cat_amplitudes(space.modes[mode_index].cutoff, alpha, parity);
    Ket::product(space, &factors)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    space: HilbertSpace,
    data: DMatrix<C64>,
}

impl DensityMatrix {
    pub fn from_ket(ket: &Ket) -> Self {
        Self { space: ket.space.clone(), data: &ket.data * ket.data.adjoint() }
    }

    /// Validates Hermiticity, unit trace and positivity to `tol`.
    pub fn new(space: &HilbertSpace, data: DMatrix<C64>, tol: f64) -> Result<Self> {
        if data.nrows() != space.dim() || data.ncols() != space.dim() {
            return Err(Error::DimensionMismatch { expected: space.dim(), found: data.nrows() });
        }
        let rho = Self { space: space.clone(), data };
        rho.check(tol)?;
        Ok(rho)
    }

    pub(crate) fn from_raw(space: &HilbertSpace, data: DMatrix<C64>) -> Self {
        Self { space: space.clone(), data }
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn data(&self) -> &DMatrix<C64> {
        &self.data
    }

    pub fn trace(&self) -> f64 {
        self.data.trace().re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.data + self.data.adjoint()).scale(0.5);
        herm.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// `<psi|rho|psi>`.
    pub fn population(&self, psi: &DVector<C64>) -> f64 {
        psi.dotc(&(&self.data * psi)).re
    }

    pub fn check(&self, tol: f64) -> Result<()> {
        let herm_err = (&self.data - self.data.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm_err > tol {
            return Err(Error::Quality(format!("density matrix not Hermitian ({herm_err:.2e})")));
        }
        if (self.trace() - 1.0).abs() > tol {
            return Err(Error::Quality(format!("density matrix trace {}", self.trace())));
        }
        let min = self.min_eigenvalue();
        if min < -tol {
            return Err(Error::Quality(format!("density matrix eigenvalue {min:.2e}")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn three_mode(c: usize, q: usize) -> HilbertSpace {
        HilbertSpace::rqr(c, q + 1).unwrap()
    }

    #[test]
    fn dimensions() {
        assert_eq!(three_mode(1, 1).dim(), 8);
        assert_eq!(three_mode(5, 2).dim(), 108);
        let two = make_space(vec![ModeSpec::bosonic(9), ModeSpec::bosonic(9)]).unwrap();
        assert_eq!(two.dim(), 100);
    }

    #[test]
    fn rejects_bad_modes() {
        assert_eq!(make_space(vec![]), Err(Error::EmptySpace));
        let err = make_space(vec![ModeSpec::bosonic(2), ModeSpec::bosonic(0)]).unwrap_err();
        assert_eq!(err, Error::InvalidCutoff { index: 1, cutoff: 0 });
        let s = three_mode(2, 1);
        assert!(mode_op(&s, 3, LadderKind::Lower).is_err());
    }

    #[test]
    fn ladder_matrix_elements() {
        let s = make_space(vec![ModeSpec::bosonic(2)]).unwrap();
        let a = mode_op(&s, 0, LadderKind::Lower).unwrap();
        assert_abs_diff_eq!(a.matrix()[(1, 2)].re, 2f64.sqrt(), epsilon = 1e-15);

        let q = make_space(vec![ModeSpec::coupler(3)]).unwrap();
        let sigma = mode_op(&q, 0, LadderKind::Lower).unwrap();
        assert_abs_diff_eq!(sigma.matrix()[(0, 1)].re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sigma.matrix()[(1, 2)].re, 2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn number_operator_on_embedded_mode() {
        let s = three_mode(4, 2);
        let n = mode_op(&s, 0, LadderKind::Number).unwrap();
        let ket = Ket::basis(&s, &[3, 1, 2]).unwrap();
        assert_abs_diff_eq!(ket.expectation(&n).re, 3.0, epsilon = 1e-14);
        let raise = mode_op(&s, 0, LadderKind::Raise).unwrap();
        let lower = mode_op(&s, 0, LadderKind::Lower).unwrap();
        assert_abs_diff_eq!((raise.compose(&lower).matrix() - n.matrix()).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn blocks() {
        let s = three_mode(1, 1);
        let blocks = excitation_blocks(&s);
        assert_eq!(blocks[1].len(), 3);
        let s = three_mode(5, 2);
        let blocks = excitation_blocks(&s);
        assert_eq!(blocks[0].len(), 1);
        let mut two: Vec<Vec<usize>> = blocks[2].iter().map(|&i| s.tuple_of(i)).collect();
        two.sort();
        // tuples are (n_a, n_q, n_b)
        assert_eq!(
            two,
            vec![vec![0, 0, 2], vec![0, 1, 1], vec![0, 2, 0], vec![1, 0, 1], vec![1, 1, 0], vec![2, 0, 0]]
        );
        let total: usize = blocks.iter().map(Vec::len).sum();
        assert_eq!(total, s.dim());
    }

    #[test]
    fn coherent_and_cat_states() {
        let s = make_space(vec![ModeSpec::bosonic(20)]).unwrap();
        let vac = coherent_state(&s, 0, C64::new(0.0, 0.0)).unwrap();
        assert_abs_diff_eq!(vac.data()[0].re, 1.0, epsilon = 1e-15);

        // Poisson mean from the truncated weights, the independent route
        let alpha2: f64 = 2.0;
        let mut fact = 1.0;
        let mut mean = 0.0;
        let mut total = 0.0;
        for n in 0..=20 {
            if n > 0 {
                fact *= n as f64;
            }
            let p = (-alpha2).exp() * alpha2.powi(n) / fact;
            mean += n as f64 * p;
            total += p;
        }
        let coh = coherent_state(&s, 0, C64::new(alpha2.sqrt(), 0.0)).unwrap();
        let n = mode_op(&s, 0, LadderKind::Number).unwrap();
        assert_abs_diff_eq!(coh.expectation(&n).re, mean / total, epsilon = 1e-12);
        assert_abs_diff_eq!(coh.expectation(&n).re, 2.0, epsilon = 1e-6);

        let cat = cat_state(&s, 0, C64::new(alpha2.sqrt(), 0.0), Parity::Odd).unwrap();
        let even: Vec<usize> = (0..=20).step_by(2).collect();
        assert!(cat.weight_on(&even) < 1e-10);
        assert_abs_diff_eq!(cat.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn density_matrix_checks() {
        let s = three_mode(1, 1);
        let ket = Ket::basis(&s, &[1, 0, 0]).unwrap();
        let rho = DensityMatrix::from_ket(&ket);
        assert!(rho.check(1e-10).is_ok());
        let bad = rho.data().scale(2.0);
        assert!(DensityMatrix::new(&s, bad, 1e-10).is_err());
    }

    proptest! {
        #[test]
        fn index_tuple_bijection(ca in 1usize..5, cq in 1usize..4, cb in 1usize..5) {
            let s = make_space(vec![ModeSpec::bosonic(ca), ModeSpec::coupler(cq + 1), ModeSpec::bosonic(cb)]).unwrap();
            for i in 0..s.dim() {
                prop_assert_eq!(s.index_of(&s.tuple_of(i)), Some(i));
            }
        }

        #[test]
        fn commutator_identity_below_cutoff(cutoff in 1usize..8) {
            let s = make_space(vec![ModeSpec::bosonic(cutoff)]).unwrap();
            let a = mode_op(&s, 0, LadderKind::Lower).unwrap();
            let ad = mode_op(&s, 0, LadderKind::Raise).unwrap();
            let comm = a.commutator(&ad);
            for n in 0..cutoff {
                prop_assert!((comm.matrix()[(n, n)].re - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn coherent_norm(re in -2.0f64..2.0, im in -2.0f64..2.0) {
            let s = make_space(vec![ModeSpec::bosonic(20)]).unwrap();
            let alpha = C64::new(re, im);
            prop_assume!(alpha.norm_sqr() <= 10.0);
            let k = coherent_state(&s, 0, alpha).unwrap();
            prop_assert!((k.norm() - 1.0).abs() < 1e-10);
        }
    }
}
