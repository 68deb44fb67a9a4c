//! Block-wise diagonalization with overlap-based state labeling.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::hamiltonian::{check_model, HamiltonianTerms, MODE_A, MODE_B, MODE_Q};
use super::RqrParams;
use crate::error::{Error, Result};
use crate::fock::{excitation_blocks, mode_op, HilbertSpace, Ket, LadderKind, C64};

/// Minimum squared overlap for a label to be accepted.
pub const ACCEPT_OVERLAP: f64 = 0.5;
/// Two candidates closer than this in squared overlap are ambiguous.
pub const AMBIGUITY_MARGIN: f64 = 0.05;
/// Eigenvalues closer than this (GHz) are treated as one degenerate cluster.
pub const DEGENERACY_TOL: f64 = 1e-9;

/// A named target state used to pick out an eigenvector.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub name: String,
    pub excitation: usize,
    /// Real unit vector in the full space.
    pub vector: DVector<f64>,
}

impl Reference {
    pub fn new(space: &HilbertSpace, name: impl Into<String>, vector: DVector<f64>) -> Result<Self> {
        let name = name.into();
        if vector.len() != space.dim() {
            return Err(Error::DimensionMismatch { expected: space.dim(), found: vector.len() });
        }
        let norm = vector.norm();
        if norm == 0.0 {
            return Err(Error::InvalidParameter(format!("reference {name} is zero")));
        }
        let mut excitation = None;
        for (i, v) in vector.iter().enumerate() {
            if *v != 0.0 {
                let n = space.excitation(i);
                match excitation {
                    None => excitation = Some(n),
                    Some(m) if m != n => {
                        return Err(Error::InvalidParameter(format!(
                            "reference {name} mixes excitation numbers {m} and {n}"
                        )))
                    }
                    _ => {}
                }
            }
        }
        Ok(Self { name, excitation: excitation.unwrap_or(0), vector: vector.unscale(norm) })
    }
}

fn basis_vector(space: &HilbertSpace, n_a: usize, n_b: usize, n_q: usize) -> Result<DVector<f64>> {
    let idx = space
        .index_of(&[n_a, n_q, n_b])
        .ok_or_else(|| Error::Truncation(format!("|{n_a},{n_b},{n_q}> is outside the space")))?;
    let mut v = DVector::zeros(space.dim());
    v[idx] = 1.0;
    Ok(v)
}

/// Name used for bare product states; occupations in the order (n_a, n_b, n_q).
pub fn bare_name(n_a: usize, n_b: usize, n_q: usize) -> String {
    format!("|{n_a},{n_b},{n_q}>")
}

pub fn bare_reference(space: &HilbertSpace, n_a: usize, n_b: usize, n_q: usize) -> Result<Reference> {
    Reference::new(space, bare_name(n_a, n_b, n_q), basis_vector(space, n_a, n_b, n_q)?)
}

/// The ten low-lying large-detuning eigenstates v0..v9 used for the coupling
/// analysis. v9 (a doubly excited coupler) is omitted for a two-level coupler.
pub fn qubit_references(space: &HilbertSpace) -> Result<Vec<Reference>> {
    let s2 = std::f64::consts::SQRT_2;
    let k = |a, b, q| basis_vector(space, a, b, q);
    let mut refs = vec![
        ("v0", k(0, 0, 0)?),
        ("v1", (k(1, 0, 0)? + k(0, 1, 0)?) * FRAC_1_SQRT_2),
        ("v2", (k(1, 0, 0)? - k(0, 1, 0)?) * FRAC_1_SQRT_2),
        ("v3", k(0, 0, 1)?),
        ("v4", (k(2, 0, 0)? + k(0, 2, 0)? + k(1, 1, 0)? * s2) * 0.5),
        ("v5", (k(2, 0, 0)? - k(0, 2, 0)?) * FRAC_1_SQRT_2),
        ("v6", (k(2, 0, 0)? + k(0, 2, 0)? - k(1, 1, 0)? * s2) * 0.5),
        ("v7", (k(1, 0, 1)? + k(0, 1, 1)?) * FRAC_1_SQRT_2),
        ("v8", (k(1, 0, 1)? - k(0, 1, 1)?) * FRAC_1_SQRT_2),
    ];
    if space.modes()[MODE_Q].dim() > 2 {
        refs.push(("v9", k(0, 0, 2)?));
    }
    refs.into_iter().map(|(n, v)| Reference::new(space, n, v)).collect()
}

fn real_op(space: &HilbertSpace, mode: usize, kind: LadderKind) -> Result<DMatrix<f64>> {
    Ok(mode_op(space, mode, kind)?.matrix().map(|z| z.re))
}

/// Product state of the normal modes `c_+- = (a +- b)/sqrt 2` and the coupler.
/// Exact only when the cutoffs hold `n_minus + n_plus` photons.
pub fn normal_mode_reference(space: &HilbertSpace, n_minus: usize, n_plus: usize, n_q: usize) -> Result<Reference> {
    let ad = real_op(space, MODE_A, LadderKind::Raise)?;
    let bd = real_op(space, MODE_B, LadderKind::Raise)?;
    let c_plus = (&ad + &bd) * FRAC_1_SQRT_2;
    let c_minus = (&ad - &bd) * FRAC_1_SQRT_2;
    let mut v = basis_vector(space, 0, 0, n_q)?;
    for _ in 0..n_minus {
        v = &c_minus * v;
    }
    for _ in 0..n_plus {
        v = &c_plus * v;
    }
    let total = n_minus + n_plus;
    if space.modes()[MODE_A].cutoff < total || space.modes()[MODE_B].cutoff < total {
        return Err(Error::Truncation(format!("normal-mode state needs cutoff >= {total}")));
    }
    Reference::new(space, format!("|{n_minus},{n_plus},{n_q}>_nm"), v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Lower,
    Upper,
}

/// Analytic dressed state of the ideal ladder: `cos t|n_-,n_+,0> - sin t|n_-,n_+-1,1>`
/// (lower) or `sin t|n_-,n_+,0> + cos t|n_-,n_+-1,1>` (upper).
pub fn dressed_reference(
    space: &HilbertSpace,
    theta: f64,
    n_minus: usize,
    n_plus: usize,
    branch: Branch,
) -> Result<Reference> {
    if n_plus == 0 {
        return normal_mode_reference(space, n_minus, 0, 0);
    }
    let bright = normal_mode_reference(space, n_minus, n_plus, 0)?.vector;
    let excited = normal_mode_reference(space, n_minus, n_plus - 1, 1)?.vector;
    let (c, s) = (theta.cos(), theta.sin());
    let (v, tag) = match branch {
        Branch::Lower => (bright * c - excited * s, "-"),
        Branch::Upper => (bright * s + excited * c, "+"),
    };
    Reference::new(space, format!("psi{tag}({n_minus},{n_plus})"), v)
}

/// Eigen-decomposition of one excitation block.
#[derive(Debug, Clone)]
pub struct BlockEigen {
    pub excitation: usize,
    pub indices: Vec<usize>,
    /// Lab-frame energies in GHz, ascending.
    pub energies: Vec<f64>,
    /// Columns are eigenvectors in the block basis.
    pub vectors: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct LabeledState {
    pub name: String,
    pub excitation: usize,
    /// Lab-frame energy in GHz.
    pub energy: f64,
    /// Squared overlap with the reference that selected it.
    pub overlap: f64,
    /// Position in the ascending list of all computed eigenvalues.
    pub eigen_index: usize,
    /// Real unit vector in the full space, sign fixed by the reference.
    pub vector: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct Spectrum {
    pub params: RqrParams,
    space: HilbertSpace,
    blocks: Vec<BlockEigen>,
    eigenvalues: Vec<f64>,
    labels: Vec<LabeledState>,
    /// Labels that were rejected (ambiguous, weak or conflicting).
    pub flags: Vec<String>,
}

impl Spectrum {
    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn blocks(&self) -> &[BlockEigen] {
        &self.blocks
    }

    /// All computed eigenvalues (GHz), ascending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn labels(&self) -> &[LabeledState] {
        &self.labels
    }

    pub fn label(&self, name: &str) -> Result<&LabeledState> {
        self.labels
            .iter()
            .find(|l| l.name == name)
            .ok_or_else(|| Error::MissingLabel(name.to_string()))
    }

    pub fn energy(&self, name: &str) -> Result<f64> {
        Ok(self.label(name)?.energy)
    }

    pub fn ket(&self, name: &str) -> Result<Ket> {
        let v = &self.label(name)?.vector;
        Ket::from_raw(&self.space, v.map(|x| C64::new(x, 0.0)))
    }

    /// The labeled states as references for the next continuation step.
    pub fn references(&self) -> Vec<Reference> {
        self.labels
            .iter()
            .map(|l| Reference { name: l.name.clone(), excitation: l.excitation, vector: l.vector.clone() })
            .collect()
    }
}

/// Reusable solver for one Hilbert space.
#[derive(Debug, Clone)]
pub struct SpectrumSolver {
    terms: HamiltonianTerms,
    blocks: Vec<Vec<usize>>,
}

impl SpectrumSolver {
    pub fn new(space: &HilbertSpace) -> Result<Self> {
        Ok(Self { terms: HamiltonianTerms::new(space)?, blocks: excitation_blocks(space) })
    }

    pub fn space(&self) -> &HilbertSpace {
        self.terms.space()
    }

    /// Diagonalize every block with excitation `<= max_excitation`.
    pub fn diagonalize_blocks(&self, params: &RqrParams, max_excitation: usize) -> Result<Vec<BlockEigen>> {
        check_model(params, self.space())?;
        let frame = params.mean_resonator();
        let h = self.terms.assemble_ghz(params, frame);
        Ok(self
            .blocks
            .iter()
            .enumerate()
            .take(max_excitation + 1)
            .map(|(n, idx)| {
                let sub = DMatrix::from_fn(idx.len(), idx.len(), |i, j| h[(idx[i], idx[j])]);
                let eig = SymmetricEigen::new(sub);
                let mut order: Vec<usize> = (0..idx.len()).collect();
                order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
                let shift = frame * n as f64;
                BlockEigen {
                    excitation: n,
                    indices: idx.clone(),
                    energies: order.iter().map(|&i| eig.eigenvalues[i] + shift).collect(),
                    vectors: DMatrix::from_fn(idx.len(), idx.len(), |r, c| eig.eigenvectors[(r, order[c])]),
                }
            })
            .collect())
    }

    /// Diagonalize and label against `refs`. Only blocks holding a reference
    /// are diagonalized, unless `refs` is empty.
    pub fn diagonalize(&self, params: &RqrParams, refs: &[Reference]) -> Result<Spectrum> {
        let max = if refs.is_empty() {
            self.blocks.len() - 1
        } else {
            refs.iter().map(|r| r.excitation).max().unwrap_or(0)
        };
        let blocks = self.diagonalize_blocks(params, max)?;
        let (labels, flags) = label_blocks(self.space().dim(), &blocks, refs);
        let mut eigenvalues: Vec<f64> = blocks.iter().flat_map(|b| b.energies.iter().cloned()).collect();
        eigenvalues.sort_by(f64::total_cmp);
        Ok(Spectrum { params: *params, space: self.space().clone(), blocks, eigenvalues, labels, flags })
    }
}

/// Diagonalize and label every eigenvector by its dominant bare product state.
pub fn diagonalize_labeled(params: &RqrParams, space: &HilbertSpace) -> Result<Spectrum> {
    let refs: Vec<Reference> = (0..space.dim())
        .map(|i| {
            let t = space.tuple_of(i);
            bare_reference(space, t[MODE_A], t[MODE_B], t[MODE_Q])
        })
        .collect::<Result<_>>()?;
    SpectrumSolver::new(space)?.diagonalize(params, &refs)
}

/// Diagonalize and label against caller-supplied references.
pub fn diagonalize_with_references(params: &RqrParams, space: &HilbertSpace, refs: &[Reference]) -> Result<Spectrum> {
    SpectrumSolver::new(space)?.diagonalize(params, refs)
}

fn clusters(energies: &[f64]) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    for (i, e) in energies.iter().enumerate() {
        match out.last_mut() {
            Some(c) if (e - energies[*c.last().unwrap()]).abs() < DEGENERACY_TOL => c.push(i),
            _ => out.push(vec![i]),
        }
    }
    out
}

/// Symmetric (Loewdin) orthonormalization of the columns of `y`.
fn loewdin(y: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let s = y.transpose() * y;
    let eig = SymmetricEigen::new(s);
    if eig.eigenvalues.iter().any(|&l| l < 1e-12) {
        return None;
    }
    let inv_sqrt = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()))
        * eig.eigenvectors.transpose();
    Some(y * inv_sqrt)
}

struct Candidate {
    reference: usize,
    cluster: usize,
    weight: f64,
}

fn label_blocks(dim: usize, blocks: &[BlockEigen], refs: &[Reference]) -> (Vec<LabeledState>, Vec<String>) {
    let mut labels = Vec::new();
    let mut flags = Vec::new();

    // global eigen index of (block, column)
    let mut all: Vec<(f64, usize, usize)> = blocks
        .iter()
        .enumerate()
        .flat_map(|(b, blk)| blk.energies.iter().enumerate().map(move |(c, &e)| (e, b, c)))
        .collect();
    all.sort_by(|x, y| x.0.total_cmp(&y.0));
    let global = |b: usize, c: usize| all.iter().position(|&(_, bb, cc)| bb == b && cc == c).unwrap();

    for (b, blk) in blocks.iter().enumerate() {
        let mine: Vec<usize> = (0..refs.len()).filter(|&r| refs[r].excitation == blk.excitation).collect();
        if mine.is_empty() {
            continue;
        }
        let cl = clusters(&blk.energies);
        let local: Vec<DVector<f64>> = mine
            .iter()
            .map(|&r| DVector::from_iterator(blk.indices.len(), blk.indices.iter().map(|&i| refs[r].vector[i])))
            .collect();

        let mut cands = Vec::new();
        for (k, x) in local.iter().enumerate() {
            let proj = blk.vectors.transpose() * x;
            let mut weights: Vec<(usize, f64)> = cl
                .iter()
                .enumerate()
                .map(|(ci, cols)| (ci, cols.iter().map(|&c| proj[c] * proj[c]).sum()))
                .collect();
            weights.sort_by(|p, q| q.1.total_cmp(&p.1));
            let (best, w) = weights[0];
            let second = weights.get(1).map_or(0.0, |p| p.1);
            let name = &refs[mine[k]].name;
            if w < ACCEPT_OVERLAP {
                flags.push(format!("{name}: best overlap {w:.3} below {ACCEPT_OVERLAP}"));
            } else if w - second < AMBIGUITY_MARGIN {
                flags.push(format!("{name}: ambiguous ({w:.3} vs {second:.3})"));
            } else {
                cands.push(Candidate { reference: k, cluster: best, weight: w });
            }
        }

        for (ci, cols) in cl.iter().enumerate() {
            let mut here: Vec<&Candidate> = cands.iter().filter(|c| c.cluster == ci).collect();
            if here.is_empty() {
                continue;
            }
            here.sort_by(|p, q| q.weight.total_cmp(&p.weight));
            for extra in here.iter().skip(cols.len()) {
                flags.push(format!("{}: eigenvector already claimed", refs[mine[extra.reference]].name));
            }
            here.truncate(cols.len());

            let vc = DMatrix::from_fn(blk.indices.len(), cols.len(), |r, c| blk.vectors[(r, cols[c])]);
            let y = DMatrix::from_columns(
                &here.iter().map(|c| &vc * (vc.transpose() * &local[c.reference])).collect::<Vec<_>>(),
            );
            let Some(orth) = loewdin(&y) else {
                for c in &here {
                    flags.push(format!("{}: degenerate references collapse", refs[mine[c.reference]].name));
                }
                continue;
            };
            let energy = cols.iter().map(|&c| blk.energies[c]).sum::<f64>() / cols.len() as f64;
            for (slot, c) in here.iter().enumerate() {
                let mut col = orth.column(slot).into_owned();
                let dot = col.dot(&local[c.reference]);
                if dot < 0.0 {
                    col = -col;
                }
                let mut full = DVector::zeros(dim);
                for (r, &i) in blk.indices.iter().enumerate() {
                    full[i] = col[r];
                }
                labels.push(LabeledState {
                    name: refs[mine[c.reference]].name.clone(),
                    excitation: blk.excitation,
                    energy,
                    overlap: dot * dot,
                    eigen_index: global(b, cols[slot]),
                    vector: full,
                });
            }
        }
    }
    (labels, flags)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rqr::analytic::{jc_spectrum_analytic, jc_unpaired_energy};
    use approx::assert_abs_diff_eq;

    #[test]
    fn uncoupled_labels_exact() {
        let space = HilbertSpace::rqr(2, 3).unwrap();
        let p = RqrParams { g_a: 0.0, g_b: 0.0, g_ab: 0.0, nu_b: 7.3, ..RqrParams::reference(8.0) };
        let s = diagonalize_labeled(&p, &space).unwrap();
        assert!(s.flags.is_empty(), "{:?}", s.flags);
        assert_eq!(s.labels().len(), space.dim());
        for l in s.labels() {
            assert_abs_diff_eq!(l.overlap, 1.0, epsilon = 1e-14);
        }
        assert_abs_diff_eq!(s.energy("|1,1,1>").unwrap(), 7.0 + 7.3 + 8.0, epsilon = 1e-12);
    }

    #[test]
    fn large_detuning_qubit_states() {
        let space = HilbertSpace::rqr(2, 3).unwrap();
        let s = diagonalize_with_references(&RqrParams::reference(12.0), &space, &qubit_references(&space).unwrap())
            .unwrap();
        assert!(s.flags.is_empty(), "{:?}", s.flags);
        assert!(s.label("v1").unwrap().overlap > 0.99);
        assert!(s.label("v5").unwrap().overlap > 0.99);
    }

    #[test]
    fn degenerate_block_is_resolved() {
        // nu_q = 7 + g^2/g_ab - g_ab makes v1 and v2 exactly degenerate
        let space = HilbertSpace::rqr(2, 3).unwrap();
        let refs = qubit_references(&space).unwrap();
        let near = diagonalize_with_references(&RqrParams::reference(8.1), &space, &refs).unwrap();
        let s = diagonalize_with_references(&RqrParams::reference(7.99), &space, &near.references()).unwrap();
        let v1 = s.label("v1").unwrap();
        let v2 = s.label("v2").unwrap();
        assert!(v1.vector.dot(&v2.vector).abs() < 1e-12);
        assert_abs_diff_eq!(v1.energy, v2.energy, epsilon = 1e-9);
        assert_ne!(v1.eigen_index, v2.eigen_index);
    }

    #[test]
    fn matches_closed_form_ladder() {
        let space = HilbertSpace::rqr(5, 2).unwrap();
        for nu_q in [7.0, 7.4, 8.3] {
            let p = RqrParams::symmetric(7.0, nu_q, 0.3, 0.1, 0.0, 2);
            let blocks = SpectrumSolver::new(&space).unwrap().diagonalize_blocks(&p, 5).unwrap();
            for blk in &blocks {
                let n = blk.excitation;
                let mut expect = vec![jc_unpaired_energy(&p, n).unwrap()];
                for np in 1..=n {
                    let d = jc_spectrum_analytic(&p, n - np, np).unwrap();
                    expect.push(d.e_minus);
                    expect.push(d.e_plus);
                }
                expect.sort_by(f64::total_cmp);
                assert_eq!(expect.len(), blk.energies.len());
                for (a, b) in expect.iter().zip(&blk.energies) {
                    assert!((a - b).abs() < 1e-12, "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn rejects_mixed_reference() {
        let space = HilbertSpace::rqr(2, 3).unwrap();
        let v = basis_vector(&space, 1, 0, 0).unwrap() + basis_vector(&space, 0, 0, 0).unwrap();
        assert!(Reference::new(&space, "bad", v).is_err());
    }
}
