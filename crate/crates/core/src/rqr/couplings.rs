//! Effective qubit-qubit couplings of the single- and double-excitation
//! manifolds, and their dependence on the coupler frequency.

use serde::Serialize;

use super::spectrum::{qubit_references, Reference, Spectrum, SpectrumSolver};
use super::RqrParams;
use crate::error::{Error, Result};
use crate::fock::HilbertSpace;

/// Effective couplings in GHz at one coupler frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CouplingSummary {
    pub omega01: f64,
    pub g1: f64,
    pub g2: f64,
    pub gz: f64,
}

/// `g1 = (E2 - E1)/2`, `g2 = (E6 - E4)/4`, `gz = E6/2 + E4/2 + E0 - E1 - E2`.
pub fn effective_couplings(spectrum: &Spectrum) -> Result<CouplingSummary> {
    let e = |n: &str| spectrum.energy(n);
    let (e0, e1, e2, e4, e6) = (e("v0")?, e("v1")?, e("v2")?, e("v4")?, e("v6")?);
    Ok(CouplingSummary {
        omega01: spectrum.params.nu_q,
        g1: 0.5 * (e2 - e1),
        g2: 0.25 * (e6 - e4),
        gz: 0.5 * e6 + 0.5 * e4 + e0 - e1 - e2,
    })
}

/// Smallest space that holds the zero-, one- and two-excitation blocks exactly.
pub fn coupling_space(params: &RqrParams) -> Result<HilbertSpace> {
    HilbertSpace::rqr(2, params.coupler_levels)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow {
    pub omega01: f64,
    pub summary: Option<CouplingSummary>,
    /// Why the point was skipped, if it was.
    pub flag: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingScan {
    pub rows: Vec<ScanRow>,
    /// Refined point where |g1| + |g2| is smallest.
    pub idle: Option<CouplingSummary>,
    /// `max |g1|` over the scan divided by `|gz|` at the idle point.
    pub on_off_ratio: Option<f64>,
    /// Largest `|g1|` or `|g2|` seen on the grid.
    pub max_coupling: f64,
}

impl CouplingScan {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.summary.is_none()).count()
    }
}

const REQUIRED: [&str; 5] = ["v0", "v1", "v2", "v4", "v6"];

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty coupler-frequency grid".into()));
    }
    if grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("non-finite grid point".into()));
    }
    let up = grid.windows(2).all(|w| w[1] > w[0]);
    let down = grid.windows(2).all(|w| w[1] < w[0]);
    if !(up || down) {
        return Err(Error::InvalidParameter("grid must be strictly monotone".into()));
    }
    Ok(())
}

/// Replace the references that were relabeled, keep the rest.
fn merge(previous: &[Reference], spectrum: &Spectrum) -> Vec<Reference> {
    let fresh = spectrum.references();
    previous
        .iter()
        .map(|r| fresh.iter().find(|f| f.name == r.name).cloned().unwrap_or_else(|| r.clone()))
        .collect()
}

fn evaluate(
    solver: &SpectrumSolver,
    params: &RqrParams,
    refs: &[Reference],
) -> std::result::Result<(CouplingSummary, Spectrum), String> {
    let s = solver.diagonalize(params, refs).map_err(|e| e.to_string())?;
    if let Some(missing) = REQUIRED.iter().find(|n| s.label(n).is_err()) {
        let why = s.flags.iter().find(|f| f.starts_with(*missing)).cloned();
        return Err(why.unwrap_or_else(|| format!("{missing}: unlabeled")));
    }
    let c = effective_couplings(&s).map_err(|e| e.to_string())?;
    Ok((c, s))
}

/// Effective couplings over a monotone grid of coupler frequencies (GHz).
///
/// Labels start from the large-detuning states v0..v9 at whichever grid end
/// is farther from the resonators and are carried point to point by overlap.
/// Points where a needed label cannot be followed are flagged and skipped.
pub fn scan_couplings(params_base: &RqrParams, grid: &[f64]) -> Result<CouplingScan> {
    params_base.validate()?;
    check_grid(grid)?;
    let space = coupling_space(params_base)?;
    let solver = SpectrumSolver::new(&space)?;

    let mut order: Vec<usize> = (0..grid.len()).collect();
    let det = |x: f64| (x - params_base.mean_resonator()).abs();
    if det(grid[0]) < det(grid[grid.len() - 1]) {
        order.reverse();
    }

    let mut refs = qubit_references(&space)?;
    let mut rows: Vec<Option<ScanRow>> = vec![None; grid.len()];
    let mut row_refs: Vec<Option<Vec<Reference>>> = vec![None; grid.len()];
    for &i in &order {
        let p = params_base.with_nu_q(grid[i]);
        match evaluate(&solver, &p, &refs) {
            Ok((c, s)) => {
                refs = merge(&refs, &s);
                row_refs[i] = Some(refs.clone());
                rows[i] = Some(ScanRow { omega01: grid[i], summary: Some(c), flag: None });
            }
            Err(why) => {
                log::warn!("coupling scan: skipping nu_q = {} GHz ({why})", grid[i]);
                rows[i] = Some(ScanRow { omega01: grid[i], summary: None, flag: Some(why) });
            }
        }
    }
    let rows: Vec<ScanRow> = rows.into_iter().map(|r| r.expect("every grid point visited")).collect();

    let max_coupling = rows
        .iter()
        .filter_map(|r| r.summary)
        .map(|c| c.g1.abs().max(c.g2.abs()))
        .fold(0.0, f64::max);
    let max_g1 = rows.iter().filter_map(|r| r.summary).map(|c| c.g1.abs()).fold(0.0, f64::max);

    let score = |c: &CouplingSummary| c.g1.abs() + c.g2.abs();
    let best = rows
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.summary.map(|c| (i, c)))
        .min_by(|a, b| score(&a.1).total_cmp(&score(&b.1)));

    let idle = best.map(|(i, c)| {
        let lo = grid[i.saturating_sub(1)];
        let hi = grid[(i + 1).min(grid.len() - 1)];
        let refs = row_refs[i].as_ref().expect("labeled row keeps its references");
        refine_idle(&solver, params_base, refs, lo.min(hi), lo.max(hi))
            .filter(|r| score(r) < score(&c))
            .unwrap_or(c)
    });
    let on_off_ratio = idle.and_then(|c| (c.gz != 0.0).then(|| max_g1 / c.gz.abs()));
    Ok(CouplingScan { rows, idle, on_off_ratio, max_coupling })
}

/// Golden-section search for the minimum of |g1| + |g2| on `[lo, hi]`.
fn refine_idle(
    solver: &SpectrumSolver,
    base: &RqrParams,
    refs: &[Reference],
    mut lo: f64,
    mut hi: f64,
) -> Option<CouplingSummary> {
    if hi <= lo {
        return None;
    }
    let eval = |x: f64| evaluate(solver, &base.with_nu_q(x), refs).ok().map(|(c, _)| c);
    let f = |c: &Option<CouplingSummary>| c.map_or(f64::INFINITY, |c| c.g1.abs() + c.g2.abs());
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut c1, mut c2) = (eval(x1), eval(x2));
    while hi - lo > 1e-9 {
        if f(&c1) < f(&c2) {
            hi = x2;
            x2 = x1;
            c2 = c1;
            x1 = hi - ratio * (hi - lo);
            c1 = eval(x1);
        } else {
            lo = x1;
            x1 = x2;
            c1 = c2;
            x2 = lo + ratio * (hi - lo);
            c2 = eval(x2);
        }
    }
    if f(&c1) < f(&c2) {
        c1
    } else {
        c2
    }
}

/// Uniform grid from `start` to `stop` inclusive with `points` entries.
pub fn linear_grid(start: f64, stop: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..points).map(|i| start + (stop - start) * i as f64 / (points - 1) as f64).collect(),
    }
}
