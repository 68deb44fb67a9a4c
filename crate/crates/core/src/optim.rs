//! Derivative-free minimization: Nelder-Mead with bound clipping.

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadOptions {
    /// Initial simplex offsets, one per coordinate.
    pub step: Vec<f64>,
    /// Per-coordinate `(lo, hi)`; trial points are clipped into the box.
    pub bounds: Option<Vec<(f64, f64)>>,
    pub max_evals: usize,
    /// Stop when the spread of simplex values falls below this.
    pub ftol: f64,
    /// Stop when the simplex diameter falls below this.
    pub xtol: f64,
}

impl NelderMeadOptions {
    pub fn new(step: Vec<f64>, max_evals: usize) -> Self {
        Self { step, bounds: None, max_evals, ftol: 1e-14, xtol: 1e-12 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    /// Best value after each iteration.
    pub trace: Vec<f64>,
}

fn clip(x: &mut [f64], bounds: &Option<Vec<(f64, f64)>>) {
    if let Some(b) = bounds {
        for (xi, (lo, hi)) in x.iter_mut().zip(b) {
            *xi = xi.clamp(*lo, *hi);
        }
    }
}

/// Minimize `f` from `x0`. Non-finite objective values are treated as +inf.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> Minimum {
    let n = x0.len();
    assert_eq!(opts.step.len(), n, "one simplex step per coordinate");
    let mut evals = 0;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let mut start = x0.to_vec();
    clip(&mut start, &opts.bounds);
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let v0 = eval(&start, &mut evals);
    simplex.push((start.clone(), v0));
    for i in 0..n {
        let mut x = start.clone();
        x[i] += opts.step[i];
        clip(&mut x, &opts.bounds);
        if x[i] == start[i] {
            // pushed against a bound: step the other way
            x[i] -= 2.0 * opts.step[i];
            clip(&mut x, &opts.bounds);
        }
        let v = eval(&x, &mut evals);
        simplex.push((x, v));
    }

    let mut trace = Vec::new();
    while evals < opts.max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        trace.push(simplex[0].1);
        let spread = simplex[n].1 - simplex[0].1;
        let diameter = simplex
            .iter()
            .skip(1)
            .map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if (spread.is_finite() && spread <= opts.ftol) || diameter <= opts.xtol {
            break;
        }

        let centroid: Vec<f64> =
            (0..n).map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64).collect();
        let toward = |coef: f64| -> Vec<f64> {
            let mut p: Vec<f64> = (0..n).map(|j| centroid[j] + coef * (simplex[n].0[j] - centroid[j])).collect();
            clip(&mut p, &opts.bounds);
            p
        };

        let xr = toward(-1.0);
        let fr = eval(&xr, &mut evals);
        if fr < simplex[0].1 {
            let xe = toward(-2.0);
            let fe = eval(&xe, &mut evals);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[n].1 {
                let x = toward(-0.5);
                let v = eval(&x, &mut evals);
                (x, v)
            } else {
                let x = toward(0.5);
                let v = eval(&x, &mut evals);
                (x, v)
            };
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for item in simplex.iter_mut().skip(1) {
                    let mut x: Vec<f64> = item.0.iter().zip(&best).map(|(a, b)| b + 0.5 * (a - b)).collect();
                    clip(&mut x, &opts.bounds);
                    let v = eval(&x, &mut evals);
                    *item = (x, v);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = simplex.swap_remove(0);
    Minimum { x, value, evaluations: evals, trace }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let m = nelder_mead(f, &[-1.2, 1.0], &NelderMeadOptions::new(vec![0.1, 0.1], 5000));
        assert!((m.x[0] - 1.0).abs() < 1e-5 && (m.x[1] - 1.0).abs() < 1e-5, "{:?}", m.x);
        assert!(m.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn respects_bounds() {
        let f = |x: &[f64]| (x[0] - 3.0).powi(2) + (x[1] + 1.0).powi(2);
        let mut opts = NelderMeadOptions::new(vec![0.2, 0.2], 2000);
        opts.bounds = Some(vec![(-1.0, 1.0), (-1.0, 1.0)]);
        let m = nelder_mead(f, &[0.0, 0.0], &opts);
        assert!((m.x[0] - 1.0).abs() < 1e-6 && (m.x[1] + 1.0).abs() < 1e-6, "{:?}", m.x);
    }

    #[test]
    fn never_worse_than_start() {
        let f = |x: &[f64]| x.iter().map(|v| v.sin()).sum::<f64>();
        let x0 = [0.3, -0.2, 1.0];
        let m = nelder_mead(f, &x0, &NelderMeadOptions::new(vec![0.5; 3], 300));
        assert!(m.value <= f(&x0));
    }
}
