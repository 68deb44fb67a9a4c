//! Adaptive Dormand-Prince 5(4) integration of complex linear systems.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::fock::C64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, max_steps: 5_000_000 }
    }
}

impl OdeOptions {
    pub fn with_rtol(rtol: f64) -> Self {
        Self { rtol, atol: rtol * 1e-2, ..Self::default() }
    }

    /// Both tolerances halved, for convergence checks.
    pub fn halved(&self) -> Self {
        Self { rtol: 0.5 * self.rtol, atol: 0.5 * self.atol, ..*self }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OdeStats {
    pub steps: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order weights are the last row of A; these are fifth minus fourth
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrate `y' = f(t, y)` from `t0` through every time in `stops`
/// (ascending, `>= t0`). Each stop is hit exactly and handed to `observe`;
/// the last stop is the end time. Steps never straddle a stop, so stops double
/// as the breakpoints of a piecewise-smooth right-hand side.
pub fn integrate<F, O>(
    mut f: F,
    t0: f64,
    y0: DVector<C64>,
    stops: &[f64],
    opts: &OdeOptions,
    mut observe: O,
) -> Result<(DVector<C64>, OdeStats)>
where
    F: FnMut(f64, &DVector<C64>, &mut DVector<C64>),
    O: FnMut(f64, &DVector<C64>),
{
    if stops.windows(2).any(|w| w[1] < w[0]) || stops.first().is_some_and(|&s| s < t0) {
        return Err(Error::Integration("stop times must be ascending and not before t0".into()));
    }
    let n = y0.len();
    let mut y = y0;
    let mut t = t0;
    let mut stats = OdeStats::default();
    let mut k: Vec<DVector<C64>> = (0..7).map(|_| DVector::zeros(n)).collect();
    let mut tmp = DVector::zeros(n);
    let mut h = 0.0;
    let mut have_fsal = false;

    for &stop in stops {
        while t < stop {
            if stats.steps + stats.rejected >= opts.max_steps {
                return Err(Error::Integration(format!("step budget exhausted at t = {t}")));
            }
            if !have_fsal {
                f(t, &y, &mut k[0]);
                stats.evaluations += 1;
                have_fsal = true;
            }
            if h == 0.0 {
                h = initial_step(&y, &k[0], opts).min(stop - t);
            }
            let last = h >= stop - t;
            let step = if last { stop - t } else { h };

            for s in 1..7 {
                tmp.copy_from(&y);
                for (j, a) in A[s].iter().enumerate().take(s) {
                    if *a != 0.0 {
                        tmp.axpy(C64::new(step * a, 0.0), &k[j], C64::new(1.0, 0.0));
                    }
                }
                let (_, tail) = k.split_at_mut(s);
                f(t + C[s] * step, &tmp, &mut tail[0]);
                stats.evaluations += 1;
            }
            // tmp now holds the fifth-order solution (stage 7 argument)
            let mut err = 0.0;
            for i in 0..n {
                let mut e = C64::new(0.0, 0.0);
                for (s, w) in E.iter().enumerate() {
                    if *w != 0.0 {
                        e += k[s][i] * *w;
                    }
                }
                let scale = opts.atol + opts.rtol * y[i].norm().max(tmp[i].norm());
                let r = (e * step).norm() / scale;
                err += r * r;
            }
            let err = (err / n.max(1) as f64).sqrt();
            if !err.is_finite() {
                return Err(Error::Integration(format!("non-finite error estimate at t = {t}")));
            }
            if err <= 1.0 {
                t = if last { stop } else { t + step };
                std::mem::swap(&mut y, &mut tmp);
                k.swap(0, 6);
                stats.steps += 1;
                let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last || step >= h {
                    h = step * factor;
                }
            } else {
                stats.rejected += 1;
                h = step * (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
                if h < 1e-14 * stop.abs().max(1.0) {
                    return Err(Error::Integration(format!("step size underflow at t = {t}")));
                }
            }
        }
        observe(stop, &y);
        // the right-hand side may have a kink here
        have_fsal = false;
    }
    Ok((y, stats))
}

fn initial_step(y: &DVector<C64>, dy: &DVector<C64>, opts: &OdeOptions) -> f64 {
    let scale = |v: &DVector<C64>| {
        let s: f64 = v
            .iter()
            .zip(y.iter())
            .map(|(a, b)| (a.norm() / (opts.atol + opts.rtol * b.norm())).powi(2))
            .sum();
        (s / y.len().max(1) as f64).sqrt()
    };
    let d0 = scale(y);
    let d1 = scale(dy);
    if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_phase() {
        // y' = -i w y
        let w = 3.7;
        let y0 = DVector::from_element(1, C64::new(1.0, 0.0));
        let mut seen = Vec::new();
        let (y, stats) = integrate(
            |_, y, dy| dy.copy_from(&(y * C64::new(0.0, -w))),
            0.0,
            y0,
            &[0.5, 1.0, 10.0],
            &OdeOptions::default(),
            |t, _| seen.push(t),
        )
        .unwrap();
        assert_eq!(seen, vec![0.5, 1.0, 10.0]);
        let exact = C64::new(0.0, -w * 10.0).exp();
        assert!((y[0] - exact).norm() < 1e-8, "{}", (y[0] - exact).norm());
        assert!(stats.steps > 10);
    }

    #[test]
    fn kinked_rate() {
        // y' = -i |t - 1| y accumulates phase 1 over [0, 2]
        let y0 = DVector::from_element(1, C64::new(1.0, 0.0));
        let (y, _) = integrate(
            |t, y, dy| dy.copy_from(&(y * C64::new(0.0, -(t - 1.0).abs()))),
            0.0,
            y0,
            &[1.0, 2.0],
            &OdeOptions::default(),
            |_, _| {},
        )
        .unwrap();
        assert!((y[0] - C64::new(0.0, -1.0).exp()).norm() < 1e-9);
    }

    #[test]
    fn rejects_unsorted_stops() {
        let y0 = DVector::from_element(1, C64::new(1.0, 0.0));
        assert!(integrate(|_, _, _| {}, 0.0, y0, &[2.0, 1.0], &OdeOptions::default(), |_, _| {}).is_err());
    }
}
