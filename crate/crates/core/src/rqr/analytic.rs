//! Closed-form results for the symmetric two-resonator ladder. These serve
//! as oracles for the numerical spectra.
//!
//! Notation: the resonators combine into `c_+ = (a + b)/sqrt(2)`, which couples
//! to the coupler with strength `sqrt(2) g`, and the dark mode `c_-`.

use std::f64::consts::SQRT_2;

use serde::Serialize;

use super::RqrParams;
use crate::error::{Error, Result};

/// Energies of the dressed pair built from `|n_-, n_+, 0>` and `|n_-, n_+ - 1, 1>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JcDoublet {
    pub e_plus: f64,
    pub e_minus: f64,
    /// Mixing angle; the lower state is `cos(theta)|n_+,0> - sin(theta)|n_+ - 1,1>`.
    pub theta: f64,
}

/// `theta_n = atan2(2 sqrt(2n) g, Delta) / 2`, with `theta_0 = 0`.
pub fn mixing_angle(detuning: f64, g: f64, n_plus: usize) -> f64 {
    if n_plus == 0 {
        return 0.0;
    }
    0.5 * (2.0 * (2.0 * n_plus as f64).sqrt() * g).atan2(detuning)
}

fn doublet_root(detuning: f64, g: f64, n_plus: usize) -> f64 {
    (detuning * detuning + 8.0 * n_plus as f64 * g * g).sqrt()
}

fn require_ideal_ladder(p: &RqrParams) -> Result<f64> {
    p.validate()?;
    if p.splitting().abs() > 1e-12 {
        return Err(Error::InvalidParameter("closed form needs nu_a = nu_b".into()));
    }
    if p.g_ab != 0.0 {
        return Err(Error::InvalidParameter("closed form needs g_ab = 0".into()));
    }
    if p.coupler_levels != 2 {
        return Err(Error::InvalidParameter("closed form needs a two-level coupler".into()));
    }
    p.common_coupling()
}

pub fn jc_spectrum_analytic(params: &RqrParams, n_minus: usize, n_plus: usize) -> Result<JcDoublet> {
    let g = require_ideal_ladder(params)?;
    if n_plus == 0 {
        return Err(Error::InvalidParameter(
            "n_plus = 0 has a single state; use jc_unpaired_energy".into(),
        ));
    }
    let nu = params.mean_resonator();
    let d = params.detuning();
    let base = (n_minus + n_plus) as f64 * nu + 0.5 * d;
    let r = 0.5 * doublet_root(d, g, n_plus);
    Ok(JcDoublet { e_plus: base + r, e_minus: base - r, theta: mixing_angle(d, g, n_plus) })
}

/// Energy of `|n_-, 0, 0>`, which has no partner.
pub fn jc_unpaired_energy(params: &RqrParams, n_minus: usize) -> Result<f64> {
    require_ideal_ladder(params)?;
    Ok(n_minus as f64 * params.mean_resonator())
}

/// Fourth-order cross-Kerr estimate in GHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiEstimate {
    /// `4g^4/Delta^3 - 4g^4/(Delta^2 (Delta - alpha/2))`
    pub full: f64,
    /// `-2 alpha g^4 / Delta^4`
    pub simplified: f64,
}

pub fn chi_perturbative(params: &RqrParams) -> Result<ChiEstimate> {
    params.validate()?;
    let g = params.common_coupling()?;
    let d = params.detuning();
    let a = params.alpha;
    if d.abs() < 1e-12 {
        return Err(Error::Singular("chi diverges at zero detuning".into()));
    }
    if (d - 0.5 * a).abs() < 1e-12 {
        return Err(Error::Singular("chi diverges at Delta = alpha/2".into()));
    }
    let g4 = g.powi(4);
    Ok(ChiEstimate {
        full: 4.0 * g4 / d.powi(3) - 4.0 * g4 / (d * d * (d - 0.5 * a)),
        simplified: -2.0 * a * g4 / d.powi(4),
    })
}

/// First-order coefficient of g_ab in the energy of the lower dressed state:
/// `n_+ - sin^2(theta_{n_+}) - n_-`.
pub fn direct_coupling_shift(params: &RqrParams, n_minus: usize, n_plus: usize) -> Result<f64> {
    params.validate()?;
    let g = params.common_coupling()?;
    let s = mixing_angle(params.detuning(), g, n_plus).sin();
    Ok(n_plus as f64 - s * s - n_minus as f64)
}

fn detuning_inputs(params: &RqrParams) -> Result<(f64, f64, f64)> {
    params.validate()?;
    let g = params.common_coupling()?;
    Ok((g, params.splitting(), params.detuning()))
}

/// Second-order shift of the lower dressed state `|n_-, n_+>` caused by the
/// resonator splitting, keeping the two dominant intermediate states.
pub fn delta_e2(params: &RqrParams, n_minus: usize, n_plus: usize) -> Result<f64> {
    let (g, delta, d) = detuning_inputs(params)?;
    let theta = |n: usize| mixing_angle(d, g, n);
    let root = |n: usize| doublet_root(d, g, n);
    let a_n = |n: usize| theta(n).cos() * theta(n + 1).cos();
    let b_n = |n: usize| theta(n).sin() * theta(n + 1).sin();
    let np = n_plus as f64;
    let nm = n_minus as f64;

    let up = root(n_plus + 1) - root(n_plus);
    if up == 0.0 {
        return Err(Error::Singular("degenerate denominator in the n_+ + 1 branch".into()));
    }
    let mut sum = nm * (a_n(n_plus) * (np + 1.0).sqrt() + b_n(n_plus) * np.sqrt()).powi(2) / up;
    if n_plus > 0 {
        let down = root(n_plus - 1) - root(n_plus);
        if down == 0.0 {
            return Err(Error::Singular("degenerate denominator in the n_+ - 1 branch".into()));
        }
        let k = n_plus - 1;
        sum += (nm + 1.0) * (a_n(k) * np.sqrt() + b_n(k) * (np - 1.0).sqrt()).powi(2) / down;
    }
    Ok(0.5 * delta * delta * sum)
}

fn resonant_prefactor(params: &RqrParams) -> Result<f64> {
    let (g, delta, _) = detuning_inputs(params)?;
    if g == 0.0 {
        return Err(Error::Singular("resonant limit needs g > 0".into()));
    }
    Ok(delta * delta / (16.0 * SQRT_2 * g))
}

/// `(sqrt(n+1) + sqrt(n))^3`
fn cube_up(n: f64) -> f64 {
    ((n + 1.0).sqrt() + n.sqrt()).powi(3)
}

/// `(sqrt(n) + sqrt(n-1))^3`, zero for n = 0.
fn cube_down(n: f64) -> f64 {
    if n == 0.0 {
        0.0
    } else {
        (n.sqrt() + (n - 1.0).sqrt()).powi(3)
    }
}

/// `Delta -> 0` form of [`delta_e2`] with every mixing product set to 1/2.
/// For n_+ <= 1 this differs from the exact limit, because the unpaired
/// state `|n_-, 0, 0>` does not mix.
pub fn delta_e2_resonant(params: &RqrParams, n_minus: usize, n_plus: usize) -> Result<f64> {
    let pre = resonant_prefactor(params)?;
    let (nm, np) = (n_minus as f64, n_plus as f64);
    Ok(pre * (nm * cube_up(np) - (nm + 1.0) * cube_down(np)))
}

/// Resonant form with the cube difference replaced by `12 sqrt(n_+)`.
pub fn delta_e2_resonant_approx(params: &RqrParams, n_minus: usize, n_plus: usize) -> Result<f64> {
    let pre = resonant_prefactor(params)?;
    let (nm, np) = (n_minus as f64, n_plus as f64);
    Ok(pre * (12.0 * nm * np.sqrt() - cube_down(np)))
}

/// Large-detuning form `delta^2/(16 g) (2 Delta n_-/g + 16 g n_- n_+/Delta)`.
pub fn delta_e2_dispersive(params: &RqrParams, n_minus: usize, n_plus: usize) -> Result<f64> {
    let (g, delta, d) = detuning_inputs(params)?;
    if g == 0.0 || d == 0.0 {
        return Err(Error::Singular("dispersive limit needs g > 0 and Delta != 0".into()));
    }
    let (nm, np) = (n_minus as f64, n_plus as f64);
    Ok(delta * delta / (16.0 * g) * (2.0 * d * nm / g + 16.0 * g * nm * np / d))
}

/// `(sqrt(n+1)+sqrt(n))^3 - (sqrt(n)+sqrt(n-1))^3`, approximately `12 sqrt(n)`.
pub fn cube_difference(n: usize) -> f64 {
    cube_up(n as f64) - cube_down(n as f64)
}

/// Coefficient of `n_- sqrt(n_+)` at zero detuning: `3/(4 sqrt 2) delta^2/g`.
pub fn hint_coefficient(params: &RqrParams) -> Result<f64> {
    let (g, delta, _) = detuning_inputs(params)?;
    if g == 0.0 {
        return Err(Error::Singular("hint coefficient needs g > 0".into()));
    }
    Ok(3.0 / (4.0 * SQRT_2) * delta * delta / g)
}

/// Detuning where the leading exchange `g^2/Delta` cancels `g_ab`.
pub fn idle_detuning_estimate(params: &RqrParams) -> Result<f64> {
    params.validate()?;
    let g = params.common_coupling()?;
    if params.g_ab == 0.0 {
        return Err(Error::Singular("no idle point without a direct coupling".into()));
    }
    Ok(g * g / params.g_ab)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ladder(nu_q: f64) -> RqrParams {
        RqrParams::symmetric(7.0, nu_q, 0.0, 0.1, 0.0, 2)
    }

    #[test]
    fn resonant_doublet() {
        let d = jc_spectrum_analytic(&ladder(7.0), 0, 1).unwrap();
        // 2x2 block [[nu, sqrt2 g],[sqrt2 g, nu]] by hand
        assert_abs_diff_eq!(d.e_plus, 7.0 + SQRT_2 * 0.1, epsilon = 1e-14);
        assert_abs_diff_eq!(d.e_minus, 7.0 - SQRT_2 * 0.1, epsilon = 1e-14);
        assert_abs_diff_eq!(d.theta, std::f64::consts::FRAC_PI_4, epsilon = 1e-15);
        assert!(jc_spectrum_analytic(&ladder(7.0), 2, 0).is_err());
    }

    #[test]
    fn dispersive_stark_shift() {
        let p = ladder(17.0);
        for n in 1..4 {
            let d = jc_spectrum_analytic(&p, 1, n).unwrap();
            let approx = (1 + n) as f64 * 7.0 - 2.0 * n as f64 * 0.01 / 10.0;
            assert!((d.e_minus - approx).abs() < 1e-5);
        }
    }

    #[test]
    fn chi_numbers() {
        let p = RqrParams::symmetric(7.0, 8.0, 0.3, 0.1, 0.0, 3);
        let chi = chi_perturbative(&p).unwrap();
        assert_abs_diff_eq!(chi.simplified, -6.0e-5, epsilon = 1e-12);
        let full = 4e-4 - 4e-4 / 0.85;
        assert_abs_diff_eq!(chi.full, full, epsilon = 1e-15);
        assert!((chi.full + 7.06e-5).abs() < 1e-7);
        let harmonic = RqrParams { alpha: 0.0, ..p };
        assert_eq!(chi_perturbative(&harmonic).unwrap().simplified, 0.0);
        assert!(chi_perturbative(&p.with_nu_q(7.0)).is_err());
        assert!(chi_perturbative(&p.with_nu_q(7.15)).is_err());
    }

    #[test]
    fn hint_numbers() {
        let mut p = RqrParams::symmetric(7.0, 7.0, 0.3, 0.1, 0.0, 3);
        p.nu_a = 6.975;
        p.nu_b = 7.025;
        assert_abs_diff_eq!(hint_coefficient(&p).unwrap(), 0.013258252147247767, epsilon = 1e-12);
        let mut q = p;
        q.nu_a = 6.95;
        q.nu_b = 7.05;
        assert_abs_diff_eq!(hint_coefficient(&q).unwrap(), 4.0 * hint_coefficient(&p).unwrap(), epsilon = 1e-12);
        let flat = RqrParams::symmetric(7.0, 7.0, 0.3, 0.1, 0.0, 3);
        assert_eq!(hint_coefficient(&flat).unwrap(), 0.0);
        assert!(hint_coefficient(&RqrParams { g_a: 0.0, g_b: 0.0, ..p }).is_err());
    }

    #[test]
    fn twelve_root_n() {
        let n2 = cube_difference(2);
        let by_hand = (3f64.sqrt() + 2f64.sqrt()).powi(3) - (2f64.sqrt() + 1.0).powi(3);
        assert_abs_diff_eq!(n2, by_hand, epsilon = 1e-12);
        assert_abs_diff_eq!(n2, 17.0737, epsilon = 1e-4);
        assert!(((n2 - 12.0 * 2f64.sqrt()) / n2).abs() < 0.0061);
    }

    #[test]
    fn vacuum_shift_vanishes() {
        let mut p = ladder(7.0);
        p.nu_a = 6.99;
        p.nu_b = 7.01;
        assert_eq!(delta_e2(&p, 0, 0).unwrap(), 0.0);
    }

    #[test]
    fn resonant_form_is_delta_zero_limit() {
        let mut p = RqrParams::symmetric(7.0, 7.0, 0.3, 0.1, 0.0, 2);
        p.nu_a = 6.99;
        p.nu_b = 7.01;
        for nm in 0..3 {
            for np in 2..5 {
                assert_abs_diff_eq!(
                    delta_e2(&p, nm, np).unwrap(),
                    delta_e2_resonant(&p, nm, np).unwrap(),
                    epsilon = 1e-14
                );
            }
        }
    }

    #[test]
    fn dispersive_form_is_large_detuning_limit() {
        // compare the n_- n_+ mixed difference, which drops single-mode terms
        let mut p = RqrParams::symmetric(7.0, 27.0, 0.3, 0.1, 0.0, 2);
        p.nu_a = 6.99;
        p.nu_b = 7.01;
        let mixed = |f: &dyn Fn(usize, usize) -> f64| f(2, 2) - f(2, 1) - f(1, 2) + f(1, 1);
        let exact = mixed(&|m, n| delta_e2(&p, m, n).unwrap());
        let approx = mixed(&|m, n| delta_e2_dispersive(&p, m, n).unwrap());
        assert!(((exact - approx) / approx).abs() < 1e-2, "{exact} vs {approx}");
    }

    #[test]
    fn idle_estimate() {
        assert_abs_diff_eq!(idle_detuning_estimate(&RqrParams::reference(8.0)).unwrap(), 1.0, epsilon = 1e-12);
    }
}
