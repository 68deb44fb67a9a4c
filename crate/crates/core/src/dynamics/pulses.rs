use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Frequency offsets (GHz) applied on top of the base model at one instant.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Shifts {
    pub nu_a: f64,
    pub nu_b: f64,
    pub nu_q: f64,
}

/// A time-dependent set of frequency offsets on `[0, duration]`.
pub trait Controls: Sync {
    fn duration(&self) -> f64;
    /// Interior times where the controls have kinks, ascending.
    fn breakpoints(&self) -> Vec<f64>;
    fn shifts(&self, t: f64) -> Shifts;
}

/// The controls of `inner` played backwards in time.
pub struct Reversed<'a>(pub &'a dyn Controls);

impl Controls for Reversed<'_> {
    fn duration(&self) -> f64 {
        self.0.duration()
    }

    fn breakpoints(&self) -> Vec<f64> {
        let d = self.0.duration();
        let mut b: Vec<f64> = self.0.breakpoints().into_iter().map(|t| d - t).collect();
        b.reverse();
        b
    }

    fn shifts(&self, t: f64) -> Shifts {
        self.0.shifts(self.0.duration() - t)
    }
}

fn check_time(t: f64, duration: f64) -> Result<()> {
    if !(0.0..=duration).contains(&t) {
        return Err(Error::TimeOutOfRange { t, duration });
    }
    Ok(())
}

/// Coupler flux pulse: sine-corrected linear ramp, corrected flat top, and
/// the mirrored ramp back.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplerPulse {
    /// Plateau amplitude in GHz.
    pub d_omega1: f64,
    pub tau1: f64,
    #[serde(rename = "T1")]
    pub t1: f64,
    pub a: [f64; 3],
    pub b: [f64; 3],
}

impl CouplerPulse {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau1 > 0.0 && self.t1 > 0.0) {
            return Err(Error::InvalidParameter("coupler pulse needs tau1 > 0 and T1 > 0".into()));
        }
        if !self.d_omega1.is_finite() || self.a.iter().chain(&self.b).any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("non-finite coupler pulse parameter".into()));
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.t1 + 2.0 * self.tau1
    }

    fn ramp(&self, s: f64) -> f64 {
        s / self.tau1 + sine_series(&self.a, s / self.tau1)
    }

    fn shape(&self, t: f64) -> f64 {
        if t <= self.tau1 {
            self.ramp(t)
        } else if t <= self.tau1 + self.t1 {
            1.0 + sine_series(&self.b, (t - self.tau1) / self.t1)
        } else {
            self.ramp((self.duration() - t).max(0.0))
        }
    }

    /// Coupler frequency offset in GHz at `t` ns.
    pub fn value(&self, t: f64) -> Result<f64> {
        check_time(t, self.duration())?;
        Ok(self.d_omega1 * self.shape(t))
    }

    fn breakpoints(&self) -> [f64; 2] {
        [self.tau1, self.tau1 + self.t1]
    }
}

/// `sum_j c_j sin(j pi x)`
fn sine_series(c: &[f64; 3], x: f64) -> f64 {
    c.iter().enumerate().map(|(j, cj)| cj * ((j + 1) as f64 * PI * x).sin()).sum()
}

/// Resonator detuning pulse: raised-cosine ramp, flat top, mirrored ramp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResonatorPulse {
    pub d_omega2: f64,
    pub tau2: f64,
    #[serde(rename = "T2")]
    pub t2: f64,
}

impl ResonatorPulse {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau2 > 0.0 && self.t2 > 0.0) {
            return Err(Error::InvalidParameter("resonator pulse needs tau2 > 0 and T2 > 0".into()));
        }
        if !self.d_omega2.is_finite() {
            return Err(Error::InvalidParameter("non-finite resonator pulse amplitude".into()));
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.t2 + 2.0 * self.tau2
    }

    fn shape(&self, t: f64) -> f64 {
        let edge = |s: f64| 0.5 * (1.0 - (PI * s / self.tau2).cos());
        if t <= self.tau2 {
            edge(t)
        } else if t <= self.tau2 + self.t2 {
            1.0
        } else {
            edge((self.duration() - t).max(0.0))
        }
    }

    /// Resonator offset in GHz; resonator a moves up and b down by this amount.
    pub fn value(&self, t: f64) -> Result<f64> {
        check_time(t, self.duration())?;
        Ok(self.d_omega2 * self.shape(t))
    }
}

/// Three back-to-back steps: coupler pulse, resonator Z step, coupler pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSchedule {
    pub coupler: CouplerPulse,
    pub resonator: ResonatorPulse,
}

/// Number of free shape parameters in [`PulseSchedule::free_parameters`].
pub const FREE_PARAMETERS: usize = 8;

impl PulseSchedule {
    /// The published optimum (75 ns gate).
    pub fn reference() -> Self {
        Self {
            coupler: CouplerPulse {
                d_omega1: -0.7153,
                tau1: 5.0,
                t1: 20.0,
                a: [0.1637, -0.0974, -0.0372],
                b: [0.1017, 0.0078, 0.0131],
            },
            resonator: ResonatorPulse { d_omega2: 0.0252, tau2: 5.0, t2: 5.0 },
        }
    }

    /// Same timing with both amplitudes zero.
    pub fn idle(&self) -> Self {
        let mut s = *self;
        s.coupler.d_omega1 = 0.0;
        s.resonator.d_omega2 = 0.0;
        s
    }

    pub fn validate(&self) -> Result<()> {
        self.coupler.validate()?;
        self.resonator.validate()
    }

    /// `2 (T1 + 2 tau1) + T2 + 2 tau2`
    pub fn gate_time(&self) -> f64 {
        2.0 * self.coupler.duration() + self.resonator.duration()
    }

    /// Start and end of the three segments.
    pub fn segments(&self) -> [(f64, f64); 3] {
        let c = self.coupler.duration();
        let r = self.resonator.duration();
        [(0.0, c), (c, c + r), (c + r, 2.0 * c + r)]
    }

    /// `[d_omega1, a1, a2, a3, b1, b2, b3, d_omega2]`
    pub fn free_parameters(&self) -> [f64; FREE_PARAMETERS] {
        let c = &self.coupler;
        [c.d_omega1, c.a[0], c.a[1], c.a[2], c.b[0], c.b[1], c.b[2], self.resonator.d_omega2]
    }

    pub fn with_free_parameters(&self, x: &[f64; FREE_PARAMETERS]) -> Self {
        let mut s = *self;
        s.coupler.d_omega1 = x[0];
        s.coupler.a = [x[1], x[2], x[3]];
        s.coupler.b = [x[4], x[5], x[6]];
        s.resonator.d_omega2 = x[7];
        s
    }

    /// Coupler and resonator offsets (GHz) at `t`.
    pub fn values(&self, t: f64) -> Result<(f64, f64)> {
        check_time(t, self.gate_time())?;
        Ok(self.values_unchecked(t))
    }

    fn values_unchecked(&self, t: f64) -> (f64, f64) {
        let [(_, c1), (_, r1), _] = self.segments();
        if t <= c1 {
            (self.coupler.d_omega1 * self.coupler.shape(t), 0.0)
        } else if t <= r1 {
            (0.0, self.resonator.d_omega2 * self.resonator.shape(t - c1))
        } else {
            let s = (t - r1).min(self.coupler.duration());
            (self.coupler.d_omega1 * self.coupler.shape(s), 0.0)
        }
    }
}

impl Controls for PulseSchedule {
    fn duration(&self) -> f64 {
        self.gate_time()
    }

    fn breakpoints(&self) -> Vec<f64> {
        let [(_, c1), (_, r1), _] = self.segments();
        let [p, q] = self.coupler.breakpoints();
        let r = &self.resonator;
        vec![p, q, c1, c1 + r.tau2, c1 + r.tau2 + r.t2, r1, r1 + p, r1 + q]
    }

    fn shifts(&self, t: f64) -> Shifts {
        let (q, ab) = self.values_unchecked(t.clamp(0.0, self.gate_time()));
        Shifts { nu_a: ab, nu_b: -ab, nu_q: q }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn coupler_shape_points() {
        let p = PulseSchedule::reference().coupler;
        assert_eq!(p.value(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(p.value(5.0).unwrap(), -0.7153, epsilon = 1e-15);
        let mid = -0.7153 * (1.0 + 0.1017 * 1.0 + 0.0078 * PI.sin() + 0.0131 * (1.5 * PI).sin());
        assert_abs_diff_eq!(p.value(15.0).unwrap(), mid, epsilon = 1e-15);
        assert_abs_diff_eq!(p.value(30.0).unwrap(), 0.0, epsilon = 1e-15);
        assert!(p.value(30.1).is_err());
        assert!(p.value(-0.1).is_err());
    }

    #[test]
    fn coupler_is_continuous_and_mirrored() {
        let p = PulseSchedule::reference().coupler;
        for t in [5.0, 25.0] {
            assert_abs_diff_eq!(p.value(t - 1e-9).unwrap(), p.value(t + 1e-9).unwrap(), epsilon = 1e-8);
        }
        for t in [0.7, 3.3, 4.9] {
            assert_abs_diff_eq!(p.value(t).unwrap(), p.value(30.0 - t).unwrap(), epsilon = 1e-14);
        }
    }

    #[test]
    fn resonator_shape_points() {
        let r = PulseSchedule::reference().resonator;
        assert_eq!(r.value(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(r.value(5.0).unwrap(), 0.0252, epsilon = 1e-15);
        assert_abs_diff_eq!(r.value(7.5).unwrap(), 0.0252, epsilon = 1e-15);
        assert_abs_diff_eq!(r.value(15.0).unwrap(), 0.0, epsilon = 1e-15);
        assert!(r.value(15.5).is_err());
    }

    #[test]
    fn resonator_pulse_area() {
        // trapezoid-like area: plateau T2 plus two raised-cosine edges of area tau2/2
        let r = PulseSchedule::reference().resonator;
        let n = 150_000;
        let h = r.duration() / n as f64;
        let area: f64 = (0..n).map(|i| r.value((i as f64 + 0.5) * h).unwrap() * h).sum();
        assert_abs_diff_eq!(area, 0.0252 * (5.0 + 5.0), epsilon = 1e-9);
        // differential phase 2 * 2pi * area between the two resonators
        let phase = 2.0 * 2.0 * PI * area;
        assert!((phase - PI).abs() < 0.1 * PI, "{phase}");
    }

    #[test]
    fn schedule_layout() {
        let s = PulseSchedule::reference();
        assert_abs_diff_eq!(s.gate_time(), 75.0, epsilon = 1e-12);
        assert_eq!(s.segments(), [(0.0, 30.0), (30.0, 45.0), (45.0, 75.0)]);
        let (q, ab) = s.values(37.5).unwrap();
        assert_eq!(q, 0.0);
        assert_abs_diff_eq!(ab, 0.0252, epsilon = 1e-15);
        let (q, ab) = s.values(50.0).unwrap();
        assert_abs_diff_eq!(q, -0.7153, epsilon = 1e-15);
        assert_eq!(ab, 0.0);
        let sh = s.shifts(37.5);
        assert_eq!(sh.nu_a, -sh.nu_b);
        let x = s.free_parameters();
        assert_eq!(s.with_free_parameters(&x), s);
    }
}
