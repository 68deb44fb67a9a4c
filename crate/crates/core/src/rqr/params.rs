use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical parameters of the resonator-coupler-resonator circuit.
///
/// Every frequency is an ordinary frequency in GHz (nu = omega / 2pi).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RqrParams {
    pub nu_a: f64,
    pub nu_b: f64,
    /// Coupler 0-1 transition frequency.
    pub nu_q: f64,
    /// Coupler anharmonicity; level k sits at `k nu_q - alpha k(k-1)/2`.
    pub alpha: f64,
    pub g_a: f64,
    pub g_b: f64,
    pub g_ab: f64,
    pub coupler_levels: usize,
}

impl RqrParams {
    /// Degenerate resonators at `nu` with equal couplings `g`.
    pub fn symmetric(nu: f64, nu_q: f64, alpha: f64, g: f64, g_ab: f64, coupler_levels: usize) -> Self {
        Self { nu_a: nu, nu_b: nu, nu_q, alpha, g_a: g, g_b: g, g_ab, coupler_levels }
    }

    /// The circuit of the coupling analysis: nu = 7, alpha = 0.3, g = 0.1,
    /// g_ab = 0.01 GHz, qutrit coupler.
    pub fn reference(nu_q: f64) -> Self {
        Self::symmetric(7.0, nu_q, 0.3, 0.1, 0.01, 3)
    }

    pub fn validate(&self) -> Result<()> {
        let values = [self.nu_a, self.nu_b, self.nu_q, self.alpha, self.g_a, self.g_b, self.g_ab];
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite model parameter".into()));
        }
        if self.g_a < 0.0 || self.g_b < 0.0 || self.g_ab < 0.0 {
            return Err(Error::InvalidParameter("couplings must be non-negative".into()));
        }
        if self.coupler_levels < 2 {
            return Err(Error::InvalidParameter(format!(
                "coupler_levels must be at least 2, got {}",
                self.coupler_levels
            )));
        }
        Ok(())
    }

    /// Mean resonator frequency (nu_a + nu_b) / 2.
    pub fn mean_resonator(&self) -> f64 {
        0.5 * (self.nu_a + self.nu_b)
    }

    /// Coupler detuning from the mean resonator frequency.
    pub fn detuning(&self) -> f64 {
        self.nu_q - self.mean_resonator()
    }

    /// Resonator splitting nu_b - nu_a.
    pub fn splitting(&self) -> f64 {
        self.nu_b - self.nu_a
    }

    pub fn coupler_energy(&self, k: usize) -> f64 {
        let k = k as f64;
        k * self.nu_q - 0.5 * self.alpha * k * (k - 1.0)
    }

    pub fn with_nu_q(mut self, nu_q: f64) -> Self {
        self.nu_q = nu_q;
        self
    }

    /// Common coupling for formulas that assume g_a = g_b.
    pub fn common_coupling(&self) -> Result<f64> {
        if (self.g_a - self.g_b).abs() > 1e-12 * self.g_a.abs().max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "closed form needs g_a = g_b, got {} and {}",
                self.g_a, self.g_b
            )));
        }
        Ok(self.g_a)
    }
}
