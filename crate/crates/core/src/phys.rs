//! Physical parameter records and fiber dispersion.
//!
//! Everything in this module is strict SI: angular frequencies in rad/s,
//! times in s, lengths in m, powers in W. Unit conversion happens at the
//! CLI boundary only.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;
/// Anchor of the ITU DWDM grid, Hz.
pub const ITU_ANCHOR_HZ: f64 = 193.1e12;
/// DWDM channel spacing, Hz.
pub const ITU_SPACING_HZ: f64 = 100e9;
/// Peak-power factor of a Gaussian pulse: P_peak = 0.939 E / t_fwhm.
pub const GAUSSIAN_PEAK_FACTOR: f64 = 0.939;
/// Relative half-width of the window where the dispersion series is trusted.
pub const DISPERSION_WINDOW: f64 = 0.10;

/// Fiber under test: length, Kerr nonlinearity and a degree-4 Taylor
/// expansion of the propagation constant about `omega_ref`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberSpec {
    pub length_m: f64,
    /// Nonlinear coefficient, 1/(W·m).
    pub gamma: f64,
    /// β₀..β₄ in sⁿ/m.
    pub beta: [f64; 5],
    /// Expansion point, rad/s.
    pub omega_ref: f64,
    pub temperature_k: f64,
}

impl FiberSpec {
    pub fn new(
        length_m: f64,
        gamma: f64,
        beta: [f64; 5],
        omega_ref: f64,
        temperature_k: f64,
    ) -> Result<Self> {
        let fiber = Self {
            length_m,
            gamma,
            beta,
            omega_ref,
            temperature_k,
        };
        fiber.validate()?;
        Ok(fiber)
    }

    /// Fiber whose dispersion is tuned so the pump-signal and pump-idler
    /// group-slowness differences are equal and opposite, with the
    /// factorable pump width landing at `optimum_t_fwhm`, and with the
    /// channel centers phase matched at zero pump power.
    ///
    /// Only β₂ and β₄ are non-zero besides the group delay term; odd orders
    /// above β₁ would break the symmetry.
    pub fn with_symmetric_gvm(
        length_m: f64,
        gamma: f64,
        temperature_k: f64,
        omega_p0: f64,
        channel_offset: f64,
        optimum_t_fwhm: f64,
        alpha: f64,
    ) -> Result<Self> {
        if !(channel_offset > 0.0) {
            return Err(domain("channel_offset", "must be > 0"));
        }
        if !(alpha > 0.0) {
            return Err(domain("alpha", "must be > 0"));
        }
        if !(length_m > 0.0) {
            return Err(domain("length_m", "must be > 0"));
        }
        let sigma_star = sigma_from_fwhm(optimum_t_fwhm)?;
        // |k'_p - k'_s| = |k'_p - k'_i| = g
        let g = 1.0 / (alpha * length_m * sigma_star);
        let beta2 = -g / channel_offset;
        let beta4 = 12.0 * g / channel_offset.powi(3);
        // Group index of standard silica fiber; cancels out of every observable.
        let beta1 = 1.468 / 299_792_458.0;
        Self::new(
            length_m,
            gamma,
            [0.0, beta1, beta2, 0.0, beta4],
            omega_p0,
            temperature_k,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length_m > 0.0) {
            return Err(domain("length_m", format!("must be > 0, got {}", self.length_m)));
        }
        if !(self.gamma >= 0.0) {
            return Err(domain("gamma", format!("must be >= 0, got {}", self.gamma)));
        }
        if self.beta.iter().any(|b| !b.is_finite()) {
            return Err(domain("beta", "all coefficients must be finite"));
        }
        if !(self.omega_ref > 0.0) {
            return Err(domain("omega_ref", "must be > 0"));
        }
        if !(self.temperature_k > 0.0) {
            return Err(domain("temperature_k", "must be > 0"));
        }
        Ok(())
    }

    fn check_window(&self, omega: f64) -> Result<f64> {
        let half = DISPERSION_WINDOW * self.omega_ref;
        let (lo, hi) = (self.omega_ref - half, self.omega_ref + half);
        if !(omega >= lo && omega <= hi) {
            return Err(Error::OutOfWindow { omega, lo, hi });
        }
        Ok(omega - self.omega_ref)
    }
}

/// Propagation constant k(ω) = Σ βₙ (ω − ω_ref)ⁿ / n!, in 1/m.
pub fn wavevector(fiber: &FiberSpec, omega: f64) -> Result<f64> {
    let x = fiber.check_window(omega)?;
    // Horner on the series with 1/n! folded in.
    let b = &fiber.beta;
    Ok(b[0] + x * (b[1] + x / 2.0 * (b[2] + x / 3.0 * (b[3] + x / 4.0 * b[4]))))
}

/// Group slowness k'(ω) = dk/dω, in s/m.
pub fn group_slowness(fiber: &FiberSpec, omega: f64) -> Result<f64> {
    let x = fiber.check_window(omega)?;
    let b = &fiber.beta;
    Ok(b[1] + x * (b[2] + x / 2.0 * (b[3] + x / 3.0 * b[4])))
}

/// Spectral width σ_p (rad/s) of a transform-limited Gaussian pulse with
/// intensity FWHM `t_fwhm`: the 1/e² half-width of the spectral intensity,
/// so that the envelope intensity reads exp[−2(Δ/σ_p)²].
pub fn sigma_from_fwhm(t_fwhm: f64) -> Result<f64> {
    if !(t_fwhm > 0.0) || !t_fwhm.is_finite() {
        return Err(domain("t_fwhm", format!("must be finite and > 0, got {t_fwhm}")));
    }
    Ok(fwhm_sigma_product() / t_fwhm)
}

/// Inverse of [`sigma_from_fwhm`].
pub fn fwhm_from_sigma(sigma_p: f64) -> Result<f64> {
    if !(sigma_p > 0.0) || !sigma_p.is_finite() {
        return Err(domain("sigma_p", format!("must be finite and > 0, got {sigma_p}")));
    }
    Ok(fwhm_sigma_product() / sigma_p)
}

/// The constant σ_p·t_fwhm = 2·sqrt(2 ln 2).
pub fn fwhm_sigma_product() -> f64 {
    2.0 * (2.0 * LN_2).sqrt()
}

/// Center frequency (Hz) of ITU DWDM channel `index` on the 100 GHz grid.
pub fn itu_channel_freq(index: i32) -> Result<f64> {
    if !(-60..=60).contains(&index) {
        return Err(domain("channel_index", format!("must lie in [-60, 60], got {index}")));
    }
    Ok(ITU_ANCHOR_HZ + f64::from(index) * ITU_SPACING_HZ)
}

/// Angular frequency of an ITU channel.
pub fn itu_channel_omega(index: i32) -> Result<f64> {
    Ok(2.0 * PI * itu_channel_freq(index)?)
}

/// Pulsed pump: center, transform-limited pulse width, average power and
/// repetition rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpSpec {
    pub omega_p0: f64,
    pub t_fwhm: f64,
    pub p_avg: f64,
    pub rep_rate: f64,
}

impl PumpSpec {
    pub fn new(omega_p0: f64, t_fwhm: f64, p_avg: f64, rep_rate: f64) -> Result<Self> {
        let pump = Self {
            omega_p0,
            t_fwhm,
            p_avg,
            rep_rate,
        };
        pump.validate()?;
        Ok(pump)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("omega_p0", self.omega_p0),
            ("t_fwhm", self.t_fwhm),
            ("p_avg", self.p_avg),
            ("rep_rate", self.rep_rate),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(domain(name, format!("must be finite and > 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn sigma_p(&self) -> f64 {
        fwhm_sigma_product() / self.t_fwhm
    }

    pub fn pulse_energy(&self) -> f64 {
        self.p_avg / self.rep_rate
    }

    /// Peak power of a Gaussian pulse, W.
    pub fn peak_power(&self) -> f64 {
        GAUSSIAN_PEAK_FACTOR * self.pulse_energy() / self.t_fwhm
    }

    /// Same pump with a different average power. Zero is allowed here so
    /// power sweeps can start at the origin.
    pub fn with_p_avg(&self, p_avg: f64) -> Self {
        Self { p_avg, ..*self }
    }

    pub fn with_t_fwhm(&self, t_fwhm: f64) -> Self {
        Self { t_fwhm, ..*self }
    }
}

/// Signal and idler channel centers, energy conserving about the pump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelPair {
    pub omega_s0: f64,
    pub omega_i0: f64,
}

impl ChannelPair {
    pub fn new(omega_s0: f64, omega_i0: f64, omega_p0: f64) -> Result<Self> {
        if !(omega_s0 > 0.0 && omega_i0 > 0.0 && omega_p0 > 0.0) {
            return Err(domain("channel", "frequencies must be > 0"));
        }
        if omega_s0 == omega_i0 {
            return Err(domain("channel", "signal and idler centers must differ"));
        }
        let mismatch = (omega_s0 + omega_i0 - 2.0 * omega_p0).abs() / (2.0 * omega_p0);
        if mismatch > 1e-9 {
            return Err(domain(
                "channel",
                format!("omega_s0 + omega_i0 must equal 2*omega_p0 (relative mismatch {mismatch:.3e})"),
            ));
        }
        Ok(Self { omega_s0, omega_i0 })
    }

    /// Channels at ω_p0 ± offset; the signal takes the upper one.
    pub fn symmetric(omega_p0: f64, offset: f64) -> Result<Self> {
        Self::new(omega_p0 + offset, omega_p0 - offset, omega_p0)
    }

    /// Signal and idler on ITU channels placed symmetrically about the pump channel.
    pub fn itu(pump_index: i32, signal_index: i32, idler_index: i32) -> Result<Self> {
        let p = itu_channel_omega(pump_index)?;
        Self::new(itu_channel_omega(signal_index)?, itu_channel_omega(idler_index)?, p)
    }

    pub fn pump_center(&self) -> f64 {
        0.5 * (self.omega_s0 + self.omega_i0)
    }

    /// Half the signal-idler separation, rad/s.
    pub fn offset(&self) -> f64 {
        0.5 * (self.omega_s0 - self.omega_i0).abs()
    }
}

/// Discretization of the signal × idler detuning plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_points: usize,
    pub half_range_s: f64,
    pub half_range_i: f64,
}

impl GridSpec {
    pub fn new(n_points: usize, half_range_s: f64, half_range_i: f64) -> Result<Self> {
        let grid = Self {
            n_points,
            half_range_s,
            half_range_i,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_points < 16 || self.n_points % 2 != 0 {
            return Err(domain(
                "n_points",
                format!("must be even and >= 16, got {}", self.n_points),
            ));
        }
        if !(self.half_range_s > 0.0 && self.half_range_i > 0.0)
            || !(self.half_range_s.is_finite() && self.half_range_i.is_finite())
        {
            return Err(domain("half_range", "half-ranges must be finite and > 0"));
        }
        Ok(())
    }

    pub fn axis_s(&self) -> Vec<f64> {
        uniform_axis(self.n_points, self.half_range_s)
    }

    pub fn axis_i(&self) -> Vec<f64> {
        uniform_axis(self.n_points, self.half_range_i)
    }
}

/// `n` uniformly spaced points covering [−half, half] inclusive.
/// For even `n` the origin falls between the two middle samples.
pub fn uniform_axis(n: usize, half: f64) -> Vec<f64> {
    let step = 2.0 * half / (n as f64 - 1.0);
    (0..n).map(|j| -half + j as f64 * step).collect()
}

/// Bose-Einstein occupation of a mode at angular frequency `omega`.
pub fn thermal_occupation(omega: f64, temperature_k: f64) -> f64 {
    1.0 / (HBAR * omega / (K_B * temperature_k)).exp_m1()
}
