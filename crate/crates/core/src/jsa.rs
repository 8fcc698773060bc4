//! Joint spectral amplitude of the photon pair.
//!
//! The amplitude is the product of the two-photon pump envelope and the
//! fiber phase-matching function, sampled on a signal × idler detuning grid.
//! Rows index the signal axis, columns the idler axis.

use std::f64::consts::LN_2;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::optimize::golden_section_max;
use crate::phys::{
    fwhm_from_sigma, group_slowness, wavevector, ChannelPair, FiberSpec, GridSpec, PumpSpec,
};
use crate::schmidt::purity_gauss_analytic;

/// Width parameter of the Gaussian stand-in for the sinc phase matching.
pub const DEFAULT_ALPHA: f64 = 0.220;
/// Fraction of the norm allowed in the two outermost rows/columns before
/// the grid is flagged as too small.
pub const EDGE_MASS_LIMIT: f64 = 1e-3;

/// Phase-matching model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PhaseMatching {
    /// sin(ΔkL/2)/(ΔkL/2) evaluated on the full Taylor mismatch.
    Sinc,
    /// exp(−α²Δk²L²) on the mismatch linearized about the channel centers.
    Gauss { alpha: f64 },
}

impl PhaseMatching {
    pub fn gauss() -> Self {
        Self::Gauss {
            alpha: DEFAULT_ALPHA,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Sinc => "sinc",
            Self::Gauss { .. } => "gauss",
        }
    }
}

/// Two-photon pump envelope amplitude exp[−(Δ/σ_p)²], with Δ = Δω_s + Δω_i.
/// Its square is the envelope intensity exp[−2(Δ/σ_p)²].
pub fn pump_envelope_amp(delta_sum: f64, sigma_p: f64) -> f64 {
    let x = delta_sum / sigma_p;
    (-x * x).exp()
}

/// Phase mismatch Δk = 2k(ω̄_p) − k(ω_s) − k(ω_i) + 2γP_peak in 1/m, with the
/// pump pair taken at the energy-conserving midpoint ω̄_p = (ω_s + ω_i)/2.
pub fn phase_mismatch(fiber: &FiberSpec, pump: &PumpSpec, omega_s: f64, omega_i: f64) -> Result<f64> {
    let omega_p = 0.5 * (omega_s + omega_i);
    let kp = wavevector(fiber, omega_p)?;
    let ks = wavevector(fiber, omega_s)?;
    let ki = wavevector(fiber, omega_i)?;
    Ok(2.0 * kp - ks - ki + 2.0 * fiber.gamma * pump.peak_power())
}

/// Phase-matching amplitude for mismatch `delta_k` over length `length`.
pub fn phase_matching_amp(delta_k: f64, length: f64, mode: PhaseMatching) -> f64 {
    match mode {
        PhaseMatching::Sinc => sinc(0.5 * delta_k * length),
        PhaseMatching::Gauss { alpha } => {
            let x = alpha * delta_k * length;
            (-x * x).exp()
        }
    }
}

/// Unnormalized sinc, sin(x)/x.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        // Taylor; the first dropped term is x⁴/120 < 1e-18.
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Group slowness k' at the pump, signal and idler channel centers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupSlowness {
    pub pump: f64,
    pub signal: f64,
    pub idler: f64,
}

impl GroupSlowness {
    pub fn at(fiber: &FiberSpec, channel: &ChannelPair) -> Result<Self> {
        Ok(Self {
            pump: group_slowness(fiber, channel.pump_center())?,
            signal: group_slowness(fiber, channel.omega_s0)?,
            idler: group_slowness(fiber, channel.omega_i0)?,
        })
    }

    /// k'_p − k'_s
    pub fn ps(&self) -> f64 {
        self.pump - self.signal
    }

    /// k'_p − k'_i
    pub fn pi(&self) -> f64 {
        self.pump - self.idler
    }

    pub fn product(&self) -> f64 {
        self.ps() * self.pi()
    }
}

/// Coefficients of the Gaussian joint spectral intensity
/// S ∝ exp[−2AΔω_s² − 2BΔω_i² − 4CΔω_sΔω_i]. All in s².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussJsaCoeffs {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl GaussJsaCoeffs {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        let coeffs = Self { a, b, c };
        coeffs.validate()?;
        Ok(coeffs)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.b > 0.0) || !self.c.is_finite() {
            return Err(domain("gauss_coeffs", "A and B must be > 0 and C finite"));
        }
        if !(self.a * self.b - self.c * self.c > 0.0) {
            return Err(domain("gauss_coeffs", "AB - C^2 must be > 0 (normalizable Gaussian)"));
        }
        Ok(())
    }

    /// Standard deviation of the signal marginal of the JSI, rad/s.
    pub fn marginal_std_s(&self) -> f64 {
        (0.25 / (self.a - self.c * self.c / self.b)).sqrt()
    }

    /// Standard deviation of the idler marginal of the JSI, rad/s.
    pub fn marginal_std_i(&self) -> f64 {
        (0.25 / (self.b - self.c * self.c / self.a)).sqrt()
    }

    /// Swap the roles of signal and idler.
    pub fn swapped(&self) -> Self {
        Self {
            a: self.b,
            b: self.a,
            c: self.c,
        }
    }

    /// ln|f|² at a grid point, up to a constant.
    pub fn log_intensity(&self, ds: f64, di: f64) -> f64 {
        -2.0 * self.a * ds * ds - 2.0 * self.b * di * di - 4.0 * self.c * ds * di
    }
}

/// A, B, C from the group slowness at the channel centers.
pub fn gauss_coeffs(
    fiber: &FiberSpec,
    pump: &PumpSpec,
    channel: &ChannelPair,
    alpha: f64,
) -> Result<GaussJsaCoeffs> {
    fiber.validate()?;
    pump.validate()?;
    let k = GroupSlowness::at(fiber, channel)?;
    Ok(coeffs_from_slowness(&k, pump.sigma_p(), alpha, fiber.length_m))
}

fn coeffs_from_slowness(k: &GroupSlowness, sigma_p: f64, alpha: f64, length: f64) -> GaussJsaCoeffs {
    let inv = 1.0 / (sigma_p * sigma_p);
    let al2 = (alpha * length).powi(2);
    GaussJsaCoeffs {
        a: inv + al2 * k.ps() * k.ps(),
        b: inv + al2 * k.pi() * k.pi(),
        c: inv + al2 * k.product(),
    }
}

/// 1 + σ_p²α²L²(k'_p − k'_s)(k'_p − k'_i); zero exactly when the Gaussian
/// JSA factorizes.
pub fn factorability_residual(k: &GroupSlowness, sigma_p: f64, alpha: f64, length: f64) -> Result<f64> {
    let product = k.product();
    if !(product < 0.0) {
        return Err(Error::NoFactorableWidth { product });
    }
    Ok(1.0 + (sigma_p * alpha * length).powi(2) * product)
}

/// σ_p that zeroes [`factorability_residual`].
pub fn factorable_sigma(k: &GroupSlowness, alpha: f64, length: f64) -> Result<f64> {
    let product = k.product();
    if !(product < 0.0) {
        return Err(Error::NoFactorableWidth { product });
    }
    Ok(1.0 / (alpha * length * (-product).sqrt()))
}

/// Pump intensity FWHM (s) for which the Gaussian JSA is separable.
///
/// The closed form is cross-checked against a golden-section maximization of
/// the analytic purity over pulse width; disagreement beyond 1e-3 relative is
/// reported as a numerical failure.
pub fn optimal_pump_width(fiber: &FiberSpec, channel: &ChannelPair, alpha: f64) -> Result<f64> {
    fiber.validate()?;
    let k = GroupSlowness::at(fiber, channel)?;
    let sigma = factorable_sigma(&k, alpha, fiber.length_m)?;
    let t_closed = fwhm_from_sigma(sigma)?;

    let purity_at = |log_t: f64| {
        let sigma_p = fwhm_from_sigma(log_t.exp()).unwrap_or(f64::NAN);
        let coeffs = coeffs_from_slowness(&k, sigma_p, alpha, fiber.length_m);
        purity_gauss_analytic(&coeffs).unwrap_or(0.0)
    };
    let lt = t_closed.ln();
    let (lt_num, _) = golden_section_max(purity_at, lt - 5.0, lt + 5.0, 1e-9, 500);
    let t_num = lt_num.exp();
    let rel = (t_num - t_closed).abs() / t_closed;
    if rel > 1e-3 {
        return Err(Error::Numerical(format!(
            "closed-form optimum {t_closed:.6e} s disagrees with purity maximization {t_num:.6e} s"
        )));
    }
    Ok(t_closed)
}

/// Grid whose half-range on both axes is `n_sigma` times the larger marginal
/// standard deviation of the Gaussian JSI.
pub fn default_grid(coeffs: &GaussJsaCoeffs, n_points: usize, n_sigma: f64) -> Result<GridSpec> {
    coeffs.validate()?;
    let half = n_sigma * coeffs.marginal_std_s().max(coeffs.marginal_std_i());
    GridSpec::new(n_points, half, half)
}

/// Discretized joint spectral amplitude.
#[derive(Debug, Clone)]
pub struct JsaGrid {
    /// `values[(j, k)]` = f(Δω_s[j], Δω_i[k]).
    pub values: DMatrix<Complex64>,
    pub axis_s: Vec<f64>,
    pub axis_i: Vec<f64>,
    pub channel: ChannelPair,
    /// `None` when built directly from Gaussian coefficients.
    pub mode: Option<PhaseMatching>,
    pub normalized: bool,
    /// Norm² kept by filtering, relative to the unfiltered state.
    pub heralding_efficiency: Option<f64>,
    pub warnings: Vec<String>,
}

impl JsaGrid {
    fn from_fn<F>(grid: &GridSpec, channel: ChannelPair, mode: Option<PhaseMatching>, f: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> Result<f64> + Sync,
    {
        grid.validate()?;
        let axis_s = grid.axis_s();
        let axis_i = grid.axis_i();
        let n = grid.n_points;
        let rows: Vec<Vec<f64>> = axis_s
            .par_iter()
            .map(|&ds| axis_i.iter().map(|&di| f(ds, di)).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        let values = DMatrix::from_fn(n, n, |j, k| Complex64::new(rows[j][k], 0.0));
        let mut jsa = Self {
            values,
            axis_s,
            axis_i,
            channel,
            mode,
            normalized: false,
            heralding_efficiency: None,
            warnings: Vec::new(),
        };
        jsa.normalize()?;
        jsa.check_edges();
        Ok(jsa)
    }

    /// Sample exp(−AΔs² − BΔi² − 2CΔsΔi), the amplitude of the Gaussian JSI.
    pub fn from_gauss_coeffs(coeffs: &GaussJsaCoeffs, grid: &GridSpec, channel: ChannelPair) -> Result<Self> {
        coeffs.validate()?;
        let c = *coeffs;
        Self::from_fn(grid, channel, None, move |ds, di| {
            Ok((0.5 * c.log_intensity(ds, di)).exp())
        })
    }

    pub fn n_points(&self) -> usize {
        self.axis_s.len()
    }

    pub fn spacing_s(&self) -> f64 {
        self.axis_s[1] - self.axis_s[0]
    }

    pub fn spacing_i(&self) -> f64 {
        self.axis_i[1] - self.axis_i[0]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn intensity(&self, j: usize, k: usize) -> f64 {
        self.values[(j, k)].norm_sqr()
    }

    pub fn is_real(&self) -> bool {
        self.values.iter().all(|z| z.im == 0.0)
    }

    /// Scale to unit Frobenius norm.
    pub fn normalize(&mut self) -> Result<()> {
        if self.values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("joint spectral amplitude"));
        }
        let norm = self.norm_sqr().sqrt();
        if !(norm > 0.0) {
            return Err(Error::Numerical("joint spectral amplitude vanishes on the grid".into()));
        }
        self.values.unscale_mut(norm);
        self.normalized = true;
        Ok(())
    }

    /// Fraction of the norm² in the two outermost rows and columns.
    pub fn edge_mass(&self) -> f64 {
        let n = self.n_points();
        let total = self.norm_sqr();
        let mut edge = 0.0;
        for j in 0..n {
            for k in 0..n {
                if j < 2 || j >= n - 2 || k < 2 || k >= n - 2 {
                    edge += self.intensity(j, k);
                }
            }
        }
        edge / total
    }

    fn check_edges(&mut self) {
        let edge = self.edge_mass();
        if edge > EDGE_MASS_LIMIT {
            self.warnings.push(format!(
                "grid range too small: {edge:.3e} of the norm lies in the outermost 2 rows/columns"
            ));
        }
    }
}

/// Sample f = ε(Δω_s + Δω_i)·Γ(Δk) over `grid` and normalize.
///
/// Sinc mode evaluates the full Taylor mismatch including the nonlinear
/// phase term; gauss mode linearizes the mismatch about the (assumed phase
/// matched) channel centers, which reproduces the Gaussian JSI exactly.
pub fn build_jsa(
    fiber: &FiberSpec,
    pump: &PumpSpec,
    channel: &ChannelPair,
    grid: &GridSpec,
    mode: PhaseMatching,
) -> Result<JsaGrid> {
    fiber.validate()?;
    pump.validate()?;
    let sigma_p = pump.sigma_p();
    let length = fiber.length_m;
    match mode {
        PhaseMatching::Sinc => {
            // Surface window violations before the parallel sweep.
            phase_mismatch(fiber, pump, channel.omega_s0 - grid.half_range_s, channel.omega_i0 - grid.half_range_i)?;
            phase_mismatch(fiber, pump, channel.omega_s0 + grid.half_range_s, channel.omega_i0 + grid.half_range_i)?;
            JsaGrid::from_fn(grid, *channel, Some(mode), |ds, di| {
                let dk = phase_mismatch(fiber, pump, channel.omega_s0 + ds, channel.omega_i0 + di)?;
                Ok(pump_envelope_amp(ds + di, sigma_p) * phase_matching_amp(dk, length, mode))
            })
        }
        PhaseMatching::Gauss { .. } => {
            let k = GroupSlowness::at(fiber, channel)?;
            JsaGrid::from_fn(grid, *channel, Some(mode), |ds, di| {
                let dk = k.ps() * ds + k.pi() * di;
                Ok(pump_envelope_amp(ds + di, sigma_p) * phase_matching_amp(dk, length, mode))
            })
        }
    }
}

/// Passband shape of a spectral filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FilterShape {
    Gaussian,
    /// exp[−ln2·(2δ/FWHM)^(2m)]; order 1 is the Gaussian.
    SuperGaussian { order: u32 },
    Rectangular,
}

/// Intensity transmission filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    /// Absolute center, rad/s.
    pub center: f64,
    /// Intensity FWHM, rad/s.
    pub fwhm: f64,
    pub shape: FilterShape,
}

impl FilterSpec {
    pub fn new(center: f64, fwhm: f64, shape: FilterShape) -> Result<Self> {
        let f = Self { center, fwhm, shape };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fwhm > 0.0) || !self.fwhm.is_finite() {
            return Err(domain("filter.fwhm", "must be finite and > 0"));
        }
        if !self.center.is_finite() {
            return Err(domain("filter.center", "must be finite"));
        }
        if let FilterShape::SuperGaussian { order } = self.shape {
            if order < 1 {
                return Err(domain("filter.order", "must be >= 1"));
            }
        }
        Ok(())
    }

    /// Intensity transmission T(ω).
    pub fn transmission(&self, omega: f64) -> f64 {
        let u = 2.0 * (omega - self.center) / self.fwhm;
        match self.shape {
            FilterShape::Gaussian => (-LN_2 * u * u).exp(),
            FilterShape::SuperGaussian { order } => (-LN_2 * (u * u).powi(order as i32)).exp(),
            FilterShape::Rectangular => {
                if u.abs() <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    fn amplitudes(&self, axis: &[f64], center: f64) -> Result<Vec<f64>> {
        let lo = center + axis[0];
        let hi = center + axis[axis.len() - 1];
        let half = 0.5 * self.fwhm;
        let overlaps = self.center + half >= lo && self.center - half <= hi;
        let amps: Vec<f64> = axis.iter().map(|d| self.transmission(center + d).sqrt()).collect();
        if !overlaps || amps.iter().all(|&t| t == 0.0) {
            return Err(Error::FilterOutsideGrid { center: self.center });
        }
        Ok(amps)
    }
}

/// Multiply the JSA by the amplitude transmissions sqrt(T) of the signal
/// and idler filters, record the kept norm² as heralding efficiency, and
/// renormalize.
pub fn apply_filters(jsa: &JsaGrid, f_s: &FilterSpec, f_i: &FilterSpec) -> Result<JsaGrid> {
    f_s.validate()?;
    f_i.validate()?;
    let ts = f_s.amplitudes(&jsa.axis_s, jsa.channel.omega_s0)?;
    let ti = f_i.amplitudes(&jsa.axis_i, jsa.channel.omega_i0)?;
    let before = jsa.norm_sqr();
    let mut out = jsa.clone();
    for k in 0..out.values.ncols() {
        for j in 0..out.values.nrows() {
            out.values[(j, k)] *= ts[j] * ti[k];
        }
    }
    let kept = out.norm_sqr() / before;
    if !(kept > 0.0) {
        return Err(Error::Numerical("filters remove the entire joint spectrum".into()));
    }
    out.heralding_efficiency = Some(kept * jsa.heralding_efficiency.unwrap_or(1.0));
    out.normalize()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phys::{itu_channel_omega, sigma_from_fwhm};
    use approx::assert_relative_eq;
    use std::f64::consts::{E, PI};

    fn paper_setup() -> (FiberSpec, PumpSpec, ChannelPair) {
        let wp = itu_channel_omega(0).unwrap();
        let ch = ChannelPair::itu(0, 8, -8).unwrap();
        let fiber = FiberSpec::with_symmetric_gvm(300.0, 2e-3, 77.0, wp, ch.offset(), 8e-12, DEFAULT_ALPHA).unwrap();
        let pump = PumpSpec::new(wp, 25e-12, 23e-6, 27.9e6).unwrap();
        (fiber, pump, ch)
    }

    #[test]
    fn envelope_values() {
        assert_eq!(pump_envelope_amp(0.0, 3e11), 1.0);
        assert_relative_eq!(pump_envelope_amp(3e11, 3e11), 1.0 / E, max_relative = 1e-15);
        assert_relative_eq!(pump_envelope_amp(3e11, 3e11).powi(2), (-2.0f64).exp(), max_relative = 1e-14);
        for x in [1e9, 7.3e10, 4e11] {
            assert_eq!(pump_envelope_amp(x, 2e11), pump_envelope_amp(-x, 2e11));
        }
    }

    #[test]
    fn phase_matching_values() {
        assert_eq!(phase_matching_amp(0.0, 300.0, PhaseMatching::Sinc), 1.0);
        assert_eq!(phase_matching_amp(0.0, 300.0, PhaseMatching::gauss()), 1.0);
        let dk = 2.0 * PI / 300.0;
        assert!(phase_matching_amp(dk, 300.0, PhaseMatching::Sinc).abs() < 1e-15);
        let dk = 1.0 / (DEFAULT_ALPHA * 300.0);
        assert_relative_eq!(phase_matching_amp(dk, 300.0, PhaseMatching::gauss()), 1.0 / E, max_relative = 1e-14);
    }

    #[test]
    fn sinc_small_argument_is_continuous() {
        for x in [0.99e-4, 1.01e-4, 3e-5] {
            assert_relative_eq!(sinc(x), x.sin() / x, max_relative = 1e-15);
        }
    }

    #[test]
    fn squared_amplitudes_reproduce_intensities() {
        let (l, dk) = (300.0, 0.0123);
        let sinc_i = phase_matching_amp(dk, l, PhaseMatching::Sinc).powi(2);
        assert_relative_eq!(sinc_i, ((dk * l / 2.0).sin() / (dk * l / 2.0)).powi(2), max_relative = 1e-14);
        let g = phase_matching_amp(dk, l, PhaseMatching::gauss()).powi(2);
        assert_relative_eq!(g, (-2.0 * 0.22f64.powi(2) * (dk * l).powi(2)).exp(), max_relative = 1e-14);
    }

    #[test]
    fn mismatch_nonlinear_term_only() {
        let wp = 1.2e15;
        let fiber = FiberSpec::new(300.0, 2e-3, [0.0; 5], wp, 300.0).unwrap();
        let pump = PumpSpec::new(wp, 25e-12, 23e-6, 27.9e6).unwrap();
        let x = fiber.gamma * pump.peak_power();
        assert_relative_eq!(phase_mismatch(&fiber, &pump, wp + 1e12, wp - 1e12).unwrap(), 2.0 * x, max_relative = 1e-14);
    }

    #[test]
    fn mismatch_beta2_symbolic() {
        let wp = 1.2e15;
        let b2 = -1.7e-26;
        let fiber = FiberSpec::new(300.0, 0.0, [0.0, 0.0, b2, 0.0, 0.0], wp, 300.0).unwrap();
        let pump = PumpSpec::new(wp, 25e-12, 23e-6, 27.9e6).unwrap();
        let om = 3.3e12;
        let dk = phase_mismatch(&fiber, &pump, wp + om, wp - om).unwrap();
        assert_relative_eq!(dk, -b2 * om * om, max_relative = 1e-12);
        let direct = 2.0 * wavevector(&fiber, wp).unwrap()
            - wavevector(&fiber, wp + om).unwrap()
            - wavevector(&fiber, wp - om).unwrap();
        assert_relative_eq!(dk, direct, max_relative = 1e-14);
    }

    #[test]
    fn mismatch_constructed_root() {
        let (mut fiber, pump, ch) = paper_setup();
        fiber.gamma = 0.0;
        let dk = phase_mismatch(&fiber, &pump, ch.omega_s0, ch.omega_i0).unwrap();
        // Cancellation between terms of size |k(ω_s)|.
        let scale = wavevector(&fiber, ch.omega_s0).unwrap().abs();
        assert!(dk.abs() < 1e-12 * scale, "{dk}");
    }

    #[test]
    fn degenerate_gvm_coeffs() {
        let wp = 1.2e15;
        let fiber = FiberSpec::new(300.0, 2e-3, [0.0, 4.9e-9, 0.0, 0.0, 0.0], wp, 77.0).unwrap();
        let pump = PumpSpec::new(wp, 25e-12, 23e-6, 27.9e6).unwrap();
        let ch = ChannelPair::symmetric(wp, 5e12).unwrap();
        let c = gauss_coeffs(&fiber, &pump, &ch, DEFAULT_ALPHA).unwrap();
        let inv = 1.0 / pump.sigma_p().powi(2);
        assert_relative_eq!(c.a, inv, max_relative = 1e-14);
        assert_relative_eq!(c.b, inv, max_relative = 1e-14);
        assert_relative_eq!(c.c, inv, max_relative = 1e-14);
        // Not normalizable: AB = C².
        assert!(c.validate().is_err());
    }

    #[test]
    fn symmetric_gvm_cross_coefficient() {
        let (fiber, pump, ch) = paper_setup();
        let c = gauss_coeffs(&fiber, &pump, &ch, DEFAULT_ALPHA).unwrap();
        let sp = pump.sigma_p();
        let ss = sigma_from_fwhm(8e-12).unwrap();
        assert_relative_eq!(c.c, (1.0 - sp * sp / (ss * ss)) / (sp * sp), max_relative = 1e-9);
        assert_relative_eq!(c.a, c.b, max_relative = 1e-9);
        let at_opt = gauss_coeffs(&fiber, &pump.with_t_fwhm(8e-12), &ch, DEFAULT_ALPHA).unwrap();
        assert!(at_opt.c.abs() < 1e-9 * at_opt.a, "{at_opt:?}");
    }

    #[test]
    fn residual_identities() {
        let (fiber, pump, ch) = paper_setup();
        let k = GroupSlowness::at(&fiber, &ch).unwrap();
        let l = fiber.length_m;
        assert_relative_eq!(factorability_residual(&k, 1e3, DEFAULT_ALPHA, l).unwrap(), 1.0, max_relative = 1e-12);
        let root = factorable_sigma(&k, DEFAULT_ALPHA, l).unwrap();
        assert!(factorability_residual(&k, root, DEFAULT_ALPHA, l).unwrap().abs() < 1e-12);
        // residual = σ_p² C
        let sp = pump.sigma_p();
        let c = gauss_coeffs(&fiber, &pump, &ch, DEFAULT_ALPHA).unwrap();
        assert_relative_eq!(factorability_residual(&k, sp, DEFAULT_ALPHA, l).unwrap(), sp * sp * c.c, max_relative = 1e-12);
        let same_sign = GroupSlowness { pump: 1.0, signal: 0.5, idler: 0.2 };
        assert!(matches!(
            factorability_residual(&same_sign, sp, DEFAULT_ALPHA, l),
            Err(Error::NoFactorableWidth { .. })
        ));
    }

    #[test]
    fn optimum_is_eight_ps() {
        let (fiber, _, ch) = paper_setup();
        let t = optimal_pump_width(&fiber, &ch, DEFAULT_ALPHA).unwrap();
        assert_relative_eq!(t, 8e-12, max_relative = 1e-9);
    }

    #[test]
    fn doubling_gvm_doubles_optimal_width() {
        let (mut fiber, _, ch) = paper_setup();
        let t1 = optimal_pump_width(&fiber, &ch, DEFAULT_ALPHA).unwrap();
        fiber.beta[2] *= 2.0;
        fiber.beta[4] *= 2.0;
        let t2 = optimal_pump_width(&fiber, &ch, DEFAULT_ALPHA).unwrap();
        assert_relative_eq!(t2, 2.0 * t1, max_relative = 1e-9);
    }

    #[test]
    fn no_optimum_for_same_sign_gvm() {
        let wp = 1.2e15;
        // Pure β₃ gives (k'_p - k'_s)(k'_p - k'_i) > 0.
        let fiber = FiberSpec::new(300.0, 2e-3, [0.0, 4.9e-9, 0.0, 1e-40, 0.0], wp, 77.0).unwrap();
        let ch = ChannelPair::symmetric(wp, 5e12).unwrap();
        assert!(matches!(
            optimal_pump_width(&fiber, &ch, DEFAULT_ALPHA),
            Err(Error::NoFactorableWidth { .. })
        ));
    }

    #[test]
    fn built_jsa_is_normalized() {
        let (fiber, pump, ch) = paper_setup();
        let c = gauss_coeffs(&fiber, &pump, &ch, DEFAULT_ALPHA).unwrap();
        let grid = default_grid(&c, 64, 4.0).unwrap();
        for mode in [PhaseMatching::gauss(), PhaseMatching::Sinc] {
            let jsa = build_jsa(&fiber, &pump, &ch, &grid, mode).unwrap();
            assert!((jsa.norm_sqr() - 1.0).abs() < 1e-12);
            assert!(jsa.normalized);
            assert!(jsa.is_real());
        }
    }

    #[test]
    fn degenerate_case_depends_only_on_sum() {
        let wp = 1.2e15;
        let fiber = FiberSpec::new(300.0, 2e-3, [0.0, 4.9e-9, 0.0, 0.0, 0.0], wp, 77.0).unwrap();
        let pump = PumpSpec::new(wp, 5e-12, 23e-6, 27.9e6).unwrap();
        let ch = ChannelPair::symmetric(wp, 5e12).unwrap();
        let grid = GridSpec::new(32, 1e12, 1e12).unwrap();
        let jsa = build_jsa(&fiber, &pump, &ch, &grid, PhaseMatching::gauss()).unwrap();
        let n = 32;
        // Anti-diagonals have constant Δs + Δi.
        for s in 5usize..(2 * n - 6) {
            let pts: Vec<f64> = (0..n)
                .filter_map(|j| s.checked_sub(j).filter(|&k| k < n).map(|k| jsa.intensity(j, k)))
                .collect();
            let first = pts[0];
            assert!(pts.iter().all(|p| (p - first).abs() <= 1e-12 * first.max(1e-300)));
        }
    }

    #[test]
    fn small_grid_is_flagged() {
        let (fiber, pump, ch) = paper_setup();
        let c = gauss_coeffs(&fiber, &pump, &ch, DEFAULT_ALPHA).unwrap();
        let narrow = default_grid(&c, 32, 1.0).unwrap();
        let jsa = build_jsa(&fiber, &pump, &ch, &narrow, PhaseMatching::gauss()).unwrap();
        assert!(!jsa.warnings.is_empty());
        let wide = default_grid(&c, 64, 4.0).unwrap();
        let jsa = build_jsa(&fiber, &pump, &ch, &wide, PhaseMatching::gauss()).unwrap();
        assert!(jsa.warnings.is_empty(), "{:?}", jsa.warnings);
    }

    #[test]
    fn filter_shapes() {
        let f = FilterSpec::new(0.0, 2.0, FilterShape::Gaussian).unwrap();
        assert_relative_eq!(f.transmission(1.0), 0.5, max_relative = 1e-15);
        let sg = FilterSpec::new(0.0, 2.0, FilterShape::SuperGaussian { order: 3 }).unwrap();
        assert_relative_eq!(sg.transmission(1.0), 0.5, max_relative = 1e-15);
        assert!(sg.transmission(0.5) > f.transmission(0.5));
        let sg1 = FilterSpec::new(0.0, 2.0, FilterShape::SuperGaussian { order: 1 }).unwrap();
        assert_relative_eq!(sg1.transmission(0.7), f.transmission(0.7), max_relative = 1e-15);
        let r = FilterSpec::new(0.0, 2.0, FilterShape::Rectangular).unwrap();
        assert_eq!(r.transmission(0.99), 1.0);
        assert_eq!(r.transmission(1.01), 0.0);
        assert!(FilterSpec::new(0.0, 0.0, FilterShape::Gaussian).is_err());
        assert!(FilterSpec::new(0.0, 1.0, FilterShape::SuperGaussian { order: 0 }).is_err());
    }

    #[test]
    fn wide_rectangular_filter_is_identity() {
        let (fiber, pump, ch) = paper_setup();
        let c = gauss_coeffs(&fiber, &pump, &ch, DEFAULT_ALPHA).unwrap();
        let grid = default_grid(&c, 64, 4.0).unwrap();
        let jsa = build_jsa(&fiber, &pump, &ch, &grid, PhaseMatching::gauss()).unwrap();
        let wide = 10.0 * grid.half_range_s;
        let fs = FilterSpec::new(ch.omega_s0, wide, FilterShape::Rectangular).unwrap();
        let fi = FilterSpec::new(ch.omega_i0, wide, FilterShape::Rectangular).unwrap();
        let out = apply_filters(&jsa, &fs, &fi).unwrap();
        assert_eq!(out.heralding_efficiency, Some(1.0));
        assert!((&out.values - &jsa.values).norm() < 1e-15);
    }

    #[test]
    fn filter_outside_grid_is_rejected() {
        let (fiber, pump, ch) = paper_setup();
        let c = gauss_coeffs(&fiber, &pump, &ch, DEFAULT_ALPHA).unwrap();
        let grid = default_grid(&c, 32, 4.0).unwrap();
        let jsa = build_jsa(&fiber, &pump, &ch, &grid, PhaseMatching::gauss()).unwrap();
        let away = FilterSpec::new(ch.omega_s0 + 100.0 * grid.half_range_s, grid.half_range_s, FilterShape::Rectangular).unwrap();
        let ok = FilterSpec::new(ch.omega_i0, grid.half_range_i, FilterShape::Gaussian).unwrap();
        assert!(matches!(apply_filters(&jsa, &away, &ok), Err(Error::FilterOutsideGrid { .. })));
    }
}
