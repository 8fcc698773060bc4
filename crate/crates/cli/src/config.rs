//! JSON run configuration in lab units, and its resolution into SI types.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use sfwm_core::counts::{
    calibrate_car_peak, CarDefinition, DetectorMode, DetectorSet, DetectorSpec, HomSetup, HomOverlap, PairStatistics,
    RamanSide, RamanSpec, Scenario,
};
use sfwm_core::jsa::{FilterShape, FilterSpec, PhaseMatching, DEFAULT_ALPHA};
use sfwm_core::phys::{itu_channel_omega, ChannelPair, FiberSpec, PumpSpec};

use crate::error::CliError;

const C_LIGHT: f64 = 299_792_458.0;

/// Squared-residual ceiling for an accepted CAR-peak calibration.
const CALIBRATION_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub name: Option<String>,
    /// Free-form notes on values that are assumptions rather than measurements.
    #[serde(default)]
    pub assumptions: Vec<String>,
    pub fiber: FiberConfig,
    pub pump: PumpConfig,
    pub channels: ChannelConfig,
    #[serde(default)]
    pub filters: Option<FilterPair>,
    #[serde(default)]
    pub phase_matching: PhaseMatchingConfig,
    #[serde(default)]
    pub grid: GridConfig,
    pub detectors: DetectorConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default = "one")]
    pub capture: f64,
    pub coincidence_window_ns: f64,
    #[serde(default)]
    pub statistics: PairStatistics,
    #[serde(default)]
    pub car_definition: CarDefinition,
    #[serde(default)]
    pub scan: ScanConfig,
    #[serde(default)]
    pub hom: HomConfig,
    #[serde(default)]
    pub car: CarConfig,
    #[serde(default)]
    pub mc: McConfig,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberConfig {
    pub length_m: f64,
    pub gamma_per_w_m: f64,
    pub temperature_k: f64,
    pub dispersion: DispersionConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DispersionConfig {
    /// β₀..β₄ in sⁿ/m about `reference_thz`.
    Taylor { beta: [f64; 5], reference_thz: f64 },
    /// Equal and opposite pump-sideband walk-off, phase matched at the
    /// channel centers, with the factorable pump width at `optimum_t_fwhm_ps`.
    SymmetricGvm { optimum_t_fwhm_ps: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpConfig {
    #[serde(default)]
    pub itu_channel: Option<i32>,
    #[serde(default)]
    pub wavelength_nm: Option<f64>,
    pub t_fwhm_ps: f64,
    pub p_avg_uw: f64,
    pub rep_rate_mhz: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub signal_itu: i32,
    pub idler_itu: i32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterPair {
    pub signal: FilterConfig,
    pub idler: FilterConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    pub fwhm_ghz: f64,
    #[serde(default = "gaussian")]
    pub shape: FilterShape,
}

fn gaussian() -> FilterShape {
    FilterShape::Gaussian
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Sinc,
    Gauss,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseMatchingConfig {
    pub mode: Mode,
    pub alpha: f64,
}

impl Default for PhaseMatchingConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Gauss,
            alpha: DEFAULT_ALPHA,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_points: usize,
    pub n_sigma: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n_points: 512,
            n_sigma: 4.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    /// Free-running detectors on the idler arms.
    pub herald: DetectorUnits,
    /// Gated detectors behind the beam splitter.
    pub signal: DetectorUnits,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorUnits {
    pub efficiency: f64,
    #[serde(default)]
    pub dark_rate_hz: f64,
    pub dead_time_us: f64,
    pub gate_window_ns: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// Photons per pulse per watt of average pump, per unit occupation.
    #[serde(default)]
    pub raman_coeff_per_w: f64,
    /// Fit Raman coefficient and dark rate so the CAR curve peaks here.
    #[serde(default)]
    pub calibrate_peak: Option<PeakAnchor>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeakAnchor {
    pub p_avg_uw: f64,
    pub car: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub t_min_ps: f64,
    pub t_max_ps: f64,
    pub steps: usize,
    pub numeric: bool,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            t_min_ps: 1.0,
            t_max_ps: 64.0,
            steps: 64,
            numeric: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomConfig {
    pub max_delay_ps: f64,
    pub n_delays: usize,
    /// S/(S+B) of the additive background.
    pub signal_fraction: f64,
    pub acquisition_s: f64,
    /// Overrides for the second source; absent means identical sources.
    #[serde(default)]
    pub second_source: Option<SourceOverride>,
}

impl Default for HomConfig {
    fn default() -> Self {
        Self {
            max_delay_ps: 40.0,
            n_delays: 161,
            signal_fraction: 1.0,
            acquisition_s: 1000.0,
            second_source: None,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceOverride {
    #[serde(default)]
    pub t_fwhm_ps: Option<f64>,
    #[serde(default)]
    pub filters: Option<FilterPair>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarConfig {
    pub p_min_uw: f64,
    pub p_max_uw: f64,
    pub points: usize,
}

impl Default for CarConfig {
    fn default() -> Self {
        Self {
            p_min_uw: 1.0,
            p_max_uw: 200.0,
            points: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum McKind {
    Car,
    Hom,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub kind: McKind,
    pub n_pulses: u64,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            kind: McKind::Car,
            n_pulses: 1_000_000,
            seed: None,
        }
    }
}

/// A configuration problem, tied to a dotted key path when one is known.
#[derive(Debug, Clone)]
pub struct ConfigError {
    pub path: Option<String>,
    pub line: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match (&self.line, &self.path) {
            (Some(l), Some(p)) => write!(f, "line {l}: `{p}`: {}", self.message),
            (Some(l), None) => write!(f, "line {l}: {}", self.message),
            (None, Some(p)) => write!(f, "`{p}`: {}", self.message),
            (None, None) => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn bad(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        path: Some(path.to_string()),
        line: None,
        message: message.into(),
    }
}

fn positive(path: &str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(bad(path, format!("must be finite and > 0, got {v}")))
    }
}

fn non_negative(path: &str, v: f64) -> Result<f64, ConfigError> {
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(bad(path, format!("must be finite and >= 0, got {v}")))
    }
}

/// 1-based line of the last key in `path` (dot separated), found by
/// scanning for each key in turn.
pub fn locate(text: &str, path: &str) -> Option<usize> {
    let mut pos = 0;
    for key in path.split('.') {
        let needle = format!("\"{key}\"");
        pos += text[pos..].find(&needle)?;
    }
    Some(text[..pos].matches('\n').count() + 1)
}

pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
    serde_json::from_str(text).map_err(|e| ConfigError {
        path: None,
        line: Some(e.line()),
        message: e.to_string(),
    })
}

/// Everything the commands need, in SI units.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub scenario: Scenario,
    pub mode: PhaseMatching,
    pub alpha: f64,
    pub n_points: usize,
    pub n_sigma: f64,
    pub filters: Option<(FilterSpec, FilterSpec)>,
    /// Pump and filters of the second HOM source.
    pub second_pump: PumpSpec,
    pub second_filters: Option<(FilterSpec, FilterSpec)>,
    pub calibration: Option<Calibration>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Calibration {
    pub raman_coeff_per_w: f64,
    pub dark_rate_hz: f64,
}

fn filters(path: &str, pair: &FilterPair, channel: &ChannelPair) -> Result<(FilterSpec, FilterSpec), ConfigError> {
    let make = |sub: &str, f: &FilterConfig, center: f64| {
        let p = format!("{path}.{sub}.fwhm_ghz");
        let fwhm = 2.0 * PI * 1e9 * positive(&p, f.fwhm_ghz)?;
        if let FilterShape::SuperGaussian { order } = f.shape {
            if order < 1 {
                return Err(bad(&format!("{path}.{sub}.shape"), "super-Gaussian order must be >= 1"));
            }
        }
        FilterSpec::new(center, fwhm, f.shape).map_err(|e| bad(&p, e.to_string()))
    };
    Ok((
        make("signal", &pair.signal, channel.omega_s0)?,
        make("idler", &pair.idler, channel.omega_i0)?,
    ))
}

fn detector(path: &str, d: &DetectorUnits, mode: DetectorMode) -> Result<DetectorSpec, ConfigError> {
    let eff = d.efficiency;
    if !(0.0..=1.0).contains(&eff) {
        return Err(bad(&format!("{path}.efficiency"), format!("must lie in [0, 1], got {eff}")));
    }
    Ok(DetectorSpec {
        efficiency: eff,
        dark_rate: non_negative(&format!("{path}.dark_rate_hz"), d.dark_rate_hz)?,
        dead_time: 1e-6 * non_negative(&format!("{path}.dead_time_us"), d.dead_time_us)?,
        gate_window: 1e-9 * non_negative(&format!("{path}.gate_window_ns"), d.gate_window_ns)?,
        mode,
    })
}

/// Convert units, validate, and, when `calibrate` is set, run the optional
/// CAR-peak calibration. Validation failures carry a key path; calibration
/// failures are numerical.
pub fn resolve(cfg: &RunConfig, calibrate: bool) -> Result<Resolved, CliError> {
    let mut resolved = convert(cfg)?;
    if let Some(anchor) = cfg.noise.calibrate_peak.as_ref().filter(|_| calibrate) {
        let fit = calibrate_car_peak(&resolved.scenario, 1e-6 * anchor.p_avg_uw, anchor.car).map_err(CliError::Numerical)?;
        if !(fit.cost < CALIBRATION_TOLERANCE) {
            return Err(CliError::Numerical(sfwm_core::Error::Numerical(format!(
                "CAR peak calibration did not reach the anchor (residuals {:?})",
                fit.residuals
            ))));
        }
        resolved.calibration = Some(Calibration {
            raman_coeff_per_w: fit.raman_coeff,
            dark_rate_hz: fit.dark_rate,
        });
        resolved.scenario = fit.scenario;
    }
    Ok(resolved)
}

fn convert(cfg: &RunConfig) -> Result<Resolved, ConfigError> {
    let channel = ChannelPair::itu(0, cfg.channels.signal_itu, cfg.channels.idler_itu)
        .map_err(|e| bad("channels.signal_itu", e.to_string()))?;
    let omega_p0 = match (cfg.pump.itu_channel, cfg.pump.wavelength_nm) {
        (Some(_), Some(_)) => return Err(bad("pump.itu_channel", "give either itu_channel or wavelength_nm")),
        (Some(ch), None) => itu_channel_omega(ch).map_err(|e| bad("pump.itu_channel", e.to_string()))?,
        (None, Some(nm)) => 2.0 * PI * C_LIGHT / (1e-9 * positive("pump.wavelength_nm", nm)?),
        (None, None) => return Err(bad("pump", "missing itu_channel or wavelength_nm")),
    };
    // Channels are ITU indices relative to the pump channel.
    let shift = omega_p0 - itu_channel_omega(0).expect("channel 0 exists");
    let channel = ChannelPair::new(channel.omega_s0 + shift, channel.omega_i0 + shift, omega_p0)
        .map_err(|e| bad("channels", e.to_string()))?;

    let pm_alpha = positive("phase_matching.alpha", cfg.phase_matching.alpha)?;
    let length = positive("fiber.length_m", cfg.fiber.length_m)?;
    let gamma = non_negative("fiber.gamma_per_w_m", cfg.fiber.gamma_per_w_m)?;
    let temperature = positive("fiber.temperature_k", cfg.fiber.temperature_k)?;
    let fiber = match &cfg.fiber.dispersion {
        DispersionConfig::Taylor { beta, reference_thz } => {
            let omega_ref = 2.0 * PI * 1e12 * positive("fiber.dispersion.reference_thz", *reference_thz)?;
            FiberSpec::new(length, gamma, *beta, omega_ref, temperature)
                .map_err(|e| bad("fiber.dispersion.beta", e.to_string()))?
        }
        DispersionConfig::SymmetricGvm { optimum_t_fwhm_ps } => {
            let t = 1e-12 * positive("fiber.dispersion.optimum_t_fwhm_ps", *optimum_t_fwhm_ps)?;
            FiberSpec::with_symmetric_gvm(length, gamma, temperature, omega_p0, channel.offset(), t, pm_alpha)
                .map_err(|e| bad("fiber.dispersion", e.to_string()))?
        }
    };
    let pump = PumpSpec::new(
        omega_p0,
        1e-12 * positive("pump.t_fwhm_ps", cfg.pump.t_fwhm_ps)?,
        1e-6 * positive("pump.p_avg_uw", cfg.pump.p_avg_uw)?,
        1e6 * positive("pump.rep_rate_mhz", cfg.pump.rep_rate_mhz)?,
    )
    .map_err(|e| bad("pump", e.to_string()))?;

    let grid = &cfg.grid;
    if grid.n_points < 16 || grid.n_points % 2 != 0 {
        return Err(bad("grid.n_points", format!("must be even and >= 16, got {}", grid.n_points)));
    }
    positive("grid.n_sigma", grid.n_sigma)?;
    let filter_specs = cfg.filters.as_ref().map(|f| filters("filters", f, &channel)).transpose()?;

    let herald = detector("detectors.herald", &cfg.detectors.herald, DetectorMode::FreeRunning)?;
    let signal = detector("detectors.signal", &cfg.detectors.signal, DetectorMode::Gated)?;
    let capture = cfg.capture;
    if !(capture > 0.0 && capture <= 1.0) {
        return Err(bad("capture", format!("must lie in (0, 1], got {capture}")));
    }
    let raman_coeff = non_negative("noise.raman_coeff_per_w", cfg.noise.raman_coeff_per_w)?;
    let hom = &cfg.hom;
    positive("hom.max_delay_ps", hom.max_delay_ps)?;
    if hom.n_delays < 3 {
        return Err(bad("hom.n_delays", "must be >= 3"));
    }
    if !(hom.signal_fraction > 0.0 && hom.signal_fraction <= 1.0) {
        return Err(bad("hom.signal_fraction", "must lie in (0, 1]"));
    }
    positive("hom.acquisition_s", hom.acquisition_s)?;
    let car = &cfg.car;
    positive("car.p_min_uw", car.p_min_uw)?;
    if !(car.p_max_uw > car.p_min_uw) {
        return Err(bad("car.p_max_uw", "must exceed car.p_min_uw"));
    }
    if car.points < 3 {
        return Err(bad("car.points", "must be >= 3"));
    }
    let scan = &cfg.scan;
    positive("scan.t_min_ps", scan.t_min_ps)?;
    if !(scan.t_max_ps > scan.t_min_ps) {
        return Err(bad("scan.t_max_ps", "must exceed scan.t_min_ps"));
    }
    if scan.steps < 3 {
        return Err(bad("scan.steps", "must be >= 3"));
    }

    let scenario = Scenario {
        fiber,
        pump,
        channel,
        detectors: DetectorSet {
            herald_1: herald,
            signal_1: signal,
            signal_2: signal,
            herald_2: herald,
        },
        raman_s: RamanSpec {
            coeff: raman_coeff,
            phonon_shift: (channel.omega_s0 - omega_p0).abs(),
            side: if channel.omega_s0 > omega_p0 { RamanSide::AntiStokes } else { RamanSide::Stokes },
        },
        raman_i: RamanSpec {
            coeff: raman_coeff,
            phonon_shift: (channel.omega_i0 - omega_p0).abs(),
            side: if channel.omega_i0 > omega_p0 { RamanSide::AntiStokes } else { RamanSide::Stokes },
        },
        capture,
        coincidence_window: 1e-9 * positive("coincidence_window_ns", cfg.coincidence_window_ns)?,
        statistics: cfg.statistics,
        car_definition: cfg.car_definition,
        hom: Some(HomSetup {
            // Replaced by the computed dip before any four-fold simulation.
            overlap: HomOverlap::Gaussian { peak: 0.0, rms_width: 1.0 },
            signal_fraction: hom.signal_fraction,
            acquisition_time: hom.acquisition_s,
        }),
    };
    scenario.validate().map_err(|e| bad("detectors", e.to_string()))?;

    let (second_pump, second_filters) = match &hom.second_source {
        None => (pump, filter_specs),
        Some(o) => {
            let p = match o.t_fwhm_ps {
                Some(t) => pump.with_t_fwhm(1e-12 * positive("hom.second_source.t_fwhm_ps", t)?),
                None => pump,
            };
            let f = match &o.filters {
                Some(f) => Some(filters("hom.second_source.filters", f, &channel)?),
                None => filter_specs,
            };
            (p, f)
        }
    };

    let mode = match cfg.phase_matching.mode {
        Mode::Sinc => PhaseMatching::Sinc,
        Mode::Gauss => PhaseMatching::Gauss { alpha: pm_alpha },
    };

    if let Some(anchor) = &cfg.noise.calibrate_peak {
        positive("noise.calibrate_peak.p_avg_uw", anchor.p_avg_uw)?;
        if !(anchor.car > 1.0) {
            return Err(bad("noise.calibrate_peak.car", "must be > 1"));
        }
    }

    Ok(Resolved {
        scenario,
        mode,
        alpha: pm_alpha,
        n_points: grid.n_points,
        n_sigma: grid.n_sigma,
        filters: filter_specs,
        second_pump,
        second_filters,
        calibration: None,
    })
}
