//! Count-rate model for a heralded pair source: pair generation, Raman
//! noise, detector dark counts and the coincidence-to-accidental ratio,
//! plus event-level Monte Carlo for two-fold and four-fold experiments.

mod fit;
mod mc;

pub use fit::{calibrate_car_peak, fit_noise, NoiseFit};
pub use mc::{
    mc_run_car, mc_run_car_with, mc_run_hom, DipFit, HomMcResult, HomMcRow, McCarResult, McCounts, McOptions,
    MIN_CAR_PULSES,
};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::hom::DipCurve;
use crate::optimize::golden_section_max;
use crate::phys::{thermal_occupation, ChannelPair, FiberSpec, PumpSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorMode {
    FreeRunning,
    Gated,
}

/// Single-photon detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    pub efficiency: f64,
    /// Counts per second.
    pub dark_rate: f64,
    /// Seconds.
    pub dead_time: f64,
    /// Window over which dark counts accumulate per pulse, seconds.
    pub gate_window: f64,
    pub mode: DetectorMode,
}

impl DetectorSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(domain("detector.efficiency", format!("must lie in [0, 1], got {}", self.efficiency)));
        }
        for (name, v) in [
            ("detector.dark_rate", self.dark_rate),
            ("detector.dead_time", self.dead_time),
            ("detector.gate_window", self.gate_window),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(domain(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Dark-count probability per pulse, dark_rate·gate_window.
    pub fn dark_per_pulse(&self) -> f64 {
        (self.dark_rate * self.gate_window).min(1.0)
    }

    /// Number of pulses after a click during which the detector is blind.
    pub fn blind_pulses(&self, rep_rate: f64) -> u64 {
        let x = self.dead_time * rep_rate;
        if x <= 0.0 {
            0
        } else {
            // Pulses m >= 1 with m / rep_rate < dead_time.
            (x.ceil() as u64).saturating_sub(1)
        }
    }
}

/// The four detectors of the heralded HOM experiment. Source 1 is heralded
/// by `herald_1` with its signal arriving at `signal_1`; likewise source 2.
/// `signal_1`/`signal_2` sit behind the interfering beam splitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorSet {
    pub herald_1: DetectorSpec,
    pub signal_1: DetectorSpec,
    pub signal_2: DetectorSpec,
    pub herald_2: DetectorSpec,
}

impl DetectorSet {
    pub fn all(&self) -> [&DetectorSpec; 4] {
        [&self.herald_1, &self.signal_1, &self.signal_2, &self.herald_2]
    }

    pub fn all_mut(&mut self) -> [&mut DetectorSpec; 4] {
        [&mut self.herald_1, &mut self.signal_1, &mut self.signal_2, &mut self.herald_2]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RamanSide {
    Stokes,
    AntiStokes,
}

/// Spontaneous Raman noise into one channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RamanSpec {
    /// Photons per pulse per watt of average pump power, per unit phonon
    /// occupation factor.
    pub coeff: f64,
    /// |ω_channel − ω_p0|, rad/s.
    pub phonon_shift: f64,
    pub side: RamanSide,
}

impl RamanSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.coeff >= 0.0) || !self.coeff.is_finite() {
            return Err(domain("raman.coeff", "must be finite and >= 0"));
        }
        if !(self.phonon_shift > 0.0) {
            return Err(domain("raman.phonon_shift", "must be > 0"));
        }
        Ok(())
    }

    /// n_th + 1 (Stokes) or n_th (anti-Stokes).
    pub fn occupation(&self, temperature_k: f64) -> f64 {
        let n = thermal_occupation(self.phonon_shift, temperature_k);
        match self.side {
            RamanSide::Stokes => n + 1.0,
            RamanSide::AntiStokes => n,
        }
    }
}

/// Photon-number statistics of the pair source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairStatistics {
    /// Many-mode limit.
    #[default]
    Poisson,
    /// Single-mode thermal (geometric) distribution.
    Thermal,
}

/// Which ratio is reported as CAR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CarDefinition {
    /// (true + accidental) / accidental: raw zero-delay peak over side peaks.
    #[default]
    MeasuredOverAccidental,
    /// true / accidental.
    TrueOverAccidental,
}

/// Interference overlap J(τ) seen by the HOM Monte Carlo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HomOverlap {
    /// peak·exp(−τ²/(2·rms_width²)).
    Gaussian { peak: f64, rms_width: f64 },
    /// Linear interpolation of sampled Re J; clamps to the end values.
    Tabulated { delays: Vec<f64>, overlap: Vec<f64> },
}

impl HomOverlap {
    /// Re J(τ) = 1 − 2P(τ) from a computed dip.
    pub fn from_dip(curve: &DipCurve) -> Self {
        Self::Tabulated {
            delays: curve.delays.clone(),
            overlap: curve.coincidence_prob.iter().map(|p| 1.0 - 2.0 * p).collect(),
        }
    }

    pub fn eval(&self, tau: f64) -> f64 {
        match self {
            Self::Gaussian { peak, rms_width } => peak * (-0.5 * (tau / rms_width).powi(2)).exp(),
            Self::Tabulated { delays, overlap } => {
                let n = delays.len();
                if tau <= delays[0] {
                    return overlap[0];
                }
                if tau >= delays[n - 1] {
                    return overlap[n - 1];
                }
                let i = delays.partition_point(|&t| t <= tau) - 1;
                let w = (tau - delays[i]) / (delays[i + 1] - delays[i]);
                overlap[i] + w * (overlap[i + 1] - overlap[i])
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Gaussian { peak, rms_width } => {
                if !(-1.0..=1.0).contains(peak) || !(*rms_width > 0.0) {
                    return Err(domain("hom.overlap", "need |peak| <= 1 and rms_width > 0"));
                }
            }
            Self::Tabulated { delays, overlap } => {
                if delays.len() < 2 || delays.len() != overlap.len() {
                    return Err(domain("hom.overlap", "table needs >= 2 matching samples"));
                }
                if !delays.windows(2).all(|w| w[1] > w[0]) {
                    return Err(domain("hom.overlap", "delays must be strictly increasing"));
                }
                if overlap.iter().any(|j| !(-1.0..=1.0).contains(j)) {
                    return Err(domain("hom.overlap", "overlap values must lie in [-1, 1]"));
                }
            }
        }
        Ok(())
    }
}

/// Settings for the four-fold HOM experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomSetup {
    pub overlap: HomOverlap,
    /// S/(S+B) for an additive, delay-independent background on top of the
    /// simulated four-folds; 1 adds nothing.
    pub signal_fraction: f64,
    /// Counts are rescaled to this acquisition time, seconds.
    pub acquisition_time: f64,
}

impl HomSetup {
    pub fn validate(&self) -> Result<()> {
        self.overlap.validate()?;
        if !(self.signal_fraction > 0.0 && self.signal_fraction <= 1.0) {
            return Err(domain("hom.signal_fraction", "must lie in (0, 1]"));
        }
        if !(self.acquisition_time > 0.0) {
            return Err(domain("hom.acquisition_time", "must be > 0"));
        }
        Ok(())
    }

    /// B/S implied by `signal_fraction`.
    pub fn background_ratio(&self) -> f64 {
        (1.0 - self.signal_fraction) / self.signal_fraction
    }
}

/// Full description of a counting experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub fiber: FiberSpec,
    pub pump: PumpSpec,
    pub channel: ChannelPair,
    pub detectors: DetectorSet,
    pub raman_s: RamanSpec,
    pub raman_i: RamanSpec,
    /// Pair collection transmission.
    pub capture: f64,
    /// Seconds.
    pub coincidence_window: f64,
    #[serde(default)]
    pub statistics: PairStatistics,
    #[serde(default)]
    pub car_definition: CarDefinition,
    #[serde(default)]
    pub hom: Option<HomSetup>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.fiber.validate()?;
        if self.pump.p_avg == 0.0 {
            // Zero power is a legal operating point for dark-only runs.
            self.pump.with_p_avg(1.0).validate()?;
        } else {
            self.pump.validate()?;
        }
        for d in self.detectors.all() {
            d.validate()?;
        }
        self.raman_s.validate()?;
        self.raman_i.validate()?;
        if !(self.capture > 0.0 && self.capture <= 1.0) {
            return Err(domain("capture", format!("must lie in (0, 1], got {}", self.capture)));
        }
        if !(self.coincidence_window > 0.0) {
            return Err(domain("coincidence_window", "must be > 0"));
        }
        if let Some(h) = &self.hom {
            h.validate()?;
        }
        Ok(())
    }

    pub fn with_p_avg(&self, p_avg: f64) -> Self {
        Self {
            pump: self.pump.with_p_avg(p_avg),
            ..self.clone()
        }
    }
}

/// Low-gain bound on γ·P_peak·L.
pub const GAIN_GUARD: f64 = 0.3;

/// Mean pairs per pulse, capture·(γ·P_peak·L)².
pub fn pairs_per_pulse(fiber: &FiberSpec, pump: &PumpSpec, capture: f64) -> Result<f64> {
    let gain = fiber.gamma * pump.peak_power() * fiber.length_m;
    if !(gain < GAIN_GUARD) {
        return Err(Error::GainGuard { gain });
    }
    Ok(capture * gain * gain)
}

/// Mean Raman photons per pulse in one channel, coeff·P_avg·occupation(T).
pub fn raman_per_pulse(raman: &RamanSpec, pump: &PumpSpec, temperature_k: f64) -> Result<f64> {
    if !(temperature_k > 0.0) {
        return Err(domain("temperature_k", "must be > 0"));
    }
    Ok(raman.coeff * pump.p_avg * raman.occupation(temperature_k))
}

/// Per-pulse rates and CAR at one pump power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CarPoint {
    pub p_avg: f64,
    pub mu: f64,
    pub car: f64,
    pub true_coinc_per_pulse: f64,
    pub accidental_per_pulse: f64,
    pub singles_s: f64,
    pub singles_i: f64,
}

/// Analytic CAR of the signal_1/herald_1 pair at average pump power `p_avg`.
pub fn car_model(scenario: &Scenario, p_avg: f64) -> Result<CarPoint> {
    if !(p_avg >= 0.0) || !p_avg.is_finite() {
        return Err(domain("p_avg", "must be finite and >= 0"));
    }
    let pump = scenario.pump.with_p_avg(p_avg);
    let t = scenario.fiber.temperature_k;
    let mu = pairs_per_pulse(&scenario.fiber, &pump, scenario.capture)?;
    let det_s = &scenario.detectors.signal_1;
    let det_i = &scenario.detectors.herald_1;
    let (eta_s, eta_i) = (det_s.efficiency, det_i.efficiency);
    let singles_s = eta_s * (mu + raman_per_pulse(&scenario.raman_s, &pump, t)?) + det_s.dark_per_pulse();
    let singles_i = eta_i * (mu + raman_per_pulse(&scenario.raman_i, &pump, t)?) + det_i.dark_per_pulse();
    let true_coinc = eta_s * eta_i * mu;
    let acc = singles_s * singles_i;
    if !(acc > 0.0) {
        return Err(Error::UndefinedCar);
    }
    let car = match scenario.car_definition {
        CarDefinition::MeasuredOverAccidental => (true_coinc + acc) / acc,
        CarDefinition::TrueOverAccidental => true_coinc / acc,
    };
    Ok(CarPoint {
        p_avg,
        mu,
        car,
        true_coinc_per_pulse: true_coinc,
        accidental_per_pulse: acc,
        singles_s,
        singles_i,
    })
}

/// CAR curve over `n` log-spaced powers in `[lo, hi]`.
pub fn car_curve(scenario: &Scenario, lo: f64, hi: f64, n: usize) -> Result<Vec<CarPoint>> {
    log_space(lo, hi, n)?.into_iter().map(|p| car_model(scenario, p)).collect()
}

pub(crate) fn log_space(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo) || n < 2 {
        return Err(domain("power_range", format!("need 0 < lo < hi and n >= 2, got [{lo}, {hi}], n = {n}")));
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect())
}

/// Location and height of the CAR maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CarPeak {
    pub p_opt: f64,
    pub car_max: f64,
}

/// Maximize CAR over average power in `p_range`, after checking on 65
/// log-spaced samples that the curve is unimodal there.
pub fn car_peak(scenario: &Scenario, p_range: (f64, f64)) -> Result<CarPeak> {
    let (lo, hi) = p_range;
    let samples = car_curve(scenario, lo, hi, 65)?;
    let cars: Vec<f64> = samples.iter().map(|s| s.car).collect();
    if !is_unimodal(&cars) {
        let table = samples
            .iter()
            .map(|s| format!("  p_avg = {:.4e} W  car = {:.6}", s.p_avg, s.car))
            .collect::<Vec<_>>()
            .join("\n");
        return Err(Error::NotUnimodal { table });
    }
    let f = |lp: f64| car_model(scenario, lp.exp()).map(|c| c.car).unwrap_or(f64::NEG_INFINITY);
    let (lp, car_max) = golden_section_max(f, lo.ln(), hi.ln(), 1e-10, 500);
    Ok(CarPeak {
        p_opt: lp.exp().clamp(lo, hi),
        car_max,
    })
}

/// Non-decreasing then non-increasing, up to a relative slack of 1e-12.
pub(crate) fn is_unimodal(values: &[f64]) -> bool {
    let tol = |a: f64, b: f64| 1e-12 * a.abs().max(b.abs());
    let mut falling = false;
    for w in values.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b > a + tol(a, b) {
            if falling {
                return false;
            }
        } else if b < a - tol(a, b) {
            falling = true;
        }
    }
    true
}

/// Lowest-order four-fold rate (per second) at the distinguishable
/// baseline: ½ μ² η_h1 η_h2 η_s1 η_s2 per pulse.
pub fn fourfold_baseline_rate(scenario: &Scenario) -> Result<f64> {
    let mu = pairs_per_pulse(&scenario.fiber, &scenario.pump, scenario.capture)?;
    let d = &scenario.detectors;
    let eta = d.herald_1.efficiency * d.herald_2.efficiency * d.signal_1.efficiency * d.signal_2.efficiency;
    Ok(0.5 * mu * mu * eta * scenario.pump.rep_rate)
}
