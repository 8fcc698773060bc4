//! The reference experiment: two cooled 300 m dispersion-shifted fibers
//! pumped by 25 ps pulses at 27.9 MHz, with DWDM channels 800 GHz either
//! side of the pump.
//!
//! γ and the dispersion are not measured values. The dispersion is the
//! symmetric group-velocity-mismatch calibration that puts the factorable
//! pump width at 8 ps.

use std::f64::consts::PI;

use crate::counts::{
    CarDefinition, DetectorMode, DetectorSet, DetectorSpec, PairStatistics, RamanSide, RamanSpec, Scenario,
};
use crate::error::Result;
use crate::jsa::{FilterShape, FilterSpec, DEFAULT_ALPHA};
use crate::phys::{ChannelPair, FiberSpec, PumpSpec, itu_channel_omega};

pub const LENGTH_M: f64 = 300.0;
/// Assumed; typical for dispersion-shifted fiber.
pub const GAMMA: f64 = 2.0e-3;
pub const TEMPERATURE_K: f64 = 77.0;
pub const T_FWHM: f64 = 25e-12;
pub const OPTIMUM_T_FWHM: f64 = 8e-12;
pub const REP_RATE: f64 = 27.9e6;
pub const P_AVG: f64 = 23e-6;
/// ITU channel offsets of signal and idler from the pump channel.
pub const SIGNAL_CHANNEL: i32 = 8;
pub const IDLER_CHANNEL: i32 = -8;
pub const SIGNAL_FILTER_FWHM_HZ: f64 = 100e9;
pub const IDLER_FILTER_FWHM_HZ: f64 = 200e9;
pub const EFFICIENCY: f64 = 0.2;
pub const DEAD_TIME: f64 = 3e-6;
pub const COINCIDENCE_WINDOW: f64 = 0.8e-9;
/// Starting dark rate for the herald detectors before calibration, 1/s.
pub const DARK_RATE_GUESS: f64 = 1e4;

pub fn paper_channel() -> Result<ChannelPair> {
    ChannelPair::itu(0, SIGNAL_CHANNEL, IDLER_CHANNEL)
}

pub fn paper_fiber() -> Result<FiberSpec> {
    let channel = paper_channel()?;
    FiberSpec::with_symmetric_gvm(
        LENGTH_M,
        GAMMA,
        TEMPERATURE_K,
        channel.pump_center(),
        channel.offset(),
        OPTIMUM_T_FWHM,
        DEFAULT_ALPHA,
    )
}

pub fn paper_pump() -> Result<PumpSpec> {
    PumpSpec::new(itu_channel_omega(0)?, T_FWHM, P_AVG, REP_RATE)
}

/// Gaussian filters on the signal (100 GHz) and idler (200 GHz) channels.
pub fn paper_filters() -> Result<(FilterSpec, FilterSpec)> {
    let channel = paper_channel()?;
    Ok((
        FilterSpec::new(channel.omega_s0, 2.0 * PI * SIGNAL_FILTER_FWHM_HZ, FilterShape::Gaussian)?,
        FilterSpec::new(channel.omega_i0, 2.0 * PI * IDLER_FILTER_FWHM_HZ, FilterShape::Gaussian)?,
    ))
}

pub fn paper_detectors() -> DetectorSet {
    let herald = DetectorSpec {
        efficiency: EFFICIENCY,
        dark_rate: DARK_RATE_GUESS,
        dead_time: DEAD_TIME,
        gate_window: COINCIDENCE_WINDOW,
        mode: DetectorMode::FreeRunning,
    };
    let gated = DetectorSpec {
        mode: DetectorMode::Gated,
        ..herald
    };
    DetectorSet {
        herald_1: herald,
        signal_1: gated,
        signal_2: gated,
        herald_2: herald,
    }
}

/// Uncalibrated scenario: Raman coefficients are zero and dark rates are a
/// placeholder until fitted to CAR data.
pub fn paper_scenario() -> Result<Scenario> {
    let channel = paper_channel()?;
    let shift = channel.offset();
    let scenario = Scenario {
        fiber: paper_fiber()?,
        pump: paper_pump()?,
        channel,
        detectors: paper_detectors(),
        raman_s: RamanSpec {
            coeff: 0.0,
            phonon_shift: shift,
            side: RamanSide::AntiStokes,
        },
        raman_i: RamanSpec {
            coeff: 0.0,
            phonon_shift: shift,
            side: RamanSide::Stokes,
        },
        capture: 1.0,
        coincidence_window: COINCIDENCE_WINDOW,
        statistics: PairStatistics::Poisson,
        car_definition: CarDefinition::MeasuredOverAccidental,
        hom: None,
    };
    scenario.validate()?;
    Ok(scenario)
}
