//! Simulation of heralded single photons from spontaneous four-wave mixing
//! in optical fiber.
//!
//! The pipeline runs from fiber dispersion and pump parameters to the joint
//! spectral amplitude ([`jsa`]), its Schmidt decomposition and heralded
//! purity ([`schmidt`]), two-source Hong-Ou-Mandel interference ([`hom`]),
//! and count-level figures of merit with noise and detector models
//! ([`counts`]). All quantities are SI.

pub mod counts;
pub mod error;
pub mod export;
pub mod hom;
pub mod jsa;
pub mod optimize;
pub mod phys;
pub mod preset;
pub mod schmidt;

pub use counts::{
    calibrate_car_peak, car_curve, car_model, car_peak, fit_noise, mc_run_car, mc_run_hom, pairs_per_pulse,
    raman_per_pulse, CarDefinition, CarPeak, CarPoint, DetectorMode, DetectorSet, DetectorSpec, HomOverlap, HomSetup,
    PairStatistics, RamanSide, RamanSpec, Scenario,
};
pub use error::{Error, Result};
pub use hom::{dip_curve, raw_visibility, visibility, DipCurve, Visibility};
pub use jsa::{
    apply_filters, build_jsa, default_grid, gauss_coeffs, optimal_pump_width, FilterShape, FilterSpec,
    GaussJsaCoeffs, JsaGrid, PhaseMatching,
};
pub use phys::{ChannelPair, FiberSpec, GridSpec, PumpSpec};
pub use schmidt::{
    purity_gauss_analytic, purity_scan, reduced_density, schmidt_decompose, svd_purity, DensityMatrix,
    SchmidtResult, TraceOut,
};
