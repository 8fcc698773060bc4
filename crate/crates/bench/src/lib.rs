//! Benchmark fixtures.

use sfwm_core::counts::Scenario;
use sfwm_core::jsa::{build_jsa, default_grid, gauss_coeffs, JsaGrid, PhaseMatching, DEFAULT_ALPHA};
use sfwm_core::preset;

/// Preset joint amplitude at 25 ps on an `n_points` square grid.
pub fn preset_jsa(n_points: usize, mode: PhaseMatching) -> JsaGrid {
    let fiber = preset::paper_fiber().unwrap();
    let pump = preset::paper_pump().unwrap();
    let channel = preset::paper_channel().unwrap();
    let coeffs = gauss_coeffs(&fiber, &pump, &channel, DEFAULT_ALPHA).unwrap();
    let grid = default_grid(&coeffs, n_points, 4.0).unwrap();
    build_jsa(&fiber, &pump, &channel, &grid, mode).unwrap()
}

/// Preset scenario with noise calibrated to a CAR peak of 131 at 23 μW.
pub fn calibrated_scenario() -> Scenario {
    let template = preset::paper_scenario().unwrap();
    sfwm_core::calibrate_car_peak(&template, preset::P_AVG, 131.0).unwrap().scenario
}
