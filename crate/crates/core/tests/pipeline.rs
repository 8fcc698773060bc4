//! End-to-end checks of the spectral pipeline against independent oracles.

use std::f64::consts::{LN_2, PI};

use sfwm_core::jsa::{
    apply_filters, build_jsa, default_grid, gauss_coeffs, FilterShape, FilterSpec, GaussJsaCoeffs, JsaGrid,
    PhaseMatching, DEFAULT_ALPHA,
};
use sfwm_core::phys::{sigma_from_fwhm, ChannelPair, GridSpec};
use sfwm_core::preset;
use sfwm_core::schmidt::{purity_gauss_analytic, svd_purity};

/// |E(Ω)|² of a transform-limited Gaussian pulse with intensity FWHM `t`,
/// by direct quadrature of the Fourier integral.
fn pulse_spectrum(t_fwhm: f64, omega: f64) -> f64 {
    let n = 4001;
    let span = 6.0 * t_fwhm;
    let dt = 2.0 * span / (n - 1) as f64;
    let (mut re, mut im) = (0.0, 0.0);
    for j in 0..n {
        let t = -span + j as f64 * dt;
        let field = (-2.0 * LN_2 * (t / t_fwhm).powi(2)).exp();
        re += field * (omega * t).cos() * dt;
        im += field * (omega * t).sin() * dt;
    }
    re * re + im * im
}

#[test]
fn sigma_matches_fourier_oracle() {
    for t in [2e-12, 8e-12, 25e-12] {
        let peak = pulse_spectrum(t, 0.0);
        let target = (-2.0f64).exp();
        let (mut lo, mut hi) = (0.0, 10.0 / t);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if pulse_spectrum(t, mid) / peak > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let oracle = 0.5 * (lo + hi);
        let sigma = sigma_from_fwhm(t).unwrap();
        assert!((sigma / oracle - 1.0).abs() < 1e-6, "{t}: {sigma} vs {oracle}");
    }
}

#[test]
fn twenty_five_ps_reference_width() {
    let sigma = sigma_from_fwhm(25e-12).unwrap();
    // Reference value is quoted to five figures.
    assert!((sigma / 9.4185e10 - 1.0).abs() < 1e-4);
    assert!((sigma_from_fwhm(8e-12).unwrap() / 2.9435e11 - 1.0).abs() < 1e-4);
}

#[test]
fn svd_purity_converges_with_grid_range() {
    // Sampling error of a smooth Gaussian is negligible; truncation of the
    // tails dominates and must shrink as the range grows.
    let c = GaussJsaCoeffs::new(1e-23, 2e-23, 1.2e-23).unwrap();
    let exact = purity_gauss_analytic(&c).unwrap();
    let channel = ChannelPair::symmetric(1.2e15, 5e12).unwrap();
    let errs: Vec<f64> = [3.0, 4.0, 5.0, 6.0]
        .iter()
        .map(|&n_sigma| {
            let grid = default_grid(&c, 256, n_sigma).unwrap();
            let jsa = JsaGrid::from_gauss_coeffs(&c, &grid, channel).unwrap();
            (svd_purity(&jsa).unwrap() - exact).abs()
        })
        .collect();
    assert!(errs.windows(2).all(|e| e[1] < e[0]), "{errs:?}");
    assert!(errs[3] < 1e-8, "{errs:?}");
}

#[test]
fn sinc_and_gauss_purity_close_for_paper_preset() {
    let fiber = preset::paper_fiber().unwrap();
    let pump = preset::paper_pump().unwrap();
    let channel = preset::paper_channel().unwrap();
    let coeffs = gauss_coeffs(&fiber, &pump, &channel, DEFAULT_ALPHA).unwrap();
    let grid = default_grid(&coeffs, 256, 6.0).unwrap();
    let g = svd_purity(&build_jsa(&fiber, &pump, &channel, &grid, PhaseMatching::gauss()).unwrap()).unwrap();
    let s = svd_purity(&build_jsa(&fiber, &pump, &channel, &grid, PhaseMatching::Sinc).unwrap()).unwrap();
    assert!((g - 0.58055).abs() < 1e-3, "{g}");
    // Sinc side lobes add correlation; the two models stay within a few percent.
    assert!((s - g).abs() < 0.05, "sinc {s} gauss {g}");
}

#[test]
fn rectangular_half_band_keeps_gaussian_mass() {
    // Separable JSA: C = 0, so the signal marginal is exp(−2AΔ²).
    let a = 1e-23;
    let c = GaussJsaCoeffs::new(a, 3e-23, 0.0).unwrap();
    let channel = ChannelPair::symmetric(1.2e15, 5e12).unwrap();
    let grid = default_grid(&c, 256, 5.0).unwrap();
    let jsa = JsaGrid::from_gauss_coeffs(&c, &grid, channel).unwrap();
    let half = grid.half_range_s;
    // Pass [0, H]: center at H/2, width H.
    let fs = FilterSpec::new(channel.omega_s0 + 0.5 * half, half, FilterShape::Rectangular).unwrap();
    let fi = FilterSpec::new(channel.omega_i0, 1e3 * half, FilterShape::Rectangular).unwrap();
    let out = apply_filters(&jsa, &fs, &fi).unwrap();
    // 1-D trapezoid-free oracle: the same discrete sum over the kept axis points.
    let weights: Vec<f64> = jsa.axis_s.iter().map(|d| (-2.0 * a * d * d).exp()).collect();
    let total: f64 = weights.iter().sum();
    let kept: f64 = jsa.axis_s.iter().zip(&weights).filter(|(d, _)| **d >= 0.0 && **d <= half).map(|(_, w)| w).sum();
    let eff = out.heralding_efficiency.unwrap();
    assert!((eff - kept / total).abs() < 1e-12, "{eff} vs {}", kept / total);
    assert!((eff - 0.5).abs() < 1e-9);
}

#[test]
fn narrowing_filters_raise_purity() {
    let fiber = preset::paper_fiber().unwrap();
    let pump = preset::paper_pump().unwrap();
    let channel = preset::paper_channel().unwrap();
    let coeffs = gauss_coeffs(&fiber, &pump, &channel, DEFAULT_ALPHA).unwrap();
    let grid = default_grid(&coeffs, 256, 4.0).unwrap();
    let jsa = build_jsa(&fiber, &pump, &channel, &grid, PhaseMatching::gauss()).unwrap();
    let mut last = svd_purity(&jsa).unwrap();
    let mut last_eff = 1.0;
    for ghz in [400.0, 200.0, 100.0, 50.0, 25.0] {
        let w = 2.0 * PI * ghz * 1e9;
        for shape in [FilterShape::Gaussian, FilterShape::SuperGaussian { order: 3 }] {
            let fs = FilterSpec::new(channel.omega_s0, w, shape).unwrap();
            let fi = FilterSpec::new(channel.omega_i0, w, shape).unwrap();
            let out = apply_filters(&jsa, &fs, &fi).unwrap();
            assert!(out.heralding_efficiency.unwrap() <= 1.0);
            if shape == FilterShape::Gaussian {
                let p = svd_purity(&out).unwrap();
                assert!(p >= last - 1e-12, "{ghz} GHz: {p} < {last}");
                assert!(out.heralding_efficiency.unwrap() <= last_eff);
                last = p;
                last_eff = out.heralding_efficiency.unwrap();
            }
        }
    }
}

#[test]
fn grid_spec_rejects_odd_sizes() {
    assert!(GridSpec::new(257, 1e12, 1e12).is_err());
    assert!(GridSpec::new(8, 1e12, 1e12).is_err());
}
