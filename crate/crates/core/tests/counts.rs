use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use sfwm_core::counts::{
    calibrate_car_peak, car_curve, car_model, car_peak, fit_noise, mc_run_car, mc_run_hom, HomOverlap, HomSetup,
    PairStatistics, Scenario,
};
use sfwm_core::hom::{dip_curve, symmetric_delays};
use sfwm_core::jsa::{apply_filters, FilterShape, FilterSpec, GaussJsaCoeffs, JsaGrid};
use sfwm_core::phys::{ChannelPair, GridSpec};
use sfwm_core::preset;
use sfwm_core::schmidt::{reduced_density, TraceOut};
use sfwm_core::Error;

fn with_noise(coeff: f64, dark: f64) -> Scenario {
    let mut s = preset::paper_scenario().unwrap();
    s.raman_s.coeff = coeff;
    s.raman_i.coeff = coeff;
    for d in s.detectors.all_mut() {
        d.dark_rate = dark;
    }
    s
}

fn ideal(s: &mut Scenario) {
    for d in s.detectors.all_mut() {
        d.efficiency = 1.0;
        d.dark_rate = 0.0;
        d.dead_time = 0.0;
    }
}

fn at_mu(s: &Scenario, mu: f64) -> Scenario {
    let mu0 = sfwm_core::pairs_per_pulse(&s.fiber, &s.pump, s.capture).unwrap();
    s.with_p_avg(s.pump.p_avg * (mu / mu0).sqrt())
}

#[test]
fn noisy_ten_point_fits_recover_parameters() {
    let truth = with_noise(40.0, 5e4);
    let template = preset::paper_scenario().unwrap();
    let powers: Vec<f64> = (0..10).map(|i| 2e-6 * 75f64.powf(i as f64 / 9.0)).collect();
    let clean: Vec<f64> = powers.iter().map(|&p| car_model(&truth, p).unwrap().car).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let noise = Normal::new(0.0, 0.05).unwrap();
    let mut within = 0;
    for _ in 0..100 {
        let obs: Vec<(f64, f64)> = powers.iter().zip(&clean).map(|(&p, &c)| (p, c * (1.0 + noise.sample(&mut rng)))).collect();
        let fit = fit_noise(&template, &obs).unwrap();
        if (fit.raman_coeff / 40.0 - 1.0).abs() < 0.15 && (fit.dark_rate / 5e4 - 1.0).abs() < 0.15 {
            within += 1;
        }
    }
    assert_eq!(within, 100, "only {within}/100 fits within 15%");
}

#[test]
fn anchored_fit_is_unimodal_over_paper_range() {
    let template = preset::paper_scenario().unwrap();
    let fitted = calibrate_car_peak(&template, 23e-6, 131.0).unwrap().scenario;
    let curve = car_curve(&fitted, 1e-6, 200e-6, 200).unwrap();
    let argmax = curve.iter().enumerate().max_by(|a, b| a.1.car.total_cmp(&b.1.car)).unwrap().0;
    assert!(curve[..=argmax].windows(2).all(|w| w[1].car >= w[0].car));
    assert!(curve[argmax..].windows(2).all(|w| w[1].car <= w[0].car));
    assert!(argmax > 0 && argmax < curve.len() - 1);
}

#[test]
fn inverted_power_range_is_rejected() {
    let s = with_noise(40.0, 5e4);
    assert!(matches!(car_peak(&s, (2e-4, 1e-6)), Err(Error::Domain { .. })));
}

#[test]
fn mc_error_bars_are_calibrated() {
    let mut s = with_noise(0.0, 0.0);
    for d in s.detectors.all_mut() {
        d.efficiency = 0.5;
        d.dark_rate = 1e-3 / d.gate_window;
        d.dead_time = 0.0;
    }
    let s = at_mu(&s, 0.02);
    let model = car_model(&s, s.pump.p_avg).unwrap().car;
    let inside = (0..100u64)
        .filter(|&seed| {
            let r = mc_run_car(&s, 100_000, seed).unwrap();
            (r.car_estimate - model).abs() < 3.0 * r.car_stderr
        })
        .count();
    assert!(inside >= 99, "{inside}/100 within 3 sigma");
}

#[test]
fn zero_pump_is_dark_only() {
    let mut s = with_noise(40.0, 0.0);
    for d in s.detectors.all_mut() {
        d.dark_rate = 1e-2 / d.gate_window;
        d.dead_time = 0.0;
    }
    let s = s.with_p_avg(0.0);
    let r = mc_run_car(&s, 1_000_000, 3).unwrap();
    assert!((r.car_estimate - 1.0).abs() < 3.0 * r.car_stderr, "{r:?}");
    assert!((car_model(&s, 0.0).unwrap().car - 1.0).abs() < 1e-12);
}

#[test]
fn dead_time_reduces_singles() {
    let mut s = with_noise(0.0, 0.0);
    for d in s.detectors.all_mut() {
        d.dark_rate = 0.02 / d.gate_window;
    }
    let live = {
        let mut t = s.clone();
        for d in t.detectors.all_mut() {
            d.dead_time = 0.0;
        }
        t
    };
    let dead = mc_run_car(&s, 1_000_000, 8).unwrap();
    let free = mc_run_car(&live, 1_000_000, 8).unwrap();
    assert!(dead.counts.singles_s < free.counts.singles_s);
    // 3 μs at 27.9 MHz blinds 83 pulses after each click.
    let p = 0.02;
    let expected = p / (1.0 + 83.0 * p);
    let measured = dead.counts.singles_s as f64 / 1e6;
    assert!((measured / expected - 1.0).abs() < 0.05, "{measured} vs {expected}");
}

#[test]
fn thermal_statistics_lift_central_peak() {
    let mut s = at_mu(&with_noise(0.0, 0.0), 0.05);
    for d in s.detectors.all_mut() {
        d.dead_time = 0.0;
    }
    let mut t = s.clone();
    t.statistics = PairStatistics::Thermal;
    let poisson = mc_run_car(&s, 20_000_000, 1).unwrap();
    let thermal = mc_run_car(&t, 20_000_000, 1).unwrap();
    // Side peaks are unchanged; bunching adds about one unit of CAR
    // (1/μ + 2 against 1/μ + 1 at low efficiency).
    let lift = thermal.car_estimate - poisson.car_estimate;
    assert!(lift > 0.5 && lift < 1.5, "{poisson:?} {thermal:?}");
}

fn flat_hom(peak: f64) -> Scenario {
    let mut s = preset::paper_scenario().unwrap();
    ideal(&mut s);
    let mut s = at_mu(&s, 0.01);
    s.hom = Some(HomSetup {
        overlap: HomOverlap::Gaussian { peak, rms_width: 3e-12 },
        signal_fraction: 1.0,
        acquisition_time: 1000.0,
    });
    s
}

#[test]
fn zero_overlap_gives_flat_baseline() {
    let s = flat_hom(0.0);
    let delays = symmetric_delays(20e-12, 21);
    let r = mc_run_hom(&s, &delays, 2_000_000, 4).unwrap();
    let mean = r.rows.iter().map(|x| x.fourfold_counts as f64).sum::<f64>() / r.rows.len() as f64;
    let chi2: f64 = r.rows.iter().map(|x| (x.fourfold_counts as f64 - mean).powi(2) / mean).sum();
    // 20 degrees of freedom; 45 is beyond the 99.9th percentile.
    assert!(chi2 < 45.0, "chi2 = {chi2}");
    // Lowest order: half of the heralded single pairs split.
    let expected = 0.5 * (1.0 - (-0.01f64).exp()).powi(2) * 2e6;
    assert!((mean / expected - 1.0).abs() < 0.1, "{mean} vs {expected}");
}

#[test]
fn hom_mc_is_thread_independent() {
    let s = flat_hom(0.9);
    let delays = symmetric_delays(10e-12, 11);
    let a = mc_run_hom(&s, &delays, 500_000, 21).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let b = pool.install(|| mc_run_hom(&s, &delays, 500_000, 21).unwrap());
    assert_eq!(a, b);
}

#[test]
fn background_subtraction_recovers_net_visibility() {
    let mut s = flat_hom(0.829);
    s.hom.as_mut().unwrap().signal_fraction = 0.6417;
    let delays = symmetric_delays(20e-12, 41);
    let r = mc_run_hom(&s, &delays, 10_000_000, 12).unwrap();
    let raw = r.fit_dip(false).unwrap();
    let net = r.fit_dip(true).unwrap();
    assert!(net.visibility > raw.visibility);
    assert!((net.visibility - 0.829).abs() < 3.0 * net.visibility_stderr + 0.02, "{net:?}");
}

/// Dip FWHM fitted from the four-fold MC for a broadband source behind
/// Gaussian filters of the given width.
fn dip_width(filter_ghz: f64) -> f64 {
    let c = GaussJsaCoeffs::new(4e-26, 4e-26, -3e-26).unwrap();
    let channel = ChannelPair::symmetric(1.2e15, 5e12).unwrap();
    let grid = GridSpec::new(256, 3e12, 3e12).unwrap();
    let jsa = JsaGrid::from_gauss_coeffs(&c, &grid, channel).unwrap();
    let w = 2.0 * PI * filter_ghz * 1e9;
    let fs = FilterSpec::new(channel.omega_s0, w, FilterShape::Gaussian).unwrap();
    let fi = FilterSpec::new(channel.omega_i0, w, FilterShape::Gaussian).unwrap();
    let rho = reduced_density(&apply_filters(&jsa, &fs, &fi).unwrap(), TraceOut::Idler).unwrap();
    let curve = dip_curve(&rho, &rho, &symmetric_delays(60e-12, 241)).unwrap();
    let mut s = preset::paper_scenario().unwrap();
    ideal(&mut s);
    let mut s = at_mu(&s, 0.01);
    s.hom = Some(HomSetup {
        overlap: HomOverlap::from_dip(&curve),
        signal_fraction: 1.0,
        acquisition_time: 1000.0,
    });
    let r = mc_run_hom(&s, &symmetric_delays(40e-12, 61), 10_000_000, 31).unwrap();
    let fit = r.fit_dip(false).unwrap();
    2.0 * (2.0 * 2f64.ln()).sqrt() * fit.rms_width
}

#[test]
fn dip_width_scales_inversely_with_filter_bandwidth() {
    let wide = dip_width(100.0);
    let narrow = dip_width(50.0);
    let ratio = narrow / wide;
    assert!((ratio / 2.0 - 1.0).abs() < 0.1, "{narrow:e} / {wide:e} = {ratio}");
}
