//! CSV rendering with unit-bearing headers. Floats use the shortest
//! representation that parses back to the same value.

use std::fmt::Write as _;

use crate::counts::{CarPoint, HomMcResult};
use crate::hom::DipCurve;
use crate::jsa::JsaGrid;
use crate::schmidt::{ScanRow, SchmidtResult};

pub const JSI_HEADER: &str = "delta_s_rad_s,delta_i_rad_s,intensity";
pub const SCAN_HEADER: &str = "t_fwhm_ps,purity_analytic,purity_svd";
pub const CAR_HEADER: &str =
    "p_avg_w,mu_pairs_per_pulse,car,true_coinc_per_pulse,accidental_per_pulse,singles_s_per_pulse,singles_i_per_pulse";
pub const HOM_MC_HEADER: &str = "delay_s,fourfold_counts,stderr_counts,scaled_counts,scaled_stderr";

/// Row-major |f|² with the signal detuning varying slowest.
pub fn jsi_csv(jsa: &JsaGrid) -> String {
    let mut out = String::with_capacity(48 * jsa.axis_s.len() * jsa.axis_i.len());
    out.push_str(JSI_HEADER);
    out.push('\n');
    for (j, ds) in jsa.axis_s.iter().enumerate() {
        for (k, di) in jsa.axis_i.iter().enumerate() {
            let _ = writeln!(out, "{ds},{di},{}", jsa.intensity(j, k));
        }
    }
    out
}

/// Leading Schmidt modes: one row per grid index.
pub fn schmidt_modes_csv(result: &SchmidtResult, n_modes: usize) -> String {
    let n_modes = n_modes.min(result.n_modes());
    let mut out = String::from("index,delta_s_rad_s,delta_i_rad_s");
    for n in 0..n_modes {
        let _ = write!(out, ",signal_{n}_re,signal_{n}_im,idler_{n}_re,idler_{n}_im");
    }
    out.push('\n');
    for j in 0..result.axis_s.len() {
        let _ = write!(out, "{j},{},{}", result.axis_s[j], result.axis_i[j]);
        for n in 0..n_modes {
            let (s, i) = (result.signal_modes[(j, n)], result.idler_modes[(j, n)]);
            let _ = write!(out, ",{},{},{},{}", s.re, s.im, i.re, i.im);
        }
        out.push('\n');
    }
    out
}

pub fn scan_csv(rows: &[ScanRow]) -> String {
    let mut out = format!("{SCAN_HEADER}\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{}", r.t_fwhm * 1e12, r.purity_analytic, r.purity_svd);
    }
    out
}

/// Dip probabilities plus expected four-fold counts, where `counts_per_unit_prob`
/// converts a coincidence probability into counts over `acquisition_time`.
pub fn dip_csv(curve: &DipCurve, counts_per_unit_prob: f64, acquisition_time: f64) -> String {
    let mut out = format!("delay_s,coincidence_prob,expected_counts_per_{acquisition_time}s\n");
    for (t, p) in curve.delays.iter().zip(&curve.coincidence_prob) {
        let _ = writeln!(out, "{t},{p},{}", p * counts_per_unit_prob);
    }
    out
}

pub fn car_csv(points: &[CarPoint]) -> String {
    let mut out = format!("{CAR_HEADER}\n");
    for c in points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            c.p_avg, c.mu, c.car, c.true_coinc_per_pulse, c.accidental_per_pulse, c.singles_s, c.singles_i
        );
    }
    out
}

pub fn hom_mc_csv(result: &HomMcResult) -> String {
    let mut out = format!("{HOM_MC_HEADER}\n");
    for r in &result.rows {
        let _ = writeln!(out, "{},{},{},{},{}", r.delay, r.fourfold_counts, r.stderr, r.scaled_counts, r.scaled_stderr);
    }
    out
}
