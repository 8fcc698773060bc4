use serde::Serialize;

use super::{car_model, Scenario};
use crate::error::{Error, Result};
use crate::optimize::levenberg_marquardt;

/// Calibrated noise parameters. The Raman coefficient is shared by both
/// channels and the dark rate by all four detectors.
#[derive(Debug, Clone, Serialize)]
pub struct NoiseFit {
    pub raman_coeff: f64,
    pub dark_rate: f64,
    /// ln CAR_model − ln CAR_observed per observation.
    pub residuals: Vec<f64>,
    pub cost: f64,
    #[serde(skip)]
    pub scenario: Scenario,
}

fn apply(template: &Scenario, log_params: &[f64]) -> Scenario {
    let mut s = template.clone();
    let coeff = log_params[0].exp();
    let dark = log_params[1].exp();
    s.raman_s.coeff = coeff;
    s.raman_i.coeff = coeff;
    for d in s.detectors.all_mut() {
        d.dark_rate = dark;
    }
    s
}

fn ln_car(s: &Scenario, p: f64) -> Option<f64> {
    car_model(s, p).ok().map(|c| c.car.ln()).filter(|v| v.is_finite())
}

/// Coarse log-grid scan for a starting point, then Levenberg-Marquardt.
fn solve<F>(template: &Scenario, residual: F) -> Result<(Scenario, Vec<f64>, f64, Vec<f64>)>
where
    F: Fn(&Scenario) -> Option<Vec<f64>>,
{
    let gate = template.detectors.signal_1.gate_window.max(template.detectors.herald_1.gate_window);
    if !(gate > 0.0) {
        return Err(Error::DegenerateObservations("dark counts cannot be fitted with zero gate windows".into()));
    }
    let cost = |x: &[f64]| residual(&apply(template, x)).map(|r| r.iter().map(|v| v * v).sum::<f64>());
    let n = 61;
    let (c_lo, c_hi) = (1e-3f64.ln(), 1e5f64.ln());
    // Dark probability per gate between 1e-9 and 1e-2.
    let (d_lo, d_hi) = ((1e-9 / gate).ln(), (1e-2 / gate).ln());
    let mut best = (f64::INFINITY, [0.0, 0.0]);
    for i in 0..n {
        for j in 0..n {
            let x = [
                c_lo + (c_hi - c_lo) * i as f64 / (n - 1) as f64,
                d_lo + (d_hi - d_lo) * j as f64 / (n - 1) as f64,
            ];
            if let Some(c) = cost(&x) {
                if c < best.0 {
                    best = (c, x);
                }
            }
        }
    }
    if !best.0.is_finite() {
        return Err(Error::Numerical("no admissible starting point for the noise fit".into()));
    }
    let fit = levenberg_marquardt(|x| residual(&apply(template, x)), &best.1, 500)
        .ok_or_else(|| Error::Numerical("noise fit left the model's domain".into()))?;
    Ok((apply(template, &fit.params), fit.residuals, fit.cost, fit.params))
}

/// Least-squares fit of ln CAR to `(p_avg, car)` observations, adjusting
/// the Raman coefficient and detector dark rate of `template`.
pub fn fit_noise(template: &Scenario, observations: &[(f64, f64)]) -> Result<NoiseFit> {
    template.validate()?;
    if observations.iter().any(|&(p, c)| !(p > 0.0 && p.is_finite() && c > 0.0 && c.is_finite())) {
        return Err(Error::DegenerateObservations("powers and CAR values must be finite and > 0".into()));
    }
    let mut powers: Vec<f64> = observations.iter().map(|o| o.0).collect();
    powers.sort_by(f64::total_cmp);
    powers.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    if powers.len() < 2 {
        return Err(Error::DegenerateObservations(format!(
            "need at least 2 distinct pump powers, got {}",
            powers.len()
        )));
    }
    let residual = |s: &Scenario| {
        observations
            .iter()
            .map(|&(p, c)| ln_car(s, p).map(|m| m - c.ln()))
            .collect::<Option<Vec<f64>>>()
    };
    let (scenario, residuals, cost, params) = solve(template, residual)?;
    Ok(NoiseFit {
        raman_coeff: params[0].exp(),
        dark_rate: params[1].exp(),
        residuals,
        cost,
        scenario,
    })
}

/// Calibrate the noise so that CAR(p) has a stationary point of height
/// `car_max` at `p_opt`.
pub fn calibrate_car_peak(template: &Scenario, p_opt: f64, car_max: f64) -> Result<NoiseFit> {
    template.validate()?;
    if !(p_opt > 0.0 && car_max > 1.0) {
        return Err(Error::DegenerateObservations("peak needs p_opt > 0 and car_max > 1".into()));
    }
    let h: f64 = 1e-4;
    let residual = |s: &Scenario| {
        let mid = ln_car(s, p_opt)?;
        let up = ln_car(s, p_opt * h.exp())?;
        let down = ln_car(s, p_opt * (-h).exp())?;
        Some(vec![mid - car_max.ln(), (up - down) / (2.0 * h)])
    };
    let (scenario, residuals, cost, params) = solve(template, residual)?;
    Ok(NoiseFit {
        raman_coeff: params[0].exp(),
        dark_rate: params[1].exp(),
        residuals,
        cost,
        scenario,
    })
}
