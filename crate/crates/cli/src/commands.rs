use std::path::PathBuf;

use serde_json::{json, Value};

use sfwm_core::counts::{car_curve, car_model, car_peak, fourfold_baseline_rate, mc_run_car, mc_run_hom, HomOverlap};
use sfwm_core::export;
use sfwm_core::hom::{alias_limit, dip_curve, raw_visibility, symmetric_delays, DipCurve};
use sfwm_core::jsa::{
    apply_filters, build_jsa, default_grid, gauss_coeffs, optimal_pump_width, JsaGrid, EDGE_MASS_LIMIT,
};
use sfwm_core::phys::{GridSpec, PumpSpec};
use sfwm_core::schmidt::{
    purity_gauss_analytic, purity_scan, reduced_density, scan_argmax, schmidt_weights, ScanOptions,
    TraceOut,
};
use sfwm_core::FilterSpec;

use crate::config::{McKind, Resolved, RunConfig};
use crate::error::CliError;
use crate::output::{write_atomic, write_json};

const PUMP_WIDTH_CONVENTION: &str = "t_fwhm is the transform-limited Gaussian intensity FWHM; \
     sigma_p is the 1/e^2 half-width of the two-photon envelope intensity, 2*sqrt(2 ln 2)/t_fwhm";

pub struct Run<'a> {
    pub cfg: &'a RunConfig,
    pub text: &'a str,
    pub resolved: Resolved,
    pub out: PathBuf,
    pub hash: String,
}

impl Run<'_> {
    fn core<T>(&self, r: sfwm_core::Result<T>) -> Result<T, CliError> {
        r.map_err(|e| CliError::from_core(e, self.text))
    }

    fn header(&self, command: &str) -> serde_json::Map<String, Value> {
        let mut m = serde_json::Map::new();
        m.insert("command".into(), json!(command));
        m.insert("config_hash".into(), json!(self.hash));
        m.insert("config".into(), json!(self.cfg));
        m.insert("assumptions".into(), json!(self.cfg.assumptions));
        m
    }

    fn grid_for(&self, pump: &PumpSpec) -> Result<GridSpec, CliError> {
        let s = &self.resolved.scenario;
        let coeffs = self.core(gauss_coeffs(&s.fiber, pump, &s.channel, self.resolved.alpha))?;
        self.core(default_grid(&coeffs, self.resolved.n_points, self.resolved.n_sigma))
    }

    fn jsa(&self, pump: &PumpSpec, grid: &GridSpec, filters: Option<&(FilterSpec, FilterSpec)>) -> Result<JsaGrid, CliError> {
        let s = &self.resolved.scenario;
        let jsa = self.core(build_jsa(&s.fiber, pump, &s.channel, grid, self.resolved.mode))?;
        if jsa.edge_mass() > EDGE_MASS_LIMIT {
            eprintln!(
                "warning: {:.2e} of the JSI lies on the grid edge; widen grid.n_sigma",
                jsa.edge_mass()
            );
        }
        match filters {
            Some((fs, fi)) => self.core(apply_filters(&jsa, fs, fi)),
            None => Ok(jsa),
        }
    }

    /// Dip between the two configured sources, on a shared grid.
    fn dip(&self) -> Result<(DipCurve, f64, f64), CliError> {
        let r = &self.resolved;
        let hom = &self.cfg.hom;
        let grid = self.grid_for(&r.scenario.pump)?;
        let jsa_1 = self.jsa(&r.scenario.pump, &grid, r.filters.as_ref())?;
        let jsa_2 = self.jsa(&r.second_pump, &grid, r.second_filters.as_ref())?;
        let rho_1 = self.core(reduced_density(&jsa_1, TraceOut::Idler))?;
        let rho_2 = self.core(reduced_density(&jsa_2, TraceOut::Idler))?;
        let max_delay = 1e-12 * hom.max_delay_ps;
        let limit = alias_limit(rho_1.spacing());
        if max_delay > limit {
            let e = sfwm_core::Error::Aliasing {
                delay: max_delay,
                spacing: rho_1.spacing(),
                limit,
            };
            return Err(CliError::from_core(e, self.text));
        }
        let curve = self.core(dip_curve(&rho_1, &rho_2, &symmetric_delays(max_delay, hom.n_delays)))?;
        Ok((curve, rho_1.purity(), rho_2.purity()))
    }

    pub fn jsi(&self) -> Result<(), CliError> {
        let s = &self.resolved.scenario;
        let coeffs = self.core(gauss_coeffs(&s.fiber, &s.pump, &s.channel, self.resolved.alpha))?;
        let grid = self.core(default_grid(&coeffs, self.resolved.n_points, self.resolved.n_sigma))?;
        let jsa = self.jsa(&s.pump, &grid, None)?;
        let purity_analytic = self.core(purity_gauss_analytic(&coeffs))?;
        let weights = self.core(schmidt_weights(&jsa))?;
        let purity_svd: f64 = weights.iter().map(|g| g * g).sum();
        let optimum = optimal_pump_width(&s.fiber, &s.channel, self.resolved.alpha).ok();

        write_atomic(&self.out, "jsi.csv", export::jsi_csv(&jsa).as_bytes())?;
        let mut meta = self.header("jsi");
        meta.insert("mode".into(), json!(self.resolved.mode.name()));
        meta.insert("pump_width_convention".into(), json!(PUMP_WIDTH_CONVENTION));
        meta.insert("gauss_coeffs_s2".into(), json!({ "a": coeffs.a, "b": coeffs.b, "c": coeffs.c }));
        meta.insert("purity_analytic".into(), json!(purity_analytic));
        meta.insert("purity_svd".into(), json!(purity_svd));
        meta.insert("schmidt_number".into(), json!(1.0 / purity_svd));
        meta.insert("schmidt_weights_leading".into(), json!(&weights[..weights.len().min(8)]));
        meta.insert("grid".into(), json!(grid));
        meta.insert("edge_mass".into(), json!(jsa.edge_mass()));
        meta.insert("optimal_t_fwhm_ps".into(), json!(optimum.map(|t| t * 1e12)));
        write_json(&self.out, "jsi_meta.json", &meta)?;
        println!("purity analytic {purity_analytic:.5}, svd {purity_svd:.5} ({} mode)", self.resolved.mode.name());
        Ok(())
    }

    pub fn purity_scan(&self) -> Result<(), CliError> {
        let s = &self.resolved.scenario;
        let scan = &self.cfg.scan;
        let opts = ScanOptions {
            n_points: self.resolved.n_points,
            n_sigma: self.resolved.n_sigma,
            alpha: self.resolved.alpha,
            numeric: scan.numeric,
        };
        let rows = self.core(purity_scan(
            &s.fiber,
            &s.pump,
            &s.channel,
            (1e-12 * scan.t_min_ps, 1e-12 * scan.t_max_ps),
            scan.steps,
            &opts,
        ))?;
        write_atomic(&self.out, "purity_scan.csv", export::scan_csv(&rows).as_bytes())?;
        let best = scan_argmax(&rows).expect("scan has rows");
        let optimum = optimal_pump_width(&s.fiber, &s.channel, self.resolved.alpha).ok();
        let step = (scan.t_max_ps - scan.t_min_ps) / (scan.steps - 1) as f64;
        let max_gap = rows
            .iter()
            .filter(|r| r.purity_svd.is_finite())
            .map(|r| (r.purity_svd - r.purity_analytic).abs())
            .fold(0.0, f64::max);

        let mut meta = self.header("purity-scan");
        meta.insert("pump_width_convention".into(), json!(PUMP_WIDTH_CONVENTION));
        meta.insert("argmax_t_fwhm_ps".into(), json!(best.t_fwhm * 1e12));
        meta.insert("argmax_purity".into(), json!(best.purity_analytic));
        meta.insert("optimal_t_fwhm_ps".into(), json!(optimum.map(|t| t * 1e12)));
        meta.insert("step_ps".into(), json!(step));
        meta.insert("max_analytic_svd_gap".into(), json!(max_gap));
        write_json(&self.out, "purity_scan_meta.json", &meta)?;

        print!("argmax {:.3} ps (purity {:.5})", best.t_fwhm * 1e12, best.purity_analytic);
        match optimum {
            Some(t) => println!(
                "; optimal pump width {:.3} ps, {:.2} steps away",
                t * 1e12,
                (best.t_fwhm - t).abs() * 1e12 / step
            ),
            None => println!("; no factorable pump width for this dispersion"),
        }
        Ok(())
    }

    pub fn hom(&self) -> Result<(), CliError> {
        let hom = &self.cfg.hom;
        let (curve, purity_1, purity_2) = self.dip()?;
        let v_raw = self.core(raw_visibility(
            curve.v_net.clamp(0.0, 1.0),
            hom.signal_fraction,
            1.0 - hom.signal_fraction,
        ))?;
        let rate = self.core(fourfold_baseline_rate(&self.resolved.scenario))?;
        // The baseline coincidence probability is ½.
        let counts_per_unit_prob = 2.0 * rate * hom.acquisition_s;
        let edge = 0.5 * (curve.coincidence_prob[0] + curve.coincidence_prob[curve.coincidence_prob.len() - 1]);

        write_atomic(
            &self.out,
            "hom_dip.csv",
            export::dip_csv(&curve, counts_per_unit_prob, hom.acquisition_s).as_bytes(),
        )?;
        let mut meta = self.header("hom");
        meta.insert("v_net".into(), json!(curve.v_net));
        meta.insert("v_raw".into(), json!(v_raw));
        meta.insert("dip_visibility".into(), json!(curve.visibility()));
        meta.insert("dip_fwhm_ps".into(), json!(curve.fwhm().map(|w| w * 1e12)));
        meta.insert("purity_source_1".into(), json!(purity_1));
        meta.insert("purity_source_2".into(), json!(purity_2));
        meta.insert("edge_baseline_rel_dev".into(), json!((edge - 0.5).abs() / 0.5));
        meta.insert("signal_fraction".into(), json!(hom.signal_fraction));
        meta.insert("acquisition_s".into(), json!(hom.acquisition_s));
        meta.insert("fourfold_baseline_rate_hz".into(), json!(rate));
        meta.insert("expected_baseline_counts".into(), json!(0.5 * counts_per_unit_prob));
        write_json(&self.out, "hom_summary.json", &meta)?;
        println!("v_net {:.5}, v_raw {v_raw:.5}", curve.v_net);
        Ok(())
    }

    fn car_meta(&self, command: &str) -> serde_json::Map<String, Value> {
        let s = &self.resolved.scenario;
        let mut meta = self.header(command);
        meta.insert("car_definition".into(), json!(s.car_definition));
        meta.insert("statistics".into(), json!(s.statistics));
        meta.insert("calibration".into(), json!(self.resolved.calibration));
        meta.insert("raman_coeff_per_w".into(), json!(s.raman_s.coeff));
        meta.insert("dark_rate_hz".into(), json!(s.detectors.signal_1.dark_rate));
        meta
    }

    pub fn car(&self) -> Result<(), CliError> {
        let s = &self.resolved.scenario;
        let c = &self.cfg.car;
        let (lo, hi) = (1e-6 * c.p_min_uw, 1e-6 * c.p_max_uw);
        let points = self.core(car_curve(s, lo, hi, c.points))?;
        write_atomic(&self.out, "car_curve.csv", export::car_csv(&points).as_bytes())?;
        let mut meta = self.car_meta("car");
        let peak = match car_peak(s, (lo, hi)) {
            Ok(p) => {
                println!("CAR peak {:.2} at {:.3} uW", p.car_max, p.p_opt * 1e6);
                json!({ "p_opt_uw": p.p_opt * 1e6, "car_max": p.car_max })
            }
            Err(e) => {
                println!("no interior CAR peak: {e}");
                json!({ "none": e.to_string() })
            }
        };
        meta.insert("peak".into(), peak);
        write_json(&self.out, "summary.json", &meta)?;
        Ok(())
    }

    pub fn mc(&self, seed: u64) -> Result<(), CliError> {
        let s = &self.resolved.scenario;
        let n = self.cfg.mc.n_pulses;
        let mut meta = self.car_meta("mc");
        meta.insert("seed".into(), json!(seed));
        meta.insert("n_pulses".into(), json!(n));
        match self.cfg.mc.kind {
            McKind::Car => {
                let mc = self.core(mc_run_car(s, n, seed))?;
                let model = self.core(car_model(s, s.pump.p_avg))?;
                let z = (mc.car_estimate - model.car) / mc.car_stderr;
                let csv = format!(
                    "p_avg_w,n_pulses,seed,car_mc,car_stderr,car_model,coincidences,accidentals_per_peak,singles_s,singles_i\n\
                     {},{},{},{},{},{},{},{},{},{}\n",
                    s.pump.p_avg,
                    n,
                    seed,
                    mc.car_estimate,
                    mc.car_stderr,
                    model.car,
                    mc.counts.coincidences,
                    mc.counts.accidentals_per_peak,
                    mc.counts.singles_s,
                    mc.counts.singles_i
                );
                write_atomic(&self.out, "mc_results.csv", csv.as_bytes())?;
                meta.insert("kind".into(), json!("car"));
                meta.insert("car_mc".into(), json!(mc.car_estimate));
                meta.insert("car_stderr".into(), json!(mc.car_stderr));
                meta.insert("car_model".into(), json!(model.car));
                meta.insert("z_score".into(), json!(z));
                meta.insert("counts".into(), json!(mc.counts));
                println!(
                    "CAR MC {:.3} +/- {:.3}, model {:.3} ({z:+.2} sigma)",
                    mc.car_estimate, mc.car_stderr, model.car
                );
            }
            McKind::Hom => {
                let (curve, _, _) = self.dip()?;
                let mut scenario = s.clone();
                if let Some(h) = scenario.hom.as_mut() {
                    h.overlap = HomOverlap::from_dip(&curve);
                }
                let mc = self.core(mc_run_hom(&scenario, &curve.delays, n, seed))?;
                write_atomic(&self.out, "mc_results.csv", export::hom_mc_csv(&mc).as_bytes())?;
                meta.insert("kind".into(), json!("hom"));
                meta.insert("v_net_model".into(), json!(curve.v_net));
                meta.insert("scale".into(), json!(mc.scale));
                meta.insert("background_counts".into(), json!(mc.background_counts));
                meta.insert("herald_prob".into(), json!([mc.herald_prob_1, mc.herald_prob_2]));
                for (key, subtract) in [("fit_raw", false), ("fit_background_subtracted", true)] {
                    let fit = mc.fit_dip(subtract).map_or_else(|e| json!({ "error": e.to_string() }), |f| json!(f));
                    meta.insert(key.into(), fit);
                }
                println!("HOM MC over {} delays written", curve.delays.len());
            }
        }
        write_json(&self.out, "summary.json", &meta)?;
        Ok(())
    }
}
