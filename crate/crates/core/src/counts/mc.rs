use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::Serialize;

use super::{pairs_per_pulse, raman_per_pulse, CarDefinition, DetectorSpec, PairStatistics, Scenario};
use crate::error::{domain, Error, Result};
use crate::optimize::levenberg_marquardt;

/// Smallest pulse budget accepted by [`mc_run_car`].
pub const MIN_CAR_PULSES: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McOptions {
    /// Pulses per independently seeded block.
    pub block_size: u64,
    /// Number of side peaks averaged for the accidental estimate.
    pub side_peaks: usize,
}

impl Default for McOptions {
    fn default() -> Self {
        Self {
            block_size: 65_536,
            side_peaks: 100,
        }
    }
}

/// Raw tallies of a two-fold run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McCounts {
    pub n_pulses: u64,
    pub singles_s: u64,
    pub singles_i: u64,
    /// Zero-delay coincidences.
    pub coincidences: u64,
    /// Coincidences summed over all side peaks.
    pub accidentals_total: u64,
    pub side_peaks: usize,
    /// Side-peak average, normalized to the full pulse count.
    pub accidentals_per_peak: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McCarResult {
    pub car_estimate: f64,
    pub car_stderr: f64,
    pub seed: u64,
    pub counts: McCounts,
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Inverse-CDF sampler for a small non-negative integer distribution.
#[derive(Debug, Clone)]
struct CountTable {
    cdf: Vec<f64>,
}

impl CountTable {
    fn from_pmf(mut pmf: impl FnMut(usize) -> f64) -> Self {
        let mut cdf = Vec::new();
        let mut total = 0.0;
        for n in 0..400 {
            total += pmf(n);
            cdf.push(total);
            if total >= 1.0 - 1e-15 {
                break;
            }
        }
        Self { cdf }
    }

    fn poisson(mean: f64) -> Self {
        let mut p = (-mean).exp();
        Self::from_pmf(|n| {
            if n > 0 {
                p *= mean / n as f64;
            }
            p
        })
    }

    fn pairs(mean: f64, stats: PairStatistics) -> Self {
        match stats {
            PairStatistics::Poisson => Self::poisson(mean),
            PairStatistics::Thermal => {
                let ratio = mean / (1.0 + mean);
                Self::from_pmf(|n| ratio.powi(n as i32) / (1.0 + mean))
            }
        }
    }

    fn pmf(&self, n: usize) -> f64 {
        match n {
            0 => self.cdf[0],
            _ if n < self.cdf.len() => self.cdf[n] - self.cdf[n - 1],
            _ => 0.0,
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cdf.iter().position(|&c| u < c).unwrap_or(self.cdf.len() - 1)
    }
}

fn dead_time_filter(clicks: &[u64], blind: u64) -> Vec<u64> {
    let mut kept = Vec::with_capacity(clicks.len());
    let mut last: Option<u64> = None;
    for &k in clicks {
        if last.map_or(true, |l| k > l + blind) {
            kept.push(k);
            last = Some(k);
        }
    }
    kept
}

/// Number of `s` in `a` with `s + offset` in `b`; both sorted.
fn shifted_overlap(a: &[u64], b: &[u64], offset: u64) -> u64 {
    let (mut i, mut j, mut count) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        let x = a[i] + offset;
        match x.cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}

pub fn mc_run_car(scenario: &Scenario, n_pulses: u64, seed: u64) -> Result<McCarResult> {
    mc_run_car_with(scenario, n_pulses, seed, McOptions::default())
}

/// Event-level two-fold simulation of the signal_1/herald_1 pair.
pub fn mc_run_car_with(scenario: &Scenario, n_pulses: u64, seed: u64, opts: McOptions) -> Result<McCarResult> {
    scenario.validate()?;
    if n_pulses < MIN_CAR_PULSES {
        return Err(domain("n_pulses", format!("must be >= {MIN_CAR_PULSES}, got {n_pulses}")));
    }
    if opts.block_size == 0 || opts.side_peaks == 0 {
        return Err(domain("mc_options", "block_size and side_peaks must be > 0"));
    }
    let t = scenario.fiber.temperature_k;
    let mu = pairs_per_pulse(&scenario.fiber, &scenario.pump, scenario.capture)?;
    let det_s = &scenario.detectors.signal_1;
    let det_i = &scenario.detectors.herald_1;
    let n_rs = raman_per_pulse(&scenario.raman_s, &scenario.pump, t)?;
    let n_ri = raman_per_pulse(&scenario.raman_i, &scenario.pump, t)?;
    // Raman photons and dark counts only matter through "at least one click".
    let noise_s = 1.0 - (-det_s.efficiency * n_rs).exp() * (1.0 - det_s.dark_per_pulse());
    let noise_i = 1.0 - (-det_i.efficiency * n_ri).exp() * (1.0 - det_i.dark_per_pulse());
    let pairs = CountTable::pairs(mu, scenario.statistics);
    let (miss_s, miss_i) = (1.0 - det_s.efficiency, 1.0 - det_i.efficiency);

    let n_blocks = n_pulses.div_ceil(opts.block_size);
    let blocks: Vec<(Vec<u64>, Vec<u64>)> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = rng_for(seed, b);
            let start = b * opts.block_size;
            let end = (start + opts.block_size).min(n_pulses);
            let (mut s, mut i) = (Vec::new(), Vec::new());
            for k in start..end {
                let n = pairs.sample(&mut rng);
                let mut click_s = rng.random::<f64>() < noise_s;
                let mut click_i = rng.random::<f64>() < noise_i;
                if n > 0 {
                    let n = n as i32;
                    click_s |= rng.random::<f64>() >= miss_s.powi(n);
                    click_i |= rng.random::<f64>() >= miss_i.powi(n);
                }
                if click_s {
                    s.push(k);
                }
                if click_i {
                    i.push(k);
                }
            }
            (s, i)
        })
        .collect();
    let (mut raw_s, mut raw_i) = (Vec::new(), Vec::new());
    for (s, i) in blocks {
        raw_s.extend(s);
        raw_i.extend(i);
    }
    let rep = scenario.pump.rep_rate;
    let blind_s = det_s.blind_pulses(rep);
    let blind_i = det_i.blind_pulses(rep);
    let clicks_s = dead_time_filter(&raw_s, blind_s);
    let clicks_i = dead_time_filter(&raw_i, blind_i);

    let coincidences = shifted_overlap(&clicks_s, &clicks_i, 0);
    // Side peaks start beyond both dead windows.
    let first = blind_s.max(blind_i) + 1;
    let mut accidentals_total = 0;
    let mut exposure = 0.0;
    for m in 0..opts.side_peaks as u64 {
        let offset = first + m;
        accidentals_total += shifted_overlap(&clicks_s, &clicks_i, offset);
        exposure += n_pulses.saturating_sub(offset) as f64;
    }
    if accidentals_total == 0 {
        return Err(Error::UndefinedCar);
    }
    let accidentals_per_peak = accidentals_total as f64 * n_pulses as f64 / exposure;
    let ratio = coincidences as f64 / accidentals_per_peak;
    let rel = (1.0 / (coincidences.max(1)) as f64 + 1.0 / accidentals_total as f64).sqrt();
    let car_estimate = match scenario.car_definition {
        CarDefinition::MeasuredOverAccidental => ratio,
        CarDefinition::TrueOverAccidental => ratio - 1.0,
    };
    Ok(McCarResult {
        car_estimate,
        car_stderr: ratio * rel,
        seed,
        counts: McCounts {
            n_pulses,
            singles_s: clicks_s.len() as u64,
            singles_i: clicks_i.len() as u64,
            coincidences,
            accidentals_total,
            side_peaks: opts.side_peaks,
            accidentals_per_peak,
        },
    })
}

/// One delay setting of a four-fold run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HomMcRow {
    pub delay: f64,
    pub fourfold_counts: u64,
    /// Poisson, sqrt(counts).
    pub stderr: f64,
    /// Counts rescaled to the acquisition time.
    pub scaled_counts: f64,
    pub scaled_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HomMcResult {
    pub rows: Vec<HomMcRow>,
    /// Sum of the two blocked-arm runs.
    pub background_counts: u64,
    pub background_scaled: f64,
    /// Acquisition-time scale factor applied to raw counts.
    pub scale: f64,
    pub n_pulses: u64,
    pub seed: u64,
    pub herald_prob_1: f64,
    pub herald_prob_2: f64,
}

/// Gaussian dip fitted to a four-fold curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DipFit {
    pub baseline: f64,
    pub visibility: f64,
    pub visibility_stderr: f64,
    pub rms_width: f64,
    pub center: f64,
}

impl HomMcResult {
    /// Weighted least-squares fit of base·(1 − V·exp(−(τ−τ₀)²/(2w²))) to the
    /// raw counts, optionally after subtracting the blocked-arm background.
    pub fn fit_dip(&self, subtract_background: bool) -> Result<DipFit> {
        let bg = if subtract_background { self.background_counts as f64 } else { 0.0 };
        let delays: Vec<f64> = self.rows.iter().map(|r| r.delay).collect();
        let counts: Vec<f64> = self.rows.iter().map(|r| r.fourfold_counts as f64 - bg).collect();
        let sigma: Vec<f64> = self
            .rows
            .iter()
            .map(|r| (r.fourfold_counts as f64 + if subtract_background { bg } else { 0.0 }).max(1.0).sqrt())
            .collect();
        if delays.len() < 5 {
            return Err(domain("delays", "need at least 5 delays to fit a dip"));
        }
        let span = delays.iter().fold(0.0f64, |a, d| a.max(d.abs()));
        if !(span > 0.0) {
            return Err(domain("delays", "need a non-zero delay span"));
        }
        // Parameters: baseline, visibility, ln(width / span), center / span.
        let model = |p: &[f64], tau: f64| {
            let w = p[2].exp() * span;
            p[0] * (1.0 - p[1] * (-0.5 * ((tau - p[3] * span) / w).powi(2)).exp())
        };
        let residual = |p: &[f64]| {
            Some(
                delays
                    .iter()
                    .zip(&counts)
                    .zip(&sigma)
                    .map(|((&t, &c), &s)| (model(p, t) - c) / s)
                    .collect::<Vec<f64>>(),
            )
        };
        let n = counts.len();
        let edge = (n / 5).max(1);
        let mut sorted: Vec<(f64, f64)> = delays.iter().copied().zip(counts.iter().copied()).collect();
        sorted.sort_by(|a, b| b.0.abs().total_cmp(&a.0.abs()));
        let base0 = sorted[..edge].iter().map(|x| x.1).sum::<f64>() / edge as f64;
        let min0 = counts.iter().copied().fold(f64::INFINITY, f64::min);
        if !(base0 > 0.0) {
            return Err(Error::Numerical("dip baseline has no counts".into()));
        }
        let x0 = [base0, 1.0 - min0 / base0, (0.1f64).ln(), 0.0];
        let fit = levenberg_marquardt(residual, &x0, 500).ok_or_else(|| Error::Numerical("dip fit failed".into()))?;
        // Covariance (JᵀJ)⁻¹ of the weighted problem.
        let p = &fit.params;
        let mut jac = nalgebra::DMatrix::<f64>::zeros(n, 4);
        for k in 0..4 {
            let h = 1e-6 * p[k].abs().max(1e-3);
            let mut up = p.clone();
            up[k] += h;
            let mut dn = p.clone();
            dn[k] -= h;
            for (i, ((&t, _), &s)) in delays.iter().zip(&counts).zip(&sigma).enumerate() {
                jac[(i, k)] = (model(&up, t) - model(&dn, t)) / (2.0 * h * s);
            }
        }
        let cov = (jac.transpose() * &jac)
            .try_inverse()
            .ok_or_else(|| Error::Numerical("singular dip-fit covariance".into()))?;
        Ok(DipFit {
            baseline: p[0],
            visibility: p[1],
            visibility_stderr: cov[(1, 1)].max(0.0).sqrt(),
            rms_width: p[2].exp() * span,
            center: p[3] * span,
        })
    }
}

/// Photon content of one heralded source in one pulse.
#[derive(Debug, Clone, Copy)]
struct SourceDraw {
    pairs: usize,
    raman_signal: usize,
}

/// Joint (pairs, idler Raman) distribution conditioned on the herald click.
struct HeraldedSource {
    cdf: Vec<f64>,
    cells: Vec<usize>,
    herald_prob: f64,
}

impl HeraldedSource {
    fn new(pairs: &CountTable, raman_idler: &CountTable, herald: &DetectorSpec) -> Self {
        let miss = 1.0 - herald.efficiency;
        let no_dark = 1.0 - herald.dark_per_pulse();
        let mut cdf = Vec::new();
        let mut cells = Vec::new();
        let mut total = 0.0;
        for n in 0..pairs.cdf.len() {
            for r in 0..raman_idler.cdf.len() {
                let click = 1.0 - no_dark * miss.powi((n + r) as i32);
                let w = pairs.pmf(n) * raman_idler.pmf(r) * click;
                if w > 0.0 {
                    total += w;
                    cdf.push(total);
                    cells.push(n);
                }
            }
        }
        for c in &mut cdf {
            *c /= total;
        }
        Self {
            cdf,
            cells,
            herald_prob: total,
        }
    }

    fn sample_pairs<R: Rng>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let idx = self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1);
        self.cells[idx]
    }
}

/// Probability that both beam-splitter outputs click, with `a0` photons
/// routed to A, `b0` to B and `m` more split 50:50 independently.
fn both_click(a0: i32, b0: i32, m: i32, det_a: &DetectorSpec, det_b: &DetectorSpec) -> f64 {
    let (ea, eb) = (det_a.efficiency, det_b.efficiency);
    let (qa, qb) = (1.0 - det_a.dark_per_pulse(), 1.0 - det_b.dark_per_pulse());
    let none_a = qa * (1.0 - ea).powi(a0) * (1.0 - 0.5 * ea).powi(m);
    let none_b = qb * (1.0 - eb).powi(b0) * (1.0 - 0.5 * eb).powi(m);
    let none_ab = qa * qb * (1.0 - ea).powi(a0) * (1.0 - eb).powi(b0) * (1.0 - 0.5 * ea - 0.5 * eb).powi(m);
    (1.0 - none_a - none_b + none_ab).clamp(0.0, 1.0)
}

/// Four-fold probability given both heralds clicked. The first pair of
/// each source interferes with overlap `overlap`; everything else is
/// distinguishable.
fn fourfold_prob(s1: SourceDraw, s2: SourceDraw, overlap: f64, det_a: &DetectorSpec, det_b: &DetectorSpec) -> f64 {
    if s1.pairs >= 1 && s2.pairs >= 1 {
        let m = (s1.pairs - 1 + s2.pairs - 1 + s1.raman_signal + s2.raman_signal) as i32;
        let split = 0.5 * (1.0 - overlap);
        split * both_click(1, 1, m, det_a, det_b)
            + (1.0 - split) * 0.5 * (both_click(2, 0, m, det_a, det_b) + both_click(0, 2, m, det_a, det_b))
    } else {
        let m = (s1.pairs + s2.pairs + s1.raman_signal + s2.raman_signal) as i32;
        both_click(0, 0, m, det_a, det_b)
    }
}

/// Four-fold HOM simulation between two identical heralded sources.
///
/// Each delay, and each of the two blocked-arm background runs, uses its
/// own random stream, so the table does not depend on scheduling.
pub fn mc_run_hom(scenario: &Scenario, delays: &[f64], n_pulses: u64, seed: u64) -> Result<HomMcResult> {
    scenario.validate()?;
    let hom = scenario
        .hom
        .as_ref()
        .ok_or_else(|| domain("hom", "scenario has no overlap function; add a `hom` section"))?;
    if n_pulses == 0 {
        return Err(domain("n_pulses", "must be > 0"));
    }
    if delays.is_empty() || delays.iter().any(|d| !d.is_finite()) {
        return Err(domain("delays", "need at least one finite delay"));
    }
    let t = scenario.fiber.temperature_k;
    let mu = pairs_per_pulse(&scenario.fiber, &scenario.pump, scenario.capture)?;
    let pairs = CountTable::pairs(mu, scenario.statistics);
    let raman_s = CountTable::poisson(raman_per_pulse(&scenario.raman_s, &scenario.pump, t)?);
    let raman_i = CountTable::poisson(raman_per_pulse(&scenario.raman_i, &scenario.pump, t)?);
    let dets = &scenario.detectors;
    let src1 = HeraldedSource::new(&pairs, &raman_i, &dets.herald_1);
    let src2 = HeraldedSource::new(&pairs, &raman_i, &dets.herald_2);
    let p_both = src1.herald_prob * src2.herald_prob;
    let heralded = Binomial::new(n_pulses, p_both.clamp(0.0, 1.0))
        .map_err(|e| Error::Numerical(format!("herald distribution: {e}")))?;
    let excess = hom.background_ratio();
    let (det_a, det_b) = (&dets.signal_1, &dets.signal_2);

    let draw = |rng: &mut ChaCha8Rng, src: &HeraldedSource| SourceDraw {
        pairs: src.sample_pairs(rng),
        raman_signal: raman_s.sample(rng),
    };
    // `prob` maps a pair of draws to a four-fold probability.
    let run = |stream: u64, prob: &(dyn Fn(SourceDraw, SourceDraw) -> f64 + Sync)| -> u64 {
        let mut rng = rng_for(seed, stream);
        let k = heralded.sample(&mut rng);
        let mut hits = 0;
        for _ in 0..k {
            let s1 = draw(&mut rng, &src1);
            let s2 = draw(&mut rng, &src2);
            if rng.random::<f64>() < prob(s1, s2).min(1.0) {
                hits += 1;
            }
        }
        hits
    };
    let dist = |s1: SourceDraw, s2: SourceDraw| fourfold_prob(s1, s2, 0.0, det_a, det_b);

    let counts: Vec<u64> = delays
        .par_iter()
        .enumerate()
        .map(|(i, &tau)| {
            let overlap = hom.overlap.eval(tau);
            run(i as u64, &|s1, s2| fourfold_prob(s1, s2, overlap, det_a, det_b) + excess * dist(s1, s2))
        })
        .collect();
    let base = delays.len() as u64;
    // Arm 1 blocked: only source 2's signal photons reach the splitter.
    let blocked_1 = run(base, &|s1, s2| {
        let only2 = SourceDraw { pairs: 0, raman_signal: 0 };
        fourfold_prob(only2, s2, 0.0, det_a, det_b) + excess * dist(s1, s2)
    });
    let blocked_2 = run(base + 1, &|s1, _s2| {
        let only1 = SourceDraw { pairs: 0, raman_signal: 0 };
        fourfold_prob(s1, only1, 0.0, det_a, det_b)
    });
    let scale = scenario.pump.rep_rate * hom.acquisition_time / n_pulses as f64;
    let rows = delays
        .iter()
        .zip(&counts)
        .map(|(&delay, &c)| {
            let stderr = (c as f64).sqrt();
            HomMcRow {
                delay,
                fourfold_counts: c,
                stderr,
                scaled_counts: c as f64 * scale,
                scaled_stderr: stderr * scale,
            }
        })
        .collect();
    let background_counts = blocked_1 + blocked_2;
    Ok(HomMcResult {
        rows,
        background_counts,
        background_scaled: background_counts as f64 * scale,
        scale,
        n_pulses,
        seed,
        herald_prob_1: src1.herald_prob,
        herald_prob_2: src2.herald_prob,
    })
}
