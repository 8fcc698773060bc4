//! Hong-Ou-Mandel interference between two independent heralded photons.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::schmidt::DensityMatrix;

/// Overlap Tr(ρ₁ρ₂) together with the purity/distance decomposition
/// [Tr ρ₁² + Tr ρ₂² − ‖ρ₁ − ρ₂‖²] / 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Visibility {
    pub value: f64,
    pub purity_1: f64,
    pub purity_2: f64,
    /// Squared Hilbert-Schmidt distance ‖ρ₁ − ρ₂‖².
    pub distance_sq: f64,
    /// Right-hand side of the decomposition.
    pub decomposed: f64,
}

fn check_axes(rho1: &DensityMatrix, rho2: &DensityMatrix) -> Result<()> {
    if rho1.dim() != rho2.dim() {
        return Err(Error::AxisMismatch(format!("{} vs {} points", rho1.dim(), rho2.dim())));
    }
    let tol = 1e-9 * rho1.spacing().abs();
    if rho1.axis.iter().zip(&rho2.axis).any(|(a, b)| (a - b).abs() > tol) {
        return Err(Error::AxisMismatch("detuning axes differ".into()));
    }
    if (rho1.center - rho2.center).abs() > 1e-9 * rho1.center.abs() {
        return Err(Error::AxisMismatch(format!(
            "center frequencies differ: {:.9e} vs {:.9e} rad/s",
            rho1.center, rho2.center
        )));
    }
    Ok(())
}

/// Σ_jk ρ₁[j,k]·ρ₂[k,j], the element-wise kernel shared by the overlap and the dip.
fn overlap_kernel(rho1: &DensityMatrix, rho2: &DensityMatrix) -> DMatrix<Complex64> {
    let n = rho1.dim();
    DMatrix::from_fn(n, n, |j, k| rho1.values[(j, k)] * rho2.values[(k, j)])
}

/// Maximum HOM visibility Tr(ρ₁ρ₂) between two heralded photons.
///
/// Both evaluations of the overlap are returned; they must agree to 1e-10
/// or the call fails.
pub fn visibility(rho1: &DensityMatrix, rho2: &DensityMatrix) -> Result<Visibility> {
    check_axes(rho1, rho2)?;
    let value: f64 = overlap_kernel(rho1, rho2).iter().map(|z| z.re).sum();
    let purity_1 = rho1.purity();
    let purity_2 = rho2.purity();
    let distance_sq: f64 = (&rho1.values - &rho2.values).iter().map(|z| z.norm_sqr()).sum();
    let decomposed = 0.5 * (purity_1 + purity_2 - distance_sq);
    if (value - decomposed).abs() > 1e-10 {
        return Err(Error::Numerical(format!(
            "overlap {value} disagrees with purity/distance form {decomposed}"
        )));
    }
    Ok(Visibility {
        value,
        purity_1,
        purity_2,
        distance_sq,
        decomposed,
    })
}

/// Coincidence probability against relative delay.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DipCurve {
    /// Seconds.
    pub delays: Vec<f64>,
    pub coincidence_prob: Vec<f64>,
    /// Tr(ρ₁ρ₂), the zero-delay dip depth relative to the baseline.
    pub v_net: f64,
    /// Mean coincidence probability at the largest |delay|.
    pub baseline: f64,
}

impl DipCurve {
    /// (baseline − min P) / baseline.
    pub fn visibility(&self) -> f64 {
        let min = self.coincidence_prob.iter().cloned().fold(f64::INFINITY, f64::min);
        (self.baseline - min) / self.baseline
    }

    /// Full width at half depth of the dip, by linear interpolation outward
    /// from the deepest sample. `None` if the dip never recovers to half depth
    /// on both sides.
    pub fn fwhm(&self) -> Option<f64> {
        let depth: Vec<f64> = self.coincidence_prob.iter().map(|p| 1.0 - p / self.baseline).collect();
        let (i0, &d0) = depth.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
        let half = 0.5 * d0;
        let crossing = |range: Box<dyn Iterator<Item = usize>>| -> Option<f64> {
            let mut prev = i0;
            for i in range {
                if depth[i] <= half {
                    let (t0, t1) = (self.delays[prev], self.delays[i]);
                    let (y0, y1) = (depth[prev], depth[i]);
                    return Some(t0 + (half - y0) * (t1 - t0) / (y1 - y0));
                }
                prev = i;
            }
            None
        };
        let right = crossing(Box::new(i0 + 1..depth.len()))?;
        let left = crossing(Box::new((0..i0).rev()))?;
        Some(right - left)
    }
}

/// Largest |τ| that does not alias on an axis with angular spacing `spacing`.
pub fn alias_limit(spacing: f64) -> f64 {
    std::f64::consts::PI / spacing
}

/// HOM coincidence probability P(τ) = ½[1 − Re J(τ)] with
/// J(τ) = Σ_jk ρ₁[j,k] ρ₂[k,j] exp(i(ω_j − ω_k)τ).
///
/// The discrete overlap is periodic in τ with period 2π/Δω; delays beyond
/// half a period are rejected.
pub fn dip_curve(rho1: &DensityMatrix, rho2: &DensityMatrix, delays: &[f64]) -> Result<DipCurve> {
    check_axes(rho1, rho2)?;
    if delays.is_empty() {
        return Err(domain("delays", "at least one delay is required"));
    }
    let spacing = rho1.spacing();
    let limit = alias_limit(spacing);
    if let Some(&bad) = delays.iter().find(|t| !t.is_finite() || t.abs() > limit) {
        return Err(Error::Aliasing {
            delay: bad,
            spacing,
            limit,
        });
    }
    let kernel = overlap_kernel(rho1, rho2);
    let v_net: f64 = kernel.iter().map(|z| z.re).sum();
    let n = rho1.dim();
    let coincidence_prob: Vec<f64> = delays
        .par_iter()
        .map(|&tau| {
            let phase: Vec<Complex64> = rho1.axis.iter().map(|w| Complex64::from_polar(1.0, w * tau)).collect();
            let mut j_tau = Complex64::new(0.0, 0.0);
            for k in 0..n {
                let col = kernel.column(k);
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..n {
                    acc += col[j] * phase[j];
                }
                j_tau += acc * phase[k].conj();
            }
            0.5 * (1.0 - j_tau.re)
        })
        .collect();
    let max_abs = delays.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    let edge: Vec<f64> = delays
        .iter()
        .zip(&coincidence_prob)
        .filter(|(t, _)| t.abs() == max_abs)
        .map(|(_, p)| *p)
        .collect();
    let baseline = edge.iter().sum::<f64>() / edge.len() as f64;
    Ok(DipCurve {
        delays: delays.to_vec(),
        coincidence_prob,
        v_net,
        baseline,
    })
}

/// `n` delays evenly spaced over [−max, max].
pub fn symmetric_delays(max: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![0.0];
    }
    let step = 2.0 * max / (n - 1) as f64;
    let mut out = vec![0.0; n];
    // Fill the negative half and mirror it so ±τ pairs are exact.
    for i in 0..n / 2 {
        let t = -max + i as f64 * step;
        out[i] = t;
        out[n - 1 - i] = -t;
    }
    out
}

/// Dip visibility without background subtraction, for a uniform additive
/// background rate `background_rate` under signal rate `signal_rate`.
pub fn raw_visibility(v_net: f64, signal_rate: f64, background_rate: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&v_net) {
        return Err(domain("v_net", format!("must lie in [0, 1], got {v_net}")));
    }
    if !(signal_rate >= 0.0 && background_rate >= 0.0) {
        return Err(domain("rates", "must be >= 0"));
    }
    let total = signal_rate + background_rate;
    if !(total > 0.0) {
        return Err(domain("rates", "signal + background must be > 0"));
    }
    Ok(v_net * signal_rate / total)
}
