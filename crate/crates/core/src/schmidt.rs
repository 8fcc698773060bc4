//! Schmidt decomposition of a discretized JSA and heralded-photon purity.
//!
//! The singular value decomposition of the amplitude matrix is the discrete
//! Schmidt decomposition: Schmidt weights are the normalized squared
//! singular values and the heralded purity is the sum of squared weights.
//! Uniform grids need no quadrature weights since they cancel in every ratio.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::jsa::{build_jsa, default_grid, gauss_coeffs, GaussJsaCoeffs, JsaGrid, PhaseMatching};
use crate::phys::{ChannelPair, FiberSpec, PumpSpec};

/// Weights below this are dropped from a [`SchmidtResult`].
pub const WEIGHT_CUTOFF: f64 = 1e-12;

/// Schmidt weights, modes and purity of a two-photon amplitude.
#[derive(Debug, Clone)]
pub struct SchmidtResult {
    /// gₙ, descending, summing to one.
    pub weights: Vec<f64>,
    /// Singular values of the normalized amplitude matrix, sₙ = sqrt(gₙ).
    pub singular_values: Vec<f64>,
    /// Column n holds ψₙ sampled on the signal axis (discrete orthonormal).
    pub signal_modes: DMatrix<Complex64>,
    /// Column n holds φₙ sampled on the idler axis (discrete orthonormal).
    pub idler_modes: DMatrix<Complex64>,
    pub purity: f64,
    pub schmidt_number: f64,
    pub axis_s: Vec<f64>,
    pub axis_i: Vec<f64>,
}

impl SchmidtResult {
    pub fn n_modes(&self) -> usize {
        self.weights.len()
    }

    /// ψₙ scaled by 1/sqrt(Δω) so that Σ|ψₙ|²Δω = 1 approximates the
    /// continuum normalization.
    pub fn signal_mode_density(&self, n: usize) -> Vec<Complex64> {
        let scale = 1.0 / (self.axis_s[1] - self.axis_s[0]).sqrt();
        self.signal_modes.column(n).iter().map(|z| z * scale).collect()
    }

    pub fn idler_mode_density(&self, n: usize) -> Vec<Complex64> {
        let scale = 1.0 / (self.axis_i[1] - self.axis_i[0]).sqrt();
        self.idler_modes.column(n).iter().map(|z| z * scale).collect()
    }

    /// Σₙ sₙ ψₙ ⊗ φₙ.
    pub fn reconstruct(&self) -> DMatrix<Complex64> {
        let (ns, ni) = (self.signal_modes.nrows(), self.idler_modes.nrows());
        let mut out = DMatrix::<Complex64>::zeros(ns, ni);
        for (n, s) in self.singular_values.iter().enumerate() {
            let psi = self.signal_modes.column(n);
            let phi = self.idler_modes.column(n);
            out += (psi * phi.transpose()) * Complex64::new(*s, 0.0);
        }
        out
    }
}

/// Serializable summary of a [`SchmidtResult`].
#[derive(Debug, Clone, Serialize)]
pub struct SchmidtSummary {
    pub weights: Vec<f64>,
    pub purity: f64,
    pub schmidt_number: f64,
}

impl From<&SchmidtResult> for SchmidtSummary {
    fn from(r: &SchmidtResult) -> Self {
        Self {
            weights: r.weights.clone(),
            purity: r.purity,
            schmidt_number: r.schmidt_number,
        }
    }
}

fn check_finite(jsa: &JsaGrid) -> Result<()> {
    if jsa.values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("joint spectral amplitude"));
    }
    Ok(())
}

fn real_part(m: &DMatrix<Complex64>) -> DMatrix<f64> {
    m.map(|z| z.re)
}

fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|x| Complex64::new(x, 0.0))
}

fn weights_from_singular(values: &[f64]) -> Result<(Vec<usize>, Vec<f64>)> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let total: f64 = values.iter().map(|s| s * s).sum();
    if !(total > 0.0) {
        return Err(Error::Numerical("amplitude matrix is zero".into()));
    }
    let kept: Vec<usize> = order
        .into_iter()
        .filter(|&n| values[n] * values[n] / total >= WEIGHT_CUTOFF)
        .collect();
    let weights = kept.iter().map(|&n| values[n] * values[n] / total).collect();
    Ok((kept, weights))
}

fn purity_of(weights: &[f64]) -> f64 {
    weights.iter().map(|g| g * g).sum()
}

/// Full Schmidt decomposition by SVD.
pub fn schmidt_decompose(jsa: &JsaGrid) -> Result<SchmidtResult> {
    check_finite(jsa)?;
    let (sv, u, v_t) = if jsa.is_real() {
        let svd = real_part(&jsa.values).svd(true, true);
        (
            svd.singular_values.as_slice().to_vec(),
            to_complex(svd.u.as_ref().expect("requested U")),
            to_complex(svd.v_t.as_ref().expect("requested V^T")),
        )
    } else {
        let svd = jsa.values.clone().svd(true, true);
        (
            svd.singular_values.as_slice().to_vec(),
            svd.u.expect("requested U"),
            svd.v_t.expect("requested V^T"),
        )
    };
    if sv.iter().any(|s| !s.is_finite()) {
        return Err(Error::Numerical("SVD did not converge".into()));
    }
    let (kept, weights) = weights_from_singular(&sv)?;
    let norm = sv.iter().map(|s| s * s).sum::<f64>().sqrt();
    let signal_modes = DMatrix::from_fn(u.nrows(), kept.len(), |j, n| u[(j, kept[n])]);
    // F = U Σ V^H, so the idler mode is row n of V^H read as a column.
    let idler_modes = DMatrix::from_fn(v_t.ncols(), kept.len(), |k, n| v_t[(kept[n], k)]);
    let purity = purity_of(&weights);
    Ok(SchmidtResult {
        singular_values: kept.iter().map(|&n| sv[n] / norm).collect(),
        weights,
        signal_modes,
        idler_modes,
        purity,
        schmidt_number: 1.0 / purity,
        axis_s: jsa.axis_s.clone(),
        axis_i: jsa.axis_i.clone(),
    })
}

/// Schmidt weights only (no mode vectors), descending.
pub fn schmidt_weights(jsa: &JsaGrid) -> Result<Vec<f64>> {
    check_finite(jsa)?;
    let sv: Vec<f64> = if jsa.is_real() {
        real_part(&jsa.values).singular_values().as_slice().to_vec()
    } else {
        jsa.values.clone().singular_values().as_slice().to_vec()
    };
    if sv.iter().any(|s| !s.is_finite()) {
        return Err(Error::Numerical("SVD did not converge".into()));
    }
    Ok(weights_from_singular(&sv)?.1)
}

/// Heralded purity Σgₙ² from the singular values of the JSA.
pub fn svd_purity(jsa: &JsaGrid) -> Result<f64> {
    Ok(purity_of(&schmidt_weights(jsa)?))
}

/// Closed-form purity of the Gaussian JSA, sqrt(1 − C²/(AB)).
pub fn purity_gauss_analytic(coeffs: &GaussJsaCoeffs) -> Result<f64> {
    coeffs.validate()?;
    Ok((1.0 - coeffs.c * coeffs.c / (coeffs.a * coeffs.b)).sqrt())
}

/// Which photon is traced out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceOut {
    Signal,
    Idler,
}

/// Single-photon spectral density matrix on one frequency axis.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    pub values: DMatrix<Complex64>,
    /// Detunings from `center`, rad/s.
    pub axis: Vec<f64>,
    /// Absolute center frequency, rad/s.
    pub center: f64,
}

impl DensityMatrix {
    /// Validated construction: Hermitian and unit trace within 1e-10,
    /// smallest eigenvalue above −1e-8.
    pub fn new(values: DMatrix<Complex64>, axis: Vec<f64>, center: f64) -> Result<Self> {
        let rho = Self::from_parts(values, axis, center)?;
        let n = rho.dim();
        for j in 0..n {
            for k in j..n {
                if (rho.values[(j, k)] - rho.values[(k, j)].conj()).norm() > 1e-10 {
                    return Err(domain("density_matrix", format!("not Hermitian at ({j}, {k})")));
                }
            }
        }
        let tr = rho.trace();
        if (tr - 1.0).abs() > 1e-10 {
            return Err(domain("density_matrix", format!("trace {tr} != 1")));
        }
        let min_eig = rho.min_eigenvalue();
        if min_eig < -1e-8 {
            return Err(domain("density_matrix", format!("not positive semidefinite (eigenvalue {min_eig:.3e})")));
        }
        Ok(rho)
    }

    fn from_parts(values: DMatrix<Complex64>, axis: Vec<f64>, center: f64) -> Result<Self> {
        if !values.is_square() || values.nrows() != axis.len() {
            return Err(Error::AxisMismatch(format!(
                "{}x{} matrix on an axis of {} points",
                values.nrows(),
                values.ncols(),
                axis.len()
            )));
        }
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("density matrix"));
        }
        Ok(Self { values, axis, center })
    }

    pub fn dim(&self) -> usize {
        self.axis.len()
    }

    pub fn trace(&self) -> f64 {
        self.values.diagonal().iter().map(|z| z.re).sum()
    }

    /// Tr(ρ²) = Σ|ρ_jk|² for Hermitian ρ.
    pub fn purity(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.values.clone())
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn spacing(&self) -> f64 {
        self.axis[1] - self.axis[0]
    }

    /// Absolute angular frequency of axis point `j`.
    pub fn omega(&self, j: usize) -> f64 {
        self.center + self.axis[j]
    }
}

/// Reduced state of the photon that remains after tracing out the other:
/// ρ_s = F·F^H or ρ_i = F^T·F*, normalized to unit trace.
pub fn reduced_density(jsa: &JsaGrid, trace_out: TraceOut) -> Result<DensityMatrix> {
    check_finite(jsa)?;
    let (values, axis, center) = if jsa.is_real() {
        let f = real_part(&jsa.values);
        let rho = match trace_out {
            TraceOut::Idler => &f * f.transpose(),
            TraceOut::Signal => f.transpose() * &f,
        };
        (to_complex(&rho), axis_for(jsa, trace_out), center_for(jsa, trace_out))
    } else {
        let f = &jsa.values;
        let rho = match trace_out {
            TraceOut::Idler => f * f.adjoint(),
            TraceOut::Signal => f.transpose() * f.map(|z| z.conj()),
        };
        (rho, axis_for(jsa, trace_out), center_for(jsa, trace_out))
    };
    let mut rho = DensityMatrix::from_parts(values, axis, center)?;
    let tr = rho.trace();
    if !(tr > 0.0) {
        return Err(Error::Numerical("reduced state has zero trace".into()));
    }
    rho.values.unscale_mut(tr);
    Ok(rho)
}

fn axis_for(jsa: &JsaGrid, trace_out: TraceOut) -> Vec<f64> {
    match trace_out {
        TraceOut::Idler => jsa.axis_s.clone(),
        TraceOut::Signal => jsa.axis_i.clone(),
    }
}

fn center_for(jsa: &JsaGrid, trace_out: TraceOut) -> f64 {
    match trace_out {
        TraceOut::Idler => jsa.channel.omega_s0,
        TraceOut::Signal => jsa.channel.omega_i0,
    }
}

/// Grid and model settings for [`purity_scan`].
#[derive(Debug, Clone, Copy)]
pub struct ScanOptions {
    pub n_points: usize,
    /// Half-range of each grid in units of the larger marginal std.
    pub n_sigma: f64,
    pub alpha: f64,
    /// Also compute the SVD purity column.
    pub numeric: bool,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            n_points: 512,
            n_sigma: 4.0,
            alpha: crate::jsa::DEFAULT_ALPHA,
            numeric: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanRow {
    pub t_fwhm: f64,
    pub purity_analytic: f64,
    /// NaN when the numeric column was not requested.
    pub purity_svd: f64,
}

/// Purity against pump pulse width over `n_steps` evenly spaced widths in
/// `width_range` (seconds, inclusive). `pump` supplies everything except
/// the width.
pub fn purity_scan(
    fiber: &FiberSpec,
    pump: &PumpSpec,
    channel: &ChannelPair,
    width_range: (f64, f64),
    n_steps: usize,
    opts: &ScanOptions,
) -> Result<Vec<ScanRow>> {
    let (lo, hi) = width_range;
    if n_steps < 3 {
        return Err(domain("n_steps", "must be >= 3"));
    }
    if !(lo > 0.0 && hi > lo) || !hi.is_finite() {
        return Err(domain("width_range", format!("need 0 < lo < hi, got [{lo}, {hi}]")));
    }
    let step = (hi - lo) / (n_steps - 1) as f64;
    (0..n_steps)
        .into_par_iter()
        .map(|i| {
            let t = lo + i as f64 * step;
            let p = pump.with_t_fwhm(t);
            let coeffs = gauss_coeffs(fiber, &p, channel, opts.alpha)?;
            let purity_analytic = purity_gauss_analytic(&coeffs)?;
            let purity_svd = if opts.numeric {
                let grid = default_grid(&coeffs, opts.n_points, opts.n_sigma)?;
                let jsa = build_jsa(fiber, &p, channel, &grid, PhaseMatching::Gauss { alpha: opts.alpha })?;
                svd_purity(&jsa)?
            } else {
                f64::NAN
            };
            Ok(ScanRow {
                t_fwhm: t,
                purity_analytic,
                purity_svd,
            })
        })
        .collect()
}

/// Row with the largest analytic purity.
pub fn scan_argmax(rows: &[ScanRow]) -> Option<ScanRow> {
    rows.iter()
        .copied()
        .max_by(|a, b| a.purity_analytic.total_cmp(&b.purity_analytic))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phys::GridSpec;
    use approx::assert_relative_eq;

    fn channel() -> ChannelPair {
        ChannelPair::symmetric(1.2e15, 5e12).unwrap()
    }

    fn grid_from(values: DMatrix<Complex64>, half: f64) -> JsaGrid {
        let n = values.nrows();
        let g = GridSpec::new(n, half, half).unwrap();
        let mut jsa = JsaGrid {
            values,
            axis_s: g.axis_s(),
            axis_i: g.axis_i(),
            channel: channel(),
            mode: None,
            normalized: false,
            heralding_efficiency: None,
            warnings: vec![],
        };
        jsa.normalize().unwrap();
        jsa
    }

    #[test]
    fn rank_one_is_pure() {
        let n = 32;
        let u: Vec<f64> = (0..n).map(|j| ((j as f64) * 0.3).sin() + 1.1).collect();
        let v: Vec<f64> = (0..n).map(|k| (-(k as f64 - 10.0).powi(2) / 30.0).exp()).collect();
        let jsa = grid_from(DMatrix::from_fn(n, n, |j, k| Complex64::new(u[j] * v[k], 0.0)), 1.0);
        let r = schmidt_decompose(&jsa).unwrap();
        assert_relative_eq!(r.weights[0], 1.0, max_relative = 1e-12);
        assert_relative_eq!(r.purity, 1.0, max_relative = 1e-12);
        assert_relative_eq!(r.schmidt_number, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn two_equal_modes() {
        let n = 16;
        let jsa = grid_from(
            DMatrix::from_fn(n, n, |j, k| if (j, k) == (2, 5) || (j, k) == (9, 1) { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) }),
            1.0,
        );
        let r = schmidt_decompose(&jsa).unwrap();
        assert_eq!(r.n_modes(), 2);
        assert_relative_eq!(r.purity, 0.5, max_relative = 1e-12);
        assert_relative_eq!(r.schmidt_number, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn complex_jsa_decomposes_and_reconstructs() {
        let n = 24;
        let jsa = grid_from(
            DMatrix::from_fn(n, n, |j, k| {
                let (x, y) = (j as f64 / 8.0 - 1.5, k as f64 / 8.0 - 1.5);
                Complex64::from_polar((-(x * x + y * y + 1.2 * x * y)).exp(), 0.7 * x * y + 0.2 * x)
            }),
            1.0,
        );
        let r = schmidt_decompose(&jsa).unwrap();
        // Modes below the weight cutoff are dropped, each worth up to 1e-6 in norm.
        let err = (r.reconstruct() - &jsa.values).norm();
        assert!(err < 1e-5, "{err}");
        let sum: f64 = r.weights.iter().sum();
        assert!((sum - 1.0).abs() < 1e-10);
        assert!(r.weights.windows(2).all(|w| w[0] >= w[1]));
        let gram = r.signal_modes.adjoint() * &r.signal_modes;
        assert!((gram - DMatrix::<Complex64>::identity(r.n_modes(), r.n_modes())).norm() < 1e-8);
        let gram = r.idler_modes.adjoint() * &r.idler_modes;
        assert!((gram - DMatrix::<Complex64>::identity(r.n_modes(), r.n_modes())).norm() < 1e-8);

        let rho_s = reduced_density(&jsa, TraceOut::Idler).unwrap();
        let rho_i = reduced_density(&jsa, TraceOut::Signal).unwrap();
        assert!((rho_s.purity() - r.purity).abs() < 1e-10);
        assert!((rho_i.purity() - r.purity).abs() < 1e-10);
        assert!(DensityMatrix::new(rho_s.values.clone(), rho_s.axis.clone(), rho_s.center).is_ok());
        assert!((svd_purity(&jsa).unwrap() - r.purity).abs() < 1e-12);
    }

    #[test]
    fn non_finite_rejected() {
        let n = 16;
        let mut jsa = grid_from(DMatrix::from_element(n, n, Complex64::new(1.0, 0.0)), 1.0);
        jsa.values[(3, 3)] = Complex64::new(f64::NAN, 0.0);
        assert!(matches!(schmidt_decompose(&jsa), Err(Error::NonFinite(_))));
    }

    #[test]
    fn analytic_purity_values() {
        assert_eq!(purity_gauss_analytic(&GaussJsaCoeffs::new(2.0, 3.0, 0.0).unwrap()).unwrap(), 1.0);
        let p = purity_gauss_analytic(&GaussJsaCoeffs { a: 2.0, b: 2.0, c: 1.0 }).unwrap();
        assert_relative_eq!(p, 3f64.sqrt() / 2.0, max_relative = 1e-15);
        assert!(purity_gauss_analytic(&GaussJsaCoeffs { a: 1.0, b: 1.0, c: 1.0 }).is_err());
        // Signal/idler swap.
        let c = GaussJsaCoeffs { a: 2.0, b: 5.0, c: -1.3 };
        assert_eq!(purity_gauss_analytic(&c).unwrap(), purity_gauss_analytic(&c.swapped()).unwrap());
    }

    #[test]
    fn symmetric_gvm_closed_form() {
        // r = (T*/T)^2
        let r: f64 = (8.0f64 / 25.0).powi(2);
        let p = 2.0 * r.sqrt() / (1.0 + r);
        assert_relative_eq!(p, 0.58055, max_relative = 1e-5);
        let s = 1.0;
        let g = r * s;
        let coeffs = GaussJsaCoeffs { a: s + g, b: s + g, c: s - g };
        assert_relative_eq!(purity_gauss_analytic(&coeffs).unwrap(), p, max_relative = 1e-12);
    }

    #[test]
    fn density_matrix_validation() {
        let axis = vec![-1.0, 0.0, 1.0];
        let bad_trace = DMatrix::<Complex64>::identity(3, 3);
        assert!(DensityMatrix::new(bad_trace, axis.clone(), 1e15).is_err());
        let mut m = DMatrix::<Complex64>::identity(3, 3).unscale(3.0);
        m[(0, 1)] = Complex64::new(0.0, 0.1);
        assert!(DensityMatrix::new(m.clone(), axis.clone(), 1e15).is_err());
        m[(1, 0)] = Complex64::new(0.0, -0.1);
        assert!(DensityMatrix::new(m, axis.clone(), 1e15).is_ok());
        let mut neg = DMatrix::<Complex64>::zeros(3, 3);
        neg[(0, 0)] = Complex64::new(1.2, 0.0);
        neg[(1, 1)] = Complex64::new(-0.2, 0.0);
        assert!(DensityMatrix::new(neg, axis.clone(), 1e15).is_err());
        assert!(DensityMatrix::new(DMatrix::identity(2, 2), axis, 1e15).is_err());
    }

    #[test]
    fn scan_validation() {
        let wp = 1.2e15;
        let fiber = FiberSpec::new(300.0, 2e-3, [0.0, 4.9e-9, -1e-26, 0.0, 0.0], wp, 77.0).unwrap();
        let pump = PumpSpec::new(wp, 25e-12, 23e-6, 27.9e6).unwrap();
        let opts = ScanOptions::default();
        assert!(purity_scan(&fiber, &pump, &channel(), (1e-12, 2e-12), 2, &opts).is_err());
        assert!(purity_scan(&fiber, &pump, &channel(), (2e-12, 1e-12), 5, &opts).is_err());
    }
}
