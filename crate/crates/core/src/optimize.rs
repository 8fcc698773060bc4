//! Small 1-D and least-squares helpers shared by the scans and fits.

use nalgebra::{DMatrix, DVector};

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for the maximum of a unimodal `f` on `[lo, hi]`.
/// Returns `(x, f(x))`; stops once the bracket is narrower than `tol`.
pub fn golden_section_max<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64, max_iter: usize) -> (f64, f64) {
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..max_iter {
        if (b - a).abs() <= tol {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    // The bracket ends are candidates too: a monotone f converges onto one.
    [(a, f(a)), (c, fc), (d, fd), (b, f(b))]
        .into_iter()
        .fold((f64::NAN, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best })
}

/// Result of [`levenberg_marquardt`].
#[derive(Debug, Clone)]
pub struct LmFit {
    pub params: Vec<f64>,
    pub residuals: Vec<f64>,
    pub cost: f64,
    pub iterations: usize,
}

/// Minimize ½‖r(x)‖² with a forward-difference Jacobian.
pub fn levenberg_marquardt<F>(residual: F, x0: &[f64], max_iter: usize) -> Option<LmFit>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut r = residual(&x)?;
    let m = r.len();
    let mut cost = 0.5 * r.iter().map(|v| v * v).sum::<f64>();
    let mut lambda = 1e-3;
    let mut iterations = 0;
    for it in 0..max_iter {
        iterations = it + 1;
        let mut jac = DMatrix::<f64>::zeros(m, n);
        for p in 0..n {
            let h = 1e-7 * x[p].abs().max(1e-3);
            let mut xp = x.clone();
            xp[p] += h;
            let rp = residual(&xp)?;
            for i in 0..m {
                jac[(i, p)] = (rp[i] - r[i]) / h;
            }
        }
        let rv = DVector::from_vec(r.clone());
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * &rv;
        if g.amax() < 1e-15 {
            break;
        }
        let mut improved = false;
        for _ in 0..30 {
            let mut damped = jtj.clone();
            for p in 0..n {
                damped[(p, p)] += lambda * jtj[(p, p)].max(1e-12);
            }
            let Some(step) = damped.lu().solve(&(-&g)) else {
                lambda *= 10.0;
                continue;
            };
            let xn: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a + s).collect();
            if let Some(rn) = residual(&xn) {
                let cn = 0.5 * rn.iter().map(|v| v * v).sum::<f64>();
                if cn.is_finite() && cn < cost {
                    let small = step.amax() < 1e-13 * (1.0 + x.iter().fold(0.0f64, |a, v| a.max(v.abs())));
                    x = xn;
                    r = rn;
                    let drop = cost - cn;
                    cost = cn;
                    lambda = (lambda * 0.3).max(1e-12);
                    improved = true;
                    if small || drop < 1e-30 {
                        return Some(LmFit { params: x, residuals: r, cost, iterations });
                    }
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    Some(LmFit {
        params: x,
        residuals: r,
        cost,
        iterations,
    })
}
