//! Dense nonlinear least squares (Levenberg–Marquardt) and small linear fits.
//!
//! One implementation backs the window-voltage, thermal-carrier, and
//! Lorentzian fitters. Weighted problems pre-scale their residuals by 1/σ so
//! the returned covariance (JᵀJ)⁻¹ is the parameter covariance.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("fit did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("rank-deficient Jacobian (σ_min/σ_max = {condition:.3e}): parameters are not independently constrained")]
    RankDeficient { condition: f64 },
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("bad fit input: {0}")]
    BadInput(String),
}

#[derive(Debug, Clone)]
pub struct LmOptions {
    pub max_iter: usize,
    /// Relative parameter-step convergence tolerance.
    pub xtol: f64,
    pub lambda_init: f64,
    pub lower_bounds: Option<Vec<f64>>,
    pub upper_bounds: Option<Vec<f64>>,
    /// Scale the covariance by the reduced chi-square (for unweighted data).
    pub scale_cov_by_chi2: bool,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            xtol: 1e-10,
            lambda_init: 1e-3,
            lower_bounds: None,
            upper_bounds: None,
            scale_cov_by_chi2: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmFit {
    pub params: DVector<f64>,
    pub covariance: DMatrix<f64>,
    /// Final sum of squared residuals.
    pub chi2: f64,
    pub iterations: usize,
}

fn clamp_params(p: &mut DVector<f64>, opts: &LmOptions) {
    if let Some(lo) = &opts.lower_bounds {
        for (v, &l) in p.iter_mut().zip(lo) {
            if *v < l {
                *v = l;
            }
        }
    }
    if let Some(hi) = &opts.upper_bounds {
        for (v, &h) in p.iter_mut().zip(hi) {
            if *v > h {
                *v = h;
            }
        }
    }
}

/// Forward-difference Jacobian for models without an analytic one.
pub fn numeric_jacobian<F>(residuals: &F, p: &DVector<f64>, r0: &DVector<f64>) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let m = r0.len();
    let n = p.len();
    let mut jac = DMatrix::zeros(m, n);
    for j in 0..n {
        let step = 1e-7 * p[j].abs().max(1e-7);
        let mut pj = p.clone();
        pj[j] += step;
        let rj = residuals(&pj);
        for i in 0..m {
            jac[(i, j)] = (rj[i] - r0[i]) / step;
        }
    }
    jac
}

/// Minimize ‖r(p)‖² by Levenberg–Marquardt.
///
/// `jacobian` returns ∂r_i/∂p_j; pass `None` to fall back to forward
/// differences. Rank deficiency of the Jacobian at the starting point is
/// reported as an error rather than silently pinned by damping.
pub fn lm_fit<F, J>(
    residuals: F,
    jacobian: Option<J>,
    x0: &[f64],
    opts: &LmOptions,
) -> Result<LmFit, FitError>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
    J: Fn(&DVector<f64>) -> DMatrix<f64>,
{
    let n = x0.len();
    if n == 0 {
        return Err(FitError::BadInput("no parameters to fit".into()));
    }
    let mut p = DVector::from_column_slice(x0);
    clamp_params(&mut p, opts);
    let mut r = residuals(&p);
    let m = r.len();
    if m < n {
        return Err(FitError::BadInput(format!(
            "{m} residuals cannot constrain {n} parameters"
        )));
    }
    let eval_jac = |p: &DVector<f64>, r: &DVector<f64>| -> DMatrix<f64> {
        match &jacobian {
            Some(j) => j(p),
            None => numeric_jacobian(&residuals, p, r),
        }
    };

    let mut jac = eval_jac(&p, &r);
    check_rank(&jac)?;

    let mut cost = r.norm_squared();
    let mut lambda = opts.lambda_init;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &r;
        let mut damped = jtj.clone();
        let floor = 1e-12 * jtj.diagonal().amax().max(f64::MIN_POSITIVE);
        for i in 0..n {
            let d = jtj[(i, i)].max(floor);
            damped[(i, i)] += lambda * d;
        }
        let step = match damped.clone().cholesky() {
            Some(ch) => -(ch.solve(&jtr)),
            None => {
                // Raise damping until the system is solvable.
                lambda = (lambda * 4.0).min(1e12);
                continue;
            }
        };
        let mut trial = &p + &step;
        clamp_params(&mut trial, opts);
        let r_trial = residuals(&trial);
        let cost_trial = r_trial.norm_squared();
        if cost_trial.is_finite() && cost_trial <= cost {
            let max_rel_step = step
                .iter()
                .zip(p.iter())
                .map(|(s, v)| s.abs() / (v.abs() + 1e-30))
                .fold(0.0f64, f64::max);
            p = trial;
            r = r_trial;
            cost = cost_trial;
            jac = eval_jac(&p, &r);
            lambda = (lambda / 3.0).max(1e-14);
            if max_rel_step < opts.xtol {
                return finish(p, jac, cost, m, n, iterations, opts);
            }
        } else {
            lambda *= 4.0;
            if lambda > 1e14 {
                // No descent direction left: either converged to the floor or stuck.
                if cost <= 1e-28 || lambda.is_infinite() {
                    return finish(p, jac, cost, m, n, iterations, opts);
                }
                return Err(FitError::NoConvergence {
                    iterations,
                    residual: cost.sqrt(),
                });
            }
        }
    }
    Err(FitError::NoConvergence {
        iterations,
        residual: cost.sqrt(),
    })
}

fn check_rank(jac: &DMatrix<f64>) -> Result<(), FitError> {
    let svd = jac.clone().svd(false, false);
    let smax = svd.singular_values.amax();
    let smin = svd
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if smax <= 0.0 || smin / smax < 1e-12 {
        return Err(FitError::RankDeficient {
            condition: if smax > 0.0 { smin / smax } else { 0.0 },
        });
    }
    Ok(())
}

fn finish(
    p: DVector<f64>,
    jac: DMatrix<f64>,
    cost: f64,
    m: usize,
    n: usize,
    iterations: usize,
    opts: &LmOptions,
) -> Result<LmFit, FitError> {
    let jtj = jac.transpose() * &jac;
    let cov = jtj
        .try_inverse()
        .ok_or(FitError::RankDeficient { condition: 0.0 })?;
    let cov = if opts.scale_cov_by_chi2 && m > n {
        let s2 = cost / (m - n) as f64;
        cov * s2
    } else {
        cov
    };
    Ok(LmFit {
        params: p,
        covariance: cov,
        chi2: cost,
        iterations,
    })
}

/// Linear least-squares fit of y = offset + b·cos φ + c·sin φ.
///
/// Returns (offset, amplitude, phase) with y ≈ offset + amplitude·cos(φ + phase).
pub fn sinusoid_fit(phis: &[f64], ys: &[f64]) -> Result<(f64, f64, f64), FitError> {
    if phis.len() != ys.len() || phis.len() < 3 {
        return Err(FitError::BadInput(
            "sinusoid fit needs ≥ 3 matched samples".into(),
        ));
    }
    let m = phis.len();
    let mut a = DMatrix::zeros(m, 3);
    for (i, &phi) in phis.iter().enumerate() {
        a[(i, 0)] = 1.0;
        a[(i, 1)] = phi.cos();
        a[(i, 2)] = phi.sin();
    }
    let y = DVector::from_column_slice(ys);
    let svd = a.svd(true, true);
    let sol = svd
        .solve(&y, 1e-12)
        .map_err(|e| FitError::DegenerateData(e.to_string()))?;
    let (offset, b, c) = (sol[0], sol[1], sol[2]);
    let amplitude = (b * b + c * c).sqrt();
    // offset + b cos + c sin = offset + A cos(φ + ψ) with b = A cos ψ, c = −A sin ψ.
    let phase = (-c).atan2(b);
    Ok((offset, amplitude, phase))
}

/// Ramsey fringe contrast: peak-to-peak of the fitted sinusoid.
pub fn fringe_contrast(phis: &[f64], ys: &[f64]) -> Result<f64, FitError> {
    let (_, amplitude, _) = sinusoid_fit(phis, ys)?;
    Ok(2.0 * amplitude)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn recovers_exponential_parameters() {
        // y = a · exp(−b t)
        let truth = [2.5, 1.3];
        let ts: Vec<f64> = (0..40).map(|i| i as f64 * 0.1).collect();
        let ys: Vec<f64> = ts.iter().map(|t| truth[0] * (-truth[1] * t).exp()).collect();
        let ts2 = ts.clone();
        let resid = move |p: &DVector<f64>| {
            DVector::from_iterator(
                ts.len(),
                ts.iter()
                    .zip(&ys)
                    .map(|(t, y)| p[0] * (-p[1] * t).exp() - y),
            )
        };
        let jac = move |p: &DVector<f64>| {
            let mut j = DMatrix::zeros(ts2.len(), 2);
            for (i, t) in ts2.iter().enumerate() {
                let e = (-p[1] * t).exp();
                j[(i, 0)] = e;
                j[(i, 1)] = -p[0] * t * e;
            }
            j
        };
        let fit = lm_fit(resid, Some(jac), &[1.0, 0.5], &LmOptions::default()).unwrap();
        assert_relative_eq!(fit.params[0], truth[0], max_relative = 1e-8);
        assert_relative_eq!(fit.params[1], truth[1], max_relative = 1e-8);
        assert!(fit.chi2 < 1e-18);
    }

    #[test]
    fn numeric_jacobian_path_converges() {
        let ys: Vec<f64> = (0..20).map(|i| 3.0 + 0.5 * i as f64).collect();
        let resid = move |p: &DVector<f64>| {
            DVector::from_iterator(20, (0..20).map(|i| p[0] + p[1] * i as f64 - ys[i]))
        };
        let fit = lm_fit(
            resid,
            None::<fn(&DVector<f64>) -> DMatrix<f64>>,
            &[0.0, 0.0],
            &LmOptions::default(),
        )
        .unwrap();
        assert_relative_eq!(fit.params[0], 3.0, max_relative = 1e-6);
        assert_relative_eq!(fit.params[1], 0.5, max_relative = 1e-6);
    }

    #[test]
    fn detects_rank_deficiency() {
        // Two parameters entering only through their sum.
        let resid = |p: &DVector<f64>| {
            DVector::from_iterator(5, (0..5).map(|i| p[0] + p[1] - i as f64))
        };
        let err = lm_fit(
            resid,
            None::<fn(&DVector<f64>) -> DMatrix<f64>>,
            &[0.0, 0.0],
            &LmOptions::default(),
        );
        assert!(matches!(err, Err(FitError::RankDeficient { .. })));
    }

    #[test]
    fn sinusoid_fit_exact() {
        let phis: Vec<f64> = (0..24).map(|i| i as f64 * 0.26).collect();
        let ys: Vec<f64> = phis.iter().map(|p| 0.5 + 0.45 * (p + 0.7).cos()).collect();
        let (offset, amp, phase) = sinusoid_fit(&phis, &ys).unwrap();
        assert_relative_eq!(offset, 0.5, max_relative = 1e-10);
        assert_relative_eq!(amp, 0.45, max_relative = 1e-10);
        assert_relative_eq!(phase, 0.7, max_relative = 1e-9);
    }
}
