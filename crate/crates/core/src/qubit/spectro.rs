//! Spectroscopy analysis: Lorentzian line fits, crosstalk bounds, and
//! cross-zone frequency correlation.

use nalgebra::{DMatrix, DVector};

use super::{QubitError, SpectroscopySeries};
use crate::fit::{lm_fit, LmOptions};

/// A measured value with a 1σ uncertainty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measured {
    pub value: f64,
    pub sigma: f64,
}

impl Measured {
    pub fn new(value: f64, sigma: f64) -> Self {
        Self { value, sigma }
    }
}

#[derive(Debug, Clone)]
pub struct LorentzianFit {
    pub center: f64,
    pub fwhm: f64,
    pub amplitude: f64,
    pub offset: f64,
    pub center_sigma: f64,
    pub fwhm_sigma: f64,
}

/// Fit P(δ) = offset + A·(Γ/2)² / ((δ − δ₀)² + (Γ/2)²).
///
/// Uncertainties come from the Jacobian at the solution scaled by the
/// reduced chi-square. `NoPeak` when the fitted amplitude is consistent with
/// zero (|A| < 2σ_A) or the center leaves the scanned range.
pub fn lorentzian_fit(detunings: &[f64], populations: &[f64]) -> Result<LorentzianFit, QubitError> {
    if detunings.len() != populations.len() || detunings.len() < 5 {
        return Err(QubitError::BadInput(
            "need ≥ 5 matched (detuning, population) samples".into(),
        ));
    }
    let lo = detunings.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = detunings.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    if !(span > 0.0) {
        return Err(QubitError::BadInput("degenerate detuning span".into()));
    }
    let y_min = populations.iter().cloned().fold(f64::INFINITY, f64::min);
    let (i_max, y_max) = populations
        .iter()
        .cloned()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();

    let xs = detunings.to_vec();
    let ys = populations.to_vec();
    let model = |p: &DVector<f64>, x: f64| -> f64 {
        let (center, fwhm, amp, offset) = (p[0], p[1], p[2], p[3]);
        let hw = fwhm / 2.0;
        offset + amp * hw * hw / ((x - center).powi(2) + hw * hw)
    };
    let residuals = {
        let xs = xs.clone();
        let ys = ys.clone();
        move |p: &DVector<f64>| -> DVector<f64> {
            DVector::from_iterator(
                xs.len(),
                xs.iter().zip(&ys).map(|(&x, &y)| model(p, x) - y),
            )
        }
    };
    let jacobian = {
        let xs = xs.clone();
        move |p: &DVector<f64>| -> DMatrix<f64> {
            let (center, fwhm, amp, _) = (p[0], p[1], p[2], p[3]);
            let hw = fwhm / 2.0;
            let mut jac = DMatrix::zeros(xs.len(), 4);
            for (i, &x) in xs.iter().enumerate() {
                let d = x - center;
                let denom = d * d + hw * hw;
                let shape = hw * hw / denom;
                jac[(i, 0)] = amp * shape / denom * 2.0 * d;
                jac[(i, 1)] = amp * d * d * hw / (denom * denom);
                jac[(i, 2)] = shape;
                jac[(i, 3)] = 1.0;
            }
            jac
        }
    };
    let opts = LmOptions {
        lower_bounds: Some(vec![f64::NEG_INFINITY, 1e-12, f64::NEG_INFINITY, f64::NEG_INFINITY]),
        scale_cov_by_chi2: true,
        ..LmOptions::default()
    };
    let start = [xs[i_max], span / 5.0, y_max - y_min, y_min];
    let fit = lm_fit(residuals, Some(jacobian), &start, &opts)?;
    let center = fit.params[0];
    let amplitude = fit.params[2];
    let center_sigma = fit.covariance[(0, 0)].max(0.0).sqrt();
    let fwhm_sigma = fit.covariance[(1, 1)].max(0.0).sqrt();
    let amp_sigma = fit.covariance[(2, 2)].max(0.0).sqrt();
    if amplitude.abs() < 2.0 * amp_sigma || center < lo || center > hi {
        return Err(QubitError::NoPeak);
    }
    Ok(LorentzianFit {
        center,
        fwhm: fit.params[1].abs(),
        amplitude,
        offset: fit.params[3],
        center_sigma,
        fwhm_sigma,
    })
}

/// Rabi-frequency crosstalk Ω_spectator/Ω_target with first-order
/// uncertainty propagation.
pub fn crosstalk_ratio(target: Measured, spectator: Measured) -> Result<Measured, QubitError> {
    if !(target.value > 0.0) {
        return Err(QubitError::BadInput(format!(
            "target Rabi frequency must be positive, got {:e}",
            target.value
        )));
    }
    let ratio = spectator.value / target.value;
    let sigma = if spectator.value == 0.0 {
        spectator.sigma / target.value
    } else {
        ratio.abs()
            * ((spectator.sigma / spectator.value).powi(2)
                + (target.sigma / target.value).powi(2))
            .sqrt()
    };
    Ok(Measured::new(ratio, sigma))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CorrelationReport {
    pub paired: usize,
    pub dropped_first: usize,
    pub dropped_second: usize,
}

/// Pearson correlation coefficient R = c₁₂/√(c₁₁c₂₂) between two
/// spectroscopy series after nearest-neighbor timestamp pairing.
///
/// Points without a partner within `window` seconds are dropped and counted
/// in the report.
pub fn correlation(
    s1: &SpectroscopySeries,
    s2: &SpectroscopySeries,
    window: f64,
) -> Result<(f64, CorrelationReport), QubitError> {
    if !(window > 0.0) {
        return Err(QubitError::BadInput("pairing window must be positive".into()));
    }
    let mut pairs: Vec<(f64, f64)> = Vec::new();
    let mut used2 = vec![false; s2.timestamps.len()];
    for (i, &t1) in s1.timestamps.iter().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        for (j, &t2) in s2.timestamps.iter().enumerate() {
            if used2[j] {
                continue;
            }
            let d = (t1 - t2).abs();
            if d <= window && best.map_or(true, |(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        if let Some((j, _)) = best {
            used2[j] = true;
            pairs.push((s1.centers[i], s2.centers[j]));
        }
    }
    let report = CorrelationReport {
        paired: pairs.len(),
        dropped_first: s1.timestamps.len() - pairs.len(),
        dropped_second: used2.iter().filter(|&&u| !u).count(),
    };
    if pairs.len() < 3 {
        return Err(QubitError::BadInput(format!(
            "only {} paired points, need ≥ 3",
            pairs.len()
        )));
    }
    let n = pairs.len() as f64;
    let m1 = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let m2 = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut c11, mut c22, mut c12) = (0.0, 0.0, 0.0);
    for (a, b) in &pairs {
        c11 += (a - m1) * (a - m1);
        c22 += (b - m2) * (b - m2);
        c12 += (a - m1) * (b - m2);
    }
    let scale1 = pairs.iter().map(|p| p.0.abs()).fold(0.0, f64::max).max(1e-300);
    let scale2 = pairs.iter().map(|p| p.1.abs()).fold(0.0, f64::max).max(1e-300);
    if c11 <= (1e-14 * scale1).powi(2) * n || c22 <= (1e-14 * scale2).powi(2) * n {
        return Err(QubitError::DegenerateVariance);
    }
    Ok(((c12 / (c11 * c22).sqrt()).clamp(-1.0, 1.0), report))
}

/// Frequency drift expressed as a magnetic-field change: ΔB = Δω / s with
/// the transition sensitivity s [rad/s per T] supplied by configuration.
pub fn drift_to_field(delta_omega: f64, sensitivity: f64) -> f64 {
    delta_omega / sensitivity
}

/// Field gradient from a field difference over a baseline separation.
pub fn field_gradient(field_difference: f64, separation: f64) -> f64 {
    field_difference / separation
}
