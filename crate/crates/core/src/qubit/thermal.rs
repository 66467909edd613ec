//! Thermal carrier Rabi decay and mean-occupation fitting.
//!
//! For a thermal motional state with mean occupation n̄ the carrier
//! oscillation is P(↓)(t) = 1 − Σ_n P_n̄(n) sin²(Ω_n t/2), with the geometric
//! weights P_n̄(n) = n̄ⁿ/(n̄+1)^{n+1} and the Debye–Waller-shifted Rabi rates
//! Ω_n = Ω(1 − η²/2·(2n+1)).

use nalgebra::{DMatrix, DVector};

use super::QubitError;
use crate::fit::{lm_fit, LmOptions};

/// Acceptable geometric tail weight beyond the truncation.
const TAIL_LIMIT: f64 = 1e-8;

#[derive(Debug, Clone, Copy)]
pub struct ThermalParams {
    /// Bare carrier Rabi frequency [rad/s].
    pub omega: f64,
    /// Lamb–Dicke parameter.
    pub eta: f64,
    /// Mean motional occupation.
    pub nbar: f64,
    /// Fock-state truncation of the thermal sum.
    pub n_cut: usize,
}

impl ThermalParams {
    pub fn new(omega: f64, eta: f64, nbar: f64) -> Result<Self, QubitError> {
        if !(omega > 0.0) || !(eta > 0.0 && eta < 1.0) || !(nbar >= 0.0) {
            return Err(QubitError::BadInput(format!(
                "need Ω > 0, 0 < η < 1, n̄ ≥ 0 (got Ω = {omega:e}, η = {eta}, n̄ = {nbar})"
            )));
        }
        Ok(Self {
            omega,
            eta,
            nbar,
            n_cut: default_cutoff(nbar),
        })
    }

    pub fn with_cutoff(mut self, n_cut: usize) -> Self {
        self.n_cut = n_cut;
        self
    }

    /// Geometric tail weight Σ_{n > n_cut} P_n̄(n) = (n̄/(n̄+1))^{n_cut+1}.
    pub fn tail_weight(&self) -> f64 {
        if self.nbar == 0.0 {
            return 0.0;
        }
        let r = self.nbar / (self.nbar + 1.0);
        r.powi(self.n_cut as i32 + 1)
    }
}

/// Truncation with a comfortable margin: the larger of the heuristic
/// n̄(1 + 12/√n̄) and the bound putting the geometric tail below 1e-12.
pub fn default_cutoff(nbar: f64) -> usize {
    let heuristic = if nbar > 0.0 {
        (nbar * (1.0 + 12.0 / nbar.sqrt())).ceil() as usize
    } else {
        0
    };
    let tail_bound = if nbar > 0.0 {
        let r = nbar / (nbar + 1.0);
        ((-12.0 * std::f64::consts::LN_10) / r.ln()).ceil() as usize
    } else {
        0
    };
    heuristic.max(tail_bound).max(20)
}

/// Thermal carrier population P(↓) at pulse time `t`.
pub fn thermal_carrier(params: &ThermalParams, t: f64) -> Result<f64, QubitError> {
    let tail = params.tail_weight();
    if tail >= TAIL_LIMIT {
        return Err(QubitError::TruncationTooSmall {
            tail,
            limit: TAIL_LIMIT,
        });
    }
    let ratio = params.nbar / (params.nbar + 1.0);
    let mut weight = 1.0 / (params.nbar + 1.0);
    let mut excited = 0.0;
    for n in 0..=params.n_cut {
        let omega_n = params.omega * (1.0 - params.eta * params.eta / 2.0 * (2.0 * n as f64 + 1.0));
        let s = (omega_n * t / 2.0).sin();
        excited += weight * s * s;
        weight *= ratio;
        if weight < 1e-18 {
            break;
        }
    }
    Ok((1.0 - excited).clamp(0.0, 1.0))
}

#[derive(Debug, Clone)]
pub struct NbarFit {
    pub nbar: f64,
    pub omega: f64,
    /// 2×2 covariance over (n̄, Ω), scaled by the reduced chi-square.
    pub covariance: DMatrix<f64>,
}

/// Fit (n̄, Ω) to a measured carrier Rabi decay at known Lamb–Dicke
/// parameter.
pub fn fit_nbar(
    times: &[f64],
    populations: &[f64],
    eta: f64,
    omega_guess: f64,
) -> Result<NbarFit, QubitError> {
    if times.len() != populations.len() {
        return Err(QubitError::BadInput("mismatched data lengths".into()));
    }
    if times.len() < 10 {
        return Err(QubitError::BadInput("need at least 10 samples".into()));
    }
    if !(omega_guess > 0.0) {
        return Err(QubitError::BadInput("Ω guess must be positive".into()));
    }
    let span = times.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - times.iter().cloned().fold(f64::INFINITY, f64::min);
    let period = 2.0 * std::f64::consts::PI / omega_guess;
    if span < 3.0 * period {
        return Err(QubitError::BadInput(format!(
            "data spans {span:.3e} s, need ≥ 3 Rabi periods ({:.3e} s)",
            3.0 * period
        )));
    }
    let mean = populations.iter().sum::<f64>() / populations.len() as f64;
    let var = populations
        .iter()
        .map(|p| (p - mean) * (p - mean))
        .sum::<f64>()
        / populations.len() as f64;
    if var < 1e-6 {
        return Err(QubitError::Fit(crate::fit::FitError::DegenerateData(
            "population signal is flat".into(),
        )));
    }

    let times_v = times.to_vec();
    let pops_v = populations.to_vec();
    let model_at = move |nbar: f64, omega: f64, t: f64| -> f64 {
        let params = ThermalParams {
            omega,
            eta,
            nbar,
            n_cut: default_cutoff(nbar),
        };
        thermal_carrier(&params, t).unwrap_or(f64::NAN)
    };
    let residuals = {
        let times = times_v.clone();
        let pops = pops_v.clone();
        move |p: &DVector<f64>| -> DVector<f64> {
            DVector::from_iterator(
                times.len(),
                times
                    .iter()
                    .zip(&pops)
                    .map(|(&t, &y)| model_at(p[0].max(0.0), p[1], t) - y),
            )
        }
    };
    let jacobian = {
        let times = times_v.clone();
        move |p: &DVector<f64>| -> DMatrix<f64> {
            let (nbar, omega) = (p[0].max(1e-12), p[1]);
            let n_cut = default_cutoff(nbar);
            let ratio = nbar / (nbar + 1.0);
            let mut jac = DMatrix::zeros(times.len(), 2);
            for (i, &t) in times.iter().enumerate() {
                let mut weight = 1.0 / (nbar + 1.0);
                let (mut d_nbar, mut d_omega) = (0.0, 0.0);
                for n in 0..=n_cut {
                    let shape = 1.0 - eta * eta / 2.0 * (2.0 * n as f64 + 1.0);
                    let omega_n = omega * shape;
                    let s = (omega_n * t / 2.0).sin();
                    let dw_dnbar = weight * (n as f64 / nbar - (n as f64 + 1.0) / (nbar + 1.0));
                    d_nbar -= dw_dnbar * s * s;
                    d_omega -= weight * s * (omega_n * t / 2.0).cos() * t * shape;
                    weight *= ratio;
                    if weight < 1e-18 {
                        break;
                    }
                }
                jac[(i, 0)] = d_nbar;
                jac[(i, 1)] = d_omega;
            }
            jac
        }
    };
    let opts = LmOptions {
        lower_bounds: Some(vec![0.0, omega_guess * 0.2]),
        upper_bounds: Some(vec![f64::INFINITY, omega_guess * 5.0]),
        scale_cov_by_chi2: true,
        ..LmOptions::default()
    };
    // Seed n̄ from the late-time contrast loss so large-n̄ data converges.
    let fit = lm_fit(residuals, Some(jacobian), &[5.0, omega_guess], &opts)?;
    Ok(NbarFit {
        nbar: fit.params[0],
        omega: fit.params[1],
        covariance: fit.covariance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn omega() -> f64 {
        2.0 * std::f64::consts::PI * 123.2e3
    }

    #[test]
    fn starts_at_one_for_any_parameters() {
        for nbar in [0.0, 1.0, 50.0] {
            let p = ThermalParams::new(omega(), 0.1, nbar).unwrap();
            assert_eq!(thermal_carrier(&p, 0.0).unwrap(), 1.0);
        }
    }

    #[test]
    fn ground_state_is_a_pure_sinusoid() {
        let p = ThermalParams::new(omega(), 0.1, 0.0).unwrap();
        let shape = 1.0 - 0.1f64.powi(2) / 2.0;
        for i in 0..40 {
            let t = i as f64 * 0.3e-6;
            let expect = 1.0 - (omega() * shape * t / 2.0).sin().powi(2);
            assert_relative_eq!(thermal_carrier(&p, t).unwrap(), expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn truncation_error_is_reported() {
        let p = ThermalParams::new(omega(), 0.1, 50.0).unwrap().with_cutoff(100);
        match thermal_carrier(&p, 1e-6) {
            Err(QubitError::TruncationTooSmall { tail, .. }) => assert!(tail >= 1e-8),
            other => panic!("expected TruncationTooSmall, got {other:?}"),
        }
    }

    #[test]
    fn default_cutoff_converges_to_ten_times_larger() {
        let p = ThermalParams::new(omega(), 0.1, 50.0).unwrap();
        let p10 = p.with_cutoff(p.n_cut * 10);
        let mut decayed = false;
        for i in 0..=100 {
            // Out to ten π-times of the bare carrier.
            let t = i as f64 / 100.0 * 10.0 * std::f64::consts::PI / omega();
            let a = thermal_carrier(&p, t).unwrap();
            let b = thermal_carrier(&p10, t).unwrap();
            assert!((a - b).abs() < 1e-10, "t = {t:e}: {a} vs {b}");
            if t > 8.0 * std::f64::consts::PI / omega() && (a - 0.5).abs() < 0.35 {
                decayed = true;
            }
        }
        assert!(decayed, "no visible contrast decay by ten π-times");
    }

    #[test]
    fn contrast_loss_is_monotone_in_nbar() {
        // Envelope proxy: P(↓) at a fixed quarter-revival time decreases
        // toward 1/2 as n̄ grows.
        let eta = 0.1;
        let t = 6.0 * std::f64::consts::PI / omega();
        let mut last = f64::INFINITY;
        for nbar in [0.0, 2.0, 10.0, 30.0, 80.0] {
            let p = ThermalParams::new(omega(), eta, nbar).unwrap();
            let contrast = (thermal_carrier(&p, t).unwrap() - 0.5).abs();
            assert!(contrast <= last + 1e-12, "n̄ = {nbar}");
            last = contrast;
        }
    }

    #[test]
    fn fit_recovers_planted_parameters() {
        let truth = ThermalParams::new(omega(), 0.1, 50.0).unwrap();
        let times: Vec<f64> = (0..120)
            .map(|i| i as f64 * 0.35 * std::f64::consts::PI / omega())
            .collect();
        let pops: Vec<f64> = times
            .iter()
            .map(|&t| thermal_carrier(&truth, t).unwrap())
            .collect();
        let fit = fit_nbar(&times, &pops, 0.1, omega() * 1.05).unwrap();
        assert!(
            (fit.nbar - 50.0).abs() / 50.0 < 0.01,
            "n̄ = {}",
            fit.nbar
        );
        assert!(
            (fit.omega - omega()).abs() / omega() < 1e-3,
            "Ω = {}",
            fit.omega
        );
    }

    #[test]
    fn fit_identifies_ground_state_data() {
        let truth = ThermalParams::new(omega(), 0.1, 0.0).unwrap();
        let times: Vec<f64> = (0..60)
            .map(|i| i as f64 * 0.35 * std::f64::consts::PI / omega())
            .collect();
        let pops: Vec<f64> = times
            .iter()
            .map(|&t| thermal_carrier(&truth, t).unwrap())
            .collect();
        let fit = fit_nbar(&times, &pops, 0.1, omega()).unwrap();
        assert!(fit.nbar < 0.05, "n̄ = {}", fit.nbar);
    }

    #[test]
    fn fit_rejects_flat_data() {
        let times: Vec<f64> = (0..30).map(|i| i as f64 * 1e-6).collect();
        let pops = vec![1.0; 30];
        assert!(matches!(
            fit_nbar(&times, &pops, 0.1, omega()),
            Err(QubitError::Fit(_))
        ));
    }
}
