//! Closed-loop window-voltage compensation.
//!
//! Each round positions the ion across the zone with the current estimate
//! compensated in the solver, measures the actual local frequency with a full
//! nonlinear well re-derivation against the hidden true voltages (not the
//! curvature shortcut), fits the residual profile, and updates the estimate
//! additively.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use super::{fit_window_voltages, CalibError, FrequencyProfile, WindowVoltageSet};
use crate::trap::{find_well, TrapLayout, WellOptions};
use crate::waveform::{solve_static, CurvatureGoal, HardwareLimits, SynthOptions, ZoneObjective};

/// Gaussian relative frequency noise applied to simulated measurements.
#[derive(Debug, Clone, Copy)]
pub struct NoiseModel {
    /// Relative standard deviation (e.g. 1e-3 for 0.1 %).
    pub sigma_rel: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct CalibrationRound {
    pub round: usize,
    /// Estimate after this round's additive update.
    pub estimate: WindowVoltageSet,
    /// Max |ω(x) − ω₀| of the profile measured with this round's estimate
    /// applied (i.e. after the update) [rad/s].
    pub residual: f64,
}

fn gaussian(rng: &mut ChaCha12Rng) -> f64 {
    // Box–Muller.
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Simulate a measured frequency profile.
///
/// For each commanded position the ion is positioned with `layout_model`
/// (the solver's view, including any compensation bias), and the actual well
/// is re-derived under `layout_truth` (the hidden charge state). Profile
/// positions are the found well positions; the frequency is the actual
/// axial frequency there.
pub fn simulate_measured_profile(
    layout_model: &TrapLayout,
    layout_truth: &TrapLayout,
    zone: &str,
    omega0: f64,
    positions: &[f64],
    limits: &HardwareLimits,
    noise: Option<(&NoiseModel, &mut ChaCha12Rng)>,
) -> Result<FrequencyProfile, CalibError> {
    let opts = SynthOptions {
        audit: false,
        ..SynthOptions::default()
    };
    let mut found = Vec::with_capacity(positions.len());
    for &x in positions {
        let objective = ZoneObjective {
            zone: zone.to_string(),
            well_position: Some(x),
            curvature: CurvatureGoal::Frequency(omega0),
            axial_field: 0.0,
            null_transverse_field: true,
        };
        let voltages = solve_static(layout_model, &[objective], limits, &opts)?;
        let well = find_well(layout_truth, &voltages, x, &WellOptions::default())?;
        found.push((well.position.x, well.axial_frequency));
    }
    found.sort_by(|a, b| a.0.total_cmp(&b.0));
    found.dedup_by(|b, a| b.0 - a.0 < 1e-12);

    let mut xs = Vec::with_capacity(found.len());
    let mut fs = Vec::with_capacity(found.len());
    let mut sigmas = Vec::with_capacity(found.len());
    let mut noise = noise;
    for (x, f) in found {
        let (f, s) = match noise.as_mut() {
            Some((model, rng)) => {
                let sigma = model.sigma_rel * omega0;
                (f + sigma * gaussian(rng), sigma)
            }
            None => (f, 0.0),
        };
        xs.push(x);
        fs.push(f);
        sigmas.push(s);
    }
    FrequencyProfile::new(xs, fs, sigmas, omega0)
}

/// Run the closed compensation loop against hidden true window voltages.
///
/// Per round: compensate with the current estimate, measure the profile,
/// fit the residual with the given ties, add the fitted correction, and
/// re-measure with the updated estimate to report the round residual. In
/// the noiseless case the residual must not grow two rounds in a row.
#[allow(clippy::too_many_arguments)]
pub fn iterate_compensation(
    layout: &TrapLayout,
    true_voltages: &BTreeMap<String, f64>,
    zone: &str,
    omega0: f64,
    positions: &[f64],
    windows: &[String],
    ties: &[Vec<String>],
    rounds: usize,
    limits: &HardwareLimits,
    noise: Option<NoiseModel>,
) -> Result<Vec<CalibrationRound>, CalibError> {
    if rounds == 0 {
        return Err(CalibError::BadProfile("need at least one round".into()));
    }
    let layout_truth = layout.with_window_bias(true_voltages)?;
    let mut rng = noise.map(|n| ChaCha12Rng::seed_from_u64(n.seed));
    let noise_model = noise;

    let mut estimate: BTreeMap<String, f64> =
        windows.iter().map(|n| (n.clone(), 0.0)).collect();
    let mut results: Vec<CalibrationRound> = Vec::with_capacity(rounds);
    let mut grew_streak = 0usize;

    for round in 1..=rounds {
        let layout_model = layout.with_window_bias(&estimate)?;
        // The physical system sees truth plus whatever bias the solver put on
        // the windows; the solver-applied bias is virtual (a model term), so
        // the measurement layout keeps only the true charges.
        let profile = simulate_measured_profile(
            &layout_model,
            &layout_truth,
            zone,
            omega0,
            positions,
            limits,
            match (&noise_model, rng.as_mut()) {
                (Some(m), Some(r)) => Some((m, r)),
                _ => None,
            },
        )?;
        let (correction, _cov) = fit_window_voltages(&profile, layout, windows, ties)?;
        for (name, dv) in &correction.voltages {
            *estimate.get_mut(name).expect("window name") += dv;
        }

        // Verification pass with the updated estimate.
        let layout_model = layout.with_window_bias(&estimate)?;
        let verify = simulate_measured_profile(
            &layout_model,
            &layout_truth,
            zone,
            omega0,
            positions,
            limits,
            match (&noise_model, rng.as_mut()) {
                (Some(m), Some(r)) => Some((m, r)),
                _ => None,
            },
        )?;
        let residual = verify.max_deviation();

        if noise_model.is_none() {
            if let Some(prev) = results.last() {
                if residual > prev.residual {
                    grew_streak += 1;
                    if grew_streak >= 2 {
                        return Err(CalibError::Diverged { round, residual });
                    }
                } else {
                    grew_streak = 0;
                }
            }
        }
        results.push(CalibrationRound {
            round,
            estimate: WindowVoltageSet {
                voltages: estimate.clone(),
                ties: ties.to_vec(),
            },
            residual,
        });
    }
    Ok(results)
}
