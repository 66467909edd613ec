//! Weighted nonlinear fit of effective window voltages to a frequency
//! profile.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::{CalibError, FrequencyProfile, WindowVoltageSet};
use crate::fit::{lm_fit, FitError, LmOptions};
use crate::trap::{ElectrodeKind, TrapLayout};

/// Fit parameter groups over the listed windows: each tie group shares one
/// voltage, remaining listed windows are free singletons.
fn parameter_groups(
    layout: &TrapLayout,
    windows: &[String],
    ties: &[Vec<String>],
) -> Result<Vec<Vec<String>>, CalibError> {
    let all = layout.window_names();
    for n in windows {
        if !all.iter().any(|w| w == n) {
            return Err(CalibError::BadProfile(format!(
                "`{n}` is not a window electrode of the layout"
            )));
        }
    }
    let listed = |n: &String| windows.iter().any(|w| w == n);
    let mut groups: Vec<Vec<String>> = Vec::new();
    let mut seen: Vec<&String> = Vec::new();
    for tie in ties {
        if tie.is_empty() {
            continue;
        }
        for name in tie {
            if !listed(name) {
                return Err(CalibError::BadProfile(format!(
                    "tie member `{name}` is not among the fitted windows"
                )));
            }
            if seen.iter().any(|s| *s == name) {
                return Err(CalibError::BadProfile(format!(
                    "window `{name}` appears in more than one tie group"
                )));
            }
            seen.push(name);
        }
        groups.push(tie.clone());
    }
    for w in windows {
        if !seen.iter().any(|s| *s == w) {
            groups.push(vec![w.clone()]);
        }
    }
    Ok(groups)
}

/// Weighted Levenberg–Marquardt fit of the listed window voltages to a
/// measured profile, with the analytic Jacobian
/// ∂ω/∂V_g = (q/m)·Σ_{j∈g}∂²ₓφ_j / (2ω).
///
/// Returns the fitted set (ties expanded to every member) and the parameter
/// covariance in tie-group order matching `WindowVoltageSet::ties`.
pub fn fit_window_voltages(
    profile: &FrequencyProfile,
    layout: &TrapLayout,
    windows: &[String],
    ties: &[Vec<String>],
) -> Result<(WindowVoltageSet, DMatrix<f64>), CalibError> {
    let groups = parameter_groups(layout, windows, ties)?;
    let n_par = groups.len();
    let m = profile.len();
    if m < n_par + 2 {
        return Err(CalibError::BadProfile(format!(
            "{m} samples cannot constrain {n_par} parameters (need ≥ {})",
            n_par + 2
        )));
    }

    // Curvature basis S[g][i] = Σ_{j∈g} ∂²ₓφ_j(x_i), fixed over the fit.
    let mut basis = DMatrix::zeros(m, n_par);
    for (i, &x) in profile.positions.iter().enumerate() {
        let p = layout.axis_point(x);
        for (g, group) in groups.iter().enumerate() {
            let mut s = 0.0;
            for name in group {
                let e = layout.electrode(name).expect("validated window");
                debug_assert_eq!(e.kind(), ElectrodeKind::Window);
                let (_, h) = e.derivatives(&p)?;
                s += h[(0, 0)];
            }
            basis[(i, g)] = s;
        }
    }

    let q_over_m = layout.ion_charge() / layout.ion_mass();
    let omega0 = profile.base_frequency;
    let weights: Vec<f64> = profile
        .frequency_errors
        .iter()
        .map(|&s| if s > 0.0 { 1.0 / s } else { 1.0 })
        .collect();
    let measured = profile.frequencies.clone();

    let model = {
        let basis = basis.clone();
        move |p: &DVector<f64>| -> DVector<f64> {
            let mut out = DVector::zeros(m);
            for i in 0..m {
                let mut c = 0.0;
                for g in 0..n_par {
                    c += p[g] * basis[(i, g)];
                }
                let w2 = omega0 * omega0 + q_over_m * c;
                out[i] = if w2 > 0.0 { w2.sqrt() } else { f64::NAN };
            }
            out
        }
    };
    let residuals = {
        let model = model.clone();
        let weights = weights.clone();
        let measured = measured.clone();
        move |p: &DVector<f64>| -> DVector<f64> {
            let mut r = model(p);
            for i in 0..m {
                r[i] = (r[i] - measured[i]) * weights[i];
            }
            r
        }
    };
    let jacobian = {
        let basis = basis.clone();
        let weights = weights.clone();
        move |p: &DVector<f64>| -> DMatrix<f64> {
            let w = model(p);
            let mut jac = DMatrix::zeros(m, n_par);
            for i in 0..m {
                let denom = 2.0 * w[i];
                for g in 0..n_par {
                    jac[(i, g)] = q_over_m * basis[(i, g)] / denom * weights[i];
                }
            }
            jac
        }
    };

    let fit = lm_fit(residuals, Some(jacobian), &vec![0.0; n_par], &LmOptions::default())
        .map_err(map_fit_err)?;

    let mut voltages = BTreeMap::new();
    for (g, group) in groups.iter().enumerate() {
        for name in group {
            voltages.insert(name.clone(), fit.params[g]);
        }
    }
    Ok((
        WindowVoltageSet {
            voltages,
            ties: groups,
        },
        fit.covariance,
    ))
}

fn map_fit_err(e: FitError) -> CalibError {
    CalibError::Fit(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calib::predict_profile;
    use crate::desk;

    fn omega0() -> f64 {
        2.0 * std::f64::consts::PI * 1.9e6
    }

    fn zone1_grid() -> Vec<f64> {
        (-20..=20).map(|i| desk::zone1_x() + i as f64 * 5e-6).collect()
    }

    #[test]
    fn flat_profile_fits_zero_voltages() {
        let layout = desk::default_layout();
        let xs = zone1_grid();
        let profile = FrequencyProfile::new(
            xs.clone(),
            vec![omega0(); xs.len()],
            vec![0.0; xs.len()],
            omega0(),
        )
        .unwrap();
        let windows = desk::window_names("z1");
        let tie = vec![windows[2].clone(), windows[3].clone()];
        let (set, _) =
            fit_window_voltages(&profile, &layout, &windows, &[tie]).unwrap();
        for (name, v) in &set.voltages {
            assert!(v.abs() < 1e-9, "{name}: {v:e}");
        }
    }

    #[test]
    fn noiseless_round_trip_recovers_planted_voltages() {
        let layout = desk::default_layout();
        let mut planted = BTreeMap::new();
        let [l1, r1, t1, b1] = desk::window_names("z1");
        planted.insert(l1.clone(), -2.21);
        planted.insert(r1.clone(), -2.14);
        planted.insert(t1.clone(), -2.12);
        planted.insert(b1.clone(), -2.12);
        let xs = zone1_grid();
        let profile = predict_profile(&layout, &planted, omega0(), &xs).unwrap();
        let windows = desk::window_names("z1");
        let (set, _) =
            fit_window_voltages(&profile, &layout, &windows, &[vec![t1.clone(), b1.clone()]])
                .unwrap();
        for (name, &truth) in &planted {
            let fitted = set.get(name);
            assert!(
                (fitted - truth).abs() / truth.abs() < 1e-6,
                "{name}: fitted {fitted} vs planted {truth}"
            );
        }
        assert_eq!(set.get(&t1), set.get(&b1));
    }

    #[test]
    fn untied_mirror_windows_are_rank_deficient() {
        // Top and bottom windows have identical axial curvature profiles on
        // the axis, so fitting them independently is degenerate.
        let layout = desk::default_layout();
        let mut planted = BTreeMap::new();
        for name in desk::window_names("z1") {
            planted.insert(name, -1.0);
        }
        let xs = zone1_grid();
        let profile = predict_profile(&layout, &planted, omega0(), &xs).unwrap();
        match fit_window_voltages(&profile, &layout, &desk::window_names("z1"), &[]) {
            Err(CalibError::Fit(FitError::RankDeficient { .. })) => {}
            other => panic!("expected RankDeficient, got {other:?}"),
        }
    }
}
