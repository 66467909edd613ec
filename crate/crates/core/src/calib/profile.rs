//! Frequency-profile prediction and window-field diagnostics.

use std::collections::BTreeMap;

use super::{CalibError, FrequencyProfile};
use crate::trap::{ElectrodeKind, TrapError, TrapLayout};

fn check_windows(
    layout: &TrapLayout,
    window_voltages: &BTreeMap<String, f64>,
) -> Result<(), CalibError> {
    for name in window_voltages.keys() {
        let e = layout
            .electrode(name)
            .ok_or_else(|| TrapError::UnknownElectrode(name.clone()))?;
        if e.kind() != ElectrodeKind::Window {
            return Err(CalibError::Trap(TrapError::NotAWindow(name.clone())));
        }
    }
    Ok(())
}

/// Spatially dependent trap frequency from the window curvatures:
/// ω(x) = sqrt(ω₀² + (q/m)·Σ V_j ∂²ₓφ_j(x)) evaluated on the trap axis.
pub fn predict_profile(
    layout: &TrapLayout,
    window_voltages: &BTreeMap<String, f64>,
    omega0: f64,
    positions: &[f64],
) -> Result<FrequencyProfile, CalibError> {
    if positions.is_empty() {
        return Err(CalibError::BadProfile("no positions".into()));
    }
    check_windows(layout, window_voltages)?;
    let q_over_m = layout.ion_charge() / layout.ion_mass();
    let mut frequencies = Vec::with_capacity(positions.len());
    let mut bad = Vec::new();
    for &x in positions {
        let p = layout.axis_point(x);
        let mut curvature = 0.0;
        for e in layout.electrodes() {
            if e.kind() == ElectrodeKind::Window {
                if let Some(&v) = window_voltages.get(e.name()) {
                    if v != 0.0 {
                        let (_, h) = e.derivatives(&p)?;
                        curvature += v * h[(0, 0)];
                    }
                }
            }
        }
        let w2 = omega0 * omega0 + q_over_m * curvature;
        if w2 <= 0.0 {
            bad.push(x);
            frequencies.push(f64::NAN);
        } else {
            frequencies.push(w2.sqrt());
        }
    }
    if !bad.is_empty() {
        return Err(CalibError::AntiTrapping {
            count: bad.len(),
            total: positions.len(),
            first: bad[0],
        });
    }
    FrequencyProfile::new(
        positions.to_vec(),
        frequencies,
        vec![0.0; positions.len()],
        omega0,
    )
}

/// Transverse (y) electric field at each zone marker generated by the window
/// sources alone [V/m]; the micromotion-compensation signal.
pub fn micromotion_offset(
    layout: &TrapLayout,
    window_voltages: &BTreeMap<String, f64>,
) -> Result<BTreeMap<String, f64>, CalibError> {
    check_windows(layout, window_voltages)?;
    let mut out = BTreeMap::new();
    for zone in layout.zones() {
        let p = layout.axis_point(zone.x);
        let mut grad_y = 0.0;
        for e in layout.electrodes() {
            if e.kind() == ElectrodeKind::Window {
                if let Some(&v) = window_voltages.get(e.name()) {
                    if v != 0.0 {
                        grad_y += v * e.gradient(&p)?.y;
                    }
                }
            }
        }
        out.insert(zone.id.clone(), -grad_y);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::desk;

    #[test]
    fn zero_voltages_give_flat_profile() {
        let layout = desk::default_layout();
        let omega0 = 2.0 * std::f64::consts::PI * 1.9e6;
        let xs: Vec<f64> = (-10..=10).map(|i| desk::zone1_x() + i as f64 * 1e-5).collect();
        let profile = predict_profile(&layout, &BTreeMap::new(), omega0, &xs).unwrap();
        for &f in &profile.frequencies {
            assert_eq!(f, omega0);
        }
    }

    #[test]
    fn rejects_unknown_and_non_window_electrodes() {
        let layout = desk::default_layout();
        let omega0 = 1e7;
        let mut v = BTreeMap::new();
        v.insert("nope".to_string(), -1.0);
        assert!(predict_profile(&layout, &v, omega0, &[0.0]).is_err());
        let mut v = BTreeMap::new();
        v.insert("dct1".to_string(), -1.0);
        assert!(predict_profile(&layout, &v, omega0, &[0.0]).is_err());
    }

    #[test]
    fn anti_trapping_is_reported() {
        let layout = desk::default_layout();
        // Deliberately absurd window charge at a soft well.
        let omega0 = 2.0 * std::f64::consts::PI * 2e5;
        let mut v = BTreeMap::new();
        for name in desk::window_names("z1") {
            v.insert(name, -30.0);
        }
        let xs: Vec<f64> = (-8..=8).map(|i| desk::zone1_x() + i as f64 * 1e-5).collect();
        match predict_profile(&layout, &v, omega0, &xs) {
            Err(CalibError::AntiTrapping { count, .. }) => assert!(count > 0),
            other => panic!("expected AntiTrapping, got {other:?}"),
        }
    }

    #[test]
    fn micromotion_field_zero_for_symmetric_windows_and_linear() {
        let layout = desk::default_layout();
        let [_, _, top, bottom] = desk::window_names("z1");
        let mut v = BTreeMap::new();
        v.insert(top.clone(), -1.5);
        v.insert(bottom.clone(), -1.5);
        let fields = micromotion_offset(&layout, &v).unwrap();
        assert!(fields["zone1"].abs() < 1e-9, "E_y = {:e}", fields["zone1"]);

        // Asymmetric: more negative top window pulls the ion toward +y, so
        // the window field at the axis points toward +y.
        let mut v = BTreeMap::new();
        v.insert(top.clone(), -2.03);
        v.insert(bottom.clone(), -1.20);
        let fields = micromotion_offset(&layout, &v).unwrap();
        assert!(fields["zone1"] > 0.0, "E_y = {:e}", fields["zone1"]);

        // Doubling the voltages doubles the field.
        let mut v2 = BTreeMap::new();
        v2.insert(top, -2.03 * 2.0);
        v2.insert(bottom, -1.20 * 2.0);
        let fields2 = micromotion_offset(&layout, &v2).unwrap();
        let ratio: f64 = fields2["zone1"] / fields["zone1"];
        assert!((ratio - 2.0).abs() < 1e-9);
    }
}
