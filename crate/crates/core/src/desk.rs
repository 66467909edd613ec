//! Shipped desk-scale trap layouts.
//!
//! `default_layout` is the two-zone segmented trap every higher-level demo
//! and test runs on: ten DC electrodes per side at 110 µm pitch, two zones
//! 375 µm apart, four dielectric-window electrodes per zone (narrow left and
//! right couplers on the axis plus a top and a bottom window), and two long
//! RF rails. All dimensions are frozen here so downstream numbers are stable.

use crate::constants::{CA40_MASS, ELEMENTARY_CHARGE};
use crate::trap::{Electrode, ElectrodeKind, RectPatch, TrapLayout, Zone};

pub const ION_HEIGHT: f64 = 50e-6;
pub const ZONE_SEPARATION: f64 = 375e-6;
pub const DC_PITCH: f64 = 110e-6;
pub const DC_PER_SIDE: usize = 10;

/// Radial pseudopotential mode frequencies (ω_y, ω_z) [rad/s]. The z mode
/// carries most of the Laplace defocusing of the axial confinement, so both
/// sit well above the axial working point.
pub const PSEUDO_CURVATURES: [f64; 2] = [
    2.0 * std::f64::consts::PI * 3.8e6,
    2.0 * std::f64::consts::PI * 3.6e6,
];

/// Extent standing in for semi-infinite conductors [m].
pub const SEMI_INFINITE: f64 = 0.5;

const DC_ROW_Y0: f64 = 48e-6;
const DC_ROW_Y1: f64 = 158e-6;
const RAIL_Y0: f64 = 10e-6;
const RAIL_Y1: f64 = 24e-6;

// Narrow axial coupler windows: 16 µm squares astride the axis.
const WIN_AXIAL_HALF: f64 = 8e-6;
const WIN_AXIAL_NEAR: f64 = 16e-6;
const WIN_AXIAL_FAR: f64 = 32e-6;
// Broad windows above / below the axis.
const WIN_BROAD_HALFX: f64 = 20e-6;
const WIN_BROAD_Y0: f64 = 26e-6;
const WIN_BROAD_Y1: f64 = 46e-6;

pub fn zone1_x() -> f64 {
    -ZONE_SEPARATION / 2.0
}

pub fn zone2_x() -> f64 {
    ZONE_SEPARATION / 2.0
}

/// Names of the four windows of a zone, in (left, right, top, bottom) order.
pub fn window_names(zone: &str) -> [String; 4] {
    [
        format!("{zone}_wl"),
        format!("{zone}_wr"),
        format!("{zone}_wt"),
        format!("{zone}_wb"),
    ]
}

fn zone_windows(zone: &str, xc: f64) -> Vec<Electrode> {
    let [wl, wr, wt, wb] = window_names(zone);
    vec![
        Electrode::new(
            wl,
            ElectrodeKind::Window,
            vec![RectPatch::new(
                xc - WIN_AXIAL_FAR,
                xc - WIN_AXIAL_NEAR,
                -WIN_AXIAL_HALF,
                WIN_AXIAL_HALF,
            )
            .unwrap()],
        )
        .unwrap(),
        Electrode::new(
            wr,
            ElectrodeKind::Window,
            vec![RectPatch::new(
                xc + WIN_AXIAL_NEAR,
                xc + WIN_AXIAL_FAR,
                -WIN_AXIAL_HALF,
                WIN_AXIAL_HALF,
            )
            .unwrap()],
        )
        .unwrap(),
        Electrode::new(
            wt,
            ElectrodeKind::Window,
            vec![
                RectPatch::new(xc - WIN_BROAD_HALFX, xc + WIN_BROAD_HALFX, WIN_BROAD_Y0, WIN_BROAD_Y1)
                    .unwrap(),
            ],
        )
        .unwrap(),
        Electrode::new(
            wb,
            ElectrodeKind::Window,
            vec![
                RectPatch::new(xc - WIN_BROAD_HALFX, xc + WIN_BROAD_HALFX, -WIN_BROAD_Y1, -WIN_BROAD_Y0)
                    .unwrap(),
            ],
        )
        .unwrap(),
    ]
}

/// The default desk-scale two-zone layout.
pub fn default_layout() -> TrapLayout {
    let mut electrodes = Vec::new();
    let span = DC_PITCH * DC_PER_SIDE as f64;
    let x0 = -span / 2.0;
    for i in 0..DC_PER_SIDE {
        // Edges evaluated on the shared grid formula so neighbors touch exactly.
        let xa = x0 + DC_PITCH * i as f64;
        let xb = x0 + DC_PITCH * (i + 1) as f64;
        electrodes.push(
            Electrode::new(
                format!("dct{}", i + 1),
                ElectrodeKind::Dc,
                vec![RectPatch::new(xa, xb, DC_ROW_Y0, DC_ROW_Y1).unwrap()],
            )
            .unwrap(),
        );
        electrodes.push(
            Electrode::new(
                format!("dcb{}", i + 1),
                ElectrodeKind::Dc,
                vec![RectPatch::new(xa, xb, -DC_ROW_Y1, -DC_ROW_Y0).unwrap()],
            )
            .unwrap(),
        );
    }
    electrodes.extend(zone_windows("z1", zone1_x()));
    electrodes.extend(zone_windows("z2", zone2_x()));
    electrodes.push(
        Electrode::new(
            "rf_top",
            ElectrodeKind::RfRail,
            vec![RectPatch::new(-SEMI_INFINITE, SEMI_INFINITE, RAIL_Y0, RAIL_Y1).unwrap()],
        )
        .unwrap(),
    );
    electrodes.push(
        Electrode::new(
            "rf_bottom",
            ElectrodeKind::RfRail,
            vec![RectPatch::new(-SEMI_INFINITE, SEMI_INFINITE, -RAIL_Y1, -RAIL_Y0).unwrap()],
        )
        .unwrap(),
    );

    TrapLayout::new(
        electrodes,
        ION_HEIGHT,
        CA40_MASS,
        ELEMENTARY_CHARGE,
        PSEUDO_CURVATURES,
        vec![
            Zone {
                id: "zone1".into(),
                x: zone1_x(),
            },
            Zone {
                id: "zone2".into(),
                x: zone2_x(),
            },
        ],
    )
    .unwrap()
}

/// Minimal five-electrode demo layout: a single row of pads straddling the
/// axis, used for integrator and well-finder checks.
pub fn five_electrode_layout() -> TrapLayout {
    let width = 100e-6;
    let mut electrodes = Vec::new();
    for i in 0..5 {
        let xc = (i as f64 - 2.0) * width;
        electrodes.push(
            Electrode::new(
                format!("e{}", i + 1),
                ElectrodeKind::Dc,
                vec![RectPatch::centered(xc, 0.0, width, 200e-6).unwrap()],
            )
            .unwrap(),
        );
    }
    // Pads sit directly under the axis, so volt-scale patterns pull hard on
    // the vertical equilibrium; this demo needs stiff radial confinement.
    TrapLayout::new(
        electrodes,
        ION_HEIGHT,
        CA40_MASS,
        ELEMENTARY_CHARGE,
        [
            2.0 * std::f64::consts::PI * 8.0e6,
            2.0 * std::f64::consts::PI * 7.5e6,
        ],
        vec![Zone {
            id: "center".into(),
            x: 0.0,
        }],
    )
    .unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_layout_is_valid_and_symmetric() {
        let layout = default_layout();
        assert_eq!(layout.dc_count(), 2 * DC_PER_SIDE);
        assert_eq!(layout.window_names().len(), 8);
        let (lo, hi) = layout.axial_span();
        assert_eq!(lo, -hi);
        assert_eq!(layout.zone("zone1").unwrap().x, -187.5e-6);
        assert_eq!(layout.zone("zone2").unwrap().x, 187.5e-6);
    }

    #[test]
    fn five_electrode_center_is_symmetric() {
        let layout = five_electrode_layout();
        assert_eq!(layout.dc_count(), 5);
        let p = layout.axis_point(0.0);
        let v = [1.0, 1.0, -1.0, 1.0, 1.0];
        let g = layout.dc_gradient(&v, &p).unwrap();
        assert!(g.x.abs() < 1e-9, "gx = {:e}", g.x);
        assert!(g.y.abs() < 1e-9, "gy = {:e}", g.y);
    }
}
