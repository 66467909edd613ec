//! Analytic electrostatics of a gapless segmented surface trap.
//!
//! The electrode plane at z = 0 is fully covered by conductors; every named
//! electrode is a set of rectangular patches held at a common voltage and the
//! rest of the plane is ground. The RF drive is replaced by a static
//! pseudopotential, a diagonal quadratic in (y, z) configured by two radial
//! mode frequencies.

mod basis;
mod patch;
mod well;

pub use basis::{electrode_basis, BasisSample, ElectrodeBasis};
pub use patch::RectPatch;
pub(crate) use well::newton_axial;
pub use well::{find_well, PotentialWell, WellOptions};

use std::collections::BTreeMap;

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrapError {
    #[error("field point must lie above the electrode plane (z > 0), got z = {z:.3e} m")]
    PointBelowPlane { z: f64 },
    #[error("invalid patch extents [{x_min:?}, {x_max:?}] x [{y_min:?}, {y_max:?}]")]
    BadPatch {
        x_min: f64,
        x_max: f64,
        y_min: f64,
        y_max: f64,
    },
    #[error("electrode `{0}` has an empty patch list")]
    EmptyElectrode(String),
    #[error("patches of electrode `{name}` overlap with area {area:.3e} m²")]
    OverlappingPatches { name: String, area: f64 },
    #[error("electrodes `{a}` and `{b}` overlap with area {area:.3e} m²")]
    OverlappingElectrodes { a: String, b: String, area: f64 },
    #[error("duplicate electrode name `{0}`")]
    DuplicateName(String),
    #[error("unknown electrode `{0}`")]
    UnknownElectrode(String),
    #[error("electrode `{0}` is not a window")]
    NotAWindow(String),
    #[error("ion height must be positive, got {0:.3e} m")]
    BadIonHeight(f64),
    #[error("zone positions must be strictly increasing")]
    ZoneOrder,
    #[error("unknown zone `{0}`")]
    UnknownZone(String),
    #[error("electrode basis needs at least one point")]
    NoPoints,
    #[error("voltage vector has {got} entries but the layout has {expected} DC electrodes")]
    VoltageLength { got: usize, expected: usize },
    #[error("initial guess {guess:.4e} m lies outside the axial span [{lo:.4e}, {hi:.4e}] m")]
    GuessOutOfSpan { guess: f64, lo: f64, hi: f64 },
    #[error("no potential well found near x = {last_x:.6e} m: {reason}")]
    NoWellFound { last_x: f64, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElectrodeKind {
    Dc,
    Window,
    RfRail,
}

/// A named electrode: one or more non-overlapping rectangular patches held at
/// a common voltage.
#[derive(Debug, Clone)]
pub struct Electrode {
    name: String,
    kind: ElectrodeKind,
    patches: Vec<RectPatch>,
}

impl Electrode {
    pub fn new(
        name: impl Into<String>,
        kind: ElectrodeKind,
        patches: Vec<RectPatch>,
    ) -> Result<Self, TrapError> {
        let name = name.into();
        if patches.is_empty() {
            return Err(TrapError::EmptyElectrode(name));
        }
        for i in 0..patches.len() {
            for j in (i + 1)..patches.len() {
                let area = patches[i].intersection_area(&patches[j]);
                if area > 0.0 {
                    return Err(TrapError::OverlappingPatches { name, area });
                }
            }
        }
        Ok(Self {
            name,
            kind,
            patches,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> ElectrodeKind {
        self.kind
    }

    pub fn patches(&self) -> &[RectPatch] {
        &self.patches
    }

    /// Unit potential of the whole electrode at `point`.
    pub fn potential(&self, point: &Vector3<f64>) -> Result<f64, TrapError> {
        let mut acc = 0.0;
        for p in &self.patches {
            acc += p.potential(point)?;
        }
        Ok(acc)
    }

    /// Gradient of the unit potential at `point`.
    pub fn gradient(&self, point: &Vector3<f64>) -> Result<Vector3<f64>, TrapError> {
        let mut grad = Vector3::zeros();
        for p in &self.patches {
            grad += p.gradient(point)?;
        }
        Ok(grad)
    }

    /// Gradient and Hessian of the unit potential at `point`.
    pub fn derivatives(&self, point: &Vector3<f64>) -> Result<(Vector3<f64>, Matrix3<f64>), TrapError> {
        let mut grad = Vector3::zeros();
        let mut hess = Matrix3::zeros();
        for p in &self.patches {
            let (g, h) = p.derivatives(point)?;
            grad += g;
            hess += h;
        }
        Ok((grad, hess))
    }
}

/// Named axial position that experiments address.
#[derive(Debug, Clone, PartialEq)]
pub struct Zone {
    pub id: String,
    pub x: f64,
}

/// Geometric and physical ground truth of the trap.
///
/// Immutable after construction: compensation produces a modified copy via
/// [`TrapLayout::with_window_bias`].
#[derive(Debug, Clone)]
pub struct TrapLayout {
    electrodes: Vec<Electrode>,
    ion_height: f64,
    ion_mass: f64,
    ion_charge: f64,
    /// Radial mode angular frequencies (ω_y, ω_z) of the static
    /// pseudopotential stand-in [rad/s].
    pseudo_curvatures: [f64; 2],
    zones: Vec<Zone>,
    /// Fixed voltages on window electrodes [V]; empty when uncompensated.
    window_bias: BTreeMap<String, f64>,
}

impl TrapLayout {
    pub fn new(
        electrodes: Vec<Electrode>,
        ion_height: f64,
        ion_mass: f64,
        ion_charge: f64,
        pseudo_curvatures: [f64; 2],
        zones: Vec<Zone>,
    ) -> Result<Self, TrapError> {
        if !(ion_height > 0.0) {
            return Err(TrapError::BadIonHeight(ion_height));
        }
        for i in 0..electrodes.len() {
            for j in (i + 1)..electrodes.len() {
                if electrodes[i].name == electrodes[j].name {
                    return Err(TrapError::DuplicateName(electrodes[i].name.clone()));
                }
                for pa in &electrodes[i].patches {
                    for pb in &electrodes[j].patches {
                        let area = pa.intersection_area(pb);
                        if area > 0.0 {
                            return Err(TrapError::OverlappingElectrodes {
                                a: electrodes[i].name.clone(),
                                b: electrodes[j].name.clone(),
                                area,
                            });
                        }
                    }
                }
            }
        }
        if zones.windows(2).any(|w| w[0].x >= w[1].x) {
            return Err(TrapError::ZoneOrder);
        }
        Ok(Self {
            electrodes,
            ion_height,
            ion_mass,
            ion_charge,
            pseudo_curvatures,
            zones,
            window_bias: BTreeMap::new(),
        })
    }

    pub fn electrodes(&self) -> &[Electrode] {
        &self.electrodes
    }

    pub fn electrode(&self, name: &str) -> Option<&Electrode> {
        self.electrodes.iter().find(|e| e.name == name)
    }

    pub fn ion_height(&self) -> f64 {
        self.ion_height
    }

    pub fn ion_mass(&self) -> f64 {
        self.ion_mass
    }

    pub fn ion_charge(&self) -> f64 {
        self.ion_charge
    }

    pub fn pseudo_curvatures(&self) -> [f64; 2] {
        self.pseudo_curvatures
    }

    pub fn zones(&self) -> &[Zone] {
        &self.zones
    }

    pub fn zone(&self, id: &str) -> Result<&Zone, TrapError> {
        self.zones
            .iter()
            .find(|z| z.id == id)
            .ok_or_else(|| TrapError::UnknownZone(id.to_string()))
    }

    /// Electrodes the voltage solver controls, in layout order.
    pub fn dc_electrodes(&self) -> impl Iterator<Item = &Electrode> {
        self.electrodes
            .iter()
            .filter(|e| e.kind == ElectrodeKind::Dc)
    }

    pub fn dc_count(&self) -> usize {
        self.dc_electrodes().count()
    }

    pub fn dc_names(&self) -> Vec<String> {
        self.dc_electrodes().map(|e| e.name.clone()).collect()
    }

    pub fn window_names(&self) -> Vec<String> {
        self.electrodes
            .iter()
            .filter(|e| e.kind == ElectrodeKind::Window)
            .map(|e| e.name.clone())
            .collect()
    }

    pub fn window_bias(&self) -> &BTreeMap<String, f64> {
        &self.window_bias
    }

    /// Copy of the layout with the given fixed window voltages applied.
    ///
    /// Subsequent synthesis treats these electrodes as voltage sources and
    /// subtracts their field and curvature from the objectives; simulation
    /// adds their potential to the total.
    pub fn with_window_bias(&self, bias: &BTreeMap<String, f64>) -> Result<Self, TrapError> {
        for name in bias.keys() {
            let e = self
                .electrode(name)
                .ok_or_else(|| TrapError::UnknownElectrode(name.clone()))?;
            if e.kind != ElectrodeKind::Window {
                return Err(TrapError::NotAWindow(name.clone()));
            }
        }
        let mut out = self.clone();
        out.window_bias = bias.clone();
        Ok(out)
    }

    /// Axial extent covered by the DC electrodes.
    pub fn axial_span(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for e in self.dc_electrodes() {
            for p in &e.patches {
                lo = lo.min(p.x_min);
                hi = hi.max(p.x_max);
            }
        }
        (lo, hi)
    }

    /// Nominal ion position on the trap axis at axial coordinate `x`.
    pub fn axis_point(&self, x: f64) -> Vector3<f64> {
        Vector3::new(x, 0.0, self.ion_height)
    }

    fn check_dc_len(&self, dc_voltages: &[f64]) -> Result<(), TrapError> {
        let expected = self.dc_count();
        if dc_voltages.len() != expected {
            return Err(TrapError::VoltageLength {
                got: dc_voltages.len(),
                expected,
            });
        }
        Ok(())
    }

    /// Pseudopotential expressed as an electric potential [V].
    pub fn pseudo_potential(&self, point: &Vector3<f64>) -> f64 {
        let [wy, wz] = self.pseudo_curvatures;
        let dy = point.y;
        let dz = point.z - self.ion_height;
        0.5 * self.ion_mass / self.ion_charge * (wy * wy * dy * dy + wz * wz * dz * dz)
    }

    pub fn pseudo_gradient(&self, point: &Vector3<f64>) -> Vector3<f64> {
        let [wy, wz] = self.pseudo_curvatures;
        let k = self.ion_mass / self.ion_charge;
        Vector3::new(
            0.0,
            k * wy * wy * point.y,
            k * wz * wz * (point.z - self.ion_height),
        )
    }

    pub fn pseudo_hessian(&self) -> Matrix3<f64> {
        let [wy, wz] = self.pseudo_curvatures;
        let k = self.ion_mass / self.ion_charge;
        Matrix3::from_diagonal(&Vector3::new(0.0, k * wy * wy, k * wz * wz))
    }

    /// Electrical potential [V]: DC electrodes at `dc_voltages` plus any fixed
    /// window bias. Excludes the pseudopotential.
    pub fn dc_potential(&self, dc_voltages: &[f64], point: &Vector3<f64>) -> Result<f64, TrapError> {
        self.check_dc_len(dc_voltages)?;
        let mut acc = 0.0;
        let mut vi = 0;
        for e in &self.electrodes {
            let v = match e.kind {
                ElectrodeKind::Dc => {
                    let v = dc_voltages[vi];
                    vi += 1;
                    v
                }
                ElectrodeKind::Window => *self.window_bias.get(&e.name).unwrap_or(&0.0),
                ElectrodeKind::RfRail => 0.0,
            };
            if v != 0.0 {
                acc += v * e.potential(point)?;
            }
        }
        Ok(acc)
    }

    /// Gradient of the electrical potential [V/m].
    pub fn dc_gradient(
        &self,
        dc_voltages: &[f64],
        point: &Vector3<f64>,
    ) -> Result<Vector3<f64>, TrapError> {
        self.check_dc_len(dc_voltages)?;
        let mut grad = Vector3::zeros();
        let mut vi = 0;
        for e in &self.electrodes {
            let v = match e.kind {
                ElectrodeKind::Dc => {
                    let v = dc_voltages[vi];
                    vi += 1;
                    v
                }
                ElectrodeKind::Window => *self.window_bias.get(&e.name).unwrap_or(&0.0),
                ElectrodeKind::RfRail => 0.0,
            };
            if v != 0.0 {
                grad += v * e.gradient(point)?;
            }
        }
        Ok(grad)
    }

    /// Gradient and Hessian of the electrical potential.
    pub fn dc_grad_hess(
        &self,
        dc_voltages: &[f64],
        point: &Vector3<f64>,
    ) -> Result<(Vector3<f64>, Matrix3<f64>), TrapError> {
        self.check_dc_len(dc_voltages)?;
        let mut grad = Vector3::zeros();
        let mut hess = Matrix3::zeros();
        let mut vi = 0;
        for e in &self.electrodes {
            let v = match e.kind {
                ElectrodeKind::Dc => {
                    let v = dc_voltages[vi];
                    vi += 1;
                    v
                }
                ElectrodeKind::Window => *self.window_bias.get(&e.name).unwrap_or(&0.0),
                ElectrodeKind::RfRail => 0.0,
            };
            if v != 0.0 {
                let (g, h) = e.derivatives(point)?;
                grad += v * g;
                hess += v * h;
            }
        }
        Ok((grad, hess))
    }

    /// Total potential [V]: electrical plus pseudopotential.
    pub fn total_potential(
        &self,
        dc_voltages: &[f64],
        point: &Vector3<f64>,
    ) -> Result<f64, TrapError> {
        Ok(self.dc_potential(dc_voltages, point)? + self.pseudo_potential(point))
    }

    pub fn total_grad_hess(
        &self,
        dc_voltages: &[f64],
        point: &Vector3<f64>,
    ) -> Result<(Vector3<f64>, Matrix3<f64>), TrapError> {
        let (g, h) = self.dc_grad_hess(dc_voltages, point)?;
        Ok((g + self.pseudo_gradient(point), h + self.pseudo_hessian()))
    }

    /// Axial gradient and curvature of the electrical-plus-window potential
    /// along the trap axis, used by the 1-D well search and by Doppler-free
    /// force evaluation in the dynamics module.
    pub fn axial_grad_curv(
        &self,
        dc_voltages: &[f64],
        x: f64,
    ) -> Result<(f64, f64), TrapError> {
        let p = self.axis_point(x);
        let (g, h) = self.dc_grad_hess(dc_voltages, &p)?;
        Ok((g.x, h[(0, 0)]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn patch(x0: f64, x1: f64) -> RectPatch {
        RectPatch::new(x0, x1, 0.0, 1e-4).unwrap()
    }

    #[test]
    fn electrode_rejects_empty_and_overlapping() {
        assert!(Electrode::new("e", ElectrodeKind::Dc, vec![]).is_err());
        let overlapping = vec![patch(0.0, 2e-4), patch(1e-4, 3e-4)];
        assert!(Electrode::new("e", ElectrodeKind::Dc, overlapping).is_err());
        let touching = vec![patch(0.0, 1e-4), patch(1e-4, 2e-4)];
        assert!(Electrode::new("e", ElectrodeKind::Dc, touching).is_ok());
    }

    #[test]
    fn layout_rejects_duplicates_and_bad_zones() {
        let e1 = Electrode::new("a", ElectrodeKind::Dc, vec![patch(0.0, 1e-4)]).unwrap();
        let e2 = Electrode::new("a", ElectrodeKind::Dc, vec![patch(2e-4, 3e-4)]).unwrap();
        let err = TrapLayout::new(
            vec![e1.clone(), e2],
            50e-6,
            crate::constants::CA40_MASS,
            crate::constants::ELEMENTARY_CHARGE,
            [1.0, 1.0],
            vec![],
        );
        assert!(matches!(err, Err(TrapError::DuplicateName(_))));

        let e3 = Electrode::new("b", ElectrodeKind::Dc, vec![patch(2e-4, 3e-4)]).unwrap();
        let zones = vec![
            Zone {
                id: "z1".into(),
                x: 1e-4,
            },
            Zone {
                id: "z0".into(),
                x: 0.0,
            },
        ];
        let err = TrapLayout::new(
            vec![e1, e3],
            50e-6,
            crate::constants::CA40_MASS,
            crate::constants::ELEMENTARY_CHARGE,
            [1.0, 1.0],
            zones,
        );
        assert!(matches!(err, Err(TrapError::ZoneOrder)));
    }

    #[test]
    fn window_bias_requires_window_kind() {
        let dc = Electrode::new("dc1", ElectrodeKind::Dc, vec![patch(0.0, 1e-4)]).unwrap();
        let layout = TrapLayout::new(
            vec![dc],
            50e-6,
            crate::constants::CA40_MASS,
            crate::constants::ELEMENTARY_CHARGE,
            [1.0, 1.0],
            vec![],
        )
        .unwrap();
        let mut bias = BTreeMap::new();
        bias.insert("dc1".to_string(), -2.0);
        assert!(matches!(
            layout.with_window_bias(&bias),
            Err(TrapError::NotAWindow(_))
        ));
        let mut bias = BTreeMap::new();
        bias.insert("nope".to_string(), -2.0);
        assert!(matches!(
            layout.with_window_bias(&bias),
            Err(TrapError::UnknownElectrode(_))
        ));
    }
}
