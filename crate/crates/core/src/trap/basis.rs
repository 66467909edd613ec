//! Per-electrode basis tensors: unit potential, gradient, and Hessian of
//! every electrode at a set of field points. The total potential for a
//! voltage set is the linear combination of these weighted by the voltages.

use nalgebra::{Matrix3, Vector3};

use super::{TrapError, TrapLayout};

/// Unit potential of one electrode at one point, with derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisSample {
    pub phi: f64,
    pub grad: Vector3<f64>,
    pub hess: Matrix3<f64>,
}

impl BasisSample {
    pub fn zero() -> Self {
        Self {
            phi: 0.0,
            grad: Vector3::zeros(),
            hess: Matrix3::zeros(),
        }
    }
}

/// Basis tensor over (point × electrode), in layout electrode order.
#[derive(Debug, Clone)]
pub struct ElectrodeBasis {
    electrode_names: Vec<String>,
    points: Vec<Vector3<f64>>,
    // row-major: samples[point_idx * n_electrodes + electrode_idx]
    samples: Vec<BasisSample>,
}

impl ElectrodeBasis {
    pub fn electrode_names(&self) -> &[String] {
        &self.electrode_names
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    pub fn electrode_index(&self, name: &str) -> Option<usize> {
        self.electrode_names.iter().position(|n| n == name)
    }

    pub fn sample(&self, point_idx: usize, electrode_idx: usize) -> &BasisSample {
        &self.samples[point_idx * self.electrode_names.len() + electrode_idx]
    }

    /// Linear combination over electrodes for one point: potential, gradient,
    /// and Hessian for the given voltage set (same order as
    /// `electrode_names`).
    pub fn combine(&self, point_idx: usize, voltages: &[f64]) -> BasisSample {
        assert_eq!(voltages.len(), self.electrode_names.len());
        let mut out = BasisSample::zero();
        for (ei, &v) in voltages.iter().enumerate() {
            if v != 0.0 {
                let s = self.sample(point_idx, ei);
                out.phi += v * s.phi;
                out.grad += v * s.grad;
                out.hess += v * s.hess;
            }
        }
        out
    }
}

/// Evaluate the {φ, ∇φ, ∇²φ} basis of every electrode in `layout` at each of
/// `points`. All points must lie above the electrode plane.
pub fn electrode_basis(
    layout: &TrapLayout,
    points: &[Vector3<f64>],
) -> Result<ElectrodeBasis, TrapError> {
    if points.is_empty() {
        return Err(TrapError::NoPoints);
    }
    let electrodes = layout.electrodes();
    let mut samples = Vec::with_capacity(points.len() * electrodes.len());
    for p in points {
        for e in electrodes {
            let phi = e.potential(p)?;
            let (grad, hess) = e.derivatives(p)?;
            samples.push(BasisSample { phi, grad, hess });
        }
    }
    Ok(ElectrodeBasis {
        electrode_names: electrodes.iter().map(|e| e.name().to_string()).collect(),
        points: points.to_vec(),
        samples,
    })
}
