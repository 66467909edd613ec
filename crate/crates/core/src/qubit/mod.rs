//! Three-level unitary algebra and protocol simulation for the
//! {|↓⟩, |↑⟩, |1⟩} manifold: |↓⟩,|↑⟩ form the ground-state memory qubit,
//! |↓⟩,|1⟩ the optical qubit.

mod ramsey;
mod rotation;
mod spectro;
mod thermal;

pub use ramsey::{ramsey_probability, ramsey_scan, PhaseModel, RamseyMode, RamseyScan};
pub use rotation::{
    bb1_pi_infidelity, hybrid_memory_rotation, plain_pi_infidelity, rotation, StatePair,
};
pub use spectro::{
    correlation, crosstalk_ratio, drift_to_field, field_gradient, lorentzian_fit,
    CorrelationReport, LorentzianFit, Measured,
};
pub use thermal::{fit_nbar, thermal_carrier, NbarFit, ThermalParams};

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum QubitError {
    #[error("invalid state: {0}")]
    BadState(String),
    #[error("motional truncation too small: tail weight {tail:.3e} ≥ {limit:.1e}")]
    TruncationTooSmall { tail: f64, limit: f64 },
    #[error(transparent)]
    Fit(#[from] crate::fit::FitError),
    #[error("invalid input: {0}")]
    BadInput(String),
    #[error("no peak: fitted amplitude is consistent with zero")]
    NoPeak,
    #[error("degenerate variance: a series is constant")]
    DegenerateVariance,
}

/// Basis index of |↓⟩.
pub const DOWN: usize = 0;
/// Basis index of |↑⟩.
pub const UP: usize = 1;
/// Basis index of the metastable |1⟩.
pub const ONE: usize = 2;

/// Normalized amplitude vector over {|↓⟩, |↑⟩, |1⟩}.
#[derive(Debug, Clone, PartialEq)]
pub struct ThreeLevelState(pub Vector3<Complex64>);

impl ThreeLevelState {
    pub fn new(amplitudes: Vector3<Complex64>) -> Result<Self, QubitError> {
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(QubitError::BadState(format!(
                "norm {norm} deviates from 1 beyond 1e-12"
            )));
        }
        Ok(Self(amplitudes))
    }

    pub fn down() -> Self {
        Self(Vector3::new(
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
        ))
    }

    /// Population of a basis state.
    pub fn population(&self, index: usize) -> f64 {
        self.0[index].norm_sqr()
    }
}

/// 3×3 unitary over the {|↓⟩, |↑⟩, |1⟩} basis.
#[derive(Debug, Clone, PartialEq)]
pub struct ThreeLevelUnitary(pub Matrix3<Complex64>);

impl ThreeLevelUnitary {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Deviation from unitarity: max |U†U − I| entry.
    pub fn unitarity_error(&self) -> f64 {
        let m = self.0.adjoint() * self.0 - Matrix3::<Complex64>::identity();
        m.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn verify(&self) -> Result<(), QubitError> {
        let err = self.unitarity_error();
        if err > 1e-12 {
            return Err(QubitError::BadState(format!(
                "matrix is not unitary (deviation {err:.3e})"
            )));
        }
        Ok(())
    }

    pub fn apply(&self, state: &ThreeLevelState) -> ThreeLevelState {
        ThreeLevelState(self.0 * state.0)
    }

    /// Largest entry of |A − B|.
    pub fn distance(&self, other: &ThreeLevelUnitary) -> f64 {
        (self.0 - other.0).iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

impl std::ops::Mul for &ThreeLevelUnitary {
    type Output = ThreeLevelUnitary;
    fn mul(self, rhs: &ThreeLevelUnitary) -> ThreeLevelUnitary {
        ThreeLevelUnitary(self.0 * rhs.0)
    }
}

/// Time series of fitted transition centers for one zone.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectroscopySeries {
    pub timestamps: Vec<f64>,
    pub centers: Vec<f64>,
    pub uncertainties: Vec<f64>,
    pub zone: String,
}

impl SpectroscopySeries {
    pub fn new(
        timestamps: Vec<f64>,
        centers: Vec<f64>,
        uncertainties: Vec<f64>,
        zone: impl Into<String>,
    ) -> Result<Self, QubitError> {
        if timestamps.len() != centers.len() || timestamps.len() != uncertainties.len() {
            return Err(QubitError::BadInput("mismatched series lengths".into()));
        }
        if uncertainties.iter().any(|&s| !(s > 0.0)) {
            return Err(QubitError::BadInput(
                "uncertainties must be positive".into(),
            ));
        }
        Ok(Self {
            timestamps,
            centers,
            uncertainties,
            zone: zone.into(),
        })
    }
}
