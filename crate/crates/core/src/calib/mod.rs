//! Stray-charge calibration against the dielectric windows.
//!
//! The exposed window regions are modeled as fictitious electrodes carrying
//! effective voltages. A spatially resolved trap-frequency profile is
//! predicted from the window curvatures, measured profiles are fitted to
//! extract the voltages, and the compensation loop iterates until the
//! profile is uniform.

mod closed_loop;
mod fitting;
mod profile;

pub use closed_loop::{
    iterate_compensation, simulate_measured_profile, CalibrationRound, NoiseModel,
};
pub use fitting::fit_window_voltages;
pub use profile::{micromotion_offset, predict_profile};

use std::collections::BTreeMap;

use thiserror::Error;

use crate::fit::FitError;
use crate::trap::TrapError;
use crate::waveform::SynthError;

#[derive(Debug, Error)]
pub enum CalibError {
    #[error(transparent)]
    Trap(#[from] TrapError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error("invalid frequency profile: {0}")]
    BadProfile(String),
    #[error("anti-trapping: ω² goes negative at {} of {} positions (first at x = {first:.4e} m)", .count, .total)]
    AntiTrapping { count: usize, total: usize, first: f64 },
    #[error("compensation diverged at round {round}: residual {residual:.4e} rad/s grew twice in a row")]
    Diverged { round: usize, residual: f64 },
}

/// Spatially resolved axial trap-frequency measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyProfile {
    pub positions: Vec<f64>,
    pub frequencies: Vec<f64>,
    pub frequency_errors: Vec<f64>,
    /// Design frequency ω₀ of the positioning potential [rad/s].
    pub base_frequency: f64,
}

impl FrequencyProfile {
    pub fn new(
        positions: Vec<f64>,
        frequencies: Vec<f64>,
        frequency_errors: Vec<f64>,
        base_frequency: f64,
    ) -> Result<Self, CalibError> {
        if positions.len() != frequencies.len() || positions.len() != frequency_errors.len() {
            return Err(CalibError::BadProfile("mismatched column lengths".into()));
        }
        if positions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CalibError::BadProfile(
                "positions must be strictly increasing".into(),
            ));
        }
        if frequencies.iter().any(|&f| !(f > 0.0)) {
            return Err(CalibError::BadProfile("frequencies must be positive".into()));
        }
        if !(base_frequency > 0.0) {
            return Err(CalibError::BadProfile("ω₀ must be positive".into()));
        }
        Ok(Self {
            positions,
            frequencies,
            frequency_errors,
            base_frequency,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Largest deviation from the base frequency [rad/s].
    pub fn max_deviation(&self) -> f64 {
        self.frequencies
            .iter()
            .map(|&f| (f - self.base_frequency).abs())
            .fold(0.0, f64::max)
    }
}

/// Effective voltages on the window electrodes, with tie groups whose members
/// share one fitted parameter.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WindowVoltageSet {
    pub voltages: BTreeMap<String, f64>,
    pub ties: Vec<Vec<String>>,
}

impl WindowVoltageSet {
    pub fn from_map(voltages: BTreeMap<String, f64>) -> Self {
        Self {
            voltages,
            ties: Vec::new(),
        }
    }

    pub fn get(&self, name: &str) -> f64 {
        *self.voltages.get(name).unwrap_or(&0.0)
    }
}
