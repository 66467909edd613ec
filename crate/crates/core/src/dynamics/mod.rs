//! Classical 1-D axial ion dynamics in the filtered, time-varying potential.

mod doppler;
mod filter;
mod verlet;

pub use doppler::{doppler_from_trajectory, doppler_map, DopplerMap, ProbeParams};
pub use filter::{filter_response, FilterCascade};
pub use verlet::{
    integrate_motion, motional_excitation, IntegrateOptions, IonTrajectory,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error(transparent)]
    Trap(#[from] crate::trap::TrapError),
    #[error("invalid filter cascade: {0}")]
    BadFilter(String),
    #[error("sample period mismatch: waveform {waveform:.3e} s vs filter {filter:.3e} s")]
    SamplePeriodMismatch { waveform: f64, filter: f64 },
    #[error("invalid integration setup: {0}")]
    BadIntegration(String),
    #[error("ion lost at t = {time:.3e} s, x = {x:.4e} m: {reason}")]
    IonLost { time: f64, x: f64, reason: String },
    #[error("trajectory ends outside the harmonic region: {0}")]
    AnharmonicRegion(String),
    #[error("invalid Doppler probe setup: {0}")]
    BadProbe(String),
}
