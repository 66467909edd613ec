//! Desk-scale control engineering for a multi-zone surface-electrode ion trap.
//!
//! The crate covers the full pipeline used to run transport experiments on a
//! segmented trap:
//!
//! - [`trap`]: analytic electrostatics of a gapless segmented surface trap —
//!   unit potentials, gradients and Hessians per electrode, and well finding
//!   in a combined potential.
//! - [`waveform`]: synthesis of time-dependent electrode voltages that realize
//!   target wells along a transport trajectory, static multi-zone voltage
//!   sets, and low-pass filter precompensation under hardware limits.
//! - [`calib`]: stray-charge calibration against the exposed dielectric
//!   windows — frequency-profile prediction, effective window-voltage
//!   fitting, and the closed compensation loop.
//! - [`dynamics`]: classical 1-D axial dynamics of the ion in the filtered
//!   time-varying potential, motional-excitation estimates, and Doppler
//!   velocimetry maps.
//! - [`qubit`]: three-level unitary algebra and protocol simulation —
//!   hybrid optical/memory Ramsey, BB1 composite pulses, thermal carrier
//!   decay, and spectroscopy analysis.
//!
//! All internal units are strict SI (m, V, s, kg, C, rad/s). Unit conversion
//! belongs to the configuration layer, not this crate.

pub mod calib;
pub mod constants;
pub mod desk;
pub mod dynamics;
pub mod fit;
pub mod qubit;
pub mod trap;
pub mod waveform;

pub use trap::{Electrode, ElectrodeKind, PotentialWell, RectPatch, TrapLayout};
pub use waveform::{HardwareLimits, Trajectory, Waveform, ZoneObjective};
