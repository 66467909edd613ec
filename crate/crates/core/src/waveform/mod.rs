//! Constrained synthesis of electrode voltage sets and transport waveforms.

mod precomp;
mod sigmoid;
mod solver;
mod synth;

pub use precomp::precompensate_filter;
pub use sigmoid::sigmoid_trajectory;
pub use solver::{BoundedLsProblem, InfeasibleReport, SolveOptions};
pub use synth::{
    apply_window_compensation, solve_static, synthesize_waveform, AuditReport, CurvatureGoal,
    SynthOptions,
};

use nalgebra::{DMatrix, Vector3};
use thiserror::Error;

use crate::trap::TrapError;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error(transparent)]
    Trap(#[from] TrapError),
    #[error("invalid hardware limits: {0}")]
    BadLimits(String),
    #[error("invalid trajectory: {0}")]
    BadTrajectory(String),
    #[error("invalid objective: {0}")]
    BadObjective(String),
    #[error("invalid waveform: {0}")]
    BadWaveform(String),
    #[error("objectives infeasible under voltage bounds: {report}")]
    Infeasible { report: InfeasibleReport },
    #[error("slew limit exceeded on electrode `{electrode}` at sample {sample}: {slew:.3e} V/s > {limit:.3e} V/s")]
    SlewViolation {
        electrode: String,
        sample: usize,
        slew: f64,
        limit: f64,
    },
    #[error("well audit failed at sample {sample}: {detail}")]
    AuditFailed { sample: usize, detail: String },
    #[error("filter precompensation infeasible: {0}")]
    PrecompInfeasible(String),
    #[error(transparent)]
    Dynamics(#[from] crate::dynamics::DynamicsError),
}

/// Output-chain limits of the voltage hardware: AWG, amplifier, filters.
#[derive(Debug, Clone, PartialEq)]
pub struct HardwareLimits {
    /// AWG output range [V].
    pub v_min: f64,
    pub v_max: f64,
    /// AWG sampling period [s].
    pub awg_sample_period: f64,
    /// Maximum AWG output slew [V/s].
    pub awg_slew_max: f64,
    /// Amplifier voltage gain.
    pub amp_gain: f64,
    /// Maximum amplifier output slew [V/s].
    pub amp_slew_max: f64,
    /// First-order low-pass cutoffs of the filter chain [Hz].
    pub filter_cutoffs: Vec<f64>,
}

impl Default for HardwareLimits {
    /// Stock chain: ±10 V AWG sampled at 390 ns with 20 V/µs slew, a ×2.5
    /// amplifier limited to 1 V/µs, and two cascaded 60 kHz filter sections
    /// (30 kHz combined cutoff).
    fn default() -> Self {
        Self {
            v_min: -10.0,
            v_max: 10.0,
            awg_sample_period: 390e-9,
            awg_slew_max: 20.0 / 1e-6,
            amp_gain: 2.5,
            amp_slew_max: 1.0 / 1e-6,
            filter_cutoffs: vec![60e3, 60e3],
        }
    }
}

impl HardwareLimits {
    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.v_min < self.v_max) {
            return Err(SynthError::BadLimits(format!(
                "v_min {} must be below v_max {}",
                self.v_min, self.v_max
            )));
        }
        for (name, v) in [
            ("awg_sample_period", self.awg_sample_period),
            ("awg_slew_max", self.awg_slew_max),
            ("amp_gain", self.amp_gain),
            ("amp_slew_max", self.amp_slew_max),
        ] {
            if !(v > 0.0) {
                return Err(SynthError::BadLimits(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.filter_cutoffs.iter().any(|&f| !(f > 0.0)) {
            return Err(SynthError::BadLimits(
                "filter cutoffs must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Voltage bounds at the electrode (after amplification) [V].
    pub fn electrode_bounds(&self) -> (f64, f64) {
        (self.v_min * self.amp_gain, self.v_max * self.amp_gain)
    }

    /// Binding slew limit at the electrode [V/s]: the AWG limit scaled by the
    /// gain or the amplifier limit, whichever is tighter.
    pub fn electrode_slew_max(&self) -> f64 {
        (self.awg_slew_max * self.amp_gain).min(self.amp_slew_max)
    }
}

/// One target sample of a transport trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub time: f64,
    /// Target well position on the axis [m].
    pub position: f64,
    /// Target axial frequency [rad/s].
    pub frequency: f64,
    /// Target electric field at the well [V/m].
    pub field: Vector3<f64>,
}

/// Time-ordered well targets for waveform synthesis.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    samples: Vec<TrajectorySample>,
}

impl Trajectory {
    pub fn new(samples: Vec<TrajectorySample>) -> Result<Self, SynthError> {
        if samples.is_empty() {
            return Err(SynthError::BadTrajectory("no samples".into()));
        }
        for w in samples.windows(2) {
            if !(w[1].time > w[0].time) {
                return Err(SynthError::BadTrajectory(
                    "times must be strictly increasing".into(),
                ));
            }
        }
        if samples.iter().any(|s| !(s.frequency > 0.0)) {
            return Err(SynthError::BadTrajectory(
                "target frequencies must be positive".into(),
            ));
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[TrajectorySample] {
        &self.samples
    }

    pub fn duration(&self) -> f64 {
        self.samples.last().unwrap().time - self.samples[0].time
    }

    /// Uniform sample spacing, or an error when the spacing drifts.
    pub fn uniform_spacing(&self) -> Result<f64, SynthError> {
        if self.samples.len() < 2 {
            return Ok(0.0);
        }
        let dt = self.samples[1].time - self.samples[0].time;
        for w in self.samples.windows(2) {
            let d = w[1].time - w[0].time;
            if (d - dt).abs() > 1e-9 * dt.max(1e-30) {
                return Err(SynthError::BadTrajectory(
                    "sample spacing is not uniform".into(),
                ));
            }
        }
        Ok(dt)
    }

    /// Time-reversed trajectory: the targets visit the same waypoints in
    /// reverse order on the original time grid (exact for uniform grids).
    pub fn reversed(&self) -> Self {
        let samples: Vec<TrajectorySample> = self
            .samples
            .iter()
            .enumerate()
            .map(|(i, s)| TrajectorySample {
                time: s.time,
                ..self.samples[self.samples.len() - 1 - i]
            })
            .collect();
        Self { samples }
    }
}

/// Time-sampled per-electrode voltage matrix with hardware-limits metadata.
///
/// Voltages are at-electrode values (after amplifier gain). Constructors
/// enforce the voltage bounds; slew conformance is checked by
/// [`Waveform::check_slew`], which synthesis enforces by default and filter
/// precompensation enforces on its output.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    electrode_names: Vec<String>,
    /// time × electrode [V].
    samples: DMatrix<f64>,
    sample_period: f64,
    limits: HardwareLimits,
}

impl Waveform {
    pub fn new(
        electrode_names: Vec<String>,
        samples: DMatrix<f64>,
        sample_period: f64,
        limits: HardwareLimits,
    ) -> Result<Self, SynthError> {
        limits.validate()?;
        if samples.nrows() < 2 {
            return Err(SynthError::BadWaveform(format!(
                "waveform needs at least 2 samples, got {}",
                samples.nrows()
            )));
        }
        if samples.ncols() != electrode_names.len() {
            return Err(SynthError::BadWaveform(format!(
                "{} electrode names vs {} voltage columns",
                electrode_names.len(),
                samples.ncols()
            )));
        }
        if !(sample_period > 0.0) {
            return Err(SynthError::BadWaveform(
                "sample period must be positive".into(),
            ));
        }
        let (lo, hi) = limits.electrode_bounds();
        let tol = 1e-9 * (hi - lo).abs();
        for v in samples.iter() {
            if *v < lo - tol || *v > hi + tol {
                return Err(SynthError::BadWaveform(format!(
                    "voltage {v:.6} V outside electrode bounds [{lo}, {hi}] V"
                )));
            }
        }
        Ok(Self {
            electrode_names,
            samples,
            sample_period,
            limits,
        })
    }

    pub fn electrode_names(&self) -> &[String] {
        &self.electrode_names
    }

    pub fn samples(&self) -> &DMatrix<f64> {
        &self.samples
    }

    pub fn sample_period(&self) -> f64 {
        self.sample_period
    }

    pub fn limits(&self) -> &HardwareLimits {
        &self.limits
    }

    pub fn n_samples(&self) -> usize {
        self.samples.nrows()
    }

    pub fn n_electrodes(&self) -> usize {
        self.samples.ncols()
    }

    pub fn duration(&self) -> f64 {
        (self.n_samples() - 1) as f64 * self.sample_period
    }

    /// Same metadata, new voltage matrix (dimensions must match).
    pub fn with_samples(&self, samples: DMatrix<f64>) -> Waveform {
        assert_eq!(samples.ncols(), self.samples.ncols());
        Waveform {
            electrode_names: self.electrode_names.clone(),
            samples,
            sample_period: self.sample_period,
            limits: self.limits.clone(),
        }
    }

    /// Voltage row at a sample index.
    pub fn row(&self, t: usize) -> Vec<f64> {
        self.samples.row(t).iter().cloned().collect()
    }

    /// Verify every inter-sample step against the binding slew limit.
    pub fn check_slew(&self) -> Result<(), SynthError> {
        let limit = self.limits.electrode_slew_max();
        let tol = 1.0 + 1e-9;
        for t in 1..self.n_samples() {
            for e in 0..self.n_electrodes() {
                let slew =
                    (self.samples[(t, e)] - self.samples[(t - 1, e)]).abs() / self.sample_period;
                if slew > limit * tol {
                    return Err(SynthError::SlewViolation {
                        electrode: self.electrode_names[e].clone(),
                        sample: t,
                        slew,
                        limit,
                    });
                }
            }
        }
        Ok(())
    }

    /// Waveform with the sample order reversed.
    pub fn reversed(&self) -> Waveform {
        let n = self.n_samples();
        let mut rev = self.samples.clone();
        for t in 0..n {
            rev.set_row(t, &self.samples.row(n - 1 - t));
        }
        self.with_samples(rev)
    }
}

/// Static per-zone objective for multi-zone voltage sets.
#[derive(Debug, Clone, PartialEq)]
pub struct ZoneObjective {
    pub zone: String,
    /// Target well position [m]; defaults to the zone marker.
    pub well_position: Option<f64>,
    /// Exactly one of a frequency target or curvature nulling.
    pub curvature: CurvatureGoal,
    /// Target axial electric field E_x at the well [V/m].
    pub axial_field: f64,
    /// Constrain the transverse field components to zero as well.
    pub null_transverse_field: bool,
}

impl ZoneObjective {
    /// Confining well at the zone marker with the given axial frequency.
    pub fn well(zone: impl Into<String>, frequency: f64) -> Self {
        Self {
            zone: zone.into(),
            well_position: None,
            curvature: CurvatureGoal::Frequency(frequency),
            axial_field: 0.0,
            null_transverse_field: true,
        }
    }

    /// Null objective: this voltage set contributes neither field nor
    /// curvature at the zone.
    pub fn null(zone: impl Into<String>) -> Self {
        Self {
            zone: zone.into(),
            well_position: None,
            curvature: CurvatureGoal::Null,
            axial_field: 0.0,
            null_transverse_field: true,
        }
    }

    pub fn with_axial_field(mut self, field: f64) -> Self {
        self.axial_field = field;
        self
    }
}
