//! In-flight Doppler velocimetry: carrier spectroscopy of the moving ion.
//!
//! A probe pulse of duration τ and Rabi rate Ω is applied at a variable delay
//! during transport. The two-level excitation is integrated with the
//! instantaneous detuning δ(t) = Δω + k·v(t), so the ridge of maximum
//! excitation tracks −k·v(t).

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::filter::FilterCascade;
use super::verlet::{integrate_motion, IntegrateOptions, IonTrajectory};
use super::DynamicsError;
use crate::trap::{find_well, TrapLayout, WellOptions};
use crate::waveform::Waveform;

#[derive(Debug, Clone, Copy)]
pub struct ProbeParams {
    /// Probe pulse duration [s].
    pub duration: f64,
    /// Probe beam wavevector along the axis [rad/m].
    pub wavevector: f64,
    /// Carrier Rabi rate [rad/s].
    pub rabi: f64,
}

/// Excitation map over (probe delay × detuning).
#[derive(Debug, Clone)]
pub struct DopplerMap {
    pub probe_delays: Vec<f64>,
    pub detunings: Vec<f64>,
    /// Row = delay, column = detuning; entries in [0, 1].
    pub excitation: DMatrix<f64>,
    pub wavevector: f64,
    /// True when the velocity spread within every probe window stays below
    /// the Fourier width of the pulse (quasi-instantaneous sampling).
    pub probe_quasistatic: bool,
}

impl DopplerMap {
    /// Detuning of maximum excitation for each delay.
    pub fn ridge(&self) -> Vec<f64> {
        (0..self.probe_delays.len())
            .map(|i| {
                let row = self.excitation.row(i);
                let mut best = 0;
                for j in 1..row.len() {
                    if row[j] > row[best] {
                        best = j;
                    }
                }
                self.detunings[best]
            })
            .collect()
    }
}

/// Two-level excitation after a resonant-drive window with time-dependent
/// detuning, by piecewise-constant Bloch rotations over the stored samples.
fn probe_excitation(
    velocities: &[f64],
    dts: &[f64],
    rabi: f64,
    detuning: f64,
    wavevector: f64,
) -> f64 {
    // Bloch vector, |↓⟩ = (0, 0, 1).
    let (mut bx, mut by, mut bz) = (0.0f64, 0.0f64, 1.0f64);
    for (v, dt) in velocities.iter().zip(dts) {
        let delta = detuning + wavevector * v;
        let omega_eff = (rabi * rabi + delta * delta).sqrt();
        if omega_eff == 0.0 {
            continue;
        }
        let (ax, az) = (rabi / omega_eff, delta / omega_eff);
        let angle = omega_eff * dt;
        let (s, c) = angle.sin_cos();
        // Rodrigues rotation about (ax, 0, az).
        let dot = ax * bx + az * bz;
        let (cx, cy, cz) = (-az * by, az * bx - ax * bz, ax * by);
        let nx = bx * c + cx * s + ax * dot * (1.0 - c);
        let ny = by * c + cy * s;
        let nz = bz * c + cz * s + az * dot * (1.0 - c);
        bx = nx;
        by = ny;
        bz = nz;
    }
    ((1.0 - bz) / 2.0).clamp(0.0, 1.0)
}

/// Build the excitation map from an existing trajectory.
pub fn doppler_from_trajectory(
    trajectory: &IonTrajectory,
    probe: &ProbeParams,
    delays: &[f64],
    detunings: &[f64],
) -> Result<DopplerMap, DynamicsError> {
    if !(probe.duration > 0.0) || !(probe.rabi > 0.0) || probe.wavevector == 0.0 {
        return Err(DynamicsError::BadProbe(
            "probe duration and Rabi rate must be positive, wavevector nonzero".into(),
        ));
    }
    if delays.is_empty() || detunings.is_empty() {
        return Err(DynamicsError::BadProbe("empty delay or detuning grid".into()));
    }
    let t_end = *trajectory.times.last().unwrap();
    for &d in delays {
        if d < trajectory.times[0] || d + probe.duration > t_end + 1e-15 {
            return Err(DynamicsError::BadProbe(format!(
                "probe window [{d:.3e}, {:.3e}] s outside the trajectory span",
                d + probe.duration
            )));
        }
    }

    // Per-delay velocity slices on the stored grid.
    let windows: Vec<(Vec<f64>, Vec<f64>)> = delays
        .iter()
        .map(|&d| {
            let i0 = trajectory.times.partition_point(|&t| t < d);
            let i1 = trajectory
                .times
                .partition_point(|&t| t < d + probe.duration)
                .min(trajectory.times.len());
            let i0 = i0.min(i1.saturating_sub(1));
            let vs: Vec<f64> = trajectory.velocities[i0..i1].to_vec();
            let mut dts = Vec::with_capacity(vs.len());
            for i in i0..i1 {
                let t_next = if i + 1 < trajectory.times.len() {
                    trajectory.times[i + 1]
                } else {
                    t_end
                };
                dts.push((t_next.min(d + probe.duration) - trajectory.times[i].max(d)).max(0.0));
            }
            (vs, dts)
        })
        .collect();

    let fourier_width = 2.0 * std::f64::consts::PI / probe.duration;
    let quasistatic = windows.iter().all(|(vs, _)| {
        let (lo, hi) = vs
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| {
                (l.min(v), h.max(v))
            });
        probe.wavevector.abs() * (hi - lo) < fourier_width
    });

    let rows: Vec<Vec<f64>> = windows
        .par_iter()
        .map(|(vs, dts)| {
            detunings
                .iter()
                .map(|&dw| probe_excitation(vs, dts, probe.rabi, dw, probe.wavevector))
                .collect()
        })
        .collect();
    let mut excitation = DMatrix::zeros(delays.len(), detunings.len());
    for (i, row) in rows.iter().enumerate() {
        for (j, &p) in row.iter().enumerate() {
            excitation[(i, j)] = p;
        }
    }
    Ok(DopplerMap {
        probe_delays: delays.to_vec(),
        detunings: detunings.to_vec(),
        excitation,
        wavevector: probe.wavevector,
        probe_quasistatic: quasistatic,
    })
}

/// Integrate the transport and build the Doppler map in one call.
///
/// The ion starts at rest in the well of the first waveform sample; the
/// integration is extended so the latest probe window fits.
pub fn doppler_map(
    layout: &TrapLayout,
    waveform: &Waveform,
    cascade: Option<&FilterCascade>,
    probe: &ProbeParams,
    delays: &[f64],
    detunings: &[f64],
    guess_x: f64,
    opts: &IntegrateOptions,
) -> Result<DopplerMap, DynamicsError> {
    let well0 = find_well(layout, &waveform.row(0), guess_x, &WellOptions::default())?;
    let t_max = delays.iter().cloned().fold(0.0f64, f64::max) + probe.duration;
    let settle = (t_max - waveform.duration()).max(0.0) + opts.settle;
    let run = IntegrateOptions {
        settle,
        ..*opts
    };
    let traj = integrate_motion(layout, waveform, cascade, well0.position.x, 0.0, &run)?;
    doppler_from_trajectory(&traj, probe, delays, detunings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::verlet::synthetic_oscillation;

    fn rest_trajectory(duration: f64, dt: f64) -> IonTrajectory {
        synthetic_oscillation(0.0, 0.0, 1.0, 1.0, duration, dt)
    }

    fn constant_velocity_trajectory(v: f64, duration: f64, dt: f64) -> IonTrajectory {
        let n = (duration / dt).ceil() as usize + 1;
        let times: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
        let positions: Vec<f64> = times.iter().map(|t| v * t).collect();
        IonTrajectory {
            velocities: vec![v; n],
            energies: vec![0.0; n],
            final_nbar: f64::NAN,
            times,
            positions,
        }
    }

    #[test]
    fn ion_at_rest_gives_symmetric_central_ridge() {
        let traj = rest_trajectory(100e-6, 20e-9);
        let probe = ProbeParams {
            duration: 30e-6,
            wavevector: 2.0 * std::f64::consts::PI / 729e-9,
            rabi: 2.0 * std::f64::consts::PI * 15e3,
        };
        let detunings: Vec<f64> = (-40..=40)
            .map(|i| i as f64 * 2.0 * std::f64::consts::PI * 2.5e3)
            .collect();
        let map = doppler_from_trajectory(&traj, &probe, &[0.0, 20e-6], &detunings).unwrap();
        let ridge = map.ridge();
        assert_eq!(ridge[0], 0.0);
        assert_eq!(ridge[1], 0.0);
        // Symmetric profile and a linewidth comparable to the Fourier width.
        let row = map.excitation.row(0);
        let mid = detunings.len() / 2;
        for j in 1..mid {
            assert!((row[mid - j] - row[mid + j]).abs() < 1e-9);
        }
        let fourier = 2.0 * std::f64::consts::PI / probe.duration;
        let half_max = row[mid] / 2.0;
        let mut width_bins = 0;
        for j in 0..detunings.len() {
            if row[j] > half_max {
                width_bins += 1;
            }
        }
        let width = width_bins as f64 * 2.0 * std::f64::consts::PI * 2.5e3;
        assert!(
            width > 0.3 * fourier && width < 3.0 * fourier,
            "width {width:.3e} vs fourier {fourier:.3e}"
        );
        assert!(map.probe_quasistatic);
    }

    #[test]
    fn constant_velocity_ridge_sits_at_minus_kv() {
        let v = 0.3;
        let k = 2.0 * std::f64::consts::PI / 729e-9;
        let traj = constant_velocity_trajectory(v, 100e-6, 20e-9);
        let probe = ProbeParams {
            duration: 30e-6,
            wavevector: k,
            rabi: 2.0 * std::f64::consts::PI * 15e3,
        };
        let bin = 2.0 * std::f64::consts::PI * 5e3;
        let center = -k * v;
        let detunings: Vec<f64> = (-50..=50).map(|i| center + i as f64 * bin).collect();
        let map = doppler_from_trajectory(&traj, &probe, &[10e-6], &detunings).unwrap();
        let ridge = map.ridge();
        assert!(
            (ridge[0] - center).abs() <= bin / 2.0 + 1e-9,
            "ridge {:.4e} vs −kv {:.4e}",
            ridge[0],
            center
        );
    }

    #[test]
    fn galilean_shift_moves_ridge_linearly() {
        let k = 2.0 * std::f64::consts::PI / 729e-9;
        let probe = ProbeParams {
            duration: 30e-6,
            wavevector: k,
            rabi: 2.0 * std::f64::consts::PI * 15e3,
        };
        let bin = 2.0 * std::f64::consts::PI * 5e3;
        let v0 = 0.25;
        let detunings: Vec<f64> = (-120..=40).map(|i| i as f64 * bin).collect();
        let t0 = constant_velocity_trajectory(0.0, 80e-6, 20e-9);
        let t1 = constant_velocity_trajectory(v0, 80e-6, 20e-9);
        let m0 = doppler_from_trajectory(&t0, &probe, &[5e-6], &detunings).unwrap();
        let m1 = doppler_from_trajectory(&t1, &probe, &[5e-6], &detunings).unwrap();
        let shift = m1.ridge()[0] - m0.ridge()[0];
        assert!(
            (shift + k * v0).abs() <= bin + 1e-9,
            "shift {shift:.4e} vs −kv0 {:.4e}",
            -k * v0
        );
    }

    #[test]
    fn rejects_probe_outside_trajectory() {
        let traj = rest_trajectory(20e-6, 20e-9);
        let probe = ProbeParams {
            duration: 30e-6,
            wavevector: 1.0,
            rabi: 1.0,
        };
        assert!(matches!(
            doppler_from_trajectory(&traj, &probe, &[0.0], &[0.0]),
            Err(DynamicsError::BadProbe(_))
        ));
    }
}
