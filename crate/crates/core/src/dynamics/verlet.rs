//! Velocity-Verlet integration of the axial equation of motion
//! m ẍ = −q ∂ₓΦ(x, t), with voltages piecewise-linearly interpolated between
//! waveform samples (held after the last sample) and transverse motion frozen
//! by the pseudopotential.

use super::filter::{filter_response, FilterCascade};
use super::DynamicsError;
use crate::constants::HBAR;
use crate::trap::{find_well, newton_axial, PotentialWell, TrapLayout, WellOptions};
use crate::waveform::Waveform;

/// Time series of the ion state plus derived secular energy.
#[derive(Debug, Clone)]
pub struct IonTrajectory {
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
    pub velocities: Vec<f64>,
    /// Instantaneous energy relative to the moving well [J].
    pub energies: Vec<f64>,
    /// Mean occupation of the final well, NaN when no quiet final segment
    /// was available.
    pub final_nbar: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct IntegrateOptions {
    /// Integrator time step [s].
    pub dt: f64,
    /// Extra hold time simulated after the waveform ends [s].
    pub settle: f64,
    /// Keep every n-th integrator sample in the output.
    pub output_stride: usize,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self {
            dt: 1e-9,
            settle: 0.0,
            output_stride: 10,
        }
    }
}

/// Per-waveform-sample well track used for energy bookkeeping.
struct WellTrack {
    xs: Vec<f64>,
    potentials: Vec<f64>,
    curvatures: Vec<f64>,
}

fn lerp_row(wf: &Waveform, t: f64, out: &mut [f64]) {
    let period = wf.sample_period();
    let n = wf.n_samples();
    let s = (t / period).max(0.0);
    let k = (s.floor() as usize).min(n - 1);
    let frac = (s - k as f64).clamp(0.0, 1.0);
    let m = wf.samples();
    if k + 1 >= n {
        for (e, o) in out.iter_mut().enumerate() {
            *o = m[(n - 1, e)];
        }
    } else {
        for (e, o) in out.iter_mut().enumerate() {
            *o = (1.0 - frac) * m[(k, e)] + frac * m[(k + 1, e)];
        }
    }
}

fn track_wells(
    layout: &TrapLayout,
    wf: &Waveform,
    x_start: f64,
) -> Result<WellTrack, DynamicsError> {
    let n = wf.n_samples();
    let mut xs = Vec::with_capacity(n);
    let mut potentials = Vec::with_capacity(n);
    let mut curvatures = Vec::with_capacity(n);
    let opts = WellOptions::default();
    let mut seed = x_start;
    for t in 0..n {
        let v = wf.row(t);
        let found = newton_axial(|x| layout.axial_grad_curv(&v, x), seed, &opts);
        match found {
            Ok(x) => {
                let p = layout.axis_point(x);
                let pot = layout.total_potential(&v, &p)?;
                let (_, c) = layout.axial_grad_curv(&v, x)?;
                xs.push(x);
                potentials.push(pot);
                curvatures.push(c);
                seed = x;
            }
            Err(_) => {
                // Transiently distorted potential: carry the previous well.
                let x = *xs.last().unwrap_or(&x_start);
                let p = layout.axis_point(x);
                let pot = layout.total_potential(&wf.row(t), &p)?;
                xs.push(x);
                potentials.push(pot);
                curvatures.push(0.0);
            }
        }
    }
    Ok(WellTrack {
        xs,
        potentials,
        curvatures,
    })
}

fn track_lerp(track: &[f64], period: f64, t: f64) -> f64 {
    let n = track.len();
    let s = (t / period).max(0.0);
    let k = (s.floor() as usize).min(n - 1);
    if k + 1 >= n {
        track[n - 1]
    } else {
        let frac = s - k as f64;
        (1.0 - frac) * track[k] + frac * track[k + 1]
    }
}

/// Integrate the axial motion of the ion through a waveform.
///
/// `cascade` models the voltage filter chain; pass `None` for an ideal drive.
/// `x0`, `v0` seed the phase-space state. The integration runs over the
/// waveform duration plus `opts.settle` with the final voltages held.
pub fn integrate_motion(
    layout: &TrapLayout,
    waveform: &Waveform,
    cascade: Option<&FilterCascade>,
    x0: f64,
    v0: f64,
    opts: &IntegrateOptions,
) -> Result<IonTrajectory, DynamicsError> {
    if !(opts.dt > 0.0) {
        return Err(DynamicsError::BadIntegration(format!(
            "dt must be positive, got {:e}",
            opts.dt
        )));
    }
    if opts.output_stride == 0 {
        return Err(DynamicsError::BadIntegration("output stride must be ≥ 1".into()));
    }
    let (span_lo, span_hi) = layout.axial_span();
    if x0 < span_lo || x0 > span_hi {
        return Err(DynamicsError::BadIntegration(format!(
            "x0 = {x0:.4e} m outside the axial span"
        )));
    }

    let wf = match cascade {
        Some(c) => filter_response(waveform, c)?,
        None => waveform.clone(),
    };

    // Step-size check against the initial well frequency, when one exists.
    if let Ok(well) = find_well(layout, &wf.row(0), x0, &WellOptions::default()) {
        let f_axial = well.axial_frequency / (2.0 * std::f64::consts::PI);
        let dt_max = 1.0 / (50.0 * f_axial);
        if opts.dt > dt_max {
            return Err(DynamicsError::BadIntegration(format!(
                "dt = {:e} s exceeds 1/(50 f_axial) = {dt_max:e} s",
                opts.dt
            )));
        }
    }

    let track = track_wells(layout, &wf, x0)?;
    let q = layout.ion_charge();
    let m = layout.ion_mass();
    let total_time = wf.duration() + opts.settle;
    let n_steps = (total_time / opts.dt).ceil() as usize;
    let margin = 0.05 * (span_hi - span_lo);
    // Anti-trapping grace window: one period of the strongest tracked well.
    let c_max = track.curvatures.iter().cloned().fold(0.0f64, f64::max);
    let grace = if c_max > 0.0 {
        2.0 * std::f64::consts::PI / (q / m * c_max).sqrt()
    } else {
        f64::INFINITY
    };

    let mut voltages = vec![0.0f64; wf.n_electrodes()];
    let period = wf.sample_period();

    let est = n_steps / opts.output_stride + 2;
    let mut times = Vec::with_capacity(est);
    let mut positions = Vec::with_capacity(est);
    let mut velocities = Vec::with_capacity(est);
    let mut energies = Vec::with_capacity(est);

    let mut x = x0;
    let mut v = v0;
    let mut t = 0.0;
    lerp_row(&wf, t, &mut voltages);
    let mut accel = {
        let (g, _) = grad_x(layout, &voltages, x)?;
        -q / m * g
    };
    let mut anti_trap_since: Option<f64> = None;

    let mut record =
        |t: f64, x: f64, v: f64, voltages: &[f64]| -> Result<(), DynamicsError> {
            let x_w = track_lerp(&track.xs, period, t);
            let pot_w = track_lerp(&track.potentials, period, t);
            let p = layout.axis_point(x);
            let pot = layout.total_potential(voltages, &p)?;
            let e = (0.5 * m * v * v + q * (pot - pot_w)).max(0.0);
            times.push(t);
            positions.push(x);
            velocities.push(v);
            energies.push(e);
            Ok(())
        };
    record(t, x, v, &voltages)?;

    for step in 1..=n_steps {
        let x_new = x + v * opts.dt + 0.5 * accel * opts.dt * opts.dt;
        let t_new = step as f64 * opts.dt;
        lerp_row(&wf, t_new, &mut voltages);
        let (g_new, curv) = grad_x(layout, &voltages, x_new)?;
        let accel_new = -q / m * g_new;
        let v_new = v + 0.5 * (accel + accel_new) * opts.dt;
        x = x_new;
        v = v_new;
        accel = accel_new;
        t = t_new;

        if x < span_lo - margin || x > span_hi + margin {
            return Err(DynamicsError::IonLost {
                time: t,
                x,
                reason: "left the electrode array".into(),
            });
        }
        if curv < 0.0 {
            let since = *anti_trap_since.get_or_insert(t);
            if t - since > grace {
                return Err(DynamicsError::IonLost {
                    time: t,
                    x,
                    reason: format!(
                        "anti-trapping curvature persisted beyond one period ({grace:.3e} s)"
                    ),
                });
            }
        } else {
            anti_trap_since = None;
        }

        if step % opts.output_stride == 0 || step == n_steps {
            record(t, x, v, &voltages)?;
        }
    }

    let mut traj = IonTrajectory {
        times,
        positions,
        velocities,
        energies,
        final_nbar: f64::NAN,
    };
    if let Ok(well) = find_well(layout, &wf.row(wf.n_samples() - 1), x, &WellOptions::default()) {
        if let Ok(nbar) = motional_excitation(&traj, &well, layout.ion_mass()) {
            traj.final_nbar = nbar;
        }
    }
    Ok(traj)
}

/// Axial gradient and curvature of the full potential at (x, 0, h).
fn grad_x(layout: &TrapLayout, voltages: &[f64], x: f64) -> Result<(f64, f64), DynamicsError> {
    Ok(layout.axial_grad_curv(voltages, x)?)
}

/// Mean phonon occupation from the trailing oscillation of a trajectory.
///
/// Averages the secular energy ½mv² + ½mω²(x − x_w)² over at least three full
/// periods of the final well and divides by ħω. Rejects trajectories whose
/// stored well-relative energy disagrees with the harmonic estimate by more
/// than 10 % (the tail is outside the harmonic region).
pub fn motional_excitation(
    trajectory: &IonTrajectory,
    final_well: &PotentialWell,
    ion_mass: f64,
) -> Result<f64, DynamicsError> {
    let n = trajectory.times.len();
    if n < 8 {
        return Err(DynamicsError::BadIntegration(
            "trajectory too short for excitation analysis".into(),
        ));
    }
    let omega = final_well.axial_frequency;
    let period = 2.0 * std::f64::consts::PI / omega;
    let t_end = trajectory.times[n - 1];
    let window = 3.0 * period;
    let t_start = t_end - window;
    if t_start < trajectory.times[0] {
        return Err(DynamicsError::BadIntegration(format!(
            "trajectory shorter than three periods ({window:.3e} s) of the final well"
        )));
    }
    let i0 = trajectory
        .times
        .partition_point(|&t| t < t_start)
        .min(n - 2);
    let x_w = final_well.position.x;
    let mut harmonic_sum = 0.0;
    let mut stored_sum = 0.0;
    let mut count = 0usize;
    for i in i0..n {
        let dx = trajectory.positions[i] - x_w;
        let v = trajectory.velocities[i];
        harmonic_sum += 0.5 * ion_mass * v * v + 0.5 * ion_mass * omega * omega * dx * dx;
        stored_sum += trajectory.energies[i];
        count += 1;
    }
    let harmonic = harmonic_sum / count as f64;
    let stored = stored_sum / count as f64;
    let scale = harmonic.max(stored).max(1e-3 * HBAR * omega);
    if (harmonic - stored).abs() / scale > 0.10 {
        return Err(DynamicsError::AnharmonicRegion(format!(
            "harmonic energy {harmonic:.3e} J vs potential-derived {stored:.3e} J"
        )));
    }
    Ok(harmonic / (HBAR * omega))
}

/// Convenience: a synthetic harmonic trajectory, used by tests and by the
/// Doppler module's unit checks.
pub fn synthetic_oscillation(
    x_center: f64,
    amplitude: f64,
    omega: f64,
    mass: f64,
    duration: f64,
    dt: f64,
) -> IonTrajectory {
    let n = (duration / dt).ceil() as usize + 1;
    let mut times = Vec::with_capacity(n);
    let mut positions = Vec::with_capacity(n);
    let mut velocities = Vec::with_capacity(n);
    let mut energies = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 * dt;
        times.push(t);
        positions.push(x_center + amplitude * (omega * t).sin());
        velocities.push(amplitude * omega * (omega * t).cos());
        energies.push(0.5 * mass * amplitude * amplitude * omega * omega);
    }
    IonTrajectory {
        times,
        positions,
        velocities,
        energies,
        final_nbar: f64::NAN,
    }
}

