//! Heuristic sigmoid transport trajectory.

use nalgebra::Vector3;

use super::{SynthError, Trajectory, TrajectorySample};

/// Logistic transport profile from `x_start` to `x_end` over `duration`,
/// normalized so the endpoints are met exactly, with a constant axial
/// frequency target and zero field offset.
///
/// `steepness` sets the logistic argument range ±steepness; the default used
/// throughout the crate is 6.
pub fn sigmoid_trajectory(
    x_start: f64,
    x_end: f64,
    duration: f64,
    steepness: f64,
    frequency: f64,
    n_samples: usize,
) -> Result<Trajectory, SynthError> {
    if !(duration > 0.0) {
        return Err(SynthError::BadTrajectory(format!(
            "duration must be positive, got {duration:e} s"
        )));
    }
    if n_samples < 2 {
        return Err(SynthError::BadTrajectory(format!(
            "need at least 2 samples, got {n_samples}"
        )));
    }
    if !(steepness > 0.0) {
        return Err(SynthError::BadTrajectory(format!(
            "steepness must be positive, got {steepness}"
        )));
    }
    let sig = |u: f64| 1.0 / (1.0 + (-u).exp());
    let lo = sig(-steepness);
    let hi = sig(steepness);
    let span = x_end - x_start;
    let samples = (0..n_samples)
        .map(|i| {
            let frac = i as f64 / (n_samples - 1) as f64;
            let u = steepness * (2.0 * frac - 1.0);
            let position = x_start + span * (sig(u) - lo) / (hi - lo);
            TrajectorySample {
                time: frac * duration,
                position,
                frequency,
                field: Vector3::zeros(),
            }
        })
        .collect();
    Trajectory::new(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rejects_bad_arguments() {
        assert!(sigmoid_trajectory(0.0, 1e-4, 0.0, 6.0, 1e7, 10).is_err());
        assert!(sigmoid_trajectory(0.0, 1e-4, -1.0, 6.0, 1e7, 10).is_err());
        assert!(sigmoid_trajectory(0.0, 1e-4, 1e-3, 6.0, 1e7, 1).is_err());
        assert!(sigmoid_trajectory(0.0, 1e-4, 1e-3, 0.0, 1e7, 10).is_err());
    }

    #[test]
    fn constant_when_endpoints_coincide() {
        let t = sigmoid_trajectory(5e-5, 5e-5, 1e-3, 6.0, 1e7, 33).unwrap();
        for s in t.samples() {
            assert_eq!(s.position, 5e-5);
            assert_eq!(s.frequency, 1e7);
        }
    }

    #[test]
    fn endpoints_exact_and_monotone() {
        let t = sigmoid_trajectory(0.0, 375e-6, 200e-6, 6.0, 1.2e7, 513).unwrap();
        let s = t.samples();
        assert_eq!(s[0].position, 0.0);
        assert_relative_eq!(s[s.len() - 1].position, 375e-6, max_relative = 1e-15);
        for w in s.windows(2) {
            assert!(w[1].position >= w[0].position);
        }
    }

    #[test]
    fn midpoint_by_odd_symmetry() {
        // 0 → 375 µm in 200 µs: the midpoint sample sits at 187.5 µm.
        let t = sigmoid_trajectory(0.0, 375e-6, 200e-6, 6.0, 1.2e7, 401).unwrap();
        let mid = t.samples()[200];
        assert_relative_eq!(mid.time, 100e-6, max_relative = 1e-12);
        assert!((mid.position - 187.5e-6).abs() < 1e-12 * 375e-6 + 1e-18);
    }

    #[test]
    fn peak_velocity_matches_logistic_derivative() {
        let (x0, x1, dur, s) = (0.0, 375e-6, 200e-6, 6.0);
        let n = 40_001;
        let t = sigmoid_trajectory(x0, x1, dur, s, 1.2e7, n).unwrap();
        let samples = t.samples();
        let dt = dur / (n - 1) as f64;
        let mut v_max = 0.0f64;
        for w in samples.windows(2) {
            v_max = v_max.max((w[1].position - w[0].position) / dt);
        }
        let sig = |u: f64| 1.0 / (1.0 + (-u).exp());
        let analytic = (x1 - x0) * s / (2.0 * dur * (sig(s) - sig(-s)));
        // Midpoint finite differences of the logistic carry an O(h²) bias.
        assert_relative_eq!(v_max, analytic, max_relative = 1e-6);
    }
}
