//! Two-zone Ramsey protocol simulation on the optical or hybrid encoding.
//!
//! The two π/2 pulses are driven by beams whose relative optical phase Δ is
//! either stable or random. The optical encoding inherits Δ directly; the
//! hybrid encoding maps through the memory qubit between pulses and cancels
//! it. The analyzer convention puts the second pulse at phase φ + π so the
//! ideal fringe is P(↓)(φ) = (1 + cos φ)/2.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use super::rotation::{hybrid_memory_rotation, rotation, StatePair};
use super::{QubitError, ThreeLevelState, DOWN};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RamseyMode {
    /// Both π/2 pulses act directly on the optical qubit.
    Optical,
    /// Pulses are executed as hybrid memory rotations (laser-phase immune).
    Hybrid,
}

/// Behavior of the relative optical phase between the two zones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhaseModel {
    /// Stable relative phase.
    Fixed(f64),
    /// Redrawn uniformly for every shot (fast fluctuations).
    PerShot,
    /// Redrawn once per scan point (slow drift).
    PerPoint,
}

#[derive(Debug, Clone)]
pub struct RamseyScan {
    pub phases: Vec<f64>,
    /// Mean measured |↓⟩ population per phase point.
    pub p_down: Vec<f64>,
    /// Binomial standard error per point.
    pub sigma: Vec<f64>,
}

/// Ideal single-shot probability of ending in |↓⟩ for analyzer phase φ and
/// relative beam phase Δ.
pub fn ramsey_probability(mode: RamseyMode, phi: f64, delta: f64, phi_laser: f64) -> f64 {
    let half_pi = std::f64::consts::FRAC_PI_2;
    let pi = std::f64::consts::PI;
    let state = ThreeLevelState::down();
    let final_state = match mode {
        RamseyMode::Optical => {
            let first = rotation(StatePair::DownOne, half_pi, phi_laser);
            let second = rotation(StatePair::DownOne, half_pi, phi_laser + delta + phi + pi);
            second.apply(&first.apply(&state))
        }
        RamseyMode::Hybrid => {
            let first = hybrid_memory_rotation(half_pi, 0.0, phi_laser);
            let second = hybrid_memory_rotation(half_pi, phi + pi, phi_laser + delta);
            second.apply(&first.apply(&state))
        }
    };
    final_state.population(DOWN)
}

/// Simulate a Ramsey phase scan with projective detection.
pub fn ramsey_scan(
    mode: RamseyMode,
    phases: &[f64],
    phase_model: PhaseModel,
    shots: usize,
    seed: u64,
) -> Result<RamseyScan, QubitError> {
    if shots == 0 {
        return Err(QubitError::BadInput("shots must be ≥ 1".into()));
    }
    if phases.is_empty() {
        return Err(QubitError::BadInput("no phase points".into()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let tau = 2.0 * std::f64::consts::PI;
    let mut p_down = Vec::with_capacity(phases.len());
    let mut sigma = Vec::with_capacity(phases.len());
    for &phi in phases {
        let point_delta = match phase_model {
            PhaseModel::Fixed(d) => d,
            PhaseModel::PerPoint => rng.gen_range(0.0..tau),
            PhaseModel::PerShot => 0.0, // drawn per shot below
        };
        let phi_laser = rng.gen_range(0.0..tau);
        let mut hits = 0usize;
        for _ in 0..shots {
            let delta = match phase_model {
                PhaseModel::PerShot => rng.gen_range(0.0..tau),
                _ => point_delta,
            };
            let p = ramsey_probability(mode, phi, delta, phi_laser);
            if rng.gen::<f64>() < p {
                hits += 1;
            }
        }
        let mean = hits as f64 / shots as f64;
        p_down.push(mean);
        sigma.push((mean * (1.0 - mean) / shots as f64).sqrt().max(1.0 / shots as f64));
    }
    Ok(RamseyScan {
        phases: phases.to_vec(),
        p_down,
        sigma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::fringe_contrast;
    use approx::assert_relative_eq;

    fn phase_grid(n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| i as f64 / n as f64 * 2.0 * std::f64::consts::PI)
            .collect()
    }

    #[test]
    fn hybrid_fringe_is_exact_for_any_laser_phase() {
        for (k, &phi) in phase_grid(17).iter().enumerate() {
            let delta = 1.3 * k as f64;
            let phi_l = -2.0 + 0.7 * k as f64;
            let p = ramsey_probability(RamseyMode::Hybrid, phi, delta, phi_l);
            assert_relative_eq!(p, (1.0 + phi.cos()) / 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn optical_fringe_with_stable_phase_matches_hybrid() {
        for &phi in &phase_grid(17) {
            let p = ramsey_probability(RamseyMode::Optical, phi, 0.0, 0.4);
            assert_relative_eq!(p, (1.0 + phi.cos()) / 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn optical_random_phase_scrambles_but_reaches_extremes() {
        let phases = phase_grid(50);
        let scan = ramsey_scan(RamseyMode::Optical, &phases, PhaseModel::PerPoint, 500, 42)
            .unwrap();
        let max = scan.p_down.iter().cloned().fold(0.0, f64::max);
        let min = scan.p_down.iter().cloned().fold(1.0, f64::min);
        assert!(max > 0.9, "max {max}");
        assert!(min < 0.1, "min {min}");
    }

    #[test]
    fn per_shot_random_phase_flattens_the_mean_signal() {
        let phases = phase_grid(50);
        let scan =
            ramsey_scan(RamseyMode::Optical, &phases, PhaseModel::PerShot, 500, 7).unwrap();
        let contrast = fringe_contrast(&scan.phases, &scan.p_down).unwrap();
        assert!(contrast < 0.15, "contrast {contrast}");
        for &p in &scan.p_down {
            assert!((p - 0.5).abs() < 0.2);
        }
    }

    #[test]
    fn hybrid_scan_contrast_is_unity_within_shot_noise() {
        let phases = phase_grid(50);
        let scan =
            ramsey_scan(RamseyMode::Hybrid, &phases, PhaseModel::PerShot, 500, 3).unwrap();
        let contrast = fringe_contrast(&scan.phases, &scan.p_down).unwrap();
        assert!((contrast - 1.0).abs() < 0.03, "contrast {contrast}");
    }

    #[test]
    fn rejects_zero_shots() {
        assert!(ramsey_scan(RamseyMode::Hybrid, &[0.0], PhaseModel::PerShot, 0, 1).is_err());
    }
}
