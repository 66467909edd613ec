//! Pairwise rotations, the laser-phase-immune hybrid memory rotation, and
//! BB1 composite pulses.

use nalgebra::Matrix3;
use num_complex::Complex64;

use super::{ThreeLevelUnitary, DOWN, ONE, UP};

/// Driven pair of basis states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatePair {
    /// Optical qubit |↓⟩ ↔ |1⟩.
    DownOne,
    /// Mapping transition |1⟩ ↔ |↑⟩.
    OneUp,
    /// Ground-state memory pair |↓⟩ ↔ |↑⟩.
    DownUp,
}

impl StatePair {
    /// Canonical (low, high) basis indices of the pair.
    fn indices(self) -> (usize, usize) {
        match self {
            StatePair::DownOne => (DOWN, ONE),
            StatePair::OneUp => (UP, ONE),
            StatePair::DownUp => (DOWN, UP),
        }
    }
}

/// Rotation of pulse area θ and phase φ on one pair of states, identity on
/// the third:
///
/// ```text
/// ( cos θ/2              i e^{−iφ} sin θ/2 )
/// ( i e^{iφ} sin θ/2     cos θ/2           )
/// ```
///
/// embedded on the pair's (low, high) basis indices.
pub fn rotation(pair: StatePair, theta: f64, phi: f64) -> ThreeLevelUnitary {
    let (a, b) = pair.indices();
    let c = Complex64::new((theta / 2.0).cos(), 0.0);
    let s = (theta / 2.0).sin();
    let i = Complex64::new(0.0, 1.0);
    let mut m = Matrix3::<Complex64>::identity();
    m[(a, a)] = c;
    m[(b, b)] = c;
    m[(a, b)] = i * Complex64::from_polar(s, -phi);
    m[(b, a)] = i * Complex64::from_polar(s, phi);
    ThreeLevelUnitary(m)
}

/// Arbitrary memory-qubit rotation built from optical pulses:
/// a π mapping |↑⟩→|1⟩, the optical rotation, and the inverse mapping.
/// The laser phase φ_L cancels; the result is the block matrix
///
/// ```text
/// ( cos θ/2            i e^{−iφ} sin θ/2   0 )
/// ( i e^{iφ} sin θ/2   cos θ/2             0 )
/// ( 0                  0                   1 )
/// ```
///
/// The deterministic AOM phase of the middle pulse is offset by π/2 relative
/// to φ so that the composite equals this printed form exactly.
pub fn hybrid_memory_rotation(theta: f64, phi: f64, phi_laser: f64) -> ThreeLevelUnitary {
    let map_in = rotation(StatePair::OneUp, std::f64::consts::PI, phi_laser);
    let optical = rotation(
        StatePair::DownOne,
        theta,
        phi_laser + phi + std::f64::consts::FRAC_PI_2,
    );
    let map_out = rotation(
        StatePair::OneUp,
        std::f64::consts::PI,
        phi_laser + std::f64::consts::PI,
    );
    &(&map_out * &optical) * &map_in
}

/// The ideal memory-block form the hybrid composite must reproduce.
pub(crate) fn memory_block(theta: f64, phi: f64) -> ThreeLevelUnitary {
    let c = Complex64::new((theta / 2.0).cos(), 0.0);
    let s = (theta / 2.0).sin();
    let i = Complex64::new(0.0, 1.0);
    let mut m = Matrix3::<Complex64>::identity();
    m[(DOWN, DOWN)] = c;
    m[(UP, UP)] = c;
    m[(DOWN, UP)] = i * Complex64::from_polar(s, -phi);
    m[(UP, DOWN)] = i * Complex64::from_polar(s, phi);
    ThreeLevelUnitary(m)
}

/// Infidelity of a plain π pulse on the optical qubit under a fractional
/// pulse-area error ε: 1 − sin²(π(1+ε)/2) = sin²(πε/2).
pub fn plain_pi_infidelity(epsilon: f64) -> f64 {
    let u = rotation(StatePair::DownOne, std::f64::consts::PI * (1.0 + epsilon), 0.0);
    1.0 - u.0[(ONE, DOWN)].norm_sqr()
}

/// Infidelity of the BB1 composite π pulse under a fractional pulse-area
/// error ε applied to every pulse: π(0), π(φ₁), 2π(3φ₁), π(φ₁) with
/// φ₁ = arccos(−1/4). The leading error scales as ε⁶.
pub fn bb1_pi_infidelity(epsilon: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let phi1 = (-0.25f64).acos();
    let scale = 1.0 + epsilon;
    let base = rotation(StatePair::DownOne, pi * scale, 0.0);
    let c1 = rotation(StatePair::DownOne, pi * scale, phi1);
    let c2 = rotation(StatePair::DownOne, 2.0 * pi * scale, 3.0 * phi1);
    let c3 = rotation(StatePair::DownOne, pi * scale, phi1);
    let u = &(&(&c3 * &c2) * &c1) * &base;
    1.0 - u.0[(ONE, DOWN)].norm_sqr()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn mapping_pulse_matches_printed_matrix() {
        // U_{1↑}(π, φ_L) = (1, 0, 0; 0, 0, ie^{−iφ_L}; 0, ie^{iφ_L}, 0)
        let phi_l = 0.7341;
        let u = rotation(StatePair::OneUp, std::f64::consts::PI, phi_l);
        let i = Complex64::new(0.0, 1.0);
        let expect = [
            [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)],
            [
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                i * Complex64::from_polar(1.0, -phi_l),
            ],
            [
                Complex64::new(0.0, 0.0),
                i * Complex64::from_polar(1.0, phi_l),
                Complex64::new(0.0, 0.0),
            ],
        ];
        for r in 0..3 {
            for c in 0..3 {
                assert!((u.0[(r, c)] - expect[r][c]).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn zero_area_rotation_is_identity() {
        for pair in [StatePair::DownOne, StatePair::OneUp, StatePair::DownUp] {
            let u = rotation(pair, 0.0, 1.234);
            assert!(u.distance(&ThreeLevelUnitary::identity()) < 1e-15);
        }
    }

    #[test]
    fn rotation_composed_with_inverse_is_identity() {
        let u = rotation(StatePair::DownOne, 1.1, 0.4);
        let v = rotation(StatePair::DownOne, -1.1, 0.4);
        assert!((&u * &v).distance(&ThreeLevelUnitary::identity()) < 1e-14);
    }

    #[test]
    fn rotations_are_unitary() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for _ in 0..50 {
            let theta = rng.gen_range(-8.0..8.0);
            let phi = rng.gen_range(-8.0..8.0);
            for pair in [StatePair::DownOne, StatePair::OneUp, StatePair::DownUp] {
                rotation(pair, theta, phi).verify().unwrap();
            }
        }
    }

    #[test]
    fn hybrid_rotation_matches_block_form_and_ignores_laser_phase() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for _ in 0..100 {
            let theta = rng.gen_range(0.0..2.0 * std::f64::consts::PI);
            let phi = rng.gen_range(0.0..2.0 * std::f64::consts::PI);
            let phi_l = rng.gen_range(-10.0..10.0);
            let u = hybrid_memory_rotation(theta, phi, phi_l);
            let block = memory_block(theta, phi);
            assert!(
                u.distance(&block) < 1e-13,
                "distance {:e}",
                u.distance(&block)
            );
        }
        // φ_L sweep at fixed (θ, φ): all matrices coincide.
        let (theta, phi) = (1.3, 0.2);
        let reference = hybrid_memory_rotation(theta, phi, 0.0);
        let mut max_d = 0.0f64;
        for _ in 0..100 {
            let u = hybrid_memory_rotation(theta, phi, rng.gen_range(-30.0..30.0));
            max_d = max_d.max(u.distance(&reference));
        }
        assert!(max_d < 1e-13, "max pairwise distance {max_d:e}");
    }

    #[test]
    fn hybrid_theta_pi_is_memory_flip_and_theta_zero_identity() {
        let u = hybrid_memory_rotation(std::f64::consts::PI, 0.0, 2.2);
        // Memory-qubit X within the i global factor on the block.
        assert!(u.0[(super::DOWN, super::DOWN)].norm() < 1e-14);
        assert_relative_eq!(u.0[(super::UP, super::DOWN)].im, 1.0, epsilon = 1e-13);
        assert!((u.0[(super::ONE, super::ONE)] - Complex64::new(1.0, 0.0)).norm() < 1e-14);

        let id = hybrid_memory_rotation(0.0, 0.9, -4.0);
        assert!(id.distance(&ThreeLevelUnitary::identity()) < 1e-13);
    }

    #[test]
    fn hybrid_rotation_preserves_the_spectator_level() {
        // Block diagonality: |1⟩ amplitude untouched for memory-subspace input.
        let u = hybrid_memory_rotation(0.77, 1.9, 5.0);
        for col in [super::DOWN, super::UP] {
            assert!(u.0[(super::ONE, col)].norm() < 1e-14);
        }
        assert!((u.0[(super::ONE, super::ONE)] - Complex64::new(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn plain_pi_error_has_the_analytic_leading_order() {
        assert!(plain_pi_infidelity(0.0) < 1e-14);
        let eps = 0.05;
        let infid = plain_pi_infidelity(eps);
        let analytic = (std::f64::consts::PI * eps / 2.0).sin().powi(2);
        assert_relative_eq!(infid, analytic, max_relative = 1e-12);
        let leading = (std::f64::consts::PI * eps).powi(2) / 4.0;
        assert!((infid - leading).abs() / leading < 0.05);
    }

    #[test]
    fn bb1_is_flat_at_zero_error() {
        assert!(bb1_pi_infidelity(0.0) < 1e-14);
        // At 5 % area error BB1 beats the plain pulse by orders of magnitude.
        assert!(bb1_pi_infidelity(0.05) < 1e-4 * plain_pi_infidelity(0.05));
    }

    #[test]
    fn bb1_slope_is_six_plain_slope_is_two() {
        let slope = |f: fn(f64) -> f64| {
            let eps: Vec<f64> = (0..10)
                .map(|i| 0.01 * (10.0f64).powf(i as f64 / 9.0))
                .collect();
            let pts: Vec<(f64, f64)> = eps.iter().map(|&e| (e.ln(), f(e).ln())).collect();
            let n = pts.len() as f64;
            let sx: f64 = pts.iter().map(|p| p.0).sum();
            let sy: f64 = pts.iter().map(|p| p.1).sum();
            let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
            let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
            (n * sxy - sx * sy) / (n * sxx - sx * sx)
        };
        let s_bb1 = slope(bb1_pi_infidelity);
        let s_plain = slope(plain_pi_infidelity);
        assert!((s_bb1 - 6.0).abs() < 0.3, "BB1 slope {s_bb1}");
        assert!((s_plain - 2.0).abs() < 0.1, "plain slope {s_plain}");
    }
}
