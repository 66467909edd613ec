//! Potential-well location and characterization.
//!
//! A damped 1-D Newton search on the axial gradient locates the well along
//! the trap axis; a short 3-D Newton refinement with the full gradient then
//! settles the transverse equilibrium against the pseudopotential.

use nalgebra::{Matrix3, Vector2, Vector3};

use super::{TrapError, TrapLayout};

/// Located minimum of the total potential.
#[derive(Debug, Clone)]
pub struct PotentialWell {
    /// Equilibrium position [m].
    pub position: Vector3<f64>,
    /// Secular frequency of the mode closest to the trap axis [rad/s].
    pub axial_frequency: f64,
    /// Electrical Hessian (DC + window bias) at `position` [V/m²].
    pub hessian: Matrix3<f64>,
    /// Electric field E = −∇Φ of the DC potential at `position` [V/m].
    pub residual_field: Vector3<f64>,
    /// Rotation of the radial mode axes in the y–z plane [rad].
    pub radial_mode_angle: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct WellOptions {
    pub max_iter: usize,
    /// Convergence threshold on the Newton step [m].
    pub position_tol: f64,
    /// Damping clamp on a single Newton step [m].
    pub max_step: f64,
}

impl Default for WellOptions {
    fn default() -> Self {
        Self {
            max_iter: 50,
            position_tol: 1e-12,
            max_step: 25e-6,
        }
    }
}

/// Damped 1-D Newton iteration on an axial gradient/curvature oracle.
///
/// Returns the converged position. Exposed to the crate so the solver audit
/// and tests can drive it with synthetic potentials.
pub(crate) fn newton_axial(
    mut grad_curv: impl FnMut(f64) -> Result<(f64, f64), TrapError>,
    guess: f64,
    opts: &WellOptions,
) -> Result<f64, TrapError> {
    let mut x = guess;
    for _ in 0..opts.max_iter {
        let (g, c) = grad_curv(x)?;
        if c.abs() < f64::MIN_POSITIVE.sqrt() {
            return Err(TrapError::NoWellFound {
                last_x: x,
                reason: "vanishing axial curvature (no confinement)".into(),
            });
        }
        let mut dx = -g / c;
        if dx.abs() > opts.max_step {
            dx = opts.max_step.copysign(dx);
        }
        x += dx;
        if dx.abs() < opts.position_tol {
            if c <= 0.0 {
                return Err(TrapError::NoWellFound {
                    last_x: x,
                    reason: format!("converged to a saddle (curvature {c:.3e} V/m²)"),
                });
            }
            return Ok(x);
        }
    }
    Err(TrapError::NoWellFound {
        last_x: x,
        reason: format!("Newton did not converge in {} iterations", opts.max_iter),
    })
}

/// Locate the potential well of `layout` under `dc_voltages`, seeded at axial
/// position `guess`.
pub fn find_well(
    layout: &TrapLayout,
    dc_voltages: &[f64],
    guess: f64,
    opts: &WellOptions,
) -> Result<PotentialWell, TrapError> {
    let (lo, hi) = layout.axial_span();
    if !(guess >= lo && guess <= hi) {
        return Err(TrapError::GuessOutOfSpan { guess, lo, hi });
    }

    // Stage 1: axial search at the nominal ion height.
    let x_axial = newton_axial(
        |x| layout.axial_grad_curv(dc_voltages, x),
        guess,
        opts,
    )?;

    // Stage 2: full 3-D refinement against DC + pseudopotential. Newton with
    // step clamping and gradient-norm backtracking; strong DC patterns can
    // displace the transverse equilibrium by tens of µm.
    let mut pos = layout.axis_point(x_axial);
    let mut converged = false;
    let (mut g, mut h) = layout.total_grad_hess(dc_voltages, &pos)?;
    for _ in 0..opts.max_iter {
        let step = match h.try_inverse() {
            Some(hinv) => -(hinv * g),
            None => {
                return Err(TrapError::NoWellFound {
                    last_x: pos.x,
                    reason: "singular Hessian in 3-D refinement".into(),
                })
            }
        };
        let norm = step.norm();
        let mut step = if norm > opts.max_step {
            step * (opts.max_step / norm)
        } else {
            step
        };
        let g_norm = g.norm();
        let mut accepted = false;
        for _ in 0..12 {
            let trial = pos + step;
            if trial.z > 0.0 {
                let (gt, ht) = layout.total_grad_hess(dc_voltages, &trial)?;
                if gt.norm() <= g_norm || step.norm() < opts.position_tol {
                    pos = trial;
                    g = gt;
                    h = ht;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        if step.norm() < opts.position_tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(TrapError::NoWellFound {
            last_x: pos.x,
            reason: "3-D refinement did not converge".into(),
        });
    }
    if pos.z <= 0.0 {
        return Err(TrapError::NoWellFound {
            last_x: pos.x,
            reason: "refinement left the valid half space".into(),
        });
    }

    let (dc_grad, dc_hess) = layout.dc_grad_hess(dc_voltages, &pos)?;
    let q_over_m = layout.ion_charge() / layout.ion_mass();
    let mech = dc_hess * q_over_m
        + Matrix3::from_diagonal(&Vector3::new(
            0.0,
            layout.pseudo_curvatures()[0].powi(2),
            layout.pseudo_curvatures()[1].powi(2),
        ));

    let eig = nalgebra::SymmetricEigen::new(mech);
    // Mode closest to the trap axis.
    let axial_idx = (0..3)
        .max_by(|&a, &b| {
            eig.eigenvectors[(0, a)]
                .abs()
                .total_cmp(&eig.eigenvectors[(0, b)].abs())
        })
        .unwrap();
    let lambda = eig.eigenvalues[axial_idx];
    if lambda <= 0.0 {
        return Err(TrapError::NoWellFound {
            last_x: pos.x,
            reason: format!("axial mode is anti-trapping (λ = {lambda:.3e} s⁻²)"),
        });
    }
    if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
        return Err(TrapError::NoWellFound {
            last_x: pos.x,
            reason: "total curvature is not positive definite".into(),
        });
    }

    // Rotation of the radial normal modes in the y–z plane.
    let myz = Vector2::new(mech[(1, 1)] - mech[(2, 2)], 2.0 * mech[(1, 2)]);
    let radial_mode_angle = 0.5 * myz.y.atan2(myz.x);

    Ok(PotentialWell {
        position: pos,
        axial_frequency: lambda.sqrt(),
        hessian: dc_hess,
        residual_field: -dc_grad,
        radial_mode_angle,
    })
}
