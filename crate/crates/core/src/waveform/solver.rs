//! Box-constrained ridge least squares.
//!
//! Each synthesis sample minimizes ‖A v − b‖² + λ‖v‖² (+ μ‖v − v_ref‖² when a
//! smoothness anchor is present) subject to lo ≤ v ≤ hi, by active-set
//! iteration on the normal equations: solve for the free set, clamp
//! violators, release bound variables whose KKT multiplier has the wrong
//! sign. The ridge keeps the reduced system strictly convex, so the loop
//! terminates and ties break toward the minimum-norm solution.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use super::SynthError;

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Weight of field rows.
    pub weight_field: f64,
    /// Weight of axial-curvature rows.
    pub weight_curvature: f64,
    /// Weight of cross-curvature rows.
    pub weight_cross: f64,
    /// Ridge regularization λ on the normalized system.
    pub ridge: f64,
    /// Cap on active-set sweeps.
    pub max_active_set_iter: usize,
    /// Feasibility thresholds used for the infeasibility report:
    /// admissible residual field [V/m] and relative curvature error.
    pub feasibility_field_tol: f64,
    pub feasibility_curvature_rel: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            weight_field: 3.0,
            weight_curvature: 1.0,
            weight_cross: 0.5,
            ridge: 1e-8,
            max_active_set_iter: 200,
            feasibility_field_tol: 5e-2,
            feasibility_curvature_rel: 2e-3,
        }
    }
}

/// Residuals of objective rows that could not be met within bounds, plus the
/// electrodes pinned at a voltage bound.
#[derive(Debug, Clone)]
pub struct InfeasibleReport {
    /// (electrode name, bound value) of active constraints.
    pub active: Vec<(String, f64)>,
    /// (row label, residual in the row's physical unit).
    pub violations: Vec<(String, f64)>,
}

impl fmt::Display for InfeasibleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} active bounds [", self.active.len())?;
        for (i, (name, v)) in self.active.iter().take(6).enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{name}@{v:+.1}V")?;
        }
        write!(f, "], unmet rows: ")?;
        for (i, (label, r)) in self.violations.iter().take(6).enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{label} (residual {r:.3e})")?;
        }
        Ok(())
    }
}

/// One bounded least-squares instance over the DC electrode voltages.
#[derive(Debug, Clone)]
pub struct BoundedLsProblem {
    /// Normalized objective rows.
    pub a: DMatrix<f64>,
    /// Normalized right-hand side.
    pub b: DVector<f64>,
    /// Per-row labels and scale factors back to physical units, used for
    /// diagnostics.
    pub row_labels: Vec<String>,
    pub row_scales: Vec<f64>,
    pub lower: f64,
    pub upper: f64,
}

impl BoundedLsProblem {
    /// Solve with ridge λ and optional anchor term μ‖v − v_ref‖².
    pub fn solve(
        &self,
        ridge: f64,
        anchor: Option<(&DVector<f64>, f64)>,
        max_iter: usize,
    ) -> Result<DVector<f64>, SynthError> {
        let n = self.a.ncols();
        let mut h = self.a.transpose() * &self.a;
        let mut g = self.a.transpose() * &self.b;
        for i in 0..n {
            h[(i, i)] += ridge;
        }
        if let Some((v_ref, mu)) = anchor {
            for i in 0..n {
                h[(i, i)] += mu;
                g[i] += mu * v_ref[i];
            }
        }

        // Active-set loop. state: 0 free, -1 at lower, +1 at upper.
        let mut state = vec![0i8; n];
        let mut v = DVector::zeros(n);
        for _ in 0..max_iter {
            let free: Vec<usize> = (0..n).filter(|&i| state[i] == 0).collect();
            if free.is_empty() {
                // All pinned; check for releases below.
                for i in 0..n {
                    v[i] = if state[i] < 0 { self.lower } else { self.upper };
                }
            } else {
                let nf = free.len();
                let mut hf = DMatrix::zeros(nf, nf);
                let mut gf = DVector::zeros(nf);
                for (r, &i) in free.iter().enumerate() {
                    let mut gi = g[i];
                    for j in 0..n {
                        if state[j] != 0 {
                            let bound = if state[j] < 0 { self.lower } else { self.upper };
                            gi -= h[(i, j)] * bound;
                        }
                    }
                    gf[r] = gi;
                    for (c, &j) in free.iter().enumerate() {
                        hf[(r, c)] = h[(i, j)];
                    }
                }
                let ch = hf.clone().cholesky().ok_or_else(|| {
                    SynthError::BadObjective("normal matrix not positive definite".into())
                })?;
                let mut sol = ch.solve(&gf);
                // Iterative refinement with compensated residuals: the ridge
                // keeps the system near-singular and downstream symmetry
                // checks resolve nanovolts, which a plain f64 residual cannot.
                for _ in 0..2 {
                    let resid = compensated_residual(&hf, &sol, &gf);
                    sol += ch.solve(&resid);
                }
                for (r, &i) in free.iter().enumerate() {
                    v[i] = sol[r];
                }
                for i in 0..n {
                    if state[i] != 0 {
                        v[i] = if state[i] < 0 { self.lower } else { self.upper };
                    }
                }
                // Pin the worst violator, if any.
                let mut worst: Option<(usize, f64, i8)> = None;
                for &i in &free {
                    let over = if v[i] < self.lower {
                        Some((self.lower - v[i], -1))
                    } else if v[i] > self.upper {
                        Some((v[i] - self.upper, 1))
                    } else {
                        None
                    };
                    if let Some((amount, side)) = over {
                        if worst.map_or(true, |(_, a, _)| amount > a) {
                            worst = Some((i, amount, side));
                        }
                    }
                }
                if let Some((i, _, side)) = worst {
                    state[i] = side;
                    continue;
                }
            }
            // KKT check: release pinned variables pulled inward.
            let grad = &h * &v - &g;
            let mut released = false;
            for i in 0..n {
                // Objective gradient must point outward at an active bound.
                if state[i] < 0 && grad[i] < -1e-12 {
                    state[i] = 0;
                    released = true;
                } else if state[i] > 0 && grad[i] > 1e-12 {
                    state[i] = 0;
                    released = true;
                }
            }
            if !released {
                return Ok(v);
            }
        }
        Err(SynthError::BadObjective(
            "active-set iteration did not settle".into(),
        ))
    }

    /// Residuals of each row in physical units for a voltage vector.
    pub fn physical_residuals(&self, v: &DVector<f64>) -> Vec<f64> {
        let r = &self.a * v - &self.b;
        r.iter()
            .zip(&self.row_scales)
            .map(|(ri, s)| ri / s)
            .collect()
    }
}
