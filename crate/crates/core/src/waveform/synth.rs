//! Static voltage-set solving and transport waveform synthesis.
//!
//! Every target well is linearized at its position: field components, axial
//! curvature, and cross-curvature terms become rows of a bounded
//! least-squares problem over the DC electrode voltages. Fixed window biases
//! are subtracted from the row targets. Solutions are never trusted without
//! the audit: an independent `find_well` re-derivation per objective (or per
//! waveform sample).

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Vector3};
use rayon::prelude::*;

use super::solver::{BoundedLsProblem, InfeasibleReport, SolveOptions};
use super::{HardwareLimits, SynthError, Trajectory, Waveform, ZoneObjective};
use crate::trap::{electrode_basis, find_well, ElectrodeKind, TrapLayout, WellOptions};

/// Axial confinement goal of a zone objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CurvatureGoal {
    /// Target axial frequency [rad/s].
    Frequency(f64),
    /// The solved voltages contribute no axial curvature at the zone.
    Null,
}

#[derive(Debug, Clone)]
pub struct SynthOptions {
    pub solver: SolveOptions,
    /// Weight of the temporal smoothness penalty ‖v_t − v_{t−1}‖².
    pub smoothness: f64,
    /// Enforce slew limits on the synthesized waveform.
    pub enforce_slew: bool,
    /// Re-derive each well with `find_well` and verify the tolerances below.
    pub audit: bool,
    pub audit_position_tol: f64,
    pub audit_frequency_rel: f64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            solver: SolveOptions::default(),
            smoothness: 1e-3,
            enforce_slew: true,
            audit: true,
            audit_position_tol: 1e-9,
            audit_frequency_rel: 5e-3,
        }
    }
}

/// Result of auditing a synthesized waveform sample by sample.
#[derive(Debug, Clone)]
pub struct AuditReport {
    pub samples_checked: usize,
    pub max_position_error: f64,
    pub max_frequency_rel_error: f64,
}

/// Copy of the layout treating the named windows as fixed-voltage sources.
pub fn apply_window_compensation(
    layout: &TrapLayout,
    window_voltages: &BTreeMap<String, f64>,
) -> Result<TrapLayout, SynthError> {
    Ok(layout.with_window_bias(window_voltages)?)
}

/// Rows of the linearized well objective at one axial position.
struct ObjectiveRows {
    a: DMatrix<f64>,
    b: DVector<f64>,
    labels: Vec<String>,
    scales: Vec<f64>,
}

fn assemble_rows(
    layout: &TrapLayout,
    label: &str,
    x: f64,
    goal: CurvatureGoal,
    field: Vector3<f64>,
    null_transverse: bool,
    opts: &SolveOptions,
) -> Result<ObjectiveRows, SynthError> {
    let p = layout.axis_point(x);
    let basis = electrode_basis(layout, &[p])?;
    let names = basis.electrode_names().to_vec();
    let electrodes = layout.electrodes();
    let dc_idx: Vec<usize> = (0..names.len())
        .filter(|&i| electrodes[i].kind() == ElectrodeKind::Dc)
        .collect();
    let n = dc_idx.len();

    // Fixed window contribution at the point.
    let mut win_grad = Vector3::zeros();
    let mut win_hess = nalgebra::Matrix3::zeros();
    for (i, e) in electrodes.iter().enumerate() {
        if e.kind() == ElectrodeKind::Window {
            if let Some(&v) = layout.window_bias().get(e.name()) {
                let s = basis.sample(0, i);
                win_grad += v * s.grad;
                win_hess += v * s.hess;
            }
        }
    }

    let q_over_m = layout.ion_charge() / layout.ion_mass();
    let curvature_target = match goal {
        CurvatureGoal::Frequency(w) => {
            if !(w > 0.0) {
                return Err(SynthError::BadObjective(format!(
                    "frequency target must be positive, got {w:e}"
                )));
            }
            w * w / q_over_m
        }
        CurvatureGoal::Null => 0.0,
    };

    // Rows are assembled in physical units, then equilibrated: each row is
    // scaled to norm = weight so the ridge acts uniformly and the physical
    // residual of row i is (scaled residual)/scale_i.
    let mut rows: Vec<(String, f64, Vec<f64>, f64)> = Vec::new();
    let mut push_row = |label: String, weight: f64, coeff: Vec<f64>, rhs: f64| {
        let norm = coeff.iter().map(|c| c * c).sum::<f64>().sqrt();
        let scale = weight / norm.max(1e-300);
        let scaled: Vec<f64> = coeff.iter().map(|c| c * scale).collect();
        rows.push((label, scale, scaled, rhs * scale));
    };
    // Field rows: Σ v ∂φ = −E_target − window gradient.
    let field_axes: &[usize] = if null_transverse { &[0, 1, 2] } else { &[0] };
    for &axis in field_axes {
        let coeff: Vec<f64> = dc_idx
            .iter()
            .map(|&i| basis.sample(0, i).grad[axis])
            .collect();
        let rhs = -field[axis] - win_grad[axis];
        push_row(
            format!("{label}:field_{}", ["x", "y", "z"][axis]),
            opts.weight_field,
            coeff,
            rhs,
        );
    }
    // Axial curvature row.
    push_row(
        format!("{label}:curv_xx"),
        opts.weight_curvature,
        dc_idx
            .iter()
            .map(|&i| basis.sample(0, i).hess[(0, 0)])
            .collect(),
        curvature_target - win_hess[(0, 0)],
    );
    // Cross-curvature rows keep the axial mode aligned with the axis.
    for (name, r, c) in [("curv_xy", 0usize, 1usize), ("curv_xz", 0, 2), ("curv_yz", 1, 2)] {
        push_row(
            format!("{label}:{name}"),
            opts.weight_cross,
            dc_idx
                .iter()
                .map(|&i| basis.sample(0, i).hess[(r, c)])
                .collect(),
            -win_hess[(r, c)],
        );
    }

    let m = rows.len();
    let mut a = DMatrix::zeros(m, n);
    let mut b = DVector::zeros(m);
    let mut labels = Vec::with_capacity(m);
    let mut scales = Vec::with_capacity(m);
    for (i, (lab, scale, coeff, rhs)) in rows.into_iter().enumerate() {
        for (j, c) in coeff.into_iter().enumerate() {
            a[(i, j)] = c;
        }
        b[i] = rhs;
        labels.push(lab);
        scales.push(scale);
    }
    Ok(ObjectiveRows {
        a,
        b,
        labels,
        scales,
    })
}

fn stack_rows(parts: Vec<ObjectiveRows>, lower: f64, upper: f64) -> BoundedLsProblem {
    let n = parts[0].a.ncols();
    let m: usize = parts.iter().map(|p| p.a.nrows()).sum();
    let mut a = DMatrix::zeros(m, n);
    let mut b = DVector::zeros(m);
    let mut labels = Vec::with_capacity(m);
    let mut scales = Vec::with_capacity(m);
    let mut r0 = 0;
    for p in parts {
        let rows = p.a.nrows();
        a.view_mut((r0, 0), (rows, n)).copy_from(&p.a);
        b.rows_mut(r0, rows).copy_from(&p.b);
        labels.extend(p.labels);
        scales.extend(p.scales);
        r0 += rows;
    }
    BoundedLsProblem {
        a,
        b,
        row_labels: labels,
        row_scales: scales,
        lower,
        upper,
    }
}

fn check_feasibility(
    problem: &BoundedLsProblem,
    v: &DVector<f64>,
    names: &[String],
    opts: &SolveOptions,
    curvature_scale: f64,
) -> Result<(), SynthError> {
    let residuals = problem.physical_residuals(v);
    let mut violations = Vec::new();
    for ((label, r), scale) in problem
        .row_labels
        .iter()
        .zip(&residuals)
        .zip(&problem.row_scales)
    {
        let _ = scale;
        let bad = if label.contains("field") {
            r.abs() > opts.feasibility_field_tol
        } else {
            r.abs() > opts.feasibility_curvature_rel * curvature_scale
        };
        if bad {
            violations.push((label.clone(), *r));
        }
    }
    if violations.is_empty() {
        return Ok(());
    }
    let tol = 1e-9 * (problem.upper - problem.lower);
    let active = (0..v.len())
        .filter_map(|i| {
            if (v[i] - problem.lower).abs() < tol {
                Some((names[i].clone(), problem.lower))
            } else if (v[i] - problem.upper).abs() < tol {
                Some((names[i].clone(), problem.upper))
            } else {
                None
            }
        })
        .collect();
    Err(SynthError::Infeasible {
        report: InfeasibleReport { active, violations },
    })
}

fn objective_position(layout: &TrapLayout, obj: &ZoneObjective) -> Result<f64, SynthError> {
    match obj.well_position {
        Some(x) => Ok(x),
        None => Ok(layout.zone(&obj.zone)?.x),
    }
}

/// Reference curvature for feasibility and audit scaling: the largest
/// frequency target among the objectives.
fn curvature_scale(layout: &TrapLayout, objectives: &[ZoneObjective]) -> f64 {
    let q_over_m = layout.ion_charge() / layout.ion_mass();
    objectives
        .iter()
        .filter_map(|o| match o.curvature {
            CurvatureGoal::Frequency(w) => Some(w * w / q_over_m),
            CurvatureGoal::Null => None,
        })
        .fold(0.0f64, f64::max)
        .max(1.0)
}

/// Solve a static multi-zone voltage set.
///
/// Each objective contributes linearized rows at its zone position. The
/// audit (on by default) re-derives every targeted well with `find_well` and
/// verifies position within 1 nm and frequency within 0.1 %; null zones are
/// checked for residual field below 10 mV/m and curvature contribution below
/// 1 % of the strongest active zone.
pub fn solve_static(
    layout: &TrapLayout,
    objectives: &[ZoneObjective],
    limits: &HardwareLimits,
    opts: &SynthOptions,
) -> Result<Vec<f64>, SynthError> {
    limits.validate()?;
    if objectives.is_empty() {
        return Err(SynthError::BadObjective("no objectives".into()));
    }
    for (i, a) in objectives.iter().enumerate() {
        for b in objectives.iter().skip(i + 1) {
            if a.zone == b.zone {
                return Err(SynthError::BadObjective(format!(
                    "two objectives target zone `{}`",
                    a.zone
                )));
            }
        }
    }
    let mut parts = Vec::new();
    for obj in objectives {
        let x = objective_position(layout, obj)?;
        parts.push(assemble_rows(
            layout,
            &obj.zone,
            x,
            obj.curvature,
            Vector3::new(obj.axial_field, 0.0, 0.0),
            obj.null_transverse_field,
            &opts.solver,
        )?);
    }
    let (lo, hi) = limits.electrode_bounds();
    let problem = stack_rows(parts, lo, hi);
    let v = problem.solve(opts.solver.ridge, None, opts.solver.max_active_set_iter)?;
    let names = layout.dc_names();
    check_feasibility(
        &problem,
        &v,
        &names,
        &opts.solver,
        curvature_scale(layout, objectives),
    )?;
    let voltages: Vec<f64> = v.iter().cloned().collect();
    if opts.audit {
        audit_static(layout, &voltages, objectives, opts)?;
    }
    Ok(voltages)
}

/// Independent re-derivation of every static objective.
pub fn audit_static(
    layout: &TrapLayout,
    voltages: &[f64],
    objectives: &[ZoneObjective],
    opts: &SynthOptions,
) -> Result<(), SynthError> {
    let c_scale = curvature_scale(layout, objectives);
    let q_over_m = layout.ion_charge() / layout.ion_mass();
    for (i, obj) in objectives.iter().enumerate() {
        let x = objective_position(layout, obj)?;
        match obj.curvature {
            CurvatureGoal::Frequency(w_target) => {
                let well = find_well(layout, voltages, x, &WellOptions::default())
                    .map_err(|e| SynthError::AuditFailed {
                        sample: i,
                        detail: format!("zone `{}`: {e}", obj.zone),
                    })?;
                // A deliberate axial field target displaces the well by E/C.
                let expected_x = x + obj.axial_field / (w_target * w_target / q_over_m);
                let dx = (well.position.x - expected_x).abs();
                // Audit position tolerance scales with the commanded offset.
                let pos_tol = opts.audit_position_tol
                    + 1e-2 * (expected_x - x).abs();
                if dx > pos_tol {
                    return Err(SynthError::AuditFailed {
                        sample: i,
                        detail: format!(
                            "zone `{}`: well at {:.6e} m, expected {expected_x:.6e} m (|Δ| = {dx:.3e} m)",
                            obj.zone, well.position.x
                        ),
                    });
                }
                let df = (well.axial_frequency - w_target).abs() / w_target;
                if df > opts.audit_frequency_rel {
                    return Err(SynthError::AuditFailed {
                        sample: i,
                        detail: format!(
                            "zone `{}`: frequency {:.6e} rad/s vs target {w_target:.6e} rad/s ({:.2e} relative)",
                            obj.zone, well.axial_frequency, df
                        ),
                    });
                }
            }
            CurvatureGoal::Null => {
                let p = layout.axis_point(x);
                let (g, h) = layout.dc_grad_hess(voltages, &p)?;
                let field = g.norm();
                if field > 1e-2 {
                    return Err(SynthError::AuditFailed {
                        sample: i,
                        detail: format!(
                            "null zone `{}`: residual field {field:.3e} V/m",
                            obj.zone
                        ),
                    });
                }
                if h[(0, 0)].abs() > 1e-2 * c_scale {
                    return Err(SynthError::AuditFailed {
                        sample: i,
                        detail: format!(
                            "null zone `{}`: residual curvature {:.3e} V/m²",
                            obj.zone,
                            h[(0, 0)]
                        ),
                    });
                }
            }
        }
    }
    Ok(())
}

/// Synthesize a transport waveform: one bounded least-squares solve per
/// trajectory sample, followed by a temporal-smoothness sweep, bounds and
/// slew enforcement, and the per-sample well audit.
///
/// Deterministic: identical inputs produce bit-identical waveforms.
pub fn synthesize_waveform(
    layout: &TrapLayout,
    trajectory: &Trajectory,
    limits: &HardwareLimits,
    opts: &SynthOptions,
) -> Result<Waveform, SynthError> {
    limits.validate()?;
    let spacing = trajectory.uniform_spacing()?;
    let n_t = trajectory.samples().len();
    if n_t >= 2 && spacing < limits.awg_sample_period * (1.0 - 1e-9) {
        return Err(SynthError::BadTrajectory(format!(
            "sample spacing {spacing:.3e} s below the AWG sample period {:.3e} s",
            limits.awg_sample_period
        )));
    }
    let (span_lo, span_hi) = layout.axial_span();
    for s in trajectory.samples() {
        if s.position < span_lo || s.position > span_hi {
            return Err(SynthError::BadTrajectory(format!(
                "target position {:.4e} m outside the axial span",
                s.position
            )));
        }
    }

    let (lo, hi) = limits.electrode_bounds();
    let problems: Vec<BoundedLsProblem> = trajectory
        .samples()
        .par_iter()
        .map(|s| {
            assemble_rows(
                layout,
                "t",
                s.position,
                CurvatureGoal::Frequency(s.frequency),
                s.field,
                true,
                &opts.solver,
            )
            .map(|rows| stack_rows(vec![rows], lo, hi))
        })
        .collect::<Result<_, _>>()?;

    let solutions: Vec<DVector<f64>> = problems
        .par_iter()
        .map(|p| p.solve(opts.solver.ridge, None, opts.solver.max_active_set_iter))
        .collect::<Result<_, _>>()?;

    let names = layout.dc_names();
    for (t, (p, v)) in problems.iter().zip(&solutions).enumerate() {
        check_feasibility(p, v, &names, &opts.solver, {
            let q_over_m = layout.ion_charge() / layout.ion_mass();
            let w = trajectory.samples()[t].frequency;
            w * w / q_over_m
        })
        .map_err(|e| match e {
            SynthError::Infeasible { report } => SynthError::Infeasible { report },
            other => other,
        })?;
    }

    // Temporal smoothness: a single symmetric block-tridiagonal solve of
    //   Σ_t ‖A_t v_t − b_t‖² + λ‖v_t‖² + μ Σ ‖v_t − v_{t−1}‖².
    // Skipped when any electrode is pinned at a bound (smoothing is a
    // nullspace tie-break, not a constraint handler).
    let any_active = {
        let tol = 1e-9 * (hi - lo);
        solutions
            .iter()
            .flat_map(|v| v.iter())
            .any(|&x| (x - lo).abs() < tol || (x - hi).abs() < tol)
    };
    let smoothed: Vec<DVector<f64>> = if n_t >= 3 && opts.smoothness > 0.0 && !any_active {
        smooth_block_tridiagonal(&problems, opts.solver.ridge, opts.smoothness)?
    } else {
        solutions
    };

    let n_e = names.len();
    let rows = n_t.max(2);
    let mut m = DMatrix::zeros(rows, n_e);
    for t in 0..n_t {
        for e in 0..n_e {
            m[(t, e)] = smoothed[t][e].clamp(lo, hi);
        }
    }
    if n_t == 1 {
        // Degenerate single-sample trajectory: hold the static solution.
        for e in 0..n_e {
            m[(1, e)] = m[(0, e)];
        }
    }
    let sample_period = if n_t >= 2 {
        spacing
    } else {
        limits.awg_sample_period
    };
    let wf = Waveform::new(names, m, sample_period, limits.clone())?;
    if opts.enforce_slew {
        wf.check_slew()?;
    }
    if opts.audit {
        audit_waveform(layout, trajectory, &wf, opts)?;
    }
    Ok(wf)
}

/// Re-derive the well of every trajectory sample from the waveform voltages
/// and verify the audit tolerances.
pub fn audit_waveform(
    layout: &TrapLayout,
    trajectory: &Trajectory,
    waveform: &Waveform,
    opts: &SynthOptions,
) -> Result<AuditReport, SynthError> {
    let results: Vec<(f64, f64)> = trajectory
        .samples()
        .par_iter()
        .enumerate()
        .map(|(t, s)| {
            let voltages = waveform.row(t.min(waveform.n_samples() - 1));
            let well = find_well(layout, &voltages, s.position, &WellOptions::default())
                .map_err(|e| SynthError::AuditFailed {
                    sample: t,
                    detail: e.to_string(),
                })?;
            let q_over_m = layout.ion_charge() / layout.ion_mass();
            let expected_x = s.position
                + s.field.x / (s.frequency * s.frequency / q_over_m);
            let dx = (well.position.x - expected_x).abs();
            let df = (well.axial_frequency - s.frequency).abs() / s.frequency;
            if dx > opts.audit_position_tol + 1e-2 * (expected_x - s.position).abs() {
                return Err(SynthError::AuditFailed {
                    sample: t,
                    detail: format!("well position error {dx:.3e} m"),
                });
            }
            if df > opts.audit_frequency_rel {
                return Err(SynthError::AuditFailed {
                    sample: t,
                    detail: format!("frequency error {df:.3e} relative"),
                });
            }
            Ok((dx, df))
        })
        .collect::<Result<_, _>>()?;
    let mut report = AuditReport {
        samples_checked: results.len(),
        max_position_error: 0.0,
        max_frequency_rel_error: 0.0,
    };
    for (dx, df) in results {
        report.max_position_error = report.max_position_error.max(dx);
        report.max_frequency_rel_error = report.max_frequency_rel_error.max(df);
    }
    Ok(report)
}

fn smooth_block_tridiagonal(
    problems: &[BoundedLsProblem],
    ridge: f64,
    mu: f64,
) -> Result<Vec<DVector<f64>>, SynthError> {
    let n_t = problems.len();
    let n = problems[0].a.ncols();
    let eye = DMatrix::<f64>::identity(n, n);
    let mut d_factors: Vec<nalgebra::Cholesky<f64, nalgebra::Dyn>> = Vec::with_capacity(n_t);
    let mut y: Vec<DVector<f64>> = Vec::with_capacity(n_t);
    for t in 0..n_t {
        let p = &problems[t];
        let coupling = if n_t == 1 {
            0.0
        } else if t == 0 || t == n_t - 1 {
            mu
        } else {
            2.0 * mu
        };
        let mut block = p.a.transpose() * &p.a + &eye * (ridge + coupling);
        let mut rhs = p.a.transpose() * &p.b;
        if t > 0 {
            // Schur complement against the previous block.
            let prev_inv_y = d_factors[t - 1].solve(&y[t - 1]);
            rhs += mu * prev_inv_y;
            let prev_inv = d_factors[t - 1].solve(&eye);
            block -= prev_inv * (mu * mu);
        }
        let factor = block.cholesky().ok_or_else(|| {
            SynthError::BadObjective("smoothing system not positive definite".into())
        })?;
        d_factors.push(factor);
        y.push(rhs);
    }
    let mut out = vec![DVector::zeros(n); n_t];
    out[n_t - 1] = d_factors[n_t - 1].solve(&y[n_t - 1]);
    for t in (0..n_t - 1).rev() {
        let rhs = &y[t] + mu * &out[t + 1];
        out[t] = d_factors[t].solve(&rhs);
    }
    Ok(out)
}
