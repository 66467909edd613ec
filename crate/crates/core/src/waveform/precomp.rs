//! In-software inversion of the hardware filter chain.
//!
//! The filter model is the exact zero-order-hold discretization used by
//! `dynamics::filter_response`, so the inversion is algebraically exact: the
//! AWG sample that makes the filtered output hit the desired value is solved
//! per step from the propagated section states. Feasibility against the
//! voltage and slew limits is checked on the result; fast waveforms fail
//! here, which is the hardware floor on transport duration.

use nalgebra::{DMatrix, DVector};

use super::{SynthError, Waveform};
use crate::dynamics::FilterCascade;

/// Pre-distort `waveform` so that passing the result through
/// `filter_response` with the limits' filter cascade reproduces the original.
///
/// The chain is assumed settled at the first sample. The precompensated
/// drive must respect the voltage bounds and the binding slew limit; if not,
/// the waveform is too fast for the filter chain and an error reports the
/// worst violation.
pub fn precompensate_filter(waveform: &Waveform) -> Result<Waveform, SynthError> {
    let limits = waveform.limits();
    if limits.filter_cutoffs.is_empty() {
        return Ok(waveform.clone());
    }
    let cascade = FilterCascade::new(&limits.filter_cutoffs, limits.awg_sample_period)?;
    let rel = (waveform.sample_period() - limits.awg_sample_period).abs()
        / limits.awg_sample_period;
    if rel > 1e-9 {
        return Err(SynthError::PrecompInfeasible(format!(
            "waveform sample period {:.3e} s must match the AWG period {:.3e} s",
            waveform.sample_period(),
            limits.awg_sample_period
        )));
    }

    let k = cascade.sections();
    let prop = cascade.propagator().clone();
    // Output gain of one held input sample on the final section.
    let input_gain = 1.0 - prop.row(k - 1).sum();
    if input_gain.abs() < 1e-12 {
        return Err(SynthError::PrecompInfeasible(
            "filter chain is not invertible at this sample rate".into(),
        ));
    }

    // state_next = x + prop·(state − x·1) = prop·state + x·(1 − prop·1)
    let ones = DVector::from_element(k, 1.0);
    let hold_gain: DVector<f64> = &ones - &prop * &ones;

    let n_t = waveform.n_samples();
    let n_e = waveform.n_electrodes();
    let mut drive = DMatrix::zeros(n_t, n_e);
    for e in 0..n_e {
        let desired: Vec<f64> = (0..n_t).map(|t| waveform.samples()[(t, e)]).collect();
        let mut state = DVector::from_element(k, desired[0]);
        for t in 0..n_t {
            let propagated = &prop * &state;
            let x = (desired[t] - propagated[k - 1]) / input_gain;
            drive[(t, e)] = x;
            state = propagated + &hold_gain * x;
        }
    }

    let (lo, hi) = limits.electrode_bounds();
    let slew_limit = limits.electrode_slew_max();
    let mut worst_v: f64 = 0.0;
    let mut worst_slew: f64 = 0.0;
    for t in 0..n_t {
        for e in 0..n_e {
            let v = drive[(t, e)];
            if v < lo {
                worst_v = worst_v.max(lo - v);
            } else if v > hi {
                worst_v = worst_v.max(v - hi);
            }
            if t > 0 {
                let slew = (drive[(t, e)] - drive[(t - 1, e)]).abs() / waveform.sample_period();
                if slew > slew_limit {
                    worst_slew = worst_slew.max(slew);
                }
            }
        }
    }
    if worst_v > 0.0 || worst_slew > 0.0 {
        return Err(SynthError::PrecompInfeasible(format!(
            "inversion exceeds hardware limits (voltage overshoot {worst_v:.3} V, peak slew {worst_slew:.3e} V/s vs limit {slew_limit:.3e} V/s); the waveform is too fast for the filter chain"
        )));
    }
    let out = waveform.with_samples(drive);
    out.check_slew()?;
    Ok(out)
}
