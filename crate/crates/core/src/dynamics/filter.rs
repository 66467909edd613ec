//! Cascaded first-order low-pass filter model of the voltage chain.
//!
//! The AWG output is a zero-order hold, so the cascade is discretized
//! exactly: with sections ẏ_i = ω_i (y_{i−1} − y_i) and constant input x over
//! one sample, the deviation e = y − x·1 obeys ė = A e with A lower
//! bidiagonal, giving the exact update y ← x + exp(A·T)(y − x). DC gain is
//! exactly 1 and the unit-step response equals the continuous one at the
//! sample instants.

use nalgebra::{DMatrix, DVector};

use super::DynamicsError;
use crate::waveform::Waveform;

#[derive(Debug, Clone)]
pub struct FilterCascade {
    cutoffs: Vec<f64>,
    sample_period: f64,
    /// exp(A·T) for the deviation dynamics.
    propagator: DMatrix<f64>,
}

/// Matrix exponential by scaling and squaring with a Taylor series; the
/// cascade matrices are tiny (k ≤ ~4) and well scaled after the squaring
/// reduction.
fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm = a.amax();
    let scale_pow = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a / 2f64.powi(scale_pow);
    let mut result = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..30 {
        term = (&term * &scaled) / k as f64;
        result += &term;
        if term.amax() < 1e-18 {
            break;
        }
    }
    for _ in 0..scale_pow {
        result = &result * &result;
    }
    result
}

impl FilterCascade {
    /// Build a cascade of first-order sections with the given cutoff
    /// frequencies [Hz], discretized at `sample_period` [s].
    pub fn new(cutoffs: &[f64], sample_period: f64) -> Result<Self, DynamicsError> {
        if !(sample_period > 0.0) {
            return Err(DynamicsError::BadFilter(format!(
                "sample period must be positive, got {sample_period:e}"
            )));
        }
        for &fc in cutoffs {
            if !(fc > 0.0) {
                return Err(DynamicsError::BadFilter(format!(
                    "cutoff must be positive, got {fc:e} Hz"
                )));
            }
            let tau = 1.0 / (2.0 * std::f64::consts::PI * fc);
            if tau <= sample_period / 2.0 {
                return Err(DynamicsError::BadFilter(format!(
                    "cutoff {fc:e} Hz has time constant {tau:e} s ≤ half the sample period {sample_period:e} s"
                )));
            }
        }
        let k = cutoffs.len();
        let mut a = DMatrix::zeros(k, k);
        for (i, &fc) in cutoffs.iter().enumerate() {
            let w = 2.0 * std::f64::consts::PI * fc;
            a[(i, i)] = -w;
            if i > 0 {
                a[(i, i - 1)] = w;
            }
        }
        let propagator = expm(&(a * sample_period));
        Ok(Self {
            cutoffs: cutoffs.to_vec(),
            sample_period,
            propagator,
        })
    }

    pub fn cutoffs(&self) -> &[f64] {
        &self.cutoffs
    }

    pub fn sample_period(&self) -> f64 {
        self.sample_period
    }

    pub fn sections(&self) -> usize {
        self.cutoffs.len()
    }

    pub(crate) fn propagator(&self) -> &DMatrix<f64> {
        &self.propagator
    }

    /// One exact ZOH step: propagate the section states under input `x` held
    /// for one sample period.
    pub(crate) fn step(&self, state: &mut DVector<f64>, x: f64) {
        if state.is_empty() {
            return;
        }
        let dev = &*state - DVector::from_element(state.len(), x);
        *state = self.propagator() * dev;
        state.add_scalar_mut(x);
    }

    /// Filter a single channel, assuming the chain was settled at `x[0]`
    /// before the first sample. Output sample t is the chain state after
    /// input t has been held for one period (end-of-interval sampling).
    pub fn filter_channel(&self, xs: &[f64]) -> Vec<f64> {
        if self.cutoffs.is_empty() || xs.is_empty() {
            return xs.to_vec();
        }
        let k = self.cutoffs.len();
        let mut state = DVector::from_element(k, xs[0]);
        let mut out = Vec::with_capacity(xs.len());
        for &x in xs {
            self.step(&mut state, x);
            out.push(state[k - 1]);
        }
        out
    }
}

/// Pass a waveform through the hardware filter cascade.
///
/// The chain is assumed settled at the first sample (waveforms begin from a
/// static hold). Sample periods must match.
pub fn filter_response(waveform: &Waveform, cascade: &FilterCascade) -> Result<Waveform, DynamicsError> {
    let wf_period = waveform.sample_period();
    let rel = (wf_period - cascade.sample_period).abs() / cascade.sample_period;
    if rel > 1e-9 {
        return Err(DynamicsError::SamplePeriodMismatch {
            waveform: wf_period,
            filter: cascade.sample_period,
        });
    }
    let n_t = waveform.n_samples();
    let n_e = waveform.n_electrodes();
    let mut out = waveform.samples().clone();
    for e in 0..n_e {
        let channel: Vec<f64> = (0..n_t).map(|t| waveform.samples()[(t, e)]).collect();
        let filtered = cascade.filter_channel(&channel);
        for t in 0..n_t {
            out[(t, e)] = filtered[t];
        }
    }
    Ok(waveform.with_samples(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rejects_bad_parameters() {
        assert!(FilterCascade::new(&[0.0], 390e-9).is_err());
        assert!(FilterCascade::new(&[60e3], 0.0).is_err());
        // time constant below half the sample period
        assert!(FilterCascade::new(&[1e6], 390e-9).is_err());
    }

    #[test]
    fn empty_cascade_is_identity() {
        let c = FilterCascade::new(&[], 390e-9).unwrap();
        let xs = [0.0, 1.0, -0.5, 2.0];
        assert_eq!(c.filter_channel(&xs), xs.to_vec());
    }

    #[test]
    fn constant_input_is_unchanged() {
        let c = FilterCascade::new(&[60e3, 60e3], 390e-9).unwrap();
        let xs = vec![0.7; 64];
        let ys = c.filter_channel(&xs);
        for y in ys {
            assert_relative_eq!(y, 0.7, max_relative = 1e-14);
        }
    }

    #[test]
    fn step_matches_continuous_two_pole_response() {
        let t_s = 390e-9;
        let fc = 60e3;
        let c = FilterCascade::new(&[fc, fc], t_s).unwrap();
        let n = 400;
        let mut xs = vec![0.0];
        xs.extend(std::iter::repeat(1.0).take(n - 1));
        let ys = c.filter_channel(&xs);
        let w = 2.0 * std::f64::consts::PI * fc;
        // Step held from t_0 = 0; sample m sees the response at t = m·T.
        for m in 1..n {
            let t = m as f64 * t_s;
            let analytic = 1.0 - (1.0 + w * t) * (-w * t).exp();
            assert!(
                (ys[m] - analytic).abs() < 1e-3,
                "m={m}: {} vs {}",
                ys[m],
                analytic
            );
        }
        // Effective settling consistent with the combined time constant.
        let tau_eff = 2.0 / w;
        let idx = (tau_eff * 2.0 / t_s) as usize;
        assert!(ys[idx] > 0.5 && ys[idx] < 0.95);
    }

    #[test]
    fn linear_and_time_invariant() {
        let c = FilterCascade::new(&[60e3, 60e3], 390e-9).unwrap();
        let n = 200;
        let a: Vec<f64> = (0..n).map(|i| (i as f64 * 0.07).sin()).collect();
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.11).cos() - 1.0).collect();
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let fa = c.filter_channel(&a);
        let fb = c.filter_channel(&b);
        let fsum = c.filter_channel(&sum);
        for i in 0..n {
            assert!((fsum[i] - fa[i] - fb[i]).abs() < 1e-12);
        }
        // Delay invariance: shift a zero-prefixed signal.
        let d = 17;
        let mut delayed = vec![0.0; d];
        delayed.extend_from_slice(&a.iter().map(|x| x - a[0]).collect::<Vec<_>>());
        let fd = c.filter_channel(&delayed);
        let base = c.filter_channel(&a.iter().map(|x| x - a[0]).collect::<Vec<_>>());
        for i in 0..n {
            assert!((fd[i + d] - base[i]).abs() < 1e-12);
        }
    }
}
