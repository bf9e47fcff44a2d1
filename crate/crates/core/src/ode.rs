//! Fixed-step classical Runge–Kutta integration shared by the quantum and
//! circuit propagators.
//!
//! Both sides use the same step rule: at least [`STEPS_PER_PERIOD`] steps per
//! period of the fastest angular frequency in the system. A [`StepPlan`]
//! rounds the requested step down so that the window is covered by an integer
//! number of steps that is also a multiple of the sampling stride, so every
//! trajectory is uniformly sampled and ends exactly at `t_end`.

use std::f64::consts::TAU;
use std::ops::{Add, Mul};

use crate::error::{Error, Result};

/// Minimum number of integrator steps per period of the fastest oscillation.
pub const STEPS_PER_PERIOD: f64 = 200.0;

/// Upper bound on stored samples when the caller does not pick a stride.
pub const DEFAULT_MAX_SAMPLES: usize = 2000;

/// Largest step allowed for a system whose fastest angular frequency is
/// `omega_max` (rad/s).
pub fn max_step(omega_max: f64) -> f64 {
    TAU / (STEPS_PER_PERIOD * omega_max)
}

/// Default step for a system, which is the resolution limit itself.
pub fn default_step(omega_max: f64) -> f64 {
    max_step(omega_max)
}

pub fn check_step(dt: f64, omega_max: f64) -> Result<()> {
    let limit = max_step(omega_max);
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::invalid("dt", format!("must be positive and finite, got {dt}")));
    }
    // relative slack so that dt == max_step(..) computed elsewhere passes
    if dt > limit * (1.0 + 1e-12) {
        return Err(Error::StepTooLarge { dt, limit });
    }
    Ok(())
}

/// How integrator steps are thinned into stored samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sampling {
    /// Evenly decimated to at most [`DEFAULT_MAX_SAMPLES`] samples.
    #[default]
    Auto,
    /// Keep every `n`-th step.
    Stride(usize),
}

/// Resolved step count, step length and sampling stride for one integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepPlan {
    pub n_steps: usize,
    pub dt: f64,
    pub stride: usize,
    pub t_end: f64,
}

impl StepPlan {
    pub fn new(t_end: f64, dt: f64, sampling: Sampling) -> Result<Self> {
        if !(t_end > 0.0) || !t_end.is_finite() {
            return Err(Error::invalid("t_end", format!("must be positive and finite, got {t_end}")));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::invalid("dt", format!("must be positive and finite, got {dt}")));
        }
        let raw = ((t_end / dt) - 1e-9).ceil().max(1.0) as usize;
        let stride = match sampling {
            Sampling::Auto => raw.div_ceil(DEFAULT_MAX_SAMPLES - 1).max(1),
            Sampling::Stride(0) => {
                return Err(Error::invalid("stride", "must be at least 1"));
            }
            Sampling::Stride(s) => s,
        };
        let n_steps = raw.div_ceil(stride) * stride;
        Ok(StepPlan {
            n_steps,
            dt: t_end / n_steps as f64,
            stride,
            t_end,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.n_steps / self.stride + 1
    }

    /// Sample times relative to `t0`.
    pub fn sample_times(&self, t0: f64) -> Vec<f64> {
        (0..self.n_samples())
            .map(|k| t0 + (k * self.stride) as f64 * self.dt)
            .collect()
    }
}

/// Integrate `dy/dt = f(t, y)` with classical RK4 along `plan`, calling
/// `record(t, y)` at t0 and after every `plan.stride` steps.
///
/// `f` writes the derivative into its third argument.
pub fn rk4<T, F, R>(y0: &[T], t0: f64, plan: &StepPlan, mut f: F, mut record: R) -> Result<()>
where
    T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>,
    F: FnMut(f64, &[T], &mut [T]),
    R: FnMut(f64, &[T]) -> Result<()>,
{
    let n = y0.len();
    let h = plan.dt;
    let mut y = y0.to_vec();
    let mut k1 = vec![T::default(); n];
    let mut k2 = vec![T::default(); n];
    let mut k3 = vec![T::default(); n];
    let mut k4 = vec![T::default(); n];
    let mut tmp = vec![T::default(); n];

    record(t0, &y)?;
    for step in 0..plan.n_steps {
        let t = t0 + step as f64 * h;
        f(t, &y, &mut k1);
        for i in 0..n {
            tmp[i] = y[i] + k1[i] * (0.5 * h);
        }
        f(t + 0.5 * h, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = y[i] + k2[i] * (0.5 * h);
        }
        f(t + 0.5 * h, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = y[i] + k3[i] * h;
        }
        f(t + h, &tmp, &mut k4);
        for i in 0..n {
            y[i] = y[i] + (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (h / 6.0);
        }
        if (step + 1) % plan.stride == 0 {
            record(t0 + (step + 1) as f64 * h, &y)?;
        }
    }
    Ok(())
}
