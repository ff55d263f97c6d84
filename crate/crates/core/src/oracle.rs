//! Independent numerical ground truth: classic RK4 with step-doubling error
//! control.
//!
//! Each step is taken once with `h` and twice with `h/2`; the difference
//! estimates the local error of the half-step result, which is then
//! improved by Richardson extrapolation. Integration stops early when the
//! norm crosses a threshold (a finite-time escape proxy) or when the step
//! shrinks below `1e-14 * t_end`.

use alloc::vec::Vec;

use num_traits::Float;

use crate::dynamics::VectorField;
use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Escape proxy: stop once `||x|| > norm_limit`.
    pub norm_limit: f64,
    /// Stop once the step drops below `min_step_factor * t_end`.
    pub min_step_factor: f64,
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions {
            rtol: 1e-10,
            atol: 1e-12,
            norm_limit: 1e6,
            min_step_factor: 1e-14,
            max_steps: 5_000_000,
        }
    }
}

impl IntegratorOptions {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        IntegratorOptions {
            rtol,
            atol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    Completed,
    NormExceeded { threshold: f64, time: f64 },
    StepUnderflow { time: f64 },
    StepLimit { time: f64 },
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::Completed => "completed",
            Termination::NormExceeded { .. } => "norm_exceeded",
            Termination::StepUnderflow { .. } => "step_underflow",
            Termination::StepLimit { .. } => "step_limit",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub terminated: Termination,
}

impl Trajectory {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory holds x0")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory holds t = 0")
    }

    /// Time of a finite-time escape: the norm crossing or the step
    /// collapsing near a singularity.
    pub fn escape_time(&self) -> Option<f64> {
        match self.terminated {
            Termination::NormExceeded { time, .. } | Termination::StepUnderflow { time } => Some(time),
            _ => None,
        }
    }
}

fn rk4_step<S: VectorField + ?Sized>(sys: &S, y: &[f64], h: f64) -> Vec<f64> {
    let axpy = |a: &[f64], s: f64, b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, d)| x + s * d).collect() };
    let k1 = sys.eval(y);
    let k2 = sys.eval(&axpy(y, 0.5 * h, &k1));
    let k3 = sys.eval(&axpy(y, 0.5 * h, &k2));
    let k4 = sys.eval(&axpy(y, h, &k3));
    (0..y.len())
        .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

fn validate(x0: &[f64], dim: usize, t_end: f64, opts: &IntegratorOptions) -> Result<()> {
    if x0.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: x0.len(),
        });
    }
    if !(opts.rtol > 0.0 && opts.atol > 0.0) {
        return Err(Error::InvalidArgument("tolerances must be positive"));
    }
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidArgument("end time must be finite and non-negative"));
    }
    Ok(())
}

/// Runs the integrator over `[0, t_end]`, stepping exactly onto every
/// time in `stops` (sorted, inside the interval) and calling `record` on
/// each accepted step with a flag telling whether it landed on a stop.
fn drive<S: VectorField + ?Sized>(
    sys: &S,
    x0: &[f64],
    t_end: f64,
    stops: &[f64],
    opts: &IntegratorOptions,
    mut record: impl FnMut(f64, &[f64], bool),
) -> Termination {
    let mut t = 0.0;
    let mut y = x0.to_vec();
    let min_step = opts.min_step_factor * t_end;
    let mut h = (t_end * 1e-3).max(min_step);
    let mut next_stop = stops.iter().position(|&s| s > 0.0).unwrap_or(stops.len());
    let mut steps = 0usize;
    while t < t_end {
        if steps >= opts.max_steps {
            return Termination::StepLimit { time: t };
        }
        let target = stops.get(next_stop).copied().unwrap_or(t_end).min(t_end);
        let clipped = t + h >= target;
        let step = if clipped { target - t } else { h };
        let full = rk4_step(sys, &y, step);
        let half = rk4_step(sys, &y, 0.5 * step);
        let fine = rk4_step(sys, &half, 0.5 * step);
        let mut err: f64 = 0.0;
        for i in 0..y.len() {
            let scale = opts.atol + opts.rtol * y[i].abs().max(fine[i].abs());
            let e = (fine[i] - full[i]).abs() / scale;
            // f64::max would drop a NaN and accept an overflowed step
            err = if e.is_finite() { err.max(e) } else { f64::INFINITY };
        }
        err /= 15.0;
        if err <= 1.0 {
            for i in 0..y.len() {
                y[i] = fine[i] + (fine[i] - full[i]) / 15.0;
            }
            t = if clipped { target } else { t + step };
            steps += 1;
            let at_stop = clipped && next_stop < stops.len() && target == stops[next_stop];
            if at_stop {
                next_stop += 1;
            }
            record(t, &y, at_stop);
            if linalg::norm(&y) > opts.norm_limit {
                return Termination::NormExceeded {
                    threshold: opts.norm_limit,
                    time: t,
                };
            }
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        // a shortened step that succeeded says nothing about the natural size
        if !(clipped && err <= 1.0) {
            h = step * factor;
        }
        if t < t_end && h < min_step {
            return Termination::StepUnderflow { time: t };
        }
    }
    Termination::Completed
}

/// Integrates `x' = f(x)` from `x0`, recording every accepted step.
pub fn integrate<S: VectorField + ?Sized>(
    sys: &S,
    x0: &[f64],
    t_end: f64,
    rtol: f64,
    atol: f64,
) -> Result<Trajectory> {
    integrate_with(sys, x0, t_end, &IntegratorOptions::with_tolerances(rtol, atol))
}

pub fn integrate_with<S: VectorField + ?Sized>(
    sys: &S,
    x0: &[f64],
    t_end: f64,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    validate(x0, sys.dim(), t_end, opts)?;
    let mut times = alloc::vec![0.0];
    let mut states = alloc::vec![x0.to_vec()];
    let terminated = drive(sys, x0, t_end, &[], opts, |t, y, _| {
        times.push(t);
        states.push(y.to_vec());
    });
    Ok(Trajectory {
        times,
        states,
        terminated,
    })
}

/// Integrates and records the state exactly at the requested times
/// (sorted ascending, non-negative). Stops early on escape; the returned
/// trajectory then holds only the times reached.
pub fn integrate_at<S: VectorField + ?Sized>(
    sys: &S,
    x0: &[f64],
    times: &[f64],
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    if times.windows(2).any(|w| !(w[0] <= w[1])) || times.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::InvalidArgument("sample times must be sorted and non-negative"));
    }
    let t_end = times.last().copied().unwrap_or(0.0);
    validate(x0, sys.dim(), t_end, opts)?;
    let mut out_t = Vec::with_capacity(times.len());
    let mut out_x = Vec::with_capacity(times.len());
    let leading_zeros = times.iter().take_while(|&&t| t == 0.0).count();
    for _ in 0..leading_zeros {
        out_t.push(0.0);
        out_x.push(x0.to_vec());
    }
    let mut distinct: Vec<f64> = times[leading_zeros..].to_vec();
    distinct.dedup();
    let terminated = drive(sys, x0, t_end, &distinct, opts, |t, y, at_stop| {
        if at_stop {
            let copies = times.iter().filter(|&&s| s == t).count();
            for _ in 0..copies {
                out_t.push(t);
                out_x.push(y.to_vec());
            }
        }
    });
    Ok(Trajectory {
        times: out_t,
        states: out_x,
        terminated,
    })
}

/// First time the integrated norm exceeds `threshold`, searching up to
/// `t_cap`; `None` if it never does. A step-size collapse before the
/// crossing marks a singularity and its time is returned instead.
pub fn escape_time_estimate<S: VectorField + ?Sized>(
    sys: &S,
    x0: &[f64],
    threshold: f64,
    t_cap: f64,
) -> Result<Option<f64>> {
    let opts = IntegratorOptions {
        norm_limit: threshold,
        ..IntegratorOptions::default()
    };
    let traj = integrate_with(sys, x0, t_cap, &opts)?;
    Ok(traj.escape_time())
}
