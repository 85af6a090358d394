//! Dormand–Prince 5(4) integrator for a scalar ODE `y' = f(t, y)` whose
//! right-hand side can fail, with step-size caps supplied by the caller and
//! cubic Hermite dense output for event location.

use crate::error::{Error, Result};

// Butcher tableau of Dormand & Prince (1980).
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b - b̂, the embedded error estimate
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step magnitude.
    pub initial_step: f64,
    /// Largest step magnitude anywhere.
    pub max_step: f64,
    /// Smallest step magnitude before giving up.
    pub min_step: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            initial_step: 1e-5,
            max_step: 0.05,
            min_step: 1e-14,
            max_steps: 5_000_000,
        }
    }
}

/// One accepted step, with enough data for cubic Hermite interpolation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcceptedStep {
    pub t0: f64,
    pub y0: f64,
    pub f0: f64,
    pub t1: f64,
    pub y1: f64,
    pub f1: f64,
}

impl AcceptedStep {
    /// Cubic Hermite interpolant at `t` between the step ends.
    pub fn interpolate(&self, t: f64) -> f64 {
        hermite(self.t0, self.y0, self.f0, self.t1, self.y1, self.f1, t)
    }
}

/// Cubic Hermite interpolation on `[t0, t1]` from values and slopes.
pub fn hermite(t0: f64, y0: f64, f0: f64, t1: f64, y1: f64, f1: f64, t: f64) -> f64 {
    let h = t1 - t0;
    if h == 0.0 {
        return y0;
    }
    let s = (t - t0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1
}

/// Whether the integration should go on after a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

/// Integrates from `(t0, y0)` to `t_end`, which may lie before `t0`.
///
/// `step_cap(t, y, y')` bounds the step magnitude at the current state and
/// `on_step` sees every accepted step. Returns the final state.
pub fn integrate<F, C, S>(
    mut rhs: F,
    t0: f64,
    y0: f64,
    t_end: f64,
    options: &OdeOptions,
    mut step_cap: C,
    mut on_step: S,
) -> Result<(f64, f64)>
where
    F: FnMut(f64, f64) -> Result<f64>,
    C: FnMut(f64, f64, f64) -> f64,
    S: FnMut(&AcceptedStep) -> Control,
{
    let direction = if t_end >= t0 { 1.0 } else { -1.0 };
    let (mut t, mut y) = (t0, y0);
    let mut f = rhs(t, y)?;
    let mut h = options.initial_step.min(options.max_step);
    let mut steps = 0usize;
    while direction * (t_end - t) > 0.0 {
        steps += 1;
        if steps > options.max_steps {
            return Err(Error::StepUnderflow { t, r: y });
        }
        let cap = step_cap(t, y, f).min(options.max_step);
        let remaining = (t_end - t).abs();
        let mut hh = h.min(cap);
        let last = hh >= remaining;
        if last {
            hh = remaining;
        }
        let dt = direction * hh;

        let k1 = f;
        let k2 = rhs(t + C2 * dt, y + dt * A21 * k1)?;
        let k3 = rhs(t + C3 * dt, y + dt * (A31 * k1 + A32 * k2))?;
        let k4 = rhs(t + C4 * dt, y + dt * (A41 * k1 + A42 * k2 + A43 * k3))?;
        let k5 = rhs(t + C5 * dt, y + dt * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4))?;
        let k6 = rhs(
            t + dt,
            y + dt * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5),
        )?;
        let y_new = y + dt * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6);
        let t_new = if last { t_end } else { t + dt };
        let k7 = rhs(t_new, y_new)?;
        let err = dt * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);
        let scale = options.atol + options.rtol * y.abs().max(y_new.abs());
        let ratio = (err / scale).abs();

        if ratio <= 1.0 {
            let step = AcceptedStep {
                t0: t,
                y0: y,
                f0: f,
                t1: t_new,
                y1: y_new,
                f1: k7,
            };
            t = t_new;
            y = y_new;
            f = k7;
            if on_step(&step) == Control::Stop {
                break;
            }
            let grow = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0) };
            // do not let a short final or capped step shrink the next one
            h = (hh * grow).max(if last || hh >= cap { h } else { 0.0 });
        } else {
            h = hh * (0.9 * ratio.powf(-0.2)).clamp(0.1, 0.9);
            if h < options.min_step {
                return Err(Error::StepUnderflow { t, r: y });
            }
        }
    }
    Ok((t, y))
}

/// Root of `g` on `[lo, hi]` by bisection, given `g(lo)` and `g(hi)` of
/// opposite sign (or zero); stops when the bracket is narrower than `tol`.
pub fn bisect<G: FnMut(f64) -> f64>(mut g: G, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut g_lo = g(lo);
    for _ in 0..200 {
        if (hi - lo).abs() <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let g_mid = g(mid);
        if g_mid == 0.0 {
            return mid;
        }
        if (g_mid > 0.0) == (g_lo > 0.0) {
            lo = mid;
            g_lo = g_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
