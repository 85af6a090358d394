//! Decay-law fits on sampled `P(t)` and the nuclear-charge observable
//! `Z(t)`.

use crate::error::{Error, Result};
use crate::io::write_columns;
use crate::probability::DecayCurve;

/// Fewest samples a fit window must hold.
pub const MIN_FIT_SAMPLES: usize = 10;

/// Straight-line least squares `y = intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub rms_residual: f64,
    pub samples: usize,
}

/// Ordinary least squares on `(x, y)` pairs.
pub fn fit_line(points: &[(f64, f64)]) -> Result<LineFit> {
    if points.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: points.len(),
        });
    }
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    if sxx == 0.0 {
        return Err(Error::domain("fit_line", "all abscissae coincide"));
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss: f64 = points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    Ok(LineFit {
        slope,
        intercept,
        rms_residual: (ss / n).sqrt(),
        samples: points.len(),
    })
}

fn window_points(
    curve: &DecayCurve,
    window: (f64, f64),
    map: impl Fn(f64, f64) -> Option<(f64, f64)>,
) -> Result<Vec<(f64, f64)>> {
    let mut points = Vec::new();
    for (t, p) in curve.window(window.0, window.1) {
        match map(t, p) {
            Some(point) if point.0.is_finite() && point.1.is_finite() => points.push(point),
            _ => {
                return Err(Error::domain(
                    "fit",
                    format!("sample p = {p} at t = {t} cannot be fitted on a log scale"),
                ))
            }
        }
    }
    if points.len() < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientData {
            needed: MIN_FIT_SAMPLES,
            got: points.len(),
        });
    }
    Ok(points)
}

/// Exponential-law fit `ln P = ln P₀ - Γ t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentialFit {
    pub gamma: f64,
    pub window: (f64, f64),
    pub rms_residual: f64,
    pub samples: usize,
}

impl ExponentialFit {
    pub fn lifetime(&self) -> f64 {
        1.0 / self.gamma
    }

    pub fn half_life(&self) -> f64 {
        std::f64::consts::LN_2 / self.gamma
    }
}

/// Least squares on `ln p` against `t` over the window.
pub fn fit_exponential(curve: &DecayCurve, window: (f64, f64)) -> Result<ExponentialFit> {
    let points = window_points(curve, window, |t, p| (p > 0.0).then(|| (t, p.ln())))?;
    let line = fit_line(&points)?;
    Ok(ExponentialFit {
        gamma: -line.slope,
        window,
        rms_residual: line.rms_residual,
        samples: line.samples,
    })
}

/// What a power-law fit is taken of.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerMode {
    /// `log P` against `log t`.
    Survival,
    /// `log(1 - P)` against `log t`.
    Escaped,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerFit {
    pub exponent: f64,
    pub window: (f64, f64),
    pub mode: PowerMode,
    pub rms_residual: f64,
    pub samples: usize,
}

/// Slope of the log-log line over the window.
pub fn fit_power(curve: &DecayCurve, window: (f64, f64), mode: PowerMode) -> Result<PowerFit> {
    let points = window_points(curve, window, |t, p| {
        let y = match mode {
            PowerMode::Survival => p,
            PowerMode::Escaped => 1.0 - p,
        };
        (t > 0.0 && y > 0.0).then(|| (t.ln(), y.ln()))
    })?;
    let line = fit_line(&points)?;
    Ok(PowerFit {
        exponent: line.slope,
        window,
        mode,
        rms_residual: line.rms_residual,
        samples: line.samples,
    })
}

/// All three decay-law fits for one curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub exponential: ExponentialFit,
    pub early: PowerFit,
    pub late: PowerFit,
}

impl DecayFit {
    /// `key=value` lines.
    pub fn report(&self) -> String {
        let e = &self.exponential;
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            out.push_str(k);
            out.push('=');
            out.push_str(&v);
            out.push('\n');
        };
        line("gamma", crate::io::fmt_f64(e.gamma));
        line("lifetime", crate::io::fmt_f64(e.lifetime()));
        line("half_life", crate::io::fmt_f64(e.half_life()));
        line("exp_window", format!("{},{}", e.window.0, e.window.1));
        line("exp_rms_residual", crate::io::fmt_f64(e.rms_residual));
        line("early_exponent", crate::io::fmt_f64(self.early.exponent));
        line("early_window", format!("{},{}", self.early.window.0, self.early.window.1));
        line("early_rms_residual", crate::io::fmt_f64(self.early.rms_residual));
        line("late_exponent", crate::io::fmt_f64(self.late.exponent));
        line("late_window", format!("{},{}", self.late.window.0, self.late.window.1));
        line("late_rms_residual", crate::io::fmt_f64(self.late.rms_residual));
        out
    }

    /// CSV with columns `fit, value, window_lo, window_hi, rms_residual`;
    /// the `fit` column is 0 for Γ, 1 for the early and 2 for the late
    /// exponent.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let e = &self.exponential;
        let rows = vec![
            vec![0.0, e.gamma, e.window.0, e.window.1, e.rms_residual],
            vec![1.0, self.early.exponent, self.early.window.0, self.early.window.1, self.early.rms_residual],
            vec![2.0, self.late.exponent, self.late.window.0, self.late.window.1, self.late.rms_residual],
        ];
        write_columns(out, &["fit", "value", "window_lo", "window_hi", "rms_residual"], &rows)
    }
}

/// Nuclear charge seen from outside: the ensemble step function and its
/// continuum limit.
#[derive(Debug, Clone, PartialEq)]
pub struct ChargeCurve {
    pub z0: f64,
    pub n: usize,
    pub times: Vec<f64>,
    pub z_ensemble: Vec<f64>,
    pub z_continuum: Vec<f64>,
}

impl ChargeCurve {
    pub fn max_deviation(&self) -> f64 {
        self.z_ensemble
            .iter()
            .zip(&self.z_continuum)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// CSV with columns `t, z_ensemble, z_continuum`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let rows: Vec<Vec<f64>> = (0..self.times.len())
            .map(|i| vec![self.times[i], self.z_ensemble[i], self.z_continuum[i]])
            .collect();
        write_columns(out, &["t", "z_ensemble", "z_continuum"], &rows)
    }
}

/// `Z(t) = z0 - 2n/N` between consecutive escapes (right-continuous) and
/// `z0 - 2[1 - P(t)]` from the sampled curve. `escape_times` must be sorted.
pub fn charge_curve(z0: f64, n: usize, escape_times: &[f64], curve: &DecayCurve) -> Result<ChargeCurve> {
    if n == 0 {
        return Err(Error::InvalidParams("ensemble size N must be positive".into()));
    }
    if escape_times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::domain("charge_curve", "escape times are not sorted"));
    }
    let nf = n as f64;
    let z_ensemble = curve
        .times
        .iter()
        .map(|&t| z0 - 2.0 * escape_times.partition_point(|&te| te <= t) as f64 / nf)
        .collect();
    let z_continuum = curve.p.iter().map(|&p| z0 - 2.0 * (1.0 - p)).collect();
    Ok(ChargeCurve {
        z0,
        n,
        times: curve.times.clone(),
        z_ensemble,
        z_continuum,
    })
}
