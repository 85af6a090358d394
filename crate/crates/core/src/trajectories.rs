//! Bohm trajectories `dr/dt = v(r,t)`: forward and backward integration,
//! barrier crossings, escape times and the non-crossing check.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_columns;
use crate::ode::{self, AcceptedStep, Control, OdeOptions};
use crate::probability::{cumulative, cumulative_inverse, start_label_inverse};
use crate::wavefield::Wavefield;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryOptions {
    /// Start time of forward runs; `r(t0)` comes from the cumulative
    /// probability rather than from `r0`, because the velocity field
    /// oscillates wildly as `t → 0`.
    pub t0: f64,
    pub t_end: f64,
    pub rtol: f64,
    pub atol: f64,
    /// Within this distance of the barrier the step is capped at
    /// `barrier_step`.
    pub barrier_band: f64,
    pub barrier_step: f64,
    /// Crossing times are located to this accuracy.
    pub crossing_tolerance: f64,
}

impl Default for TrajectoryOptions {
    fn default() -> Self {
        Self {
            t0: 1e-3,
            t_end: 5.0,
            rtol: 1e-8,
            atol: 1e-10,
            barrier_band: 0.05,
            barrier_step: 1e-3,
            crossing_tolerance: 1e-12,
        }
    }
}

impl TrajectoryOptions {
    fn ode(&self) -> OdeOptions {
        OdeOptions {
            rtol: self.rtol,
            atol: self.atol,
            initial_step: 1e-6_f64.min(0.01 * self.t0.abs().max(1e-9)),
            ..OdeOptions::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Out,
    In,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Out => "out",
            Direction::In => "in",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub t: f64,
    pub direction: Direction,
}

/// One Bohm trajectory, sampled at the accepted integrator steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Label `s(r0)`, the initial probability inside the starting point.
    pub s0: f64,
    /// Starting point at `t = 0`.
    pub r0: f64,
    /// `(t, r)`, strictly increasing in `t`.
    pub samples: Vec<(f64, f64)>,
    /// `dr/dt` at each sample.
    pub velocities: Vec<f64>,
    pub crossings: Vec<Crossing>,
    /// Last outward crossing, if the trajectory ends outside the barrier.
    pub final_escape_time: Option<f64>,
}

impl Trajectory {
    pub fn start_time(&self) -> f64 {
        self.samples[0].0
    }

    pub fn end_time(&self) -> f64 {
        self.samples[self.samples.len() - 1].0
    }

    pub fn final_position(&self) -> f64 {
        self.samples[self.samples.len() - 1].1
    }

    /// `r(t)` by cubic Hermite interpolation between samples; `None`
    /// outside the integrated range.
    pub fn position_at(&self, t: f64) -> Option<f64> {
        if t < self.start_time() || t > self.end_time() {
            return None;
        }
        let i = self.samples.partition_point(|s| s.0 < t);
        if i == 0 {
            return Some(self.samples[0].1);
        }
        let (t0, r0) = self.samples[i - 1];
        let (t1, r1) = self.samples[i];
        Some(ode::hermite(t0, r0, self.velocities[i - 1], t1, r1, self.velocities[i], t))
    }

    /// First outward crossing.
    pub fn first_escape_time(&self) -> Option<f64> {
        self.crossings.iter().find(|c| c.direction == Direction::Out).map(|c| c.t)
    }

    fn finish(&mut self, a: f64) {
        self.final_escape_time = match self.crossings.last() {
            Some(c) if c.direction == Direction::Out && self.final_position() > a => Some(c.t),
            _ => None,
        };
    }
}

/// Integrates `dr/dt = v` from `(t_start, r_start)` to `t_stop` and records
/// samples and barrier crossings.
fn trace(
    field: &Wavefield,
    t_start: f64,
    r_start: f64,
    t_stop: f64,
    options: &TrajectoryOptions,
) -> Result<(Vec<(f64, f64)>, Vec<f64>, Vec<Crossing>)> {
    let a = field.params().a;
    let band = options.barrier_band;
    let fine = options.barrier_step;
    let velocity = |t: f64, r: f64| field.velocity(r, t);
    // Near the barrier take small steps; further out, do not let one step
    // carry the particle across the band.
    let cap = |_t: f64, r: f64, v: f64| {
        let gap = (r - a).abs();
        if gap < band {
            fine
        } else {
            fine.max((gap - 0.5 * band) / v.abs().max(1e-300))
        }
    };
    let mut steps: Vec<AcceptedStep> = Vec::new();
    let mut crossings = Vec::new();
    let mut failure = None;
    ode::integrate(velocity, t_start, r_start, t_stop, &options.ode(), cap, |step| {
        if (step.y0 - a) * (step.y1 - a) < 0.0 || (step.y1 == a && step.y0 != a) {
            let root = ode::bisect(|t| step.interpolate(t) - a, step.t0, step.t1, options.crossing_tolerance);
            match field.velocity(a, root) {
                Ok(v) => {
                    let direction = if v > 0.0 { Direction::Out } else { Direction::In };
                    crossings.push(Crossing { t: root, direction });
                }
                Err(e) => {
                    failure = Some(e);
                    return Control::Stop;
                }
            }
        }
        steps.push(*step);
        Control::Continue
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let forward = t_stop >= t_start;
    let mut samples = Vec::with_capacity(steps.len() + 1);
    let mut velocities = Vec::with_capacity(steps.len() + 1);
    if let Some(first) = steps.first() {
        samples.push((first.t0, first.y0));
        velocities.push(first.f0);
    } else {
        samples.push((t_start, r_start));
        velocities.push(field.velocity(r_start, t_start)?);
    }
    for s in &steps {
        samples.push((s.t1, s.y1));
        velocities.push(s.f1);
    }
    if !forward {
        samples.reverse();
        velocities.reverse();
        crossings.reverse();
    }
    Ok((samples, velocities, crossings))
}

fn check_label(s0: f64) -> Result<()> {
    if s0 > 0.0 && s0 < 1.0 {
        Ok(())
    } else {
        Err(Error::domain("trajectory", format!("label s0 = {s0} outside (0, 1)")))
    }
}

/// Trajectory with label `s0`, started at `t0` where the cumulative
/// probability equals `s0`.
pub fn integrate_forward(field: &Wavefield, s0: f64, options: &TrajectoryOptions) -> Result<Trajectory> {
    check_label(s0)?;
    if !(options.t0 > 0.0 && options.t_end > options.t0) {
        return Err(Error::domain(
            "integrate_forward",
            format!("need 0 < t0 < t_end, got t0 = {}, t_end = {}", options.t0, options.t_end),
        ));
    }
    let r_start = cumulative_inverse(field, s0, options.t0)?;
    integrate_from(field, s0, options.t0, r_start, options)
}

/// Forward run from a given state `(t_start, r_start)` to `options.t_end`.
pub fn integrate_from(
    field: &Wavefield,
    s0: f64,
    t_start: f64,
    r_start: f64,
    options: &TrajectoryOptions,
) -> Result<Trajectory> {
    check_label(s0)?;
    let a = field.params().a;
    let (samples, velocities, crossings) = trace(field, t_start, r_start, options.t_end, options)?;
    let mut trajectory = Trajectory {
        s0,
        r0: start_label_inverse(s0, a)?,
        samples,
        velocities,
        crossings,
        final_escape_time: None,
    };
    trajectory.finish(a);
    Ok(trajectory)
}

/// Result of tracing a trajectory back in time.
#[derive(Debug, Clone, PartialEq)]
pub struct BackwardTrace {
    pub trajectory: Trajectory,
    /// `r(t0)` at the end of the backward run.
    pub r_at_t0: f64,
}

/// Traces the trajectory through `(t_start, r_start)` back to `t0`. Its
/// label is `cumulative(r(t0), t0)` and `r0` the matching initial point.
pub fn integrate_backward(
    field: &Wavefield,
    r_start: f64,
    t_start: f64,
    t0: f64,
    options: &TrajectoryOptions,
) -> Result<BackwardTrace> {
    if !(t0 > 0.0 && t_start > t0) {
        return Err(Error::domain(
            "integrate_backward",
            format!("need t_start > t0 > 0, got t_start = {t_start}, t0 = {t0}"),
        ));
    }
    let a = field.params().a;
    let (samples, velocities, crossings) = trace(field, t_start, r_start, t0, options)?;
    let r_at_t0 = samples[0].1;
    let s0 = cumulative(field, r_at_t0, t0)?;
    let mut trajectory = Trajectory {
        s0,
        r0: start_label_inverse(s0.clamp(0.0, 1.0), a)?,
        samples,
        velocities,
        crossings,
        final_escape_time: None,
    };
    trajectory.finish(a);
    Ok(BackwardTrace { trajectory, r_at_t0 })
}

/// The trajectory through `(t_start, r_start)` over `[options.t0,
/// options.t_end]`: a backward run to `t0` joined to a forward run to
/// `t_end`.
pub fn integrate_through(
    field: &Wavefield,
    r_start: f64,
    t_start: f64,
    options: &TrajectoryOptions,
) -> Result<BackwardTrace> {
    if !(options.t_end >= t_start) {
        return Err(Error::domain(
            "integrate_through",
            format!("t_end = {} lies before t_start = {t_start}", options.t_end),
        ));
    }
    let mut back = integrate_backward(field, r_start, t_start, options.t0, options)?;
    if options.t_end > t_start {
        let (samples, velocities, crossings) = trace(field, t_start, r_start, options.t_end, options)?;
        let tr = &mut back.trajectory;
        tr.samples.extend_from_slice(&samples[1..]);
        tr.velocities.extend_from_slice(&velocities[1..]);
        tr.crossings.extend(crossings);
        tr.finish(field.params().a);
    }
    Ok(back)
}

/// `N - 1` trajectories with labels `s0 = n/N`, `n = 1 … N-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub n: usize,
    pub options: TrajectoryOptions,
    pub trajectories: Vec<Trajectory>,
}

impl Ensemble {
    pub fn integrate(field: &Wavefield, n: usize, options: &TrajectoryOptions) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParams(format!("ensemble size N = {n} must be >= 2")));
        }
        let labels: Vec<f64> = (1..n).map(|i| i as f64 / n as f64).collect();
        Ok(Self {
            n,
            options: *options,
            trajectories: integrate_labels(field, &labels, options)?,
        })
    }

    /// `P(t) = (N - n)/N` with `n` the number of final escapes up to `t`;
    /// the trajectory still inside is counted as the last one.
    pub fn nonescape(&self, t: f64) -> Result<f64> {
        let escaped = escape_times(self)?.iter().filter(|(_, te)| *te <= t).count();
        Ok((self.n - escaped) as f64 / self.n as f64)
    }

    /// CSV with columns `s0, r0, t, r`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        write_trajectories_csv(out, &self.trajectories)
    }

    /// CSV with columns `s0, n, t_cross, direction` (`+1` out, `-1` in);
    /// `n` numbers the crossings of each trajectory from 1.
    pub fn write_events_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        write_events_csv(out, &self.trajectories)
    }
}

/// Forward runs for arbitrary labels, in parallel when the `parallel`
/// feature is on. The output order follows `labels`.
pub fn integrate_labels(field: &Wavefield, labels: &[f64], options: &TrajectoryOptions) -> Result<Vec<Trajectory>> {
    #[cfg(feature = "parallel")]
    let runs: Vec<Result<Trajectory>> = {
        use rayon::prelude::*;
        labels.par_iter().map(|&s| integrate_forward(field, s, options)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let runs: Vec<Result<Trajectory>> = labels.iter().map(|&s| integrate_forward(field, s, options)).collect();
    runs.into_iter().collect()
}

pub fn write_trajectories_csv<W: std::io::Write>(out: W, trajectories: &[Trajectory]) -> Result<()> {
    let rows: Vec<Vec<f64>> = trajectories
        .iter()
        .flat_map(|tr| tr.samples.iter().map(move |&(t, r)| vec![tr.s0, tr.r0, t, r]))
        .collect();
    write_columns(out, &["s0", "r0", "t", "r"], &rows)
}

pub fn write_events_csv<W: std::io::Write>(out: W, trajectories: &[Trajectory]) -> Result<()> {
    let rows: Vec<Vec<f64>> = trajectories
        .iter()
        .flat_map(|tr| {
            tr.crossings.iter().enumerate().map(move |(i, c)| {
                let sense = match c.direction {
                    Direction::Out => 1.0,
                    Direction::In => -1.0,
                };
                vec![tr.s0, (i + 1) as f64, c.t, sense]
            })
        })
        .collect();
    write_columns(out, &["s0", "n", "t_cross", "direction"], &rows)
}

/// Final escape times `(n, t_n)` in ascending order; `n = 1` escapes first.
pub fn escape_times(ensemble: &Ensemble) -> Result<Vec<(usize, f64)>> {
    let mut times = Vec::with_capacity(ensemble.trajectories.len());
    for tr in &ensemble.trajectories {
        match tr.final_escape_time {
            Some(t) => times.push(t),
            None => {
                return Err(Error::Unescaped {
                    s0: tr.s0,
                    t_end: tr.end_time(),
                })
            }
        }
    }
    times.sort_by(f64::total_cmp);
    Ok(times.into_iter().enumerate().map(|(i, t)| (i + 1, t)).collect())
}

/// Smallest gap between neighbouring trajectories on a time grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonCrossingReport {
    pub min_gap: f64,
    pub at_time: f64,
    /// Index of the lower trajectory of the closest pair.
    pub pair: usize,
    pub checked_times: usize,
}

impl NonCrossingReport {
    pub fn holds(&self) -> bool {
        self.min_gap > 0.0
    }
}

/// Interpolates all trajectories (ordered by label) on `grid` and reports
/// the smallest `r_{i+1}(t) - r_i(t)`. Times outside a trajectory's range
/// are skipped.
pub fn check_noncrossing(ensemble: &Ensemble, grid: &[f64]) -> NonCrossingReport {
    let mut order: Vec<&Trajectory> = ensemble.trajectories.iter().collect();
    order.sort_by(|x, y| x.s0.total_cmp(&y.s0));
    let mut report = NonCrossingReport {
        min_gap: f64::INFINITY,
        at_time: f64::NAN,
        pair: 0,
        checked_times: 0,
    };
    for &t in grid {
        let positions: Option<Vec<f64>> = order.iter().map(|tr| tr.position_at(t)).collect();
        let Some(positions) = positions else { continue };
        report.checked_times += 1;
        for (i, w) in positions.windows(2).enumerate() {
            let gap = w[1] - w[0];
            if gap < report.min_gap {
                report.min_gap = gap;
                report.at_time = t;
                report.pair = i;
            }
        }
    }
    report
}
