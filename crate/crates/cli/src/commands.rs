//! One function per subcommand.

use bohm_decay::io::{fmt_f64, write_columns};
use bohm_decay::observables::{charge_curve, fit_exponential, fit_power, DecayFit, PowerMode};
use bohm_decay::probability::{cumulative, linear_grid, log_grid, nonescape};
use bohm_decay::trajectories::{
    check_noncrossing, escape_times, integrate_labels, integrate_through, write_events_csv, write_trajectories_csv,
    Direction, Trajectory, TrajectoryOptions,
};
use bohm_decay::{DecayCurve, Ensemble, ModelParams, PoleTable, Truncation, Wavefield};
use rayon::prelude::*;
use std::io::Write;

use crate::config::RunConfig;
use crate::run::{Failure, Run};

/// Largest grid `fig4` will evaluate.
const MAX_SURFACE_POINTS: usize = 10_000_000;

fn params(c: &RunConfig) -> Result<ModelParams, Failure> {
    ModelParams::new(c.lambda, c.a).map_err(|e| Failure::Config(e.to_string()))
}

fn field(c: &RunConfig) -> Result<Wavefield, Failure> {
    let table = PoleTable::find(params(c)?, c.table_order)?;
    Ok(Wavefield::with_truncation(
        table,
        Truncation::Adaptive {
            min_order: c.v,
            tolerance: c.truncation_tolerance,
        },
    ))
}

fn options(c: &RunConfig, t_end: f64) -> TrajectoryOptions {
    TrajectoryOptions {
        t0: c.t0,
        t_end,
        rtol: c.rtol,
        atol: c.atol,
        ..TrajectoryOptions::default()
    }
}

fn ensemble(c: &RunConfig, field: &Wavefield, n: usize, t_end: f64) -> Result<Ensemble, Failure> {
    Ok(Ensemble::integrate(field, n, &options(c, t_end))?)
}

/// `0, h, 2h, …` up to `hi`, built from the index so reruns agree bitwise.
fn steps(hi: f64, h: f64) -> Vec<f64> {
    let n = (hi / h + 1e-9).floor() as usize;
    (0..=n).map(|i| i as f64 * h).collect()
}

fn key_values(lines: &[(&str, String)]) -> String {
    lines.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

pub fn poles(c: &RunConfig, name: &str) -> Result<(), Failure> {
    let table = PoleTable::find(params(c)?, c.v)?;
    let d = table.diagnostics();
    let mut run = Run::new(c, name);
    run.file("poles.csv", |w| Ok(table.write_csv(w)?))?;
    run.note("poles", table.poles().len());
    run.note("max_residual", d.max_residual);
    run.note("symmetry_defect", d.symmetry_defect);
    run.note("min_separation", d.min_separation);
    run.note("sum_c_over_k", vec![d.sum_c_over_k.re, d.sum_c_over_k.im]);
    run.note("sum_c", vec![d.sum_c.re, d.sum_c.im]);
    if let Some(first) = table.pole(1) {
        run.note("k1", vec![first.k.re, first.k.im]);
    }
    run.finish()
}

pub fn fig1(c: &RunConfig, name: &str) -> Result<(), Failure> {
    let n = c.ensemble_size(30);
    let t_end = c.end_time(3.0);
    let field = field(c)?;
    let ens = ensemble(c, &field, n, t_end)?;
    let a = c.a;

    let grid = linear_grid(c.t0, t_end, 300);
    let crossing = check_noncrossing(&ens, &grid);

    // Trajectories inside the barrier against P(t): equivariance puts the
    // label s inside exactly when s < P(t), so the counts differ by < 1/N.
    let mut density_deviation: f64 = 0.0;
    for &t in linear_grid(0.1_f64.min(t_end), t_end, 30).iter() {
        let inside = ens
            .trajectories
            .iter()
            .filter(|tr| tr.position_at(t).is_some_and(|r| r < a))
            .count();
        let p = nonescape(&field, t)?;
        density_deviation = density_deviation.max((inside as f64 / n as f64 - p).abs());
    }

    let mut run = Run::new(c, name);
    run.file("fig1_trajectories.csv", |w| Ok(ens.write_csv(w)?))?;
    run.file("fig1_events.csv", |w| Ok(ens.write_events_csv(w)?))?;
    run.note("trajectories", ens.trajectories.len());
    run.note("noncrossing_min_gap", crossing.min_gap);
    run.note("noncrossing_holds", crossing.holds());
    run.note("density_max_deviation", density_deviation);
    run.note("density_bound", 1.0 / n as f64);
    if let Some(mid) = ens.trajectories.iter().find(|tr| (tr.s0 - 0.5).abs() < 1e-12) {
        run.note("first_escape_s_half", mid.first_escape_time());
    }
    run.finish()
}

pub fn fig2(c: &RunConfig, name: &str) -> Result<(), Failure> {
    let n = c.ensemble_size(30);
    let t_end = c.end_time(5.0);
    let field = field(c)?;
    let ens = ensemble(c, &field, n, t_end)?;
    let times = escape_times(&ens)?;
    let tau = c.reference_lifetime;
    let nf = n as f64;

    // exponential law: (N - n)/N = exp(-t_n/τ)
    let rows: Vec<Vec<f64>> = times
        .iter()
        .map(|&(k, t)| {
            let reference = tau * (nf / (nf - k as f64)).ln();
            vec![k as f64, t, reference, t - reference]
        })
        .collect();
    let max_dev = rows.iter().map(|r| r[3].abs()).fold(0.0, f64::max);
    let mean_dev = rows.iter().map(|r| r[3].abs()).sum::<f64>() / rows.len() as f64;

    let grid = linear_grid(c.t0, t_end, 201);
    let curve = DecayCurve::compute(&field, &grid)?;
    let reference: Vec<Vec<f64>> = grid
        .iter()
        .zip(&curve.p)
        .map(|(&t, &p)| vec![t, (-t / tau).exp(), p, ens_fraction(&times, n, t)])
        .collect();

    let mut run = Run::new(c, name);
    run.file("fig2_escapes.csv", |w| {
        Ok(write_columns(w, &["n", "t_n", "t_exponential", "deviation"], &rows)?)
    })?;
    run.file("fig2_reference.csv", |w| {
        Ok(write_columns(w, &["t", "p_exponential", "p", "p_ensemble"], &reference)?)
    })?;
    run.note("escapes", times.len());
    run.note("max_abs_deviation", max_dev);
    run.note("mean_abs_deviation", mean_dev);
    run.finish()
}

/// `(N - #escaped by t)/N`.
fn ens_fraction(times: &[(usize, f64)], n: usize, t: f64) -> f64 {
    let escaped = times.iter().filter(|(_, te)| *te <= t).count();
    (n - escaped) as f64 / n as f64
}

pub fn fig2a(c: &RunConfig, name: &str) -> Result<(), Failure> {
    let n = c.ensemble_size(100);
    let t_end = c.end_time(5.0);
    let first = 25.min(n - 1);
    let field = field(c)?;
    // the outermost labels escape first
    let labels: Vec<f64> = (1..=first).map(|k| (n - k) as f64 / n as f64).collect();
    let runs = integrate_labels(&field, &labels, &options(c, t_end))?;
    let mut escapes = Vec::with_capacity(runs.len());
    for tr in &runs {
        match tr.final_escape_time {
            Some(t) => escapes.push(t),
            None => {
                return Err(Failure::Numerical(format!(
                    "trajectory s0 = {} has no final escape before t = {t_end}",
                    tr.s0
                )))
            }
        }
    }
    escapes.sort_by(f64::total_cmp);
    let rows: Vec<Vec<f64>> = escapes
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let k = (i + 1) as f64;
            vec![k, k.sqrt(), t, t / k.sqrt()]
        })
        .collect();

    // straight line through the origin over the first three
    let head = &rows[..rows.len().min(3)];
    let slope = head.iter().map(|r| r[1] * r[2]).sum::<f64>() / head.iter().map(|r| r[0]).sum::<f64>();
    let spread = head.iter().map(|r| (r[3] / slope - 1.0).abs()).fold(0.0, f64::max);

    let [lo, hi] = c.early_window;
    let curve = DecayCurve::compute(&field, &log_grid(lo, hi, 30))?;
    let early = fit_power(&curve, (lo, hi), PowerMode::Escaped)?;

    let report = key_values(&[
        ("origin_slope", fmt_f64(slope)),
        ("origin_max_relative_deviation", fmt_f64(spread)),
        ("early_exponent", fmt_f64(early.exponent)),
        ("early_window", format!("{lo},{hi}")),
        ("early_rms_residual", fmt_f64(early.rms_residual)),
    ]);

    let mut run = Run::new(c, name);
    run.file("fig2a_escapes.csv", |w| {
        Ok(write_columns(w, &["n", "sqrt_n", "t_n", "t_over_sqrt_n"], &rows)?)
    })?;
    run.file("fig2a_fit.txt", |w| Ok(w.write_all(report.as_bytes())?))?;
    run.note("origin_slope", slope);
    run.note("origin_max_relative_deviation", spread);
    run.note("early_exponent", early.exponent);
    run.finish()
}

pub fn fig3(c: &RunConfig, name: &str) -> Result<(), Failure> {
    let t_end = c.end_time(14.0);
    if t_end < c.fig3_t_start || c.fig3_t_start <= c.t0 {
        return Err(Failure::Config(format!(
            "need t0 < fig3_t_start <= t_end, got {} / {} / {t_end}",
            c.t0, c.fig3_t_start
        )));
    }
    let count = ((c.fig3_r_max - c.fig3_r_min) / c.fig3_dr + 1e-9).floor() as usize + 1;
    let seeds: Vec<f64> = (0..count).map(|i| c.fig3_r_min + i as f64 * c.fig3_dr).collect();
    let field = field(c)?;
    let opts = options(c, t_end);
    let traces: Result<Vec<_>, _> = seeds
        .par_iter()
        .map(|&r| integrate_through(&field, r, c.fig3_t_start, &opts))
        .collect();
    let traces = traces?;

    let mut rows = Vec::with_capacity(traces.len());
    for (trace, &r) in traces.iter().zip(&seeds) {
        let tr = &trace.trajectory;
        let inward = tr.crossings.iter().filter(|x| x.direction == Direction::In).count();
        // label recomputed at the seed as a consistency check
        let s_seed = cumulative(&field, r, c.fig3_t_start)?;
        rows.push(vec![r, trace.r_at_t0, tr.r0, tr.s0, s_seed, tr.crossings.len() as f64, inward as f64]);
    }
    let trajectories: Vec<Trajectory> = traces.into_iter().map(|t| t.trajectory).collect();
    let back_and_forth = rows.iter().filter(|r| r[6] > 0.0).count();

    let mut run = Run::new(c, name);
    run.file("fig3_trajectories.csv", |w| Ok(write_trajectories_csv(w, &trajectories)?))?;
    run.file("fig3_events.csv", |w| Ok(write_events_csv(w, &trajectories)?))?;
    run.file("fig3_seeds.csv", |w| {
        Ok(write_columns(
            w,
            &["r_seed", "r_t0", "r0", "s0", "s_seed", "crossings", "inward_crossings"],
            &rows,
        )?)
    })?;
    run.note("trajectories", trajectories.len());
    run.note("r0_range", vec![rows[0][2], rows[rows.len() - 1][2]]);
    run.note("s0_range", vec![rows[0][3], rows[rows.len() - 1][3]]);
    run.note("trajectories_with_inward_crossings", back_and_forth);
    run.finish()
}

pub fn fig4(c: &RunConfig, name: &str) -> Result<(), Failure> {
    let radii = steps(c.surface_r_max, c.surface_dr);
    let times: Vec<f64> = steps(c.surface_t_max, c.surface_dt).into_iter().filter(|&t| t >= 0.05).collect();
    let points = radii.len().saturating_mul(times.len());
    if points > MAX_SURFACE_POINTS {
        return Err(Failure::Config(format!("surface grid of {points} points exceeds {MAX_SURFACE_POINTS}")));
    }
    if times.is_empty() {
        return Err(Failure::Config("surface_t_max leaves no times at or after 0.05".into()));
    }
    let field = field(c)?;
    let blocks: Result<Vec<Vec<Vec<f64>>>, _> = times
        .par_iter()
        .map(|&t| field.potential_surface(&radii, &[t]))
        .collect();
    let rows: Vec<Vec<f64>> = blocks?.into_iter().flatten().collect();

    // U across the barrier at t = 0.5, if that time is on the grid's range
    let a = c.a;
    let mut run = Run::new(c, name);
    if c.surface_t_max >= 0.5 {
        let inner = field.sample(a * (1.0 - 1e-7), 0.5)?.u;
        let outer = field.sample(a * (1.0 + 1e-7), 0.5)?.u;
        run.note("u_jump_at_barrier", (outer - inner).abs());
    }
    let nodes = rows.iter().filter(|r| r[2].is_nan()).count();
    run.file("fig4_surface.csv", |w| Ok(write_columns(w, &["r", "t", "u"], &rows)?))?;
    run.note("points", rows.len());
    run.note("nodes", nodes);
    run.finish()
}

/// Log grid over the whole run plus a linear grid in every fit window, so
/// each fit gets enough samples whatever `decay_samples` is.
fn decay_times(c: &RunConfig, t_end: f64) -> Vec<f64> {
    let mut times = log_grid(c.t0, t_end, c.decay_samples.max(2));
    for [lo, hi] in [c.exp_window, c.early_window, c.late_window] {
        times.extend(linear_grid(lo, hi, 41).into_iter().filter(|&t| t >= c.t0 && t <= t_end));
    }
    times.sort_by(f64::total_cmp);
    times.dedup();
    times
}

pub fn decay(c: &RunConfig, name: &str) -> Result<(), Failure> {
    let n = c.ensemble_size(100);
    let t_end = c.end_time(60.0);
    let field = field(c)?;
    let curve = DecayCurve::compute(&field, &decay_times(c, t_end))?;
    let window = |w: [f64; 2]| (w[0], w[1]);
    let fit = DecayFit {
        exponential: fit_exponential(&curve, window(c.exp_window))?,
        early: fit_power(&curve, window(c.early_window), PowerMode::Escaped)?,
        late: fit_power(&curve, window(c.late_window), PowerMode::Survival)?,
    };

    // Charge: P sampled at 0, just before and at every escape, and at the end.
    let ens = ensemble(c, &field, n, c.charge_t_end)?;
    let escapes: Vec<f64> = escape_times(&ens)?.into_iter().map(|(_, t)| t).collect();
    let mut times = vec![0.0];
    for &t in &escapes {
        times.push(t * (1.0 - 1e-12));
        times.push(t);
    }
    times.push(c.charge_t_end.max(*escapes.last().unwrap_or(&0.0)));
    let mut p = vec![1.0];
    p.extend(times[1..].par_iter().map(|&t| nonescape(&field, t)).collect::<Result<Vec<_>, _>>()?);
    let charge = charge_curve(c.z0, n, &escapes, &DecayCurve { times, p })?;

    let mut run = Run::new(c, name);
    run.file("decay.csv", |w| Ok(curve.write_csv(w)?))?;
    run.file("fit.txt", |w| Ok(w.write_all(fit.report().as_bytes())?))?;
    run.file("fit.csv", |w| Ok(fit.write_csv(w)?))?;
    run.file("charge.csv", |w| Ok(charge.write_csv(w)?))?;
    run.note("gamma", fit.exponential.gamma);
    run.note("lifetime", fit.exponential.lifetime());
    run.note("early_exponent", fit.early.exponent);
    run.note("late_exponent", fit.late.exponent);
    run.note("charge_max_deviation", charge.max_deviation());
    run.note("charge_bound", 2.0 / n as f64);
    run.finish()
}
