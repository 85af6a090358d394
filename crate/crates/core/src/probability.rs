//! Probabilities from `|ψ|²`: the nonescape probability `P(t)`, the
//! start-label map `s(r₀)` of the initial state and the cumulative
//! probability `∫_0^r |ψ|²` together with its inverse.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::io::write_columns;
use crate::quadrature::{self, Tolerance, DEFAULT_MAX_SUBDIVISIONS};
use crate::wavefield::Wavefield;

/// Absolute tolerance of every probability integral.
pub const PROBABILITY_TOLERANCE: f64 = 1e-10;

/// `s(r₀) = r₀/a - sin(2πr₀/a)/(2π)`, the initial probability inside `r₀`.
pub fn start_label(r0: f64, a: f64) -> Result<f64> {
    if !(a > 0.0) || !(0.0..=a).contains(&r0) {
        return Err(Error::domain("start_label", format!("r0 = {r0} outside [0, {a}]")));
    }
    let x = r0 / a;
    Ok(x - (2.0 * PI * x).sin() / (2.0 * PI))
}

/// Inverse of [`start_label`] to `|s(r₀) - s| <= 1e-12`.
pub fn start_label_inverse(s: f64, a: f64) -> Result<f64> {
    if !(a > 0.0) || !(0.0..=1.0).contains(&s) {
        return Err(Error::domain("start_label_inverse", format!("s = {s} outside [0, 1]")));
    }
    if s == 0.0 || s == 1.0 {
        return Ok(s * a);
    }
    // s(x) = x - sin(2πx)/2π is monotone with s'(x) = 2 sin²(πx); Newton
    // safeguarded by the bracket.
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    // Start from the small-x expansion s ≈ (2π²/3) x³ near the ends.
    let mut x = if s < 0.5 {
        (1.5 * s / (PI * PI)).cbrt().min(0.5)
    } else {
        1.0 - (1.5 * (1.0 - s) / (PI * PI)).cbrt().min(0.5)
    };
    for _ in 0..200 {
        let f = x - (2.0 * PI * x).sin() / (2.0 * PI) - s;
        if f.abs() <= 1e-15 * s.clamp(1e-300, 1.0) {
            break;
        }
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let slope = 2.0 * (PI * x).sin().powi(2);
        let mut next = x - f / slope;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if next == x || hi - lo <= f64::EPSILON * x {
            break;
        }
        x = next;
    }
    Ok(x * a)
}

/// Quadrature breakpoints on `[lo, hi]`: the barrier, then panels no wider
/// than `√t` so the short-time oscillations are resolved.
fn breakpoints(lo: f64, hi: f64, a: f64, t: f64, max_width: f64) -> Vec<f64> {
    let width = t.sqrt().min(max_width).max(1e-6);
    let mut cuts = vec![lo];
    let push_range = |from: f64, to: f64, cuts: &mut Vec<f64>| {
        if to <= from {
            return;
        }
        let n = ((to - from) / width).ceil().max(1.0) as usize;
        for i in 1..=n {
            cuts.push(if i == n { to } else { from + (to - from) * i as f64 / n as f64 });
        }
    };
    if lo < a && hi > a {
        push_range(lo, a, &mut cuts);
        push_range(a, hi, &mut cuts);
    } else {
        push_range(lo, hi, &mut cuts);
    }
    cuts
}

fn check_time(op: &'static str, t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(op, format!("t = {t} must be positive")))
    }
}

/// `P(t) = ∫_0^a |ψ(r,t)|² dr`.
pub fn nonescape(field: &Wavefield, t: f64) -> Result<f64> {
    check_time("nonescape", t)?;
    let a = field.params().a;
    integrate_density(field, 0.0, a, t, Tolerance::absolute(PROBABILITY_TOLERANCE))
}

/// `1 - P(t)` computed directly as `∫_a^{R_max} |ψ|²`, which keeps its
/// relative accuracy when almost nothing has escaped.
pub fn escaped(field: &Wavefield, t: f64) -> Result<f64> {
    check_time("escaped", t)?;
    let a = field.params().a;
    let tol = Tolerance {
        abs: PROBABILITY_TOLERANCE,
        rel: 1e-9,
    };
    integrate_density(field, a, field.r_max(t), t, tol)
}

/// `∫_0^{r_upper} |ψ(r,t)|² dr`.
pub fn cumulative(field: &Wavefield, r_upper: f64, t: f64) -> Result<f64> {
    check_time("cumulative", t)?;
    if !(r_upper >= 0.0) {
        return Err(Error::domain("cumulative", format!("r_upper = {r_upper} must be >= 0")));
    }
    integrate_density(field, 0.0, r_upper, t, Tolerance::absolute(PROBABILITY_TOLERANCE))
}

/// Total probability inside `R_max(t)`; 1 up to truncation error.
pub fn norm(field: &Wavefield, t: f64) -> Result<f64> {
    cumulative(field, field.r_max(t), t)
}

fn integrate_density(field: &Wavefield, lo: f64, hi: f64, t: f64, tol: Tolerance) -> Result<f64> {
    let a = field.params().a;
    let cuts = breakpoints(lo, hi, a, t, 1.0);
    quadrature::integrate(
        |r| field.density(r, t),
        &cuts,
        tol,
        DEFAULT_MAX_SUBDIVISIONS.max(4 * cuts.len()),
    )
}

/// Radius `r` with `∫_0^r |ψ(r',t)|² dr' = s`.
///
/// Integrates panel by panel until the panel holding `s` is found, then
/// solves inside it by Newton's method safeguarded by bisection. The
/// tolerance is `1e-10` absolute, tightened to `1e-7·s` for tiny `s`.
pub fn cumulative_inverse(field: &Wavefield, s: f64, t: f64) -> Result<f64> {
    check_time("cumulative_inverse", t)?;
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::domain("cumulative_inverse", format!("s = {s} outside (0, 1)")));
    }
    let a = field.params().a;
    let abs_tol = PROBABILITY_TOLERANCE.min(1e-7 * s);
    let cuts = breakpoints(0.0, field.r_max(t), a, t, 1.0);
    let panel_tol = Tolerance {
        abs: abs_tol,
        rel: 1e-12,
    };
    let density = |r: f64| field.density(r, t);
    let mut below = 0.0;
    for pair in cuts.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        let mass = quadrature::integrate(density, &[lo, hi], panel_tol, DEFAULT_MAX_SUBDIVISIONS)?;
        if below + mass < s {
            below += mass;
            continue;
        }
        return solve_in_panel(field, t, s - below, lo, hi, mass, abs_tol);
    }
    Err(Error::Bracket {
        target: s,
        captured: below,
    })
}

/// Finds `r ∈ [lo, hi]` with `∫_lo^r |ψ|² = target`, where the whole panel
/// holds `mass >= target`.
fn solve_in_panel(
    field: &Wavefield,
    t: f64,
    target: f64,
    lo: f64,
    hi: f64,
    mass: f64,
    abs_tol: f64,
) -> Result<f64> {
    let tol = Tolerance {
        abs: 0.1 * abs_tol,
        rel: 1e-13,
    };
    let density = |r: f64| field.density(r, t);
    let (mut a, mut b) = (lo, hi);
    let mut x = lo + (hi - lo) * (target / mass).clamp(0.0, 1.0);
    for _ in 0..200 {
        let partial = quadrature::integrate(density, &[lo, x], tol, DEFAULT_MAX_SUBDIVISIONS)?;
        let f = partial - target;
        if f.abs() <= abs_tol {
            return Ok(x);
        }
        if f > 0.0 {
            b = x;
        } else {
            a = x;
        }
        let slope = field.density(x, t);
        let mut next = if slope > 0.0 { x - f / slope } else { f64::NAN };
        if !(next > a && next < b) {
            next = 0.5 * (a + b);
        }
        if b - a <= 4.0 * f64::EPSILON * b.abs().max(1e-300) {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::Bracket {
        target,
        captured: mass,
    })
}

/// Sampled nonescape probability.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayCurve {
    pub times: Vec<f64>,
    pub p: Vec<f64>,
}

impl DecayCurve {
    /// Evaluates `P` at every time, in parallel when the `parallel` feature
    /// is on.
    pub fn compute(field: &Wavefield, times: &[f64]) -> Result<Self> {
        #[cfg(feature = "parallel")]
        let p: Result<Vec<f64>> = {
            use rayon::prelude::*;
            times.par_iter().map(|&t| nonescape(field, t)).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let p: Result<Vec<f64>> = times.iter().map(|&t| nonescape(field, t)).collect();
        Ok(Self {
            times: times.to_vec(),
            p: p?,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Samples with `lo <= t <= hi`.
    pub fn window(&self, lo: f64, hi: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times
            .iter()
            .zip(&self.p)
            .filter(move |(t, _)| **t >= lo && **t <= hi)
            .map(|(t, p)| (*t, *p))
    }

    /// Linear interpolation in `t`; clamps outside the sampled range.
    pub fn interpolate(&self, t: f64) -> f64 {
        match self.times.iter().position(|&x| x >= t) {
            None => *self.p.last().unwrap_or(&f64::NAN),
            Some(0) => self.p[0],
            Some(i) => {
                let (t0, t1) = (self.times[i - 1], self.times[i]);
                let w = (t - t0) / (t1 - t0);
                self.p[i - 1] * (1.0 - w) + self.p[i] * w
            }
        }
    }

    /// CSV with columns `t, p, log_p`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let rows: Vec<Vec<f64>> = self
            .times
            .iter()
            .zip(&self.p)
            .map(|(&t, &p)| vec![t, p, p.ln()])
            .collect();
        write_columns(out, &["t", "p", "log_p"], &rows)
    }
}

/// `n` points spaced evenly in `log t` over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![lo];
    }
    let (l, h) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                (l + (h - l) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// `n` evenly spaced points over `[lo, hi]`.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![lo];
    }
    (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poles::{ModelParams, PoleTable};
    use crate::wavefield::DEFAULT_TABLE_ORDER;
    use std::sync::OnceLock;

    fn field() -> &'static Wavefield {
        static FIELD: OnceLock<Wavefield> = OnceLock::new();
        FIELD.get_or_init(|| Wavefield::adaptive(ModelParams::default(), 100, DEFAULT_TABLE_ORDER).unwrap())
    }

    #[test]
    fn start_label_values() {
        assert_eq!(start_label(0.0, 1.0).unwrap(), 0.0);
        assert!((start_label(1.0, 1.0).unwrap() - 1.0).abs() < 1e-16);
        assert!((start_label(0.5, 1.0).unwrap() - 0.5).abs() < 1e-16);
        let got = start_label(0.25, 1.0).unwrap();
        assert!((got - 0.090_845_056_908_104_66).abs() < 1e-15);
        assert!((start_label(0.5, 2.0).unwrap() - start_label(0.25, 1.0).unwrap()).abs() < 1e-16);
        assert!(start_label(1.1, 1.0).is_err());
        assert!(start_label(-0.1, 1.0).is_err());
    }

    #[test]
    fn start_label_inverse_values() {
        assert_eq!(start_label_inverse(0.0, 1.0).unwrap(), 0.0);
        assert!((start_label_inverse(0.5, 1.0).unwrap() - 0.5).abs() < 1e-14);
        let r = start_label_inverse(1.0 / 30.0, 1.0).unwrap();
        assert!((r - 0.175_258_674_315_164_73).abs() < 1e-12, "{r}");
        for s in [1e-12, 1e-7, 0.01, 0.3, 0.77, 0.999, 1.0 - 1e-9] {
            let r = start_label_inverse(s, 1.0).unwrap();
            let back = start_label(r, 1.0).unwrap();
            assert!((back - s).abs() <= 1e-12_f64.min(1e-9 * s.max(1e-3)), "s={s}: {back}");
        }
        assert!(start_label_inverse(1.5, 1.0).is_err());
    }

    #[test]
    fn nonescape_stays_within_unit_interval() {
        for t in [1e-3, 0.1, 1.0, 5.0, 20.0] {
            let p = nonescape(field(), t).unwrap();
            assert!((0.0..=1.0 + 1e-9).contains(&p), "t={t}: P={p}");
        }
    }

    #[test]
    fn half_life_near_trajectory_escape() {
        let p = nonescape(field(), 0.468).unwrap();
        assert!((p - 0.5).abs() < 0.01, "P(0.468) = {p}");
    }

    #[test]
    fn escaped_complements_nonescape() {
        for t in [0.01, 0.5, 2.0] {
            let p = nonescape(field(), t).unwrap();
            let q = escaped(field(), t).unwrap();
            assert!((p + q - 1.0).abs() < 1e-6, "t={t}: {p} + {q}");
        }
    }

    #[test]
    fn cumulative_endpoints() {
        let t = 0.7;
        assert_eq!(cumulative(field(), 0.0, t).unwrap(), 0.0);
        let at_a = cumulative(field(), 1.0, t).unwrap();
        assert!((at_a - nonescape(field(), t).unwrap()).abs() < 1e-14);
        assert!((norm(field(), t).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn cumulative_is_increasing() {
        let t = 1.3;
        let mut prev = 0.0;
        for i in 1..=40 {
            let c = cumulative(field(), 0.1 * i as f64, t).unwrap();
            assert!(c > prev, "r={}", 0.1 * i as f64);
            prev = c;
        }
    }

    #[test]
    fn cumulative_inverse_round_trip() {
        let t = 0.9;
        let p = nonescape(field(), t).unwrap();
        assert!((cumulative_inverse(field(), p, t).unwrap() - 1.0).abs() < 1e-8);
        for s in [1e-8, 0.01, 0.2, 0.5, 0.8, 0.97] {
            let r = cumulative_inverse(field(), s, t).unwrap();
            let back = cumulative(field(), r, t).unwrap();
            assert!((back - s).abs() <= 1e-9_f64.min(1e-6 * s), "s={s}: {back}");
        }
    }

    #[test]
    fn cumulative_inverse_at_early_time_matches_start_label() {
        let r = cumulative_inverse(field(), 0.5, 1e-3).unwrap();
        assert!((r - start_label_inverse(0.5, 1.0).unwrap()).abs() <= 1e-3);
    }

    #[test]
    fn cumulative_inverse_rejects_labels_outside_open_interval() {
        let small = Wavefield::new(PoleTable::find(ModelParams::default(), 10).unwrap());
        assert!(cumulative_inverse(&small, 1.0, 1.0).is_err());
        assert!(cumulative_inverse(&small, 0.0, 1.0).is_err());
    }

    #[test]
    fn decay_curve_csv_and_interpolation() {
        let curve = DecayCurve {
            times: vec![1.0, 2.0],
            p: vec![0.5, 0.25],
        };
        assert!((curve.interpolate(1.5) - 0.375).abs() < 1e-15);
        let mut out = Vec::new();
        curve.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("t,p,log_p\n"));
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn grids() {
        let g = log_grid(1e-3, 10.0, 5);
        assert_eq!(g.len(), 5);
        assert_eq!(g[4], 10.0);
        assert!((g[1] - 1e-2).abs() < 1e-15);
        assert_eq!(linear_grid(0.0, 1.0, 3), vec![0.0, 0.5, 1.0]);
    }
}
