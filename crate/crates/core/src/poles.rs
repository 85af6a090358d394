//! S-matrix poles of the delta-shell barrier and the expansion coefficients
//! of the initial state over them.
//!
//! Poles solve `ka·cot(ka) + λ - ika = 0`. All lie in the lower half k-plane;
//! index `ν > 0` labels the fourth quadrant and `ν < 0` its mirror image
//! `k_{-ν} = -conj(k_ν)` in the third quadrant.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::fmt_f64;

const I: Complex64 = Complex64::new(0.0, 1.0);
const ITERATION_BUDGET: usize = 200;
const RESIDUAL_TARGET: f64 = 1e-12;
const DUPLICATE_DISTANCE: f64 = 1e-8;

/// Barrier strength `λ` and radius `a` of `V(r) = (λ/a) δ(r - a)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub lambda: f64,
    pub a: f64,
}

impl ModelParams {
    pub fn new(lambda: f64, a: f64) -> Result<Self> {
        let params = Self { lambda, a };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParams(format!("lambda = {} must be > 0", self.lambda)));
        }
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(Error::InvalidParams(format!("a = {} must be > 0", self.a)));
        }
        Ok(())
    }

    /// `ka·cot(ka) + λ - ika`; zero at a pole.
    pub fn pole_residual(&self, k: Complex64) -> Complex64 {
        let ka = k * self.a;
        ka * ka.cos() / ka.sin() + self.lambda - I * ka
    }

    /// `ka·cos(ka) + (λ - ika)·sin(ka)`, the entire function Newton works on.
    fn pole_function(&self, k: Complex64) -> (Complex64, Complex64) {
        let a = self.a;
        let ka = k * a;
        let (s, c) = (ka.sin(), ka.cos());
        let f = ka * c + (self.lambda - I * ka) * s;
        let df = a * c - ka * a * s - I * a * s + (self.lambda - I * ka) * a * c;
        (f, df)
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        Self { lambda: 6.0, a: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pole {
    pub nu: i64,
    pub k: Complex64,
    pub c: Complex64,
}

/// `2V` poles ordered `ν = 1, -1, 2, -2, …, V, -V`, so any prefix of `2n`
/// entries is the table truncated at order `n`.
#[derive(Debug, Clone)]
pub struct PoleTable {
    params: ModelParams,
    poles: Vec<Pole>,
    truncation_order: usize,
    residual_bound: f64,
}

/// Report-only health check of a [`PoleTable`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableDiagnostics {
    pub truncation_order: usize,
    pub max_residual: f64,
    /// `max_ν |k_{-ν} + conj(k_ν)|`
    pub symmetry_defect: f64,
    /// `Σ c_ν/k_ν`, formally zero.
    pub sum_c_over_k: Complex64,
    /// `Σ c_ν`, formally nonzero.
    pub sum_c: Complex64,
    pub min_separation: f64,
}

fn seed(params: &ModelParams, nu: i64) -> Complex64 {
    let mut ka = Complex64::new(nu as f64 * PI * (1.0 - 1.0 / (params.lambda + 1.0)), -0.2);
    if ka.sin().norm() < 1e-12 {
        ka += 1e-6;
    }
    ka / params.a
}

/// Fixed-point form of the pole equation, `e^{2ika} = 1 - 2ika/λ`, on the
/// branch that belongs to index `ν`. It contracts with factor
/// `1/|λ - 2ika| < 1` for fourth-quadrant roots, so it both refines the seed
/// and pins the root to its index.
fn refine_seed(params: &ModelParams, nu: i64, mut k: Complex64) -> Complex64 {
    let a = params.a;
    for _ in 0..ITERATION_BUDGET {
        let next = (nu as f64 * PI - 0.5 * I * (1.0 - 2.0 * I * k * a / params.lambda).ln()) / a;
        if !(next.re.is_finite() && next.im.is_finite()) {
            break;
        }
        let step = (next - k).norm();
        k = next;
        if step <= 1e-15 * k.norm() {
            break;
        }
    }
    k
}

fn acceptable_residual(params: &ModelParams, k: Complex64) -> f64 {
    // Roundoff floor: the terms of the residual are of size |ka| + λ, and the
    // nearest representable k is off by ε|k|, which moves the residual by
    // ε|k|·|dR/dk|.
    let ka = k * params.a;
    let csc2 = (ka.sin() * ka.sin()).inv();
    let slope = (ka.cos() / ka.sin() - ka * csc2 - I).norm() * ka.norm();
    RESIDUAL_TARGET.max(16.0 * f64::EPSILON * (ka.norm() + params.lambda + slope))
}

fn newton(params: &ModelParams, mut k: Complex64, budget: usize) -> Option<Complex64> {
    for _ in 0..budget {
        let residual = params.pole_residual(k).norm();
        if residual <= RESIDUAL_TARGET {
            return Some(k);
        }
        let (f, df) = params.pole_function(k);
        let step = f / df;
        if !(step.re.is_finite() && step.im.is_finite()) {
            return None;
        }
        k -= step;
        if step.norm() <= 4.0 * f64::EPSILON * k.norm() {
            break;
        }
    }
    let residual = params.pole_residual(k).norm();
    (residual <= acceptable_residual(params, k)).then_some(k)
}

fn grid_scan(params: &ModelParams, nu: i64) -> Complex64 {
    let lo = (nu as f64 - 0.5) * PI;
    let hi = (nu as f64 + 0.5) * PI;
    let depth = params.lambda + 2.0;
    let mut best = (f64::INFINITY, Complex64::new(nu as f64 * PI, -0.5));
    for i in 0..41 {
        for j in 0..41 {
            let re = lo + (hi - lo) * i as f64 / 40.0;
            let im = -depth * j as f64 / 40.0;
            let ka = Complex64::new(re, im);
            if ka.sin().norm() < 1e-12 {
                continue;
            }
            let value = params.pole_residual(ka / params.a).norm();
            if value < best.0 {
                best = (value, ka / params.a);
            }
        }
    }
    best.1
}

fn fourth_quadrant_pole(params: &ModelParams, nu: i64) -> Result<Complex64> {
    let k = refine_seed(params, nu, seed(params, nu));
    if let Some(root) = newton(params, k, ITERATION_BUDGET) {
        if root.re > 0.0 && root.im < 0.0 {
            return Ok(root);
        }
    }
    newton(params, grid_scan(params, nu), ITERATION_BUDGET)
        .filter(|root| root.re > 0.0 && root.im < 0.0)
        .ok_or(Error::PoleConvergence {
            nu,
            iterations: ITERATION_BUDGET,
        })
}

/// Expansion coefficient
/// `c = 2π√(2a) k / ((k²a² - π²)[(1 + λ - ika)cot(ka) - i - ka])`.
pub fn coefficient(params: &ModelParams, k: Complex64) -> Result<Complex64> {
    let ka = k * params.a;
    if (ka * ka - PI * PI).norm() < 1e-10 {
        return Err(Error::DegeneratePole { k });
    }
    let residual = params.pole_residual(k).norm();
    if residual > 1e-10_f64.max(acceptable_residual(params, k)) {
        return Err(Error::domain(
            "coefficient",
            format!("k = {k} is not a pole (residual {residual:e})"),
        ));
    }
    let cot = ka.cos() / ka.sin();
    let bracket = (1.0 + params.lambda - I * ka) * cot - I - ka;
    Ok(2.0 * PI * (2.0 * params.a).sqrt() * k / ((ka * ka - PI * PI) * bracket))
}

fn solve_pair(params: &ModelParams, nu: i64) -> Result<[Pole; 2]> {
    let k = fourth_quadrant_pole(params, nu)?;
    let mirror = newton(params, -k.conj(), ITERATION_BUDGET).ok_or(Error::PoleConvergence {
        nu: -nu,
        iterations: ITERATION_BUDGET,
    })?;
    Ok([
        Pole {
            nu,
            k,
            c: coefficient(params, k)?,
        },
        Pole {
            nu: -nu,
            k: mirror,
            c: coefficient(params, mirror)?,
        },
    ])
}

impl PoleTable {
    /// Finds the `2V` poles `ν = ±1 … ±V` and their coefficients.
    pub fn find(params: ModelParams, order: usize) -> Result<Self> {
        params.validate()?;
        if order == 0 {
            return Err(Error::InvalidParams("pole truncation order V must be >= 1".into()));
        }
        let indices: Vec<i64> = (1..=order as i64).collect();
        #[cfg(feature = "parallel")]
        let pairs: Vec<Result<[Pole; 2]>> = {
            use rayon::prelude::*;
            indices.par_iter().map(|&nu| solve_pair(&params, nu)).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let pairs: Vec<Result<[Pole; 2]>> =
            indices.iter().map(|&nu| solve_pair(&params, nu)).collect();

        let mut poles = Vec::with_capacity(2 * order);
        for pair in pairs {
            poles.extend(pair?);
        }
        // Consecutive fourth-quadrant roots are the only candidates for a
        // collision: the fixed-point branch keeps Re(k_ν) increasing in ν.
        for n in 1..order {
            let (prev, next) = (poles[2 * (n - 1)], poles[2 * n]);
            let separation = (next.k - prev.k).norm();
            if separation < DUPLICATE_DISTANCE || next.k.re <= prev.k.re {
                return Err(Error::DuplicatePole {
                    first: prev.nu,
                    second: next.nu,
                    separation,
                });
            }
        }
        let residual_bound = poles
            .iter()
            .map(|p| params.pole_residual(p.k).norm())
            .fold(0.0, f64::max);
        Ok(Self {
            params,
            poles,
            truncation_order: order,
            residual_bound,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn poles(&self) -> &[Pole] {
        &self.poles
    }

    pub fn truncation_order(&self) -> usize {
        self.truncation_order
    }

    pub fn residual_bound(&self) -> f64 {
        self.residual_bound
    }

    /// Pole with index `nu` (either sign), if present.
    pub fn pole(&self, nu: i64) -> Option<&Pole> {
        if nu == 0 || nu.unsigned_abs() as usize > self.truncation_order {
            return None;
        }
        let base = 2 * (nu.unsigned_abs() as usize - 1);
        Some(&self.poles[if nu > 0 { base } else { base + 1 }])
    }

    /// Copy truncated at a lower order.
    pub fn truncated(&self, order: usize) -> Self {
        let order = order.clamp(1, self.truncation_order);
        let poles = self.poles[..2 * order].to_vec();
        let residual_bound = poles
            .iter()
            .map(|p| self.params.pole_residual(p.k).norm())
            .fold(0.0, f64::max);
        Self {
            params: self.params,
            poles,
            truncation_order: order,
            residual_bound,
        }
    }

    pub fn diagnostics(&self) -> TableDiagnostics {
        verify_table(self)
    }

    /// CSV with columns `nu, re_k, im_k, re_c, im_c, residual`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(["nu", "re_k", "im_k", "re_c", "im_c", "residual"])?;
        for pole in &self.poles {
            writer.write_record([
                pole.nu.to_string(),
                fmt_f64(pole.k.re),
                fmt_f64(pole.k.im),
                fmt_f64(pole.c.re),
                fmt_f64(pole.c.im),
                fmt_f64(self.params.pole_residual(pole.k).norm()),
            ])?;
        }
        writer.flush()?;
        Ok(())
    }
}

/// Convenience wrapper around [`PoleTable::find`].
pub fn find_poles(params: ModelParams, order: usize) -> Result<PoleTable> {
    PoleTable::find(params, order)
}

pub fn verify_table(table: &PoleTable) -> TableDiagnostics {
    let params = table.params;
    let mut diag = TableDiagnostics {
        truncation_order: table.truncation_order,
        max_residual: 0.0,
        symmetry_defect: 0.0,
        sum_c_over_k: Complex64::new(0.0, 0.0),
        sum_c: Complex64::new(0.0, 0.0),
        min_separation: f64::INFINITY,
    };
    for pole in &table.poles {
        diag.max_residual = diag.max_residual.max(params.pole_residual(pole.k).norm());
        diag.sum_c_over_k += pole.c / pole.k;
        diag.sum_c += pole.c;
    }
    for pair in table.poles.chunks_exact(2) {
        diag.symmetry_defect = diag.symmetry_defect.max((pair[1].k + pair[0].k.conj()).norm());
        diag.min_separation = diag.min_separation.min((pair[1].k - pair[0].k).norm());
    }
    for n in 1..table.truncation_order {
        let sep = (table.poles[2 * n].k - table.poles[2 * (n - 1)].k).norm();
        diag.min_separation = diag.min_separation.min(sep);
    }
    diag
}
