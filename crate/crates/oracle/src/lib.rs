//! Crank–Nicolson (implicit midpoint) solver for
//! `i ∂ψ/∂t = -∂²ψ/∂r² + (λ/a) δ(r - a) ψ`, `ψ(0, t) = 0`, on a uniform grid.
//!
//! The delta shell sits on a grid node as a single-node potential `λ/(a·h)`.
//! The far end `r_max` is a hard wall. The kink of the initial state at
//! `r = a` puts a `k⁻⁴` tail into the momentum distribution, and that fast
//! tail reflects off any wall placed at a practical distance. An optional
//! quadratic absorbing potential `-i·W(r)` in front of the wall removes it.
//!
//! Used only as a reference for the pole-series solution.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq)]
pub enum OracleError {
    InvalidGrid(String),
    TooLarge { nodes: usize },
}

impl fmt::Display for OracleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleError::InvalidGrid(msg) => write!(f, "invalid grid: {msg}"),
            OracleError::TooLarge { nodes } => write!(f, "grid of {nodes} nodes exceeds the size limit"),
        }
    }
}

impl std::error::Error for OracleError {}

/// Largest number of interior nodes accepted.
pub const MAX_NODES: usize = 50_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridParams {
    pub lambda: f64,
    pub a: f64,
    pub h: f64,
    pub dt: f64,
    pub r_max: f64,
    pub absorber: Option<Absorber>,
}

impl GridParams {
    /// Hard wall at `r_max`, no absorber.
    pub fn new(lambda: f64, a: f64, h: f64, dt: f64, r_max: f64) -> Self {
        Self { lambda, a, h, dt, r_max, absorber: None }
    }

    pub fn with_absorber(self, start: f64, strength: f64) -> Self {
        Self { absorber: Some(Absorber { start, strength }), ..self }
    }
}

/// `W(r) = strength·((r - start)/(r_max - start))²` for `r > start`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Absorber {
    pub start: f64,
    pub strength: f64,
}

/// Time stepper holding the current state; `psi[j]` is the value at
/// `r = (j + 1)·h`, the boundary nodes `r = 0` and `r = r_max` being zero.
#[derive(Debug, Clone)]
pub struct Stepper {
    params: GridParams,
    psi: Vec<Complex64>,
    steps: usize,
    // LU factors of I + i·dt/2·H
    lower: Vec<Complex64>,
    pivot_inv: Vec<Complex64>,
    off: Complex64,
    diag_explicit: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

fn check(params: &GridParams) -> Result<(usize, usize), OracleError> {
    let GridParams { lambda, a, h, dt, r_max, absorber } = *params;
    if !(a > 0.0 && h > 0.0 && dt > 0.0 && lambda >= 0.0 && r_max > a) {
        return Err(OracleError::InvalidGrid(format!("{params:?}")));
    }
    if let Some(w) = absorber {
        if !(w.start > a && w.start < r_max && w.strength >= 0.0) {
            return Err(OracleError::InvalidGrid(format!("absorber {w:?} must sit in (a, r_max)")));
        }
    }
    let barrier = a / h;
    if (barrier - barrier.round()).abs() > 1e-9 * barrier {
        return Err(OracleError::InvalidGrid(format!("a/h = {barrier} is not an integer")));
    }
    let total = (r_max / h).round();
    if total > (MAX_NODES + 1) as f64 {
        return Err(OracleError::TooLarge { nodes: total as usize });
    }
    Ok((barrier.round() as usize, total as usize))
}

impl Stepper {
    /// Starts from `√(2/a) sin(πr/a)` inside the barrier.
    pub fn new(params: GridParams) -> Result<Self, OracleError> {
        let (barrier, total) = check(&params)?;
        let GridParams { lambda, a, h, dt, .. } = params;
        let n = total - 1;
        let psi: Vec<Complex64> = (1..=n)
            .map(|j| {
                let r = j as f64 * h;
                if j < barrier {
                    Complex64::new((2.0 / a).sqrt() * (PI * r / a).sin(), 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        let half = Complex64::new(0.0, 0.5 * dt);
        let off = -half / (h * h);
        let mut diag = vec![Complex64::new(2.0 / (h * h), 0.0); n];
        diag[barrier - 1] += lambda / (a * h);
        if let Some(w) = params.absorber {
            for (j, d) in diag.iter_mut().enumerate() {
                let r = (j + 1) as f64 * h;
                if r > w.start {
                    let x = (r - w.start) / (params.r_max - w.start);
                    d.im -= w.strength * x * x;
                }
            }
        }
        let implicit: Vec<Complex64> = diag.iter().map(|&d| 1.0 + half * d).collect();
        let diag_explicit = diag.iter().map(|&d| 1.0 - half * d).collect();
        let mut lower = vec![Complex64::new(0.0, 0.0); n];
        let mut pivot_inv = vec![Complex64::new(0.0, 0.0); n];
        let mut pivot = implicit[0];
        pivot_inv[0] = pivot.inv();
        for j in 1..n {
            lower[j] = off * pivot_inv[j - 1];
            pivot = implicit[j] - lower[j] * off;
            pivot_inv[j] = pivot.inv();
        }
        Ok(Self {
            params,
            psi,
            steps: 0,
            lower,
            pivot_inv,
            off,
            diag_explicit,
            scratch: vec![Complex64::new(0.0, 0.0); n],
        })
    }

    pub fn params(&self) -> &GridParams {
        &self.params
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.params.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Interior values at `r = h, 2h, …`.
    pub fn psi(&self) -> &[Complex64] {
        &self.psi
    }

    pub fn step(&mut self) {
        let n = self.psi.len();
        // explicit half: (I - i dt/2 H) ψ
        let off_explicit = -self.off;
        let rhs = &mut self.scratch;
        let psi = &self.psi;
        rhs[0] = self.diag_explicit[0] * psi[0];
        if n > 1 {
            rhs[0] += off_explicit * psi[1];
            rhs[n - 1] = self.diag_explicit[n - 1] * psi[n - 1] + off_explicit * psi[n - 2];
        }
        for j in 1..n.saturating_sub(1) {
            rhs[j] = self.diag_explicit[j] * psi[j] + off_explicit * (psi[j - 1] + psi[j + 1]);
        }
        // forward elimination and back substitution
        for j in 1..n {
            let prev = rhs[j - 1];
            rhs[j] -= self.lower[j] * prev;
        }
        self.psi[n - 1] = rhs[n - 1] * self.pivot_inv[n - 1];
        for j in (0..n - 1).rev() {
            self.psi[j] = (rhs[j] - self.off * self.psi[j + 1]) * self.pivot_inv[j];
        }
        self.steps += 1;
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            t: self.time(),
            h: self.params.h,
            a: self.params.a,
            psi: self.psi.clone(),
        }
    }
}

/// Grid wave function at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub h: f64,
    pub a: f64,
    pub psi: Vec<Complex64>,
}

impl Snapshot {
    pub fn radius(&self, j: usize) -> f64 {
        (j + 1) as f64 * self.h
    }

    /// `h Σ |ψ_j|²`, the norm the scheme conserves.
    pub fn norm(&self) -> f64 {
        self.h * self.psi.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    /// Trapezoid rule for `∫_0^a |ψ|² dr`.
    pub fn nonescape(&self) -> f64 {
        let m = (self.a / self.h).round() as usize;
        let inner: f64 = self.psi[..m - 1].iter().map(|z| z.norm_sqr()).sum();
        self.h * (inner + 0.5 * self.psi[m - 1].norm_sqr())
    }

    /// Trapezoid-rule `L²` distance to `reference` over `[0, r_hi]`.
    pub fn l2_distance<F: Fn(f64) -> Complex64>(&self, reference: F, r_hi: f64) -> f64 {
        let m = ((r_hi / self.h).round() as usize).min(self.psi.len());
        let mut sum = 0.0;
        for j in 0..m {
            let w = if j + 1 == m { 0.5 } else { 1.0 };
            sum += w * (self.psi[j] - reference(self.radius(j))).norm_sqr();
        }
        (self.h * sum).sqrt()
    }
}

/// Evolution with snapshots at the requested times.
#[derive(Debug, Clone)]
pub struct GridSolution {
    pub h: f64,
    pub dt: f64,
    pub r_max: f64,
    pub snapshots: Vec<Snapshot>,
    /// Largest `|norm - 1|` seen at any step.
    pub max_norm_drift: f64,
}

/// Runs to `t_end`, keeping a snapshot at each of `times` (rounded to the
/// nearest step) and at `t_end`.
pub fn evolve_grid(params: GridParams, t_end: f64, times: &[f64], track_norm: bool) -> Result<GridSolution, OracleError> {
    if !(t_end > 0.0) || times.iter().any(|&t| !(0.0..=t_end).contains(&t)) {
        return Err(OracleError::InvalidGrid(format!("snapshot times must lie in [0, {t_end}]")));
    }
    let mut stepper = Stepper::new(params)?;
    let total = (t_end / params.dt).round() as usize;
    let mut wanted: Vec<usize> = times.iter().map(|t| (t / params.dt).round() as usize).collect();
    wanted.push(total);
    wanted.sort_unstable();
    wanted.dedup();
    let mut snapshots = Vec::with_capacity(wanted.len());
    let mut next = wanted.iter().peekable();
    let mut max_norm_drift: f64 = 0.0;
    loop {
        while next.peek() == Some(&&stepper.steps()) {
            snapshots.push(stepper.snapshot());
            next.next();
        }
        if stepper.steps() >= total {
            break;
        }
        stepper.step();
        if track_norm {
            let norm = params.h * stepper.psi().iter().map(|z| z.norm_sqr()).sum::<f64>();
            max_norm_drift = max_norm_drift.max((norm - 1.0).abs());
        }
    }
    Ok(GridSolution {
        h: params.h,
        dt: params.dt,
        r_max: params.r_max,
        snapshots,
        max_norm_drift,
    })
}
