//! Pole-series wave function `ψ(r,t)`, its `r`-derivatives, and the Bohm
//! fields derived from them.
//!
//! Each pole contributes `c_ν [M(k_ν, x, t) + N₋(k_ν, x, t) + χ(x, t)/k_ν]`
//! with `x = r - a`. The `χ/k_ν` piece sums to zero over all poles but
//! cancels the leading `1/k` tail of `M` term by term, so the truncated
//! series converges much faster.
//!
//! That cancellation only holds behind the front `x ≈ 2 Re(k) t` of each
//! omitted pole. Ahead of it an omitted pole contributes
//! `c M ≈ -c χ 2t/(2kt - x)` rather than `-c χ/k`, so the plain accelerated
//! sum leaves a spurious `χ Σ c/k` tail out to the fastest front. The tail is
//! replaced by `χ(x,t) G(x/2t)` with
//! `G(q) = Σ_{kept} c/k - Σ_{omitted} c q/(k (k - q))`, summed over the rest
//! of the pole table. `G(0)` is the plain sum, and `χ G(x/2t)` solves the
//! free equation up to `χ G''/(4t²)`, which is negligible behind the fronts.
//!
//! `ψ'` and `ψ''` are the exact derivatives of the truncated series, so the
//! barrier jump condition holds at any truncation.
//!
//! Inside the barrier the exact solution continues to negative `r` as an odd
//! function, so the even part `[ψ(r) + ψ(-r)]/2` of the truncated series is
//! pure truncation error. Near the origin, where `ψ ∝ r` and the Bohm
//! velocity is `O(r)`, that error would dominate `Im(ψ'/ψ)`; it is
//! subtracted for `r < ORIGIN_BLEND.1`, fully below `ORIGIN_BLEND.0` and
//! with a C² blend in between.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::io::write_columns;
use crate::poles::{ModelParams, PoleTable};
use crate::specfun::{chi_unchecked, fresnel_phase, moshinsky_scaled};

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Below this modulus the Bohm fields are reported as undefined.
pub const NODE_THRESHOLD: f64 = 1e-13;

/// Extra distance beyond the fastest pole front used to truncate integrals
/// over `r`.
pub const FRONT_MARGIN: f64 = 10.0;

/// How many pole pairs contribute at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truncation {
    /// Every pole in the table, at every time.
    Fixed,
    /// At least `min_order` pairs; more at small `t`, where the error of the
    /// truncated series behaves like `1/(λ V³ t^{3/2})` once the front of the
    /// last kept pole is a few `a` beyond the barrier. Capped by the table
    /// size. Poles beyond the active order still enter the tail correction.
    Adaptive {
        min_order: usize,
        /// Target absolute truncation error of ψ.
        tolerance: f64,
    },
}

impl Truncation {
    pub const fn adaptive(min_order: usize) -> Self {
        Truncation::Adaptive {
            min_order,
            tolerance: 5e-9,
        }
    }
}

/// Empirical scale of the truncation error `≈ TAIL_SCALE/(λ V³ t^{3/2})`;
/// the coefficients scale like `1/λ`.
const TAIL_SCALE: f64 = 0.03;

/// The front `2 Re(k_V) t` of the last kept pole must reach this many `a`
/// past the barrier.
const FRONT_REACH: f64 = 5.0;

/// The tail correction sums omitted poles with `|k| <= MOMENT_RADIUS·|q|`
/// directly and the rest through `MOMENTS` terms of the expansion in `q/k`.
const MOMENT_RADIUS: f64 = 2.5;
const MOMENTS: usize = 32;

/// Default pole table size. The tail correction treats poles beyond the
/// table by their small-`q` limit, which needs `|k|` well above
/// `q = (r - a)/2t` out to `R_max` at the smallest times used (`t ~ 1e-3`).
pub const DEFAULT_TABLE_ORDER: usize = 16384;

/// Radii `(r₁, r₂)`, in units of `a`, of the odd-symmetrization blend.
const ORIGIN_BLEND: (f64, f64) = (0.05, 0.1);

/// C² step from 1 at `s <= 0` to 0 at `s >= 1`, with its first two
/// derivatives in `s`.
fn smooth_step(s: f64) -> (f64, f64, f64) {
    if s <= 0.0 {
        return (1.0, 0.0, 0.0);
    }
    if s >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let u = 1.0 - s;
    let w = 1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
    (w, -30.0 * s * s * u * u, -60.0 * s * u * (1.0 - 2.0 * s))
}

/// Precomputed per-pole products, stored column-wise for the hot loop.
#[derive(Debug, Clone)]
struct PoleColumns {
    k: Vec<Complex64>,
    c: Vec<Complex64>,
    ck: Vec<Complex64>,
    ck2: Vec<Complex64>,
    c_over_k: Vec<Complex64>,
    /// `|k|` per pair, non-decreasing.
    pair_modulus: Vec<f64>,
    /// Prefix sums over the first `n` pairs of `Σc`, `Σc/k`, `Σck` and the
    /// running `max |Re k|`.
    prefix: Vec<PrefixSums>,
    /// `suffix[n][j] = Σ_{pairs >= n} c/k^{j+2}`.
    suffix: Vec<[Complex64; MOMENTS + 3]>,
}

#[derive(Debug, Clone, Copy, Default)]
struct PrefixSums {
    sum_c: Complex64,
    sum_c_over_k: Complex64,
    sum_ck: Complex64,
    max_re_k: f64,
}

impl PoleColumns {
    fn new(table: &PoleTable) -> Self {
        let poles = table.poles();
        let order = table.truncation_order();
        let k: Vec<Complex64> = poles.iter().map(|p| p.k).collect();
        let c: Vec<Complex64> = poles.iter().map(|p| p.c).collect();
        let ck: Vec<Complex64> = poles.iter().map(|p| p.c * p.k).collect();
        let ck2: Vec<Complex64> = poles.iter().map(|p| p.c * p.k * p.k).collect();
        let c_over_k: Vec<Complex64> = poles.iter().map(|p| p.c / p.k).collect();
        let pair_modulus: Vec<f64> = (0..order).map(|n| k[2 * n].norm().max(k[2 * n + 1].norm())).collect();
        let mut prefix = vec![PrefixSums::default(); order + 1];
        let mut acc = PrefixSums::default();
        for n in 0..order {
            for j in [2 * n, 2 * n + 1] {
                acc.sum_c += c[j];
                acc.sum_c_over_k += c_over_k[j];
                acc.sum_ck += ck[j];
                acc.max_re_k = acc.max_re_k.max(k[j].re.abs());
            }
            prefix[n + 1] = acc;
        }
        let mut suffix = vec![[ZERO; MOMENTS + 3]; order + 1];
        for n in (0..order).rev() {
            let mut row = suffix[n + 1];
            for j in [2 * n, 2 * n + 1] {
                let inv = k[j].inv();
                let mut term = c_over_k[j] * inv;
                for slot in row.iter_mut() {
                    *slot += term;
                    term *= inv;
                }
            }
            suffix[n] = row;
        }
        Self {
            k,
            c,
            ck,
            ck2,
            c_over_k,
            pair_modulus,
            prefix,
            suffix,
        }
    }

    fn blended_prefix(&self, kept: usize, w: f64) -> PrefixSums {
        let lo = self.prefix[kept];
        if w == 0.0 {
            return lo;
        }
        let hi = self.prefix[kept + 1];
        PrefixSums {
            sum_c: lo.sum_c + w * (hi.sum_c - lo.sum_c),
            sum_c_over_k: lo.sum_c_over_k + w * (hi.sum_c_over_k - lo.sum_c_over_k),
            sum_ck: lo.sum_ck + w * (hi.sum_ck - lo.sum_ck),
            max_re_k: hi.max_re_k,
        }
    }

    fn blended_tail(&self, kept: usize, w: f64, q: f64, derivatives: usize) -> [Complex64; 3] {
        let lo = self.tail(kept, q, derivatives);
        if w == 0.0 {
            return lo;
        }
        let hi = self.tail(kept + 1, q, derivatives);
        [0, 1, 2].map(|i| lo[i] + w * (hi[i] - lo[i]))
    }

    /// `G`, `G'` and `G''` at `q` for a series truncated after `kept` pairs.
    fn tail(&self, kept: usize, q: f64, derivatives: usize) -> [Complex64; 3] {
        let s1 = self.prefix[kept].sum_c_over_k;
        let order = self.pair_modulus.len();
        if kept >= order {
            return [s1, ZERO, ZERO];
        }
        // pairs [kept, split) are summed directly
        let radius = MOMENT_RADIUS * q.abs();
        let split = kept + self.pair_modulus[kept..].partition_point(|&m| m <= radius);
        let (mut g0, mut g1, mut g2) = (ZERO, ZERO, ZERO);
        let q_c = Complex64::new(q, 0.0);
        for j in 2 * kept..2 * split {
            let inv = (self.k[j] - q_c).inv();
            g0 += self.c_over_k[j] * inv;
            if derivatives > 0 {
                let c_inv2 = self.c[j] * inv * inv;
                g1 += c_inv2;
                if derivatives > 1 {
                    g2 += c_inv2 * inv;
                }
            }
        }
        g0 *= q;
        if split < order {
            // Σ c q/(k(k-q)) = Σ_{j>=2} q^{j-1} m_j, Σ c/(k-q)² = Σ (j+1) q^j m_{j+2},
            // Σ c/(k-q)³ = Σ (j+1)(j+2)/2 q^j m_{j+3}
            let m = &self.suffix[split];
            let (mut h0, mut h1, mut h2) = (ZERO, ZERO, ZERO);
            for j in (0..MOMENTS).rev() {
                let jf = j as f64;
                h0 = h0 * q + m[j];
                if derivatives > 0 {
                    h1 = h1 * q + (jf + 1.0) * m[j];
                    if derivatives > 1 {
                        h2 = h2 * q + 0.5 * (jf + 1.0) * (jf + 2.0) * m[j + 1];
                    }
                }
            }
            g0 += q * h0;
            g1 += h1;
            g2 += h2;
        }
        [s1 - g0, -g1, -2.0 * g2]
    }
}

/// `ψ`, `∂ψ/∂r` and the smooth part of `∂²ψ/∂r²` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivatives {
    pub psi: Complex64,
    pub dpsi: Complex64,
    pub ddpsi: Complex64,
}

/// Wave function and Bohm fields at `(r, t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveSample {
    pub r: f64,
    pub t: f64,
    pub psi: Complex64,
    pub dpsi: Complex64,
    /// δ-function part removed.
    pub ddpsi: Complex64,
    /// Bohm velocity `2 S'` (`m = 1/2`).
    pub v: f64,
    /// Quantum potential `-R''/R`, δ-function part removed.
    pub q: f64,
    /// Total potential `V + Q`; off the barrier `V = 0` and at the barrier
    /// the two δ-functions cancel, so `u = q`.
    pub u: f64,
    /// Energy `p² + U` with `p = S'`.
    pub e: f64,
    /// Probability current `|ψ|² v`.
    pub j: f64,
}

impl WaveSample {
    fn from_derivatives(r: f64, t: f64, d: Derivatives) -> Result<Self> {
        let modulus = d.psi.norm();
        if modulus <= NODE_THRESHOLD || !modulus.is_finite() {
            return Err(Error::Node { r, t, modulus });
        }
        let log_d1 = d.dpsi / d.psi;
        let log_d2 = d.ddpsi / d.psi;
        let s_prime = log_d1.im;
        let q = -log_d2.re - s_prime * s_prime;
        let v = 2.0 * s_prime;
        Ok(Self {
            r,
            t,
            psi: d.psi,
            dpsi: d.dpsi,
            ddpsi: d.ddpsi,
            v,
            q,
            u: q,
            e: s_prime * s_prime + q,
            j: modulus * modulus * v,
        })
    }

    /// `R = |ψ|`
    pub fn amplitude(&self) -> f64 {
        self.psi.norm()
    }

    /// `S' = Im(ψ'/ψ)`
    pub fn phase_gradient(&self) -> f64 {
        0.5 * self.v
    }
}

/// The normalized initial state `√(2/a) sin(πr/a)` confined to `r < a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialState {
    pub a: f64,
}

impl InitialState {
    pub fn psi(&self, r: f64) -> f64 {
        if r > 0.0 && r < self.a {
            (2.0 / self.a).sqrt() * (PI * r / self.a).sin()
        } else {
            0.0
        }
    }

    /// `Q(r,0) = -R''/R = (π/a)²` inside the box. For `t > 0` the kink at
    /// `r = a` immediately sends ripples of every wavelength inward, so this
    /// is not the pointwise limit of [`WaveSample::q`] as `t → 0`.
    pub fn quantum_potential(&self, r: f64) -> f64 {
        if r > 0.0 && r < self.a {
            (PI / self.a).powi(2)
        } else {
            f64::NAN
        }
    }

    /// `∫_0^a ψ(r,0)² dr`, which is 1 by construction.
    pub fn norm(&self) -> f64 {
        let a = self.a;
        let mut f = |r: f64| self.psi(r).powi(2);
        crate::quadrature::fixed(&mut f, 0.0, a)
    }
}

/// Exact pole-series wave function over an immutable pole table.
#[derive(Debug, Clone)]
pub struct Wavefield {
    table: PoleTable,
    truncation: Truncation,
    columns: PoleColumns,
}

impl Wavefield {
    /// Uses every pole of `table` at every time.
    pub fn new(table: PoleTable) -> Self {
        Self::with_truncation(table, Truncation::Fixed)
    }

    pub fn with_truncation(table: PoleTable, truncation: Truncation) -> Self {
        let columns = PoleColumns::new(&table);
        Self {
            table,
            truncation,
            columns,
        }
    }

    /// Builds a table of `max_order` pairs and evaluates with an adaptive
    /// truncation that never drops below `min_order` pairs.
    pub fn adaptive(params: ModelParams, min_order: usize, max_order: usize) -> Result<Self> {
        let table = PoleTable::find(params, max_order.max(min_order))?;
        Ok(Self::with_truncation(table, Truncation::adaptive(min_order)))
    }

    pub fn table(&self) -> &PoleTable {
        &self.table
    }

    pub fn params(&self) -> &ModelParams {
        self.table.params()
    }

    pub fn truncation(&self) -> Truncation {
        self.truncation
    }

    /// Number of pole pairs summed at time `t`, counting a partly weighted
    /// last pair.
    pub fn active_order(&self, t: f64) -> usize {
        let (n, w) = self.order_blend(t);
        n + usize::from(w > 0.0)
    }

    /// `(n, w)`: the series is `(1 - w)·S_n + w·S_{n+1}` with `S_n` the sum
    /// over `n` pairs plus the tail. Blending keeps ψ continuous in `t` where
    /// the wanted order passes an integer.
    fn order_blend(&self, t: f64) -> (usize, f64) {
        let available = self.table.truncation_order();
        match self.truncation {
            Truncation::Fixed => (available, 0.0),
            Truncation::Adaptive { min_order, tolerance } => {
                let lambda = self.params().lambda;
                let accuracy = (TAIL_SCALE / (lambda * tolerance * t.powf(1.5))).cbrt();
                let a = self.params().a;
                let reach = FRONT_REACH * a * a / (2.0 * PI * t);
                let wanted = accuracy.max(reach);
                let lo = min_order.min(available) as f64;
                if !(wanted < available as f64) {
                    return (available, 0.0);
                }
                let x = wanted.max(lo);
                let n = x.floor();
                (n as usize, x - n)
            }
        }
    }

    /// Largest `|Re k_ν|` among the poles active at time `t`.
    pub fn fastest_front_speed(&self, t: f64) -> f64 {
        2.0 * self.columns.prefix[self.active_order(t)].max_re_k
    }

    /// `R_max(t) = a + 2·max|Re k_ν|·t + 10`: beyond it every term of the
    /// series is exponentially small.
    pub fn r_max(&self, t: f64) -> f64 {
        self.params().a + self.fastest_front_speed(t) * t + FRONT_MARGIN
    }

    fn check(op: &'static str, r: f64, t: f64) -> Result<()> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::domain(op, format!("t = {t} must be positive")));
        }
        if !(r >= 0.0 && r.is_finite()) {
            return Err(Error::domain(op, format!("r = {r} must be >= 0")));
        }
        Ok(())
    }

    /// The series with its even part removed near the origin.
    fn sum_series(&self, r: f64, t: f64, second: bool) -> Derivatives {
        let d = self.raw_series(r, t, second);
        let a = self.params().a;
        let (r1, r2) = (ORIGIN_BLEND.0 * a, ORIGIN_BLEND.1 * a);
        if r >= r2 {
            return d;
        }
        let m = self.raw_series(-r, t, second);
        let e0 = 0.5 * (d.psi + m.psi);
        let e1 = 0.5 * (d.dpsi - m.dpsi);
        let e2 = 0.5 * (d.ddpsi + m.ddpsi);
        let width = r2 - r1;
        let (w, ws, wss) = smooth_step((r - r1) / width);
        let (w1, w2) = (ws / width, wss / (width * width));
        Derivatives {
            psi: d.psi - w * e0,
            dpsi: d.dpsi - w1 * e0 - w * e1,
            ddpsi: if second { d.ddpsi - w2 * e0 - 2.0 * w1 * e1 - w * e2 } else { ZERO },
        }
    }

    /// Sums the series. `second` also accumulates the `k²` moments for ψ''.
    fn raw_series(&self, r: f64, t: f64, second: bool) -> Derivatives {
        let ModelParams { lambda, a } = *self.params();
        let x = r - a;
        let inside = x < 0.0;
        let sqrt_t = t.sqrt();
        let phase = fresnel_phase(x, t);
        let chi = chi_unchecked(x, t);
        let (kept, w) = self.order_blend(t);
        let cols = &self.columns;

        let (mut a0, mut a1, mut a2) = (ZERO, ZERO, ZERO);
        let (mut m0, mut m1, mut diff) = (ZERO, ZERO, ZERO);
        for j in 0..2 * (kept + usize::from(w > 0.0)) {
            // the partly weighted last pair
            let weight = if j < 2 * kept { 1.0 } else { w };
            let k = cols.k[j];
            let m = weight * moshinsky_scaled(k, x, t, sqrt_t, phase);
            a0 += cols.c[j] * m;
            a1 += cols.ck[j] * m;
            if second {
                a2 += cols.ck2[j] * m;
            }
            if inside {
                let mirror = weight * moshinsky_scaled(k, -x, t, sqrt_t, phase);
                m0 += cols.c[j] * mirror;
                m1 += cols.ck[j] * mirror;
                diff += cols.c_over_k[j] * (m - mirror);
            }
        }
        let sums = cols.blended_prefix(kept, w);
        let (s0, s1, sk) = (sums.sum_c, sums.sum_c_over_k, sums.sum_ck);
        let [g0, g1, g2] = cols.blended_tail(kept, w, x / (2.0 * t), if second { 2 } else { 1 });
        let barrier = I * lambda / (2.0 * a);

        let mut psi = a0 + chi * g0;
        let mut dpsi = I * a1 + I * chi * s0 + chi * (I * x * g0 + g1) / (2.0 * t);
        let mut ddpsi = ZERO;
        if second {
            ddpsi = -a2 - chi * (x * s0 + 2.0 * t * sk) / (2.0 * t)
                + chi
                    * ((I / (2.0 * t) - x * x / (4.0 * t * t)) * g0
                        + I * x * g1 / (2.0 * t * t)
                        + g2 / (4.0 * t * t));
        }
        if inside {
            psi += barrier * diff;
            dpsi += -(lambda / (2.0 * a)) * (a0 + m0) - (lambda / a) * chi * s1;
            if second {
                ddpsi += -barrier * (a1 - m1) - chi * s1 * (I * lambda * x / (2.0 * t * a));
            }
        }
        Derivatives { psi, dpsi, ddpsi }
    }

    /// `ψ(r,t)`.
    pub fn psi(&self, r: f64, t: f64) -> Result<Complex64> {
        Self::check("psi", r, t)?;
        Ok(self.psi_unchecked(r, t))
    }

    pub(crate) fn psi_unchecked(&self, r: f64, t: f64) -> Complex64 {
        let psi = self.raw_psi(r, t);
        let a = self.params().a;
        if r >= ORIGIN_BLEND.1 * a {
            return psi;
        }
        let (w, _, _) = smooth_step((r - ORIGIN_BLEND.0 * a) / ((ORIGIN_BLEND.1 - ORIGIN_BLEND.0) * a));
        psi - 0.5 * w * (psi + self.raw_psi(-r, t))
    }

    fn raw_psi(&self, r: f64, t: f64) -> Complex64 {
        let ModelParams { lambda, a } = *self.params();
        let x = r - a;
        let inside = x < 0.0;
        let sqrt_t = t.sqrt();
        let phase = fresnel_phase(x, t);
        let (kept, w) = self.order_blend(t);
        let cols = &self.columns;
        let (mut a0, mut diff) = (ZERO, ZERO);
        for j in 0..2 * (kept + usize::from(w > 0.0)) {
            let weight = if j < 2 * kept { 1.0 } else { w };
            let k = cols.k[j];
            let m = moshinsky_scaled(k, x, t, sqrt_t, phase);
            a0 += weight * cols.c[j] * m;
            if inside {
                diff += weight * cols.c_over_k[j] * (m - moshinsky_scaled(k, -x, t, sqrt_t, phase));
            }
        }
        let [g0, _, _] = cols.blended_tail(kept, w, x / (2.0 * t), 0);
        let mut psi = a0 + chi_unchecked(x, t) * g0;
        if inside {
            psi += I * lambda / (2.0 * a) * diff;
        }
        psi
    }

    /// `|ψ(r,t)|²` without argument checks.
    pub fn density(&self, r: f64, t: f64) -> f64 {
        self.psi_unchecked(r, t).norm_sqr()
    }

    /// `∂ψ/∂r`. At `r = a` this is the outside limit; the inside limit
    /// differs by the real multiple `(λ/a)ψ(a)`, so `Im(ψ'/ψ)` is continuous.
    pub fn dpsi(&self, r: f64, t: f64) -> Result<Complex64> {
        Self::check("dpsi", r, t)?;
        Ok(self.sum_series(r, t, false).dpsi)
    }

    /// Smooth part of `∂²ψ/∂r²`; the `(λ/a)δ(r-a)ψ(a,t)` term is never
    /// materialized.
    pub fn ddpsi(&self, r: f64, t: f64) -> Result<Complex64> {
        Self::check("ddpsi", r, t)?;
        Ok(self.sum_series(r, t, true).ddpsi)
    }

    pub fn derivatives(&self, r: f64, t: f64) -> Result<Derivatives> {
        Self::check("derivatives", r, t)?;
        Ok(self.sum_series(r, t, true))
    }

    /// Bohm velocity `dr/dt = 2 Im(ψ'/ψ)`.
    pub fn velocity(&self, r: f64, t: f64) -> Result<f64> {
        Self::check("velocity", r, t)?;
        let d = self.sum_series(r, t, false);
        let modulus = d.psi.norm();
        if modulus <= NODE_THRESHOLD || !modulus.is_finite() {
            return Err(Error::Node { r, t, modulus });
        }
        Ok(2.0 * (d.dpsi / d.psi).im)
    }

    /// All Bohm fields at `(r, t)`.
    pub fn sample(&self, r: f64, t: f64) -> Result<WaveSample> {
        Self::check("sample", r, t)?;
        WaveSample::from_derivatives(r, t, self.sum_series(r, t, true))
    }

    /// `U(r,t)` on a rectangular grid as CSV `r, t, u`. Points with
    /// `r < 0.001` or `t < 0.05` are left out; nodes are written as NaN.
    pub fn write_potential_surface<W: std::io::Write>(
        &self,
        out: W,
        radii: &[f64],
        times: &[f64],
    ) -> Result<()> {
        let rows = self.potential_surface(radii, times)?;
        write_columns(out, &["r", "t", "u"], &rows)
    }

    pub fn potential_surface(&self, radii: &[f64], times: &[f64]) -> Result<Vec<Vec<f64>>> {
        let mut rows = Vec::new();
        for &t in times.iter().filter(|&&t| t >= 0.05) {
            for &r in radii.iter().filter(|&&r| r >= 0.001) {
                let u = match self.sample(r, t) {
                    Ok(s) => s.u,
                    Err(Error::Node { .. }) => f64::NAN,
                    Err(e) => return Err(e),
                };
                rows.push(vec![r, t, u]);
            }
        }
        Ok(rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poles::ModelParams;
    use std::sync::OnceLock;

    fn field() -> &'static Wavefield {
        static FIELD: OnceLock<Wavefield> = OnceLock::new();
        FIELD.get_or_init(|| Wavefield::new(PoleTable::find(ModelParams::default(), 100).unwrap()))
    }

    fn adaptive_field() -> &'static Wavefield {
        static FIELD: OnceLock<Wavefield> = OnceLock::new();
        FIELD.get_or_init(|| Wavefield::adaptive(ModelParams::default(), 100, DEFAULT_TABLE_ORDER).unwrap())
    }

    #[test]
    fn boundary_condition_at_origin() {
        for t in [0.01, 0.05, 0.3, 1.0, 2.5, 5.0] {
            let raw = adaptive_field().raw_psi(0.0, t);
            assert!(raw.norm() <= 1e-8, "t={t}: |ψ(0,t)| = {:e}", raw.norm());
            assert_eq!(adaptive_field().psi(0.0, t).unwrap().norm(), 0.0);
        }
    }

    #[test]
    fn series_continues_oddly_through_the_origin() {
        let full = Wavefield::new(adaptive_field().table().clone());
        for (r, t) in [(0.3, 1.0), (0.7, 0.4), (0.02, 3.0)] {
            let even = full.raw_psi(r, t) + full.raw_psi(-r, t);
            assert!(even.norm() <= 1e-11, "r={r} t={t}: {:e}", even.norm());
        }
    }

    #[test]
    fn derivatives_consistent_through_origin_blend() {
        let f = adaptive_field();
        let h = 1e-5;
        for r in [0.03, 0.05, 0.07, 0.1] {
            for t in [0.5, 4.0] {
                let d = f.derivatives(r, t).unwrap();
                let p = |r: f64| f.psi(r, t).unwrap();
                let fd1 = (p(r + h) - p(r - h)) / (2.0 * h);
                let fd2 = (p(r + h) - 2.0 * p(r) + p(r - h)) / (h * h);
                let scale = d.dpsi.norm();
                assert!((d.dpsi - fd1).norm() <= 1e-6 * scale, "r={r} t={t}");
                assert!((d.ddpsi - fd2).norm() <= 1e-3 * scale, "r={r} t={t}: {} vs {fd2}", d.ddpsi);
                assert!((f.dpsi(r, t).unwrap() - d.dpsi).norm() <= 1e-14 * scale);
            }
        }
    }

    #[test]
    fn velocity_near_origin_matches_full_table() {
        let full = Wavefield::new(adaptive_field().table().clone());
        for t in [0.3, 2.0, 8.0] {
            for r in [1e-3, 0.02, 0.08] {
                let v = adaptive_field().velocity(r, t).unwrap();
                let reference = full.velocity(r, t).unwrap();
                assert!((v - reference).abs() <= 1e-3 * reference.abs(), "r={r} t={t}: {v} vs {reference}");
            }
        }
    }

    #[test]
    fn continuous_at_the_barrier() {
        let eps = 1e-12;
        let inside = field().psi(1.0 - eps, 0.5).unwrap();
        let outside = field().psi(1.0 + eps, 0.5).unwrap();
        assert!((inside - outside).norm() <= 1e-10);
        let at = field().psi(1.0, 0.5).unwrap();
        assert!((at - outside).norm() <= 1e-10);
    }

    #[test]
    fn phase_gradient_continuous_and_amplitude_slope_jumps_by_lambda() {
        let eps = 1e-10;
        let left = field().derivatives(1.0 - eps, 0.5).unwrap();
        let right = field().derivatives(1.0 + eps, 0.5).unwrap();
        let (l, r) = (left.dpsi / left.psi, right.dpsi / right.psi);
        assert!((l.im - r.im).abs() <= 1e-8, "S' jump {:e}", (l.im - r.im).abs());
        assert!(((r.re - l.re) - 6.0).abs() <= 1e-6, "R'/R jump {}", r.re - l.re);
    }

    #[test]
    fn first_derivative_matches_central_difference() {
        let h = 1e-5;
        for (r, t) in [(0.3, 0.5), (0.8, 1.0), (1.7, 0.5), (4.0, 2.0)] {
            let d = field().dpsi(r, t).unwrap();
            let fd = (field().psi(r + h, t).unwrap() - field().psi(r - h, t).unwrap()) / (2.0 * h);
            assert!((d - fd).norm() <= 1e-7 * d.norm().max(1.0), "r={r} t={t}: {d} vs {fd}");
        }
    }

    #[test]
    fn second_derivative_matches_central_difference() {
        let h = 1e-5;
        for (r, t) in [(0.3, 0.5), (0.8, 1.0), (1.7, 0.5), (4.0, 2.0)] {
            let dd = field().ddpsi(r, t).unwrap();
            let fd = (field().dpsi(r + h, t).unwrap() - field().dpsi(r - h, t).unwrap()) / (2.0 * h);
            assert!((dd - fd).norm() <= 1e-6 * dd.norm().max(1.0), "r={r} t={t}: {dd} vs {fd}");
        }
    }

    #[test]
    fn satisfies_schrodinger_equation_off_barrier() {
        let h = 1e-6;
        for t in [0.5, 1.0, 2.0] {
            for r in [0.2, 0.55, 0.9, 1.3, 3.0] {
                let dt = (field().psi(r, t + h).unwrap() - field().psi(r, t - h).unwrap()) / (2.0 * h);
                let rhs = -field().ddpsi(r, t).unwrap();
                assert!((I * dt - rhs).norm() <= 1e-7, "r={r} t={t}: {:e}", (I * dt - rhs).norm());
            }
        }
    }

    #[test]
    fn dpsi_envelope_decays_ahead_of_the_wavefront() {
        // Fast components of the initial kink keep |ψ'| oscillating beyond
        // the front of k₁, so the monotone check is on window maxima.
        let field = adaptive_field();
        let t = 0.5;
        let k1 = field.table().pole(1).unwrap().k.re;
        let mut lo = 1.0 + 2.0 * k1 * t + 16.0;
        let mut prev = f64::INFINITY;
        for _ in 0..4 {
            let envelope = (0..100)
                .map(|i| field.dpsi(lo + 20.0 * i as f64 / 100.0, t).unwrap().norm())
                .fold(0.0, f64::max);
            assert!(envelope < 0.75 * prev, "window at r={lo}: {envelope:e} vs {prev:e}");
            prev = envelope;
            lo *= 2.0;
        }
    }

    #[test]
    fn initial_energy_is_box_energy() {
        let state = InitialState { a: 1.0 };
        for r in [0.1, 0.3, 0.5, 0.9] {
            assert!((state.quantum_potential(r) - PI * PI).abs() < 1e-12);
        }
    }

    #[test]
    fn sample_fields_are_consistent() {
        let s = field().sample(0.6, 0.8).unwrap();
        let ratio = s.dpsi / s.psi;
        assert!((s.v - 2.0 * ratio.im).abs() < 1e-14);
        assert!((s.q + (s.ddpsi / s.psi).re + ratio.im * ratio.im).abs() < 1e-12);
        assert!((s.j - s.psi.norm_sqr() * s.v).abs() < 1e-14);
        assert!((s.e - (s.v * s.v / 4.0 + s.u)).abs() < 1e-12);
    }

    #[test]
    fn potential_is_continuous_across_barrier() {
        for t in [0.05, 0.2, 0.5, 2.0] {
            let eps = 1e-7;
            let l = adaptive_field().sample(1.0 - eps, t).unwrap().u;
            let r = adaptive_field().sample(1.0 + eps, t).unwrap().u;
            assert!((l - r).abs() <= 1e-3 * l.abs().max(1.0), "t={t}: {l} vs {r}");
        }
    }

    #[test]
    fn domain_errors() {
        assert!(field().psi(-0.1, 1.0).is_err());
        assert!(field().psi(0.5, 0.0).is_err());
        assert!(field().sample(0.5, f64::NAN).is_err());
    }

    #[test]
    fn initial_state_normalized() {
        let state = InitialState { a: 1.0 };
        assert!((state.norm() - 1.0).abs() < 1e-14);
        assert_eq!(state.psi(1.2), 0.0);
    }

    #[test]
    fn adaptive_truncation_grows_toward_small_times() {
        let f = adaptive_field();
        assert_eq!(f.active_order(20.0), 100);
        assert!(f.active_order(0.01) > f.active_order(0.1));
        assert_eq!(f.active_order(1e-6), DEFAULT_TABLE_ORDER);
        assert_eq!(field().active_order(1e-6), 100);
    }

    #[test]
    fn continuous_in_time_where_the_order_changes() {
        // the wanted order passes 100 at t = 1 for λ = 6 and tolerance 5e-9
        let f = adaptive_field();
        assert_eq!(f.active_order(1.0 - 1e-6), 101);
        assert_eq!(f.active_order(1.0 + 1e-6), 100);
        for r in [0.3, 1.5] {
            // ∂ψ/∂t is O(1): a step of 1e-13 moves ψ by ~1e-13, a switch by ~1e-10
            let jump = (f.psi(r, 1.0 + 5e-14).unwrap() - f.psi(r, 1.0 - 5e-14).unwrap()).norm();
            assert!(jump < 1e-11, "r={r}: {jump:e}");
            let ht = 1e-6;
            let dt = (f.psi(r, 1.0 + ht).unwrap() - f.psi(r, 1.0 - ht).unwrap()) / (2.0 * ht);
            let residual = (I * dt + f.ddpsi(r, 1.0).unwrap()).norm();
            assert!(residual < 1e-7, "r={r}: {residual:e}");
        }
    }

    #[test]
    fn surface_excludes_early_times_and_origin() {
        let rows = field()
            .potential_surface(&[0.0005, 0.5, 1.5], &[0.01, 0.5])
            .unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|row| row[0] >= 0.001 && row[1] >= 0.05));
    }
}
