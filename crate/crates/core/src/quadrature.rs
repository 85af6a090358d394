//! Gauss–Legendre rules and an adaptive composite integrator built on them.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = nf * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

const PANEL_ORDER: usize = 20;

fn panel_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(PANEL_ORDER))
}

/// Fixed 20-point Gauss–Legendre estimate of `∫_lo^hi f`.
pub fn fixed<F: FnMut(f64) -> f64>(f: &mut F, lo: f64, hi: f64) -> f64 {
    let (nodes, weights) = panel_rule();
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    nodes
        .iter()
        .zip(weights)
        .map(|(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

/// Accept a panel when `|fine - coarse| <= max(abs * width/total, rel * |fine|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub const fn absolute(abs: f64) -> Self {
        Self { abs, rel: 0.0 }
    }
}

pub const DEFAULT_MAX_SUBDIVISIONS: usize = 20_000;

/// Adaptive composite Gauss–Legendre quadrature over consecutive panels
/// `[breaks[0], breaks[1]], [breaks[1], breaks[2]], ...`.
///
/// Each panel is bisected until the 20-point estimate on the panel and the
/// sum of the estimates on its halves agree within the tolerance share of that
/// panel.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    breaks: &[f64],
    tol: Tolerance,
    max_subdivisions: usize,
) -> Result<f64> {
    if breaks.len() < 2 {
        return Ok(0.0);
    }
    let total = (breaks[breaks.len() - 1] - breaks[0]).abs().max(f64::MIN_POSITIVE);
    let mut subdivisions = 0usize;
    let mut sum = 0.0;
    // (lo, hi, coarse estimate, depth)
    let mut stack: Vec<(f64, f64, f64, u32)> = Vec::new();
    for pair in breaks.windows(2).rev() {
        let (lo, hi) = (pair[0], pair[1]);
        if hi > lo {
            let coarse = fixed(&mut f, lo, hi);
            stack.push((lo, hi, coarse, 0));
        }
    }
    while let Some((lo, hi, coarse, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = fixed(&mut f, lo, mid);
        let right = fixed(&mut f, mid, hi);
        let fine = left + right;
        let allowed = (tol.abs * (hi - lo) / total).max(tol.rel * fine.abs());
        if (fine - coarse).abs() <= allowed || depth >= 60 || mid <= lo || mid >= hi {
            sum += fine;
            continue;
        }
        subdivisions += 1;
        if subdivisions > max_subdivisions {
            return Err(Error::Quadrature {
                lo: breaks[0],
                hi: breaks[breaks.len() - 1],
                subdivisions,
            });
        }
        stack.push((mid, hi, right, depth + 1));
        stack.push((lo, mid, left, depth + 1));
    }
    Ok(sum)
}
