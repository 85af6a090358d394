//! wasm-bindgen bindings for the static demo page in `www/`.
//!
//! Build with `wasm-pack build crates/wasm --target web --out-dir www/pkg`
//! and serve `crates/wasm/www`. Arrays cross the boundary flattened, as
//! `Float64Array`s of fixed-width rows.

use bohm_decay::observables::fit_exponential;
use bohm_decay::probability::{linear_grid, nonescape};
use bohm_decay::trajectories::{integrate_forward, TrajectoryOptions};
use bohm_decay::{DecayCurve, Error, ModelParams, Wavefield, DEFAULT_TABLE_ORDER};
use wasm_bindgen::prelude::*;

/// Poles always summed; more are added at small times.
const MIN_ORDER: usize = 100;

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub struct Simulator {
    field: Wavefield,
}

#[wasm_bindgen]
impl Simulator {
    #[wasm_bindgen(constructor)]
    pub fn new(lambda: f64, a: f64) -> Result<Simulator, JsError> {
        Self::build(lambda, a).map_err(js)
    }

    pub fn lambda(&self) -> f64 {
        self.field.params().lambda
    }

    /// Rows `(t, P)` on `[t_min, t_max]`.
    #[wasm_bindgen(js_name = decayCurve)]
    pub fn decay_curve(&self, t_min: f64, t_max: f64, samples: usize) -> Result<Vec<f64>, JsError> {
        self.curve(t_min, t_max, samples).map_err(js)
    }

    /// `1/Γ` from a fit of `ln P` over `[lo, hi]`.
    pub fn lifetime(&self, lo: f64, hi: f64) -> Result<f64, JsError> {
        self.fitted_lifetime(lo, hi).map_err(js)
    }

    /// Rows `(t, r)` of the trajectory with label `s0`.
    pub fn trajectory(&self, s0: f64, t_end: f64) -> Result<Vec<f64>, JsError> {
        self.path(s0, t_end).map_err(js)
    }

    /// Rows `(r, |ψ|², U)` at time `t`; `U` is NaN at nodes.
    pub fn slice(&self, t: f64, r_max: f64, samples: usize) -> Result<Vec<f64>, JsError> {
        self.profile(t, r_max, samples).map_err(js)
    }
}

// Plain Rust side, usable off the browser.
impl Simulator {
    pub fn build(lambda: f64, a: f64) -> Result<Self, Error> {
        let params = ModelParams::new(lambda, a)?;
        Ok(Self {
            field: Wavefield::adaptive(params, MIN_ORDER, DEFAULT_TABLE_ORDER)?,
        })
    }

    pub fn curve(&self, t_min: f64, t_max: f64, samples: usize) -> Result<Vec<f64>, Error> {
        let mut out = Vec::with_capacity(2 * samples);
        for t in linear_grid(t_min, t_max, samples) {
            out.extend([t, nonescape(&self.field, t)?]);
        }
        Ok(out)
    }

    pub fn fitted_lifetime(&self, lo: f64, hi: f64) -> Result<f64, Error> {
        let curve = DecayCurve::compute(&self.field, &linear_grid(lo, hi, 26))?;
        Ok(fit_exponential(&curve, (lo, hi))?.lifetime())
    }

    pub fn path(&self, s0: f64, t_end: f64) -> Result<Vec<f64>, Error> {
        let options = TrajectoryOptions {
            t_end,
            ..TrajectoryOptions::default()
        };
        let tr = integrate_forward(&self.field, s0, &options)?;
        Ok(tr.samples.iter().flat_map(|&(t, r)| [t, r]).collect())
    }

    pub fn profile(&self, t: f64, r_max: f64, samples: usize) -> Result<Vec<f64>, Error> {
        let mut out = Vec::with_capacity(3 * samples);
        // r = 0 is a node of every state
        for r in linear_grid(r_max / samples as f64, r_max, samples) {
            let density = self.field.psi(r, t)?.norm_sqr();
            let u = match self.field.sample(r, t) {
                Ok(s) => s.u,
                Err(Error::Node { .. }) => f64::NAN,
                Err(e) => return Err(e),
            };
            out.extend([r, density, u]);
        }
        Ok(out)
    }
}
