//! Run configuration: defaults, then a flat JSON file, then flags.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub lambda: f64,
    pub a: f64,
    /// Poles per half-plane that always enter the series.
    #[serde(rename = "V")]
    pub v: usize,
    /// Poles per half-plane kept in the table for small times and the tail.
    pub table_order: usize,
    /// Target truncation error of ψ for the adaptive order.
    pub truncation_tolerance: f64,
    /// Ensemble size; each command has its own default.
    #[serde(rename = "N")]
    pub n: Option<usize>,
    pub t0: f64,
    /// End of the integration; each command has its own default.
    pub t_end: Option<f64>,
    pub rtol: f64,
    pub atol: f64,
    pub exp_window: [f64; 2],
    pub early_window: [f64; 2],
    pub late_window: [f64; 2],
    pub decay_samples: usize,
    /// 1/Γ of the exponential reference curve in `fig2`.
    pub reference_lifetime: f64,
    pub z0: f64,
    /// End of the ensemble run behind the charge curve.
    pub charge_t_end: f64,
    pub fig3_t_start: f64,
    pub fig3_r_min: f64,
    pub fig3_r_max: f64,
    pub fig3_dr: f64,
    pub surface_r_max: f64,
    pub surface_t_max: f64,
    pub surface_dr: f64,
    pub surface_dt: f64,
    pub out: PathBuf,
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            lambda: 6.0,
            a: 1.0,
            v: 100,
            table_order: bohm_decay::DEFAULT_TABLE_ORDER,
            truncation_tolerance: 5e-9,
            n: None,
            t0: 1e-3,
            t_end: None,
            rtol: 1e-8,
            atol: 1e-10,
            exp_window: [1.0, 6.0],
            early_window: [0.005, 0.05],
            late_window: [20.0, 60.0],
            decay_samples: 241,
            reference_lifetime: 0.644,
            z0: 84.0,
            charge_t_end: 5.0,
            fig3_t_start: 10.0,
            fig3_r_min: 0.2,
            fig3_r_max: 0.6,
            fig3_dr: 0.02,
            surface_r_max: 3.0,
            surface_t_max: 2.0,
            surface_dr: 0.01,
            surface_dt: 0.01,
            out: PathBuf::from("out"),
            threads: None,
        }
    }
}

/// Flags overriding single configuration fields.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Flat JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub a: Option<f64>,
    #[arg(long = "V", global = true)]
    pub v: Option<usize>,
    #[arg(long, global = true)]
    pub table_order: Option<usize>,
    #[arg(long, global = true)]
    pub truncation_tolerance: Option<f64>,
    #[arg(long = "N", global = true)]
    pub n: Option<usize>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub t0: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub t_end: Option<f64>,
    #[arg(long, global = true)]
    pub rtol: Option<f64>,
    #[arg(long, global = true)]
    pub atol: Option<f64>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub exp_window: Option<Vec<f64>>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub early_window: Option<Vec<f64>>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub late_window: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub decay_samples: Option<usize>,
    #[arg(long, global = true)]
    pub reference_lifetime: Option<f64>,
    #[arg(long, global = true)]
    pub z0: Option<f64>,
    #[arg(long, global = true)]
    pub charge_t_end: Option<f64>,
    #[arg(long, global = true)]
    pub fig3_t_start: Option<f64>,
    #[arg(long, global = true)]
    pub fig3_r_min: Option<f64>,
    #[arg(long, global = true)]
    pub fig3_r_max: Option<f64>,
    #[arg(long, global = true)]
    pub fig3_dr: Option<f64>,
    #[arg(long, global = true)]
    pub surface_r_max: Option<f64>,
    #[arg(long, global = true)]
    pub surface_t_max: Option<f64>,
    #[arg(long, global = true)]
    pub surface_dr: Option<f64>,
    #[arg(long, global = true)]
    pub surface_dt: Option<f64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

fn window(name: &str, values: Vec<f64>) -> Result<[f64; 2], String> {
    <[f64; 2]>::try_from(values).map_err(|v| format!("--{name} takes two values, got {}", v.len()))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// Defaults, the file named by `--config` if any, then the flags.
    pub fn resolve(flags: &Overrides) -> Result<Self, String> {
        let mut c = match &flags.config {
            Some(path) => Self::load(path)?,
            None => Self::default(),
        };
        macro_rules! take {
            ($($field:ident),*) => {
                $(if let Some(v) = flags.$field.clone() { c.$field = v; })*
            };
        }
        take!(lambda, a, v, table_order, truncation_tolerance, t0, rtol, atol, decay_samples, reference_lifetime, z0,
              charge_t_end, fig3_t_start, fig3_r_min, fig3_r_max, fig3_dr, surface_r_max, surface_t_max, surface_dr,
              surface_dt, out);
        if flags.n.is_some() {
            c.n = flags.n;
        }
        if flags.t_end.is_some() {
            c.t_end = flags.t_end;
        }
        if flags.threads.is_some() {
            c.threads = flags.threads;
        }
        if let Some(w) = flags.exp_window.clone() {
            c.exp_window = window("exp-window", w)?;
        }
        if let Some(w) = flags.early_window.clone() {
            c.early_window = window("early-window", w)?;
        }
        if let Some(w) = flags.late_window.clone() {
            c.late_window = window("late-window", w)?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("lambda", self.lambda),
            ("a", self.a),
            ("truncation_tolerance", self.truncation_tolerance),
            ("t0", self.t0),
            ("rtol", self.rtol),
            ("atol", self.atol),
            ("reference_lifetime", self.reference_lifetime),
            ("charge_t_end", self.charge_t_end),
            ("fig3_t_start", self.fig3_t_start),
            ("fig3_r_min", self.fig3_r_min),
            ("fig3_dr", self.fig3_dr),
            ("surface_r_max", self.surface_r_max),
            ("surface_t_max", self.surface_t_max),
            ("surface_dr", self.surface_dr),
            ("surface_dt", self.surface_dt),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(format!("{name} must be positive and finite, got {value}"));
            }
        }
        if !self.z0.is_finite() {
            return Err("z0 must be finite".into());
        }
        if self.v == 0 {
            return Err("V must be at least 1".into());
        }
        if self.table_order < self.v {
            return Err(format!("table_order = {} is below V = {}", self.table_order, self.v));
        }
        if let Some(n) = self.n {
            if n < 2 {
                return Err(format!("N must be at least 2, got {n}"));
            }
        }
        if let Some(t_end) = self.t_end {
            if !(t_end > self.t0 && t_end.is_finite()) {
                return Err(format!("t_end = {t_end} must exceed t0 = {}", self.t0));
            }
        }
        if self.charge_t_end <= self.t0 {
            return Err("charge_t_end must exceed t0".into());
        }
        if self.fig3_r_max < self.fig3_r_min {
            return Err("fig3_r_max must not be below fig3_r_min".into());
        }
        for (name, [lo, hi]) in [
            ("exp_window", self.exp_window),
            ("early_window", self.early_window),
            ("late_window", self.late_window),
        ] {
            if !(lo > 0.0 && hi > lo && hi.is_finite()) {
                return Err(format!("{name} = [{lo}, {hi}] must satisfy 0 < lo < hi"));
            }
        }
        if self.threads == Some(0) {
            return Err("threads must be at least 1".into());
        }
        Ok(())
    }

    pub fn ensemble_size(&self, default: usize) -> usize {
        self.n.unwrap_or(default)
    }

    pub fn end_time(&self, default: f64) -> f64 {
        self.t_end.unwrap_or(default)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_standard_setup() {
        let c = RunConfig::default();
        assert_eq!((c.lambda, c.a, c.v), (6.0, 1.0, 100));
        c.validate().unwrap();
    }

    #[test]
    fn json_uses_field_names() {
        let c: RunConfig = serde_json::from_str(r#"{"lambda": 10, "V": 50, "N": 12, "late_window": [15, 50]}"#).unwrap();
        assert_eq!(c.lambda, 10.0);
        assert_eq!(c.v, 50);
        assert_eq!(c.n, Some(12));
        assert_eq!(c.late_window, [15.0, 50.0]);
        assert!(serde_json::from_str::<RunConfig>(r#"{"lamda": 1}"#).is_err());
    }

    #[test]
    fn flags_override_file_values() {
        let flags = Overrides {
            lambda: Some(3.0),
            exp_window: Some(vec![0.5, 4.0]),
            ..Overrides::default()
        };
        let c = RunConfig::resolve(&flags).unwrap();
        assert_eq!(c.lambda, 3.0);
        assert_eq!(c.exp_window, [0.5, 4.0]);
    }

    #[test]
    fn validation_rejects_bad_values() {
        for bad in [
            RunConfig { lambda: 0.0, ..RunConfig::default() },
            RunConfig { lambda: -2.0, ..RunConfig::default() },
            RunConfig { t_end: Some(1e-4), ..RunConfig::default() },
            RunConfig { n: Some(1), ..RunConfig::default() },
            RunConfig { early_window: [0.05, 0.005], ..RunConfig::default() },
            RunConfig { table_order: 10, ..RunConfig::default() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }
}
