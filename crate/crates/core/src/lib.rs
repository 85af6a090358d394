//! Exact time evolution and Bohmian description of a particle leaking out of
//! a repulsive delta-shell barrier `V(r) = (λ/a) δ(r - a)`.
//!
//! The S-wave wave function is written as a sum over the S-matrix poles of the
//! barrier, each term built from Moshinsky functions. On top of that the crate
//! derives the Bohm fields (velocity, quantum potential, energy, current),
//! integrates trajectories, and reduces them to decay statistics.
//!
//! Units throughout: `ħ = 1`, `2m = 1`.
//!
//! ```no_run
//! use bohm_decay::{ModelParams, PoleTable, Wavefield};
//!
//! let params = ModelParams::new(6.0, 1.0).unwrap();
//! let table = PoleTable::find(params, 100).unwrap();
//! let field = Wavefield::new(table);
//! let p = bohm_decay::probability::nonescape(&field, 1.0).unwrap();
//! println!("P(1) = {p}");
//! ```

pub mod error;
pub mod io;
pub mod observables;
pub mod ode;
pub mod poles;
pub mod probability;
pub mod quadrature;
pub mod specfun;
pub mod trajectories;
pub mod wavefield;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use poles::{ModelParams, Pole, PoleTable, TableDiagnostics};
pub use probability::DecayCurve;
pub use trajectories::{Ensemble, Trajectory};
pub use wavefield::{Truncation, WaveSample, Wavefield, DEFAULT_TABLE_ORDER};
