//! Phase retrieval by Gauss-Newton iterations.
//!
//! The crate recovers a signal `z` from intensities `y_j = |a_j^H z|^2`
//! (up to a global phase) in two stages: a spectral initializer
//! ([`init`]) followed by Gauss-Newton refinement ([`solver`]). Wirtinger
//! flow and alternating minimization ([`baselines`]) share the same trace
//! format for comparison, and [`bench`] drives the reproduction experiments
//! behind the `phasegn` binary.
//!
//! ```
//! use phasegn::{init, measure, solver, Field, Signal};
//!
//! let (m, n) = (200, 16);
//! let ensemble = measure::SensingEnsemble::sample(m, n, Field::Complex, 7).unwrap();
//! let z = Signal::random(n, Field::Real, 7).unwrap();
//! let y = measure::observe(&ensemble, &z, 0.0, 7).unwrap();
//!
//! let cfg = init::InitConfig::new(init::InitMethod::ExpSpectral, Field::Real);
//! let x0 = init::initialize(&ensemble, &y, &cfg).unwrap().x0;
//! let trace = solver::solve_gn(&ensemble, &y, &x0, Some(&z), &Default::default()).unwrap();
//! assert!(trace.final_rel_error() < 1e-5);
//! ```

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod bench;
pub mod error;
pub mod init;
pub mod linalg;
pub mod measure;
pub mod rng;
pub mod solver;
pub mod trace;

pub use error::{Error, Result};
pub use linalg::{dist, DenseMatrix, Field, Signal, C64};
pub use measure::{Observations, SensingEnsemble};
pub use trace::{SolveStatus, SolveTrace};
