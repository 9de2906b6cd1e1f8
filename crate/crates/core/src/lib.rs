//! Threshold analysis for SEIRS models with time-dependent coefficients and
//! general incidence.
//!
//! The crate computes window statistics of the coefficients, the threshold
//! functionals `R_e`, `R_p`, `R_e*`, `R_p*`, `G`, `H`, and classifies a model
//! as extinct or persistent when one of the sufficient conditions holds.

pub mod classify;
pub mod dynamics;
pub mod error;
pub mod incidence;
pub mod quadrature;
pub mod thresholds;
pub mod timefunc;

pub use classify::{classify, Clause, Outcome, Verdict};
pub use dynamics::{Coefficients, ForcingWindows, ModelSpec, State, Trajectory};
pub use error::{Error, Result};
pub use incidence::{ContactRate, IncidenceFunction, IncidenceKind};
pub use thresholds::{compute_report, ThresholdConfig, ThresholdReport};
pub use timefunc::{ScanPolicy, TimeFunction, TimeFunctionKind, WindowStats};
