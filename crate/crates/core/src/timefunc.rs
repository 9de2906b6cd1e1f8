//! Time-dependent model coefficients and their asymptotic window statistics.
//!
//! The liminf/limsup of the moving average `(1/ω)∫_t^{t+ω} h(s) ds` are
//! estimated by the min/max over a finite scan after a burn-in period.
//! Declared-periodic functions are scanned over exactly one period, which
//! makes the estimate exact up to quadrature error.

use std::f64::consts::TAU;
use std::fmt;

use crate::error::{Error, Result};
use crate::quadrature::simpson;

/// Quadrature density for window averages.
pub const PANELS_PER_UNIT_TIME: f64 = 256.0;

pub const DEFAULT_BURN_IN: f64 = 100.0;

#[derive(Debug, Clone, PartialEq)]
pub enum TimeFunctionKind {
    Constant {
        value: f64,
    },
    /// `base·(1 + amp_frac·cos(2πt/period))`
    PeriodicCosine {
        base: f64,
        amp_frac: f64,
        period: f64,
    },
    /// `base·(1 + amp_frac·(1 + e^{-decay_rate·t})·cos(2πt/period))`
    AsymptoticPeriodic {
        base: f64,
        amp_frac: f64,
        decay_rate: f64,
        period: f64,
    },
    /// Piecewise linear through `(t, value)` samples, held constant outside.
    Tabulated { samples: Vec<(f64, f64)> },
    /// `base(t) + tau·shape(t)`; used to build perturbed families.
    Shifted {
        base: Box<TimeFunction>,
        shape: Box<TimeFunction>,
        tau: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeFunction {
    kind: TimeFunctionKind,
    name: String,
}

impl TimeFunction {
    pub fn constant(name: impl Into<String>, value: f64) -> Result<Self> {
        Self::new(name, TimeFunctionKind::Constant { value })
    }

    pub fn periodic_cosine(
        name: impl Into<String>,
        base: f64,
        amp_frac: f64,
        period: f64,
    ) -> Result<Self> {
        Self::new(
            name,
            TimeFunctionKind::PeriodicCosine {
                base,
                amp_frac,
                period,
            },
        )
    }

    pub fn asymptotic_periodic(
        name: impl Into<String>,
        base: f64,
        amp_frac: f64,
        decay_rate: f64,
        period: f64,
    ) -> Result<Self> {
        Self::new(
            name,
            TimeFunctionKind::AsymptoticPeriodic {
                base,
                amp_frac,
                decay_rate,
                period,
            },
        )
    }

    pub fn tabulated(name: impl Into<String>, samples: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(name, TimeFunctionKind::Tabulated { samples })
    }

    /// `base + tau·shape`, named after the base.
    pub fn shifted(base: &TimeFunction, shape: &TimeFunction, tau: f64) -> Result<Self> {
        Self::new(
            base.name.clone(),
            TimeFunctionKind::Shifted {
                base: Box::new(base.clone()),
                shape: Box::new(shape.clone()),
                tau,
            },
        )
    }

    pub fn new(name: impl Into<String>, kind: TimeFunctionKind) -> Result<Self> {
        let name = name.into();
        let invalid = |reason: &str| Error::InvalidTimeFunction {
            name: name.clone(),
            reason: reason.to_string(),
        };
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        match &kind {
            TimeFunctionKind::Constant { value } => {
                if !value.is_finite() {
                    return Err(invalid("value must be finite"));
                }
            }
            TimeFunctionKind::PeriodicCosine {
                base,
                amp_frac,
                period,
            } => {
                if !finite(&[*base, *amp_frac, *period]) {
                    return Err(invalid("parameters must be finite"));
                }
                if *period <= 0.0 {
                    return Err(invalid("period must be positive"));
                }
            }
            TimeFunctionKind::AsymptoticPeriodic {
                base,
                amp_frac,
                decay_rate,
                period,
            } => {
                if !finite(&[*base, *amp_frac, *decay_rate, *period]) {
                    return Err(invalid("parameters must be finite"));
                }
                if *period <= 0.0 {
                    return Err(invalid("period must be positive"));
                }
                if *decay_rate < 0.0 {
                    return Err(invalid("decay_rate must be nonnegative"));
                }
            }
            TimeFunctionKind::Tabulated { samples } => {
                if samples.is_empty() {
                    return Err(invalid("at least one sample is required"));
                }
                if samples.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
                    return Err(invalid("samples must be finite"));
                }
                if samples.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(invalid("sample times must be strictly increasing"));
                }
            }
            TimeFunctionKind::Shifted { tau, .. } => {
                if !tau.is_finite() {
                    return Err(invalid("tau must be finite"));
                }
            }
        }
        Ok(Self { kind, name })
    }

    pub fn kind(&self) -> &TimeFunctionKind {
        &self.kind
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, t: f64) -> f64 {
        match &self.kind {
            TimeFunctionKind::Constant { value } => *value,
            TimeFunctionKind::PeriodicCosine {
                base,
                amp_frac,
                period,
            } => base * (1.0 + amp_frac * (TAU * t / period).cos()),
            TimeFunctionKind::AsymptoticPeriodic {
                base,
                amp_frac,
                decay_rate,
                period,
            } => base * (1.0 + amp_frac * (1.0 + (-decay_rate * t).exp()) * (TAU * t / period).cos()),
            TimeFunctionKind::Tabulated { samples } => interpolate(samples, t),
            TimeFunctionKind::Shifted { base, shape, tau } => base.eval(t) + tau * shape.eval(t),
        }
    }

    pub fn is_constant(&self) -> bool {
        match &self.kind {
            TimeFunctionKind::Constant { .. } => true,
            TimeFunctionKind::PeriodicCosine { amp_frac, .. }
            | TimeFunctionKind::AsymptoticPeriodic { amp_frac, .. } => *amp_frac == 0.0,
            TimeFunctionKind::Tabulated { samples } => samples.len() == 1,
            TimeFunctionKind::Shifted { base, shape, tau } => {
                base.is_constant() && (shape.is_constant() || *tau == 0.0)
            }
        }
    }

    /// The constant value, if the function is constant.
    pub fn constant_value(&self) -> Option<f64> {
        self.is_constant().then(|| self.eval(0.0))
    }

    /// Declared period for exactly periodic functions. Constants have none.
    pub fn period(&self) -> Option<f64> {
        match &self.kind {
            TimeFunctionKind::PeriodicCosine { period, .. } => Some(*period),
            TimeFunctionKind::Shifted { base, shape, tau } => {
                let shape_const = shape.is_constant() || *tau == 0.0;
                match (base.period(), shape.period()) {
                    (Some(p), _) if shape_const => Some(p),
                    (None, Some(q)) if base.is_constant() => Some(q),
                    (Some(p), Some(q)) if (p - q).abs() <= 1e-12 * p => Some(p),
                    _ => None,
                }
            }
            _ => None,
        }
    }

    /// Base level of the parametric kinds (the constant for `Constant`).
    pub fn base(&self) -> Option<f64> {
        match &self.kind {
            TimeFunctionKind::Constant { value } => Some(*value),
            TimeFunctionKind::PeriodicCosine { base, .. }
            | TimeFunctionKind::AsymptoticPeriodic { base, .. } => Some(*base),
            _ => None,
        }
    }

    /// Copy with the base level replaced.
    pub fn with_base(&self, new_base: f64) -> Result<Self> {
        let kind = match &self.kind {
            TimeFunctionKind::Constant { .. } => TimeFunctionKind::Constant { value: new_base },
            TimeFunctionKind::PeriodicCosine {
                amp_frac, period, ..
            } => TimeFunctionKind::PeriodicCosine {
                base: new_base,
                amp_frac: *amp_frac,
                period: *period,
            },
            TimeFunctionKind::AsymptoticPeriodic {
                amp_frac,
                decay_rate,
                period,
                ..
            } => TimeFunctionKind::AsymptoticPeriodic {
                base: new_base,
                amp_frac: *amp_frac,
                decay_rate: *decay_rate,
                period: *period,
            },
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "`{}` has no base level to set",
                    self.name
                )))
            }
        };
        Self::new(self.name.clone(), kind)
    }

    /// Copy with the relative amplitude replaced. Only the oscillating kinds
    /// carry an amplitude.
    pub fn with_amp_frac(&self, new_amp: f64) -> Result<Self> {
        let kind = match &self.kind {
            TimeFunctionKind::PeriodicCosine { base, period, .. } => {
                TimeFunctionKind::PeriodicCosine {
                    base: *base,
                    amp_frac: new_amp,
                    period: *period,
                }
            }
            TimeFunctionKind::AsymptoticPeriodic {
                base,
                decay_rate,
                period,
                ..
            } => TimeFunctionKind::AsymptoticPeriodic {
                base: *base,
                amp_frac: new_amp,
                decay_rate: *decay_rate,
                period: *period,
            },
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "`{}` has no oscillation amplitude to set",
                    self.name
                )))
            }
        };
        Self::new(self.name.clone(), kind)
    }

    /// `(1/ω)∫_t^{t+ω} f(s) ds` by composite Simpson.
    pub fn window_average(&self, t: f64, omega: f64) -> f64 {
        if let Some(c) = self.constant_value() {
            return c;
        }
        let panels = (PANELS_PER_UNIT_TIME * omega).ceil() as usize;
        simpson(|s| self.eval(s), t, t + omega, panels) / omega
    }

    /// Estimates `h_ω^-`, `h_ω^+` and `h_S` over `[burn_in, burn_in + scan_length]`.
    pub fn window_bounds(&self, omega: f64, scan: &ScanPolicy) -> Result<WindowStats> {
        let (scan_length, step) = scan.resolve(omega)?;
        if let Some(c) = self.constant_value() {
            return Ok(WindowStats {
                omega,
                lower: c,
                upper: c,
                sup: c,
                burn_in: scan.burn_in,
                scan_length,
            });
        }
        let (scan_length, step) = match self.period() {
            Some(period) => (period, step.min(period / 100.0)),
            None => (scan_length, step),
        };
        let mut lower = f64::INFINITY;
        let mut upper = f64::NEG_INFINITY;
        let mut sup = f64::NEG_INFINITY;
        for t in scan_grid(scan.burn_in, scan_length, step) {
            let avg = self.window_average(t, omega);
            lower = lower.min(avg);
            upper = upper.max(avg);
            sup = sup.max(self.eval(t));
        }
        Ok(WindowStats {
            omega,
            lower,
            upper,
            sup,
            burn_in: scan.burn_in,
            scan_length,
        })
    }

    /// `sup_{0 ≤ t ≤ horizon} |f(t)|` on a grid of spacing `step`.
    pub fn sup_abs(&self, horizon: f64, step: f64) -> f64 {
        if let Some(c) = self.constant_value() {
            return c.abs();
        }
        scan_grid(0.0, horizon, step)
            .map(|t| self.eval(t).abs())
            .fold(0.0, f64::max)
    }
}

impl fmt::Display for TimeFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            TimeFunctionKind::Constant { value } => write!(f, "{}={value}", self.name),
            TimeFunctionKind::PeriodicCosine {
                base,
                amp_frac,
                period,
            } => write!(f, "{}={base}(1+{amp_frac}cos(2πt/{period}))", self.name),
            TimeFunctionKind::AsymptoticPeriodic {
                base,
                amp_frac,
                decay_rate,
                period,
            } => write!(
                f,
                "{}={base}(1+{amp_frac}(1+e^(-{decay_rate}t))cos(2πt/{period}))",
                self.name
            ),
            TimeFunctionKind::Tabulated { samples } => {
                write!(f, "{}=tabulated[{} samples]", self.name, samples.len())
            }
            TimeFunctionKind::Shifted { base, shape, tau } => {
                write!(f, "{} + {tau}·({})", base, shape)
            }
        }
    }
}

fn interpolate(samples: &[(f64, f64)], t: f64) -> f64 {
    let first = samples[0];
    let last = samples[samples.len() - 1];
    if t <= first.0 {
        return first.1;
    }
    if t >= last.0 {
        return last.1;
    }
    // index of the first sample strictly after t
    let hi = samples.partition_point(|&(ts, _)| ts <= t);
    let (t0, v0) = samples[hi - 1];
    let (t1, v1) = samples[hi];
    v0 + (v1 - v0) * (t - t0) / (t1 - t0)
}

/// Grid `start, start + step, …` up to and including `start + length`.
pub(crate) fn scan_grid(start: f64, length: f64, step: f64) -> impl Iterator<Item = f64> {
    let count = (length / step + 1e-9).floor() as usize;
    (0..=count).map(move |k| start + step * k as f64)
}

/// Burn-in and scan grid used to approximate liminf/limsup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanPolicy {
    pub burn_in: f64,
    /// Defaults to `max(10ω, 100)`.
    pub scan_length: Option<f64>,
    /// Defaults to `ω/100`.
    pub step: Option<f64>,
}

impl Default for ScanPolicy {
    fn default() -> Self {
        Self {
            burn_in: DEFAULT_BURN_IN,
            scan_length: None,
            step: None,
        }
    }
}

impl ScanPolicy {
    pub fn with_burn_in(burn_in: f64) -> Self {
        Self {
            burn_in,
            ..Self::default()
        }
    }

    /// Concrete `(scan_length, step)` for window length `omega`.
    pub fn resolve(&self, omega: f64) -> Result<(f64, f64)> {
        if !(omega > 0.0) || !omega.is_finite() {
            return Err(Error::InvalidWindow(format!("omega must be positive, got {omega}")));
        }
        if !(self.burn_in >= 0.0) {
            return Err(Error::InvalidWindow(format!(
                "burn_in must be nonnegative, got {}",
                self.burn_in
            )));
        }
        let scan_length = self.scan_length.unwrap_or((10.0 * omega).max(100.0));
        if scan_length < omega {
            return Err(Error::InvalidWindow(format!(
                "scan_length {scan_length} is shorter than the window {omega}"
            )));
        }
        let step = self.step.unwrap_or(omega / 100.0);
        if !(step > 0.0) || step > omega / 10.0 * (1.0 + 1e-12) {
            return Err(Error::InvalidWindow(format!(
                "step {step} must lie in (0, omega/10]"
            )));
        }
        Ok((scan_length, step))
    }
}

/// Estimates of `h_ω^-` (lower), `h_ω^+` (upper) and `h_S` (sup).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowStats {
    pub omega: f64,
    pub lower: f64,
    pub upper: f64,
    pub sup: f64,
    pub burn_in: f64,
    pub scan_length: f64,
}
