//! TOML experiment configuration: schema, validation and normalization.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use seirs_threshold::classify::{Axis, Knob, Perturbation, CANONICAL_FRACTIONS};
use seirs_threshold::dynamics::DEFAULT_STEP;
use seirs_threshold::timefunc::DEFAULT_BURN_IN;
use seirs_threshold::{
    Coefficients, ContactRate, ForcingWindows, IncidenceFunction, IncidenceKind, ModelSpec,
    ScanPolicy, TimeFunction,
};

use crate::CliError;

pub const DEFAULT_T_END: f64 = 300.0;
pub const DEFAULT_THINNING: usize = 100;
pub const DEFAULT_TAUS: [f64; 5] = [0.0, 0.2, 0.1, 0.05, 0.025];
pub const DEFAULT_VERIFY_SAMPLES: usize = 500;
pub const DEFAULT_ROBUSTNESS_P: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Simulate,
    Thresholds,
    Sweep,
    Robustness,
    VerifyIncidence,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Thresholds => "thresholds",
            Command::Sweep => "sweep",
            Command::Robustness => "robustness",
            Command::VerifyIncidence => "verify-incidence",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    pub model: ModelConfig,
    #[serde(default)]
    pub numerics: NumericsConfig,
    #[serde(default)]
    pub threshold: ThresholdSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub robustness: Option<RobustnessConfig>,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub coefficients: CoefficientsConfig,
    pub incidence: IncidenceConfig,
    /// Incidence domain cap `K`; `1.5·D` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain_cap: Option<f64>,
    #[serde(default)]
    pub windows: WindowsConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientsConfig {
    #[serde(rename = "Lambda")]
    pub lambda: FunctionConfig,
    pub mu: FunctionConfig,
    pub beta: FunctionConfig,
    pub eta: FunctionConfig,
    pub epsilon: FunctionConfig,
    pub gamma: FunctionConfig,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionConfig {
    Constant {
        value: f64,
    },
    PeriodicCosine {
        base: f64,
        amp_frac: f64,
        #[serde(default = "one")]
        period: f64,
    },
    AsymptoticPeriodic {
        base: f64,
        amp_frac: f64,
        decay_rate: f64,
        #[serde(default = "one")]
        period: f64,
    },
    Tabulated {
        samples: Vec<[f64; 2]>,
    },
}

impl FunctionConfig {
    fn build(&self, path: &str) -> Result<TimeFunction, CliError> {
        let name = path.rsplit('.').next().unwrap_or(path);
        let amp_ok = |a: f64| {
            if a > -1.0 && a < 1.0 {
                Ok(())
            } else {
                Err(CliError::config(path, "amp_frac out of range (-1,1)"))
            }
        };
        let built = match *self {
            FunctionConfig::Constant { value } => TimeFunction::constant(name, value),
            FunctionConfig::PeriodicCosine {
                base,
                amp_frac,
                period,
            } => {
                amp_ok(amp_frac)?;
                TimeFunction::periodic_cosine(name, base, amp_frac, period)
            }
            FunctionConfig::AsymptoticPeriodic {
                base,
                amp_frac,
                decay_rate,
                period,
            } => {
                amp_ok(amp_frac)?;
                TimeFunction::asymptotic_periodic(name, base, amp_frac, decay_rate, period)
            }
            FunctionConfig::Tabulated { ref samples } => {
                TimeFunction::tabulated(name, samples.iter().map(|&[t, v]| (t, v)).collect())
            }
        };
        built.map_err(|e| CliError::config(path, e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum IncidenceConfig {
    MassAction,
    Standard,
    MichaelisMenten { contact: ContactConfig },
    Saturated { b: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ContactConfig {
    Identity,
    One,
    Saturating { b: f64 },
}

impl IncidenceConfig {
    fn kind(&self) -> IncidenceKind {
        match *self {
            IncidenceConfig::MassAction => IncidenceKind::MassAction,
            IncidenceConfig::Standard => IncidenceKind::Standard,
            IncidenceConfig::MichaelisMenten { ref contact } => {
                IncidenceKind::MichaelisMenten(match *contact {
                    ContactConfig::Identity => ContactRate::Identity,
                    ContactConfig::One => ContactRate::One,
                    ContactConfig::Saturating { b } => ContactRate::Saturating { b },
                })
            }
            IncidenceConfig::Saturated { b } => IncidenceKind::Saturated { b },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowsConfig {
    #[serde(default = "one")]
    pub mortality: f64,
    #[serde(default = "one")]
    pub recruitment: f64,
    #[serde(default = "one")]
    pub transmission: f64,
}

impl Default for WindowsConfig {
    fn default() -> Self {
        Self {
            mortality: 1.0,
            recruitment: 1.0,
            transmission: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsConfig {
    /// RK4 step, also the upper bound on the auxiliary quadrature step.
    pub step: f64,
    pub t_end: f64,
    pub burn_in: f64,
    /// Filled with `max(10ω, 100)` for the largest window in use.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scan_length: Option<f64>,
    /// Filled with `ω/100` for the smallest window in use.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scan_step: Option<f64>,
    /// Initial `(S, E, I, R)` as fractions of `Λ̄/μ̄`.
    pub initial_fractions: [f64; 4],
    /// Adds a `W = pE − I` column to the trajectory.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w_weight: Option<f64>,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        Self {
            step: DEFAULT_STEP,
            t_end: DEFAULT_T_END,
            burn_in: DEFAULT_BURN_IN,
            scan_length: None,
            scan_step: None,
            initial_fractions: CANONICAL_FRACTIONS,
            w_weight: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThresholdSection {
    pub lambdas: Vec<f64>,
    /// Report at this `p` instead of searching for a witness.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    pub z0: f64,
    pub force_general_path: bool,
}

impl Default for ThresholdSection {
    fn default() -> Self {
        Self {
            lambdas: vec![1.0],
            p: None,
            z0: 1.0,
            force_general_path: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis1: AxisConfig,
    pub axis2: AxisConfig,
}

/// Either explicit `values` or `start`, `end`, `count`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisConfig {
    pub knob: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
}

impl AxisConfig {
    pub fn build(&self, path: &str) -> Result<Axis, CliError> {
        Knob::parse(&self.knob).map_err(|e| CliError::config(path, e))?;
        let axis = match (&self.values, self.start, self.end, self.count) {
            (Some(values), None, None, None) => Axis::new(&self.knob, values.clone()),
            (None, Some(start), Some(end), Some(count)) => {
                Axis::linspace(&self.knob, start, end, count)
            }
            _ => {
                return Err(CliError::config(
                    path,
                    "give either `values` or all of `start`, `end`, `count`",
                ))
            }
        };
        axis.map_err(|e| CliError::config(path, e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobustnessConfig {
    #[serde(default = "default_taus")]
    pub taus: Vec<f64>,
    /// Defaults to `threshold.p`, then 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default)]
    pub shapes: ShapesConfig,
}

fn default_taus() -> Vec<f64> {
    DEFAULT_TAUS.to_vec()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapesConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<FunctionConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<FunctionConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<FunctionConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<FunctionConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none", rename = "Lambda")]
    pub lambda: Option<FunctionConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<FunctionConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub incidence: Option<IncidenceConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub samples: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            samples: DEFAULT_VERIFY_SAMPLES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Keep every `thinning`-th integration step in `trajectory.csv`.
    pub thinning: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            thinning: DEFAULT_THINNING,
        }
    }
}

/// Parses a TOML document. Unknown keys are errors.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
}

fn positive(path: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::config(path, format!("must be positive and finite, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Validates every section and fills all defaults, including the domain
    /// cap and the scan grid. Idempotent.
    pub fn normalize(mut self) -> Result<Self, CliError> {
        let n = &self.numerics;
        positive("numerics.step", n.step)?;
        positive("numerics.t_end", n.t_end)?;
        if !(n.burn_in >= 0.0 && n.burn_in.is_finite()) {
            return Err(CliError::config("numerics.burn_in", "must be nonnegative"));
        }
        if n.initial_fractions.iter().any(|f| !(*f >= 0.0 && f.is_finite())) {
            return Err(CliError::config("numerics.initial_fractions", "must be nonnegative"));
        }
        if let Some(w) = n.w_weight {
            positive("numerics.w_weight", w)?;
        }
        let t = &self.threshold;
        if t.lambdas.is_empty() {
            return Err(CliError::config("threshold.lambdas", "must not be empty"));
        }
        for &l in &t.lambdas {
            positive("threshold.lambdas", l)?;
        }
        if let Some(p) = t.p {
            positive("threshold.p", p)?;
        }
        positive("threshold.z0", t.z0)?;
        if self.output.thinning == 0 {
            return Err(CliError::config("output.thinning", "must be at least 1"));
        }
        if self.verify.samples < 100 {
            return Err(CliError::config("verify.samples", "must be at least 100"));
        }
        let w = self.model.windows;
        for (path, v) in [
            ("model.windows.mortality", w.mortality),
            ("model.windows.recruitment", w.recruitment),
            ("model.windows.transmission", w.transmission),
        ] {
            positive(path, v)?;
        }

        let omegas = t.lambdas.iter().copied().chain([w.mortality, w.recruitment, w.transmission]);
        let (lo, hi) = omegas.fold((f64::INFINITY, 0.0f64), |(lo, hi), o| (lo.min(o), hi.max(o)));
        let scan_length = *self
            .numerics
            .scan_length
            .get_or_insert((10.0 * hi).max(100.0));
        let scan_step = *self.numerics.scan_step.get_or_insert(lo / 100.0);
        positive("numerics.scan_length", scan_length)?;
        positive("numerics.scan_step", scan_step)?;

        let model = self.build_model()?;
        self.model.domain_cap = Some(model.incidence().domain_cap());

        if let Some(sweep) = &self.sweep {
            sweep.axis1.build("sweep.axis1")?;
            sweep.axis2.build("sweep.axis2")?;
        }
        if let Some(r) = &mut self.robustness {
            if r.taus.is_empty() {
                return Err(CliError::config("robustness.taus", "must not be empty"));
            }
            if r.taus.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
                return Err(CliError::config("robustness.taus", "must be nonnegative"));
            }
            let p = *r.p.get_or_insert(self.threshold.p.unwrap_or(DEFAULT_ROBUSTNESS_P));
            positive("robustness.p", p)?;
        }
        self.build_perturbation(model.incidence().domain_cap())?;
        Ok(self)
    }

    pub fn scan_policy(&self) -> ScanPolicy {
        ScanPolicy {
            burn_in: self.numerics.burn_in,
            scan_length: self.numerics.scan_length,
            step: self.numerics.scan_step,
        }
    }

    pub fn build_model(&self) -> Result<ModelSpec, CliError> {
        let c = &self.model.coefficients;
        let coefficients = Coefficients {
            recruitment: c.lambda.build("model.coefficients.Lambda")?,
            mortality: c.mu.build("model.coefficients.mu")?,
            transmission: c.beta.build("model.coefficients.beta")?,
            immunity_loss: c.eta.build("model.coefficients.eta")?,
            progression: c.epsilon.build("model.coefficients.epsilon")?,
            recovery: c.gamma.build("model.coefficients.gamma")?,
        };
        let w = self.model.windows;
        let windows = ForcingWindows {
            mortality: w.mortality,
            recruitment: w.recruitment,
            transmission: w.transmission,
        };
        ModelSpec::new(
            coefficients,
            self.model.incidence.kind(),
            self.model.domain_cap,
            windows,
            self.scan_policy(),
        )
        .map_err(|e| CliError::config("model", e))
    }

    /// Shapes from the `robustness.shapes` section; empty when the section is absent.
    pub fn build_perturbation(&self, domain_cap: f64) -> Result<Perturbation, CliError> {
        let Some(r) = &self.robustness else {
            return Ok(Perturbation::default());
        };
        let s = &r.shapes;
        let shape = |f: &Option<FunctionConfig>, name: &str| {
            f.as_ref()
                .map(|f| f.build(&format!("robustness.shapes.{name}")))
                .transpose()
        };
        let incidence = s
            .incidence
            .as_ref()
            .map(|k| IncidenceFunction::new(k.kind(), domain_cap))
            .transpose()
            .map_err(|e| CliError::config("robustness.shapes.incidence", e))?;
        Ok(Perturbation {
            transmission: shape(&s.beta, "beta")?,
            immunity_loss: shape(&s.eta, "eta")?,
            progression: shape(&s.epsilon, "epsilon")?,
            recovery: shape(&s.gamma, "gamma")?,
            incidence,
            recruitment: shape(&s.lambda, "Lambda")?,
            mortality: shape(&s.mu, "mu")?,
        })
    }
}
