//! Verdicts from threshold reports, parameter-plane sweeps, confirmation by
//! simulation and robustness under perturbation.

use std::fmt;
use std::io::{self, Write};

use rayon::prelude::*;

use crate::dynamics::{fmt_num, IntegrateOptions, ModelSpec, State, Trajectory, DEFAULT_STEP};
use crate::error::{Error, Result};
use crate::incidence::{IncidenceFunction, IncidenceKind};
use crate::thresholds::{
    common_period, mm_corollary, periodic_corollary, CorollaryCheck, Mode, SideCondition,
    ThresholdConfig, ThresholdProfile, ThresholdReport,
};
use crate::timefunc::TimeFunction;

pub const DEFAULT_LAMBDAS: [f64; 1] = [1.0];
/// Canonical initial state as fractions of `N₀ = Λ̄/μ̄`.
pub const CANONICAL_FRACTIONS: [f64; 4] = [0.7, 0.1, 0.1, 0.1];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Extinction,
    Persistence,
    Inconclusive,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::Extinction => "extinction",
            Outcome::Persistence => "persistence",
            Outcome::Inconclusive => "inconclusive",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The theorem clause that produced a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Clause {
    /// `R_e < 1`, `R_e* < 1`, `G < 0`
    ReStarG,
    /// `R_e < 1`, `R_e* < 1`, `H > 0`
    ReStarH,
    /// `R_p > 1`, `R_p* > 1`, `G < 0`
    RpStarG,
    /// `R_p > 1`, `R_p* > 1`, `H > 0`
    RpStarH,
    None,
}

impl Clause {
    pub fn new(mode: Mode, side: SideCondition) -> Self {
        match (mode, side) {
            (Mode::Extinction, SideCondition::G) => Clause::ReStarG,
            (Mode::Extinction, SideCondition::H) => Clause::ReStarH,
            (Mode::Persistence, SideCondition::G) => Clause::RpStarG,
            (Mode::Persistence, SideCondition::H) => Clause::RpStarH,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Clause::ReStarG => "ReStar_G",
            Clause::ReStarH => "ReStar_H",
            Clause::RpStarG => "RpStar_G",
            Clause::RpStarH => "RpStar_H",
            Clause::None => "None",
        }
    }

    pub fn outcome(&self) -> Outcome {
        match self {
            Clause::ReStarG | Clause::ReStarH => Outcome::Extinction,
            Clause::RpStarG | Clause::RpStarH => Outcome::Persistence,
            Clause::None => Outcome::Inconclusive,
        }
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Witness {
    pub lambda: f64,
    pub p: f64,
}

/// How a verdict was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Path {
    /// Search over `p` on computed reports.
    General,
    /// A closed-form corollary.
    ClosedForm(CorollaryCheck),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub outcome: Outcome,
    pub clause: Clause,
    pub witness: Option<Witness>,
    /// The certifying report (general path only).
    pub report: Option<ThresholdReport>,
    pub path: Path,
}

impl Verdict {
    fn inconclusive(path: Path) -> Self {
        Self {
            outcome: Outcome::Inconclusive,
            clause: Clause::None,
            witness: None,
            report: None,
            path,
        }
    }

    fn certified(clause: Clause, witness: Witness, report: Option<ThresholdReport>, path: Path) -> Self {
        Self {
            outcome: clause.outcome(),
            clause,
            witness: Some(witness),
            report,
            path,
        }
    }
}

fn check_lambdas(lambdas: &[f64]) -> Result<()> {
    if lambdas.is_empty() || lambdas.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "lambdas must be a nonempty list of positive values, got {lambdas:?}"
        )));
    }
    Ok(())
}

/// Searches each `λ` for a `p` satisfying an extinction clause, then a
/// persistence clause. The first `λ` that yields a clause wins.
pub fn classify(m: &ModelSpec, lambdas: &[f64]) -> Result<Verdict> {
    check_lambdas(lambdas)?;
    for &lambda in lambdas {
        let cfg = ThresholdConfig::for_model(m, lambda, 1.0);
        let profile = ThresholdProfile::build(m, &cfg)?;
        for mode in [Mode::Extinction, Mode::Persistence] {
            if let Some((p, report, side)) = profile.search(mode)? {
                return Ok(Verdict::certified(
                    Clause::new(mode, side),
                    Witness { lambda, p },
                    Some(report),
                    Path::General,
                ));
            }
        }
    }
    Ok(Verdict::inconclusive(Path::General))
}

/// Closed-form corollary evaluation when the model matches a recognized
/// template: periodic coefficients with constant `Λ`, `μ` first, then
/// Michaelis-Menten incidence with constant `Λ`, `μ`.
pub fn closed_form_check(m: &ModelSpec, lambdas: &[f64]) -> Option<Result<CorollaryCheck>> {
    let c = m.coefficients();
    if !(c.recruitment.is_constant() && c.mortality.is_constant()) || lambdas.is_empty() {
        return None;
    }
    if common_period(m).is_ok() {
        return Some(periodic_corollary(m, lambdas[0]));
    }
    m.incidence().contact_rate()?;
    let mut last = None;
    for &lambda in lambdas {
        match mm_corollary(m, lambda) {
            Ok(check) if check.conclusion().is_some() => return Some(Ok(check)),
            other => last = Some(other),
        }
    }
    last
}

/// Verdict from a closed form when one applies, otherwise from [`classify`].
pub fn classify_fast(m: &ModelSpec, lambdas: &[f64], force_general: bool) -> Result<Verdict> {
    check_lambdas(lambdas)?;
    if !force_general {
        if let Some(check) = closed_form_check(m, lambdas) {
            let check = check?;
            let path = Path::ClosedForm(check);
            return Ok(match check.conclusion() {
                Some((mode, side, p)) => Verdict::certified(
                    Clause::new(mode, side),
                    Witness {
                        lambda: check.lambda,
                        p,
                    },
                    None,
                    path,
                ),
                None => Verdict::inconclusive(path),
            });
        }
    }
    classify(m, lambdas)
}

/// `N₀ = Λ̄/μ̄`, averaged over one window after the burn-in.
pub fn canonical_population(m: &ModelSpec) -> f64 {
    let c = m.coefficients();
    let t0 = m.scan().burn_in;
    let w = m.windows();
    c.recruitment.window_average(t0, w.recruitment) / c.mortality.window_average(t0, w.mortality)
}

/// `(S, E, I, R) = (0.7, 0.1, 0.1, 0.1)·N₀` at `t = 0`.
pub fn canonical_state(m: &ModelSpec) -> State {
    state_from_fractions(m, CANONICAL_FRACTIONS)
}

/// `fractions·N₀` at `t = 0`.
pub fn state_from_fractions(m: &ModelSpec, fractions: [f64; 4]) -> State {
    let n0 = canonical_population(m);
    State::new(0.0, fractions.map(|f| f * n0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationCheck {
    pub pass: bool,
    /// Max of `I` over the tail for extinction, min for persistence.
    pub tail_stat: f64,
    pub tail_start: f64,
    pub trajectory: Trajectory,
}

/// Integrates from the canonical state and checks the tail `[0.9 t_end, t_end]`:
/// extinction needs `max I < floor`, persistence needs `min I > ceiling`.
pub fn confirm_by_simulation(
    m: &ModelSpec,
    v: &Verdict,
    t_end: f64,
    floor: f64,
    ceiling: f64,
) -> Result<SimulationCheck> {
    let weight = v.witness.map(|w| w.p);
    let traj = m.integrate_with(
        canonical_state(m),
        t_end,
        DEFAULT_STEP,
        &IntegrateOptions {
            thin: 10,
            w_weight: weight,
        },
    )?;
    let tail_start = 0.9 * t_end;
    let infectives = traj.window(tail_start, t_end).map(|s| s.infective);
    let (pass, tail_stat) = match v.outcome {
        Outcome::Extinction => {
            let max = infectives.fold(f64::NEG_INFINITY, f64::max);
            (max < floor, max)
        }
        Outcome::Persistence => {
            let min = infectives.fold(f64::INFINITY, f64::min);
            (min > ceiling, min)
        }
        Outcome::Inconclusive => {
            return Err(Error::InvalidParameter(
                "an inconclusive verdict cannot be confirmed".into(),
            ))
        }
    };
    Ok(SimulationCheck {
        pass,
        tail_stat,
        tail_start,
        trajectory: traj,
    })
}

/// Sign changes of `W(p, t) = pE − I` over the final quarter of a trajectory
/// that recorded `W`.
pub fn w_tail_sign_changes(traj: &Trajectory) -> Option<usize> {
    let t0 = traj.states.first()?.t;
    let t1 = traj.last().t;
    traj.w_sign_changes(t0 + 0.75 * (t1 - t0))
}

/// Sup-norm distance between two trajectories on a common time grid, over
/// samples with `t ≥ from`.
pub fn tail_distance(a: &Trajectory, b: &Trajectory, from: f64) -> Result<f64> {
    if a.states.len() != b.states.len() {
        return Err(Error::InvalidParameter("trajectories have different grids".into()));
    }
    let mut sup = 0.0f64;
    for (x, y) in a.states.iter().zip(&b.states) {
        if (x.t - y.t).abs() > 1e-9 {
            return Err(Error::InvalidParameter("trajectories have different grids".into()));
        }
        if x.t >= from {
            for (u, v) in x.components().iter().zip(y.components()) {
                sup = sup.max((u - v).abs());
            }
        }
    }
    Ok(sup)
}

/// Coefficient selector for sweep knobs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coef {
    Recruitment,
    Mortality,
    Transmission,
    ImmunityLoss,
    Progression,
    Recovery,
}

impl Coef {
    fn get(self, c: &crate::dynamics::Coefficients) -> &TimeFunction {
        match self {
            Coef::Recruitment => &c.recruitment,
            Coef::Mortality => &c.mortality,
            Coef::Transmission => &c.transmission,
            Coef::ImmunityLoss => &c.immunity_loss,
            Coef::Progression => &c.progression,
            Coef::Recovery => &c.recovery,
        }
    }

    fn get_mut(self, c: &mut crate::dynamics::Coefficients) -> &mut TimeFunction {
        match self {
            Coef::Recruitment => &mut c.recruitment,
            Coef::Mortality => &mut c.mortality,
            Coef::Transmission => &mut c.transmission,
            Coef::ImmunityLoss => &mut c.immunity_loss,
            Coef::Progression => &mut c.progression,
            Coef::Recovery => &mut c.recovery,
        }
    }
}

/// A template parameter a sweep axis can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Knob {
    /// Base level (the value of a constant coefficient).
    Base(Coef),
    /// Relative cosine amplitude. A constant coefficient becomes a
    /// period-1 cosine.
    Amplitude(Coef),
}

impl Knob {
    /// Accepts `Lambda`, `mu`, `beta`, `eta`, `epsilon`, `gamma` for base
    /// levels, `b`, `d`, `k` for the amplitudes of β, ε, γ, and
    /// `<coefficient>_amp` for any amplitude.
    pub fn parse(name: &str) -> Result<Self> {
        let coef = |s: &str| match s {
            "Lambda" => Some(Coef::Recruitment),
            "mu" => Some(Coef::Mortality),
            "beta" => Some(Coef::Transmission),
            "eta" => Some(Coef::ImmunityLoss),
            "epsilon" => Some(Coef::Progression),
            "gamma" => Some(Coef::Recovery),
            _ => None,
        };
        let knob = match name {
            "b" => Some(Knob::Amplitude(Coef::Transmission)),
            "d" => Some(Knob::Amplitude(Coef::Progression)),
            "k" => Some(Knob::Amplitude(Coef::Recovery)),
            _ => match name.strip_suffix("_amp") {
                Some(base) => coef(base).map(Knob::Amplitude),
                None => coef(name).map(Knob::Base),
            },
        };
        knob.ok_or_else(|| Error::InvalidParameter(format!("unknown sweep knob `{name}`")))
    }

    pub fn apply(&self, m: &ModelSpec, value: f64) -> Result<ModelSpec> {
        let mut c = m.coefficients().clone();
        match *self {
            Knob::Base(coef) => {
                let f = coef.get(&c).with_base(value)?;
                *coef.get_mut(&mut c) = f;
            }
            Knob::Amplitude(coef) => {
                let f = coef.get(&c);
                let f = match f.constant_value() {
                    Some(v) if f.base().is_some() && f.period().is_none() => {
                        TimeFunction::periodic_cosine(f.name(), v, value, 1.0)?
                    }
                    _ => f.with_amp_frac(value)?,
                };
                *coef.get_mut(&mut c) = f;
            }
        }
        m.with_coefficients(c)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub name: String,
    pub knob: Knob,
    pub values: Vec<f64>,
}

impl Axis {
    pub fn new(name: &str, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter(format!("axis `{name}` has no values")));
        }
        Ok(Self {
            name: name.to_string(),
            knob: Knob::parse(name)?,
            values,
        })
    }

    /// `count` evenly spaced values on `[start, end]`.
    pub fn linspace(name: &str, start: f64, end: f64, count: usize) -> Result<Self> {
        let values = match count {
            0 => Vec::new(),
            1 => vec![start],
            _ => (0..count)
                .map(|i| start + (end - start) * i as f64 / (count - 1) as f64)
                .collect(),
        };
        Self::new(name, values)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub outcome: Outcome,
    pub clause: Clause,
    pub witness: Option<Witness>,
    pub closed_form: bool,
    /// Error message when the cell could not be evaluated.
    pub note: Option<String>,
}

#[derive(Debug, Clone)]
pub struct RegionGrid {
    pub axis1: Axis,
    pub axis2: Axis,
    /// Row-major: `cells[i * axis2.values.len() + j]`.
    pub cells: Vec<Cell>,
    pub template: ModelSpec,
}

pub const REGION_CSV_HEADER: &str = "axis1,axis2,outcome,clause,p,lambda";

impl RegionGrid {
    pub fn shape(&self) -> (usize, usize) {
        (self.axis1.values.len(), self.axis2.values.len())
    }

    pub fn cell(&self, i: usize, j: usize) -> &Cell {
        &self.cells[i * self.axis2.values.len() + j]
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{REGION_CSV_HEADER}")?;
        for (i, &a) in self.axis1.values.iter().enumerate() {
            for (j, &b) in self.axis2.values.iter().enumerate() {
                let cell = self.cell(i, j);
                let (p, lambda) = match cell.witness {
                    Some(w) => (fmt_num(w.p), fmt_num(w.lambda)),
                    None => (String::new(), String::new()),
                };
                writeln!(
                    out,
                    "{},{},{},{},{p},{lambda}",
                    fmt_num(a),
                    fmt_num(b),
                    cell.outcome,
                    cell.clause
                )?;
            }
        }
        Ok(())
    }
}

/// Applies the two knobs to the template and classifies the result.
pub fn evaluate_cell(
    template: &ModelSpec,
    axis1: (&Knob, f64),
    axis2: (&Knob, f64),
    lambdas: &[f64],
    force_general: bool,
) -> Cell {
    let verdict = axis1
        .0
        .apply(template, axis1.1)
        .and_then(|m| axis2.0.apply(&m, axis2.1))
        .and_then(|m| classify_fast(&m, lambdas, force_general));
    match verdict {
        Ok(v) => Cell {
            outcome: v.outcome,
            clause: v.clause,
            witness: v.witness,
            closed_form: matches!(v.path, Path::ClosedForm(_)),
            note: None,
        },
        Err(e) => Cell {
            outcome: Outcome::Inconclusive,
            clause: Clause::None,
            witness: None,
            closed_form: false,
            note: Some(e.to_string()),
        },
    }
}

/// Classifies every grid cell, in parallel. Output order is row-major and
/// independent of scheduling.
pub fn sweep(
    template: &ModelSpec,
    axis1: Axis,
    axis2: Axis,
    lambdas: &[f64],
    force_general: bool,
) -> Result<RegionGrid> {
    check_lambdas(lambdas)?;
    let n2 = axis2.values.len();
    let cells = (0..axis1.values.len() * n2)
        .into_par_iter()
        .map(|idx| {
            evaluate_cell(
                template,
                (&axis1.knob, axis1.values[idx / n2]),
                (&axis2.knob, axis2.values[idx % n2]),
                lambdas,
                force_general,
            )
        })
        .collect();
    Ok(RegionGrid {
        axis1,
        axis2,
        cells,
        template: template.clone(),
    })
}

/// Additive perturbation shapes: `f_τ = f + τ·shape`. Perturbing `Λ` or `μ`
/// goes beyond the setting covered by the perturbation bound; results are
/// flagged as experimental and `Θ` is not reported.
#[derive(Debug, Clone, Default)]
pub struct Perturbation {
    pub transmission: Option<TimeFunction>,
    pub immunity_loss: Option<TimeFunction>,
    pub progression: Option<TimeFunction>,
    pub recovery: Option<TimeFunction>,
    /// Shape for the incidence; should vanish at `z = 0`.
    pub incidence: Option<IncidenceFunction>,
    pub recruitment: Option<TimeFunction>,
    pub mortality: Option<TimeFunction>,
}

impl Perturbation {
    pub fn is_experimental(&self) -> bool {
        self.recruitment.is_some() || self.mortality.is_some()
    }

    /// The perturbed model at `tau`, keeping the incidence domain cap.
    pub fn apply(&self, m: &ModelSpec, tau: f64) -> Result<ModelSpec> {
        let mut c = m.coefficients().clone();
        let shift = |f: &mut TimeFunction, shape: &Option<TimeFunction>| -> Result<()> {
            if let Some(shape) = shape {
                *f = TimeFunction::shifted(f, shape, tau)?;
            }
            Ok(())
        };
        shift(&mut c.transmission, &self.transmission)?;
        shift(&mut c.immunity_loss, &self.immunity_loss)?;
        shift(&mut c.progression, &self.progression)?;
        shift(&mut c.recovery, &self.recovery)?;
        shift(&mut c.recruitment, &self.recruitment)?;
        shift(&mut c.mortality, &self.mortality)?;
        let cap = m.incidence().domain_cap();
        let incidence = match &self.incidence {
            Some(shape) => IncidenceKind::Shifted {
                base: Box::new(m.incidence().clone()),
                shape: Box::new(shape.with_domain_cap(cap)?),
                tau,
            },
            None => m.incidence().kind().clone(),
        };
        ModelSpec::new(c, incidence, Some(cap), m.windows(), m.scan())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessRow {
    pub tau: f64,
    pub d_g: f64,
    pub d_h: f64,
    pub d_re: f64,
    pub d_rp: f64,
    pub d_re_star: f64,
    pub d_rp_star: f64,
    pub d_log_re: f64,
    pub d_log_rp: f64,
    pub d_log_re_star: f64,
    pub d_log_rp_star: f64,
    /// `Θ(τ)`, bounding `|Δ log R_e|` and `|Δ log R_p|`.
    pub theta: f64,
    /// `λ(‖ε_τ − ε‖/p + ‖γ_τ − γ‖)`, bounding `|Δ log R_e*|` and `|Δ log R_p*|`.
    pub theta_star: f64,
    pub note: Option<String>,
}

impl RobustnessRow {
    fn failed(tau: f64, note: String) -> Self {
        Self {
            tau,
            d_g: f64::NAN,
            d_h: f64::NAN,
            d_re: f64::NAN,
            d_rp: f64::NAN,
            d_re_star: f64::NAN,
            d_rp_star: f64::NAN,
            d_log_re: f64::NAN,
            d_log_rp: f64::NAN,
            d_log_re_star: f64::NAN,
            d_log_rp_star: f64::NAN,
            theta: f64::NAN,
            theta_star: f64::NAN,
            note: Some(note),
        }
    }

    /// Largest of the six functional deltas.
    pub fn max_delta(&self) -> f64 {
        [
            self.d_g,
            self.d_h,
            self.d_re,
            self.d_rp,
            self.d_re_star,
            self.d_rp_star,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    /// Whether the log-space deltas respect `Θ` and `Θ*`.
    pub fn within_bounds(&self) -> bool {
        let slack = |b: f64| b * (1.0 + 1e-9) + 1e-12;
        self.d_log_re <= slack(self.theta)
            && self.d_log_rp <= slack(self.theta)
            && self.d_log_re_star <= slack(self.theta_star)
            && self.d_log_rp_star <= slack(self.theta_star)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessResult {
    pub base: ThresholdReport,
    pub rows: Vec<RobustnessRow>,
    pub experimental: bool,
}

pub const ROBUSTNESS_CSV_HEADER: &str = "tau,dG,dH,dRe,dRp,dRe*,dRp*,theta";

impl RobustnessResult {
    pub fn taus(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.tau).collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{ROBUSTNESS_CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                fmt_num(r.tau),
                fmt_num(r.d_g),
                fmt_num(r.d_h),
                fmt_num(r.d_re),
                fmt_num(r.d_rp),
                fmt_num(r.d_re_star),
                fmt_num(r.d_rp_star),
                fmt_num(r.theta)
            )?;
        }
        Ok(())
    }
}

/// Grid spacing for sup norms of coefficient shapes.
const SUP_STEP: f64 = 1e-3;

/// Recomputes the report of the perturbed model for each `τ` and records
/// the deltas against the unperturbed report together with `Θ(τ)`.
pub fn robustness_scan(
    m: &ModelSpec,
    perturbation: &Perturbation,
    taus: &[f64],
    cfg: &ThresholdConfig,
) -> Result<RobustnessResult> {
    let base = ThresholdProfile::build(m, cfg)?.report(cfg.p)?;
    let (scan_length, _) = cfg.scan.resolve(cfg.lambda)?;
    let horizon = cfg.scan.burn_in + scan_length + cfg.lambda;
    let sup = |f: &Option<TimeFunction>| f.as_ref().map_or(0.0, |f| f.sup_abs(horizon, SUP_STEP));
    let beta_sup = m.coefficients().transmission.sup_abs(horizon, SUP_STEP);
    let shape_beta = sup(&perturbation.transmission);
    let shape_eps = sup(&perturbation.progression);
    let shape_gamma = sup(&perturbation.recovery);
    let shape_phi = match &perturbation.incidence {
        Some(s) => s.with_domain_cap(m.incidence().domain_cap())?.c1_norm(),
        None => 0.0,
    };
    let slope_bound = m.incidence().slope_bound()?;
    let experimental = perturbation.is_experimental();
    let (lambda, p) = (cfg.lambda, cfg.p);

    let rows = taus
        .par_iter()
        .map(|&tau| {
            let report = perturbation
                .apply(m, tau)
                .and_then(|mt| ThresholdProfile::build(&mt, cfg)?.report(p));
            let r = match report {
                Ok(r) => r,
                Err(e) => return RobustnessRow::failed(tau, e.to_string()),
            };
            let a = tau.abs();
            let d_beta = a * shape_beta;
            let theta = lambda * (beta_sup + d_beta) * p * a * shape_phi
                + slope_bound * p * lambda * d_beta
                + lambda * a * shape_eps;
            let theta_star = lambda * (a * shape_eps / p + a * shape_gamma);
            let (theta, theta_star) = if experimental {
                (f64::NAN, f64::NAN)
            } else {
                (theta, theta_star)
            };
            RobustnessRow {
                tau,
                d_g: (r.g - base.g).abs(),
                d_h: (r.h - base.h).abs(),
                d_re: (r.re - base.re).abs(),
                d_rp: (r.rp - base.rp).abs(),
                d_re_star: (r.re_star - base.re_star).abs(),
                d_rp_star: (r.rp_star - base.rp_star).abs(),
                d_log_re: (r.log_re - base.log_re).abs(),
                d_log_rp: (r.log_rp - base.log_rp).abs(),
                d_log_re_star: (r.log_re_star - base.log_re_star).abs(),
                d_log_rp_star: (r.log_rp_star - base.log_rp_star).abs(),
                theta,
                theta_star,
                note: experimental.then(|| "recruitment/mortality perturbation: no bound".into()),
            }
        })
        .collect();
    Ok(RobustnessResult {
        base,
        rows,
        experimental,
    })
}

/// Panels of the parameter-plane figure for the periodic family with
/// `μ = 2`, `η = 0.1` and cosine forcing of period 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigurePanel {
    /// `(b, β)` with `ε = 1`, `γ = 0.02`.
    BetaAmplitude,
    /// `(k, γ)` with `β = 6.06`, `ε = 1`.
    RecoveryAmplitude,
    /// `(d, ε)` with `β = 6.06`, `γ = 0.02`.
    ProgressionAmplitude,
}

/// How to read the printed `H` conditions of the third panel, which carry
/// `(1 + |b|)` although `b = 0` there and `d` varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HReading {
    /// `|b|` as printed, i.e. the factor is 1.
    Literal,
    /// `|d|` in place of `|b|`.
    Amplitude,
}

impl FigurePanel {
    pub fn axis_names(&self) -> (&'static str, &'static str) {
        match self {
            FigurePanel::BetaAmplitude => ("b", "beta"),
            FigurePanel::RecoveryAmplitude => ("k", "gamma"),
            FigurePanel::ProgressionAmplitude => ("d", "epsilon"),
        }
    }

    pub fn template(&self) -> Result<ModelSpec> {
        let beta = match self {
            FigurePanel::BetaAmplitude => 6.2,
            _ => 6.06,
        };
        let c = crate::dynamics::Coefficients::constant([2.0, 2.0, beta, 0.1, 1.0, 0.02])?;
        ModelSpec::with_defaults(c, IncidenceKind::MassAction)
    }

    /// Outcome predicted by the printed closed-form conditions at
    /// `(amplitude, value)`.
    pub fn predicted(&self, amp: f64, value: f64, reading: HReading) -> Outcome {
        let a = amp.abs();
        let (ext, per) = match self {
            FigurePanel::BetaAmplitude => {
                let beta = value;
                (
                    beta < 6.06 && beta * (1.0 + a) < 6.06,
                    beta > 6.06 && beta > 9.0 * a + 6.06,
                )
            }
            FigurePanel::RecoveryAmplitude => {
                let g = value;
                (
                    g > 0.02 && ((2.0 + g) * (3.0 - g * a) > 6.06 || g * (1.0 - a) > 3.02),
                    g < 0.02 && g * (1.0 + a) < 0.02,
                )
            }
            FigurePanel::ProgressionAmplitude => {
                let e = value;
                let factor = match reading {
                    HReading::Literal => 1.0,
                    HReading::Amplitude => 1.0 + a,
                };
                let g_ext = 2.0 * (e - 1.0) + (2.02 + e) * a < 0.0;
                let h_ext = 0.02 * (2.0 + e) - (8.06 + e) * e * factor > 0.0;
                let g_per = a < 1.0 - (2.02 + e) * (2.0 + e) / (e * (8.06 + e));
                let h_per = 2.01 * e * factor < 0.02;
                (e < 1.0 && (g_ext || h_ext), e > 1.0 && (g_per || h_per))
            }
        };
        if ext {
            Outcome::Extinction
        } else if per {
            Outcome::Persistence
        } else {
            Outcome::Inconclusive
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadingComparison {
    pub literal_agreement: f64,
    pub amplitude_agreement: f64,
}

impl ReadingComparison {
    pub fn better(&self) -> HReading {
        if self.amplitude_agreement > self.literal_agreement {
            HReading::Amplitude
        } else {
            HReading::Literal
        }
    }
}

/// Fraction of grid cells whose computed outcome matches each reading of
/// the printed conditions.
pub fn compare_h_readings(grid: &RegionGrid, panel: FigurePanel) -> ReadingComparison {
    let (n1, n2) = grid.shape();
    let mut hits = [0usize; 2];
    for i in 0..n1 {
        for j in 0..n2 {
            let (a, v) = (grid.axis1.values[i], grid.axis2.values[j]);
            let got = grid.cell(i, j).outcome;
            for (k, reading) in [HReading::Literal, HReading::Amplitude].into_iter().enumerate() {
                if panel.predicted(a, v, reading) == got {
                    hits[k] += 1;
                }
            }
        }
    }
    let total = (n1 * n2).max(1) as f64;
    ReadingComparison {
        literal_agreement: hits[0] as f64 / total,
        amplitude_agreement: hits[1] as f64 / total,
    }
}
