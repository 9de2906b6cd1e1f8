//! The SEIRS system with time-dependent coefficients and general incidence,
//! the scalar total-population equation `z' = Λ(t) − μ(t) z`, and a fixed
//! step fourth-order Runge-Kutta integrator for both.

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::incidence::{IncidenceFunction, IncidenceKind};
use crate::timefunc::{scan_grid, ScanPolicy, TimeFunction};

pub const DEFAULT_STEP: f64 = 1e-3;
/// Components in `(-CLAMP_TOL, 0)` are snapped to zero.
pub const CLAMP_TOL: f64 = 1e-12;
/// Components below `-NEGATIVE_TOL` abort the integration.
pub const NEGATIVE_TOL: f64 = 1e-9;
/// Total population above `BLOWUP_FACTOR · K` aborts the integration.
pub const BLOWUP_FACTOR: f64 = 10.0;
/// Default domain cap is this multiple of the population bound.
pub const CAP_OVER_BOUND: f64 = 1.5;

/// Window lengths `ω_μ`, `ω_Λ`, `ω_β` for the positivity conditions on the
/// moving averages of mortality, recruitment and transmission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForcingWindows {
    pub mortality: f64,
    pub recruitment: f64,
    pub transmission: f64,
}

impl Default for ForcingWindows {
    fn default() -> Self {
        Self {
            mortality: 1.0,
            recruitment: 1.0,
            transmission: 1.0,
        }
    }
}

/// The six coefficient functions of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    /// Λ, births.
    pub recruitment: TimeFunction,
    /// μ, natural deaths.
    pub mortality: TimeFunction,
    /// β, scales the incidence.
    pub transmission: TimeFunction,
    /// η, loss of immunity.
    pub immunity_loss: TimeFunction,
    /// ε, exposed to infective.
    pub progression: TimeFunction,
    /// γ, recovery.
    pub recovery: TimeFunction,
}

impl Coefficients {
    /// Constant coefficients in the order Λ, μ, β, η, ε, γ.
    pub fn constant(values: [f64; 6]) -> Result<Self> {
        let [lambda, mu, beta, eta, eps, gamma] = values;
        Ok(Self {
            recruitment: TimeFunction::constant("Lambda", lambda)?,
            mortality: TimeFunction::constant("mu", mu)?,
            transmission: TimeFunction::constant("beta", beta)?,
            immunity_loss: TimeFunction::constant("eta", eta)?,
            progression: TimeFunction::constant("epsilon", eps)?,
            recovery: TimeFunction::constant("gamma", gamma)?,
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = &TimeFunction> {
        [
            &self.recruitment,
            &self.mortality,
            &self.transmission,
            &self.immunity_loss,
            &self.progression,
            &self.recovery,
        ]
        .into_iter()
    }

    fn at(&self, t: f64) -> Rates {
        Rates {
            recruitment: self.recruitment.eval(t),
            mortality: self.mortality.eval(t),
            transmission: self.transmission.eval(t),
            immunity_loss: self.immunity_loss.eval(t),
            progression: self.progression.eval(t),
            recovery: self.recovery.eval(t),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Rates {
    recruitment: f64,
    mortality: f64,
    transmission: f64,
    immunity_loss: f64,
    progression: f64,
    recovery: f64,
}

/// A validated model: coefficients, incidence and the derived population bound.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    coefficients: Coefficients,
    incidence: IncidenceFunction,
    windows: ForcingWindows,
    scan: ScanPolicy,
    population_bound: f64,
}

impl ModelSpec {
    /// Validates the coefficients and fixes the incidence domain cap
    /// (`1.5·D` unless `domain_cap` is given).
    pub fn new(
        coefficients: Coefficients,
        incidence: IncidenceKind,
        domain_cap: Option<f64>,
        windows: ForcingWindows,
        scan: ScanPolicy,
    ) -> Result<Self> {
        let horizon = scan.burn_in + scan.scan_length.unwrap_or(100.0);
        for f in coefficients.iter() {
            if let Some(t) = scan_grid(0.0, horizon, 0.01).find(|&t| !(f.eval(t) >= 0.0)) {
                return Err(Error::InvalidModel(format!(
                    "coefficient `{}` is negative at t={t}",
                    f.name()
                )));
            }
        }
        let mu_lower = coefficients
            .mortality
            .window_bounds(windows.mortality, &scan)?
            .lower;
        if !(mu_lower > 0.0) {
            return Err(Error::InvalidModel(format!(
                "mortality moving average must stay positive (got {mu_lower})"
            )));
        }
        let lambda_stats = coefficients
            .recruitment
            .window_bounds(windows.recruitment, &scan)?;
        if !(lambda_stats.lower > 0.0) {
            return Err(Error::InvalidModel(format!(
                "recruitment moving average must stay positive (got {})",
                lambda_stats.lower
            )));
        }
        let population_bound = bound_from(mu_lower, windows.mortality, lambda_stats.sup);
        let cap = domain_cap.unwrap_or(CAP_OVER_BOUND * population_bound);
        let incidence = IncidenceFunction::new(incidence, cap)?;
        Ok(Self {
            coefficients,
            incidence,
            windows,
            scan,
            population_bound,
        })
    }

    /// Default windows and scan policy.
    pub fn with_defaults(coefficients: Coefficients, incidence: IncidenceKind) -> Result<Self> {
        Self::new(
            coefficients,
            incidence,
            None,
            ForcingWindows::default(),
            ScanPolicy::default(),
        )
    }

    pub fn coefficients(&self) -> &Coefficients {
        &self.coefficients
    }

    pub fn incidence(&self) -> &IncidenceFunction {
        &self.incidence
    }

    pub fn windows(&self) -> ForcingWindows {
        self.windows
    }

    pub fn scan(&self) -> ScanPolicy {
        self.scan
    }

    /// Same model with replaced coefficients; the domain cap is recomputed
    /// only if it was derived from the population bound.
    pub fn with_coefficients(&self, coefficients: Coefficients) -> Result<Self> {
        self.rebuild(coefficients, self.incidence.kind().clone())
    }

    pub fn with_incidence(&self, incidence: IncidenceKind) -> Result<Self> {
        self.rebuild(self.coefficients.clone(), incidence)
    }

    fn rebuild(&self, coefficients: Coefficients, incidence: IncidenceKind) -> Result<Self> {
        let derived_cap = CAP_OVER_BOUND * self.population_bound;
        let explicit = (self.incidence.domain_cap() - derived_cap).abs() > 1e-12 * derived_cap;
        Self::new(
            coefficients,
            incidence,
            explicit.then_some(self.incidence.domain_cap()),
            self.windows,
            self.scan,
        )
    }

    /// `D = Λ_S e^{μ₂}/μ₁` with `μ₁ = μ_{ω_μ}^-/2` and `μ₂ = μ₁ ω_μ`.
    pub fn population_bound(&self) -> f64 {
        self.population_bound
    }

    /// Whether the transmission moving average stays positive, i.e. whether
    /// `β_{ω_β}^- > 0` as the threshold theory assumes.
    pub fn transmission_floor_holds(&self) -> Result<bool> {
        let stats = self
            .coefficients
            .transmission
            .window_bounds(self.windows.transmission, &self.scan)?;
        Ok(stats.lower > 0.0)
    }

    /// Bounds `[Λ₁ e^{−μ_S ω_Λ}, D]` on the asymptotic range of solutions of
    /// the total-population equation.
    pub fn aux_bounds(&self) -> Result<(f64, f64)> {
        let w = self.windows.recruitment;
        let lambda = self.coefficients.recruitment.window_bounds(w, &self.scan)?;
        let mu = self
            .coefficients
            .mortality
            .window_bounds(self.windows.mortality, &self.scan)?;
        let floor = lambda.lower * w * (-mu.sup * w).exp();
        Ok((floor, self.population_bound))
    }

    /// Right-hand side at state `s`, checked against the inflated domain.
    pub fn vector_field(&self, s: &State) -> Result<[f64; 4]> {
        let n = s.total();
        let cap = BLOWUP_FACTOR * self.incidence.domain_cap();
        let tol = NEGATIVE_TOL;
        let bad = [s.susceptible, s.exposed, s.infective, s.recovered]
            .iter()
            .any(|&c| !(c >= -tol))
            || !(n <= cap);
        if bad {
            return Err(Error::OutOfDomain {
                x: s.susceptible,
                n,
                z: s.infective,
                cap,
            });
        }
        Ok(self.field(&self.coefficients.at(s.t), [
            s.susceptible,
            s.exposed,
            s.infective,
            s.recovered,
        ]))
    }

    fn field(&self, k: &Rates, y: [f64; 4]) -> [f64; 4] {
        let [s, e, i, r] = y;
        let n = s + e + i + r;
        let force = k.transmission * self.incidence.value(s, n, i);
        [
            k.recruitment - force - k.mortality * s + k.immunity_loss * r,
            force - (k.mortality + k.progression) * e,
            k.progression * e - (k.mortality + k.recovery) * i,
            k.recovery * i - (k.mortality + k.immunity_loss) * r,
        ]
    }

    /// Integrates the SEIRS system from `s0` to `t_end`.
    pub fn integrate(&self, s0: State, t_end: f64, step: f64) -> Result<Trajectory> {
        self.integrate_with(s0, t_end, step, &IntegrateOptions::default())
    }

    pub fn integrate_with(
        &self,
        s0: State,
        t_end: f64,
        step: f64,
        opts: &IntegrateOptions,
    ) -> Result<Trajectory> {
        if !(step > 0.0) {
            return Err(Error::InvalidParameter(format!("step must be positive, got {step}")));
        }
        if !(t_end > s0.t) {
            return Err(Error::InvalidParameter(format!(
                "t_end {t_end} must exceed the initial time {}",
                s0.t
            )));
        }
        if let Some(p) = opts.w_weight {
            if !(p > 0.0) {
                return Err(Error::InvalidParameter(format!("W weight must be positive, got {p}")));
            }
        }
        let mut y = [s0.susceptible, s0.exposed, s0.infective, s0.recovered];
        if y.iter().any(|&c| !(c >= 0.0)) {
            return Err(Error::InvalidParameter(
                "initial state must be nonnegative".into(),
            ));
        }
        let blowup = BLOWUP_FACTOR * self.incidence.domain_cap();
        let (steps, h) = uniform_steps(s0.t, t_end, step);
        let thin = opts.thin.max(1);

        let mut traj = Trajectory::new(opts.w_weight);
        traj.push(s0);
        let mut t = s0.t;
        let mut k_start = self.coefficients.at(t);
        for n in 1..=steps {
            let k_mid = self.coefficients.at(t + 0.5 * h);
            let t_next = s0.t + h * n as f64;
            let k_end = self.coefficients.at(t_next);
            let d1 = self.field(&k_start, y);
            let d2 = self.field(&k_mid, axpy(y, 0.5 * h, d1));
            let d3 = self.field(&k_mid, axpy(y, 0.5 * h, d2));
            let d4 = self.field(&k_end, axpy(y, h, d3));
            for c in 0..4 {
                y[c] += h / 6.0 * (d1[c] + 2.0 * d2[c] + 2.0 * d3[c] + d4[c]);
            }
            t = t_next;
            k_start = k_end;

            for c in y.iter_mut() {
                if *c < -NEGATIVE_TOL || c.is_nan() {
                    return Err(Error::Integration {
                        t,
                        reason: format!("component became negative ({c})"),
                    });
                }
                if *c < 0.0 {
                    traj.min_component = traj.min_component.min(*c);
                    if *c > -CLAMP_TOL {
                        *c = 0.0;
                    }
                }
            }
            let total = y.iter().sum::<f64>();
            if !(total <= blowup) {
                return Err(Error::Integration {
                    t,
                    reason: format!("total population {total} exceeds {blowup}"),
                });
            }
            if n % thin == 0 || n == steps {
                traj.push(State::new(t, y));
            }
        }
        Ok(traj)
    }

    /// Solves `z' = Λ(t) − μ(t) z` from `z(0) = z0`.
    pub fn integrate_aux(&self, z0: f64, t_end: f64, step: f64) -> Result<AuxSolution> {
        if !(z0 > 0.0) {
            return Err(Error::InvalidParameter(format!("z0 must be positive, got {z0}")));
        }
        self.integrate_aux_forced(0.0, z0, t_end, step, |_| 0.0)
    }

    /// Solves `z' = Λ(t) − μ(t) z + f(t)` from `z(t0) = z0`.
    pub fn integrate_aux_forced<F: Fn(f64) -> f64>(
        &self,
        t0: f64,
        z0: f64,
        t_end: f64,
        step: f64,
        forcing: F,
    ) -> Result<AuxSolution> {
        if !(step > 0.0) || !(t_end > t0) {
            return Err(Error::InvalidParameter(format!(
                "need step > 0 and t_end > t0 (step {step}, t0 {t0}, t_end {t_end})"
            )));
        }
        let lambda = &self.coefficients.recruitment;
        let mu = &self.coefficients.mortality;
        let rhs = |t: f64, z: f64| lambda.eval(t) - mu.eval(t) * z + forcing(t);
        let (steps, h) = uniform_steps(t0, t_end, step);
        let mut times = Vec::with_capacity(steps + 1);
        let mut values = Vec::with_capacity(steps + 1);
        let mut z = z0;
        times.push(t0);
        values.push(z0);
        for n in 0..steps {
            let t = t0 + h * n as f64;
            let k1 = rhs(t, z);
            let k2 = rhs(t + 0.5 * h, z + 0.5 * h * k1);
            let k3 = rhs(t + 0.5 * h, z + 0.5 * h * k2);
            let k4 = rhs(t + h, z + h * k3);
            z += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if !z.is_finite() {
                return Err(Error::Integration {
                    t: t + h,
                    reason: "auxiliary solution is not finite".into(),
                });
            }
            times.push(t0 + h * (n + 1) as f64);
            values.push(z);
        }
        Ok(AuxSolution { times, values, z0 })
    }
}

fn bound_from(mu_lower: f64, omega_mu: f64, lambda_sup: f64) -> f64 {
    let mu1 = 0.5 * mu_lower;
    let mu2 = mu1 * omega_mu;
    lambda_sup * mu2.exp() / mu1
}

/// `D = Λ_S e^{μ₂}/μ₁` for the given model.
pub fn population_bound(m: &ModelSpec) -> f64 {
    m.population_bound()
}

/// Number of steps and the uniform step `≤ step` that lands exactly on `t_end`.
fn uniform_steps(t0: f64, t_end: f64, step: f64) -> (usize, f64) {
    let span = t_end - t0;
    let steps = ((span / step) - 1e-9).ceil().max(1.0) as usize;
    (steps, span / steps as f64)
}

fn axpy(y: [f64; 4], a: f64, d: [f64; 4]) -> [f64; 4] {
    [y[0] + a * d[0], y[1] + a * d[1], y[2] + a * d[2], y[3] + a * d[3]]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct State {
    pub t: f64,
    pub susceptible: f64,
    pub exposed: f64,
    pub infective: f64,
    pub recovered: f64,
}

impl State {
    pub fn new(t: f64, [s, e, i, r]: [f64; 4]) -> Self {
        Self {
            t,
            susceptible: s,
            exposed: e,
            infective: i,
            recovered: r,
        }
    }

    pub fn total(&self) -> f64 {
        self.susceptible + self.exposed + self.infective + self.recovered
    }

    pub fn components(&self) -> [f64; 4] {
        [self.susceptible, self.exposed, self.infective, self.recovered]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrateOptions {
    /// Keep every `thin`-th step (the final state is always kept).
    pub thin: usize,
    /// Record `W(p, t) = p E − I` with this `p`.
    pub w_weight: Option<f64>,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self {
            thin: 1,
            w_weight: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<State>,
    pub w_weight: Option<f64>,
    pub w_values: Option<Vec<f64>>,
    /// Most negative component seen before clamping (0 if none).
    pub min_component: f64,
}

impl Trajectory {
    fn new(w_weight: Option<f64>) -> Self {
        Self {
            states: Vec::new(),
            w_weight,
            w_values: w_weight.map(|_| Vec::new()),
            min_component: 0.0,
        }
    }

    fn push(&mut self, s: State) {
        if let (Some(p), Some(w)) = (self.w_weight, self.w_values.as_mut()) {
            w.push(p * s.exposed - s.infective);
        }
        self.states.push(s);
    }

    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }

    pub fn last(&self) -> &State {
        self.states.last().expect("trajectory holds the initial state")
    }

    pub fn window(&self, t0: f64, t1: f64) -> impl Iterator<Item = &State> {
        self.states.iter().filter(move |s| s.t >= t0 && s.t <= t1)
    }

    /// Smallest component over the whole trajectory.
    pub fn min_value(&self) -> f64 {
        self.states
            .iter()
            .flat_map(|s| s.components())
            .fold(f64::INFINITY, f64::min)
            .min(self.min_component)
    }

    /// Sign changes of `W(p, t)` among samples with `t ≥ from`; zeros are skipped.
    pub fn w_sign_changes(&self, from: f64) -> Option<usize> {
        let w = self.w_values.as_ref()?;
        let mut changes = 0;
        let mut prev = 0.0f64;
        for (s, &v) in self.states.iter().zip(w) {
            if s.t < from || v == 0.0 {
                continue;
            }
            if prev != 0.0 && prev.signum() != v.signum() {
                changes += 1;
            }
            prev = v;
        }
        Some(changes)
    }

    /// CSV with header `t,S,E,I,R,N` (plus `W` when recorded).
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let with_w = self.w_values.is_some();
        writeln!(out, "t,S,E,I,R,N{}", if with_w { ",W" } else { "" })?;
        for (idx, s) in self.states.iter().enumerate() {
            write!(
                out,
                "{},{},{},{},{},{}",
                fmt_num(s.t),
                fmt_num(s.susceptible),
                fmt_num(s.exposed),
                fmt_num(s.infective),
                fmt_num(s.recovered),
                fmt_num(s.total())
            )?;
            if let Some(w) = &self.w_values {
                write!(out, ",{}", fmt_num(w[idx]))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Shortest round-trip decimal representation.
pub fn fmt_num(v: f64) -> String {
    format!("{v:?}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuxSolution {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub z0: f64,
}

impl AuxSolution {
    pub fn last(&self) -> f64 {
        *self.values.last().expect("aux solution holds z0")
    }

    /// `(min, max)` of the solution over `[t0, t1]`.
    pub fn range(&self, t0: f64, t1: f64) -> (f64, f64) {
        self.times
            .iter()
            .zip(&self.values)
            .filter(|(t, _)| **t >= t0 && **t <= t1)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, &v)| {
                (lo.min(v), hi.max(v))
            })
    }
}
