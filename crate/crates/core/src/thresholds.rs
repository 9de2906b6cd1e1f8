//! Extinction and persistence functionals.
//!
//! For window length `λ` and weight `p` the report holds
//!
//! * `log R_e = limsup ∫_t^{t+λ} b(p, s, z(s)) ds`, `log R_p` the liminf,
//! * `log R_e*`, `log R_p*` the same for `ε(s)/p − μ(s) − γ(s)`,
//! * `G = limsup g(p, t, z(t))` and `H = liminf h(p, t)`,
//!
//! where `z` solves the total-population equation and
//! `b = β·zslope(z, z)·p − μ − ε`, `g = β·zslope(z, z)·p + γ − (1 + 1/p)ε`,
//! `h = γ − (1 + 1/p)ε`. Limits in `t` are max/min over a scan grid after a
//! burn-in, as in [`crate::timefunc`].

use crate::dynamics::{ModelSpec, DEFAULT_STEP};
use crate::error::{Error, Result};
use crate::incidence::ContactRate;
use crate::quadrature::SimpsonPrefix;
use crate::timefunc::{scan_grid, ScanPolicy, TimeFunction};

/// Points in the uniform part of the `p` grid.
pub const P_GRID_POINTS: usize = 200;
/// Relative widening of the `p` bracket on each side.
pub const P_BRACKET_WIDENING: f64 = 0.2;
/// Samples per period when a closed form needs `G` or `H` of a periodic model.
pub const CLOSED_FORM_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdConfig {
    pub lambda: f64,
    pub p: f64,
    pub scan: ScanPolicy,
    pub z0: f64,
    /// Upper bound on the step of the auxiliary integration.
    pub aux_step: f64,
}

impl ThresholdConfig {
    pub fn new(lambda: f64, p: f64) -> Self {
        Self {
            lambda,
            p,
            scan: ScanPolicy::default(),
            z0: 1.0,
            aux_step: DEFAULT_STEP,
        }
    }

    /// Uses the model's scan policy.
    pub fn for_model(m: &ModelSpec, lambda: f64, p: f64) -> Self {
        Self {
            scan: m.scan(),
            ..Self::new(lambda, p)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !pos(self.lambda) {
            return Err(Error::InvalidParameter(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !pos(self.p) {
            return Err(Error::InvalidParameter(format!("p must be positive, got {}", self.p)));
        }
        if !pos(self.z0) {
            return Err(Error::InvalidParameter(format!("z0 must be positive, got {}", self.z0)));
        }
        if !pos(self.aux_step) {
            return Err(Error::InvalidParameter(format!(
                "aux_step must be positive, got {}",
                self.aux_step
            )));
        }
        self.scan.resolve(self.lambda).map(|_| ())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdReport {
    pub log_re: f64,
    pub log_rp: f64,
    pub log_re_star: f64,
    pub log_rp_star: f64,
    pub re: f64,
    pub rp: f64,
    pub re_star: f64,
    pub rp_star: f64,
    pub g: f64,
    pub h: f64,
    pub config: ThresholdConfig,
}

/// Which conclusion a clause certifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Extinction,
    Persistence,
}

/// Which of the two alternative side conditions holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SideCondition {
    /// `G < 0`
    G,
    /// `H > 0`
    H,
}

impl ThresholdReport {
    fn from_logs(logs: [f64; 4], g: f64, h: f64, config: ThresholdConfig) -> Self {
        let [log_re, log_rp, log_re_star, log_rp_star] = logs;
        Self {
            log_re,
            log_rp,
            log_re_star,
            log_rp_star,
            re: log_re.exp(),
            rp: log_rp.exp(),
            re_star: log_re_star.exp(),
            rp_star: log_rp_star.exp(),
            g,
            h,
            config,
        }
    }

    /// The side condition under which this report certifies `mode`, if any.
    /// `G < 0` is preferred over `H > 0`.
    pub fn satisfies(&self, mode: Mode) -> Option<SideCondition> {
        let main = match mode {
            Mode::Extinction => self.log_re < 0.0 && self.log_re_star < 0.0,
            Mode::Persistence => self.log_rp > 0.0 && self.log_rp_star > 0.0,
        };
        if !main {
            None
        } else if self.g < 0.0 {
            Some(SideCondition::G)
        } else if self.h > 0.0 {
            Some(SideCondition::H)
        } else {
            None
        }
    }
}

/// Header of the report CSV.
pub const REPORT_CSV_HEADER: &str = "lambda,p,logRe,logRp,logRe*,logRp*,G,H,verdict_clause";

impl ThresholdReport {
    /// One CSV row matching [`REPORT_CSV_HEADER`].
    pub fn csv_row(&self, clause: &str) -> String {
        let f = crate::dynamics::fmt_num;
        format!(
            "{},{},{},{},{},{},{},{},{clause}",
            f(self.config.lambda),
            f(self.config.p),
            f(self.log_re),
            f(self.log_rp),
            f(self.log_re_star),
            f(self.log_rp_star),
            f(self.g),
            f(self.h),
        )
    }
}

/// `β(t)·zslope(z, z)·p − μ(t) − ε(t)`.
pub fn b_limit(m: &ModelSpec, p: f64, t: f64, z: f64) -> Result<f64> {
    let c = m.coefficients();
    let slope = m.incidence().zslope(z, z)?;
    Ok(c.transmission.eval(t) * slope * p - c.mortality.eval(t) - c.progression.eval(t))
}

/// `β(t)·zslope(z, z)·p + γ(t) − (1 + 1/p)·ε(t)`.
pub fn g_limit(m: &ModelSpec, p: f64, t: f64, z: f64) -> Result<f64> {
    let c = m.coefficients();
    let slope = m.incidence().zslope(z, z)?;
    Ok(c.transmission.eval(t) * slope * p + h_func(m, p, t))
}

/// `γ(t) − (1 + 1/p)·ε(t)`.
pub fn h_func(m: &ModelSpec, p: f64, t: f64) -> f64 {
    let c = m.coefficients();
    c.recovery.eval(t) - (1.0 + 1.0 / p) * c.progression.eval(t)
}

/// Everything in a report that does not depend on `p`, so that many `p`
/// values can be evaluated from one auxiliary integration.
#[derive(Debug, Clone)]
pub struct ThresholdProfile {
    config: ThresholdConfig,
    /// `∫_t^{t+λ}` of `β·zslope`, `μ`, `ε`, `γ` at each scan point.
    int_a: Vec<f64>,
    int_mu: Vec<f64>,
    int_eps: Vec<f64>,
    int_gamma: Vec<f64>,
    /// Pointwise values at each scan point.
    a: Vec<f64>,
    eps: Vec<f64>,
    gamma: Vec<f64>,
}

impl ThresholdProfile {
    /// Integrates the auxiliary equation once and tabulates the window
    /// integrals. `cfg.p` is ignored.
    pub fn build(m: &ModelSpec, cfg: &ThresholdConfig) -> Result<Self> {
        cfg.validate()?;
        let lambda = cfg.lambda;
        let (scan_length, step) = cfg.scan.resolve(lambda)?;
        // λ/h is a multiple of 100 so the default scan step λ/100 falls on samples.
        let panels = 100 * ((lambda / cfg.aux_step) / 100.0 - 1e-9).ceil().max(1.0) as usize;
        let h = lambda / panels as f64;
        let stride = ((step / h).round() as usize).max(1);
        let scan_points = (scan_length / (stride as f64 * h) + 1e-9).floor() as usize + 1;
        let first = (cfg.scan.burn_in / h).round() as usize;
        let total = first + (scan_points - 1) * stride + panels;

        let aux = m.integrate_aux(cfg.z0, total as f64 * h, h)?;
        debug_assert_eq!(aux.values.len(), total + 1);

        let c = m.coefficients();
        let incidence = m.incidence();
        let len = total + 1 - first;
        let mut a = Vec::with_capacity(len);
        let mut mu = Vec::with_capacity(len);
        let mut eps = Vec::with_capacity(len);
        let mut gamma = Vec::with_capacity(len);
        for i in first..=total {
            let t = aux.times[i];
            let z = aux.values[i];
            a.push(c.transmission.eval(t) * incidence.zslope(z, z)?);
            mu.push(c.mortality.eval(t));
            eps.push(c.progression.eval(t));
            gamma.push(c.recovery.eval(t));
        }

        let half = panels / 2;
        let windows = |v: &[f64]| {
            let pre = SimpsonPrefix::new(v, h);
            (0..scan_points)
                .map(|k| pre.window(k * stride, half))
                .collect::<Vec<_>>()
        };
        let at_scan = |v: &[f64]| (0..scan_points).map(|k| v[k * stride]).collect::<Vec<_>>();
        Ok(Self {
            config: *cfg,
            int_a: windows(&a),
            int_mu: windows(&mu),
            int_eps: windows(&eps),
            int_gamma: windows(&gamma),
            a: at_scan(&a),
            eps: at_scan(&eps),
            gamma: at_scan(&gamma),
        })
    }

    pub fn config(&self) -> &ThresholdConfig {
        &self.config
    }

    pub fn scan_points(&self) -> usize {
        self.a.len()
    }

    pub fn report(&self, p: f64) -> Result<ThresholdReport> {
        if !(p > 0.0) || !p.is_finite() {
            return Err(Error::InvalidParameter(format!("p must be positive, got {p}")));
        }
        let mut re = f64::NEG_INFINITY;
        let mut rp = f64::INFINITY;
        let mut re_s = f64::NEG_INFINITY;
        let mut rp_s = f64::INFINITY;
        let mut g = f64::NEG_INFINITY;
        let mut h = f64::INFINITY;
        let w = 1.0 + 1.0 / p;
        for k in 0..self.a.len() {
            let b = p * self.int_a[k] - self.int_mu[k] - self.int_eps[k];
            let s = self.int_eps[k] / p - self.int_mu[k] - self.int_gamma[k];
            let hk = self.gamma[k] - w * self.eps[k];
            re = re.max(b);
            rp = rp.min(b);
            re_s = re_s.max(s);
            rp_s = rp_s.min(s);
            g = g.max(self.a[k] * p + hk);
            h = h.min(hk);
        }
        let config = ThresholdConfig { p, ..self.config };
        Ok(ThresholdReport::from_logs([re, rp, re_s, rp_s], g, h, config))
    }

    /// `p` values bracketing the intervals on which the main conditions can
    /// hold, widened by 20%, on a uniform grid plus the exact endpoints and
    /// points approaching each endpoint geometrically.
    pub fn candidate_ps(&self) -> Vec<f64> {
        let lambda = self.config.lambda;
        let stats = |v: &[f64]| {
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min) / lambda;
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max) / lambda;
            (lo, hi)
        };
        let (a_lo, a_hi) = stats(&self.int_a);
        let (mu_lo, mu_hi) = stats(&self.int_mu);
        let (e_lo, e_hi) = stats(&self.int_eps);
        let (g_lo, g_hi) = stats(&self.int_gamma);
        let endpoints: Vec<f64> = [
            e_hi / (mu_lo + g_lo),
            (mu_lo + e_lo) / a_hi,
            (mu_hi + e_hi) / a_lo,
            e_lo / (mu_hi + g_hi),
        ]
        .into_iter()
        .filter(|v| v.is_finite() && *v > 0.0)
        .collect();

        let (lo, hi) = if endpoints.is_empty() {
            (1e-3, 1e3)
        } else {
            let min = endpoints.iter().copied().fold(f64::INFINITY, f64::min);
            let max = endpoints.iter().copied().fold(0.0, f64::max);
            ((1.0 - P_BRACKET_WIDENING) * min, (1.0 + P_BRACKET_WIDENING) * max)
        };
        let mut ps: Vec<f64> = (0..P_GRID_POINTS)
            .map(|i| lo + (hi - lo) * i as f64 / (P_GRID_POINTS - 1) as f64)
            .collect();
        for &e in &endpoints {
            ps.push(e);
            for j in 2..=9 {
                let r = 10f64.powi(-j);
                ps.push(e * (1.0 - r));
                ps.push(e * (1.0 + r));
            }
        }
        ps.retain(|p| *p > 0.0 && p.is_finite());
        ps.sort_by(f64::total_cmp);
        ps.dedup();
        ps
    }

    /// First `p` (ascending) whose report certifies `mode`.
    pub fn search(&self, mode: Mode) -> Result<Option<(f64, ThresholdReport, SideCondition)>> {
        for p in self.candidate_ps() {
            let r = self.report(p)?;
            if let Some(side) = r.satisfies(mode) {
                return Ok(Some((p, r, side)));
            }
        }
        Ok(None)
    }
}

/// Full report for one `(λ, p)`.
pub fn compute_report(m: &ModelSpec, cfg: &ThresholdConfig) -> Result<ThresholdReport> {
    ThresholdProfile::build(m, cfg)?.report(cfg.p)
}

/// Searches `p` at fixed `cfg.lambda` for a report certifying `mode`.
pub fn search_p(
    m: &ModelSpec,
    cfg: &ThresholdConfig,
    mode: Mode,
) -> Result<Option<(f64, ThresholdReport)>> {
    let found = ThresholdProfile::build(m, cfg)?.search(mode)?;
    Ok(found.map(|(p, r, _)| (p, r)))
}

fn require_constant(f: &TimeFunction, what: &str) -> Result<f64> {
    f.constant_value()
        .ok_or_else(|| Error::NotApplicable(format!("{what} requires constant `{}`", f.name())))
}

/// `L = zslope(Λ/μ, Λ/μ)` for constant `Λ`, `μ`.
pub fn equilibrium_slope(m: &ModelSpec) -> Result<f64> {
    let c = m.coefficients();
    let lambda = require_constant(&c.recruitment, "the equilibrium slope")?;
    let mu = require_constant(&c.mortality, "the equilibrium slope")?;
    let n = lambda / mu;
    m.incidence().zslope(n, n)
}

/// `R^A = ε β L / ((μ + ε)(μ + γ))`.
pub fn autonomous_ra(m: &ModelSpec) -> Result<f64> {
    let c = m.coefficients();
    for f in c.iter() {
        require_constant(f, "R^A")?;
    }
    let v = |f: &TimeFunction| f.eval(0.0);
    let (mu, beta, eps, gamma) = (
        v(&c.mortality),
        v(&c.transmission),
        v(&c.progression),
        v(&c.recovery),
    );
    let l = equilibrium_slope(m)?;
    Ok(eps * beta * l / ((mu + eps) * (mu + gamma)))
}

/// Period shared by all non-constant coefficients among β, η, ε, γ, or an
/// error if some coefficient is neither constant nor periodic with that period.
/// `Ok(None)` means all four are constant.
pub fn common_period(m: &ModelSpec) -> Result<Option<f64>> {
    let c = m.coefficients();
    let mut period: Option<f64> = None;
    for f in [&c.transmission, &c.immunity_loss, &c.progression, &c.recovery] {
        if f.is_constant() {
            continue;
        }
        let q = f.period().ok_or_else(|| {
            Error::NotApplicable(format!("`{}` is neither constant nor periodic", f.name()))
        })?;
        match period {
            Some(p) if (p - q).abs() > 1e-12 * p => {
                return Err(Error::NotApplicable(format!(
                    "`{}` has period {q}, others have {p}",
                    f.name()
                )))
            }
            _ => period = Some(q),
        }
    }
    Ok(period)
}

/// `R^per = ε̄ β̄ L / ((μ + ε̄)(μ + γ̄))` with one-period averages taken at the
/// burn-in time.
pub fn periodic_rper(m: &ModelSpec, period: f64) -> Result<f64> {
    if !(period > 0.0) {
        return Err(Error::InvalidParameter(format!("period must be positive, got {period}")));
    }
    let c = m.coefficients();
    let mu = require_constant(&c.mortality, "R^per")?;
    require_constant(&c.recruitment, "R^per")?;
    if let Some(q) = common_period(m)? {
        if (q - period).abs() > 1e-12 * q {
            return Err(Error::NotApplicable(format!(
                "coefficients have period {q}, not {period}"
            )));
        }
    }
    let t0 = m.scan().burn_in;
    let avg = |f: &TimeFunction| f.window_average(t0, period);
    let (beta, eps, gamma) = (avg(&c.transmission), avg(&c.progression), avg(&c.recovery));
    let l = equilibrium_slope(m)?;
    Ok(eps * beta * l / ((mu + eps) * (mu + gamma)))
}

/// Window bounds entering the Michaelis-Menten closed forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmBounds {
    pub lambda: f64,
    pub re_m: f64,
    pub rp_m: f64,
    /// `C(Λ/μ)`.
    pub contact: f64,
    pub mu: f64,
    pub beta: (f64, f64),
    pub eps: (f64, f64),
    pub gamma: (f64, f64),
}

/// `R_e^M(λ)` and `R_p^M(λ)` for a Michaelis-Menten incidence with constant
/// `Λ`, `μ`.
pub fn mm_bounds(m: &ModelSpec, lambda: f64) -> Result<MmBounds> {
    let c = m.coefficients();
    let big_lambda = require_constant(&c.recruitment, "R^M")?;
    let mu = require_constant(&c.mortality, "R^M")?;
    let rate = m.incidence().contact_rate().ok_or_else(|| {
        Error::NotApplicable(format!(
            "R^M requires a Michaelis-Menten incidence, got {}",
            m.incidence().label()
        ))
    })?;
    check_contact_rate(rate, m.incidence().domain_cap())?;
    let scan = m.scan();
    let bounds = |f: &TimeFunction| -> Result<(f64, f64)> {
        let s = f.window_bounds(lambda, &scan)?;
        Ok((s.lower, s.upper))
    };
    let beta = bounds(&c.transmission)?;
    let eps = bounds(&c.progression)?;
    let gamma = bounds(&c.recovery)?;
    let contact = rate.eval(big_lambda / mu);
    Ok(MmBounds {
        lambda,
        re_m: eps.1 * beta.1 * contact / ((mu + eps.0) * (mu + gamma.0)),
        rp_m: eps.0 * beta.0 * contact / ((mu + eps.1) * (mu + gamma.1)),
        contact,
        mu,
        beta,
        eps,
        gamma,
    })
}

/// Numerical check that `C(n)/n` is non-increasing on `(0, cap]`.
fn check_contact_rate(rate: ContactRate, cap: f64) -> Result<()> {
    let mut prev = f64::INFINITY;
    for i in 1..=1000 {
        let n = cap * i as f64 / 1000.0;
        let v = rate.eval(n) / n;
        if v > prev * (1.0 + 1e-12) {
            return Err(Error::NotApplicable(format!(
                "C(n)/n increases near n={n}"
            )));
        }
        prev = v;
    }
    Ok(())
}

/// Which closed-form corollary produced a [`CorollaryCheck`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Corollary {
    /// Periodic (or constant) β, η, ε, γ with constant Λ, μ.
    Periodic,
    MichaelisMenten,
}

/// Closed-form evaluation of a corollary: the two reproduction numbers and
/// `G`, `H` at the four interval endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorollaryCheck {
    pub corollary: Corollary,
    pub lambda: f64,
    /// `R^per` or `R_e^M`.
    pub r_extinction: f64,
    /// `R^per` or `R_p^M`.
    pub r_persistence: f64,
    /// `(p, G(p))` and `(p, H(p))` used for each conclusion.
    pub extinction_g: (f64, f64),
    pub extinction_h: (f64, f64),
    pub persistence_g: (f64, f64),
    pub persistence_h: (f64, f64),
}

impl CorollaryCheck {
    /// The certified conclusion, side condition and witness `p`.
    pub fn conclusion(&self) -> Option<(Mode, SideCondition, f64)> {
        if self.r_extinction < 1.0 {
            if self.extinction_g.1 < 0.0 {
                return Some((Mode::Extinction, SideCondition::G, self.extinction_g.0));
            }
            if self.extinction_h.1 > 0.0 {
                return Some((Mode::Extinction, SideCondition::H, self.extinction_h.0));
            }
        }
        if self.r_persistence > 1.0 {
            if self.persistence_g.1 < 0.0 {
                return Some((Mode::Persistence, SideCondition::G, self.persistence_g.0));
            }
            if self.persistence_h.1 > 0.0 {
                return Some((Mode::Persistence, SideCondition::H, self.persistence_h.0));
            }
        }
        None
    }
}

/// `G(p)` and `H(p)` with `z ≡ Λ/μ`, as max/min over `times`.
fn g_h_on_grid(m: &ModelSpec, slope: f64, p: f64, times: &[f64]) -> (f64, f64) {
    let c = m.coefficients();
    let mut g = f64::NEG_INFINITY;
    let mut h = f64::INFINITY;
    for &t in times {
        let hv = h_func(m, p, t);
        g = g.max(c.transmission.eval(t) * slope * p + hv);
        h = h.min(hv);
    }
    (g, h)
}

/// Corollary for periodic coefficients with constant `Λ`, `μ`. All-constant
/// models are treated as periodic with period `fallback_lambda`.
pub fn periodic_corollary(m: &ModelSpec, fallback_lambda: f64) -> Result<CorollaryCheck> {
    let period = common_period(m)?.unwrap_or(fallback_lambda);
    let c = m.coefficients();
    let mu = require_constant(&c.mortality, "the periodic corollary")?;
    let r = periodic_rper(m, period)?;
    let l = equilibrium_slope(m)?;
    let t0 = m.scan().burn_in;
    let avg = |f: &TimeFunction| f.window_average(t0, period);
    let (beta, eps, gamma) = (avg(&c.transmission), avg(&c.progression), avg(&c.recovery));
    let times: Vec<f64> = (0..CLOSED_FORM_SAMPLES)
        .map(|i| t0 + period * i as f64 / CLOSED_FORM_SAMPLES as f64)
        .collect();
    let p_low = eps / (mu + gamma);
    let p_high = (mu + eps) / (beta * l);
    let at = |p: f64| -> (f64, f64) {
        if p > 0.0 && p.is_finite() {
            g_h_on_grid(m, l, p, &times)
        } else {
            (f64::INFINITY, f64::NEG_INFINITY)
        }
    };
    let (g_low, h_low) = at(p_low);
    let (g_high, h_high) = at(p_high);
    Ok(CorollaryCheck {
        corollary: Corollary::Periodic,
        lambda: period,
        r_extinction: r,
        r_persistence: r,
        extinction_g: (p_low, g_low),
        extinction_h: (p_high, h_high),
        persistence_g: (p_high, g_high),
        persistence_h: (p_low, h_low),
    })
}

/// Corollary for Michaelis-Menten incidence with constant `Λ`, `μ` at window
/// length `lambda`. The persistence endpoints use the persistence-side
/// bounds `(μ + ε⁺)/(C β⁻)` and `ε⁻/(μ + γ⁺)`.
pub fn mm_corollary(m: &ModelSpec, lambda: f64) -> Result<CorollaryCheck> {
    let b = mm_bounds(m, lambda)?;
    let scan = m.scan();
    let (scan_length, step) = scan.resolve(lambda)?;
    let times: Vec<f64> = scan_grid(scan.burn_in, scan_length, step).collect();
    let slope = b.contact;
    let at = |p: f64| -> (f64, f64) {
        if p > 0.0 && p.is_finite() {
            g_h_on_grid(m, slope, p, &times)
        } else {
            (f64::INFINITY, f64::NEG_INFINITY)
        }
    };
    let ext_low = b.eps.1 / (b.mu + b.gamma.0);
    let ext_high = (b.mu + b.eps.0) / (b.contact * b.beta.1);
    let per_low = (b.mu + b.eps.1) / (b.contact * b.beta.0);
    let per_high = b.eps.0 / (b.mu + b.gamma.1);
    Ok(CorollaryCheck {
        corollary: Corollary::MichaelisMenten,
        lambda,
        r_extinction: b.re_m,
        r_persistence: b.rp_m,
        extinction_g: (ext_low, at(ext_low).0),
        extinction_h: (ext_high, at(ext_high).1),
        persistence_g: (per_low, at(per_low).0),
        persistence_h: (per_high, at(per_high).1),
    })
}
