//! Incidence functions `φ(S, N, I)` and numerical checks of the structural
//! hypotheses the threshold theory relies on.
//!
//! Arguments follow the convention `φ(x, n, z)` with `x` the susceptibles,
//! `n` the total population and `z` the infectives. The natural domain is
//! the box `Δ_{θ,K} = {θ ≤ x ≤ n ≤ K, 0 ≤ z ≤ n}`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

pub type IncidenceFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;
pub type SlopeFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type LipschitzFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Extrapolation points for the numeric `δ → 0⁺` limit.
const SLOPE_DELTAS: [f64; 3] = [1e-2, 1e-3, 1e-4];
const SLOPE_REL_TOL: f64 = 1e-6;
const MONOTONE_TOL: f64 = 1e-9;

/// Contact-rate function `C(n)` of a Michaelis-Menten incidence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ContactRate {
    /// `C(n) = n`, i.e. mass action.
    Identity,
    /// `C(n) = 1`, i.e. standard incidence.
    One,
    /// `C(n) = n / (1 + b n)`.
    Saturating { b: f64 },
}

impl ContactRate {
    pub fn eval(&self, n: f64) -> f64 {
        match *self {
            ContactRate::Identity => n,
            ContactRate::One => 1.0,
            ContactRate::Saturating { b } => n / (1.0 + b * n),
        }
    }

    /// `C(n)/n`, with the `n → 0` convention that keeps `φ` total.
    fn per_capita(&self, n: f64) -> f64 {
        match *self {
            ContactRate::Identity => 1.0,
            ContactRate::One => {
                if n > 0.0 {
                    1.0 / n
                } else {
                    0.0
                }
            }
            ContactRate::Saturating { b } => 1.0 / (1.0 + b * n),
        }
    }
}

#[derive(Clone)]
pub struct CustomIncidence {
    pub label: String,
    pub eval: IncidenceFn,
    /// Analytic `(x, n) ↦ lim_{δ→0⁺} φ(x, n, δ)/δ`.
    pub zslope: Option<SlopeFn>,
    /// Declared Lipschitz constants `θ ↦ K_θ`.
    pub lipschitz: Option<LipschitzFn>,
}

impl fmt::Debug for CustomIncidence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomIncidence")
            .field("label", &self.label)
            .field("analytic_zslope", &self.zslope.is_some())
            .field("lipschitz_map", &self.lipschitz.is_some())
            .finish()
    }
}

#[derive(Debug, Clone)]
pub enum IncidenceKind {
    /// `φ = x z`
    MassAction,
    /// `φ = x z / n`, zero at `n = 0`
    Standard,
    /// `φ = C(n) x z / n`
    MichaelisMenten(ContactRate),
    /// `φ = x z / (1 + b n)`
    Saturated { b: f64 },
    Custom(CustomIncidence),
    /// `φ_base + tau·φ_shape`
    Shifted {
        base: Box<IncidenceFunction>,
        shape: Box<IncidenceFunction>,
        tau: f64,
    },
}

#[derive(Debug, Clone)]
pub struct IncidenceFunction {
    kind: IncidenceKind,
    domain_cap: f64,
}

impl IncidenceFunction {
    pub fn new(kind: IncidenceKind, domain_cap: f64) -> Result<Self> {
        if !(domain_cap > 0.0) || !domain_cap.is_finite() {
            return Err(Error::InvalidIncidence(format!(
                "domain cap must be positive and finite, got {domain_cap}"
            )));
        }
        match &kind {
            IncidenceKind::MichaelisMenten(ContactRate::Saturating { b })
            | IncidenceKind::Saturated { b } => {
                if !(*b > 0.0) || !b.is_finite() {
                    return Err(Error::InvalidIncidence(format!(
                        "saturation constant must be positive, got {b}"
                    )));
                }
            }
            IncidenceKind::Shifted { tau, .. } if !tau.is_finite() => {
                return Err(Error::InvalidIncidence("tau must be finite".into()));
            }
            _ => {}
        }
        Ok(Self { kind, domain_cap })
    }

    pub fn mass_action(domain_cap: f64) -> Result<Self> {
        Self::new(IncidenceKind::MassAction, domain_cap)
    }

    pub fn custom(
        label: impl Into<String>,
        eval: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        domain_cap: f64,
    ) -> Result<Self> {
        Self::new(
            IncidenceKind::Custom(CustomIncidence {
                label: label.into(),
                eval: Arc::new(eval),
                zslope: None,
                lipschitz: None,
            }),
            domain_cap,
        )
    }

    /// `base + tau·shape` on the base's domain. Both should vanish at `z = 0`.
    pub fn shifted(base: &IncidenceFunction, shape: &IncidenceFunction, tau: f64) -> Result<Self> {
        Self::new(
            IncidenceKind::Shifted {
                base: Box::new(base.clone()),
                shape: Box::new(shape.clone()),
                tau,
            },
            base.domain_cap,
        )
    }

    pub fn kind(&self) -> &IncidenceKind {
        &self.kind
    }

    pub fn domain_cap(&self) -> f64 {
        self.domain_cap
    }

    pub fn with_domain_cap(&self, domain_cap: f64) -> Result<Self> {
        Self::new(self.kind.clone(), domain_cap)
    }

    /// The Michaelis-Menten contact rate, if `φ = C(n) x z / n` for a known `C`.
    pub fn contact_rate(&self) -> Option<ContactRate> {
        match self.kind {
            IncidenceKind::MassAction => Some(ContactRate::Identity),
            IncidenceKind::Standard => Some(ContactRate::One),
            IncidenceKind::MichaelisMenten(c) => Some(c),
            IncidenceKind::Saturated { b } => Some(ContactRate::Saturating { b }),
            _ => None,
        }
    }

    pub fn label(&self) -> String {
        match &self.kind {
            IncidenceKind::MassAction => "mass_action".into(),
            IncidenceKind::Standard => "standard".into(),
            IncidenceKind::MichaelisMenten(c) => format!("michaelis_menten({c:?})"),
            IncidenceKind::Saturated { b } => format!("saturated(b={b})"),
            IncidenceKind::Custom(c) => c.label.clone(),
            IncidenceKind::Shifted { base, shape, tau } => {
                format!("{} + {tau}·{}", base.label(), shape.label())
            }
        }
    }

    /// `φ(x, n, z)` on `Δ_{0,K}`.
    pub fn phi(&self, x: f64, n: f64, z: f64) -> Result<f64> {
        let cap = self.domain_cap;
        let eps = 1e-12 * cap.max(1.0);
        let inside = x >= -eps && x <= n + eps && n <= cap + eps && z >= -eps && z <= n + eps;
        if !inside || !(x.is_finite() && n.is_finite() && z.is_finite()) {
            return Err(Error::OutOfDomain { x, n, z, cap });
        }
        Ok(self.value(x, n, z))
    }

    /// `φ(x, n, z)` without the domain check.
    pub fn value(&self, x: f64, n: f64, z: f64) -> f64 {
        match &self.kind {
            IncidenceKind::MassAction => x * z,
            IncidenceKind::Standard => {
                if n > 0.0 {
                    x * z / n
                } else {
                    0.0
                }
            }
            IncidenceKind::MichaelisMenten(c) => c.per_capita(n) * x * z,
            IncidenceKind::Saturated { b } => x * z / (1.0 + b * n),
            IncidenceKind::Custom(c) => (c.eval)(x, n, z),
            IncidenceKind::Shifted { base, shape, tau } => {
                base.value(x, n, z) + tau * shape.value(x, n, z)
            }
        }
    }

    /// Analytic `lim_{δ→0⁺} φ(x, n, δ)/δ`, when the kind provides one.
    pub fn analytic_zslope(&self, x: f64, n: f64) -> Option<f64> {
        match &self.kind {
            IncidenceKind::MassAction => Some(x),
            IncidenceKind::Standard => Some(if n > 0.0 { x / n } else { 0.0 }),
            IncidenceKind::MichaelisMenten(c) => Some(c.per_capita(n) * x),
            IncidenceKind::Saturated { b } => Some(x / (1.0 + b * n)),
            IncidenceKind::Custom(c) => c.zslope.as_ref().map(|f| f(x, n)),
            IncidenceKind::Shifted { base, shape, tau } => {
                Some(base.analytic_zslope(x, n)? + tau * shape.analytic_zslope(x, n)?)
            }
        }
    }

    /// `lim_{δ→0⁺} φ(x, n, δ)/δ`: analytic when available, otherwise
    /// Richardson extrapolation.
    pub fn zslope(&self, x: f64, n: f64) -> Result<f64> {
        match self.analytic_zslope(x, n) {
            Some(v) if v.is_finite() => Ok(v),
            Some(v) => Err(Error::SlopeNonConvergence {
                x,
                n,
                first: v,
                second: v,
            }),
            None => self.zslope_numeric(x, n),
        }
    }

    /// Richardson extrapolation of `φ(x, n, δ)/δ` over `δ ∈ {1e-2, 1e-3, 1e-4}`,
    /// assuming an expansion in integer powers of `δ`.
    pub fn zslope_numeric(&self, x: f64, n: f64) -> Result<f64> {
        let r = SLOPE_DELTAS.map(|d| self.value(x, n, d) / d);
        let q = SLOPE_DELTAS[0] / SLOPE_DELTAS[1];
        let first = (q * r[1] - r[0]) / (q - 1.0);
        let second = (q * r[2] - r[1]) / (q - 1.0);
        let scale = second.abs().max(first.abs()).max(1.0);
        if !(first.is_finite() && second.is_finite())
            || (first - second).abs() > SLOPE_REL_TOL * scale
        {
            return Err(Error::SlopeNonConvergence {
                x,
                n,
                first,
                second,
            });
        }
        let qq = q * q;
        Ok((qq * second - first) / (qq - 1.0))
    }

    /// `M = max zslope(x, n)` over a grid of `Δ_{0,K}`.
    pub fn slope_bound(&self) -> Result<f64> {
        const LEVELS: usize = 101;
        let cap = self.domain_cap;
        let mut best = f64::NEG_INFINITY;
        for i in 0..LEVELS {
            let n = cap * i as f64 / (LEVELS - 1) as f64;
            for j in 0..LEVELS {
                let x = n * j as f64 / (LEVELS - 1) as f64;
                best = best.max(self.zslope(x, n)?);
            }
        }
        Ok(best)
    }

    /// Estimate of the `C¹` norm `max|φ| + max‖dφ‖` over `Δ_{0,K}` using
    /// central differences on a grid.
    pub fn c1_norm(&self) -> f64 {
        const LEVELS: usize = 41;
        let cap = self.domain_cap;
        let h = cap * 1e-6;
        let mut max_val = 0.0f64;
        let mut max_grad = 0.0f64;
        for i in 0..LEVELS {
            let n = cap * i as f64 / (LEVELS - 1) as f64;
            for j in 0..LEVELS {
                let x = n * j as f64 / (LEVELS - 1) as f64;
                for k in 0..LEVELS {
                    let z = n * k as f64 / (LEVELS - 1) as f64;
                    max_val = max_val.max(self.value(x, n, z).abs());
                    let dx = (self.value(x + h, n, z) - self.value(x - h, n, z)) / (2.0 * h);
                    let dn = (self.value(x, n + h, z) - self.value(x, n - h, z)) / (2.0 * h);
                    let dz = (self.value(x, n, z + h) - self.value(x, n, z - h)) / (2.0 * h);
                    let g = (dx * dx + dn * dn + dz * dz).sqrt();
                    if g.is_finite() {
                        max_grad = max_grad.max(g);
                    }
                }
            }
        }
        max_val + max_grad
    }

    /// Samples `samples` quasi-random points of `Δ_{0,K}` and checks the
    /// monotonicity, limit, ratio and Lipschitz hypotheses.
    pub fn verify_hypotheses(&self, samples: usize) -> Result<HypothesisReport> {
        if samples < 100 {
            return Err(Error::InvalidParameter(format!(
                "at least 100 samples are required, got {samples}"
            )));
        }
        let cap = self.domain_cap;
        let d = cap / 1000.0;
        let tol = |v: f64| MONOTONE_TOL * (1.0 + v.abs());

        let mut mono_n = Check::default();
        let mut mono_x = Check::default();
        let mut zero_x = Check::default();
        let mut limit = Check::default();
        let mut ratio = Check::default();

        let mut halton = Halton::new(1);
        for _ in 0..samples {
            let [u1, u2, u3] = halton.next_point();
            let n = cap * u1;
            let x = n * u2;
            let z = n * u3;
            let v = self.value(x, n, z);

            // n ↦ φ(x, n, z) non increasing
            if n + d <= cap {
                let up = self.value(x, n + d, z);
                mono_n.record(up - v, tol(v));
            }
            // x ↦ φ(x, n, z) non decreasing
            if x + d <= n {
                let up = self.value(x + d, n, z);
                mono_x.record(v - up, tol(v));
            }
            // x ↦ φ(x, x, z) non decreasing for z ≤ x
            if z <= x && x + d <= cap {
                let diag = self.value(x, x, z);
                let up = self.value(x + d, x + d, z);
                mono_x.record(diag - up, tol(diag));
            }
            zero_x.record(self.value(0.0, n, z).abs(), 0.0);

            let slope = match self.zslope(x, n) {
                Ok(s) => s,
                Err(_) => {
                    limit.record(f64::INFINITY, 0.0);
                    continue;
                }
            };
            // uniform limit: deviation at a small δ
            let delta = cap * 1e-6;
            let dev = (self.value(x, n, delta) / delta - slope).abs();
            limit.record(dev, 1e-4 * (1.0 + slope.abs()));

            // z ↦ φ/z non increasing and bounded by its z → 0 limit
            if z > 0.0 {
                let rz = v / z;
                ratio.record(rz - slope, tol(slope));
                if z + d <= n {
                    let rz_up = self.value(x, n, z + d) / (z + d);
                    ratio.record(rz_up - rz, tol(rz));
                }
            }
        }

        let lipschitz = [cap / 10.0, cap / 4.0]
            .into_iter()
            .map(|theta| {
                let estimate = self.estimate_lipschitz(theta, samples, 7);
                let declared = match &self.kind {
                    IncidenceKind::Custom(c) => c.lipschitz.as_ref().map(|f| f(theta)),
                    _ => None,
                };
                LipschitzEstimate {
                    theta,
                    estimate,
                    declared,
                }
            })
            .collect::<Vec<_>>();
        let h4_pass = lipschitz.iter().all(|l| {
            l.estimate.is_finite() && l.declared.is_none_or(|k| l.estimate <= 1.05 * k)
        });

        let slope_bound = self.slope_bound().unwrap_or(f64::INFINITY);
        Ok(HypothesisReport {
            h1_monotone_n: mono_n.finish(),
            h1_monotone_x: mono_x.finish(),
            h1_zero_susceptibles: zero_x.finish(),
            h2_uniform_limit: limit.finish(),
            h3_ratio_nonincreasing: ratio.finish(),
            h4_lipschitz: LipschitzCheck {
                pass: h4_pass,
                estimates: lipschitz,
            },
            slope_bound,
            sample_count: samples,
        })
    }

    /// Estimate of `K_θ` on `Δ_{θ,K}`: the largest observed
    /// `|φ(x₁,n,z) − φ(x₂,n,z)| / (|x₁ − x₂| z)`, also along the diagonal.
    /// `seed` selects the Halton leap so that independent sample sets can be drawn.
    pub fn estimate_lipschitz(&self, theta: f64, samples: usize, seed: u64) -> f64 {
        let cap = self.domain_cap;
        let mut halton = Halton::new(seed);
        let mut best = 0.0f64;
        for _ in 0..samples {
            let [u1, u2, v1, u3] = halton.next_point4();
            let n = theta + (cap - theta) * u1;
            let x1 = theta + (n - theta) * u2;
            let x2 = theta + (n - theta) * v1;
            let z = n * u3;
            let dx = (x1 - x2).abs();
            if dx > 0.0 && z > 0.0 {
                let q = (self.value(x1, n, z) - self.value(x2, n, z)).abs() / (dx * z);
                best = best.max(q);
            }
            // diagonal form, z ≤ min(x₁, x₂)
            let a = theta + (cap - theta) * u1;
            let b = theta + (cap - theta) * u2;
            let zd = a.min(b) * u3;
            let dd = (a - b).abs();
            if dd > 0.0 && zd > 0.0 {
                let q = (self.value(a, a, zd) - self.value(b, b, zd)).abs() / (dd * zd);
                best = best.max(q);
            }
        }
        best
    }
}

/// Outcome of one sampled hypothesis check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckResult {
    pub pass: bool,
    /// Largest observed violation (or deviation, for the limit check).
    pub worst: f64,
}

#[derive(Debug, Default)]
struct Check {
    worst: f64,
    fail: bool,
}

impl Check {
    fn record(&mut self, violation: f64, tol: f64) {
        if violation > self.worst || violation.is_nan() {
            self.worst = if violation.is_nan() { f64::INFINITY } else { violation };
        }
        if !(violation <= tol) {
            self.fail = true;
        }
    }

    fn finish(self) -> CheckResult {
        CheckResult {
            pass: !self.fail,
            worst: self.worst.max(0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzEstimate {
    pub theta: f64,
    pub estimate: f64,
    pub declared: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzCheck {
    pub pass: bool,
    pub estimates: Vec<LipschitzEstimate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisReport {
    pub h1_monotone_n: CheckResult,
    /// Covers both `x ↦ φ(x, n, z)` and `x ↦ φ(x, x, z)`.
    pub h1_monotone_x: CheckResult,
    pub h1_zero_susceptibles: CheckResult,
    pub h2_uniform_limit: CheckResult,
    pub h3_ratio_nonincreasing: CheckResult,
    pub h4_lipschitz: LipschitzCheck,
    /// `M` from the ratio bound `φ/z ≤ lim φ(·,·,δ)/δ ≤ M`.
    pub slope_bound: f64,
    pub sample_count: usize,
}

impl HypothesisReport {
    pub fn all_pass(&self) -> bool {
        self.h1_monotone_n.pass
            && self.h1_monotone_x.pass
            && self.h1_zero_susceptibles.pass
            && self.h2_uniform_limit.pass
            && self.h3_ratio_nonincreasing.pass
            && self.h4_lipschitz.pass
    }

    /// `(check, pass, value)` rows in a fixed order.
    pub fn rows(&self) -> Vec<(&'static str, bool, f64)> {
        let lip = self
            .h4_lipschitz
            .estimates
            .iter()
            .map(|l| l.estimate)
            .fold(0.0, f64::max);
        vec![
            ("h1_monotone_n", self.h1_monotone_n.pass, self.h1_monotone_n.worst),
            ("h1_monotone_x", self.h1_monotone_x.pass, self.h1_monotone_x.worst),
            (
                "h1_zero_susceptibles",
                self.h1_zero_susceptibles.pass,
                self.h1_zero_susceptibles.worst,
            ),
            ("h2_uniform_limit", self.h2_uniform_limit.pass, self.h2_uniform_limit.worst),
            (
                "h3_ratio_nonincreasing",
                self.h3_ratio_nonincreasing.pass,
                self.h3_ratio_nonincreasing.worst,
            ),
            ("h4_lipschitz", self.h4_lipschitz.pass, lip),
            ("slope_bound", self.slope_bound.is_finite(), self.slope_bound),
        ]
    }
}

/// Halton sequence in bases 2, 3, 5 (and 7 for four-dimensional points).
#[derive(Debug, Clone)]
pub struct Halton {
    index: u64,
}

impl Halton {
    /// Starts at `index = start`; index 0 is skipped since it maps to the origin.
    pub fn new(start: u64) -> Self {
        Self {
            index: start.max(1),
        }
    }

    pub fn next_point(&mut self) -> [f64; 3] {
        let i = self.index;
        self.index += 1;
        [radical_inverse(i, 2), radical_inverse(i, 3), radical_inverse(i, 5)]
    }

    pub fn next_point4(&mut self) -> [f64; 4] {
        let i = self.index;
        let [a, b, c] = self.next_point();
        [a, b, c, radical_inverse(i, 7)]
    }
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}
