//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits with
//! a nonzero status if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use seirs_threshold::classify::{
    classify, classify_fast, confirm_by_simulation, robustness_scan, sweep, tail_distance, Axis,
    state_from_fractions, Outcome, Perturbation, DEFAULT_LAMBDAS,
};
use seirs_threshold::dynamics::IntegrateOptions;
use seirs_threshold::thresholds::{compute_report, mm_bounds, periodic_rper, ThresholdConfig};
use seirs_threshold::{
    Coefficients, ContactRate, IncidenceKind, ModelSpec, State, ThresholdReport, TimeFunction,
};

type Check = Result<String, String>;

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Check,
}

fn periodic_family(beta: f64, b: f64) -> ModelSpec {
    let mut c = Coefficients::constant([2.0, 2.0, beta, 0.1, 1.0, 0.02]).unwrap();
    c.transmission = TimeFunction::periodic_cosine("beta", beta, b, 1.0).unwrap();
    ModelSpec::with_defaults(c, IncidenceKind::MassAction).unwrap()
}

fn mm_family(beta: f64, b: f64) -> ModelSpec {
    let mut c = Coefficients::constant([2.0, 2.0, beta, 0.1, 1.0, 0.02]).unwrap();
    c.transmission = TimeFunction::asymptotic_periodic("beta", beta, b, 1.0, 1.0).unwrap();
    ModelSpec::with_defaults(c, IncidenceKind::MichaelisMenten(ContactRate::Identity)).unwrap()
}

fn report(m: &ModelSpec, p: f64) -> ThresholdReport {
    compute_report(m, &ThresholdConfig::for_model(m, 1.0, p)).unwrap()
}

fn within(name: &str, got: f64, want: f64, tol: f64) -> Result<String, String> {
    let msg = format!("{name} = {got:.6} (target {want} ± {tol})");
    if (got - want).abs() <= tol {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn g_anchor() -> Check {
    let r = report(&periodic_family(6.2, 0.6), 0.49505);
    within("G(0.49505)", r.g, 1.91089, 1e-3)
}

fn rper_boundary() -> Check {
    let mut worst = 0.0f64;
    for b in [0.0, 0.3, 0.6, 0.9] {
        let f = |beta: f64| periodic_rper(&periodic_family(beta, b), 1.0).unwrap() - 1.0;
        let (mut lo, mut hi) = (5.0, 7.0);
        if !(f(lo) < 0.0 && f(hi) > 0.0) {
            return Err(format!("R^per - 1 does not change sign on [5, 7] for b = {b}"));
        }
        while hi - lo > 1e-10 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        worst = worst.max((0.5 * (lo + hi) - 6.06).abs());
    }
    let msg = format!("R^per crosses 1 within {worst:.2e} of beta = 6.06 for b in {{0, 0.3, 0.6, 0.9}}");
    if worst <= 1e-6 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn mm_anchors() -> Check {
    let m = mm_family(10.0, 0.3);
    let rp = mm_bounds(&m, 1.0).unwrap().rp_m;
    let g = report(&m, 0.3).g;
    let m = mm_family(5.0, 0.2);
    let re = mm_bounds(&m, 1.0).unwrap().re_m;
    let g2 = report(&m, 0.495).g;
    let checks = [
        within("R_p^M(1) [beta=10]", rp, 1.650, 0.01),
        within("G(0.3) [beta=10]", g, -0.413, 0.01),
        within("R_e^M(1) [beta=5]", re, 0.825, 0.01),
        within("G(0.495) [beta=5]", g2, -0.030, 0.005),
    ];
    let ok = checks.iter().all(|c| c.is_ok());
    let msg = checks
        .into_iter()
        .map(|c| c.unwrap_or_else(|e| e))
        .collect::<Vec<_>>()
        .join("; ");
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn simulation_persistence() -> Check {
    let m = mm_family(10.0, 0.3);
    let v = classify(&m, &DEFAULT_LAMBDAS).map_err(|e| e.to_string())?;
    if v.outcome != Outcome::Persistence {
        return Err(format!("verdict is {} ({})", v.outcome, v.clause));
    }
    let check = confirm_by_simulation(&m, &v, 300.0, 1e-6, 1e-4).map_err(|e| e.to_string())?;
    let msg = format!("verdict {}, min I over [270,300] = {:.3e}", v.clause, check.tail_stat);
    if check.pass {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn simulation_extinction() -> Check {
    let m = mm_family(5.0, 0.2);
    let v = classify(&m, &DEFAULT_LAMBDAS).map_err(|e| e.to_string())?;
    if v.outcome != Outcome::Extinction {
        return Err(format!("verdict is {} ({})", v.outcome, v.clause));
    }
    let check = confirm_by_simulation(&m, &v, 300.0, 1e-6, 1e-4).map_err(|e| e.to_string())?;
    let msg = format!("verdict {}, max I over [270,300] = {:.3e}", v.clause, check.tail_stat);
    if check.pass {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn analytic_outcome(b: f64, beta: f64) -> Outcome {
    if beta < 6.06 && beta * (1.0 + b.abs()) < 6.06 {
        Outcome::Extinction
    } else if beta > 6.06 && beta > 9.0 * b.abs() + 6.06 {
        Outcome::Persistence
    } else {
        Outcome::Inconclusive
    }
}

fn figure_region() -> Check {
    let template = periodic_family(6.2, 0.0);
    let bs = Axis::linspace("b", -1.0, 1.0, 81).unwrap();
    let betas = Axis::linspace("beta", 0.0, 16.0, 65).unwrap();
    let grid = sweep(&template, bs, betas, &DEFAULT_LAMBDAS, false).map_err(|e| e.to_string())?;
    let (n1, n2) = grid.shape();
    let predicted = |i: usize, j: usize| analytic_outcome(grid.axis1.values[i], grid.axis2.values[j]);
    let mut mismatches = 0;
    let mut off_boundary = Vec::new();
    for i in 0..n1 {
        for j in 0..n2 {
            if grid.cell(i, j).outcome == predicted(i, j) {
                continue;
            }
            mismatches += 1;
            let near = (i.saturating_sub(1)..=(i + 1).min(n1 - 1)).any(|a| {
                (j.saturating_sub(1)..=(j + 1).min(n2 - 1)).any(|c| predicted(a, c) != predicted(i, j))
            });
            if !near {
                off_boundary.push((grid.axis1.values[i], grid.axis2.values[j]));
            }
        }
    }
    let closed = grid.cells.iter().filter(|c| c.closed_form).count();

    let mut rng = StdRng::seed_from_u64(20240601);
    let mut disagreements = Vec::new();
    for _ in 0..50 {
        let (i, j) = (rng.gen_range(0..n1), rng.gen_range(0..n2));
        let (b, beta) = (grid.axis1.values[i], grid.axis2.values[j]);
        let v = classify_fast(&periodic_family(beta, b), &DEFAULT_LAMBDAS, true)
            .map_err(|e| e.to_string())?;
        if v.outcome != grid.cell(i, j).outcome {
            disagreements.push((b, beta, v.outcome, grid.cell(i, j).outcome));
        }
    }
    let msg = format!(
        "{n1}x{n2} grid, {closed} closed-form cells, {mismatches} boundary-adjacent mismatches, \
         {} off-boundary mismatches, {} general-path disagreements on 50 cells",
        off_boundary.len(),
        disagreements.len()
    );
    if off_boundary.is_empty() && disagreements.is_empty() && closed == n1 * n2 {
        Ok(msg)
    } else {
        Err(format!("{msg}: {off_boundary:?} {disagreements:?}"))
    }
}

fn counterexample() -> Check {
    let m = periodic_family(6.2, 0.6);
    let general = classify(&m, &DEFAULT_LAMBDAS).map_err(|e| e.to_string())?;
    let closed = classify_fast(&m, &DEFAULT_LAMBDAS, false).map_err(|e| e.to_string())?;
    let msg = format!("general path: {}, closed form: {}", general.outcome, closed.outcome);
    if general.outcome == Outcome::Inconclusive && closed.outcome == Outcome::Inconclusive {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn random_periodic(rng: &mut StdRng) -> ModelSpec {
    let mut amp = || rng.gen_range(-0.9..0.9);
    let (b, d, k, e) = (amp(), amp(), amp(), amp());
    let mut c = Coefficients::constant([
        rng.gen_range(0.5..3.0),
        rng.gen_range(0.5..3.0),
        1.0,
        rng.gen_range(0.0..1.0),
        1.0,
        1.0,
    ])
    .unwrap();
    c.transmission = TimeFunction::periodic_cosine("beta", rng.gen_range(0.0..10.0), b, 1.0).unwrap();
    c.progression = TimeFunction::periodic_cosine("epsilon", rng.gen_range(0.2..2.0), d, 1.0).unwrap();
    c.recovery = TimeFunction::periodic_cosine("gamma", rng.gen_range(0.01..1.0), k, 1.0).unwrap();
    c.immunity_loss = TimeFunction::periodic_cosine("eta", 0.1, e, 1.0).unwrap();
    ModelSpec::with_defaults(c, IncidenceKind::MassAction).unwrap()
}

fn lemma_one() -> Check {
    let mut rng = StdRng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let m = random_periodic(&mut rng);
        let p = rng.gen_range(0.2..2.0);
        let reports: Vec<ThresholdReport> = [0.1, 1.0, 10.0]
            .iter()
            .map(|&z0| {
                let cfg = ThresholdConfig {
                    z0,
                    ..ThresholdConfig::for_model(&m, 1.0, p)
                };
                compute_report(&m, &cfg).unwrap()
            })
            .collect();
        for r in &reports[1..] {
            let a = &reports[0];
            // R fields can reach 1e8; they are compared relative to their size,
            // which is the same as comparing the log fields absolutely.
            for (x, y) in [
                (a.re, r.re),
                (a.rp, r.rp),
                (a.re_star, r.re_star),
                (a.rp_star, r.rp_star),
            ] {
                worst = worst.max((x - y).abs() / x.abs().max(1.0));
            }
            for (x, y) in [
                (a.log_re, r.log_re),
                (a.log_rp, r.log_rp),
                (a.log_re_star, r.log_re_star),
                (a.log_rp_star, r.log_rp_star),
                (a.g, r.g),
                (a.h, r.h),
            ] {
                worst = worst.max((x - y).abs());
            }
        }
    }
    let msg = format!("max difference across z0 in {{0.1, 1, 10}} over 20 draws = {worst:.2e}");
    if worst <= 1e-6 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn random_model(rng: &mut StdRng) -> ModelSpec {
    let mut c = Coefficients::constant([1.0; 6]).unwrap();
    let mut cosine = |name: &str, lo: f64, hi: f64| {
        TimeFunction::periodic_cosine(name, rng.gen_range(lo..hi), rng.gen_range(-0.9..0.9), 1.0)
            .unwrap()
    };
    c.recruitment = cosine("Lambda", 0.5, 3.0);
    c.mortality = cosine("mu", 0.5, 2.0);
    c.transmission = cosine("beta", 0.0, 12.0);
    c.immunity_loss = cosine("eta", 0.0, 1.0);
    c.progression = cosine("epsilon", 0.2, 2.0);
    c.recovery = cosine("gamma", 0.01, 1.0);
    let incidence = match rng.gen_range(0..4) {
        0 => IncidenceKind::MassAction,
        1 => IncidenceKind::Standard,
        2 => IncidenceKind::Saturated {
            b: rng.gen_range(0.1..2.0),
        },
        _ => IncidenceKind::MichaelisMenten(ContactRate::Saturating {
            b: rng.gen_range(0.1..2.0),
        }),
    };
    ModelSpec::with_defaults(c, incidence).unwrap()
}

fn proposition_one() -> Check {
    let mut rng = StdRng::seed_from_u64(11);
    let mut min_component = f64::INFINITY;
    let mut worst_excess = f64::NEG_INFINITY;
    for _ in 0..10 {
        let m = random_model(&mut rng);
        let d = m.population_bound();
        for _ in 0..20 {
            let y: [f64; 4] = std::array::from_fn(|_| rng.gen_range(0.0..0.5 * d));
            let traj = m
                .integrate_with(
                    State::new(0.0, y),
                    200.0,
                    5e-3,
                    &IntegrateOptions {
                        thin: 20,
                        w_weight: None,
                    },
                )
                .map_err(|e| e.to_string())?;
            min_component = min_component.min(traj.min_value());
            for s in traj.window(180.0, 200.0) {
                worst_excess = worst_excess.max(s.total() - d);
            }
        }
    }
    let msg = format!(
        "200 runs: min component {min_component:.3e}, max tail N - D = {worst_excess:.3e}"
    );
    if min_component >= -1e-9 && worst_excess <= 1e-6 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn convergence_order() -> Check {
    let c = Coefficients::constant([2.0, 1.0, 0.0, 0.3, 2.0, 1.5]).unwrap();
    let m = ModelSpec::with_defaults(c, IncidenceKind::MassAction).unwrap();
    let (mu, eps, gamma, lambda) = (1.0f64, 2.0f64, 1.5f64, 2.0f64);
    let y0 = [0.5, 1.0, 0.8, 0.2];
    let t = 5.0;
    let exact = {
        let (a, c) = (mu + eps, mu + gamma);
        let e = y0[1] * (-a * t).exp();
        let i = y0[2] * (-c * t).exp() + eps * y0[1] * ((-a * t).exp() - (-c * t).exp()) / (c - a);
        let n0: f64 = y0.iter().sum();
        let n = lambda / mu + (n0 - lambda / mu) * (-mu * t).exp();
        [e, i, n]
    };
    let err = |h: f64| -> f64 {
        let s = m.integrate(State::new(0.0, y0), t, h).unwrap();
        let s = s.last();
        [s.exposed, s.infective, s.total()]
            .iter()
            .zip(exact)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    };
    let (e1, e2) = (err(0.1), err(0.05));
    let ratio = e1 / e2;
    let msg = format!("error {e1:.3e} at h=0.1, {e2:.3e} at h=0.05, ratio {ratio:.2}");
    if ratio >= 14.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn robustness() -> Check {
    let m = mm_family(10.0, 0.3);
    let constant = |name: &str, v: f64| Some(TimeFunction::constant(name, v).unwrap());
    let perturbation = Perturbation {
        transmission: constant("beta_shape", 1.0),
        immunity_loss: constant("eta_shape", 0.1),
        progression: constant("epsilon_shape", 0.1),
        recovery: constant("gamma_shape", 0.1),
        ..Perturbation::default()
    };
    let taus = [0.0, 0.2, 0.1, 0.05, 0.025];
    let cfg = ThresholdConfig::for_model(&m, 1.0, 0.31);
    let res = robustness_scan(&m, &perturbation, &taus, &cfg).map_err(|e| e.to_string())?;
    let zero = &res.rows[0];
    let zero_exact = zero.max_delta() == 0.0 && zero.d_log_re == 0.0 && zero.d_log_rp == 0.0;
    let bounded = res.rows.iter().all(|r| r.within_bounds());
    let maxes: Vec<f64> = res.rows[1..].iter().map(|r| r.max_delta()).collect();
    let monotone = maxes.windows(2).all(|w| w[1] <= w[0] + 1e-9);
    let msg = format!(
        "tau=0 exact: {zero_exact}; within Theta: {bounded}; max deltas {:?}; Theta {:?}",
        maxes.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>(),
        res.rows[1..].iter().map(|r| format!("{:.3e}", r.theta)).collect::<Vec<_>>()
    );
    if zero_exact && bounded && monotone {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn extinction_stability() -> Check {
    let m = mm_family(5.0, 0.2);
    let opts = IntegrateOptions {
        thin: 10,
        w_weight: None,
    };
    let a = m
        .integrate_with(state_from_fractions(&m, [0.7, 0.1, 0.1, 0.1]), 300.0, 1e-3, &opts)
        .map_err(|e| e.to_string())?;
    let b = m
        .integrate_with(state_from_fractions(&m, [0.2, 0.3, 0.4, 0.6]), 300.0, 1e-3, &opts)
        .map_err(|e| e.to_string())?;
    let d = tail_distance(&a, &b, 270.0).map_err(|e| e.to_string())?;
    let msg = format!("sup state difference over [270,300] = {d:.3e}");
    if d < 1e-4 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { id: 1, name: "G anchor on the periodic counterexample", budget: Duration::from_secs(5), run: g_anchor },
        Criterion { id: 2, name: "R^per boundary at beta = 6.06", budget: Duration::from_secs(1), run: rper_boundary },
        Criterion { id: 3, name: "Michaelis-Menten anchors", budget: Duration::from_secs(10), run: mm_anchors },
        Criterion { id: 4, name: "simulation confirms persistence (beta=10, b=0.3)", budget: Duration::from_secs(60), run: simulation_persistence },
        Criterion { id: 4, name: "simulation confirms extinction (beta=5, b=0.2)", budget: Duration::from_secs(60), run: simulation_extinction },
        Criterion { id: 5, name: "(b, beta) region fidelity", budget: Duration::from_secs(600), run: figure_region },
        Criterion { id: 6, name: "counterexample is inconclusive", budget: Duration::from_secs(60), run: counterexample },
        Criterion { id: 7, name: "reports independent of z0", budget: Duration::from_secs(120), run: lemma_one },
        Criterion { id: 8, name: "positivity and population bound", budget: Duration::from_secs(300), run: proposition_one },
        Criterion { id: 9, name: "fourth-order convergence", budget: Duration::from_secs(10), run: convergence_order },
        Criterion { id: 10, name: "robustness under constant perturbations", budget: Duration::from_secs(120), run: robustness },
        Criterion { id: 11, name: "extinction is globally stable", budget: Duration::from_secs(60), run: extinction_stability },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let result = (c.run)();
        let elapsed = start.elapsed();
        let (ok, detail) = match result {
            Ok(d) if elapsed <= c.budget => (true, d),
            Ok(d) => (false, format!("{d}; over time budget {:?}", c.budget)),
            Err(d) => (false, d),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "{} criterion {:>2}: {} [{:.2?}] {}",
            if ok { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            elapsed,
            detail
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
