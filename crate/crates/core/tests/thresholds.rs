use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use seirs_threshold::thresholds::{
    autonomous_ra, b_limit, compute_report, equilibrium_slope, g_limit, periodic_rper, search_p,
    Mode, ThresholdConfig, ThresholdProfile,
};
use seirs_threshold::{Coefficients, IncidenceKind, ModelSpec, TimeFunction};

fn periodic(mu: f64, beta: f64, b: f64, eps: f64, d: f64, gamma: f64, k: f64) -> ModelSpec {
    let mut c = Coefficients::constant([mu, mu, beta, 0.1, eps, gamma]).unwrap();
    c.transmission = TimeFunction::periodic_cosine("beta", beta, b, 1.0).unwrap();
    c.progression = TimeFunction::periodic_cosine("epsilon", eps, d, 1.0).unwrap();
    c.recovery = TimeFunction::periodic_cosine("gamma", gamma, k, 1.0).unwrap();
    ModelSpec::with_defaults(c, IncidenceKind::MassAction).unwrap()
}

fn random_periodic() -> impl Strategy<Value = ModelSpec> {
    (
        0.5..3.0f64,
        0.0..12.0f64,
        -0.9..0.9f64,
        0.2..2.0f64,
        -0.9..0.9f64,
        0.01..1.0f64,
        -0.9..0.9f64,
    )
        .prop_map(|(mu, beta, b, eps, d, gamma, k)| periodic(mu, beta, b, eps, d, gamma, k))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn limsup_dominates_liminf(m in random_periodic(), p in 0.05..5.0f64, lambda in 0.5..3.0f64) {
        let r = compute_report(&m, &ThresholdConfig::for_model(&m, lambda, p)).unwrap();
        prop_assert!(r.log_re >= r.log_rp && r.log_re_star >= r.log_rp_star);
        prop_assert!(r.re >= r.rp && r.re_star >= r.rp_star);
        prop_assert_eq!(r.re, r.log_re.exp());
    }

    #[test]
    fn constant_coefficients_collapse(
        beta in 0.0..12.0f64,
        mu in 0.5..3.0f64,
        eps in 0.1..2.0f64,
        p in 0.05..3.0f64,
        lambda in 0.5..3.0f64,
    ) {
        let c = Coefficients::constant([mu, mu, beta, 0.1, eps, 0.3]).unwrap();
        let m = ModelSpec::with_defaults(c, IncidenceKind::Standard).unwrap();
        let r = compute_report(&m, &ThresholdConfig::for_model(&m, lambda, p)).unwrap();
        let expect = (beta * p - mu - eps) * lambda;
        prop_assert!((r.log_re - expect).abs() <= 1e-9, "{} vs {expect}", r.log_re);
    }
}

#[test]
fn g_minus_b_identity() {
    let mut rng = StdRng::seed_from_u64(3);
    let m = periodic(2.0, 6.2, 0.6, 1.0, 0.4, 0.5, -0.3);
    for _ in 0..1000 {
        let (p, t, z) = (rng.gen_range(0.01..5.0), rng.gen_range(0.0..50.0), rng.gen_range(0.01..1.0));
        let lhs = g_limit(&m, p, t, z).unwrap() - b_limit(&m, p, t, z).unwrap();
        let c = m.coefficients();
        let rhs = c.recovery.eval(t) + c.mortality.eval(t) - c.progression.eval(t) / p;
        assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()), "{lhs} vs {rhs}");
    }
}

#[test]
fn z0_does_not_matter() {
    let m = periodic(1.0, 5.0, 0.3, 1.0, 0.2, 0.1, 0.0);
    let reports: Vec<_> = [0.5, 5.0]
        .iter()
        .map(|&z0| {
            let cfg = ThresholdConfig { z0, ..ThresholdConfig::for_model(&m, 1.0, 0.4) };
            compute_report(&m, &cfg).unwrap()
        })
        .collect();
    let (a, b) = (&reports[0], &reports[1]);
    for (x, y) in [(a.log_re, b.log_re), (a.log_rp_star, b.log_rp_star), (a.g, b.g), (a.h, b.h)] {
        assert!((x - y).abs() < 1e-6);
    }
}

/// Endpoint reports reproduce the sign predictions of the closed forms.
#[test]
fn closed_forms_predict_endpoint_signs() {
    let mut rng = StdRng::seed_from_u64(99);
    for draw in 0..50 {
        let constant = draw % 2 == 0;
        let amp = |rng: &mut StdRng| if constant { 0.0 } else { rng.gen_range(-0.8..0.8) };
        let mu = rng.gen_range(0.5..3.0);
        let beta = rng.gen_range(0.5..12.0);
        let eps = rng.gen_range(0.2..2.0);
        let gamma = rng.gen_range(0.01..1.0);
        let (b, d, k) = (amp(&mut rng), amp(&mut rng), amp(&mut rng));
        let m = periodic(mu, beta, b, eps, d, gamma, k);
        let r = if constant {
            autonomous_ra(&m).unwrap()
        } else {
            periodic_rper(&m, 1.0).unwrap()
        };
        if (r - 1.0).abs() < 1e-3 {
            continue;
        }
        let l = equilibrium_slope(&m).unwrap();
        let (eps_bar, gamma_bar) = (eps, gamma);
        let p_low = eps_bar / (mu + gamma_bar);
        let p_high = (mu + eps_bar) / (beta * l);
        let profile = ThresholdProfile::build(&m, &ThresholdConfig::for_model(&m, 1.0, 1.0)).unwrap();
        let mid = 0.5 * (p_low + p_high);
        let rep = profile.report(mid).unwrap();
        if r < 1.0 {
            assert!(rep.log_re < 0.0 && rep.log_re_star < 0.0, "draw {draw}: {rep:?}");
        } else {
            assert!(rep.log_rp > 0.0 && rep.log_rp_star > 0.0, "draw {draw}: {rep:?}");
        }
    }
}

#[test]
fn extinction_via_g_matches_boundary_formula() {
    for &(b, beta) in &[(0.0, 5.5), (0.2, 4.9), (0.5, 4.0), (0.0, 6.5), (0.2, 5.2), (0.5, 4.1)] {
        let m = periodic(2.0, beta, b, 1.0, 0.0, 0.02, 0.0);
        let cfg = ThresholdConfig::for_model(&m, 1.0, 1.0);
        let found = search_p(&m, &cfg, Mode::Extinction).unwrap();
        let predicted = beta * (1.0 + b) < 6.06;
        assert_eq!(found.is_some(), predicted, "b={b}, beta={beta}");
    }
}

#[test]
fn persistence_via_g_matches_boundary_formula() {
    for &(b, beta) in &[(0.0, 6.5), (0.2, 8.0), (0.5, 10.7), (0.2, 7.6), (0.5, 10.4), (0.9, 14.0)] {
        let m = periodic(2.0, beta, b, 1.0, 0.0, 0.02, 0.0);
        let cfg = ThresholdConfig::for_model(&m, 1.0, 1.0);
        let found = search_p(&m, &cfg, Mode::Persistence).unwrap();
        let predicted = beta > 9.0 * b + 6.06;
        assert_eq!(found.is_some(), predicted, "b={b}, beta={beta}");
    }
}
