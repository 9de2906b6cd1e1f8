use proptest::prelude::*;
use seirs_threshold::classify::{
    classify, classify_fast, compare_h_readings, confirm_by_simulation, robustness_scan, sweep,
    w_tail_sign_changes, Axis, FigurePanel, HReading, Outcome, Perturbation, RegionGrid,
    DEFAULT_LAMBDAS,
};
use seirs_threshold::thresholds::{Mode, ThresholdConfig, ThresholdProfile};
use seirs_threshold::{
    Coefficients, ContactRate, IncidenceFunction, IncidenceKind, ModelSpec, TimeFunction,
};

fn periodic(beta: f64, b: f64, eps: f64, gamma: f64) -> ModelSpec {
    let mut c = Coefficients::constant([2.0, 2.0, beta, 0.1, eps, gamma]).unwrap();
    c.transmission = TimeFunction::periodic_cosine("beta", beta, b, 1.0).unwrap();
    ModelSpec::with_defaults(c, IncidenceKind::MassAction).unwrap()
}

fn mm_family(beta: f64, b: f64) -> ModelSpec {
    let mut c = Coefficients::constant([2.0, 2.0, beta, 0.1, 1.0, 0.02]).unwrap();
    c.transmission = TimeFunction::asymptotic_periodic("beta", beta, b, 1.0, 1.0).unwrap();
    ModelSpec::with_defaults(c, IncidenceKind::MichaelisMenten(ContactRate::Identity)).unwrap()
}

/// Cells whose computed outcome differs from the prediction and that have
/// no neighbour with a different predicted outcome.
fn off_boundary_mismatches(
    grid: &RegionGrid,
    predicted: impl Fn(f64, f64) -> Outcome,
) -> Vec<(f64, f64, Outcome)> {
    let (n1, n2) = grid.shape();
    let pred = |i: usize, j: usize| predicted(grid.axis1.values[i], grid.axis2.values[j]);
    let mut out = Vec::new();
    for i in 0..n1 {
        for j in 0..n2 {
            if grid.cell(i, j).outcome == pred(i, j) {
                continue;
            }
            let near = (i.saturating_sub(1)..=(i + 1).min(n1 - 1))
                .any(|a| (j.saturating_sub(1)..=(j + 1).min(n2 - 1)).any(|c| pred(a, c) != pred(i, j)));
            if !near {
                out.push((grid.axis1.values[i], grid.axis2.values[j], grid.cell(i, j).outcome));
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn verdicts_are_sign_consistent(
        beta in 0.0..14.0f64,
        b in -0.9..0.9f64,
        eps in 0.2..2.0f64,
        gamma in 0.01..1.0f64,
    ) {
        let m = periodic(beta, b, eps, gamma);
        let v = classify(&m, &DEFAULT_LAMBDAS).unwrap();
        prop_assert_eq!(v.outcome == Outcome::Inconclusive, v.witness.is_none());
        if let Some(r) = v.report {
            let side = r.g < 0.0 || r.h > 0.0;
            match v.outcome {
                Outcome::Extinction => prop_assert!(r.log_re < 0.0 && r.log_re_star < 0.0 && side),
                Outcome::Persistence => prop_assert!(r.log_rp > 0.0 && r.log_rp_star > 0.0 && side),
                Outcome::Inconclusive => unreachable!(),
            }
        }
    }

    #[test]
    fn no_point_certifies_both(beta in 0.0..14.0f64, b in -0.9..0.9f64) {
        let m = periodic(beta, b, 1.0, 0.02);
        let profile = ThresholdProfile::build(&m, &ThresholdConfig::for_model(&m, 1.0, 1.0)).unwrap();
        for p in profile.candidate_ps() {
            let r = profile.report(p).unwrap();
            prop_assert!(!(r.satisfies(Mode::Extinction).is_some() && r.satisfies(Mode::Persistence).is_some()));
        }
    }
}

#[test]
fn paper_family_verdicts() {
    let v = classify(&mm_family(10.0, 0.3), &DEFAULT_LAMBDAS).unwrap();
    assert_eq!(v.outcome, Outcome::Persistence);
    let v = classify(&mm_family(5.0, 0.2), &DEFAULT_LAMBDAS).unwrap();
    assert_eq!(v.outcome, Outcome::Extinction);
    let v = classify(&periodic(6.2, 0.6, 1.0, 0.02), &DEFAULT_LAMBDAS).unwrap();
    assert_eq!(v.outcome, Outcome::Inconclusive);
}

#[test]
fn closed_form_and_general_paths_agree_on_mm_family() {
    for (beta, b) in [(10.0, 0.3), (5.0, 0.2), (6.2, 0.6), (3.0, 0.0)] {
        let m = mm_family(beta, b);
        let fast = classify_fast(&m, &DEFAULT_LAMBDAS, false).unwrap();
        let general = classify_fast(&m, &DEFAULT_LAMBDAS, true).unwrap();
        assert_eq!(fast.outcome, general.outcome, "beta={beta}, b={b}");
    }
}

#[test]
fn w_settles_in_the_tail() {
    for (beta, b) in [(10.0, 0.3), (5.0, 0.2)] {
        let m = mm_family(beta, b);
        let v = classify(&m, &DEFAULT_LAMBDAS).unwrap();
        let check = confirm_by_simulation(&m, &v, 300.0, 1e-6, 1e-4).unwrap();
        assert!(check.pass);
        assert_eq!(w_tail_sign_changes(&check.trajectory), Some(0), "beta={beta}");
    }
}

#[test]
fn zero_transmission_always_goes_extinct() {
    let m = periodic(0.0, 0.0, 1.0, 0.02);
    let v = classify(&m, &DEFAULT_LAMBDAS).unwrap();
    assert_eq!(v.outcome, Outcome::Extinction);
    assert!(confirm_by_simulation(&m, &v, 300.0, 1e-6, 1e-4).unwrap().pass);
}

#[test]
fn immunity_loss_perturbation_changes_nothing() {
    let m = mm_family(10.0, 0.3);
    let perturbation = Perturbation {
        immunity_loss: Some(TimeFunction::periodic_cosine("eta_shape", 1.0, 0.5, 1.0).unwrap()),
        ..Perturbation::default()
    };
    let cfg = ThresholdConfig::for_model(&m, 1.0, 0.31);
    let res = robustness_scan(&m, &perturbation, &[0.0, 0.1, 0.5], &cfg).unwrap();
    for row in &res.rows {
        assert!(row.max_delta() <= 1e-9, "{row:?}");
    }
}

#[test]
fn incidence_perturbation_respects_theta() {
    let m = mm_family(10.0, 0.3);
    let cap = m.incidence().domain_cap();
    let shape = IncidenceFunction::new(IncidenceKind::Saturated { b: 1.0 }, cap).unwrap();
    let perturbation = Perturbation {
        incidence: Some(shape),
        ..Perturbation::default()
    };
    let cfg = ThresholdConfig::for_model(&m, 1.0, 0.31);
    let res = robustness_scan(&m, &perturbation, &[0.0, 0.2, 0.1, 0.05], &cfg).unwrap();
    assert_eq!(res.rows[0].max_delta(), 0.0);
    for row in &res.rows {
        assert!(row.within_bounds(), "{row:?}");
    }
    let d: Vec<f64> = res.rows[1..].iter().map(|r| r.d_log_re).collect();
    assert!(d[1] <= 0.5 * d[0] * (1.0 + 1e-6) && d[2] <= 0.5 * d[1] * (1.0 + 1e-6), "{d:?}");
}

#[test]
fn demography_perturbation_is_flagged() {
    let m = mm_family(10.0, 0.3);
    let perturbation = Perturbation {
        mortality: Some(TimeFunction::constant("mu_shape", 1.0).unwrap()),
        ..Perturbation::default()
    };
    let cfg = ThresholdConfig::for_model(&m, 1.0, 0.31);
    let res = robustness_scan(&m, &perturbation, &[0.0, 0.1], &cfg).unwrap();
    assert!(res.experimental);
    assert!(res.rows.iter().all(|r| r.theta.is_nan() && r.note.is_some()));
}

#[test]
fn recovery_panel_matches_printed_conditions() {
    let panel = FigurePanel::RecoveryAmplitude;
    let (a1, a2) = panel.axis_names();
    let grid = sweep(
        &panel.template().unwrap(),
        Axis::linspace(a1, -1.0, 1.0, 21).unwrap(),
        Axis::linspace(a2, 0.0, 5.0, 41).unwrap(),
        &DEFAULT_LAMBDAS,
        false,
    )
    .unwrap();
    eprintln!("recovery panel: {:?}", compare_h_readings(&grid, panel));
    let off = off_boundary_mismatches(&grid, |k, g| panel.predicted(k, g, HReading::Literal));
    assert!(off.is_empty(), "{off:?}");
}

#[test]
fn progression_panel_prefers_amplitude_reading() {
    let panel = FigurePanel::ProgressionAmplitude;
    let (a1, a2) = panel.axis_names();
    let grid = sweep(
        &panel.template().unwrap(),
        Axis::linspace(a1, -1.0, 1.0, 41).unwrap(),
        Axis::linspace(a2, 0.0, 0.05, 51).unwrap(),
        &DEFAULT_LAMBDAS,
        false,
    )
    .unwrap();
    let cmp = compare_h_readings(&grid, panel);
    eprintln!("progression panel: {cmp:?}");
    assert_eq!(cmp.better(), HReading::Amplitude, "{cmp:?}");
    let off = off_boundary_mismatches(&grid, |d, e| panel.predicted(d, e, HReading::Amplitude));
    assert!(off.is_empty(), "{off:?}");
}

#[test]
fn sweep_is_deterministic() {
    let panel = FigurePanel::BetaAmplitude;
    let make = || {
        sweep(
            &panel.template().unwrap(),
            Axis::linspace("b", 0.0, 1.0, 5).unwrap(),
            Axis::linspace("beta", 4.0, 12.0, 5).unwrap(),
            &DEFAULT_LAMBDAS,
            true,
        )
        .unwrap()
    };
    let (a, b) = (make(), make());
    assert_eq!(a.cells, b.cells);
}
