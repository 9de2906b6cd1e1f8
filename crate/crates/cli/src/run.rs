use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;

use seirs_threshold::classify::{
    closed_form_check, robustness_scan, state_from_fractions, sweep, Clause, Outcome,
};
use seirs_threshold::dynamics::{self, fmt_num, IntegrateOptions};
use seirs_threshold::thresholds::{
    self, Corollary, CorollaryCheck, Mode, ThresholdProfile, REPORT_CSV_HEADER,
};
use seirs_threshold::timefunc::PANELS_PER_UNIT_TIME;
use seirs_threshold::{ModelSpec, ThresholdConfig};

use crate::config::{Command, ExperimentConfig};
use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.toml";

/// `p` of the report row when no witness exists and none is configured.
const FALLBACK_P: f64 = 1.0;

const CLOSED_FORM_CSV_HEADER: &str = "corollary,lambda,R_extinction,R_persistence,\
ext_G_p,ext_G,ext_H_p,ext_H,per_G_p,per_G,per_H_p,per_H,conclusion";

const HYPOTHESES_CSV_HEADER: &str = "check,pass,value";

#[derive(Debug, Clone, Default)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
    /// Human-readable results, one per line.
    pub lines: Vec<String>,
}

/// One output file held in memory until the experiment has finished.
struct Output {
    name: &'static str,
    body: String,
}

fn csv(header: &str, rows: impl IntoIterator<Item = String>) -> String {
    let mut s = String::from(header);
    s.push('\n');
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    s
}

fn threshold_config(cfg: &ExperimentConfig, m: &ModelSpec, lambda: f64, p: f64) -> ThresholdConfig {
    ThresholdConfig {
        z0: cfg.threshold.z0,
        aux_step: cfg.numerics.step,
        ..ThresholdConfig::for_model(m, lambda, p)
    }
}

fn closed_form_row(c: &CorollaryCheck) -> String {
    let name = match c.corollary {
        Corollary::Periodic => "periodic",
        Corollary::MichaelisMenten => "michaelis_menten",
    };
    let conclusion = c
        .conclusion()
        .map_or(Clause::None, |(mode, side, _)| Clause::new(mode, side));
    let f = fmt_num;
    format!(
        "{name},{},{},{},{},{},{},{},{},{},{},{},{}",
        f(c.lambda),
        f(c.r_extinction),
        f(c.r_persistence),
        f(c.extinction_g.0),
        f(c.extinction_g.1),
        f(c.extinction_h.0),
        f(c.extinction_h.1),
        f(c.persistence_g.0),
        f(c.persistence_g.1),
        f(c.persistence_h.0),
        f(c.persistence_h.1),
        conclusion.as_str(),
    )
}

/// Runs the configured command and returns the output files, without
/// touching the filesystem.
fn compute(cfg: &ExperimentConfig, lines: &mut Vec<String>) -> Result<Vec<Output>, CliError> {
    let command = cfg
        .command
        .ok_or_else(|| CliError::Config("command: not set".into()))?;
    let m = cfg.build_model()?;
    let lambdas = &cfg.threshold.lambdas;
    let force = cfg.threshold.force_general_path;
    let mut out = Vec::new();
    match command {
        Command::Simulate => {
            let n = &cfg.numerics;
            let s0 = state_from_fractions(&m, n.initial_fractions);
            let opts = IntegrateOptions {
                thin: cfg.output.thinning,
                w_weight: n.w_weight,
            };
            let traj = m.integrate_with(s0, n.t_end, n.step, &opts)?;
            let tail = 0.9 * n.t_end;
            let (lo, hi) = traj
                .window(tail, n.t_end)
                .fold((f64::INFINITY, 0.0f64), |(lo, hi), s| {
                    (lo.min(s.infective), hi.max(s.infective))
                });
            lines.push(format!("tail I over [{tail}, {}]: min {lo:e}, max {hi:e}", n.t_end));
            let mut body = Vec::new();
            traj.write_csv(&mut body)?;
            out.push(Output {
                name: "trajectory.csv",
                body: String::from_utf8(body).expect("csv is utf-8"),
            });
        }
        Command::Thresholds => {
            let mut rows = Vec::new();
            for &lambda in lambdas {
                let tcfg = threshold_config(cfg, &m, lambda, FALLBACK_P);
                let profile = ThresholdProfile::build(&m, &tcfg)?;
                let (report, clause) = match cfg.threshold.p {
                    Some(p) => {
                        let r = profile.report(p)?;
                        let clause = [Mode::Extinction, Mode::Persistence]
                            .into_iter()
                            .find_map(|mode| r.satisfies(mode).map(|s| Clause::new(mode, s)))
                            .unwrap_or(Clause::None);
                        (r, clause)
                    }
                    None => {
                        let mut found = None;
                        for mode in [Mode::Extinction, Mode::Persistence] {
                            if let Some((_, r, side)) = profile.search(mode)? {
                                found = Some((r, Clause::new(mode, side)));
                                break;
                            }
                        }
                        match found {
                            Some(f) => f,
                            None => (profile.report(FALLBACK_P)?, Clause::None),
                        }
                    }
                };
                lines.push(format!(
                    "lambda={lambda}: {} ({}) at p={}",
                    clause.outcome(),
                    clause.as_str(),
                    report.config.p
                ));
                rows.push(report.csv_row(clause.as_str()));
            }
            out.push(Output {
                name: "report.csv",
                body: csv(REPORT_CSV_HEADER, rows),
            });
            if !force {
                if let Some(check) = closed_form_check(&m, lambdas) {
                    let check = check?;
                    lines.push(format!(
                        "closed form: R_extinction={}, R_persistence={}",
                        check.r_extinction, check.r_persistence
                    ));
                    out.push(Output {
                        name: "closed_form.csv",
                        body: csv(CLOSED_FORM_CSV_HEADER, [closed_form_row(&check)]),
                    });
                }
            }
        }
        Command::Sweep => {
            let s = cfg
                .sweep
                .as_ref()
                .ok_or_else(|| CliError::Config("sweep: section required".into()))?;
            let grid = sweep(
                &m,
                s.axis1.build("sweep.axis1")?,
                s.axis2.build("sweep.axis2")?,
                lambdas,
                force,
            )?;
            let count = |o: Outcome| grid.cells.iter().filter(|c| c.outcome == o).count();
            lines.push(format!(
                "cells: {} extinction, {} persistence, {} inconclusive",
                count(Outcome::Extinction),
                count(Outcome::Persistence),
                count(Outcome::Inconclusive)
            ));
            let mut body = Vec::new();
            grid.write_csv(&mut body)?;
            out.push(Output {
                name: "region.csv",
                body: String::from_utf8(body).expect("csv is utf-8"),
            });
        }
        Command::Robustness => {
            let r = cfg
                .robustness
                .as_ref()
                .ok_or_else(|| CliError::Config("robustness: section required".into()))?;
            let pert = cfg.build_perturbation(m.incidence().domain_cap())?;
            let p = r.p.unwrap_or(FALLBACK_P);
            let tcfg = threshold_config(cfg, &m, lambdas[0], p);
            let res = robustness_scan(&m, &pert, &r.taus, &tcfg)?;
            if res.experimental {
                lines.push("Lambda/mu perturbed: experimental, no bound reported".into());
            }
            for row in &res.rows {
                lines.push(format!(
                    "tau={}: max delta {:e}, theta {:e}",
                    row.tau,
                    row.max_delta(),
                    row.theta
                ));
            }
            let mut body = Vec::new();
            res.write_csv(&mut body)?;
            out.push(Output {
                name: "robustness.csv",
                body: String::from_utf8(body).expect("csv is utf-8"),
            });
        }
        Command::VerifyIncidence => {
            let report = m.incidence().verify_hypotheses(cfg.verify.samples)?;
            lines.push(format!(
                "{}: {}",
                m.incidence().label(),
                if report.all_pass() { "all hypotheses pass" } else { "some hypotheses fail" }
            ));
            let rows = report
                .rows()
                .into_iter()
                .map(|(check, pass, value)| format!("{check},{pass},{}", fmt_num(value)));
            out.push(Output {
                name: "hypotheses.csv",
                body: csv(HYPOTHESES_CSV_HEADER, rows),
            });
        }
    }
    Ok(out)
}

/// Output file names and contents for a normalized config.
pub fn execute(cfg: &ExperimentConfig) -> Result<Vec<(String, String)>, CliError> {
    let mut lines = Vec::new();
    Ok(compute(cfg, &mut lines)?
        .into_iter()
        .map(|o| (o.name.to_string(), o.body))
        .collect())
}

#[derive(Serialize)]
struct RunInfo {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    started_unix_seconds: u64,
    wall_clock_seconds: f64,
    files: Vec<String>,
}

#[derive(Serialize)]
struct Derived {
    population_bound: f64,
    domain_cap: f64,
    fallback_p: f64,
}

/// Numerical constants of the library that are not configurable.
#[derive(Serialize)]
struct Constants {
    quadrature_panels_per_unit_time: f64,
    p_grid_points: usize,
    p_bracket_widening: f64,
    closed_form_samples: usize,
    clamp_tolerance: f64,
    negative_tolerance: f64,
    blowup_factor: f64,
    cap_over_bound: f64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    run: RunInfo,
    derived: Derived,
    constants: Constants,
    config: &'a ExperimentConfig,
}

fn write_all(dir: &Path, files: &[(PathBuf, &str)], written: &mut Vec<PathBuf>) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    for (path, body) in files {
        written.push(path.clone());
        fs::write(path, body)?;
    }
    Ok(())
}

/// Runs a normalized config, writing CSV outputs and the manifest into
/// `output.dir`. On failure nothing written by this run is left behind.
pub fn run(cfg: ExperimentConfig) -> Result<RunSummary, CliError> {
    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let clock = Instant::now();
    let mut lines = Vec::new();
    let outputs = compute(&cfg, &mut lines)?;
    let m = cfg.build_model()?;

    let dir = cfg.output.dir.clone();
    let mut names: Vec<String> = outputs.iter().map(|o| o.name.to_string()).collect();
    names.push(MANIFEST_FILE.to_string());
    let manifest = Manifest {
        run: RunInfo {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: cfg.command.map_or("", |c| c.as_str()),
            started_unix_seconds: started,
            wall_clock_seconds: clock.elapsed().as_secs_f64(),
            files: names,
        },
        derived: Derived {
            population_bound: m.population_bound(),
            domain_cap: m.incidence().domain_cap(),
            fallback_p: FALLBACK_P,
        },
        constants: Constants {
            quadrature_panels_per_unit_time: PANELS_PER_UNIT_TIME,
            p_grid_points: thresholds::P_GRID_POINTS,
            p_bracket_widening: thresholds::P_BRACKET_WIDENING,
            closed_form_samples: thresholds::CLOSED_FORM_SAMPLES,
            clamp_tolerance: dynamics::CLAMP_TOL,
            negative_tolerance: dynamics::NEGATIVE_TOL,
            blowup_factor: dynamics::BLOWUP_FACTOR,
            cap_over_bound: dynamics::CAP_OVER_BOUND,
        },
        config: &cfg,
    };
    let manifest = toml::to_string(&manifest).expect("manifest serializes");

    let mut files: Vec<(PathBuf, &str)> = outputs
        .iter()
        .map(|o| (dir.join(o.name), o.body.as_str()))
        .collect();
    files.push((dir.join(MANIFEST_FILE), manifest.as_str()));
    let mut written = Vec::new();
    if let Err(e) = write_all(&dir, &files, &mut written) {
        for path in &written {
            let _ = fs::remove_file(path);
        }
        return Err(e.into());
    }
    Ok(RunSummary {
        files: written,
        lines,
    })
}
