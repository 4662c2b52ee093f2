//! Acceptance suite. Each test covers one criterion, prints a single
//! `ACCEPTANCE` line with the measured numbers, then asserts.
//!
//! Run with `cargo test -p kslab --test acceptance -- --nocapture` to see
//! the lines.

use kslab::presets::preset;
use kslab::{prepare, simulate, Config};
use kslab_core::diagnostics::{
    check_dampened_integrals, check_decay, check_uniform_across_family, check_weak_continuity, claimed_lp_decay,
    taxis_theta, DiagnosticsRecord, EXPONENT_SLACK,
};
use kslab_core::elliptic::{EllipticSolver, HelmholtzProblem};
use kslab_core::initial_data::{DensityProfile, MeasureSpec};
use kslab_core::semigroup::{measure_smoothing_rate, SemigroupPlan};
use kslab_core::stepper::{Formulation, RunStatus, State, StepControl, Stepper};
use kslab_core::{ChemicalMode, Error, Field, Grid, ModelParams, Scenario};
use proptest::prelude::*;
use proptest::test_runner::{Config as RunnerConfig, TestRunner};
use std::sync::Arc;

const WINDOW: (f64, f64) = (1e-4, 1e-1);
const ENVELOPE_LIMIT: f64 = 10.0;
const INCREMENT_LIMIT: f64 = 0.9;
const FAMILY_EPS: [f64; 3] = [1e-2, 2.5e-3, 6.25e-4];

fn report(criterion: &str, pass: bool, detail: &str) -> bool {
    println!(
        "ACCEPTANCE {criterion}: {} | {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    pass
}

fn square(n: usize) -> Arc<Grid> {
    Arc::new(Grid::rectangle(1.0, 1.0, n, n).unwrap())
}

fn positive(records: &[DiagnosticsRecord]) -> Vec<&DiagnosticsRecord> {
    records.iter().filter(|r| r.t > 0.0).collect()
}

fn series(records: &[DiagnosticsRecord], f: impl Fn(&DiagnosticsRecord) -> f64) -> Vec<(f64, f64)> {
    positive(records).into_iter().map(|r| (r.t, f(r))).collect()
}

/// Advances with the largest admissible step up to `dt_max`, retrying on
/// a drift-bound rejection.
fn advance(stepper: &Stepper, state: &State, dt_max: f64) -> State {
    let mut dt = stepper.admissible_dt(state).min(dt_max);
    loop {
        match stepper.step(state, dt) {
            Ok(next) => return next,
            Err(Error::CflViolation { admissible_dt }) => dt = 0.5 * admissible_dt,
            Err(e) => panic!("step failed: {e}"),
        }
    }
}

#[test]
fn conservation_and_equilibrium() {
    // homogeneous equilibrium, 10³ steps, every mode and formulation
    let g = square(128);
    let mut worst_step = 0.0f64;
    for mode in [ChemicalMode::Elliptic, ChemicalMode::Parabolic] {
        for formulation in [Formulation::Transformed, Formulation::Primitive] {
            let params = ModelParams::new(2.0, 1.0, 1.5, 0.5, 3.0, 2.0, mode).unwrap();
            let control = StepControl {
                dt_init: 1e-3,
                dt_min: 1e-12,
                dt_max: 1e-3,
                cfl_safety: 0.5,
                blowup_threshold: f64::INFINITY,
                formulation,
            };
            let stepper = Stepper::new(g.clone(), params, control).unwrap();
            let u = Field::constant(g.clone(), 1.7);
            let chem = (mode == ChemicalMode::Parabolic).then(|| {
                (
                    Field::constant(g.clone(), 1.5 * 1.7 / 0.5),
                    Field::constant(g.clone(), 3.0 * 1.7 / 2.0),
                )
            });
            let mut state = stepper.initial_state(0.0, u, chem).unwrap();
            for _ in 0..1000 {
                let next = stepper.step(&state, 1e-3).unwrap();
                for (a, b) in [(&next.u, &state.u), (&next.v, &state.v), (&next.w, &state.w)] {
                    worst_step = worst_step.max(a.sup_distance(b).unwrap());
                }
                state = next;
            }
        }
    }
    let equilibrium = worst_step <= 1e-12;

    // mass over 10⁴ steps on every preset
    let mut worst_mass = 0.0f64;
    let mut lines = Vec::new();
    for (name, _) in kslab::presets::PRESETS {
        let cfg = preset(name).unwrap();
        let run = prepare(&cfg, cfg.experiment.eps[0]).unwrap();
        let m0 = run.initial.u.integrate();
        let mut state = run.initial;
        let mut drift = 0.0f64;
        for _ in 0..10_000 {
            state = advance(&run.stepper, &state, cfg.control.dt_max);
            drift = drift.max((state.u.integrate() - m0).abs() / m0);
        }
        lines.push(format!("{name}={drift:.1e}@t={:.3}", state.t));
        worst_mass = worst_mass.max(drift);
    }
    let mass = worst_mass <= 1e-11;
    let pass = report(
        "conservation_and_equilibrium",
        equilibrium && mass,
        &format!(
            "equilibrium sup step change {worst_step:.2e} (<= 1e-12); relative mass drift {} (<= 1e-11)",
            lines.join(" ")
        ),
    );
    assert!(pass);
}

#[test]
fn oracle_equivalence() {
    // χ = ξ = 0 against the spectral semigroup, T = 0.1, dt = 1e-5
    let g = square(128);
    let params = ModelParams::new(0.0, 0.0, 1.0, 1.0, 1.0, 1.0, ChemicalMode::Elliptic).unwrap();
    let control = StepControl {
        dt_init: 1e-5,
        dt_min: 1e-12,
        dt_max: 1e-5,
        cfl_safety: 0.5,
        blowup_threshold: f64::INFINITY,
        formulation: Formulation::Transformed,
    };
    let density = DensityProfile::Gaussian {
        center: [0.4, 0.55],
        width: 0.1,
        amplitude: 10.0,
    };
    let u0 = density.sample(&g).unwrap();
    let stepper = Stepper::new(g.clone(), params, control).unwrap();
    let mut state = stepper.initial_state(0.0, u0.clone(), None).unwrap();
    for _ in 0..10_000 {
        state = stepper.step(&state, 1e-5).unwrap();
    }
    let exact = SemigroupPlan::new(g.clone()).apply(&u0, state.t, 0.0).unwrap();
    let diffusion_error = state.u.sup_distance(&exact).unwrap();

    // conjugate gradient vs spectral Helmholtz on 100 random sources
    let spectral = HelmholtzProblem::new(g.clone(), 1.3, 0.7, EllipticSolver::Spectral).unwrap();
    let cg = HelmholtzProblem::new(
        g.clone(),
        1.3,
        0.7,
        EllipticSolver::ConjugateGradient {
            tolerance: 1e-13,
            max_iterations: 20_000,
        },
    )
    .unwrap();
    let worst_cg = std::cell::Cell::new(0.0f64);
    let mut runner = TestRunner::new(RunnerConfig {
        cases: 100,
        failure_persistence: None,
        ..RunnerConfig::default()
    });
    let sources = prop::collection::vec(0.0f64..10.0, g.len());
    let count = std::cell::Cell::new(0usize);
    runner
        .run(&sources, |values| {
            let u = Field::new(g.clone(), values).unwrap();
            let a = spectral.solve(&u).unwrap();
            let b = cg.solve(&u).unwrap();
            worst_cg.set(worst_cg.get().max(a.sup_distance(&b).unwrap()));
            count.set(count.get() + 1);
            Ok(())
        })
        .unwrap();
    let (worst_cg, count) = (worst_cg.get(), count.get());
    let pass = report(
        "oracle_equivalence",
        diffusion_error <= 1e-3 && worst_cg <= 1e-8 && count >= 100,
        &format!(
            "pure diffusion sup error {diffusion_error:.2e} at T={:.3} (<= 1e-3); CG vs spectral sup {worst_cg:.2e} over {count} sources (<= 1e-8)",
            state.t
        ),
    );
    assert!(pass);
}

#[test]
fn smoothing_rates() {
    let line = SemigroupPlan::new(Arc::new(Grid::interval(1.0, 512).unwrap()));
    let plane = SemigroupPlan::new(square(128));
    let r1 = measure_smoothing_rate(&line, 1.0, f64::INFINITY).unwrap();
    let r2 = measure_smoothing_rate(&plane, 1.0, f64::INFINITY).unwrap();
    let ok1 = (r1 + 0.5).abs() <= 0.1 * 0.5;
    let ok2 = (r2 + 1.0).abs() <= 0.1 * 1.0;
    let pass = report(
        "smoothing_rates",
        ok1 && ok2,
        &format!("L1->Linf exponent n=1: {r1:.4} (-0.5 +-10%); n=2: {r2:.4} (-1 +-10%)"),
    );
    assert!(pass);
}

#[test]
fn s2_decay() {
    let cfg = preset("s2-smoke").unwrap();
    let run = simulate(&cfg, 1e-3, false).unwrap();
    let n = 2;
    assert_eq!(run.status, RunStatus::Completed);
    let mut pass = true;
    let mut parts = Vec::new();
    for p in [2.0, 2.5] {
        let s = series(&run.records, |r| r.lp(p).unwrap().powf(p));
        let claimed = claimed_lp_decay(n, p);
        let d = check_decay(&format!("int_u^{p}"), &s, WINDOW, claimed).unwrap();
        let envelope = d.envelope_ratio <= ENVELOPE_LIMIT;
        let no_divergence = !d.monotone_divergence;
        let exponent = -d.fitted_exponent >= -claimed - EXPONENT_SLACK;
        pass &= envelope && no_divergence && exponent;
        parts.push(format!(
            "p={p}: envelope ratio {:.2} (<= 10: {envelope}), monotone divergence {}, fitted exponent {:.3} (>= {:.3}: {exponent})",
            d.envelope_ratio,
            d.monotone_divergence,
            -d.fitted_exponent,
            -claimed - EXPONENT_SLACK
        ));
    }
    let pass = report("s2_decay", pass, &parts.join("; "));
    assert!(pass);
}

#[test]
fn s1_energy() {
    let cfg = preset("s1-smoke").unwrap();
    let run = simulate(&cfg, cfg.experiment.eps[0], false).unwrap();
    assert_eq!(run.status, RunStatus::Completed);
    let lambda = cfg.lambda();
    let energy = series(&run.records, |r| r.energy_f);
    let d = check_decay("energy_F", &energy, WINDOW, lambda).unwrap();
    let envelope = d.envelope_ratio <= ENVELOPE_LIMIT && !d.monotone_divergence;
    let exponent = d.fitted_exponent <= lambda + EXPONENT_SLACK;
    let zeta = cfg.params().unwrap().derive().zeta;
    let sampled: Vec<DiagnosticsRecord> = positive(&run.records).into_iter().cloned().collect();
    let integrals = check_dampened_integrals(&sampled, lambda, 0.1, zeta, WINDOW);
    let pick = |name: &str| integrals.iter().find(|v| v.functional == name).unwrap();
    let (fisher, grad) = (pick("fisher_u"), pick("grad_z_l4"));
    let converging = |v: &kslab_core::diagnostics::IntegralVerdict| {
        !v.vacuous && v.tail_increment_ratio <= INCREMENT_LIMIT && v.limit_estimate.is_finite()
    };
    let pass = report(
        "s1_energy",
        envelope && exponent && converging(fisher) && converging(grad),
        &format!(
            "lambda={lambda:.4}: t^lambda F ratio {:.2} (<= 10), divergence {}, fitted rate {:.3} (<= {:.3}); \
             increment ratio near 0: fisher {:.3}, |grad z|^4 {:.3} (<= 0.9); limits {:.3e}, {:.3e}",
            d.envelope_ratio,
            d.monotone_divergence,
            d.fitted_exponent,
            lambda + EXPONENT_SLACK,
            fisher.tail_increment_ratio,
            grad.tail_increment_ratio,
            fisher.limit_estimate,
            grad.limit_estimate
        ),
    );
    assert!(pass);
}

#[test]
fn continuity_at_zero() {
    let cfg = preset("continuity-ladder").unwrap();
    assert_eq!(cfg.experiment.eps, FAMILY_EPS);
    let grid = cfg.grid().unwrap();
    let spec = cfg.measure(&grid).unwrap();
    let catalog = kslab_core::diagnostics::TestFunction::catalog(&grid);
    let v0_norm = kslab_core::grid::w1r_norm(&cfg.chemicals(&grid).unwrap().unwrap().v0, cfg.experiment.r);
    let runs: Vec<_> = FAMILY_EPS.iter().map(|&e| simulate(&cfg, e, false).unwrap()).collect();

    let mut theta_min = f64::INFINITY;
    let mut monotone = true;
    let mut w1r_worst = 0.0f64;
    for run in &runs {
        assert_eq!(run.status, RunStatus::Completed);
        let sampled: Vec<DiagnosticsRecord> = positive(&run.records).into_iter().cloned().collect();
        let taxis = check_dampened_integrals(&sampled, cfg.lambda(), 0.1, 1.0, WINDOW)
            .into_iter()
            .find(|v| v.functional == "taxis_l1")
            .unwrap();
        theta_min = theta_min.min(taxis.fitted_exponent.unwrap_or(f64::NEG_INFINITY));
        for (k, phi) in catalog.iter().enumerate() {
            let paired = spec.pair(|x| phi.evaluate(&grid, x));
            let c = check_weak_continuity(&series(&run.records, |r| r.phi[k]), paired, f64::INFINITY);
            monotone &= c.monotone;
        }
        let early = positive(&run.records)
            .into_iter()
            .filter(|r| r.t <= 1e-3 * (1.0 + 1e-12))
            .filter_map(|r| r.w1r_dist_v)
            .fold(0.0f64, f64::max);
        w1r_worst = w1r_worst.max(early);
    }
    let mut uniform_worst = 1.0f64;
    for (k, phi) in catalog.iter().enumerate() {
        if phi.name() == "one" {
            continue;
        }
        let curves: Vec<Vec<(f64, f64)>> = runs
            .iter()
            .map(|run| {
                let start = run.records[0].phi[k];
                series(&run.records, |r| (r.phi[k] - start).abs())
            })
            .collect();
        let u = check_uniform_across_family(&curves, 2.0, 1e-9 * spec.total_mass());
        uniform_worst = uniform_worst.max(u.worst_ratio);
    }
    let pass = report(
        "continuity_at_zero",
        theta_min >= 0.1 && monotone && uniform_worst <= 2.0 && w1r_worst < 0.1 * v0_norm,
        &format!(
            "taxis exponent min {theta_min:.3} (>= 0.1); deviations monotone {monotone}; eps uniformity worst ratio {uniform_worst:.3} (<= 2); \
             W1r distance by t=1e-3 {w1r_worst:.3e} (< {:.3e})",
            0.1 * v0_norm
        ),
    );
    assert!(pass);
}

fn dichotomy_config(chi: f64, xi: f64, cells: usize, threshold: f64, t_end: f64, probe: Option<f64>) -> Config {
    let mut cfg = preset("dichotomy-sweep").unwrap();
    cfg.experiment.kind = kslab::ExperimentKind::Single;
    cfg.experiment.sweep = None;
    cfg.experiment.t_end = t_end;
    cfg.experiment.probe_time = probe;
    cfg.model.chi = chi;
    cfg.model.xi = xi;
    cfg.grid.cells = vec![cells, cells];
    cfg.control.blowup_threshold = Some(threshold);
    cfg
}

#[test]
fn dichotomy() {
    let eps = 1e-3;
    let max_linf = |records: &[DiagnosticsRecord]| records.iter().map(|r| r.linf_u).fold(0.0f64, f64::max);

    let sub = simulate(&dichotomy_config(5.0, 0.0, 128, 500.0, 1.0, None), eps, false).unwrap();
    let sub_ok = sub.status == RunStatus::Completed && max_linf(&sub.records) < 500.0;

    let sup = simulate(&dichotomy_config(50.0, 0.0, 128, 500.0, 1.0, None), eps, false).unwrap();
    let sup_ok = sup.status == RunStatus::BlowupDetected;

    let at = 1e-2;
    let linf_at = |cells| {
        let run = simulate(&dichotomy_config(50.0, 0.0, cells, f64::MAX, at, Some(at)), eps, false).unwrap();
        run.probe.unwrap().max()
    };
    let (coarse, fine) = (linf_at(64), linf_at(128));
    let growth = fine / coarse;

    // ζ = ξγ − χα = 60 − 50 ≥ 0
    let repelled = dichotomy_config(50.0, 60.0, 128, 500.0, 1.0, None);
    assert!(repelled.params().unwrap().derive().zeta >= 0.0);
    let rep = simulate(&repelled, eps, false).unwrap();
    let rep_ok = rep.status == RunStatus::Completed;

    let pass = report(
        "dichotomy",
        sub_ok && sup_ok && growth >= 4.0 && rep_ok,
        &format!(
            "chi=5 m=1: {} max Linf {:.1}; chi=50 m=1: {} at t={:?}; Linf(t={at}) 64^2 {coarse:.1} -> 128^2 {fine:.1} growth {growth:.2} (>= 4); \
             chi=50 xi=60: {} max Linf {:.1}",
            sub.status.name(),
            max_linf(&sub.records),
            sup.status.name(),
            sup.detection_time,
            rep.status.name(),
            max_linf(&rep.records)
        ),
    );
    assert!(pass);
}

#[test]
fn s3_radial() {
    let cfg = preset("s3-radial").unwrap();
    let grid = cfg.grid().unwrap();
    let params = cfg.params().unwrap();
    let scenario_cfg = cfg.scenario_config().unwrap();
    let spec: MeasureSpec = cfg.measure(&grid).unwrap();
    let scenario = kslab_core::model::classify_scenario(&params, &scenario_cfg, spec.has_density_only());
    assert_eq!(scenario, Scenario::S3);
    assert_eq!(grid.dim(), 3);
    let q = cfg.experiment.u_exponent;
    assert_eq!(q, 1.5);
    assert!(taxis_theta(scenario, q).is_some());
    let run = simulate(&cfg, cfg.experiment.eps[0], false).unwrap();
    let initial = run.records[0].lp(q).unwrap();
    let growth = positive(&run.records)
        .into_iter()
        .filter(|r| r.t <= 1.0 * (1.0 + 1e-12))
        .map(|r| r.lp(q).unwrap())
        .fold(0.0f64, f64::max)
        / initial;
    let pass = report(
        "s3_radial",
        run.status == RunStatus::Completed && growth <= 2.0,
        &format!(
            "status {}; max over (0,1] of ||u||_{q} / initial {growth:.4} (<= 2)",
            run.status.name()
        ),
    );
    assert!(pass);
}

#[test]
fn eps_family_cauchy() {
    let mut parts = Vec::new();
    let mut pass = true;
    for name in ["s1-smoke", "s2-smoke"] {
        let mut cfg = preset(name).unwrap();
        cfg.experiment.eps = FAMILY_EPS.to_vec();
        cfg.experiment.probe_time = Some(0.1);
        let probes: Vec<Field> = FAMILY_EPS
            .iter()
            .map(|&e| simulate(&cfg, e, false).unwrap().probe.unwrap())
            .collect();
        let d: Vec<f64> = probes.windows(2).map(|w| w[0].l1_distance(&w[1]).unwrap()).collect();
        let decreasing = d.windows(2).all(|w| w[1] < w[0]);
        pass &= decreasing;
        parts.push(format!("{name}: L1 distances at t=0.1 {} decreasing {decreasing}",
            d.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(" > ")
        ));
    }
    let pass = report("eps_family_cauchy", pass, &parts.join("; "));
    assert!(pass);
}
