//! Pass/fail verdicts computed from recorded series.
//!
//! Every verdict is recomputable from a run directory alone (config echo in
//! the manifest, `series.csv`, probe snapshots), which is what
//! `kslab verify` does.

use crate::config::Config;
use crate::error::Result;
use kslab_core::diagnostics::{
    check_dampened_integrals, check_decay, check_uniform_across_family, check_weak_continuity, claimed_lp_decay,
    default_p_set, taxis_theta, DiagnosticsRecord, TestFunction, EXPONENT_SLACK,
};
use kslab_core::grid::w1r_norm;
use kslab_core::model::classify_scenario;
use kslab_core::{Field, ModelParams, Scenario, ScenarioConfig};
use serde::{Deserialize, Serialize};

/// Relative mass drift tolerated over a run.
pub const MASS_TOLERANCE: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub functional: String,
    pub check: String,
    pub window: Option<[f64; 2]>,
    /// Fitted decay (or growth) rate where the check fits one.
    pub fitted_exponent: Option<f64>,
    pub bound: f64,
    /// The measured quantity compared against `bound`.
    pub value: Option<f64>,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Verdict {
    fn new(functional: impl Into<String>, check: &str, bound: f64, value: Option<f64>, pass: bool) -> Self {
        Self {
            functional: functional.into(),
            check: check.into(),
            window: None,
            fitted_exponent: None,
            bound,
            value,
            pass,
            note: None,
        }
    }

    fn failed(functional: impl Into<String>, check: &str, bound: f64, note: impl ToString) -> Self {
        let mut v = Self::new(functional, check, bound, None, false);
        v.note = Some(note.to_string());
        v
    }

    pub fn summary(&self) -> String {
        let num = |x: Option<f64>| x.map_or("-".to_string(), |x| format!("{x:.4e}"));
        format!(
            "{} {:<14} {:<20} value={} fitted={} bound={:.4e}{}",
            if self.pass { "PASS" } else { "FAIL" },
            self.functional,
            self.check,
            num(self.value),
            num(self.fitted_exponent),
            self.bound,
            self.note.as_ref().map_or(String::new(), |n| format!("  ({n})")),
        )
    }
}

/// Everything needed to judge one run besides its series.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub params: ModelParams,
    pub scenario_cfg: ScenarioConfig,
    pub scenario: Scenario,
    pub lambda: f64,
    pub window: [f64; 2],
    pub theta_min: f64,
    pub continuity_tol: f64,
    pub uniformity_factor: f64,
    pub w1r_fraction: f64,
    pub w1r_time: f64,
    pub lq_growth: f64,
    pub stabilization_window: [f64; 2],
    /// `(name, ⟨u₀, φ⟩, ‖Δφ‖_∞)` per catalog test function.
    pub pairings: Vec<(String, f64, f64)>,
    /// Mollification parameter of the run being judged.
    pub eps: f64,
    /// `‖v₀‖_{W^{1,r}}` of the unmollified data (parabolic runs).
    pub v0_norm: Option<f64>,
    pub p_set: Vec<f64>,
}

impl RunContext {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        let grid = cfg.grid()?;
        let params = cfg.params()?;
        let scenario_cfg = cfg.scenario_config()?;
        let spec = cfg.measure(&grid)?;
        let scenario = classify_scenario(&params, &scenario_cfg, spec.has_density_only());
        let pairings = TestFunction::catalog(&grid)
            .into_iter()
            .map(|phi| (phi.name(), spec.pair(|x| phi.evaluate(&grid, x)), phi.laplacian_sup(&grid)))
            .collect();
        let v0_norm = cfg.chemicals(&grid)?.map(|cd| w1r_norm(&cd.v0, scenario_cfg.r));
        let e = &cfg.experiment;
        Ok(Self {
            params,
            scenario_cfg,
            scenario,
            lambda: cfg.lambda(),
            window: e.window,
            theta_min: e.theta_min,
            continuity_tol: e.continuity_tol,
            uniformity_factor: e.uniformity_factor,
            w1r_fraction: e.w1r_fraction,
            w1r_time: e.w1r_time,
            lq_growth: e.lq_growth,
            stabilization_window: e.stabilization_window,
            pairings,
            eps: e.eps[0],
            v0_norm,
            p_set: e.p_set.clone().unwrap_or_else(|| default_p_set(&scenario_cfg)),
        })
    }

    /// The same context for a run with mollification parameter `eps`.
    pub fn for_eps(&self, eps: f64) -> Self {
        Self { eps, ..self.clone() }
    }

    fn window(&self) -> (f64, f64) {
        (self.window[0], self.window[1])
    }
}

fn positive_times(records: &[DiagnosticsRecord]) -> impl Iterator<Item = &DiagnosticsRecord> {
    records.iter().filter(|r| r.t > 0.0)
}

fn column(records: &[DiagnosticsRecord], f: impl Fn(&DiagnosticsRecord) -> f64) -> Vec<(f64, f64)> {
    positive_times(records).map(|r| (r.t, f(r))).collect()
}

fn decay_verdict(name: &str, series: &[(f64, f64)], window: (f64, f64), claimed: f64) -> Verdict {
    match check_decay(name, series, window, claimed) {
        Ok(d) => Verdict {
            functional: name.into(),
            check: "decay".into(),
            window: Some([window.0, window.1]),
            fitted_exponent: Some(d.fitted_exponent),
            bound: claimed,
            value: Some(d.envelope_ratio),
            pass: d.pass,
            note: Some(format!(
                "exponent_pass={} envelope_pass={} monotone_divergence={}",
                d.exponent_pass, d.envelope_pass, d.monotone_divergence
            )),
        },
        Err(e) => Verdict::failed(name, "decay", claimed, e),
    }
}

/// Verdicts for one run. `records` starts with the initial state at
/// `t = 0` followed by the sampled ladder.
pub fn evaluate_run(ctx: &RunContext, records: &[DiagnosticsRecord], phi_names: &[String]) -> Vec<Verdict> {
    let mut out = Vec::new();
    let m = ctx.scenario_cfg.m;
    let drift = records.iter().map(|r| (r.mass_u - m).abs() / m).fold(0.0, f64::max);
    out.push(Verdict::new("mass_u", "conservation", MASS_TOLERANCE, Some(drift), drift <= MASS_TOLERANCE));

    for (k, name) in phi_names.iter().enumerate() {
        let Some((_, paired, lap)) = ctx.pairings.iter().find(|(n, _, _)| n == name) else {
            continue;
        };
        let curve = column(records, |r| r.phi[k]);
        // mollifying by e^{εΔ} moves the pairing by at most ε·m·‖Δφ‖∞
        let tol = ctx.continuity_tol * m + ctx.eps * m * lap;
        let c = check_weak_continuity(&curve, *paired, tol);
        let mut v = Verdict::new(
            format!("phi_{name}"),
            "weak_continuity",
            c.tolerance,
            Some(c.final_deviation),
            c.pass,
        );
        v.note = Some(format!("monotone={}", c.monotone));
        out.push(v);
    }

    let window = ctx.window();
    let n = ctx.scenario_cfg.n;
    match ctx.scenario {
        Scenario::S2 | Scenario::S3 => {
            for &p in &ctx.p_set {
                let series = column(records, |r| r.lp(p).unwrap_or(f64::NAN).powf(p));
                out.push(decay_verdict(&format!("int_u^{p}"), &series, window, claimed_lp_decay(n, p)));
            }
            if ctx.scenario == Scenario::S3 {
                let q = ctx.scenario_cfg.u_exponent;
                let name = format!("lp_u_{q}");
                match (records.first().and_then(|r| r.lp(q)), records.iter().map(|r| r.lp(q)).collect::<Option<Vec<_>>>()) {
                    (Some(initial), Some(all)) if initial > 0.0 => {
                        let growth = all.iter().fold(0.0f64, |a, b| a.max(*b)) / initial;
                        out.push(Verdict::new(name, "bounded_growth", ctx.lq_growth, Some(growth), growth <= ctx.lq_growth));
                    }
                    _ => out.push(Verdict::failed(name, "bounded_growth", ctx.lq_growth, "exponent not recorded")),
                }
            }
            let theta = taxis_theta(ctx.scenario, ctx.scenario_cfg.u_exponent).unwrap_or(ctx.theta_min + EXPONENT_SLACK)
                - EXPONENT_SLACK;
            let sampled: Vec<DiagnosticsRecord> = positive_times(records).cloned().collect();
            let zeta = ctx.params.derive().zeta;
            if let Some(v) = check_dampened_integrals(&sampled, ctx.lambda, theta, zeta, window)
                .into_iter()
                .find(|v| v.functional == "taxis_l1")
            {
                out.push(integral_verdict(v));
            }
        }
        Scenario::S1 => {
            let energy = column(records, |r| r.energy_f);
            out.push(decay_verdict("energy_F", &energy, window, ctx.lambda));
            let sampled: Vec<DiagnosticsRecord> = positive_times(records).cloned().collect();
            let zeta = ctx.params.derive().zeta;
            for v in check_dampened_integrals(&sampled, ctx.lambda, ctx.theta_min, zeta, window) {
                out.push(integral_verdict(v));
            }
        }
        Scenario::Unclassified => {}
    }

    if let Some(v0) = ctx.v0_norm {
        let bound = ctx.w1r_fraction * v0;
        let early: Vec<f64> = positive_times(records)
            .filter(|r| r.t <= ctx.w1r_time * (1.0 + 1e-12))
            .filter_map(|r| r.w1r_dist_v)
            .collect();
        if early.is_empty() {
            out.push(Verdict::failed("w1r_dist_v", "early_distance", bound, "no sample at or before w1r_time"));
        } else {
            let worst = early.iter().fold(0.0f64, |a, b| a.max(*b));
            out.push(Verdict::new("w1r_dist_v", "early_distance", bound, Some(worst), worst < bound));
        }
    }
    out
}

fn integral_verdict(v: kslab_core::diagnostics::IntegralVerdict) -> Verdict {
    let check = if v.fitted_exponent.is_some() || v.functional == "taxis_l1" {
        "cumulative_exponent"
    } else {
        "dampened_integral"
    };
    Verdict {
        functional: v.functional,
        check: check.into(),
        window: Some([v.window.0, v.window.1]),
        fitted_exponent: v.fitted_exponent,
        bound: v.bound,
        value: if check == "dampened_integral" {
            Some(v.tail_increment_ratio)
        } else {
            Some(v.limit_estimate)
        },
        pass: v.pass,
        note: if v.vacuous {
            Some("vacuous".to_string())
        } else if check == "dampened_integral" {
            Some(format!(
                "whole-window ratio={:.3e} limit={:.4e}",
                v.max_increment_ratio, v.limit_estimate
            ))
        } else {
            None
        },
    }
}

/// One member of an eps family.
pub struct FamilyMember<'a> {
    pub eps: f64,
    pub records: &'a [DiagnosticsRecord],
    /// `u` at the probe time, when the run reached it.
    pub probe: Option<&'a Field>,
}

/// `L¹` distances between consecutive members at the probe time.
pub fn cauchy_distances(members: &[FamilyMember]) -> Option<Vec<f64>> {
    members
        .windows(2)
        .map(|w| w[0].probe?.l1_distance(w[1].probe?).ok())
        .collect()
}

/// Cross-eps verdicts: uniform weak-continuity deviations, Cauchy behavior
/// at the probe time and, for the parabolic planar case, an eps-uniform
/// `L²` bound away from zero.
pub fn evaluate_family(ctx: &RunContext, members: &[FamilyMember], phi_names: &[String]) -> Vec<Verdict> {
    let mut out = Vec::new();
    let m = ctx.scenario_cfg.m;
    for (k, name) in phi_names.iter().enumerate() {
        if name == "one" {
            continue;
        }
        let curves: Vec<Vec<(f64, f64)>> = members
            .iter()
            .map(|mem| {
                let start = mem.records.first().map_or(f64::NAN, |r| r.phi[k]);
                column(mem.records, |r| (r.phi[k] - start).abs())
            })
            .collect();
        let u = check_uniform_across_family(&curves, ctx.uniformity_factor, 1e-9 * m);
        let mut v = Verdict::new(
            format!("phi_{name}"),
            "eps_uniformity",
            u.factor,
            Some(u.worst_ratio),
            u.pass,
        );
        if u.worst_time.is_finite() {
            v.note = Some(format!("worst at t={:e}", u.worst_time));
        }
        out.push(v);
    }

    match cauchy_distances(members) {
        Some(d) if d.len() >= 2 => {
            let worst = d.windows(2).map(|w| w[1] / w[0]).fold(0.0f64, f64::max);
            let mut v = Verdict::new("u_probe", "eps_cauchy", 1.0, Some(worst), worst < 1.0);
            v.note = Some(format!("l1 distances {d:?}"));
            out.push(v);
        }
        Some(_) => {}
        None => out.push(Verdict::failed("u_probe", "eps_cauchy", 1.0, "some run did not reach the probe time")),
    }

    if ctx.scenario == Scenario::S1 && ctx.p_set.contains(&2.0) {
        let [lo, hi] = ctx.stabilization_window;
        let maxima: Vec<f64> = members
            .iter()
            .map(|mem| {
                positive_times(mem.records)
                    .filter(|r| r.t >= lo * (1.0 - 1e-12) && r.t <= hi * (1.0 + 1e-12))
                    .filter_map(|r| r.lp(2.0))
                    .fold(0.0f64, f64::max)
            })
            .collect();
        let max = maxima.iter().fold(0.0f64, |a, b| a.max(*b));
        let min = maxima.iter().fold(f64::INFINITY, |a, b| a.min(*b));
        let ratio = max / min;
        let mut v = Verdict::new("lp_u_2", "eps_bounded", ctx.uniformity_factor, Some(ratio), ratio <= ctx.uniformity_factor);
        v.window = Some(ctx.stabilization_window);
        out.push(v);
    }
    out
}
