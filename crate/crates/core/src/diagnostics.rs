//! Tracked functionals, decay-exponent fits and verdicts.
//!
//! Decay verdicts speak in rates: a functional `f(t) ∼ t^{−a}` has fitted
//! exponent `a`, and a bound `f ≤ C t^{−b}` passes when `a ≤ b + slack` or
//! when the dampened quantity `t^b f(t)` stays within a bounded envelope
//! without drifting upwards as `t → 0`.

use crate::error::{Error, Result};
use crate::grid::{
    cell_gradient_sq, face_sum, gradient_sq_integral, integrate, integrate_product, lp_integral, lp_norm,
    neumann_laplacian, w1r_norm, Field, Grid,
};
use crate::linalg::{least_squares_slope, pairwise_sum};
use crate::model::{derive, ModelParams, Scenario, ScenarioConfig};
use crate::stepper::State;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)] // std provides these methods when linked
use num_traits::Float;

/// Lower clamp for `u` inside `u ln u`.
pub const ENTROPY_FLOOR: f64 = 1e-300;
/// Engineering slack on fitted exponents.
pub const EXPONENT_SLACK: f64 = 0.15;
/// Largest max/min ratio of a dampened quantity counted as bounded.
pub const ENVELOPE_RATIO_LIMIT: f64 = 10.0;
/// Largest ratio of consecutive dyadic increments counted as geometric decay.
pub const INCREMENT_RATIO_LIMIT: f64 = 0.9;
/// Fewest samples a fit window may hold.
pub const MIN_FIT_SAMPLES: usize = 5;

/// Energy damping exponent `λ ∈ (0, 2/3)` with `λ > 2/r − 1`:
/// `max(0.01, 2/r − 1 + 0.05)`, or the midpoint of `(2/r − 1, 2/3)` when
/// `r` is so close to `6/5` that the first choice reaches `2/3`.
pub fn admissible_lambda(r: f64) -> f64 {
    let lower = 2.0 / r - 1.0;
    let candidate = (lower + 0.05).max(0.01);
    if candidate < 2.0 / 3.0 {
        candidate
    } else {
        0.5 * (lower + 2.0 / 3.0)
    }
}

/// Decay rate `n(p − 1)/2` of `∫u^p` in the elliptic scenarios.
pub fn claimed_lp_decay(n: u8, p: f64) -> f64 {
    f64::from(n) * (p - 1.0) / 2.0
}

/// Exponent of the taxis-integral bound `∫₀ᵗ‖u∇z‖_{L¹} ≤ Ct^θ` where the
/// analysis gives an explicit value; `None` for the parabolic planar case
/// (only some small `θ > 0` is asserted there) and unclassified runs.
pub fn taxis_theta(scenario: Scenario, u_exponent: f64) -> Option<f64> {
    match scenario {
        Scenario::S2 => Some(0.4),
        Scenario::S3 => Some((3.0 * u_exponent - 3.0) / (2.0 * u_exponent)),
        Scenario::S1 | Scenario::Unclassified => None,
    }
}

/// `{q̂, 2, 5/2, n, 3q̂/(4q̂ − 3)}`, sorted, duplicates removed.
pub fn default_p_set(cfg: &ScenarioConfig) -> Vec<f64> {
    let q = cfg.u_exponent;
    let mut ps = alloc::vec![q, 2.0, 2.5, f64::from(cfg.n), 3.0 * q / (4.0 * q - 3.0)];
    ps.sort_by(|a, b| a.total_cmp(b));
    ps.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    ps
}

/// Test functions `φ` for weak-continuity checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestFunction {
    One,
    /// `cos(π x_axis / L_axis)`; `cos(π r/R)` on radial grids.
    Cosine { axis: usize },
    /// `exp(−|x − c|²/(2 width²))` around the domain center.
    Gaussian { width: f64 },
}

impl TestFunction {
    pub fn name(&self) -> String {
        match self {
            Self::One => "one".into(),
            Self::Cosine { axis: 0 } => "cos_x".into(),
            Self::Cosine { axis: 1 } => "cos_y".into(),
            Self::Cosine { axis } => format!("cos_{axis}"),
            Self::Gaussian { .. } => "gauss".into(),
        }
    }

    /// Constants, one coordinate cosine per axis and a wide centered gaussian.
    pub fn catalog(grid: &Grid) -> Vec<TestFunction> {
        let mut out = alloc::vec![Self::One];
        for axis in 0..grid.axes() {
            out.push(Self::Cosine { axis });
        }
        let l = grid.extents().iter().copied().fold(f64::INFINITY, f64::min);
        out.push(Self::Gaussian { width: 0.4 * l });
        out
    }

    /// `φ(x)` at a point; on radial grids `x[0]` is the radius.
    pub fn evaluate(&self, grid: &Grid, x: [f64; 2]) -> f64 {
        let ext = grid.extents();
        match *self {
            Self::One => 1.0,
            Self::Cosine { axis } => (PI * x[axis] / ext[axis]).cos(),
            Self::Gaussian { width } => {
                let d2 = if grid.geometry().is_radial() {
                    x[0] * x[0]
                } else {
                    (0..grid.axes()).map(|a| (x[a] - 0.5 * ext[a]).powi(2)).sum()
                };
                (-d2 / (2.0 * width * width)).exp()
            }
        }
    }

    /// `‖Δφ‖_∞` on the domain of `grid`.
    pub fn laplacian_sup(&self, grid: &Grid) -> f64 {
        match *self {
            Self::One => 0.0,
            // radially, Δcos(kr) → −n·k² at the origin
            Self::Cosine { axis } if grid.geometry().is_radial() => {
                f64::from(grid.dim()) * (PI / grid.extents()[axis]).powi(2)
            }
            Self::Cosine { axis } => (PI / grid.extents()[axis]).powi(2),
            // Δφ = φ(|x|²/w⁴ − n/w²) peaks in modulus at the center
            Self::Gaussian { width } => f64::from(grid.dim()) / (width * width),
        }
    }

    /// Samples `φ` at cell centers.
    pub fn sample(&self, grid: &Arc<Grid>) -> Field {
        Field::from_fn(grid.clone(), |x| self.evaluate(grid, x))
    }
}

/// One time sample of every tracked functional.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub mass_u: f64,
    pub mass_v: f64,
    pub mass_w: f64,
    pub linf_u: f64,
    /// `∫u ln u`.
    pub entropy: f64,
    /// `½∫|∇z|²`.
    pub dirichlet_z: f64,
    /// `ζ·entropy + dirichlet_z`.
    pub energy_f: f64,
    /// `∫|∇u|²/u`, evaluated as `4∫|∇√u|²`.
    pub fisher_u: f64,
    pub lap_z_sq: f64,
    /// `∫|∇z|⁴`.
    pub grad_z_l4: f64,
    /// `‖u∇z‖_{L¹}`.
    pub taxis_l1: f64,
    pub w1r_v: f64,
    pub w1r_w: f64,
    /// `(p, ‖u‖_p)` for each configured exponent.
    pub lp_u: Vec<(f64, f64)>,
    /// `∫uφ` for each configured test function, in recorder order.
    pub phi: Vec<f64>,
    /// `W^{1,r}` distance of `v`, `w` to the reference chemicals, if set.
    pub w1r_dist_v: Option<f64>,
    pub w1r_dist_w: Option<f64>,
}

impl DiagnosticsRecord {
    /// `‖u‖_p` for a configured `p`.
    pub fn lp(&self, p: f64) -> Option<f64> {
        self.lp_u.iter().find(|(q, _)| (q - p).abs() <= 1e-12 * p).map(|(_, v)| *v)
    }
}

/// Computes [`DiagnosticsRecord`]s for states of one configuration.
#[derive(Debug, Clone)]
pub struct Recorder {
    params: ModelParams,
    cfg: ScenarioConfig,
    p_set: Vec<f64>,
    tests: Vec<(TestFunction, Field)>,
    reference: Option<(Field, Field)>,
}

impl Recorder {
    /// Default exponent set and the full test-function catalog of `grid`.
    pub fn new(params: ModelParams, cfg: ScenarioConfig, grid: Arc<Grid>) -> Self {
        let tests = TestFunction::catalog(&grid)
            .into_iter()
            .map(|f| (f, f.sample(&grid)))
            .collect();
        Self {
            params,
            cfg,
            p_set: default_p_set(&cfg),
            tests,
            reference: None,
        }
    }

    pub fn with_p_set(mut self, p_set: Vec<f64>) -> Self {
        self.p_set = p_set;
        self
    }

    /// Chemicals to measure `W^{1,r}` distances against (typically the
    /// mollified initial data).
    pub fn with_reference(mut self, v: Field, w: Field) -> Self {
        self.reference = Some((v, w));
        self
    }

    pub fn p_set(&self) -> &[f64] {
        &self.p_set
    }

    pub fn test_functions(&self) -> impl Iterator<Item = &TestFunction> {
        self.tests.iter().map(|(f, _)| f)
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn record(&self, state: &State) -> DiagnosticsRecord {
        let zeta = derive(&self.params).zeta;
        let r = self.cfg.r;
        let u = &state.u;
        let g = u.grid();
        let entropy = entropy(u);
        let dirichlet_z = 0.5 * gradient_sq_integral(&state.z);
        let grad_z = cell_gradient_sq(&state.z);
        let phi = self
            .tests
            .iter()
            .map(|(_, f)| integrate_product(u, f).unwrap_or(f64::NAN))
            .collect();
        let (w1r_dist_v, w1r_dist_w) = match &self.reference {
            Some((v0, w0)) => (
                state.v.combine(1.0, v0, -1.0).ok().map(|d| w1r_norm(&d, r)),
                state.w.combine(1.0, w0, -1.0).ok().map(|d| w1r_norm(&d, r)),
            ),
            None => (None, None),
        };
        DiagnosticsRecord {
            t: state.t,
            mass_u: integrate(u),
            mass_v: integrate(&state.v),
            mass_w: integrate(&state.w),
            linf_u: u.sup_norm(),
            entropy,
            dirichlet_z,
            energy_f: zeta * entropy + dirichlet_z,
            fisher_u: fisher_information(u),
            lap_z_sq: lp_integral(&neumann_laplacian(&state.z), 2.0),
            grad_z_l4: pairwise_sum(g.len(), |i| grad_z[i] * grad_z[i] * g.volume(i)),
            taxis_l1: pairwise_sum(g.len(), |i| u.values()[i].abs() * grad_z[i].sqrt() * g.volume(i)),
            w1r_v: w1r_norm(&state.v, r),
            w1r_w: w1r_norm(&state.w, r),
            lp_u: self.p_set.iter().map(|&p| (p, lp_norm(u, p))).collect(),
            phi,
            w1r_dist_v,
            w1r_dist_w,
        }
    }
}

/// One-off [`Recorder::record`] with the default exponents and catalog.
pub fn record(state: &State, params: &ModelParams, cfg: &ScenarioConfig) -> DiagnosticsRecord {
    Recorder::new(*params, *cfg, state.grid().clone()).record(state)
}

/// `∫u ln u` with `u` clamped below at [`ENTROPY_FLOOR`]; cells with
/// `u ≤ 0` contribute nothing.
pub fn entropy(u: &Field) -> f64 {
    let g = u.grid();
    pairwise_sum(g.len(), |i| {
        let x = u.values()[i];
        if x > 0.0 {
            x * x.max(ENTROPY_FLOOR).ln() * g.volume(i)
        } else {
            0.0
        }
    })
}

/// `4∫|∇√u|²` from face differences of `√u`.
pub fn fisher_information(u: &Field) -> f64 {
    let roots: Vec<f64> = u.values().iter().map(|x| x.max(0.0).sqrt()).collect();
    4.0 * face_sum(u.grid(), |l, r| {
        let d = roots[r] - roots[l];
        d * d
    })
}

fn window_points(series: &[(f64, f64)], window: (f64, f64)) -> Vec<(f64, f64)> {
    let (lo, hi) = window;
    let tol = 1e-12;
    series
        .iter()
        .copied()
        .filter(|(t, _)| *t >= lo * (1.0 - tol) && *t <= hi * (1.0 + tol))
        .collect()
}

/// Least-squares slope of `ln value` against `ln t` over the samples with
/// `t` in `window` (inclusive).
pub fn fit_decay_exponent(series: &[(f64, f64)], window: (f64, f64)) -> Result<f64> {
    let pts = window_points(series, window);
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(Error::InvalidSeries("fewer than five samples in the fit window"));
    }
    if pts.iter().any(|(t, v)| !(*t > 0.0 && *v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidSeries("nonpositive or non-finite value in the fit window"));
    }
    let logs: Vec<(f64, f64)> = pts.iter().map(|(t, v)| (t.ln(), v.ln())).collect();
    Ok(least_squares_slope(&logs))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayVerdict {
    pub functional: String,
    pub window: (f64, f64),
    /// Fitted decay rate `−d ln f / d ln t`.
    pub fitted_exponent: f64,
    /// Claimed rate `b` in `f ≤ C t^{−b}`.
    pub claimed_exponent_bound: f64,
    /// `sup t^b f` over the window.
    pub envelope_constant: f64,
    /// `sup t^b f / inf t^b f` over the window.
    pub envelope_ratio: f64,
    /// Whether `t^b f` keeps growing towards the small end of the window.
    pub monotone_divergence: bool,
    pub exponent_pass: bool,
    pub envelope_pass: bool,
    pub pass: bool,
}

/// Checks `f ≤ C t^{−claimed}` on `window` in both modes: fitted rate
/// within [`EXPONENT_SLACK`] of the claim, or `t^{claimed}·f` with
/// max/min ratio at most [`ENVELOPE_RATIO_LIMIT`] and no divergence on the
/// small-`t` half of the window.
pub fn check_decay(name: &str, series: &[(f64, f64)], window: (f64, f64), claimed: f64) -> Result<DecayVerdict> {
    let fitted = -fit_decay_exponent(series, window)?;
    let mut pts = window_points(series, window);
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let damped: Vec<(f64, f64)> = pts.iter().map(|(t, v)| (*t, t.powf(claimed) * v)).collect();
    let max = damped.iter().fold(f64::NEG_INFINITY, |m, (_, v)| m.max(*v));
    let min = damped.iter().fold(f64::INFINITY, |m, (_, v)| m.min(*v));
    let half = &damped[..(damped.len() + 1) / 2];
    let logs: Vec<(f64, f64)> = half.iter().map(|(t, v)| (t.ln(), v.ln())).collect();
    let rising_towards_zero = half.windows(2).all(|w| w[0].1 >= w[1].1);
    let monotone_divergence = rising_towards_zero && least_squares_slope(&logs) < -EXPONENT_SLACK;
    let envelope_ratio = max / min;
    let exponent_pass = fitted <= claimed + EXPONENT_SLACK;
    let envelope_pass = envelope_ratio <= ENVELOPE_RATIO_LIMIT && !monotone_divergence;
    Ok(DecayVerdict {
        functional: name.into(),
        window,
        fitted_exponent: fitted,
        claimed_exponent_bound: claimed,
        envelope_constant: max,
        envelope_ratio,
        monotone_divergence,
        exponent_pass,
        envelope_pass,
        pass: exponent_pass || envelope_pass,
    })
}

/// Verdict on a time-weighted cumulative integral near `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralVerdict {
    pub functional: String,
    pub window: (f64, f64),
    /// Trapezoidal increments over consecutive samples, largest `t` first.
    pub increments: Vec<f64>,
    /// Largest ratio of an increment to the one before it (towards `t = 0`)
    /// over the whole window.
    pub max_increment_ratio: f64,
    /// The same over the near-zero half of the window (`t` below the
    /// geometric midpoint); this is what `pass` tests.
    pub tail_increment_ratio: f64,
    /// Accumulated integral over the window plus a geometric tail estimate
    /// for the part below it.
    pub limit_estimate: f64,
    /// Fitted growth exponent of the cumulative integral, when that is the
    /// criterion.
    pub fitted_exponent: Option<f64>,
    /// Ratio limit, or the required minimum exponent.
    pub bound: f64,
    /// True when the functional carries a zero weight and is not tested.
    pub vacuous: bool,
    pub pass: bool,
}

fn increments(series: &[(f64, f64)]) -> Vec<f64> {
    series
        .windows(2)
        .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
        .rev()
        .collect()
}

fn increment_verdict(name: &str, weighted: &[(f64, f64)], window: (f64, f64), vacuous: bool) -> IntegralVerdict {
    let pts = window_points(weighted, window);
    let inc = increments(&pts);
    let total: f64 = inc.iter().sum();
    let negligible = 1e-14 * total.abs().max(f64::MIN_POSITIVE);
    // upper ends of the increments, largest first
    let ends: Vec<f64> = pts.iter().skip(1).map(|p| p.0).rev().collect();
    let midpoint = (window.0 * window.1).sqrt();
    let ratio_over = |from: f64| {
        inc.windows(2)
            .zip(ends.iter())
            .filter(|(_, &end)| end <= from * (1.0 + 1e-12))
            .filter(|(w, _)| w[0].abs() > negligible || w[1].abs() > negligible)
            .map(|(w, _)| w[1] / w[0])
            .fold(0.0f64, f64::max)
    };
    let max_ratio = ratio_over(f64::INFINITY);
    let tail_ratio = ratio_over(midpoint);
    let enough = inc.len() >= 3;
    let last_ratio = match inc.len() {
        n if n >= 2 && inc[n - 2] != 0.0 => inc[n - 1] / inc[n - 2],
        _ => 0.0,
    };
    let tail = match inc.last() {
        Some(&last) if last_ratio < 1.0 => last * last_ratio / (1.0 - last_ratio),
        Some(_) => f64::INFINITY,
        None => 0.0,
    };
    IntegralVerdict {
        functional: name.into(),
        window,
        increments: inc,
        max_increment_ratio: max_ratio,
        tail_increment_ratio: tail_ratio,
        limit_estimate: total + tail,
        fitted_exponent: None,
        bound: INCREMENT_RATIO_LIMIT,
        vacuous,
        pass: vacuous || (tail_ratio <= INCREMENT_RATIO_LIMIT && enough),
    }
}

/// Cumulative `∫₀ᵗ f ds` at the sample times by the trapezoidal rule,
/// starting with the rectangle `t₀·f(t₀)` below the first sample.
pub fn cumulative_integral(series: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(series.len());
    let mut acc = match series.first() {
        Some((t, v)) => t * v,
        None => return out,
    };
    out.push((series[0].0, acc));
    for w in series.windows(2) {
        acc += 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0);
        out.push((w[1].0, acc));
    }
    out
}

/// The dissipation verdicts near `t = 0`: increments of `∫ζ s^λ fisher`,
/// `∫s^λ |Δz|²` and `∫s^{2λ}|∇z|⁴` decay geometrically along the ladder
/// in the lower half of `window`; `∫₀ᵗ‖u∇z‖_{L¹}` fits a growth exponent `≥ theta_min`.
pub fn check_dampened_integrals(
    series: &[DiagnosticsRecord],
    lambda: f64,
    theta_min: f64,
    zeta: f64,
    window: (f64, f64),
) -> Vec<IntegralVerdict> {
    let weighted = |weight: f64, f: fn(&DiagnosticsRecord) -> f64| -> Vec<(f64, f64)> {
        series.iter().map(|r| (r.t, r.t.powf(weight) * f(r))).collect()
    };
    let mut out = alloc::vec![
        increment_verdict("fisher_u", &weighted(lambda, |r| r.fisher_u), window, zeta == 0.0),
        increment_verdict("lap_z_sq", &weighted(lambda, |r| r.lap_z_sq), window, false),
        increment_verdict("grad_z_l4", &weighted(2.0 * lambda, |r| r.grad_z_l4), window, false),
    ];
    let taxis: Vec<(f64, f64)> = series.iter().map(|r| (r.t, r.taxis_l1)).collect();
    let cumulative = cumulative_integral(&taxis);
    let vacuous = cumulative.iter().all(|(_, c)| *c == 0.0);
    let fitted = if vacuous { None } else { fit_decay_exponent(&cumulative, window).ok() };
    out.push(IntegralVerdict {
        functional: "taxis_l1".into(),
        window,
        increments: increments(&window_points(&taxis, window)),
        max_increment_ratio: f64::NAN,
        tail_increment_ratio: f64::NAN,
        limit_estimate: cumulative.last().map_or(0.0, |c| c.1),
        fitted_exponent: fitted,
        bound: theta_min,
        vacuous,
        pass: vacuous || fitted.is_some_and(|th| th >= theta_min),
    });
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuityVerdict {
    /// `(t, |∫u(t)φ − ⟨u₀, φ⟩|)`, largest `t` first.
    pub deviations: Vec<(f64, f64)>,
    /// Deviations never grow as `t` decreases (up to rounding slack).
    pub monotone: bool,
    pub final_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Checks that `|∫u(t)φ − ⟨u₀, φ⟩|` decreases as `t` decreases through the
/// series and ends below `tol` at the smallest sampled time.
pub fn check_weak_continuity(series: &[(f64, f64)], phi_at_u0: f64, tol: f64) -> ContinuityVerdict {
    let mut pts: Vec<(f64, f64)> = series.iter().map(|(t, v)| (*t, (v - phi_at_u0).abs())).collect();
    pts.sort_by(|a, b| b.0.total_cmp(&a.0));
    let scale = series.iter().fold(phi_at_u0.abs(), |m, (_, v)| m.max(v.abs()));
    let slack = 1e-11 * scale.max(tol).max(f64::MIN_POSITIVE);
    let monotone = pts.windows(2).all(|w| w[1].1 <= w[0].1 + slack);
    let final_deviation = pts.last().map_or(0.0, |p| p.1);
    ContinuityVerdict {
        deviations: pts,
        monotone,
        final_deviation,
        tolerance: tol,
        pass: monotone && final_deviation <= tol,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniformityVerdict {
    /// Largest ratio between family members at a common sample time.
    pub worst_ratio: f64,
    pub worst_time: f64,
    pub factor: f64,
    pub pass: bool,
}

/// Checks that curves sampled at common times agree within `factor`
/// (max/min) at every time where some curve exceeds `floor`.
pub fn check_uniform_across_family(curves: &[Vec<(f64, f64)>], factor: f64, floor: f64) -> UniformityVerdict {
    let mut worst_ratio = 1.0f64;
    let mut worst_time = f64::NAN;
    if let Some(first) = curves.first() {
        for (k, (t, _)) in first.iter().enumerate() {
            let values: Vec<f64> = curves.iter().filter_map(|c| c.get(k).map(|p| p.1.abs())).collect();
            let max = values.iter().fold(0.0f64, |m, v| m.max(*v));
            if max <= floor {
                continue;
            }
            let min = values.iter().fold(f64::INFINITY, |m, v| m.min(*v)).max(floor);
            let ratio = max / min;
            if ratio > worst_ratio {
                worst_ratio = ratio;
                worst_time = *t;
            }
        }
    }
    UniformityVerdict {
        worst_ratio,
        worst_time,
        factor,
        pass: worst_ratio <= factor,
    }
}
