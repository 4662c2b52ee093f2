//! IMEX finite-volume time stepping and the adaptive run loop.
//!
//! One step of size `dt` does, in order:
//!
//! 1. chemicals from `u` at the start of the step (backward Euler for the
//!    parabolic system; for the elliptic system they are already the
//!    Helmholtz solutions for the current `u`),
//! 2. explicit donor-cell drift of `u` along `−∇z` (or along `χ∇v` and
//!    `−ξ∇w` separately in the primitive formulation),
//! 3. backward-Euler diffusion of `u`,
//! 4. for the elliptic system, fresh Helmholtz solves for the new `u`.
//!
//! The drift update is written as `u_i(1 − dt·r_i) + dt·inflow_i/vol_i`,
//! where `r_i` is the total outgoing face rate of cell `i`; it is
//! nonnegative whenever `dt·max r_i ≤ 1`. Steps with `dt·max r_i` above
//! the configured safety factor are refused with
//! [`Error::CflViolation`] carrying the admissible step.

use crate::diagnostics::{DiagnosticsRecord, Recorder};
use crate::elliptic::HelmholtzProblem;
use crate::error::{invalid, Error, Result};
use crate::grid::{Field, Grid};
use crate::model::{ChemicalMode, ModelParams};
use crate::semigroup::implicit::backward_euler;
use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // std provides these methods when linked
use num_traits::Float;

/// Solution snapshot. `z = ξw − χv` is derived, never evolved on its own
/// between steps.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub u: Field,
    pub v: Field,
    pub w: Field,
    pub z: Field,
}

impl State {
    pub fn grid(&self) -> &Arc<Grid> {
        self.u.grid()
    }
}

/// Which form of the taxis terms drives `u`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Formulation {
    /// `−χ∇·(u∇v) + ξ∇·(u∇w)`, each flux upwinded on its own.
    Primitive,
    /// `∇·(u∇z)` with a single upwinded flux; the chemical pair is `(z, v)`.
    Transformed,
}

impl Formulation {
    pub fn name(self) -> &'static str {
        match self {
            Self::Primitive => "primitive",
            Self::Transformed => "transformed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    /// Largest admitted `dt·max_i r_i`, in `(0, 1]`.
    pub cfl_safety: f64,
    /// `‖u‖_∞` at which a run stops as blown up.
    pub blowup_threshold: f64,
    pub formulation: Formulation,
}

impl StepControl {
    /// Default blow-up threshold `10⁶·m/|Ω|`.
    pub fn default_threshold(mass: f64, measure: f64) -> f64 {
        1e6 * mass / measure
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt_init && self.dt_init <= self.dt_max && self.dt_max.is_finite()) {
            return Err(invalid(
                "dt",
                format!(
                    "need 0 < dt_min <= dt_init <= dt_max, got {}, {}, {}",
                    self.dt_min, self.dt_init, self.dt_max
                ),
            ));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(invalid("cfl_safety", format!("must lie in (0, 1], got {}", self.cfl_safety)));
        }
        if !(self.blowup_threshold > 0.0) {
            return Err(invalid(
                "blowup_threshold",
                format!("must be positive, got {}", self.blowup_threshold),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RunStatus {
    Completed,
    BlowupDetected,
    StepUnderflow,
}

impl RunStatus {
    pub fn name(self) -> &'static str {
        match self {
            Self::Completed => "completed",
            Self::BlowupDetected => "blowup_detected",
            Self::StepUnderflow => "step_underflow",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub status: RunStatus,
    pub final_state: State,
    pub series: Vec<DiagnosticsRecord>,
    /// States at the sample times, when requested.
    pub snapshots: Vec<State>,
    /// Time at which the blow-up threshold was first reached.
    pub detection_time: Option<f64>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

#[derive(Debug, Clone)]
struct EllipticChemicals {
    v: HelmholtzProblem,
    w: HelmholtzProblem,
    z: HelmholtzProblem,
}

/// Advances states of one grid under fixed parameters and controls.
#[derive(Debug, Clone)]
pub struct Stepper {
    grid: Arc<Grid>,
    params: ModelParams,
    control: StepControl,
    elliptic: Option<EllipticChemicals>,
}

impl Stepper {
    pub fn new(grid: Arc<Grid>, params: ModelParams, control: StepControl) -> Result<Self> {
        params.validate()?;
        control.validate()?;
        let elliptic = match params.mode {
            ChemicalMode::Parabolic => None,
            ChemicalMode::Elliptic => Some(EllipticChemicals {
                v: HelmholtzProblem::auto(grid.clone(), params.beta, params.alpha)?,
                w: HelmholtzProblem::auto(grid.clone(), params.delta, params.gamma)?,
                z: HelmholtzProblem::auto(grid.clone(), params.delta, 1.0)?,
            }),
        };
        Ok(Self {
            grid,
            params,
            control,
            elliptic,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn control(&self) -> &StepControl {
        &self.control
    }

    /// Builds the state at time `t`. The parabolic system needs `(v, w)`;
    /// the elliptic system computes them from `u` and rejects given ones.
    pub fn initial_state(&self, t: f64, u: Field, chemicals: Option<(Field, Field)>) -> Result<State> {
        u.check_same_grid(&Field::zeros(self.grid.clone()))?;
        if !u.is_finite() || u.min() < 0.0 {
            return Err(invalid("u", "initial density must be finite and nonnegative"));
        }
        match (self.params.mode, chemicals) {
            (ChemicalMode::Parabolic, Some((v, w))) => {
                u.check_same_grid(&v)?;
                u.check_same_grid(&w)?;
                if v.min() < 0.0 || w.min() < 0.0 || !v.is_finite() || !w.is_finite() {
                    return Err(invalid("chemicals", "v and w must be finite and nonnegative"));
                }
                let z = self.compose_z(&v, &w);
                Ok(State { t, u, v, w, z })
            }
            (ChemicalMode::Parabolic, None) => Err(Error::Misuse("the parabolic system needs initial v and w")),
            (ChemicalMode::Elliptic, Some(_)) => Err(Error::Misuse("the elliptic system determines v and w from u")),
            (ChemicalMode::Elliptic, None) => {
                let (v, w, z) = self.solve_elliptic(&u, None)?;
                Ok(State { t, u, v, w, z })
            }
        }
    }

    fn compose_z(&self, v: &Field, w: &Field) -> Field {
        let (chi, xi) = (self.params.chi, self.params.xi);
        w.combine(xi, v, -chi).expect("same grid")
    }

    fn solve_elliptic(&self, u: &Field, previous: Option<&State>) -> Result<(Field, Field, Field)> {
        let ell = self.elliptic.as_ref().expect("elliptic mode");
        let p = &self.params;
        let (v, _) = ell.v.solve_from(u, previous.map(|s| &s.v))?;
        let v = v.map(|x| x.max(0.0));
        let w = match self.control.formulation {
            Formulation::Primitive => ell.w.solve_from(u, previous.map(|s| &s.w))?.0,
            Formulation::Transformed => {
                let d = p.derive();
                let source = u.combine(d.zeta, &v, d.sigma)?;
                let (z, _) = ell.z.solve_from(&source, previous.map(|s| &s.z))?;
                if p.xi > 0.0 {
                    z.combine(1.0 / p.xi, &v, p.chi / p.xi)?
                } else {
                    ell.w.solve_from(u, previous.map(|s| &s.w))?.0
                }
            }
        };
        let w = w.map(|x| x.max(0.0));
        let z = self.compose_z(&v, &w);
        Ok((v, w, z))
    }

    fn parabolic_chemicals(&self, state: &State, dt: f64) -> (Field, Field, Field) {
        let p = &self.params;
        let g = &self.grid;
        let u = state.u.values();
        let implicit = |old: &Field, rate: f64, decay: f64| -> Field {
            let mut rhs: Vec<f64> = old.values().iter().zip(u).map(|(x, ui)| x + dt * rate * ui).collect();
            backward_euler(g, &mut rhs, dt, decay);
            Field::new(g.clone(), rhs).expect("finite")
        };
        let v = implicit(&state.v, p.alpha, p.beta);
        let w = match self.control.formulation {
            Formulation::Primitive => implicit(&state.w, p.gamma, p.delta),
            Formulation::Transformed => {
                // τz_t = Δz − δz + ζu + σv with the updated v
                let d = p.derive();
                let mut rhs: Vec<f64> = (0..g.len())
                    .map(|i| state.z.values()[i] + dt * (d.zeta * u[i] + d.sigma * v.values()[i]))
                    .collect();
                backward_euler(g, &mut rhs, dt, p.delta);
                let z = Field::from_vec(g.clone(), rhs);
                if p.xi > 0.0 {
                    z.combine(1.0 / p.xi, &v, p.chi / p.xi).expect("same grid")
                } else {
                    implicit(&state.w, p.gamma, p.delta)
                }
            }
        };
        let w = w.map(|x| x.max(0.0));
        let z = self.compose_z(&v, &w);
        (v, w, z)
    }

    /// Potentials `(c, φ)` whose drift velocity is `−c∇φ`.
    fn potentials<'a>(&self, v: &'a Field, w: &'a Field, z: &'a Field) -> Vec<(f64, &'a [f64])> {
        match self.control.formulation {
            Formulation::Transformed => vec![(1.0, z.values())],
            Formulation::Primitive => vec![(-self.params.chi, v.values()), (self.params.xi, w.values())],
        }
    }

    /// Outgoing rate `r_i` and inflow per cell for the given potentials.
    fn drift_rates(&self, u: &[f64], potentials: &[(f64, &[f64])]) -> (Vec<f64>, Vec<f64>) {
        let g = &self.grid;
        let mut out = vec![0.0; g.len()];
        let mut inflow = vec![0.0; g.len()];
        for &(c, phi) in potentials {
            if c == 0.0 {
                continue;
            }
            g.for_each_face(|l, r, t, _| {
                // signed volumetric rate from l to r
                let s = -c * t * (phi[r] - phi[l]);
                if s > 0.0 {
                    out[l] += s;
                    inflow[r] += s * u[l];
                } else if s < 0.0 {
                    out[r] -= s;
                    inflow[l] -= s * u[r];
                }
            });
        }
        for (o, vol) in out.iter_mut().zip(g.volumes()) {
            *o /= vol;
        }
        (out, inflow)
    }

    /// Largest step the drift of `state` admits, `cfl_safety / max_i r_i`
    /// (infinite without drift). For the parabolic system this uses the
    /// chemicals at the start of the step, so it is an estimate.
    pub fn admissible_dt(&self, state: &State) -> f64 {
        let pots = self.potentials(&state.v, &state.w, &state.z);
        let (out, _) = self.drift_rates(state.u.values(), &pots);
        let max_rate = out.iter().fold(0.0f64, |m, r| m.max(*r));
        if max_rate > 0.0 {
            self.control.cfl_safety / max_rate
        } else {
            f64::INFINITY
        }
    }

    /// One IMEX step. Fails with [`Error::CflViolation`] when `dt` is too
    /// large for the drift; the state is then unchanged.
    pub fn step(&self, state: &State, dt: f64) -> Result<State> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("dt", format!("must be positive and finite, got {dt}")));
        }
        let (v, w, z) = match self.params.mode {
            ChemicalMode::Parabolic => self.parabolic_chemicals(state, dt),
            ChemicalMode::Elliptic => (state.v.clone(), state.w.clone(), state.z.clone()),
        };
        let u = state.u.values();
        let pots = self.potentials(&v, &w, &z);
        let (rate, inflow) = self.drift_rates(u, &pots);
        let max_rate = rate.iter().fold(0.0f64, |m, r| m.max(*r));
        if dt * max_rate > self.control.cfl_safety {
            return Err(Error::CflViolation {
                admissible_dt: self.control.cfl_safety / max_rate,
            });
        }
        let g = &self.grid;
        let mut next: Vec<f64> = (0..g.len())
            .map(|i| u[i] * (1.0 - dt * rate[i]).max(0.0) + dt * inflow[i] / g.volume(i))
            .collect();
        backward_euler(g, &mut next, dt, 0.0);
        if let Some(i) = next.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InternalConsistency(format!(
                "u = {} at cell {i} after an admissible step",
                next[i]
            )));
        }
        let u = Field::from_vec(g.clone(), next);
        let t = state.t + dt;
        match self.params.mode {
            ChemicalMode::Parabolic => Ok(State { t, u, v, w, z }),
            ChemicalMode::Elliptic => {
                let (v, w, z) = self.solve_elliptic(&u, Some(state))?;
                Ok(State { t, u, v, w, z })
            }
        }
    }

    /// Adaptive run from `initial` to `t_end`, recording diagnostics at each
    /// sample time (`t_end` is always a sample). Steps land exactly on the
    /// sample times; the step size grows by at most 1.2× per accepted step.
    pub fn run(
        &self,
        initial: State,
        t_end: f64,
        sample_times: &[f64],
        recorder: &Recorder,
        keep_snapshots: bool,
    ) -> Result<RunOutcome> {
        let t0 = initial.t;
        if !(t_end > t0 && t_end.is_finite()) {
            return Err(invalid("t_end", format!("must exceed the initial time {t0}, got {t_end}")));
        }
        let mut samples: Vec<f64> = sample_times.to_vec();
        if samples.iter().any(|s| !(*s > t0 && *s <= t_end)) {
            return Err(invalid("sample_times", "must lie in (t0, t_end]"));
        }
        if samples.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("sample_times", "must be strictly increasing"));
        }
        if samples.last() != Some(&t_end) {
            samples.push(t_end);
        }
        let ctrl = &self.control;
        let mut outcome = RunOutcome {
            status: RunStatus::Completed,
            final_state: initial.clone(),
            series: Vec::with_capacity(samples.len()),
            snapshots: Vec::new(),
            detection_time: None,
            accepted_steps: 0,
            rejected_steps: 0,
        };
        let mut state = initial;
        let mut dt = ctrl.dt_init;
        for &target in &samples {
            while state.t < target {
                let remaining = target - state.t;
                let natural = dt.min(self.admissible_dt(&state));
                let mut trial = natural;
                if trial < ctrl.dt_min && trial < remaining {
                    outcome.status = RunStatus::StepUnderflow;
                    outcome.final_state = state;
                    return Ok(outcome);
                }
                let lands = trial >= remaining * (1.0 - 1e-12);
                if lands {
                    trial = remaining;
                }
                match self.step(&state, trial) {
                    Ok(mut next) => {
                        if lands {
                            next.t = target;
                        }
                        state = next;
                        outcome.accepted_steps += 1;
                        dt = (natural * 1.2).min(ctrl.dt_max);
                        if state.u.sup_norm() >= ctrl.blowup_threshold {
                            outcome.status = RunStatus::BlowupDetected;
                            outcome.detection_time = Some(state.t);
                            outcome.final_state = state;
                            return Ok(outcome);
                        }
                    }
                    Err(Error::CflViolation { admissible_dt }) => {
                        outcome.rejected_steps += 1;
                        dt = 0.95 * admissible_dt.min(trial);
                        if dt < ctrl.dt_min && dt < remaining {
                            outcome.status = RunStatus::StepUnderflow;
                            outcome.final_state = state;
                            return Ok(outcome);
                        }
                    }
                    Err(e) => return Err(e),
                }
            }
            outcome.series.push(recorder.record(&state));
            if keep_snapshots {
                outcome.snapshots.push(state.clone());
            }
        }
        outcome.final_state = state;
        Ok(outcome)
    }
}

/// `t_end·2^{−k}` for `k = levels−1, …, 0`, increasing.
pub fn geometric_ladder(t_end: f64, levels: usize) -> Vec<f64> {
    (0..levels).rev().map(|k| t_end * (-(k as f64)).exp2()).collect()
}

/// `count` equally spaced times ending at `t_end`, starting after `t0`.
pub fn uniform_ladder(t0: f64, t_end: f64, count: usize) -> Vec<f64> {
    (1..=count).map(|k| t0 + (t_end - t0) * k as f64 / count as f64).collect()
}

/// The default sample layout `t_end·2^{−k}`, `k = 0..=20`.
pub fn default_ladder(t_end: f64) -> Vec<f64> {
    geometric_ladder(t_end, 21)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::Recorder;
    use crate::grid::integrate;
    use crate::model::ScenarioConfig;

    fn control(formulation: Formulation) -> StepControl {
        StepControl {
            dt_init: 1e-4,
            dt_min: 1e-9,
            dt_max: 1e-2,
            cfl_safety: 0.5,
            blowup_threshold: 1e9,
            formulation,
        }
    }

    fn bump(g: &Arc<Grid>) -> Field {
        Field::from_fn(g.clone(), |[x, y]| 1.0 + (-((x - 0.3).powi(2) + (y - 0.6).powi(2)) * 40.0).exp())
    }

    #[test]
    fn elliptic_equilibrium_is_fixed() {
        let g = Arc::new(Grid::rectangle(1.0, 1.0, 16, 16).unwrap());
        let p = ModelParams::new(1.0, 2.0, 3.0, 1.5, 1.0, 0.5, ChemicalMode::Elliptic).unwrap();
        for f in [Formulation::Primitive, Formulation::Transformed] {
            let s = Stepper::new(g.clone(), p, control(f)).unwrap();
            let mut state = s.initial_state(0.0, Field::constant(g.clone(), 2.0), None).unwrap();
            assert!(state.v.values().iter().all(|x| (x - 4.0).abs() < 1e-12));
            for _ in 0..10 {
                state = s.step(&state, 1e-3).unwrap();
            }
            assert!(state.u.values().iter().all(|x| (x - 2.0).abs() < 1e-12));
        }
    }

    #[test]
    fn parabolic_step_conserves_mass_and_positivity() {
        let g = Arc::new(Grid::rectangle(1.0, 1.0, 24, 24).unwrap());
        let p = ModelParams::new(5.0, 1.0, 1.0, 1.0, 1.0, 1.0, ChemicalMode::Parabolic).unwrap();
        for f in [Formulation::Primitive, Formulation::Transformed] {
            let s = Stepper::new(g.clone(), p, control(f)).unwrap();
            let u = bump(&g);
            let m = integrate(&u);
            let mut state = s
                .initial_state(0.0, u, Some((bump(&g), Field::zeros(g.clone()))))
                .unwrap();
            for _ in 0..50 {
                state = s.step(&state, 1e-4).unwrap();
                assert!(state.u.min() >= 0.0 && state.v.min() >= 0.0 && state.w.min() >= 0.0);
            }
            assert!((integrate(&state.u) - m).abs() < 1e-13 * m);
            let z = state.w.combine(1.0, &state.v, -5.0).unwrap();
            assert!(z.sup_distance(&state.z).unwrap() < 1e-12 * (1.0 + z.sup_norm()));
        }
    }

    #[test]
    fn oversized_step_is_refused() {
        let g = Arc::new(Grid::rectangle(1.0, 1.0, 32, 32).unwrap());
        let p = ModelParams::new(50.0, 0.0, 1.0, 1.0, 1.0, 1.0, ChemicalMode::Elliptic).unwrap();
        let s = Stepper::new(g.clone(), p, control(Formulation::Transformed)).unwrap();
        let state = s.initial_state(0.0, bump(&g).map(|x| 30.0 * (x - 0.99).max(0.0)), None).unwrap();
        let admissible = s.admissible_dt(&state);
        assert!(admissible.is_finite());
        match s.step(&state, 2.0 * admissible) {
            Err(Error::CflViolation { admissible_dt }) => assert!((admissible_dt - admissible).abs() < 1e-12 * admissible),
            other => panic!("expected a retry signal, got {other:?}"),
        }
        assert!(s.step(&state, admissible).is_ok());
    }

    #[test]
    fn degenerate_horizon_completes_with_one_sample() {
        let g = Arc::new(Grid::rectangle(1.0, 1.0, 8, 8).unwrap());
        let p = ModelParams::new(0.0, 0.0, 1.0, 1.0, 1.0, 1.0, ChemicalMode::Elliptic).unwrap();
        let ctrl = control(Formulation::Primitive);
        let s = Stepper::new(g.clone(), p, ctrl).unwrap();
        let state = s.initial_state(0.0, Field::constant(g.clone(), 1.0), None).unwrap();
        let cfg = ScenarioConfig::new(2, 1.0, 1.0, 1.5, 2.0).unwrap();
        let rec = Recorder::new(p, cfg, g);
        let out = s.run(state, ctrl.dt_min, &[], &rec, false).unwrap();
        assert_eq!(out.status, RunStatus::Completed);
        assert_eq!(out.series.len(), 1);
        assert_eq!(out.series[0].t, ctrl.dt_min);
    }

    #[test]
    fn run_lands_on_samples() {
        let g = Arc::new(Grid::rectangle(1.0, 1.0, 8, 8).unwrap());
        let p = ModelParams::new(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, ChemicalMode::Elliptic).unwrap();
        let ctrl = control(Formulation::Transformed);
        let s = Stepper::new(g.clone(), p, ctrl).unwrap();
        let state = s.initial_state(0.0, bump(&g), None).unwrap();
        let rec = Recorder::new(p, ScenarioConfig::new(2, 1.0, 1.0, 1.5, 2.0).unwrap(), g);
        let ladder = geometric_ladder(0.1, 6);
        let out = s.run(state, 0.1, &ladder, &rec, true).unwrap();
        let times: Vec<f64> = out.series.iter().map(|r| r.t).collect();
        assert_eq!(times, ladder);
        assert_eq!(out.snapshots.len(), ladder.len());
    }

    #[test]
    fn ladders() {
        let l = geometric_ladder(1.0, 3);
        assert_eq!(l, vec![0.25, 0.5, 1.0]);
        assert_eq!(default_ladder(2.0).len(), 21);
        assert_eq!(uniform_ladder(0.0, 1.0, 4), vec![0.25, 0.5, 0.75, 1.0]);
    }
}
