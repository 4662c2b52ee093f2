//! The discrete Neumann heat semigroup `e^{t(Δ_h − κ)}`.
//!
//! Rectangles and intervals use the cosine eigenbasis of `Δ_h`, so the
//! evolution is exact up to rounding. Radial grids have no such basis and
//! use backward-Euler substeps with step doubling and Richardson
//! extrapolation until two successive extrapolants agree to the requested
//! tolerance.

pub(crate) mod implicit;

use crate::error::{invalid, Error, Result};
use crate::grid::{lp_norm, Field, Grid};
use crate::linalg::least_squares_slope;
use crate::transform::CosineBasis;
use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;
#[allow(unused_imports)] // std provides these methods when linked
use num_traits::Float;

/// Relative size below which negative rounding noise of the spectral path
/// is clamped to zero.
pub const SPECTRAL_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SemigroupMethod {
    SpectralCosine,
    ImplicitSteps { tolerance: f64, max_substeps: usize },
}

impl SemigroupMethod {
    pub const DEFAULT_IMPLICIT: Self = Self::ImplicitSteps {
        tolerance: 1e-6,
        max_substeps: 1 << 16,
    };
}

#[derive(Debug, Clone)]
enum Engine {
    Spectral(CosineBasis),
    Implicit { tolerance: f64, max_substeps: usize },
}

/// A semigroup evaluator bound to one grid. Immutable once built.
#[derive(Debug, Clone)]
pub struct SemigroupPlan {
    grid: Arc<Grid>,
    engine: Engine,
}

/// Side information from one [`SemigroupPlan::apply_with_report`] call.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ApplyReport {
    /// `Σ |clamped value|·vol` removed from rounding-level negatives.
    pub clamped_mass: f64,
    /// Backward-Euler substeps used (0 on the spectral path).
    pub substeps: usize,
    /// Whether step doubling met its tolerance before the substep cap.
    pub converged: bool,
}

impl SemigroupPlan {
    /// Spectral on tensor grids, implicit substeps on radial grids.
    pub fn new(grid: Arc<Grid>) -> Self {
        match CosineBasis::for_grid(&grid) {
            Some(basis) => Self {
                grid,
                engine: Engine::Spectral(basis),
            },
            None => Self::implicit(grid, SemigroupMethod::DEFAULT_IMPLICIT).expect("default is valid"),
        }
    }

    pub fn with_method(grid: Arc<Grid>, method: SemigroupMethod) -> Result<Self> {
        match method {
            SemigroupMethod::SpectralCosine => {
                let basis = CosineBasis::for_grid(&grid)
                    .ok_or(Error::Misuse("the cosine basis needs an interval or rectangle grid"))?;
                Ok(Self {
                    grid,
                    engine: Engine::Spectral(basis),
                })
            }
            implicit_method => Self::implicit(grid, implicit_method),
        }
    }

    fn implicit(grid: Arc<Grid>, method: SemigroupMethod) -> Result<Self> {
        let SemigroupMethod::ImplicitSteps {
            tolerance,
            max_substeps,
        } = method
        else {
            unreachable!()
        };
        if !(tolerance > 0.0) {
            return Err(invalid("tolerance", format!("must be positive, got {tolerance}")));
        }
        if max_substeps == 0 {
            return Err(invalid("max_substeps", "must be at least 1"));
        }
        Ok(Self {
            grid,
            engine: Engine::Implicit {
                tolerance,
                max_substeps,
            },
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn method(&self) -> SemigroupMethod {
        match self.engine {
            Engine::Spectral(_) => SemigroupMethod::SpectralCosine,
            Engine::Implicit {
                tolerance,
                max_substeps,
            } => SemigroupMethod::ImplicitSteps {
                tolerance,
                max_substeps,
            },
        }
    }

    /// `e^{−κt} e^{tΔ_h} f`.
    pub fn apply(&self, f: &Field, t: f64, kappa: f64) -> Result<Field> {
        self.apply_with_report(f, t, kappa).map(|(out, _)| out)
    }

    pub fn apply_with_report(&self, f: &Field, t: f64, kappa: f64) -> Result<(Field, ApplyReport)> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(invalid("t", format!("must be finite and >= 0, got {t}")));
        }
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(invalid("kappa", format!("must be finite and >= 0, got {kappa}")));
        }
        if !f.same_grid(&Field::zeros(self.grid.clone())) {
            return Err(Error::GridMismatch);
        }
        if t == 0.0 {
            return Ok((
                f.clone(),
                ApplyReport {
                    converged: true,
                    ..ApplyReport::default()
                },
            ));
        }
        match &self.engine {
            Engine::Spectral(basis) => self.apply_spectral(basis, f, t, kappa),
            Engine::Implicit {
                tolerance,
                max_substeps,
            } => Ok(self.apply_implicit(f, t, kappa, *tolerance, *max_substeps)),
        }
    }

    fn apply_spectral(&self, basis: &CosineBasis, f: &Field, t: f64, kappa: f64) -> Result<(Field, ApplyReport)> {
        let nonnegative = f.min() >= 0.0;
        let mut values = f.values().to_vec();
        basis.apply(&mut values, |lambda| (-(lambda + kappa) * t).exp());
        let mut report = ApplyReport {
            converged: true,
            ..ApplyReport::default()
        };
        if nonnegative {
            let floor = -SPECTRAL_CLAMP * values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (i, v) in values.iter_mut().enumerate() {
                if *v < 0.0 {
                    if *v < floor {
                        return Err(Error::InternalConsistency(format!(
                            "spectral semigroup produced {v:e} at cell {i} from nonnegative data"
                        )));
                    }
                    report.clamped_mass += -*v * self.grid.volume(i);
                    *v = 0.0;
                }
            }
        }
        Ok((Field::from_vec(self.grid.clone(), values), report))
    }

    fn apply_implicit(&self, f: &Field, t: f64, kappa: f64, tolerance: f64, max_substeps: usize) -> (Field, ApplyReport) {
        let march = |n: usize| -> Vec<f64> {
            let dt = t / n as f64;
            let mut values = f.values().to_vec();
            for _ in 0..n {
                implicit::backward_euler(&self.grid, &mut values, dt, kappa);
            }
            values
        };
        // Richardson extrapolation of backward Euler, 2·u_{2n} − u_n, is
        // second order; successive extrapolants give the error estimate.
        let extrapolate = |fine: &[f64], coarse: &[f64]| -> Vec<f64> {
            fine.iter().zip(coarse).map(|(a, b)| 2.0 * a - b).collect()
        };
        let mut n = 4.min(max_substeps);
        let mut coarse = march(n);
        let mut best: Option<Vec<f64>> = None;
        let mut fine_plain = coarse.clone();
        let mut converged = false;
        while 2 * n <= max_substeps {
            let fine = march(2 * n);
            let estimate = extrapolate(&fine, &coarse);
            n *= 2;
            if let Some(prev) = &best {
                let scale = estimate.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
                let diff = estimate
                    .iter()
                    .zip(prev)
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                if diff <= tolerance * scale {
                    converged = true;
                }
            }
            best = Some(estimate);
            fine_plain = fine.clone();
            coarse = fine;
            if converged {
                break;
            }
        }
        let mut values = best.unwrap_or(fine_plain.clone());
        // the extrapolant can undershoot in far tails; the plain backward
        // Euler value is nonnegative there
        let mut clamped_mass = 0.0;
        if values.iter().any(|v| *v < 0.0) {
            for (i, v) in values.iter_mut().enumerate() {
                if *v < 0.0 {
                    clamped_mass += (fine_plain[i] - *v) * self.grid.volume(i);
                    *v = fine_plain[i];
                }
            }
        }
        let report = ApplyReport {
            clamped_mass,
            substeps: n,
            converged,
        };
        (Field::from_vec(self.grid.clone(), values), report)
    }
}

/// Free-function form of [`SemigroupPlan::apply`].
pub fn apply(plan: &SemigroupPlan, f: &Field, t: f64, kappa: f64) -> Result<Field> {
    plan.apply(f, t, kappa)
}

/// Unit mass concentrated in the cell containing the domain center (the
/// innermost cell on radial grids).
pub fn point_mass(grid: &Arc<Grid>) -> Field {
    let cell = if grid.geometry().is_radial() {
        0
    } else {
        grid.index(grid.nx() / 2, grid.ny() / 2)
    };
    let mut f = Field::zeros(grid.clone());
    f.values_mut()[cell] = 1.0 / grid.volume(cell);
    f
}

/// Fits the exponent of `‖e^{tΔ}f‖_q / ‖e^{tΔ}f‖_p ∼ t^s` for a near-point
/// mass `f` over a geometric ladder of `samples` times in `window`.
///
/// For the heat kernel this ratio scales like `t^{−(n/2)(1/p − 1/q)}`,
/// the `L^p → L^q` smoothing rate; `p = q` gives exactly zero.
pub fn measure_smoothing_rate_in(
    plan: &SemigroupPlan,
    p: f64,
    q: f64,
    window: (f64, f64),
    samples: usize,
) -> Result<f64> {
    if !(p >= 1.0 && q >= p) {
        return Err(invalid("p", format!("need 1 <= p <= q, got p={p}, q={q}")));
    }
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo) || samples < 2 {
        return Err(invalid("window", "need 0 < t_lo < t_hi and at least two samples"));
    }
    let f = point_mass(plan.grid());
    let ratio = (hi / lo).powf(1.0 / (samples - 1) as f64);
    let mut points = Vec::with_capacity(samples);
    for k in 0..samples {
        let t = lo * ratio.powi(k as i32);
        let evolved = plan.apply(&f, t, 0.0)?;
        let value = if p == q { 1.0 } else { lp_norm(&evolved, q) / lp_norm(&evolved, p) };
        points.push((t.ln(), value.ln()));
    }
    Ok(least_squares_slope(&points))
}

/// [`measure_smoothing_rate_in`] on the window `[1e−4, 1e−2]·L²`, `L` the
/// smallest domain extent, with nine samples.
pub fn measure_smoothing_rate(plan: &SemigroupPlan, p: f64, q: f64) -> Result<f64> {
    let l = plan.grid().extents().iter().copied().fold(f64::INFINITY, f64::min);
    measure_smoothing_rate_in(plan, p, q, (1e-4 * l * l, 1e-2 * l * l), 9)
}
