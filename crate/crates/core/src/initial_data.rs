//! Measure-valued `u₀`, density-valued `v₀`, `w₀`, and their mollification
//! by the heat semigroup.

use crate::error::{invalid, Error, Result};
use crate::grid::{integrate, Field, Grid};
use crate::model::{ChemicalMode, ModelParams};
use crate::semigroup::SemigroupPlan;
use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)] // std provides these methods when linked
use num_traits::Float;

/// A Dirac mass `mass·δ_position`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub position: [f64; 2],
    pub mass: f64,
}

/// `u₀ = Σ mᵢ δ_{xᵢ} + density`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MeasureSpec {
    pub atoms: Vec<Atom>,
    pub density: Option<Field>,
}

impl MeasureSpec {
    pub fn dirac(position: [f64; 2], mass: f64) -> Self {
        Self {
            atoms: alloc::vec![Atom { position, mass }],
            density: None,
        }
    }

    pub fn from_density(density: Field) -> Self {
        Self {
            atoms: Vec::new(),
            density: Some(density),
        }
    }

    /// `m = Σ mᵢ + ∫density`.
    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass).sum::<f64>() + self.density.as_ref().map_or(0.0, integrate)
    }

    /// True when the measure has no atoms, so `u₀` is a density.
    pub fn has_density_only(&self) -> bool {
        self.atoms.is_empty() && self.density.is_some()
    }

    /// Checks the invariants against `grid`: positive atom masses at points
    /// strictly inside the domain, a nonnegative density on the same grid,
    /// and positive total mass.
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        for (k, atom) in self.atoms.iter().enumerate() {
            if !(atom.mass.is_finite() && atom.mass > 0.0) {
                return Err(invalid("atoms", format!("atom {k} has mass {}, need > 0", atom.mass)));
            }
            if grid.locate(atom.position).is_none() {
                let where_ = if grid.geometry().is_radial() {
                    "radial grids only admit an atom at the center [0, 0]"
                } else {
                    "must lie strictly inside the domain"
                };
                return Err(invalid(
                    "atoms",
                    format!("atom {k} at {:?}: {where_}", atom.position),
                ));
            }
        }
        if let Some(d) = &self.density {
            if d.grid().as_ref() != grid {
                return Err(Error::GridMismatch);
            }
            if !d.is_finite() || d.min() < 0.0 {
                return Err(invalid("density", "must be finite and nonnegative"));
            }
        }
        let m = self.total_mass();
        if !(m > 0.0 && m.is_finite()) {
            return Err(invalid("m", format!("total mass must be positive, got {m}")));
        }
        Ok(())
    }

    /// Cell representation: each atom is spread over the neighbouring cell
    /// centers with linear (cloud-in-cell) weights and added to the sampled
    /// density. The integral is exactly the total mass and interior atoms
    /// keep their first moments.
    pub fn cell_measure(&self, grid: &Arc<Grid>) -> Result<Field> {
        self.validate(grid)?;
        let mut field = match &self.density {
            Some(d) => Field::from_vec(grid.clone(), d.values().to_vec()),
            None => Field::zeros(grid.clone()),
        };
        for atom in &self.atoms {
            if grid.geometry().is_radial() {
                field.values_mut()[0] += atom.mass / grid.volume(0);
                continue;
            }
            let wx = linear_weights(atom.position[0], grid.spacing(0), grid.nx());
            let wy = if grid.axes() == 2 {
                linear_weights(atom.position[1], grid.spacing(1), grid.ny())
            } else {
                [(0, 1.0), (0, 0.0)]
            };
            for (j, fy) in wy {
                for (i, fx) in wx {
                    let w = fx * fy;
                    if w > 0.0 {
                        let cell = grid.index(i, j);
                        field.values_mut()[cell] += atom.mass * w / grid.volume(cell);
                    }
                }
            }
        }
        Ok(field)
    }

    /// `⟨u₀, φ⟩ = Σ mᵢ φ(xᵢ) + ∫density·φ`, with `φ` evaluated at the true
    /// atom positions and at cell centers for the density.
    pub fn pair<F: Fn([f64; 2]) -> f64>(&self, phi: F) -> f64 {
        let atoms: f64 = self.atoms.iter().map(|a| a.mass * phi(a.position)).sum();
        let density = self.density.as_ref().map_or(0.0, |d| {
            let g = d.grid();
            let weighted = Field::from_vec(
                g.clone(),
                (0..g.len()).map(|i| d.values()[i] * phi(g.center(i))).collect(),
            );
            integrate(&weighted)
        });
        atoms + density
    }
}

/// Linear weights of coordinate `x` on the two nearest cell centers of an
/// axis with `n` cells of width `h`; clamped to the edge cells.
fn linear_weights(x: f64, h: f64, n: usize) -> [(usize, f64); 2] {
    let s = x / h - 0.5;
    if s <= 0.0 || n == 1 {
        return [(0, 1.0), (0, 0.0)];
    }
    if s >= (n - 1) as f64 {
        return [(n - 1, 1.0), (n - 1, 0.0)];
    }
    let i = s.floor() as usize;
    let f = s - i as f64;
    [(i, 1.0 - f), (i + 1, f)]
}

/// Named density shapes usable from configuration files.
///
/// Positions are measured from `center`; on radial grids the center is the
/// origin and the distance is the radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DensityProfile {
    Constant { value: f64 },
    /// `amplitude·exp(−|x − c|²/(2·width²))`.
    Gaussian { center: [f64; 2], width: f64, amplitude: f64 },
    /// `amplitude·½(1 + cos(π|x − c|/radius))` inside the radius, 0 outside.
    CosineBump { center: [f64; 2], radius: f64, amplitude: f64 },
}

impl DensityProfile {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Constant { .. } => "constant",
            Self::Gaussian { .. } => "gaussian",
            Self::CosineBump { .. } => "cosine-bump",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (amplitude, scale) = match *self {
            Self::Constant { value } => (value, 1.0),
            Self::Gaussian { width, amplitude, .. } => (amplitude, width),
            Self::CosineBump { radius, amplitude, .. } => (amplitude, radius),
        };
        if !(amplitude.is_finite() && amplitude >= 0.0) {
            return Err(invalid("density", format!("amplitude must be >= 0, got {amplitude}")));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(invalid("density", format!("width/radius must be > 0, got {scale}")));
        }
        Ok(())
    }

    pub fn evaluate(&self, x: [f64; 2], radial: bool) -> f64 {
        let dist = |c: [f64; 2]| {
            if radial {
                x[0]
            } else {
                ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)).sqrt()
            }
        };
        match *self {
            Self::Constant { value } => value,
            Self::Gaussian {
                center,
                width,
                amplitude,
            } => {
                let d = dist(center);
                amplitude * (-d * d / (2.0 * width * width)).exp()
            }
            Self::CosineBump {
                center,
                radius,
                amplitude,
            } => {
                let d = dist(center);
                if d < radius {
                    amplitude * 0.5 * (1.0 + (PI * d / radius).cos())
                } else {
                    0.0
                }
            }
        }
    }

    /// Samples the profile at cell centers.
    pub fn sample(&self, grid: &Arc<Grid>) -> Result<Field> {
        self.validate()?;
        let radial = grid.geometry().is_radial();
        Ok(Field::from_fn(grid.clone(), |x| self.evaluate(x, radial)))
    }
}

/// `v₀`, `w₀` for the parabolic system.
#[derive(Debug, Clone, PartialEq)]
pub struct ChemicalInitialData {
    pub v0: Field,
    pub w0: Field,
}

impl ChemicalInitialData {
    pub fn validate(&self) -> Result<()> {
        self.v0.check_same_grid(&self.w0)?;
        for (name, f) in [("v0", &self.v0), ("w0", &self.w0)] {
            if !f.is_finite() || f.min() < 0.0 {
                return Err(invalid(name, "must be finite and nonnegative"));
            }
        }
        Ok(())
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps.is_finite() && eps > 0.0 {
        Ok(())
    } else {
        Err(invalid("eps", format!("must be positive, got {eps}")))
    }
}

/// `u_{0,ε} = e^{εΔ}u₀` on the plan's grid.
pub fn mollify_measure(spec: &MeasureSpec, eps: f64, plan: &SemigroupPlan) -> Result<Field> {
    check_eps(eps)?;
    let cells = spec.cell_measure(plan.grid())?;
    plan.apply(&cells, eps, 0.0)
}

/// `(e^{−εβ}e^{εΔ}v₀, e^{−εδ}e^{εΔ}w₀)`.
pub fn mollify_chemicals(
    cd: &ChemicalInitialData,
    eps: f64,
    params: &ModelParams,
    plan: &SemigroupPlan,
) -> Result<(Field, Field)> {
    if params.mode != ChemicalMode::Parabolic {
        return Err(Error::Misuse("chemical initial data only exist for the parabolic system"));
    }
    check_eps(eps)?;
    cd.validate()?;
    let v = plan.apply(&cd.v0, eps, params.beta)?;
    let w = plan.apply(&cd.w0, eps, params.delta)?;
    Ok((v, w))
}
