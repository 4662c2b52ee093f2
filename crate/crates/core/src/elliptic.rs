//! Neumann Helmholtz problems `−Δ_h v + κ v = s·u`.
//!
//! These give the chemicals of the elliptic (`τ = 0`) system. Tensor grids
//! use the cosine eigenbasis directly. Any grid can use preconditioned
//! conjugate gradients on the symmetric volume-weighted operator, followed
//! by a constant shift that makes `κ∫v = s∫u` hold to rounding.

use crate::error::{invalid, Error, Result};
use crate::grid::{Field, Grid};
use crate::linalg::pairwise_sum;
use crate::transform::CosineBasis;
use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // std provides these methods when linked
use num_traits::Float;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EllipticSolver {
    Spectral,
    ConjugateGradient { tolerance: f64, max_iterations: usize },
}

impl EllipticSolver {
    pub const DEFAULT_CG: Self = Self::ConjugateGradient {
        tolerance: 1e-10,
        max_iterations: 0,
    };
}

/// Iteration count and final relative residual of one solve.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct HelmholtzProblem {
    grid: Arc<Grid>,
    kappa: f64,
    source_scale: f64,
    solver: EllipticSolver,
    basis: Option<CosineBasis>,
    diagonal: Vec<f64>,
}

impl HelmholtzProblem {
    /// `max_iterations = 0` in a conjugate-gradient solver means
    /// `10·cells + 100`.
    pub fn new(grid: Arc<Grid>, kappa: f64, source_scale: f64, solver: EllipticSolver) -> Result<Self> {
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(invalid("kappa", format!("must be positive, got {kappa}")));
        }
        if !source_scale.is_finite() {
            return Err(invalid("source_scale", "must be finite"));
        }
        let solver = match solver {
            EllipticSolver::Spectral => EllipticSolver::Spectral,
            EllipticSolver::ConjugateGradient {
                tolerance,
                max_iterations,
            } => {
                if !(tolerance > 0.0 && tolerance < 1.0) {
                    return Err(invalid("tolerance", format!("must lie in (0, 1), got {tolerance}")));
                }
                EllipticSolver::ConjugateGradient {
                    tolerance,
                    max_iterations: if max_iterations == 0 {
                        10 * grid.len() + 100
                    } else {
                        max_iterations
                    },
                }
            }
        };
        let basis = match solver {
            EllipticSolver::Spectral => Some(
                CosineBasis::for_grid(&grid)
                    .ok_or(Error::Misuse("the spectral Helmholtz solver needs an interval or rectangle grid"))?,
            ),
            EllipticSolver::ConjugateGradient { .. } => None,
        };
        let mut diagonal: Vec<f64> = grid.volumes().iter().map(|v| kappa * v).collect();
        if basis.is_none() {
            grid.for_each_face(|l, r, t, _| {
                diagonal[l] += t;
                diagonal[r] += t;
            });
        }
        Ok(Self {
            grid,
            kappa,
            source_scale,
            solver,
            basis,
            diagonal,
        })
    }

    /// Spectral on tensor grids, default conjugate gradients elsewhere.
    pub fn auto(grid: Arc<Grid>, kappa: f64, source_scale: f64) -> Result<Self> {
        let solver = if grid.geometry().is_radial() {
            EllipticSolver::DEFAULT_CG
        } else {
            EllipticSolver::Spectral
        };
        Self::new(grid, kappa, source_scale, solver)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn source_scale(&self) -> f64 {
        self.source_scale
    }

    pub fn solver(&self) -> EllipticSolver {
        self.solver
    }

    pub fn solve(&self, u: &Field) -> Result<Field> {
        self.solve_from(u, None).map(|(v, _)| v)
    }

    /// Solves with an optional starting guess (ignored by the spectral path).
    pub fn solve_from(&self, u: &Field, guess: Option<&Field>) -> Result<(Field, SolveStats)> {
        if !u.same_grid(&Field::zeros(self.grid.clone())) {
            return Err(Error::GridMismatch);
        }
        match (&self.basis, self.solver) {
            (Some(basis), _) => Ok((self.solve_spectral(basis, u), SolveStats::default())),
            (
                None,
                EllipticSolver::ConjugateGradient {
                    tolerance,
                    max_iterations,
                },
            ) => self.solve_cg(u, guess, tolerance, max_iterations),
            (None, EllipticSolver::Spectral) => unreachable!(),
        }
    }

    fn solve_spectral(&self, basis: &CosineBasis, u: &Field) -> Field {
        let nonnegative = self.source_scale >= 0.0 && u.min() >= 0.0;
        let mut values = u.values().to_vec();
        let (s, k) = (self.source_scale, self.kappa);
        basis.apply(&mut values, |lambda| s / (lambda + k));
        if nonnegative {
            for v in values.iter_mut() {
                *v = v.max(0.0);
            }
        }
        Field::from_vec(self.grid.clone(), values)
    }

    /// `(A x)_i = κ·vol_i·x_i + Σ_faces T (x_i − x_j)`.
    fn apply_operator(&self, x: &[f64], out: &mut [f64]) {
        for ((o, xi), v) in out.iter_mut().zip(x).zip(self.grid.volumes()) {
            *o = self.kappa * v * xi;
        }
        self.grid.for_each_face(|l, r, t, _| {
            let flux = t * (x[l] - x[r]);
            out[l] += flux;
            out[r] -= flux;
        });
    }

    fn solve_cg(
        &self,
        u: &Field,
        guess: Option<&Field>,
        tolerance: f64,
        max_iterations: usize,
    ) -> Result<(Field, SolveStats)> {
        let g = &self.grid;
        let n = g.len();
        let b: Vec<f64> = u
            .values()
            .iter()
            .zip(g.volumes())
            .map(|(ui, v)| self.source_scale * ui * v)
            .collect();
        let b_norm = norm(&b);
        let mut x = match guess {
            Some(f) if f.same_grid(u) => f.values().to_vec(),
            _ => b.iter().zip(&self.diagonal).map(|(bi, d)| bi / d).collect(),
        };
        let mut stats = SolveStats::default();
        if b_norm == 0.0 {
            return Ok((Field::zeros(g.clone()), stats));
        }
        let mut r = vec![0.0; n];
        self.apply_operator(&x, &mut r);
        for (ri, bi) in r.iter_mut().zip(&b) {
            *ri = bi - *ri;
        }
        let mut z: Vec<f64> = r.iter().zip(&self.diagonal).map(|(ri, d)| ri / d).collect();
        let mut p = z.clone();
        let mut ap = vec![0.0; n];
        let mut rz = dot(&r, &z);
        stats.residual = norm(&r) / b_norm;
        while stats.residual > tolerance {
            if stats.iterations >= max_iterations {
                return Err(Error::SolverFailure {
                    iterations: stats.iterations,
                    residual: stats.residual,
                });
            }
            self.apply_operator(&p, &mut ap);
            let alpha = rz / dot(&p, &ap);
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            for i in 0..n {
                z[i] = r[i] / self.diagonal[i];
            }
            let rz_next = dot(&r, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
            stats.iterations += 1;
            stats.residual = norm(&r) / b_norm;
        }
        // Face terms of A telescope, so Σ(b − Ax) = s∫u − κ∫x exactly; a
        // constant shift removes that defect.
        self.apply_operator(&x, &mut ap);
        let defect = pairwise_sum(n, |i| b[i] - ap[i]);
        let shift = defect / (self.kappa * g.measure());
        for xi in x.iter_mut() {
            *xi += shift;
        }
        Ok((Field::from_vec(g.clone(), x), stats))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    pairwise_sum(a.len(), |i| a[i] * b[i])
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
