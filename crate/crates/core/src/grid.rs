//! Cell-centered finite-volume grids with zero-flux boundaries.
//!
//! Every discrete operator is written in face form: a face joins two cells
//! and carries a transmissibility `T = area / distance`. Boundary faces carry
//! no flux (ghost-cell mirroring), so divergence-form operators telescope and
//! conserve mass exactly up to rounding.

use crate::error::{invalid, Error, Result};
use crate::linalg::pairwise_sum;
use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)] // std provides these methods when linked
use num_traits::Float;

/// Smallest admissible cell count per axis.
pub const MIN_CELLS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Geometry {
    /// `[0, L]`.
    Interval,
    /// `[0, Lx] × [0, Ly]`.
    Rectangle,
    /// Radially symmetric functions on a disk of radius `R` (n = 2).
    RadialDisk,
    /// Radially symmetric functions on a ball of radius `R` (n = 3).
    RadialBall,
}

impl Geometry {
    /// Stable numeric tag used by the binary snapshot format.
    pub fn tag(self) -> u32 {
        match self {
            Self::Interval => 0,
            Self::Rectangle => 1,
            Self::RadialDisk => 2,
            Self::RadialBall => 3,
        }
    }

    pub fn from_tag(tag: u32) -> Option<Self> {
        match tag {
            0 => Some(Self::Interval),
            1 => Some(Self::Rectangle),
            2 => Some(Self::RadialDisk),
            3 => Some(Self::RadialBall),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Interval => "interval",
            Self::Rectangle => "rectangle",
            Self::RadialDisk => "radial-disk",
            Self::RadialBall => "radial-ball",
        }
    }

    pub fn is_radial(self) -> bool {
        matches!(self, Self::RadialDisk | Self::RadialBall)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    geometry: Geometry,
    extents: [f64; 2],
    cells: [usize; 2],
    spacing: [f64; 2],
    volumes: Vec<f64>,
    /// Per axis, transmissibility of the faces along one grid line
    /// (`cells[axis] + 1` entries, zero on the boundary faces).
    trans: [Vec<f64>; 2],
}

impl Grid {
    pub fn interval(length: f64, cells: usize) -> Result<Self> {
        check_extent("extents", length)?;
        check_cells(cells)?;
        let h = length / cells as f64;
        let mut tx = vec![1.0 / h; cells + 1];
        tx[0] = 0.0;
        tx[cells] = 0.0;
        Ok(Self {
            geometry: Geometry::Interval,
            extents: [length, 0.0],
            cells: [cells, 1],
            spacing: [h, 0.0],
            volumes: vec![h; cells],
            trans: [tx, Vec::new()],
        })
    }

    pub fn rectangle(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Self> {
        check_extent("extents", lx)?;
        check_extent("extents", ly)?;
        check_cells(nx)?;
        check_cells(ny)?;
        let (hx, hy) = (lx / nx as f64, ly / ny as f64);
        let mut tx = vec![hy / hx; nx + 1];
        tx[0] = 0.0;
        tx[nx] = 0.0;
        let mut ty = vec![hx / hy; ny + 1];
        ty[0] = 0.0;
        ty[ny] = 0.0;
        Ok(Self {
            geometry: Geometry::Rectangle,
            extents: [lx, ly],
            cells: [nx, ny],
            spacing: [hx, hy],
            volumes: vec![hx * hy; nx * ny],
            trans: [tx, ty],
        })
    }

    pub fn radial_disk(radius: f64, cells: usize) -> Result<Self> {
        Self::radial(Geometry::RadialDisk, radius, cells)
    }

    pub fn radial_ball(radius: f64, cells: usize) -> Result<Self> {
        Self::radial(Geometry::RadialBall, radius, cells)
    }

    fn radial(geometry: Geometry, radius: f64, cells: usize) -> Result<Self> {
        check_extent("extents", radius)?;
        check_cells(cells)?;
        let h = radius / cells as f64;
        let face_area = |r: f64| match geometry {
            Geometry::RadialDisk => 2.0 * PI * r,
            _ => 4.0 * PI * r * r,
        };
        let ball = |r: f64| match geometry {
            Geometry::RadialDisk => PI * r * r,
            _ => 4.0 / 3.0 * PI * r * r * r,
        };
        let volumes = (0..cells)
            .map(|i| ball((i + 1) as f64 * h) - ball(i as f64 * h))
            .collect();
        let mut trans: Vec<f64> = (0..=cells).map(|f| face_area(f as f64 * h) / h).collect();
        trans[cells] = 0.0;
        Ok(Self {
            geometry,
            extents: [radius, 0.0],
            cells: [cells, 1],
            spacing: [h, 0.0],
            volumes,
            trans: [trans, Vec::new()],
        })
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    /// Spatial dimension `n` of the domain (not the number of array axes).
    pub fn dim(&self) -> u8 {
        match self.geometry {
            Geometry::Interval => 1,
            Geometry::Rectangle | Geometry::RadialDisk => 2,
            Geometry::RadialBall => 3,
        }
    }

    /// Number of array axes (1 or 2).
    pub fn axes(&self) -> usize {
        if self.geometry == Geometry::Rectangle {
            2
        } else {
            1
        }
    }

    /// Physical extent per array axis (length, or radius for radial grids).
    pub fn extents(&self) -> &[f64] {
        &self.extents[..self.axes()]
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells[..self.axes()]
    }

    pub fn nx(&self) -> usize {
        self.cells[0]
    }

    /// Cells along the second axis; 1 for one-axis grids.
    pub fn ny(&self) -> usize {
        self.cells[1]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.spacing[axis]
    }

    /// Smallest mesh width over all axes.
    pub fn min_spacing(&self) -> f64 {
        self.spacing[..self.axes()].iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn len(&self) -> usize {
        self.volumes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.volumes.is_empty()
    }

    pub fn volume(&self, cell: usize) -> f64 {
        self.volumes[cell]
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    pub fn min_volume(&self) -> f64 {
        self.volumes.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `|Ω|` as the pairwise sum of cell volumes.
    pub fn measure(&self) -> f64 {
        pairwise_sum(self.len(), |i| self.volumes[i])
    }

    /// Exact measure of the continuous domain.
    pub fn domain_measure(&self) -> f64 {
        let [a, b] = self.extents;
        match self.geometry {
            Geometry::Interval => a,
            Geometry::Rectangle => a * b,
            Geometry::RadialDisk => PI * a * a,
            Geometry::RadialBall => 4.0 / 3.0 * PI * a * a * a,
        }
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.cells[0] + i
    }

    /// Cell center; radial grids report `[r, 0]`, intervals `[x, 0]`.
    pub fn center(&self, cell: usize) -> [f64; 2] {
        let nx = self.cells[0];
        let (i, j) = (cell % nx, cell / nx);
        match self.geometry {
            Geometry::Rectangle => [
                (i as f64 + 0.5) * self.spacing[0],
                (j as f64 + 0.5) * self.spacing[1],
            ],
            _ => [(i as f64 + 0.5) * self.spacing[0], 0.0],
        }
    }

    /// Cell containing `point`, or `None` if the point is not strictly inside.
    pub fn locate(&self, point: [f64; 2]) -> Option<usize> {
        let along = |x: f64, axis: usize| -> Option<usize> {
            if !(x > 0.0 && x < self.extents[axis]) {
                return None;
            }
            Some(((x / self.spacing[axis]) as usize).min(self.cells[axis] - 1))
        };
        match self.geometry {
            Geometry::Interval => along(point[0], 0),
            Geometry::Rectangle => Some(self.index(along(point[0], 0)?, along(point[1], 1)?)),
            // only the center is a point of a radially symmetric domain
            Geometry::RadialDisk | Geometry::RadialBall => {
                (point[0] == 0.0 && point[1] == 0.0).then_some(0)
            }
        }
    }

    /// Transmissibilities of the faces along `axis` (boundary entries are zero).
    pub(crate) fn transmissibility(&self, axis: usize) -> &[f64] {
        &self.trans[axis]
    }

    /// Visits every interior face once as `(left, right, transmissibility, distance)`,
    /// in a fixed order: x-faces row by row, then y-faces.
    pub fn for_each_face<F: FnMut(usize, usize, f64, f64)>(&self, mut visit: F) {
        let (nx, ny) = (self.cells[0], self.cells[1]);
        let tx = &self.trans[0];
        for j in 0..ny {
            let row = j * nx;
            for i in 0..nx - 1 {
                visit(row + i, row + i + 1, tx[i + 1], self.spacing[0]);
            }
        }
        if self.axes() == 2 {
            let ty = &self.trans[1];
            for j in 0..ny - 1 {
                for i in 0..nx {
                    visit(j * nx + i, (j + 1) * nx + i, ty[j + 1], self.spacing[1]);
                }
            }
        }
    }
}

fn check_extent(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must be positive and finite, got {value}")))
    }
}

fn check_cells(n: usize) -> Result<()> {
    if n >= MIN_CELLS {
        Ok(())
    } else {
        Err(invalid("cells", format!("need at least {MIN_CELLS} cells per axis, got {n}")))
    }
}

/// Cell averages of a scalar on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid(
                "values",
                format!("expected {} cell values, got {}", grid.len(), values.len()),
            ));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid("values", format!("non-finite value at cell {bad}")));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_vec(grid: Arc<Grid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Arc<Grid>, value: f64) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![value; n],
        }
    }

    /// Samples `f` at the cell centers.
    pub fn from_fn<F: Fn([f64; 2]) -> f64>(grid: Arc<Grid>, f: F) -> Self {
        let values = (0..grid.len()).map(|c| f(grid.center(c))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn same_grid(&self, other: &Field) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    pub(crate) fn check_same_grid(&self, other: &Field) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Field {
        Self::from_vec(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, a: f64) -> Field {
        self.map(|v| a * v)
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &Field, b: f64) -> Result<Field> {
        self.check_same_grid(other)?;
        Ok(Self::from_vec(
            self.grid.clone(),
            self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect(),
        ))
    }

    /// Largest pointwise absolute difference.
    pub fn sup_distance(&self, other: &Field) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// `∫|self − other|`.
    pub fn l1_distance(&self, other: &Field) -> Result<f64> {
        self.check_same_grid(other)?;
        let g = &self.grid;
        Ok(pairwise_sum(g.len(), |i| (self.values[i] - other.values[i]).abs() * g.volume(i)))
    }

    pub fn integrate(&self) -> f64 {
        integrate(self)
    }

    pub fn lp_norm(&self, p: f64) -> f64 {
        lp_norm(self, p)
    }
}

/// `Σ values[i]·vol[i]`, pairwise summed.
pub fn integrate(f: &Field) -> f64 {
    let g = &f.grid;
    pairwise_sum(g.len(), |i| f.values[i] * g.volume(i))
}

/// `∫ f·φ` for a second field on the same grid.
pub fn integrate_product(f: &Field, phi: &Field) -> Result<f64> {
    f.check_same_grid(phi)?;
    let g = &f.grid;
    Ok(pairwise_sum(g.len(), |i| f.values[i] * phi.values[i] * g.volume(i)))
}

/// `(∫|f|^p)^{1/p}`; `p = ∞` gives the largest absolute cell value.
pub fn lp_norm(f: &Field, p: f64) -> f64 {
    if p.is_infinite() {
        return f.sup_norm();
    }
    debug_assert!(p >= 1.0);
    lp_integral(f, p).powf(1.0 / p)
}

/// `∫|f|^p` without the outer root.
pub fn lp_integral(f: &Field, p: f64) -> f64 {
    let g = &f.grid;
    if p == 1.0 {
        return pairwise_sum(g.len(), |i| f.values[i].abs() * g.volume(i));
    }
    if p == 2.0 {
        return pairwise_sum(g.len(), |i| f.values[i] * f.values[i] * g.volume(i));
    }
    pairwise_sum(g.len(), |i| f.values[i].abs().powf(p) * g.volume(i))
}

/// `∫|∇f|²` from face differences; boundary faces contribute nothing.
pub fn gradient_sq_integral(f: &Field) -> f64 {
    face_sum(&f.grid, |l, r| {
        let d = f.values[r] - f.values[l];
        d * d
    })
}

/// `Σ_faces T·term(left, right)` in face-visit order, pairwise summed per axis.
pub(crate) fn face_sum<F: Fn(usize, usize) -> f64>(grid: &Grid, term: F) -> f64 {
    let (nx, ny) = (grid.nx(), grid.ny());
    let tx = grid.transmissibility(0);
    let mut total = pairwise_sum(ny * (nx - 1), |k| {
        let (j, i) = (k / (nx - 1), k % (nx - 1));
        let l = j * nx + i;
        tx[i + 1] * term(l, l + 1)
    });
    if grid.axes() == 2 {
        let ty = grid.transmissibility(1);
        total += pairwise_sum((ny - 1) * nx, |k| {
            let (j, i) = (k / nx, k % nx);
            let l = j * nx + i;
            ty[j + 1] * term(l, l + nx)
        });
    }
    total
}

/// Discrete Neumann Laplacian in flux form: `(Δf)_i = vol_i⁻¹ Σ T (f_j − f_i)`.
pub fn neumann_laplacian(f: &Field) -> Field {
    let g = &f.grid;
    let mut out = vec![0.0; g.len()];
    g.for_each_face(|l, r, t, _| {
        let flux = t * (f.values[r] - f.values[l]);
        out[l] += flux;
        out[r] -= flux;
    });
    for (o, v) in out.iter_mut().zip(g.volumes()) {
        *o /= v;
    }
    Field::from_vec(g.clone(), out)
}

/// Squared gradient magnitude per cell, averaging the squared face
/// differences on both sides of the cell along each axis.
pub fn cell_gradient_sq(f: &Field) -> Vec<f64> {
    let g = &f.grid;
    let mut out = vec![0.0; g.len()];
    g.for_each_face(|l, r, _, d| {
        let s = (f.values[r] - f.values[l]) / d;
        let half = 0.5 * s * s;
        out[l] += half;
        out[r] += half;
    });
    out
}

/// Discrete `W^{1,r}` norm `(‖f‖_r^r + ‖|∇f|‖_r^r)^{1/r}` with cell-averaged gradients.
pub fn w1r_norm(f: &Field, r: f64) -> f64 {
    let g = &f.grid;
    let grad = cell_gradient_sq(f);
    let half_r = 0.5 * r;
    let total = pairwise_sum(g.len(), |i| {
        (f.values[i].abs().powf(r) + grad[i].powf(half_r)) * g.volume(i)
    });
    total.powf(1.0 / r)
}
