//! Half-sample cosine transforms diagonalizing the cell-centered Neumann Laplacian.
//!
//! The vectors `cos(πk(i+½)/N)` are exact eigenvectors of the three-point
//! Neumann stencil with eigenvalues `−(4/h²) sin²(πk/2N)`, so multiplying the
//! transformed coefficients by a function of the eigenvalue applies that
//! function of the discrete operator exactly (up to rounding).
//!
//! Power-of-two lengths use an `N`-point complex FFT (Makhoul's reordering);
//! other lengths fall back to a precomputed dense table.

use crate::grid::Grid;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)] // std provides these methods when linked
use num_traits::Float;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct Complex {
    re: f64,
    im: f64,
}

impl Complex {
    fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }

    fn mul(self, o: Self) -> Self {
        Self::new(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)
    }
}

/// Iterative radix-2 FFT with precomputed twiddles.
#[derive(Debug, Clone)]
struct Fft {
    n: usize,
    twiddles: Vec<Complex>,
    bitrev: Vec<usize>,
}

impl Fft {
    fn new(n: usize) -> Self {
        debug_assert!(n.is_power_of_two());
        let twiddles = (0..n / 2)
            .map(|k| {
                let a = -2.0 * PI * k as f64 / n as f64;
                Complex::new(a.cos(), a.sin())
            })
            .collect();
        let bits = n.trailing_zeros();
        let bitrev = (0..n)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
            .collect();
        Self { n, twiddles, bitrev }
    }

    /// Forward transform `V_k = Σ v_j e^{−2πijk/N}`; `inverse` conjugates the
    /// twiddles and leaves the `1/N` scaling to the caller.
    fn run(&self, data: &mut [Complex], inverse: bool) {
        let n = self.n;
        for i in 0..n {
            let j = self.bitrev[i];
            if i < j {
                data.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let stride = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..half {
                    let mut w = self.twiddles[k * stride];
                    if inverse {
                        w.im = -w.im;
                    }
                    let a = data[start + k];
                    let b = data[start + k + half].mul(w);
                    data[start + k] = Complex::new(a.re + b.re, a.im + b.im);
                    data[start + k + half] = Complex::new(a.re - b.re, a.im - b.im);
                }
            }
            len <<= 1;
        }
    }
}

#[derive(Debug, Clone)]
enum Kernel {
    Fast { fft: Fft, shift: Vec<Complex> },
    Dense { table: Vec<f64> },
}

/// Unnormalized DCT-II `X_k = Σ_i x_i cos(πk(i+½)/N)` and its exact inverse.
#[derive(Debug, Clone)]
pub(crate) struct CosineTransform {
    n: usize,
    kernel: Kernel,
}

impl CosineTransform {
    pub(crate) fn new(n: usize) -> Self {
        let kernel = if n.is_power_of_two() && n >= 2 {
            let shift = (0..n)
                .map(|k| {
                    let a = -PI * k as f64 / (2 * n) as f64;
                    Complex::new(a.cos(), a.sin())
                })
                .collect();
            Kernel::Fast {
                fft: Fft::new(n),
                shift,
            }
        } else {
            let mut table = vec![0.0; n * n];
            for k in 0..n {
                for i in 0..n {
                    table[k * n + i] = (PI * k as f64 * (i as f64 + 0.5) / n as f64).cos();
                }
            }
            Kernel::Dense { table }
        };
        Self { n, kernel }
    }

    pub(crate) fn forward(&self, x: &mut [f64], scratch: &mut Vec<Complex>) {
        let n = self.n;
        match &self.kernel {
            Kernel::Fast { fft, shift } => {
                let buf = prepare(scratch, n);
                for j in 0..n / 2 {
                    buf[j] = Complex::new(x[2 * j], 0.0);
                    buf[n - 1 - j] = Complex::new(x[2 * j + 1], 0.0);
                }
                fft.run(buf, false);
                for k in 0..n {
                    x[k] = buf[k].mul(shift[k]).re;
                }
            }
            Kernel::Dense { table } => {
                let buf = prepare(scratch, n);
                for k in 0..n {
                    let row = &table[k * n..(k + 1) * n];
                    buf[k].re = row.iter().zip(x.iter()).map(|(c, v)| c * v).sum();
                }
                for k in 0..n {
                    x[k] = buf[k].re;
                }
            }
        }
    }

    pub(crate) fn inverse(&self, coeffs: &mut [f64], scratch: &mut Vec<Complex>) {
        let n = self.n;
        match &self.kernel {
            Kernel::Fast { fft, shift } => {
                let buf = prepare(scratch, n);
                buf[0] = Complex::new(coeffs[0], 0.0);
                for k in 1..n {
                    let z = Complex::new(coeffs[k], -coeffs[n - k]);
                    let s = shift[k];
                    buf[k] = z.mul(Complex::new(s.re, -s.im));
                }
                fft.run(buf, true);
                let scale = 1.0 / n as f64;
                for j in 0..n / 2 {
                    coeffs[2 * j] = buf[j].re * scale;
                    coeffs[2 * j + 1] = buf[n - 1 - j].re * scale;
                }
            }
            Kernel::Dense { table } => {
                let buf = prepare(scratch, n);
                let scale = 1.0 / n as f64;
                for i in 0..n {
                    let mut acc = coeffs[0];
                    for k in 1..n {
                        acc += 2.0 * coeffs[k] * table[k * n + i];
                    }
                    buf[i].re = acc * scale;
                }
                for i in 0..n {
                    coeffs[i] = buf[i].re;
                }
            }
        }
    }
}


fn prepare(scratch: &mut Vec<Complex>, n: usize) -> &mut [Complex] {
    scratch.clear();
    scratch.resize(n, Complex::default());
    &mut scratch[..]
}

/// Eigenvalues of `−Δ_h` along one axis: `(4/h²) sin²(πk/2N)`.
pub(crate) fn neumann_eigenvalues(n: usize, h: f64) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let s = (PI * k as f64 / (2 * n) as f64).sin();
            4.0 * s * s / (h * h)
        })
        .collect()
}

/// Precomputed tensor-product cosine basis of a rectangle or interval grid.
#[derive(Debug, Clone)]
pub(crate) struct CosineBasis {
    nx: usize,
    ny: usize,
    tx: CosineTransform,
    ty: Option<CosineTransform>,
    eig_x: Vec<f64>,
    eig_y: Vec<f64>,
}

impl CosineBasis {
    /// `None` for geometries without a tensor cosine basis (radial grids).
    pub(crate) fn for_grid(grid: &Grid) -> Option<Self> {
        if grid.geometry().is_radial() {
            return None;
        }
        let (nx, ny) = (grid.nx(), grid.ny());
        let two_axes = grid.axes() == 2;
        Some(Self {
            nx,
            ny,
            tx: CosineTransform::new(nx),
            ty: two_axes.then(|| CosineTransform::new(ny)),
            eig_x: neumann_eigenvalues(nx, grid.spacing(0)),
            eig_y: if two_axes {
                neumann_eigenvalues(ny, grid.spacing(1))
            } else {
                vec![0.0]
            },
        })
    }

    /// Replaces `values` by `g(−Δ_h)` applied to them, where `multiplier`
    /// receives the eigenvalue `λ ≥ 0` of `−Δ_h` for each mode.
    pub(crate) fn apply<F: Fn(f64) -> f64>(&self, values: &mut [f64], multiplier: F) {
        let (nx, ny) = (self.nx, self.ny);
        let mut scratch = Vec::with_capacity(nx.max(ny));
        for row in values.chunks_exact_mut(nx) {
            self.tx.forward(row, &mut scratch);
        }
        let mut column = vec![0.0; ny];
        if let Some(ty) = &self.ty {
            for i in 0..nx {
                for j in 0..ny {
                    column[j] = values[j * nx + i];
                }
                ty.forward(&mut column, &mut scratch);
                for j in 0..ny {
                    let lambda = self.eig_x[i] + self.eig_y[j];
                    column[j] *= multiplier(lambda);
                }
                ty.inverse(&mut column, &mut scratch);
                for j in 0..ny {
                    values[j * nx + i] = column[j];
                }
            }
        } else {
            for (i, v) in values.iter_mut().enumerate() {
                *v *= multiplier(self.eig_x[i]);
            }
        }
        for row in values.chunks_exact_mut(nx) {
            self.tx.inverse(row, &mut scratch);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dct(x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(i, v)| v * (PI * k as f64 * (i as f64 + 0.5) / n as f64).cos())
                    .sum()
            })
            .collect()
    }

    fn sample(n: usize) -> Vec<f64> {
        (0..n).map(|i| ((i * 7919) % 13) as f64 - 6.0 + 0.25 * i as f64).collect()
    }

    #[test]
    fn fast_and_dense_agree_with_definition() {
        for n in [2usize, 4, 8, 64, 6, 12, 30] {
            let x = sample(n);
            let expected = naive_dct(&x);
            let t = CosineTransform::new(n);
            let mut y = x.clone();
            let mut scratch = Vec::new();
            t.forward(&mut y, &mut scratch);
            for (a, b) in y.iter().zip(&expected) {
                assert!((a - b).abs() < 1e-11 * (1.0 + b.abs()), "n={n}: {a} vs {b}");
            }
            t.inverse(&mut y, &mut scratch);
            for (a, b) in y.iter().zip(&x) {
                assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()), "n={n} roundtrip");
            }
        }
    }

    #[test]
    fn eigenvalues_match_stencil() {
        let n = 16;
        let h = 0.1;
        let eig = neumann_eigenvalues(n, h);
        for k in 0..n {
            let v: Vec<f64> = (0..n).map(|i| (PI * k as f64 * (i as f64 + 0.5) / n as f64).cos()).collect();
            for i in 0..n {
                let left = if i == 0 { v[0] } else { v[i - 1] };
                let right = if i == n - 1 { v[n - 1] } else { v[i + 1] };
                let lap = (left - 2.0 * v[i] + right) / (h * h);
                assert!((lap + eig[k] * v[i]).abs() < 1e-9, "k={k} i={i}");
            }
        }
    }
}
