#![allow(dead_code)]

use kslab_core::grid::{Field, Grid};
use std::sync::Arc;

pub fn unit_square(n: usize) -> Arc<Grid> {
    Arc::new(Grid::rectangle(1.0, 1.0, n, n).unwrap())
}

pub fn interval(n: usize) -> Arc<Grid> {
    Arc::new(Grid::interval(1.0, n).unwrap())
}

/// Error-free transformation `a + b = s + e`.
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Error-free transformation `a·b = p + e`.
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Σ a_i·b_i accumulated in double-double arithmetic.
pub fn dd_dot(a: &[f64], b: &[f64]) -> f64 {
    let (mut hi, mut lo) = (0.0f64, 0.0f64);
    for (x, y) in a.iter().zip(b) {
        let (p, pe) = two_prod(*x, *y);
        let (s, se) = two_sum(hi, p);
        hi = s;
        lo += se + pe;
    }
    hi + lo
}

/// `∫f` re-summed in double-double precision.
pub fn dd_integral(f: &Field) -> f64 {
    dd_dot(f.values(), f.grid().volumes())
}
