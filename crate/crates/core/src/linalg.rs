//! Small dense kernels shared by the solvers.

const PAIRWISE_BLOCK: usize = 64;

/// Pairwise (cascade) sum of `term(i)` for `i in 0..n`.
///
/// The reduction tree depends only on `n`, so results are reproducible
/// bit-for-bit regardless of how the terms were produced.
pub(crate) fn pairwise_sum<F: Fn(usize) -> f64>(n: usize, term: F) -> f64 {
    fn rec<F: Fn(usize) -> f64>(lo: usize, hi: usize, term: &F) -> f64 {
        if hi - lo <= PAIRWISE_BLOCK {
            let mut acc = 0.0;
            for i in lo..hi {
                acc += term(i);
            }
            acc
        } else {
            let mid = lo + (hi - lo) / 2;
            rec(lo, mid, term) + rec(mid, hi, term)
        }
    }
    rec(0, n, &term)
}

/// Solves a tridiagonal system in place with the Thomas algorithm.
///
/// Row `i` reads `lower[i]·x[i−1] + diag[i]·x[i] + upper[i]·x[i+1] = rhs[i]`;
/// `lower[0]` and `upper[n−1]` are ignored. The solution overwrites `rhs`.
///
/// For M-matrices (positive diagonal, non-positive off-diagonals, diagonal
/// dominance) every intermediate quantity keeps its sign, so a nonnegative
/// right-hand side gives a nonnegative solution without cancellation.
pub(crate) fn solve_tridiagonal(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &mut [f64],
    scratch: &mut [f64],
) {
    let n = rhs.len();
    debug_assert!(lower.len() >= n && diag.len() >= n && upper.len() >= n && scratch.len() >= n);
    if n == 0 {
        return;
    }
    let mut denom = diag[0];
    scratch[0] = upper[0] / denom;
    rhs[0] /= denom;
    for i in 1..n {
        denom = diag[i] - lower[i] * scratch[i - 1];
        scratch[i] = if i + 1 < n { upper[i] / denom } else { 0.0 };
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= scratch[i] * rhs[i + 1];
    }
}

/// Ordinary least-squares line `y = slope·x + intercept` through `points`.
pub(crate) fn least_squares_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

pub(crate) fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    least_squares_fit(points).0
}
