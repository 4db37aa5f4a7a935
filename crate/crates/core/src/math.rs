// Float helpers that work without std.

pub(crate) use core::f64::consts::PI;

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub(crate) fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[inline]
pub(crate) fn cos(x: f64) -> f64 {
    libm::cos(x)
}

#[inline]
pub(crate) fn tan(x: f64) -> f64 {
    libm::tan(x)
}

#[inline]
pub(crate) fn acos(x: f64) -> f64 {
    libm::acos(x.clamp(-1.0, 1.0))
}

#[inline]
pub(crate) fn atan2(y: f64, x: f64) -> f64 {
    libm::atan2(y, x)
}

#[inline]
pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub(crate) fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

#[inline]
pub(crate) fn to_rad(deg: f64) -> f64 {
    deg * PI / 180.0
}

#[inline]
pub(crate) fn to_deg(rad: f64) -> f64 {
    rad * 180.0 / PI
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Solves `a x = b` for a small dense system by Gaussian elimination with
/// partial pivoting. Columns whose pivot vanishes get a zero coefficient.
pub(crate) fn solve_dense(mut a: alloc::vec::Vec<f64>, mut b: alloc::vec::Vec<f64>, n: usize) -> alloc::vec::Vec<f64> {
    let scale = a.iter().fold(0.0_f64, |m, v| m.max(abs(*v))).max(1.0);
    let tol = 1e-12 * scale;
    let mut pivot_col = alloc::vec![usize::MAX; n];
    let mut row = 0;
    for col in 0..n {
        if row == n {
            break;
        }
        let (best, best_val) = (row..n)
            .map(|r| (r, abs(a[r * n + col])))
            .fold((row, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best_val <= tol {
            continue;
        }
        if best != row {
            for c in 0..n {
                a.swap(row * n + c, best * n + c);
            }
            b.swap(row, best);
        }
        let p = a[row * n + col];
        for r in 0..n {
            if r == row {
                continue;
            }
            let f = a[r * n + col] / p;
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                a[r * n + c] -= f * a[row * n + c];
            }
            b[r] -= f * b[row];
        }
        pivot_col[row] = col;
        row += 1;
    }
    let mut x = alloc::vec![0.0; n];
    for r in 0..row {
        let col = pivot_col[r];
        x[col] = b[r] / a[r * n + col];
    }
    x
}

/// Ordinary least squares `y ≈ X β` via the normal equations. `x` is row-major
/// with `k` columns.
pub(crate) fn least_squares(x: &[f64], y: &[f64], k: usize) -> alloc::vec::Vec<f64> {
    let n = y.len();
    let mut xtx = alloc::vec![0.0; k * k];
    let mut xty = alloc::vec![0.0; k];
    for i in 0..n {
        let row = &x[i * k..(i + 1) * k];
        for a in 0..k {
            xty[a] += row[a] * y[i];
            for b in a..k {
                xtx[a * k + b] += row[a] * row[b];
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            xtx[a * k + b] = xtx[b * k + a];
        }
    }
    solve_dense(xtx, xty, k)
}

/// Linear-interpolation percentile (the "linear" / type-7 estimator) of an
/// ascending-sorted slice; `q` in [0, 100].
pub(crate) fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let pos = (q / 100.0).clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = libm::floor(pos) as usize;
            let hi = (lo + 1).min(n - 1);
            let frac = pos - lo as f64;
            sorted[lo] + (sorted[hi] - sorted[lo]) * frac
        }
    }
}
