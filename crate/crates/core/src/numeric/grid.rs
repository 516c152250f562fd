//! Radial grids, cubic Hermite interpolation and cumulative integration.

use crate::numeric::quad::gauss3;

/// `n` nodes from `a` to `b`, equally spaced in `ln r`.
pub fn log_spaced(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(a > 0.0 && b > a && n >= 2);
    let (la, lb) = (a.ln(), b.ln());
    let mut v: Vec<f64> = (0..n)
        .map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp())
        .collect();
    v[0] = a;
    v[n - 1] = b;
    v
}

/// Nodes `10^(j / per_decade)` lying in `[lo, hi]`. Grids built this way share nodes
/// wherever they overlap.
pub fn decade_lattice(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let p = per_decade as f64;
    let j0 = (lo.log10() * p - 1e-9).ceil() as i64;
    let j1 = (hi.log10() * p + 1e-9).floor() as i64;
    (j0..=j1).map(|j| 10f64.powf(j as f64 / p)).collect()
}

/// Index `i` with `xs[i] <= x <= xs[i + 1]`, clamped to the grid.
pub fn locate(xs: &[f64], x: f64) -> usize {
    let n = xs.len();
    if x <= xs[0] {
        return 0;
    }
    if x >= xs[n - 1] {
        return n - 2;
    }
    let i = xs.partition_point(|&v| v <= x);
    (i - 1).min(n - 2)
}

/// Cubic Hermite interpolant on `[x0, x1]` with end values and slopes.
pub fn hermite(x0: f64, x1: f64, y0: f64, y1: f64, d0: f64, d1: f64, x: f64) -> (f64, f64) {
    let h = x1 - x0;
    let s = (x - x0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    let v = h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1;
    let dv = ((6.0 * s2 - 6.0 * s) * (y0 - y1)) / h
        + (3.0 * s2 - 4.0 * s + 1.0) * d0
        + (3.0 * s2 - 2.0 * s) * d1;
    (v, dv)
}

/// Running integral of a sampled function using the per-interval Hermite rule
/// `h/2 (f0 + f1) + h^2/12 (f0' - f1')`. Starts at 0 on the first node.
pub fn cumulative_hermite(xs: &[f64], f: &[f64], df: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(xs.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 0..xs.len().saturating_sub(1) {
        let h = xs[i + 1] - xs[i];
        acc += 0.5 * h * (f[i] + f[i + 1]) + h * h / 12.0 * (df[i] - df[i + 1]);
        out.push(acc);
    }
    out
}

fn quad_lagrange(x: [f64; 3], y: [f64; 3], t: f64) -> f64 {
    let mut v = 0.0;
    for i in 0..3 {
        let mut l = 1.0;
        for j in 0..3 {
            if i != j {
                l *= (t - x[j]) / (x[i] - x[j]);
            }
        }
        v += y[i] * l;
    }
    v
}

/// Running integral using the quadratic through three neighbouring samples on
/// each interval; interior intervals average both stencils. No derivatives needed.
pub fn cumulative_quadratic(xs: &[f64], f: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut out = vec![0.0; n];
    if n < 3 {
        for i in 1..n {
            out[i] = out[i - 1] + 0.5 * (xs[i] - xs[i - 1]) * (f[i] + f[i - 1]);
        }
        return out;
    }
    let piece = |c: usize, i: usize| {
        let xp = [xs[c - 1], xs[c], xs[c + 1]];
        let yp = [f[c - 1], f[c], f[c + 1]];
        gauss3(|t| quad_lagrange(xp, yp, t), xs[i], xs[i + 1])
    };
    for i in 0..n - 1 {
        // averaging the left and right stencils cancels the leading error term
        let v = if i == 0 {
            piece(1, 0)
        } else if i == n - 2 {
            piece(n - 2, i)
        } else {
            0.5 * (piece(i, i) + piece(i + 1, i))
        };
        out[i + 1] = out[i] + v;
    }
    out
}
