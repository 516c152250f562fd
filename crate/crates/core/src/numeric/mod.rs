//! Numerical building blocks: root finding, quadrature, an embedded Runge–Kutta
//! integrator, grids with Hermite interpolation and small least-squares fits.

pub mod fit;
pub mod grid;
pub mod ode;
pub mod quad;
pub mod roots;

/// Binomial coefficient as a float; exact for the small arguments used here.
pub fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}
