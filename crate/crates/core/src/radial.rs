//! Radial solutions of `S_k / S_l = 1` outside the unit ball: the algebraic
//! equation for `U = u'/r`, the admissibility thresholds, the map from the flux
//! constant to the asymptotic constant, sampled profiles, the planar closed form
//! and the three-dimensional special Lagrangian case.

use crate::error::{Error, Result};
use crate::numeric::binom;
use crate::numeric::grid::log_spaced;
use crate::numeric::quad::integrate;
use crate::numeric::roots::newton_bisect;
use crate::symmetric::radial_hessian_sigma;
use serde::{Deserialize, Serialize};
use std::cell::RefCell;
use std::io::Write;

/// Dimension and orders `(n, k, l, m)` with `0 <= l < k <= m <= n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HqParams {
    pub n: usize,
    pub k: usize,
    pub l: usize,
    pub m: usize,
}

impl HqParams {
    pub fn new(n: usize, k: usize, l: usize, m: usize) -> Result<Self> {
        let p = HqParams { n, k, l, m };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let HqParams { n, k, l, m } = *self;
        if n < 2 {
            return Err(Error::InvalidParams(format!(
                "dimension n = {n} must be at least 2"
            )));
        }
        if !(l < k && k <= m && m <= n) {
            return Err(Error::InvalidParams(format!(
                "need 0 <= l < k <= m <= n, got (n, k, l, m) = ({n}, {k}, {l}, {m})"
            )));
        }
        Ok(())
    }

    fn require_threshold_path(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::InvalidParams(format!(
                "k = {} must be at least 2",
                self.k
            )));
        }
        Ok(())
    }

    pub fn ck(&self) -> f64 {
        binom(self.n, self.k)
    }

    pub fn cl(&self) -> f64 {
        binom(self.n, self.l)
    }

    fn kl(&self) -> f64 {
        (self.k - self.l) as f64
    }

    /// Isotropic scale making `a_hat |x|^2 / 2` an exact solution.
    pub fn a_hat(&self) -> f64 {
        (self.cl() / self.ck()).powf(1.0 / self.kl())
    }

    /// Lower end of the admissible range of `U`; zero when `l = 0`.
    pub fn gamma_star(&self) -> f64 {
        if self.l == 0 {
            return 0.0;
        }
        (self.l as f64 * self.cl() / (self.k as f64 * self.ck())).powf(1.0 / self.kl())
    }

    /// Upper end of the `m`-convex range of `U`; infinite when `m = k`.
    pub fn gamma_m(&self) -> f64 {
        if self.m == self.k {
            return f64::INFINITY;
        }
        ((self.m - self.l) as f64 * self.cl() / ((self.m - self.k) as f64 * self.ck()))
            .powf(1.0 / self.kl())
    }

    /// `C_n^k g^k - C_n^l g^l` with `g^0 = 1`.
    fn level(&self, g: f64) -> f64 {
        self.ck() * g.powi(self.k as i32) - self.cl() * g.powi(self.l as i32)
    }
}

/// `r^n (C_n^k g^k - C_n^l g^l)`: the flux constant whose solution has `U(r) = g`.
pub fn alpha_of_gamma(r: f64, gamma: f64, p: &HqParams) -> f64 {
    r.powi(p.n as i32) * p.level(gamma)
}

/// Unique root `U > gamma_star` of `U^k - (C_n^l/C_n^k) U^l - alpha / (C_n^k r^n) = 0`.
pub fn solve_u(r: f64, alpha: f64, p: &HqParams) -> Result<f64> {
    p.validate()?;
    if !(r > 0.0) {
        return Err(Error::Domain(format!("radius must be positive, got {r}")));
    }
    let (k, l, n) = (p.k as i32, p.l as i32, p.n as i32);
    let q = alpha / (p.ck() * r.powi(n));
    if p.l == 0 {
        let v = 1.0 / p.ck() + q;
        if v < 0.0 {
            return Err(Error::NoRoot(format!(
                "alpha = {alpha} gives 1 + alpha r^-n < 0 at r = {r}"
            )));
        }
        return Ok(v.powf(1.0 / k as f64));
    }
    let rho = p.cl() / p.ck();
    let f = |u: f64| {
        let uk = u.powi(k);
        let ul = u.powi(l);
        (
            uk - rho * ul - q,
            k as f64 * uk / u - l as f64 * rho * ul / u,
        )
    };
    let gs = p.gamma_star();
    let (f_gs, _) = f(gs);
    let scale = gs.powi(k) + rho * gs.powi(l) + q.abs();
    if f_gs > 1e-14 * scale {
        return Err(Error::NoRoot(format!(
            "alpha = {alpha} is below the admissible level {} at r = {r}",
            alpha_of_gamma(r, gs, p)
        )));
    }
    if f_gs >= -1e-15 * scale {
        return Ok(gs);
    }
    let mut hi = p.a_hat().max(2.0) * (1.0 + alpha.abs()).powf(1.0 / k as f64);
    let mut tries = 0;
    while f(hi).0 <= 0.0 {
        hi *= 2.0;
        tries += 1;
        if tries > 200 {
            return Err(Error::numeric("solve_u", "bracket expansion failed"));
        }
    }
    newton_bisect(f, gs, hi, 1e-15)
}

/// Both admissibility thresholds together with the grid cross-check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub alpha1: f64,
    /// `f64::INFINITY` when `m = k`.
    pub alpha2: f64,
    /// Largest deviation between the limit values and the grid sup/inf.
    pub grid_discrepancy: f64,
}

impl Thresholds {
    pub fn alpha2_finite(&self) -> Result<f64> {
        if self.alpha2.is_finite() {
            Ok(self.alpha2)
        } else {
            Err(Error::NotApplicable("alpha2 is infinite when m = k".into()))
        }
    }
}

/// `alpha1 = sup_{r>1} alpha_of_gamma(r, gamma_star)`, `alpha2 = inf_{r>1} alpha_of_gamma(r, gamma_m)`.
pub fn thresholds(p: &HqParams) -> Result<Thresholds> {
    p.validate()?;
    p.require_threshold_path()?;
    let grid = log_spaced(1.0 + 1e-9, 1e3, 400);
    let a1 = p.level(p.gamma_star());
    let mut sup = a1; // value of the r -> 1+ limit
    for &r in &grid {
        sup = sup.max(alpha_of_gamma(r, p.gamma_star(), p));
    }
    let mut disc = (sup - a1).abs();
    let a2 = if p.m == p.k {
        f64::INFINITY
    } else {
        let a2 = p.level(p.gamma_m());
        let mut inf = a2;
        for &r in &grid {
            inf = inf.min(alpha_of_gamma(r, p.gamma_m(), p));
        }
        disc = disc.max((inf - a2).abs());
        a2
    };
    if disc > 1e-10 {
        return Err(Error::numeric(
            "thresholds",
            format!("grid extremum differs from limit by {disc:e}"),
        ));
    }
    Ok(Thresholds {
        alpha1: a1,
        alpha2: a2,
        grid_discrepancy: disc,
    })
}

fn check_admissible(alpha: f64, p: &HqParams) -> Result<f64> {
    let a1 = thresholds(p)?.alpha1;
    if alpha < a1 - 1e-14 * a1.abs().max(1.0) {
        return Err(Error::Inadmissible { alpha, alpha1: a1 });
    }
    Ok(a1)
}

/// `s (U(s) - a_hat)` written as `a_hat s ((1 + x)^(1/(k-l)) - 1)` to avoid cancellation.
fn excess_integrand(s: f64, alpha: f64, p: &HqParams) -> Result<f64> {
    let u = solve_u(s, alpha, p)?;
    let x = alpha / (p.cl() * s.powi(p.n as i32) * u.powi(p.l as i32));
    Ok(p.a_hat() * s * ((x.ln_1p()) / p.kl()).exp_m1())
}

/// `a_hat * int_r^inf s((1 + x)^(1/(k-l)) - 1) ds`, i.e. the gap between the
/// asymptotic quadratic and the solution at radius `r`.
pub fn excess_tail(alpha: f64, r: f64, p: &HqParams) -> Result<f64> {
    p.validate()?;
    if p.n < 3 {
        return Err(Error::NotApplicable(
            "n = 2 is handled by dim2_solution".into(),
        ));
    }
    if alpha == 0.0 {
        return Ok(0.0);
    }
    let nn = p.n as f64;
    let err: RefCell<Option<Error>> = RefCell::new(None);
    let g = |t: f64| {
        let s = t.exp();
        match excess_integrand(s, alpha, p) {
            Ok(v) => v * s,
            Err(e) => {
                err.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        }
    };
    let mut upper = (r.max(1.0) * 1e4).ln();
    loop {
        let big_r = upper.exp();
        let body = integrate(g, r.ln(), upper, 1e-14, 1e-13);
        if let Some(e) = err.borrow_mut().take() {
            return Err(e);
        }
        let body = body?;
        let kk = excess_integrand(big_r, alpha, p)? * big_r.powf(nn - 1.0);
        let tail = kk * big_r.powf(2.0 - nn) / (nn - 2.0);
        // the power-law tail model is off by a relative O(R^-n)
        if (tail * big_r.powf(-nn)).abs() < 1e-14 || upper > 200.0 {
            return Ok(body.value + tail);
        }
        upper += 10f64.ln() * 2.0;
    }
}

/// Asymptotic constant `c` of the radial solution with flux `alpha` and `u(1) = b`.
pub fn mu_of_alpha(alpha: f64, b: f64, p: &HqParams) -> Result<f64> {
    p.validate()?;
    if p.n == 2 {
        return Err(Error::NotApplicable(
            "n = 2 is handled by dim2_solution".into(),
        ));
    }
    check_admissible(alpha, p)?;
    Ok(b - p.a_hat() / 2.0 + excess_tail(alpha, 1.0, p)?)
}

/// Sampled radial solution with per-node diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct RadialSolution {
    pub params: HqParams,
    pub alpha: f64,
    pub b: f64,
    pub c: f64,
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    pub du: Vec<f64>,
    pub d2u: Vec<f64>,
    pub big_u: Vec<f64>,
    /// `S_k/S_l - 1`; `NaN` where `u''` is unbounded (only at `r = 1` when `alpha = alpha1`).
    pub residual: Vec<f64>,
    /// Flux mismatch relative to the size of the two flux terms.
    pub flux_drift: Vec<f64>,
}

impl RadialSolution {
    pub fn max_residual(&self) -> f64 {
        self.residual
            .iter()
            .filter(|v| v.is_finite())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_flux_drift(&self) -> f64 {
        self.flux_drift.iter().fold(0.0, |m, v| m.max(*v))
    }

    /// `u - (a_hat r^2 / 2 + c)` at the nodes.
    pub fn remainder(&self) -> Vec<f64> {
        let ah = self.params.a_hat();
        self.r
            .iter()
            .zip(&self.u)
            .map(|(r, u)| u - (ah * r * r / 2.0 + self.c))
            .collect()
    }

    /// CSV with columns `r,u,du,U,residual`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "r,u,du,U,residual")?;
        for i in 0..self.r.len() {
            writeln!(
                w,
                "{:e},{:e},{:e},{:e},{:e}",
                self.r[i], self.u[i], self.du[i], self.big_u[i], self.residual[i]
            )?;
        }
        Ok(())
    }
}

/// Radial solution on `r_grid` (increasing, starting at or above 1).
pub fn radial_profile(alpha: f64, b: f64, p: &HqParams, r_grid: &[f64]) -> Result<RadialSolution> {
    p.validate()?;
    if p.n < 3 {
        return Err(Error::NotApplicable(
            "n = 2 is handled by dim2_solution".into(),
        ));
    }
    if r_grid.is_empty() || r_grid[0] < 1.0 || r_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParams(
            "radial grid must be strictly increasing and start at r >= 1".into(),
        ));
    }
    check_admissible(alpha, p)?;
    let c = mu_of_alpha(alpha, b, p)?;
    let ah = p.a_hat();
    let (n, k, l) = (p.n as i32, p.k as i32, p.l as i32);
    let npts = r_grid.len();
    let mut sol = RadialSolution {
        params: *p,
        alpha,
        b,
        c,
        r: r_grid.to_vec(),
        u: Vec::with_capacity(npts),
        du: Vec::with_capacity(npts),
        d2u: Vec::with_capacity(npts),
        big_u: Vec::with_capacity(npts),
        residual: Vec::with_capacity(npts),
        flux_drift: Vec::with_capacity(npts),
    };
    let mut acc = 0.0;
    let mut prev = 1.0;
    let mut prev_f = excess_integrand(1.0, alpha, p)?;
    for &r in r_grid {
        if r > prev {
            // Simpson on [prev, r] for the part beyond the quadratic
            let mid = 0.5 * (prev + r);
            let fm = excess_integrand(mid, alpha, p)?;
            let fr = excess_integrand(r, alpha, p)?;
            acc += (r - prev) / 6.0 * (prev_f + 4.0 * fm + fr);
            prev = r;
            prev_f = fr;
        }
        let uu = solve_u(r, alpha, p)?;
        let du = r * uu;
        let den = r.powi(n)
            * (p.k as f64 * p.ck() * uu.powi(k - 1) - p.l as f64 * p.cl() * uu.powi(l - 1));
        let d2u = if den > 0.0 {
            uu - p.n as f64 * alpha / den
        } else {
            f64::INFINITY
        };
        let sk = radial_hessian_sigma(du, d2u, r, p.k, p.n)?;
        let sl = radial_hessian_sigma(du, d2u, r, p.l, p.n)?;
        let resid = if d2u.is_finite() {
            sk / sl - 1.0
        } else {
            f64::NAN
        };
        let t1 = p.ck() * r.powi(n - k) * du.powi(k);
        let t2 = p.cl() * r.powi(n - l) * du.powi(l);
        sol.flux_drift
            .push(((t1 - t2) - alpha).abs() / (t1.abs() + t2.abs()));
        sol.u.push(b + ah / 2.0 * (r * r - 1.0) + acc);
        sol.du.push(du);
        sol.d2u.push(d2u);
        sol.big_u.push(uu);
        sol.residual.push(resid);
        if d2u.is_finite() {
            let boundary = r == 1.0;
            for j in 1..=p.m {
                let s = radial_hessian_sigma(du, d2u, r, j, p.n)?;
                let floor = if boundary {
                    -1e-12 * binom(p.n, j) * uu.powi(j as i32).max(1.0)
                } else {
                    0.0
                };
                if s <= floor {
                    return Err(Error::ConeViolation {
                        order: j,
                        r,
                        value: s,
                    });
                }
            }
        }
    }
    Ok(sol)
}

/// Planar closed form (`n = 2`, `k = 2`, `l = 1`).
#[derive(Debug, Clone, Serialize)]
pub struct Dim2Solution {
    pub rho: f64,
    pub b: f64,
    pub nu: f64,
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    pub du: Vec<f64>,
    /// `u - (r^2 + (rho/2) ln r + nu)`, evaluated without cancellation.
    pub remainder: Vec<f64>,
}

/// Constant term of the planar solution's expansion.
pub fn dim2_nu(rho: f64, b: f64) -> Result<f64> {
    if !(rho >= -1.0) {
        return Err(Error::Hypothesis(format!(
            "no solution exists for rho = {rho} < -1"
        )));
    }
    let s = (1.0 + rho).sqrt();
    let log_term = if rho == 0.0 {
        0.0
    } else {
        rho * (1.0 + s).ln()
    };
    Ok(b - 0.5 + rho / 4.0 + rho / 2.0 * 2f64.ln() - 0.5 * (s + log_term))
}

fn dim2_remainder(rho: f64, r: f64) -> f64 {
    let s = (r * r + rho).sqrt();
    let w = s + r;
    -rho * rho / (4.0 * w * w) + rho / 2.0 * (rho / (2.0 * r * w)).ln_1p()
}

pub fn dim2_solution(rho: f64, b: f64, r_grid: &[f64]) -> Result<Dim2Solution> {
    let nu = dim2_nu(rho, b)?;
    if r_grid.is_empty() || r_grid[0] < 1.0 {
        return Err(Error::InvalidParams("grid must start at r >= 1".into()));
    }
    let s1 = (1.0 + rho).sqrt();
    let c1 = s1
        + if rho == 0.0 {
            0.0
        } else {
            rho * (1.0 + s1).ln()
        };
    let mut sol = Dim2Solution {
        rho,
        b,
        nu,
        r: r_grid.to_vec(),
        u: vec![],
        du: vec![],
        remainder: vec![],
    };
    for &r in r_grid {
        let s = (r * r + rho).sqrt();
        let lg = if rho == 0.0 { 0.0 } else { rho * (r + s).ln() };
        sol.u
            .push(b - 0.5 + r * r / 2.0 + 0.5 * (r * s + lg) - 0.5 * c1);
        sol.du.push(r + s);
        sol.remainder.push(dim2_remainder(rho, r));
    }
    Ok(sol)
}

/// `det D^2 u = Delta u` in three dimensions: parameters `(n, k, l, m) = (3, 3, 1, 3)`.
pub fn special_lagrangian_3d(alpha: f64, b: f64, r_grid: &[f64]) -> Result<RadialSolution> {
    radial_profile(
        alpha,
        b,
        &HqParams {
            n: 3,
            k: 3,
            l: 1,
            m: 3,
        },
        r_grid,
    )
}

/// Default radial grid: 2000 log-spaced nodes on `[1, 1e3]`.
pub fn default_grid() -> Vec<f64> {
    log_spaced(1.0, 1e3, 2000)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(n: usize, k: usize, l: usize, m: usize) -> HqParams {
        HqParams::new(n, k, l, m).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(HqParams::new(3, 2, 2, 3).is_err());
        assert!(HqParams::new(3, 3, 1, 2).is_err());
        assert!(HqParams::new(1, 1, 0, 1).is_err());
        let q = p(5, 3, 1, 4);
        assert!(q.gamma_star() < q.a_hat() && q.a_hat() < q.gamma_m());
        assert_eq!(p(3, 2, 0, 2).gamma_m(), f64::INFINITY);
    }

    #[test]
    fn solve_u_examples() {
        let q = p(4, 2, 1, 3);
        for r in [1.0, 2.0, 50.0] {
            assert!((solve_u(r, 0.0, &q).unwrap() / q.a_hat() - 1.0).abs() < 1e-14);
        }
        assert_eq!(solve_u(1.0, -2.0, &p(3, 3, 1, 3)).unwrap(), 1.0);
        let v = solve_u(2.0, 1.0, &p(3, 2, 0, 2)).unwrap();
        assert!((v - ((1.0 + 0.125) / 3.0f64).sqrt()).abs() < 1e-15);
        assert!(matches!(
            solve_u(1.0, -2.5, &p(3, 3, 1, 3)),
            Err(Error::NoRoot(_))
        ));
        assert!(matches!(
            solve_u(1.0, -1.5, &p(3, 2, 0, 2)),
            Err(Error::NoRoot(_))
        ));
    }

    #[test]
    fn alpha_of_gamma_examples() {
        let q = p(4, 3, 1, 4);
        assert!(alpha_of_gamma(3.0, q.a_hat(), &q).abs() < 1e-12);
        assert_eq!(alpha_of_gamma(1.0, 1.0, &p(3, 3, 1, 3)), -2.0);
        for (n, k) in [(3, 2), (5, 4)] {
            let q = p(n, k, 0, k);
            assert_eq!(alpha_of_gamma(1.0, 0.0, &q), -1.0);
            assert_eq!(alpha_of_gamma(2.0, 0.0, &q), -(2f64.powi(n as i32)));
        }
    }

    #[test]
    fn threshold_examples() {
        for (k, m, n) in [(2, 3, 3), (2, 4, 5), (3, 5, 5)] {
            let t = thresholds(&p(n, k, 0, m)).unwrap();
            assert!((t.alpha1 + 1.0).abs() < 1e-12);
            assert!((t.alpha2 - k as f64 / (m - k) as f64).abs() < 1e-12);
        }
        let t = thresholds(&p(3, 3, 1, 3)).unwrap();
        assert!((t.alpha1 + 2.0).abs() < 1e-12 && t.alpha2 == f64::INFINITY);
        assert!(matches!(t.alpha2_finite(), Err(Error::NotApplicable(_))));
        let t = thresholds(&p(3, 2, 0, 2)).unwrap();
        assert_eq!((t.alpha1, t.alpha2), (-1.0, f64::INFINITY));
    }

    #[test]
    fn lower_threshold_matches_exponent_form() {
        // alpha1 equals (l C_n^l / (k C_n^k))^(l/(k-l)) (l/k - 1) C_n^l
        for (n, k, l) in [(3, 3, 1), (5, 3, 2), (6, 4, 1)] {
            let q = p(n, k, l, k);
            let (kf, lf) = (k as f64, l as f64);
            let alt = (lf * q.cl() / (kf * q.ck())).powf(lf / (kf - lf)) * (lf / kf - 1.0) * q.cl();
            assert!((thresholds(&q).unwrap().alpha1 - alt).abs() < 1e-12);
        }
    }

    #[test]
    fn mu_examples() {
        let q = p(4, 2, 1, 3);
        assert_eq!(mu_of_alpha(0.0, 0.7, &q).unwrap(), 0.7 - q.a_hat() / 2.0);
        assert!(matches!(
            mu_of_alpha(0.0, 0.0, &p(2, 2, 1, 2)),
            Err(Error::NotApplicable(_))
        ));
        assert!(matches!(
            mu_of_alpha(-1.5, 0.0, &p(3, 2, 0, 2)),
            Err(Error::Inadmissible { .. })
        ));
        let t = thresholds(&p(3, 3, 1, 3)).unwrap();
        assert!(mu_of_alpha(t.alpha1, 0.0, &p(3, 3, 1, 3))
            .unwrap()
            .is_finite());
    }

    #[test]
    fn mu_against_trapezoid() {
        // k=2, l=0, n=3: integrand s((1 + alpha s^-3)^(1/2) - 1), a_hat = 3^-1/2
        let q = p(3, 2, 0, 2);
        let ah = 3f64.powf(-0.5);
        let f = |s: f64| {
            let x = 1.0 / (s * s * s);
            s * x / ((1.0 + x).sqrt() + 1.0)
        };
        // trapezoid in t = ln s on [0, ln 1e6] plus the s^-2 tail
        let nodes = 600_000;
        let t_max = 1e6f64.ln();
        let h = t_max / nodes as f64;
        let mut sum = 0.0;
        for i in 0..=nodes {
            let t = i as f64 * h;
            let w = if i == 0 || i == nodes { 0.5 } else { 1.0 };
            sum += w * f(t.exp()) * t.exp();
        }
        let tail = 0.5 / 1e6;
        let oracle = -ah / 2.0 + ah * (sum * h + tail);
        let got = mu_of_alpha(1.0, 0.0, &q).unwrap();
        assert!((got - oracle).abs() < 1e-6, "{got} vs {oracle}");
    }

    #[test]
    fn zero_flux_profile_is_quadratic() {
        let q = p(3, 2, 1, 3);
        let grid = log_spaced(1.0, 100.0, 200);
        let s = radial_profile(0.0, 1.5, &q, &grid).unwrap();
        for i in 0..grid.len() {
            let r = grid[i];
            assert!(
                (s.u[i] - (q.a_hat() * r * r / 2.0 + 1.5 - q.a_hat() / 2.0)).abs() < 1e-10 * r * r
            );
            assert!(s.residual[i].abs() < 1e-14);
        }
    }

    #[test]
    fn remainder_slope() {
        for (q, alpha) in [(p(3, 2, 0, 3), 0.5), (p(4, 2, 1, 3), 1.0)] {
            let full = log_spaced(1.0, 1e3, 601);
            let s = radial_profile(alpha, 0.0, &q, &full).unwrap();
            let e = s.remainder();
            let x: Vec<f64> = full[200..].iter().map(|r| r.ln()).collect();
            let y: Vec<f64> = e[200..].iter().map(|v| v.abs().ln()).collect();
            let fit = crate::numeric::fit::fit_line(&x, &y);
            assert!(
                (fit.slope - (2.0 - q.n as f64)).abs() < 0.15,
                "slope {}",
                fit.slope
            );
            // the direct tail integral agrees with the subtraction
            let direct = -excess_tail(alpha, 100.0, &q).unwrap();
            let i = full
                .iter()
                .position(|r| (*r - 100.0).abs() < 1e-9)
                .unwrap_or(0);
            if i > 0 {
                assert!((direct - e[i]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn cone_violation_above_alpha2() {
        let q = p(3, 2, 0, 3);
        let t = thresholds(&q).unwrap();
        let grid = log_spaced(1.0, 10.0, 50);
        let err = radial_profile(t.alpha2 * 1.001, 0.0, &q, &grid).unwrap_err();
        assert!(
            matches!(err, Error::ConeViolation { order: 3, .. }),
            "{err:?}"
        );
        assert!(matches!(
            radial_profile(t.alpha1 - 1e-3, 0.0, &q, &grid),
            Err(Error::Inadmissible { .. })
        ));
        let ok = radial_profile(t.alpha2 * 0.999, 0.0, &q, &grid).unwrap();
        assert!(ok.d2u.iter().all(|v| *v > 0.0));
    }

    #[test]
    fn dim2_examples() {
        assert!((dim2_nu(0.0, 3.0).unwrap() - 2.0).abs() < 1e-15);
        let v = dim2_nu(-1.0, 3.0).unwrap();
        assert!((v - (3.0 - 0.75 - 2f64.ln() / 2.0)).abs() < 1e-15);
        assert!(matches!(dim2_nu(-1.01, 0.0), Err(Error::Hypothesis(_))));
        let grid = log_spaced(1.0, 50.0, 100);
        for rho in [-1.0, -0.3, 0.0, 2.0, 10.0] {
            let s = dim2_solution(rho, 0.4, &grid).unwrap();
            assert!((s.u[0] - 0.4).abs() < 1e-14);
            for i in 0..grid.len() {
                let (r, d) = (grid[i], s.du[i]);
                assert!((d * d - 2.0 * r * d - rho).abs() <= 1e-12 * d * d);
                let direct = s.u[i] - (r * r + rho / 2.0 * r.ln() + s.nu);
                assert!((direct - s.remainder[i]).abs() < 1e-11 * r * r);
            }
        }
    }

    #[test]
    fn special_lagrangian_zero_flux() {
        let grid = log_spaced(1.0, 10.0, 50);
        let s = special_lagrangian_3d(0.0, 1.0, &grid).unwrap();
        assert!((s.c - (1.0 - 3f64.sqrt() / 2.0)).abs() < 1e-14);
        assert!((s.params.a_hat() - 3f64.sqrt()).abs() < 1e-15);
        assert!(special_lagrangian_3d(-2.1, 1.0, &grid).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn round_trip(which in 0usize..4, r in 1.0f64..200.0, frac in 0.0f64..1.0) {
            let q = [p(3, 2, 0, 3), p(4, 2, 1, 3), p(3, 3, 1, 3), p(5, 3, 2, 4)][which];
            let t = thresholds(&q).unwrap();
            let hi = if t.alpha2.is_finite() { t.alpha2 } else { 5.0 };
            let alpha = t.alpha1 + frac * (hi - t.alpha1);
            let u = solve_u(r, alpha, &q).unwrap();
            let back = alpha_of_gamma(r, u, &q);
            let scale = r.powi(q.n as i32) * (q.ck() * u.powi(q.k as i32) + q.cl() * u.powi(q.l as i32));
            prop_assert!((back - alpha).abs() <= 1e-10 * scale.max(1.0));
            prop_assert!(u >= q.gamma_star());
            // dU/dalpha > 0
            let u2 = solve_u(r, alpha + 1e-6 * (1.0 + alpha.abs()) * r.powi(q.n as i32), &q).unwrap();
            prop_assert!(u2 > u);
        }

        #[test]
        fn profile_stays_in_cone(which in 0usize..3, frac in 0.01f64..0.99) {
            let q = [p(3, 2, 0, 3), p(4, 2, 1, 3), p(5, 3, 1, 4)][which];
            let t = thresholds(&q).unwrap();
            let alpha = t.alpha1 + frac * (t.alpha2 - t.alpha1);
            let grid = log_spaced(1.0, 100.0, 60);
            let s = radial_profile(alpha, 0.0, &q, &grid).unwrap();
            for i in 0..grid.len() {
                prop_assert!(s.big_u[i] > q.gamma_star() && s.big_u[i] < q.gamma_m());
                // u'' may be negative near r = 1 when m < n; positivity is only forced for m = n
                if q.m == q.n {
                    prop_assert!(s.d2u[i] > 0.0);
                }
            }
        }
    }
}
