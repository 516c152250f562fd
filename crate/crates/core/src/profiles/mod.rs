//! Profile ODEs for generalized symmetric sub- and supersolutions.
//!
//! Each profile `f` solves `r f' = -(f / t_up) (f^m - g) / (f^m - g t_lo / t_up)` with
//! `m = k - l` and `g` one member of a [`GEnvelope`]. The unknown actually integrated is
//! the excess `D = f^m - g` as a function of `t = ln r`, which keeps full relative
//! precision in the far field where `D` decays like a power of `r`.

pub mod envelope;

pub use envelope::{Drive, G0Spec, GEnvelope};

use crate::error::{Error, Result};
use crate::numeric::grid::{cumulative_quadratic, decade_lattice, hermite, locate};
use crate::numeric::ode::{integrate_nodes, OdeOptions};
use crate::numeric::roots::newton_bisect;
use crate::symmetric::Spectrum;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Smallest radius accepted for the leftward continuation of sub/super profiles.
pub const R_MIN_EXTENSION: f64 = 1e-3;

/// Extremal directional ratios feeding the profile ODEs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileExponents {
    pub k: usize,
    pub l: usize,
    /// largest ratio for order `k`
    pub t_upper: f64,
    /// smallest ratio for order `l`
    pub t_lower: f64,
}

impl ProfileExponents {
    pub fn new(k: usize, l: usize, t_upper: f64, t_lower: f64) -> Result<Self> {
        if l >= k {
            return Err(Error::InvalidParams(format!(
                "need l < k, got k={k}, l={l}"
            )));
        }
        if !(t_upper > 0.0 && t_upper <= 1.0 + 1e-12 && t_lower >= 0.0 && t_lower < t_upper) {
            return Err(Error::Hypothesis(format!(
                "ratio bounds must satisfy 0 <= t_lower < t_upper <= 1, got {t_lower}, {t_upper}"
            )));
        }
        Ok(ProfileExponents {
            k,
            l,
            t_upper,
            t_lower,
        })
    }

    pub fn from_spectrum(a: &Spectrum, k: usize, l: usize) -> Result<Self> {
        let up = a.t_bounds(k)?.t_upper;
        let lo = a.t_bounds(l)?.t_lower;
        ProfileExponents::new(k, l, up, lo)
    }

    pub fn gap(&self) -> f64 {
        (self.k - self.l) as f64
    }

    /// `t_lower / t_upper`, below one.
    pub fn ratio(&self) -> f64 {
        self.t_lower / self.t_upper
    }

    /// Decay exponent `(k - l) / (t_upper - t_lower)`.
    pub fn decay(&self) -> f64 {
        self.gap() / (self.t_upper - self.t_lower)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileKind {
    /// decreasing profile driven by the upper envelope, `f(1) = delta`
    Sub { delta: f64 },
    /// increasing profile driven by the lower envelope, `f(1) = tau`
    Super { tau: f64 },
    /// reference profile driven by `g0`, regular at the origin
    Reference,
}

impl ProfileKind {
    pub fn drive(&self) -> Drive {
        match self {
            ProfileKind::Sub { .. } => Drive::Upper,
            ProfileKind::Super { .. } => Drive::Lower,
            ProfileKind::Reference => Drive::Base,
        }
    }
}

/// Value, slope and excess over `g0` at one radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfilePoint {
    pub value: f64,
    pub deriv: f64,
    /// `value^m - g0(r)`
    pub excess_g0: f64,
}

/// A profile on a strictly increasing radial grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampledProfile {
    pub kind: ProfileKind,
    pub exps: ProfileExponents,
    pub envelope: GEnvelope,
    pub r: Vec<f64>,
    pub value: Vec<f64>,
    pub deriv: Vec<f64>,
    /// `value^m` minus the driving function
    pub excess: Vec<f64>,
    /// `d excess / d ln r`
    pub excess_rate: Vec<f64>,
    pub bound_low: Vec<f64>,
    pub bound_high: Vec<f64>,
    /// quotient residual with a finite-difference slope, relative to the driving function
    pub residual: Vec<f64>,
}

/// `d D / d ln r` for the excess `D = f^m - g`; `right` picks the one-sided limit at the
/// envelope's switch radius.
fn excess_rate(
    exps: &ProfileExponents,
    env: &GEnvelope,
    drive: Drive,
    r: f64,
    d: f64,
    right: bool,
) -> Result<f64> {
    let g = env.eval(drive, r);
    let den = exps.t_upper * d + g * (exps.t_upper - exps.t_lower);
    if !(den > 1e-14 * g * exps.t_upper) {
        return Err(Error::Singularity { r });
    }
    Ok(-exps.gap() * (g + d) * d / den - r * env.eval_deriv_sided(drive, r, right))
}

/// `f'(r)` from the profile ODE given the excess.
fn slope(exps: &ProfileExponents, g: f64, f: f64, d: f64, r: f64) -> f64 {
    -(f / (r * exps.t_upper)) * d / (d + g * (1.0 - exps.ratio()))
}

/// `a - b` from `a^m - b^m` without cancellation.
pub fn root_gap(a: f64, b: f64, power_gap: f64, m: usize) -> f64 {
    let mut s = 0.0;
    for j in 0..m {
        s += a.powi((m - 1 - j) as i32) * b.powi(j as i32);
    }
    power_gap / s
}

impl SampledProfile {
    pub fn m(&self) -> usize {
        self.exps.k - self.exps.l
    }

    pub fn drive(&self, r: f64) -> f64 {
        self.envelope.eval(self.kind.drive(), r)
    }

    /// Evaluates by cubic Hermite interpolation of the excess in `ln r`; the slope comes
    /// from the ODE so that the evaluator satisfies it exactly.
    pub fn eval(&self, r: f64) -> Result<ProfilePoint> {
        let n = self.r.len();
        if !(r >= self.r[0] * (1.0 - 1e-14) && r <= self.r[n - 1] * (1.0 + 1e-14)) {
            return Err(Error::Domain(format!(
                "radius {r} outside profile range [{}, {}]",
                self.r[0],
                self.r[n - 1]
            )));
        }
        let i = locate(&self.r, r);
        let d = if r == self.r[i] {
            self.excess[i]
        } else if r == self.r[i + 1] {
            self.excess[i + 1]
        } else {
            let (t0, t1) = (self.r[i].ln(), self.r[i + 1].ln());
            // stored rates are limits from above; the right end of an interval ending at the
            // switch radius needs the limit from below
            let rate1 = if self.r[i + 1] == self.envelope.theta0 {
                excess_rate(
                    &self.exps,
                    &self.envelope,
                    self.kind.drive(),
                    self.r[i + 1],
                    self.excess[i + 1],
                    false,
                )?
            } else {
                self.excess_rate[i + 1]
            };
            hermite(
                t0,
                t1,
                self.excess[i],
                self.excess[i + 1],
                self.excess_rate[i],
                rate1,
                r.ln(),
            )
            .0
        };
        let drive = self.kind.drive();
        let g = self.envelope.eval(drive, r);
        let p = g + d;
        if !(p > 0.0) {
            return Err(Error::numeric(
                "profile_eval",
                format!("nonpositive power at r = {r}"),
            ));
        }
        let value = p.powf(1.0 / self.exps.gap());
        Ok(ProfilePoint {
            value,
            deriv: slope(&self.exps, g, value, d, r),
            excess_g0: self.envelope.drive_offset(drive, r) + d,
        })
    }

    /// `self(r) - other(r)` computed from the excesses over `g0`.
    pub fn gap_to(&self, other: &SampledProfile, r: f64) -> Result<f64> {
        let a = self.eval(r)?;
        let b = other.eval(r)?;
        Ok(root_gap(
            a.value,
            b.value,
            a.excess_g0 - b.excess_g0,
            self.m(),
        ))
    }

    /// Derivative of the profile with respect to its value at `r = 1`, from the
    /// linearised ODE: `q = exp(-int p'(f) d ln r)` with `f_t = -p(f)`.
    pub fn parameter_sensitivity(&self) -> Result<Vec<f64>> {
        if matches!(self.kind, ProfileKind::Reference) {
            return Err(Error::NotApplicable(
                "reference profile has no free parameter".into(),
            ));
        }
        let rho = self.exps.ratio();
        let m = self.exps.gap();
        let ts: Vec<f64> = self.r.iter().map(|r| r.ln()).collect();
        let dp: Vec<f64> = (0..self.r.len())
            .map(|i| {
                let d = self.excess[i];
                let g = self.drive(self.r[i]);
                let w = d + g * (1.0 - rho);
                (d / w + m * (g + d) * g * (1.0 - rho) / (w * w)) / self.exps.t_upper
            })
            .collect();
        let cum = cumulative_quadratic(&ts, &dp);
        let i1 = self
            .r
            .iter()
            .position(|r| *r == 1.0)
            .ok_or_else(|| Error::numeric("sensitivity", "grid lacks r = 1"))?;
        Ok(cum.iter().map(|c| (-(c - cum[i1])).exp()).collect())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "r,value,deriv,bound_low,bound_high,residual")?;
        for i in 0..self.r.len() {
            writeln!(
                w,
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.6e}",
                self.r[i],
                self.value[i],
                self.deriv[i],
                self.bound_low[i],
                self.bound_high[i],
                self.residual[i]
            )?;
        }
        Ok(())
    }

    pub fn max_residual(&self) -> f64 {
        self.residual.iter().fold(0.0, |m, v| m.max(*v))
    }
}

/// Default output grid: `per_decade` nodes per decade on `[lo, hi]`. Grids of the same
/// density share nodes.
pub fn profile_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    decade_lattice(lo, hi, per_decade)
}

fn check_grid(r: &[f64]) -> Result<()> {
    if r.len() < 3 {
        return Err(Error::InvalidParams(
            "profile grid needs at least 3 nodes".into(),
        ));
    }
    if r.windows(2).any(|w| !(w[1] > w[0])) || !(r[0] > 0.0) {
        return Err(Error::InvalidParams(
            "profile grid must be positive and strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Fills value, slope, bounds-free columns from the excess.
fn finish(
    kind: ProfileKind,
    exps: &ProfileExponents,
    env: &GEnvelope,
    r: Vec<f64>,
    excess: Vec<f64>,
    bounds: impl Fn(f64) -> (f64, f64),
) -> Result<SampledProfile> {
    let drive = kind.drive();
    let m = exps.gap();
    let n = r.len();
    let mut value = Vec::with_capacity(n);
    let mut deriv = Vec::with_capacity(n);
    let mut rate = Vec::with_capacity(n);
    let (mut lo, mut hi) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for i in 0..n {
        let g = env.eval(drive, r[i]);
        let p = g + excess[i];
        if !(p > 0.0) || !p.is_finite() {
            return Err(Error::numeric(
                "profile",
                format!("nonpositive power {p} at r = {}", r[i]),
            ));
        }
        let f = p.powf(1.0 / m);
        value.push(f);
        deriv.push(slope(exps, g, f, excess[i], r[i]));
        rate.push(excess_rate(exps, env, drive, r[i], excess[i], true)?);
        let (a, b) = bounds(r[i]);
        lo.push(a);
        hi.push(b);
    }
    // quotient residual with a three-point slope in ln r
    let ts: Vec<f64> = r.iter().map(|x| x.ln()).collect();
    let lnf: Vec<f64> = value.iter().map(|x| x.ln()).collect();
    let mut residual = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b, c) = if i == 0 {
            (0, 1, 2)
        } else if i == n - 1 {
            (n - 3, n - 2, n - 1)
        } else {
            (i - 1, i, i + 1)
        };
        // derivative at ts[i] of the quadratic through (a, b, c)
        let (x0, x1, x2) = (ts[a], ts[b], ts[c]);
        let x = ts[i];
        let q = lnf[a] * (2.0 * x - x1 - x2) / ((x0 - x1) * (x0 - x2))
            + lnf[b] * (2.0 * x - x0 - x2) / ((x1 - x0) * (x1 - x2))
            + lnf[c] * (2.0 * x - x0 - x1) / ((x2 - x0) * (x2 - x1));
        let g = env.eval(drive, r[i]);
        let p = value[i].powf(m);
        let quotient = p * (1.0 + exps.t_upper * q) / (1.0 + exps.t_lower * q);
        residual.push((quotient / g - 1.0).abs());
    }
    Ok(SampledProfile {
        kind,
        exps: *exps,
        envelope: env.clone(),
        r,
        value,
        deriv,
        excess,
        excess_rate: rate,
        bound_low: lo,
        bound_high: hi,
        residual,
    })
}

/// Integrates the excess from `r = 1` through the grid. The envelope's switch radius,
/// where the driving function has a kink, is inserted as a node when it falls inside.
/// Returns the possibly augmented grid and the excess on it.
fn integrate_excess(
    exps: &ProfileExponents,
    env: &GEnvelope,
    drive: Drive,
    r: &[f64],
    d1: f64,
    opts: &OdeOptions,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut grid = r.to_vec();
    let kink = env.theta0;
    if kink > grid[0] && kink < grid[grid.len() - 1] && !grid.contains(&kink) {
        let pos = grid.partition_point(|x| *x < kink);
        grid.insert(pos, kink);
    }
    let i1 = grid
        .iter()
        .position(|x| *x == 1.0)
        .ok_or_else(|| Error::InvalidParams("profile grid must contain r = 1".into()))?;
    if grid[0] < R_MIN_EXTENSION * (1.0 - 1e-12) {
        return Err(Error::Domain(format!(
            "leftward continuation is limited to r >= {R_MIN_EXTENSION}, grid starts at {}",
            grid[0]
        )));
    }
    let ts_right: Vec<f64> = grid[i1..].iter().map(|x| x.ln()).collect();
    let mut out = integrate_nodes(
        |t, d| excess_rate(exps, env, drive, t.exp(), d, true),
        &ts_right,
        d1,
        opts,
    )?;
    if i1 > 0 {
        log::warn!(
            "continuing profile below r = 1 down to r = {}; the ODE is singular at the origin",
            grid[0]
        );
        let ts_left: Vec<f64> = grid[..=i1].iter().rev().map(|x| x.ln()).collect();
        let mut left = integrate_nodes(
            |t, d| excess_rate(exps, env, drive, t.exp(), d, false),
            &ts_left,
            d1,
            opts,
        )?;
        left.reverse();
        left.pop();
        left.append(&mut out);
        out = left;
    }
    Ok((grid, out))
}

fn ode_options() -> OdeOptions {
    // the excess decays like a power of r; control it relative to its own size
    OdeOptions {
        rtol: 1e-10,
        atol: 1e-20,
        max_steps: 400_000,
    }
}

/// Decreasing profile `h(r, delta)` driven by the upper envelope.
pub fn integrate_h(
    delta: f64,
    env: &GEnvelope,
    exps: &ProfileExponents,
    r: &[f64],
) -> Result<SampledProfile> {
    check_grid(r)?;
    let m = exps.gap();
    let sup = env.sup_upper(1.0, f64::INFINITY);
    if !(delta > sup.powf(1.0 / m)) {
        return Err(Error::Hypothesis(format!(
            "delta = {delta} must exceed sup g_upper^(1/(k-l)) = {}",
            sup.powf(1.0 / m)
        )));
    }
    let d1 = delta.powf(m) - env.upper(1.0);
    let (grid, excess) = integrate_excess(exps, env, Drive::Upper, r, d1, &ode_options())?;
    let prof = finish(ProfileKind::Sub { delta }, exps, env, grid, excess, |x| {
        (env.upper(x).powf(1.0 / m), delta)
    })?;
    for i in 0..prof.r.len() {
        if prof.r[i] < 1.0 {
            continue;
        }
        if prof.excess[i] < 0.0 || prof.value[i] > delta * (1.0 + 1e-12) || prof.deriv[i] > 0.0 {
            return Err(Error::Hypothesis(format!(
                "subsolution profile leaves its sandwich at r = {}; g_upper must be nonincreasing on [1, inf)",
                prof.r[i]
            )));
        }
    }
    Ok(prof)
}

/// Increasing profile `H(r, tau)` driven by the lower envelope.
pub fn integrate_big_h(
    tau: f64,
    env: &GEnvelope,
    exps: &ProfileExponents,
    r: &[f64],
) -> Result<SampledProfile> {
    check_grid(r)?;
    let m = exps.gap();
    let rho = exps.ratio();
    let g1 = env.lower(1.0);
    let p = tau.powf(m);
    if !(p > rho * g1 && p < g1) {
        return Err(Error::Hypothesis(format!(
            "tau^(k-l) = {p} must lie strictly between {} and {g1}",
            rho * g1
        )));
    }
    let (grid, excess) = integrate_excess(exps, env, Drive::Lower, r, p - g1, &ode_options())?;
    let prof = finish(ProfileKind::Super { tau }, exps, env, grid, excess, |x| {
        let g = env.lower(x);
        ((rho * g).powf(1.0 / m), g.powf(1.0 / m))
    })?;
    for i in 0..prof.r.len() {
        if prof.r[i] < 1.0 {
            continue;
        }
        let g = env.lower(prof.r[i]);
        let d = prof.excess[i];
        if !(d < 0.0 && d > -g * (1.0 - rho)) || prof.deriv[i] < 0.0 {
            return Err(Error::Hypothesis(format!(
                "supersolution profile leaves its sandwich at r = {}",
                prof.r[i]
            )));
        }
    }
    Ok(prof)
}

/// Settings for the reference-profile fixed point.
#[derive(Debug, Clone, Copy)]
pub struct FixedPointOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub residual_tol: f64,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        FixedPointOptions {
            tol: 1e-10,
            max_iter: 200,
            residual_tol: 1e-8,
        }
    }
}

/// Reference profile `h0` regular at the origin, from the integral fixed point
/// `r^K h^(K t_up) = int_0^r g0(s) (s^K h^(K t_lo))' ds`.
///
/// After integrating by parts the map reads `h^(K t_lo) (h^m - g0) = Z` with
/// `Z(r) = -r^-K int_0^r g0'(s) s^K h^(K t_lo) ds`, so no derivative of `h` is needed.
/// `r` should start well below 1 (e.g. `1e-6`); the piece on `[0, r[0]]` is taken with
/// frozen integrand.
pub fn solve_h0(
    env: &GEnvelope,
    exps: &ProfileExponents,
    r: &[f64],
    opts: &FixedPointOptions,
) -> Result<SampledProfile> {
    check_grid(r)?;
    let m = exps.gap();
    let n = r.len();
    let g: Vec<f64> = r.iter().map(|x| env.g0.value(*x)).collect();
    let apply = |h: &[f64]| picard_map(env, exps, r, h);

    let mut h: Vec<f64> = g.iter().map(|v| v.powf(1.0 / m)).collect();
    let mut history = Vec::new();
    let mut excess = vec![0.0; n];
    let mut converged = false;
    for _ in 0..opts.max_iter {
        let (next, ex) = apply(&h)?;
        let diff = next
            .iter()
            .zip(&h)
            .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        history.push(diff);
        h = next;
        excess = ex;
        if diff < opts.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Divergence { history });
    }
    let (check, _) = apply(&h)?;
    let fp_residual = check
        .iter()
        .zip(&h)
        .fold(0.0f64, |a, (x, y)| a.max((x - y).abs() / y));
    if !(fp_residual < opts.residual_tol) {
        history.push(fp_residual);
        return Err(Error::Divergence { history });
    }
    log::debug!(
        "h0 fixed point: {} iterations, residual {fp_residual:e}",
        history.len()
    );
    // running extrema of g0 bound h0^m
    let mut lo_run = env.g0.value(0.0);
    let mut hi_run = lo_run;
    let mut bounds = Vec::with_capacity(n);
    for gi in &g {
        lo_run = lo_run.min(*gi);
        hi_run = hi_run.max(*gi);
        bounds.push((lo_run.powf(1.0 / m), hi_run.powf(1.0 / m)));
    }
    let rs = r.to_vec();
    finish(ProfileKind::Reference, exps, env, rs.clone(), excess, |x| {
        bounds[rs.iter().position(|v| *v == x).unwrap()]
    })
}

/// One application of the reference-profile map on the nodes `r`; returns the new
/// values and the matching excess `h^m - g0`.
fn picard_map(
    env: &GEnvelope,
    exps: &ProfileExponents,
    r: &[f64],
    h: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = exps.gap();
    let big_k = exps.decay();
    let kl = big_k * exps.t_lower;
    let rho = exps.ratio();
    let n = r.len();
    let ts: Vec<f64> = r.iter().map(|x| x.ln()).collect();
    let integrand: Vec<f64> = (0..n)
        .map(|i| env.g0.deriv(r[i]) * r[i].powf(big_k + 1.0) * h[i].powf(kl))
        .collect();
    let head = env.g0.deriv(r[0]) * h[0].powf(kl) * r[0].powf(big_k + 1.0) / (big_k + 1.0);
    let cum = cumulative_quadratic(&ts, &integrand);
    let mut out = Vec::with_capacity(n);
    let mut ex = Vec::with_capacity(n);
    for i in 0..n {
        let z = -(head + cum[i]) * r[i].powf(-big_k);
        let hi = solve_level(z, env.g0.value(r[i]), m, kl, big_k * exps.t_upper, rho)?;
        ex.push(if kl == 0.0 { z } else { z / hi.powf(kl) });
        out.push(hi);
    }
    Ok((out, ex))
}

/// Largest relative change `|T h - h| / h` of a reference profile under one more
/// application of its fixed-point map.
pub fn fixed_point_residual(h0: &SampledProfile) -> Result<f64> {
    if h0.kind != ProfileKind::Reference {
        return Err(Error::InvalidParams("not a reference profile".into()));
    }
    let (next, _) = picard_map(&h0.envelope, &h0.exps, &h0.r, &h0.value)?;
    Ok(next
        .iter()
        .zip(&h0.value)
        .fold(0.0f64, |a, (x, y)| a.max((x - y).abs() / y)))
}

/// Solves `h^kl (h^m - g) = z` for `h` on the branch `h^m > rho g`.
fn solve_level(z: f64, g: f64, m: f64, kl: f64, ku: f64, rho: f64) -> Result<f64> {
    if kl == 0.0 {
        let p = g + z;
        if !(p > 0.0) {
            return Err(Error::numeric(
                "solve_h0",
                format!("level {p} is not positive"),
            ));
        }
        return Ok(p.powf(1.0 / m));
    }
    if z == 0.0 {
        return Ok(g.powf(1.0 / m));
    }
    let fdf = |h: f64| {
        let p = h.powf(m);
        (
            h.powf(kl) * (p - g) - z,
            h.powf(kl - 1.0) * (ku * p - kl * g),
        )
    };
    let base = g.powf(1.0 / m);
    let (lo, hi) = if z > 0.0 {
        let mut hi = base * 2.0;
        while fdf(hi).0 < 0.0 {
            hi *= 2.0;
        }
        (base, hi)
    } else {
        let lo = (rho * g).powf(1.0 / m);
        if fdf(lo).0 > 0.0 {
            return Err(Error::numeric(
                "solve_h0",
                format!("no root on the admissible branch for z = {z:e}"),
            ));
        }
        (lo, base)
    };
    newton_bisect(fdf, lo, hi, 1e-15)
}
