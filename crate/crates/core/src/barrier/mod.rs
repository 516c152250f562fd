//! Generalized symmetric sub- and supersolutions built from the profile ODEs, the
//! asymptotic constants they carry, and the ordered envelope pair used for Perron's
//! method on the exterior of an A-ellipsoid.

pub mod obstruction;
pub mod quadratic;
pub mod sampling;

pub use obstruction::{obstruction_check, ObstructionOptions, ObstructionReport};
pub use quadratic::{BarrierSet, BoundaryData, QuadraticBarrier};
pub use sampling::{CheckReport, Sampler, Zone};

use crate::error::{Error, Result};
use crate::numeric::binom;
use crate::numeric::fit::fit_line;
use crate::numeric::grid::{cumulative_hermite, cumulative_quadratic, locate};
use crate::numeric::quad::gauss3;
use crate::numeric::roots::bisect_increasing;
use crate::profiles::{
    integrate_big_h, integrate_h, profile_grid, solve_h0, FixedPointOptions, GEnvelope,
    ProfileExponents, SampledProfile,
};
use crate::symmetric::Spectrum;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// `int_a^b theta f(theta) dtheta` over a profile, by the Hermite rule on whole intervals
/// and three-point Gauss on the partial ones.
pub fn theta_integral(p: &SampledProfile, a: f64, b: f64) -> Result<f64> {
    if b < a {
        return Ok(-theta_integral(p, b, a)?);
    }
    let (lo, hi) = (p.r[0], p.r[p.r.len() - 1]);
    if a < lo * (1.0 - 1e-14) || b > hi * (1.0 + 1e-14) {
        return Err(Error::Domain(format!(
            "[{a}, {b}] leaves the profile range [{lo}, {hi}]"
        )));
    }
    let f = |t: f64| p.eval(t).map(|q| t * q.value).unwrap_or(f64::NAN);
    let ia = locate(&p.r, a);
    let ib = locate(&p.r, b);
    if ia == ib {
        return Ok(gauss3(f, a, b));
    }
    let mut s = gauss3(f, a, p.r[ia + 1]);
    for i in ia + 1..ib {
        let (r0, r1) = (p.r[i], p.r[i + 1]);
        let h = r1 - r0;
        let (f0, f1) = (r0 * p.value[i], r1 * p.value[i + 1]);
        let (d0, d1) = (
            p.value[i] + r0 * p.deriv[i],
            p.value[i + 1] + r1 * p.deriv[i + 1],
        );
        s += 0.5 * h * (f0 + f1) + h * h / 12.0 * (d0 - d1);
    }
    s += gauss3(f, p.r[ib], b);
    Ok(s)
}

/// `x -> anchor + int_start^{r_A(x)} theta f(theta) dtheta`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileBarrier {
    pub profile: SampledProfile,
    pub anchor: f64,
    pub start: f64,
    cum: Vec<f64>,
    base: f64,
}

impl ProfileBarrier {
    pub fn new(profile: SampledProfile, anchor: f64, start: f64) -> Result<Self> {
        let p = &profile;
        let f: Vec<f64> = p.r.iter().zip(&p.value).map(|(r, v)| r * v).collect();
        let df: Vec<f64> = (0..p.r.len())
            .map(|i| p.value[i] + p.r[i] * p.deriv[i])
            .collect();
        let cum = cumulative_hermite(&p.r, &f, &df);
        let mut pb = ProfileBarrier {
            profile,
            anchor,
            start,
            cum,
            base: 0.0,
        };
        pb.base = pb.integral_to(start)?;
        Ok(pb)
    }

    fn integral_to(&self, r: f64) -> Result<f64> {
        let p = &self.profile;
        let n = p.r.len();
        if !(r >= p.r[0] * (1.0 - 1e-14) && r <= p.r[n - 1] * (1.0 + 1e-14)) {
            return Err(Error::Domain(format!(
                "r_A = {r} outside the profile range [{}, {}]",
                p.r[0],
                p.r[n - 1]
            )));
        }
        let i = locate(&p.r, r);
        let f = |t: f64| p.eval(t).map(|q| t * q.value).unwrap_or(f64::NAN);
        Ok(self.cum[i] + gauss3(f, p.r[i], r))
    }

    /// Radial function `w(r)`.
    pub fn radial(&self, r: f64) -> Result<f64> {
        Ok(self.anchor + self.integral_to(r)? - self.base)
    }

    pub fn value(&self, a: &Spectrum, x: &[f64]) -> Result<f64> {
        self.radial(a.r_a(x))
    }

    /// `sigma_0..=sigma_n` of `f(r) A + (f'(r) / r) (A x)(A x)^T`.
    pub fn hessian_sigmas(&self, a: &Spectrum, x: &[f64]) -> Result<Vec<f64>> {
        let r = a.r_a(x);
        let q = self.profile.eval(r)?;
        Ok(a.profile_hessian_sigmas(x, q.value, q.deriv, r))
    }
}

/// `int_r^inf theta (f - h0)(theta) dtheta` for all `r` in the range of `f`, with a
/// power-law tail beyond the last node fitted on the final decade.
#[derive(Debug, Clone)]
pub struct GapIntegral {
    r: Vec<f64>,
    cum: Vec<f64>,
    pub total: f64,
    pub tail: f64,
    /// fitted exponent of `theta^2 (f - h0)` in `ln theta`
    pub tail_slope: f64,
    pub error: f64,
    f: SampledProfile,
    h0: SampledProfile,
}

impl GapIntegral {
    pub fn new(f: &SampledProfile, h0: &SampledProfile) -> Result<Self> {
        let r = f.r.clone();
        let ts: Vec<f64> = r.iter().map(|x| x.ln()).collect();
        let w: Vec<f64> = r
            .iter()
            .map(|x| f.gap_to(h0, *x).map(|g| x * x * g))
            .collect::<Result<_>>()?;
        let cum = cumulative_quadratic(&ts, &w);
        let n = r.len();
        // tail model from the last decade
        let t_last = ts[n - 1];
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for i in 0..n {
            if ts[i] >= t_last - 10f64.ln() - 1e-12 && w[i] != 0.0 {
                xs.push(ts[i]);
                ys.push(w[i].abs().ln());
            }
        }
        let (tail, tail_slope) = if w[n - 1] == 0.0 && xs.len() < 5 {
            (0.0, f64::NEG_INFINITY)
        } else {
            if xs.len() < 5 {
                return Err(Error::InsufficientData(
                    "fewer than 5 nonzero samples in the last decade".into(),
                ));
            }
            let fit = fit_line(&xs, &ys);
            if !(fit.slope < -0.05) {
                return Err(Error::DivergentIntegral(format!(
                    "theta (f - h0) decays like theta^{:.3}, not faster than 1/theta; check the envelope",
                    fit.slope - 1.0
                )));
            }
            (w[n - 1] / -fit.slope, fit.slope)
        };
        // quadrature error from a half-density rerun
        let mut idx: Vec<usize> = (0..n).step_by(2).collect();
        if *idx.last().unwrap() != n - 1 {
            idx.push(n - 1);
        }
        let th: Vec<f64> = idx.iter().map(|i| ts[*i]).collect();
        let wh: Vec<f64> = idx.iter().map(|i| w[*i]).collect();
        let coarse = cumulative_quadratic(&th, &wh);
        let error = (coarse[coarse.len() - 1] - cum[n - 1]).abs() / 15.0 + 0.05 * tail.abs();
        Ok(GapIntegral {
            total: cum[n - 1] + tail,
            r,
            cum,
            tail,
            tail_slope,
            error,
            f: f.clone(),
            h0: h0.clone(),
        })
    }

    /// `int_r^inf theta (f - h0)`.
    pub fn from(&self, r: f64) -> Result<f64> {
        let n = self.r.len();
        if !(r >= self.r[0] * (1.0 - 1e-14) && r <= self.r[n - 1] * (1.0 + 1e-14)) {
            return Err(Error::Domain(format!("r = {r} outside the profile range")));
        }
        let i = locate(&self.r, r);
        if r == self.r[i] {
            return Ok(self.total - self.cum[i]);
        }
        let g = |t: f64| {
            self.f
                .gap_to(&self.h0, t)
                .map(|v| t * v)
                .unwrap_or(f64::NAN)
        };
        Ok(self.total - self.cum[i] - gauss3(g, self.r[i], r))
    }
}

/// Far-field constant `anchor - int_0^eta theta h0 + int_eta^inf theta (f - h0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticConstant {
    pub value: f64,
    pub error: f64,
    pub tail: f64,
}

pub fn asymptotic_constant(
    f: &SampledProfile,
    h0: &SampledProfile,
    anchor: f64,
    eta: f64,
) -> Result<AsymptoticConstant> {
    let gaps = GapIntegral::new(f, h0)?;
    let outer = gaps.from(eta)?;
    // frozen integrand on [0, r_min]
    let inner = h0.value[0] * h0.r[0] * h0.r[0] / 2.0 + theta_integral(h0, h0.r[0], eta)?;
    Ok(AsymptoticConstant {
        value: anchor - inner + outer,
        error: gaps.error,
        tail: gaps.tail,
    })
}

/// Output and reference grids shared by every profile of a construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub per_decade: usize,
    pub r_max: f64,
    pub r_min_reference: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            per_decade: 100,
            r_max: 1e5,
            r_min_reference: 1e-6,
        }
    }
}

impl GridSpec {
    pub fn profile(&self) -> Vec<f64> {
        profile_grid(1.0, self.r_max, self.per_decade)
    }

    pub fn reference(&self) -> Vec<f64> {
        profile_grid(self.r_min_reference, self.r_max, self.per_decade)
    }
}

/// Inputs of the envelope construction on `Omega = E_{r_omega}`, with
/// `E_1 ⊂⊂ Omega ⊂⊂ E_{r0} ⊂⊂ E_{r_outer}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierSpec {
    pub k: usize,
    pub l: usize,
    pub spectrum: Spectrum,
    pub envelope: GEnvelope,
    pub phi: BoundaryData,
    pub r_omega: f64,
    pub r0: f64,
    pub r_outer: f64,
    /// curvature of the quadratic barriers; chosen from the envelope when absent
    #[serde(default)]
    pub curvature: Option<f64>,
    /// supersolution parameter; mid-interval when absent
    #[serde(default)]
    pub tau: Option<f64>,
    #[serde(default)]
    pub grid: GridSpec,
    /// points per sampled check
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// barriers in the sampled family
    #[serde(default = "default_boundary_points")]
    pub boundary_points: usize,
    /// outer radius of the far-field zone
    #[serde(default = "default_far")]
    pub r_far: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_samples() -> usize {
    1000
}

fn default_boundary_points() -> usize {
    128
}

fn default_far() -> f64 {
    1e3
}

/// Relative inflation applied to sampled extrema.
pub const SAFETY: f64 = 0.05;

fn inflate(s: f64) -> f64 {
    s + SAFETY * s.abs().max(1.0)
}

fn deflate(s: f64) -> f64 {
    s - SAFETY * s.abs().max(1.0)
}

impl BarrierSpec {
    pub fn exponents(&self) -> Result<ProfileExponents> {
        ProfileExponents::from_spectrum(&self.spectrum, self.k, self.l)
    }

    /// Largest value of the upper envelope on `E_{r_outer}`.
    pub fn sup_upper_inside(&self) -> f64 {
        self.envelope.sup_upper(0.0, self.r_outer)
    }

    /// Curvature used by the quadratic barriers.
    pub fn curvature(&self) -> f64 {
        self.curvature.unwrap_or_else(|| {
            let m = (self.k - self.l) as f64;
            let n = self.spectrum.n();
            let need = self.sup_upper_inside() * (binom(n, self.l) / binom(n, self.k)).max(1.0);
            1.1 * need.powf(1.0 / m)
        })
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.spectrum.n();
        if !(self.l < self.k && self.k <= n) {
            return Err(Error::InvalidParams(format!(
                "need l < k <= n, got k={}, l={}, n={n}",
                self.k, self.l
            )));
        }
        if !self.spectrum.in_quotient_class(self.k, self.l)? {
            return Err(Error::InvalidParams(
                "spectrum must satisfy sigma_k(a) = sigma_l(a)".into(),
            ));
        }
        if !(1.0 < self.r_omega && self.r_omega < self.r0 && self.r0 < self.r_outer) {
            return Err(Error::InvalidParams(format!(
                "radii must satisfy 1 < r_omega < r0 < r_outer, got {}, {}, {}",
                self.r_omega, self.r0, self.r_outer
            )));
        }
        if !(self.r_far > self.r_outer && self.r_far <= self.grid.r_max / 10.0) {
            return Err(Error::InvalidParams(format!(
                "far radius {} must exceed r_outer and stay a decade below the grid end {}",
                self.r_far, self.grid.r_max
            )));
        }
        if self.samples == 0 || self.boundary_points < 2 || self.grid.per_decade < 10 {
            return Err(Error::InvalidParams(
                "sample counts and grid density are too small".into(),
            ));
        }
        self.phi.check_dim(n)?;
        let exps = self.exponents()?;
        if !(exps.decay() > 2.0) {
            return Err(Error::Hypothesis(format!(
                "(k-l)/(t_upper - t_lower) = {} must exceed 2",
                exps.decay()
            )));
        }
        self.envelope.check_upper_nonincreasing()?;
        let m = (self.k - self.l) as f64;
        let xi = self.curvature();
        let sup = self.sup_upper_inside();
        if !(xi.powf(m) > sup) {
            return Err(Error::Hypothesis(format!(
                "barrier curvature {xi}: curv^(k-l) must exceed sup g_upper = {sup}"
            )));
        }
        if !(binom(n, self.k) / binom(n, self.l) * xi.powf(m) > sup) {
            return Err(Error::Hypothesis(format!(
                "barrier curvature {xi}: C(n,k) curv^k / (C(n,l) curv^l) must exceed sup g_upper = {sup}"
            )));
        }
        Ok(())
    }
}

/// Sampled extrema behind the threshold constants, before and after inflation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampledExtrema {
    pub min_barrier_inner: f64,
    pub max_barrier: f64,
    pub max_envelope: f64,
    pub max_envelope_seam: f64,
    pub safety: f64,
}

/// Everything that does not depend on the far-field constant `c`.
#[derive(Debug, Clone)]
pub struct BarrierContext {
    pub spec: BarrierSpec,
    pub exps: ProfileExponents,
    pub grid: Vec<f64>,
    pub h0: SampledProfile,
    pub set: BarrierSet,
    pub sampled: SampledExtrema,
    /// lower bound of the barriers on the inner annulus
    pub zeta1: f64,
    pub delta_hat: f64,
    pub mu_hat: f64,
    pub tau: f64,
    pub big_h: SampledProfile,
    /// `-int_0^1 theta h0 + int_1^inf theta (H - h0)`
    pub nu0: f64,
    pub c_hat: f64,
    pub c_tilde: f64,
}

impl BarrierContext {
    pub fn prepare(spec: &BarrierSpec) -> Result<Self> {
        spec.validate()?;
        let exps = spec.exponents()?;
        let a = &spec.spectrum;
        let m = exps.gap();
        let grid = spec.grid.profile();
        let h0 = solve_h0(
            &spec.envelope,
            &exps,
            &spec.grid.reference(),
            &FixedPointOptions::default(),
        )?;
        let set = BarrierSet::build(
            a,
            &spec.phi,
            spec.r_omega,
            spec.curvature(),
            spec.boundary_points,
            spec.seed,
        )?;

        let mut sampler = Sampler::new(spec.seed.wrapping_add(1));
        let ns = spec.samples.max(64);
        let mut inner: Vec<Vec<f64>> = sampler
            .in_zones(a, &[Zone::new("inner", spec.r_omega, spec.r0)], ns)
            .into_iter()
            .map(|p| p.1)
            .collect();
        inner.extend(sampler.shell(a, spec.r_omega, ns / 4));
        inner.extend(sampler.shell(a, spec.r0, ns / 4));
        let mut shell: Vec<Vec<f64>> = sampler
            .in_zones(a, &[Zone::new("shell", spec.r_omega, spec.r_outer)], ns)
            .into_iter()
            .map(|p| p.1)
            .collect();
        shell.extend(sampler.shell(a, spec.r_omega, ns / 4));
        let seam = sampler.shell(a, spec.r_outer, ns / 4);
        shell.extend(seam.iter().cloned());

        let barrier_range = |pts: &[Vec<f64>]| {
            pts.par_iter()
                .map(|x| {
                    set.barriers
                        .iter()
                        .map(|b| b.value(x))
                        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                            (lo.min(v), hi.max(v))
                        })
                })
                .reduce(
                    || (f64::INFINITY, f64::NEG_INFINITY),
                    |p, q| (p.0.min(q.0), p.1.max(q.1)),
                )
        };
        let max_of = |pts: &[Vec<f64>]| {
            pts.par_iter()
                .map(|x| set.envelope(x))
                .reduce(|| f64::NEG_INFINITY, f64::max)
        };
        let (min_inner, _) = barrier_range(&inner);
        let (_, max_shell) = barrier_range(&shell);
        let sampled = SampledExtrema {
            min_barrier_inner: min_inner,
            max_barrier: max_shell,
            max_envelope: max_of(&shell),
            max_envelope_seam: max_of(&seam),
            safety: SAFETY,
        };
        let zeta1 = deflate(sampled.min_barrier_inner);
        let seam_target = inflate(sampled.max_envelope_seam);

        // smallest tried delta whose subsolution clears the envelope on the seam
        let sup_g = spec.envelope.sup_upper(1.0, f64::INFINITY);
        let mut delta = 1.05 * sup_g.powf(1.0 / m);
        let mut found = None;
        for _ in 0..200 {
            let h = integrate_h(delta, &spec.envelope, &exps, &grid)?;
            let w = ProfileBarrier::new(h, zeta1, spec.r0)?;
            if w.radial(spec.r_outer)? > seam_target {
                found = Some(delta);
                break;
            }
            delta *= 1.25;
        }
        let delta_hat = found.ok_or_else(|| {
            Error::numeric("prepare", "no delta lifts the subsolution above the seam")
        })?;
        let mu_hat = mu(spec, &exps, &grid, &h0, zeta1, delta_hat)?;

        let rho = exps.ratio();
        let tau = match spec.tau {
            Some(t) => t,
            None => ((0.5 * (1.0 + rho)) * spec.envelope.lower(1.0)).powf(1.0 / m),
        };
        let big_h = integrate_big_h(tau, &spec.envelope, &exps, &grid)?;
        let nu0 = asymptotic_constant(&big_h, &h0, 0.0, 1.0)?.value;
        let c_hat = inflate(sampled.max_envelope) + nu0;
        let c_tilde = c_hat.max(mu_hat).max(inflate(sampled.max_barrier));
        log::info!("thresholds: zeta1 {zeta1}, delta_hat {delta_hat}, mu_hat {mu_hat}, c_hat {c_hat}, c_tilde {c_tilde}");
        Ok(BarrierContext {
            spec: spec.clone(),
            exps,
            grid,
            h0,
            set,
            sampled,
            zeta1,
            delta_hat,
            mu_hat,
            tau,
            big_h,
            nu0,
            c_hat,
            c_tilde,
        })
    }

    /// Subsolution `W_delta = zeta1 + int_{r0}^{r_A} theta h(theta, delta)`.
    pub fn subsolution(&self, delta: f64) -> Result<ProfileBarrier> {
        let h = integrate_h(delta, &self.spec.envelope, &self.exps, &self.grid)?;
        ProfileBarrier::new(h, self.zeta1, self.spec.r0)
    }

    /// Far-field constant of `W_delta`.
    pub fn mu(&self, delta: f64) -> Result<f64> {
        mu(
            &self.spec, &self.exps, &self.grid, &self.h0, self.zeta1, delta,
        )
    }

    /// Supersolution `zeta2 + int_1^{r_A} theta H(theta, tau)` with far-field constant `c`.
    pub fn supersolution(&self, c: f64) -> Result<ProfileBarrier> {
        ProfileBarrier::new(self.big_h.clone(), c - self.nu0, 1.0)
    }
}

fn mu(
    spec: &BarrierSpec,
    exps: &ProfileExponents,
    grid: &[f64],
    h0: &SampledProfile,
    zeta1: f64,
    delta: f64,
) -> Result<f64> {
    let h = integrate_h(delta, &spec.envelope, exps, grid)?;
    Ok(asymptotic_constant(&h, h0, zeta1, spec.r0)?.value)
}

/// Inverts the increasing map `delta -> mu(delta)` on `[lo, inf)` to `|mu - c| < 1e-9`.
pub fn invert_mu<F>(mut mu: F, lo: f64, c: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut hi = lo * 1.5;
    let mut tries = 0;
    while mu(hi)? <= c {
        hi *= 2.0;
        tries += 1;
        if tries > 60 {
            return Err(Error::numeric("invert_mu", format!("mu stays below {c}")));
        }
    }
    bisect_increasing(mu, lo, hi, c, 1e-9, 1e-15)
}

/// Unique `delta(c)` with `mu(delta(c)) = c`, for `c` above the threshold.
pub fn solve_delta_for_c(ctx: &BarrierContext, c: f64) -> Result<f64> {
    if !(c > ctx.c_tilde) {
        return Err(Error::BelowThreshold {
            c,
            c_tilde: ctx.c_tilde,
        });
    }
    invert_mu(|d| ctx.mu(d), ctx.delta_hat, c)
}

/// The ordered pair `lower <= upper` sharing the far-field constant `c`.
#[derive(Debug, Clone)]
pub struct EnvelopePair {
    pub c: f64,
    pub c_tilde: f64,
    pub delta: f64,
    pub tau: f64,
    pub zeta1: f64,
    pub zeta2: f64,
    pub sub: ProfileBarrier,
    pub upper_barrier: ProfileBarrier,
    pub set: BarrierSet,
    pub r_outer: f64,
    pub reports: Vec<CheckReport>,
    /// `lower - upper` at the far radius, largest magnitude over the sample
    pub far_gap: f64,
}

impl EnvelopePair {
    /// `max(W, envelope)` inside `E_{r_outer}`, `W` outside.
    pub fn lower(&self, x: &[f64]) -> Result<f64> {
        let a = &self.set.spectrum;
        let w = self.sub.value(a, x)?;
        if a.r_a(x) < self.r_outer {
            Ok(w.max(self.set.envelope(x)))
        } else {
            Ok(w)
        }
    }

    pub fn upper(&self, x: &[f64]) -> Result<f64> {
        self.upper_barrier.value(&self.set.spectrum, x)
    }

    pub fn pass(&self) -> bool {
        self.reports.iter().all(|r| r.pass)
    }
}

/// Three sampling zones: next to the boundary, the rest of the construction region,
/// and the far field.
pub fn default_zones(spec: &BarrierSpec) -> Vec<Zone> {
    vec![
        Zone::new("near", spec.r_omega, spec.r0),
        Zone::new("mid", spec.r0, 10.0 * spec.r_outer),
        Zone::new("far", 10.0 * spec.r_outer, spec.r_far),
    ]
}

/// Builds the envelope pair for `c` and checks ordering, boundary values, the seam and
/// the shared far-field constant on samples.
pub fn assemble_envelope(ctx: &BarrierContext, c: f64) -> Result<EnvelopePair> {
    let spec = &ctx.spec;
    let a = &spec.spectrum;
    let delta = solve_delta_for_c(ctx, c)?;
    let sub = ctx.subsolution(delta)?;
    let upper_barrier = ctx.supersolution(c)?;
    let mut pair = EnvelopePair {
        c,
        c_tilde: ctx.c_tilde,
        delta,
        tau: ctx.tau,
        zeta1: ctx.zeta1,
        zeta2: upper_barrier.anchor,
        sub,
        upper_barrier,
        set: ctx.set.clone(),
        r_outer: spec.r_outer,
        reports: Vec::new(),
        far_gap: 0.0,
    };
    let mut sampler = Sampler::new(spec.seed.wrapping_add(2));
    let zones = default_zones(spec);
    let points = sampler.in_zones(a, &zones, spec.samples);
    let margins: Vec<(usize, f64, Vec<f64>)> = points
        .par_iter()
        .map(|(z, x)| {
            let lo = pair.lower(x)?;
            let up = pair.upper(x)?;
            Ok((*z, (up - lo) / up.abs().max(1.0), x.clone()))
        })
        .collect::<Result<_>>()?;
    for (zi, zone) in zones.iter().enumerate() {
        let m: Vec<(f64, Vec<f64>)> = margins
            .iter()
            .filter(|t| t.0 == zi)
            .map(|t| (t.1, t.2.clone()))
            .collect();
        pair.reports.push(CheckReport::from_margins(
            format!("ordering_{}", zone.name),
            &m,
            1e-9,
        ));
    }

    let boundary = sampler.shell(a, spec.r_omega, spec.samples.min(500));
    let on_bd: Vec<(f64, f64, Vec<f64>)> = boundary
        .par_iter()
        .map(|x| {
            let phi = spec.phi.value(x);
            Ok((
                -(pair.lower(x)? - phi).abs(),
                pair.upper(x)? - phi,
                x.clone(),
            ))
        })
        .collect::<Result<_>>()?;
    let eq: Vec<(f64, Vec<f64>)> = on_bd.iter().map(|t| (t.0, t.2.clone())).collect();
    let above: Vec<(f64, Vec<f64>)> = on_bd.iter().map(|t| (t.1, t.2.clone())).collect();
    pair.reports.push(CheckReport::from_margins(
        "lower_equals_boundary_data",
        &eq,
        1e-9,
    ));
    pair.reports.push(CheckReport::from_margins(
        "upper_above_boundary_data",
        &above,
        1e-9,
    ));

    // the max must switch to W strictly inside the seam
    let seam = sampler.shell(a, spec.r_outer, spec.samples.min(500));
    let seam_m: Vec<(f64, Vec<f64>)> = seam
        .par_iter()
        .map(|x| Ok((pair.sub.value(a, x)? - pair.set.envelope(x), x.clone())))
        .collect::<Result<_>>()?;
    pair.reports.push(CheckReport::from_margins(
        "seam_subsolution_above_envelope",
        &seam_m,
        0.0,
    ));

    let far = sampler.shell(a, spec.r_far, 64);
    let far_m: Vec<(f64, Vec<f64>)> = far
        .iter()
        .map(|x| Ok((-(pair.lower(x)? - pair.upper(x)?).abs(), x.clone())))
        .collect::<Result<_>>()?;
    let far_report = CheckReport::from_margins("far_field_constant", &far_m, 1e-2);
    pair.far_gap = -far_report.worst_margin;
    pair.reports.push(far_report);
    Ok(pair)
}

/// Sampled checks of the sub- and supersolution inequalities and of k-convexity.
pub fn verify_barriers(ctx: &BarrierContext, delta: f64) -> Result<Vec<CheckReport>> {
    let spec = &ctx.spec;
    let a = &spec.spectrum;
    let (k, l) = (spec.k, spec.l);
    let sub = ctx.subsolution(delta)?;
    let sup = ctx.supersolution(ctx.c_tilde)?;
    let zones = default_zones(spec);
    let mut sampler = Sampler::new(spec.seed.wrapping_add(3));
    let mut out = Vec::new();
    for (name, barrier, upper_side) in [("subsolution", &sub, false), ("supersolution", &sup, true)]
    {
        let pts = sampler.in_zones(a, &zones, spec.samples);
        let rows: Vec<(f64, f64, Vec<f64>)> = pts
            .par_iter()
            .map(|(_, x)| {
                let s = barrier.hessian_sigmas(a, x)?;
                let r = a.r_a(x);
                let ratio = s[k] / s[l];
                let margin = if upper_side {
                    spec.envelope.lower(r) - ratio
                } else {
                    ratio - spec.envelope.upper(r)
                };
                let convex = s[1..=k].iter().fold(f64::INFINITY, |m, v| m.min(*v));
                Ok((margin, convex, x.clone()))
            })
            .collect::<Result<_>>()?;
        let ineq: Vec<(f64, Vec<f64>)> = rows.iter().map(|t| (t.0, t.2.clone())).collect();
        let conv: Vec<(f64, Vec<f64>)> = rows.iter().map(|t| (t.1, t.2.clone())).collect();
        out.push(CheckReport::from_margins(
            format!("{name}_inequality"),
            &ineq,
            1e-8,
        ));
        out.push(CheckReport::from_margins(
            format!("{name}_k_convexity"),
            &conv,
            1e-10,
        ));
    }
    Ok(out)
}
