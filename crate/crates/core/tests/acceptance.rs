//! Acceptance suite: one line per criterion, then a single assertion over all of them.
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use hessquot::asymptotics::{borderline_probe, fit_decay, probe_remainder, FitOptions, ProbeSpec};
use hessquot::barrier::{
    assemble_envelope, obstruction_check, verify_barriers, BarrierContext, BarrierSpec,
    BoundaryData, GridSpec, ObstructionOptions, Sampler,
};
use hessquot::numeric::grid::log_spaced;
use hessquot::profiles::{
    fixed_point_residual, integrate_big_h, integrate_h, profile_grid, solve_h0, FixedPointOptions,
    G0Spec, GEnvelope, ProfileExponents,
};
use hessquot::radial::{
    dim2_nu, dim2_solution, mu_of_alpha, radial_profile, special_lagrangian_3d, thresholds,
    HqParams,
};
use hessquot::symmetric::{rank_one_sigma, Spectrum};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit: f64, what: &str) -> Result<(), String> {
    ensure(
        elapsed.as_secs_f64() < limit,
        format!("{what} took {:.2}s, limit {limit}s", elapsed.as_secs_f64()),
    )
}

fn hq(n: usize, k: usize, l: usize, m: usize) -> HqParams {
    HqParams::new(n, k, l, m).unwrap()
}

/// Elementary symmetric polynomial by subset enumeration.
fn sigma_brute(v: &[f64], j: usize) -> f64 {
    let n = v.len();
    (0u32..(1 << n))
        .filter(|mask| mask.count_ones() as usize == j)
        .map(|mask| {
            (0..n)
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| v[i])
                .product::<f64>()
        })
        .sum()
}

fn sigma_excluding_brute(v: &[f64], j: usize, skip: usize) -> f64 {
    let rest: Vec<f64> = v
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != skip)
        .map(|(_, x)| *x)
        .collect();
    sigma_brute(&rest, j)
}

fn eigen_sigmas(m: DMatrix<f64>) -> Vec<f64> {
    let ev: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
    (0..=ev.len()).map(|j| sigma_brute(&ev, j)).collect()
}

fn anisotropic_envelope() -> GEnvelope {
    GEnvelope::build(
        G0Spec::RationalDecay {
            limit: 1.0,
            amplitude: 0.05,
            power: 4.0,
        },
        0.1,
        3.0,
        1.0,
    )
    .unwrap()
}

fn c1_thresholds() -> Outcome {
    let mut worst: f64 = 0.0;
    for (k, m, n) in [(2, 3, 3), (2, 3, 4), (3, 4, 5)] {
        let t0 = Instant::now();
        let t = thresholds(&hq(n, k, 0, m)).map_err(|e| e.to_string())?;
        within(t0.elapsed(), 1.0, "thresholds")?;
        let a2 = k as f64 / (m - k) as f64;
        let err = (t.alpha1 + 1.0).abs().max((t.alpha2 - a2).abs());
        ensure(
            err <= 1e-10,
            format!(
                "(k,m,n)=({k},{m},{n}): alpha1={} alpha2={} expected -1, {a2}",
                t.alpha1, t.alpha2
            ),
        )?;
        worst = worst.max(err);
    }
    Ok(format!("max deviation {worst:.1e}"))
}

fn c2_special_lagrangian() -> Outcome {
    let t0 = Instant::now();
    let p = hq(3, 3, 1, 3);
    let t = thresholds(&p).map_err(|e| e.to_string())?;
    let sol =
        special_lagrangian_3d(0.0, 1.0, &log_spaced(1.0, 100.0, 200)).map_err(|e| e.to_string())?;
    within(t0.elapsed(), 1.0, "special Lagrangian")?;
    ensure(
        (t.alpha1 + 2.0).abs() <= 1e-10,
        format!("alpha1 = {}", t.alpha1),
    )?;
    ensure(
        (p.a_hat() - 3f64.sqrt()).abs() <= 1e-12,
        format!("a_hat = {}", p.a_hat()),
    )?;
    ensure(
        (sol.c - (1.0 - 3f64.sqrt() / 2.0)).abs() <= 1e-12,
        format!("c = {}", sol.c),
    )?;
    Ok(format!("alpha1 = {}, a_hat = {}", t.alpha1, p.a_hat()))
}

fn c3_planar() -> Outcome {
    let t0 = Instant::now();
    let b = 0.7;
    ensure(dim2_nu(0.0, b).unwrap() == b - 1.0, "nu(0) != b - 1")?;
    let up = log_spaced(1.0, 2.0, 100);
    let nus: Vec<f64> = up.iter().map(|x| dim2_nu(x - 2.0, b).unwrap()).collect();
    ensure(
        nus.windows(2).all(|w| w[1] > w[0]),
        "nu not increasing on [-1, 0]",
    )?;
    let down: Vec<f64> = (0..100).map(|i| 10.0 * i as f64 / 99.0).collect();
    let nus: Vec<f64> = down.iter().map(|x| dim2_nu(*x, b).unwrap()).collect();
    ensure(
        nus.windows(2).all(|w| w[1] < w[0]),
        "nu not decreasing on [0, 10]",
    )?;
    let sol = dim2_solution(0.5, b, &log_spaced(1.0, 1e4, 4000)).map_err(|e| e.to_string())?;
    let fit =
        fit_decay(&sol.r, &sol.remainder, &FitOptions::default()).map_err(|e| e.to_string())?;
    ensure(
        (fit.slope + 2.0).abs() <= 0.15,
        format!("remainder slope {}", fit.slope),
    )?;
    within(t0.elapsed(), 5.0, "planar checks")?;
    Ok(format!("nu(0) = b - 1, remainder slope {:.4}", fit.slope))
}

fn c4_radial_residual() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let grid = log_spaced(1.0, 1e3, 2000);
    let (mut res, mut drift) = (0.0f64, 0.0f64);
    for (k, l, m, n) in [(2, 0, 2, 3), (2, 1, 3, 4), (3, 1, 3, 3)] {
        let t0 = Instant::now();
        let p = hq(n, k, l, m);
        let t = thresholds(&p).unwrap();
        let span = if t.alpha2.is_finite() {
            t.alpha2 - t.alpha1
        } else {
            10.0
        };
        for _ in 0..5 {
            let alpha = t.alpha1 + rng.random_range(0.01..0.99) * span;
            let sol =
                radial_profile(alpha, 0.0, &p, &grid).map_err(|e| format!("alpha {alpha}: {e}"))?;
            res = res.max(sol.max_residual());
            drift = drift.max(sol.max_flux_drift());
            ensure(
                sol.max_residual() <= 1e-8,
                format!(
                    "(k,l,m,n)=({k},{l},{m},{n}) alpha {alpha}: residual {}",
                    sol.max_residual()
                ),
            )?;
            ensure(
                sol.max_flux_drift() <= 1e-9,
                format!(
                    "(k,l,m,n)=({k},{l},{m},{n}) alpha {alpha}: drift {}",
                    sol.max_flux_drift()
                ),
            )?;
        }
        within(t0.elapsed(), 10.0, "parameter set")?;
    }
    Ok(format!(
        "max residual {res:.1e}, max flux drift {drift:.1e}"
    ))
}

fn c5_asymptotic_constant() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let sets = [
        hq(3, 2, 0, 2),
        hq(4, 2, 1, 3),
        hq(3, 3, 1, 3),
        hq(5, 3, 1, 4),
    ];
    let mut worst: f64 = 0.0;
    for p in &sets {
        let b = rng.random_range(-2.0..2.0);
        let err = (mu_of_alpha(0.0, b, p).unwrap() - (b - p.a_hat() / 2.0)).abs();
        ensure(err <= 1e-12, format!("{p:?}: mu(0) off by {err:e}"))?;
        worst = worst.max(err);
    }
    for i in 0..20 {
        let p = &sets[i % sets.len()];
        let t = thresholds(p).unwrap();
        let hi = if t.alpha2.is_finite() {
            t.alpha2
        } else {
            t.alpha1 + 20.0
        };
        let x = rng.random_range(t.alpha1..hi);
        let y = rng.random_range(t.alpha1..hi);
        let (lo, up) = if x < y { (x, y) } else { (y, x) };
        let (ml, mu) = (
            mu_of_alpha(lo, 0.3, p).unwrap(),
            mu_of_alpha(up, 0.3, p).unwrap(),
        );
        ensure(
            ml < mu,
            format!("{p:?}: mu({lo}) = {ml} >= mu({up}) = {mu}"),
        )?;
    }
    Ok(format!("mu(0) deviation {worst:.1e}, 20 increasing pairs"))
}

fn c6_sandwiches() -> Outcome {
    let a = Spectrum::normalized(vec![0.98, 1.0, 1.02], 2, 1).unwrap();
    let e = ProfileExponents::from_spectrum(&a, 2, 1).unwrap();
    let env = anisotropic_envelope();
    let grid = profile_grid(1.0, 1e5, 100);
    let m = e.gap() as f64;
    let delta = 1.3;
    let h = integrate_h(delta, &env, &e, &grid).map_err(|x| x.to_string())?;
    for i in 0..h.r.len() {
        let low = env.upper(h.r[i]).powf(1.0 / m);
        ensure(
            low <= h.value[i] && h.value[i] <= delta && h.deriv[i] <= 0.0,
            format!("h leaves its sandwich at r = {}", h.r[i]),
        )?;
    }
    let rho = e.ratio();
    let tau = (0.5 * (1.0 + rho) * env.lower(1.0)).powf(1.0 / m);
    let big = integrate_big_h(tau, &env, &e, &grid).map_err(|x| x.to_string())?;
    for i in 0..big.r.len() {
        let g = env.lower(big.r[i]);
        let p = big.value[i].powf(m);
        ensure(
            rho * g < p && p < g,
            format!("H leaves its strict sandwich at r = {}", big.r[i]),
        )?;
    }
    let unit = GEnvelope::build(G0Spec::Constant { value: 1.0 }, 0.0, 3.0, 1.0).unwrap();
    let iso =
        ProfileExponents::from_spectrum(&Spectrum::normalized(vec![1.0; 3], 2, 1).unwrap(), 2, 1)
            .unwrap();
    let g = profile_grid(1.0, 1e4, 50);
    let h1 = integrate_h(1.0 + 1e-9, &unit, &iso, &g).map_err(|x| x.to_string())?;
    let big1 = integrate_big_h(1.0 - 1e-9, &unit, &iso, &g).map_err(|x| x.to_string())?;
    let dev = h1
        .value
        .iter()
        .chain(&big1.value)
        .fold(0.0f64, |d, v| d.max((v - 1.0).abs()));
    ensure(
        dev < 1e-6,
        format!("degenerate profiles deviate from 1 by {dev:e}"),
    )?;
    Ok(format!(
        "{} nodes per profile, degenerate deviation {dev:.1e}",
        h.r.len()
    ))
}

fn c7_reference_profile() -> Outcome {
    let a = Spectrum::normalized(vec![0.9, 1.0, 1.05, 1.2], 3, 1).unwrap();
    let e = ProfileExponents::from_spectrum(&a, 3, 1).unwrap();
    let env = GEnvelope::build(G0Spec::Constant { value: 2.5 }, 0.2, 3.5, 1.0).unwrap();
    let h0 = solve_h0(
        &env,
        &e,
        &profile_grid(1e-6, 1e5, 100),
        &FixedPointOptions::default(),
    )
    .map_err(|x| x.to_string())?;
    let exact = 2.5f64.sqrt();
    let dev = h0
        .value
        .iter()
        .fold(0.0f64, |d, v| d.max((v - exact).abs()));
    ensure(dev < 1e-10, format!("constant g0: deviation {dev:e}"))?;

    let a = Spectrum::normalized(vec![0.98, 1.0, 1.02], 2, 1).unwrap();
    let e = ProfileExponents::from_spectrum(&a, 2, 1).unwrap();
    let env = anisotropic_envelope();
    let h0 = solve_h0(
        &env,
        &e,
        &profile_grid(1e-6, 1e5, 100),
        &FixedPointOptions::default(),
    )
    .map_err(|x| x.to_string())?;
    let res = fixed_point_residual(&h0).map_err(|x| x.to_string())?;
    ensure(res < 1e-8, format!("fixed-point residual {res:e}"))?;
    let h = integrate_h(1.3, &env, &e, &profile_grid(1.0, 1e5, 100)).map_err(|x| x.to_string())?;
    let ratio = h.eval(1e3).unwrap().value / h0.eval(1e3).unwrap().value;
    ensure((ratio - 1.0).abs() < 1e-2, format!("h/h0 at 1e3 = {ratio}"))?;
    Ok(format!(
        "constant deviation {dev:.1e}, residual {res:.1e}, |h/h0 - 1| at 1e3 = {:.1e}",
        (ratio - 1.0).abs()
    ))
}

fn barrier_spec(values: Vec<f64>, curvature: Vec<f64>) -> BarrierSpec {
    BarrierSpec {
        k: 2,
        l: 1,
        spectrum: Spectrum::normalized(values, 2, 1).unwrap(),
        envelope: anisotropic_envelope(),
        phi: BoundaryData::Quadratic {
            offset: 0.0,
            curvature,
        },
        r_omega: 1.1,
        r0: 1.15,
        r_outer: 1.5,
        curvature: None,
        tau: None,
        grid: GridSpec::default(),
        samples: 1000,
        boundary_points: 128,
        r_far: 1e3,
        seed: 8,
    }
}

/// `S_k / S_l` of `D^2 f(r_A)` from the explicit Hessian, by dense eigenvalues.
fn ratio_by_eigen(spec: &BarrierSpec, x: &[f64], radial_slope: f64, radial_second: f64) -> f64 {
    let a = spec.spectrum.values();
    let n = a.len();
    let r = spec.spectrum.r_a(x);
    let ax = DVector::from_iterator(n, (0..n).map(|i| a[i] * x[i]));
    let mut hess = DMatrix::from_diagonal(&DVector::from_column_slice(a)) * (radial_slope / r);
    hess += &ax * ax.transpose() * (radial_second / (r * r) - radial_slope / (r * r * r));
    let s = eigen_sigmas(hess);
    s[spec.k] / s[spec.l]
}

fn c8_barrier_inequalities() -> Outcome {
    let t0 = Instant::now();
    let spec = barrier_spec(vec![0.98, 1.0, 1.02], vec![0.1, -0.05, 0.1]);
    let k_exp = spec.exponents().unwrap().decay();
    ensure(k_exp > 2.0, format!("K = {k_exp}"))?;
    let ctx = BarrierContext::prepare(&spec).map_err(|x| x.to_string())?;
    let reports = verify_barriers(&ctx, ctx.delta_hat).map_err(|x| x.to_string())?;
    let mut lines = Vec::new();
    for r in &reports {
        ensure(
            r.n_points >= 1000,
            format!("{} used {} points", r.check, r.n_points),
        )?;
        ensure(
            r.pass,
            format!(
                "{}: worst margin {:e} at {:?}",
                r.check, r.worst_margin, r.location
            ),
        )?;
        lines.push(format!("{} {:.1e}", r.check, r.worst_margin));
    }
    // the closed-form Hessian spectrum against dense eigenvalues on fresh points
    let sub = ctx.subsolution(ctx.delta_hat).map_err(|x| x.to_string())?;
    let mut sampler = Sampler::new(99);
    let mut worst: f64 = 0.0;
    for i in 0..40 {
        let x = sampler.on_shell(&spec.spectrum, 1.2 * 1.25f64.powi(i));
        let r = spec.spectrum.r_a(&x);
        let pt = sub.profile.eval(r).map_err(|x| x.to_string())?;
        let (slope, second) = (r * pt.value, pt.value + r * pt.deriv);
        let direct = sub
            .hessian_sigmas(&spec.spectrum, &x)
            .map_err(|x| x.to_string())?;
        let dev = (ratio_by_eigen(&spec, &x, slope, second) - direct[2] / direct[1]).abs();
        worst = worst.max(dev);
    }
    ensure(worst < 1e-9, format!("eigen oracle disagrees by {worst:e}"))?;
    within(t0.elapsed(), 30.0, "barrier checks")?;
    Ok(format!("{}; eigen oracle {worst:.1e}", lines.join(", ")))
}

fn c9_envelope_ordering() -> Outcome {
    let spec = barrier_spec(vec![0.97, 1.0, 1.01, 1.03], vec![0.1, -0.05, 0.1, 0.05]);
    let ctx = BarrierContext::prepare(&spec).map_err(|x| x.to_string())?;
    let pair = assemble_envelope(&ctx, ctx.c_tilde + 0.05).map_err(|x| x.to_string())?;
    for r in &pair.reports {
        ensure(
            r.pass,
            format!(
                "{}: worst margin {:e} at {:?}",
                r.check, r.worst_margin, r.location
            ),
        )?;
    }
    ensure(pair.far_gap < 1e-2, format!("far gap {}", pair.far_gap))?;
    Ok(format!(
        "c = {:.4}, far gap at r = 1e3 {:.1e}",
        pair.c, pair.far_gap
    ))
}

fn probe(beta: Option<f64>, excess: f64) -> ProbeSpec {
    ProbeSpec {
        k: 2,
        l: 1,
        spectrum: Spectrum::normalized(vec![0.97, 1.0, 1.01, 1.03], 2, 1).unwrap(),
        g0: G0Spec::Constant { value: 1.0 },
        c1: 0.2,
        beta,
        theta0: 1.0,
        excess,
        grid: GridSpec::default(),
        fit: FitOptions::default(),
    }
}

fn c10_decay_rates() -> Outcome {
    let big_k = ProfileExponents::from_spectrum(&probe(None, 1.0).spectrum, 2, 1)
        .unwrap()
        .decay();
    let mut parts = Vec::new();
    for beta in [big_k - 1.0, big_k + 1.0] {
        let res = probe_remainder(&probe(Some(beta), 0.1)).map_err(|x| x.to_string())?;
        let want = 2.0 - beta.min(big_k);
        ensure(
            (res.fit.slope - want).abs() <= 0.15,
            format!("beta {beta}: slope {} vs {want}", res.fit.slope),
        )?;
        parts.push(format!(
            "beta=K{:+.0}: slope {:.3} (want {want:.3})",
            beta - big_k,
            res.fit.slope
        ));
    }
    let res = borderline_probe(&probe(None, 1e-3)).map_err(|x| x.to_string())?;
    let ratio = res.fit.rms_ratio.ok_or("no log model fitted")?;
    ensure(
        res.resonant && res.fit.log_factor && ratio < 0.9,
        format!("beta = K: rms ratio {ratio}"),
    )?;
    parts.push(format!("beta=K: rms ratio {ratio:.3}"));
    Ok(parts.join(", "))
}

fn c11_obstruction() -> Outcome {
    let env = GEnvelope::build(G0Spec::Constant { value: 1.0 }, 0.0, 3.0, 1.0).unwrap();
    let opts = ObstructionOptions::default();
    let iso = obstruction_check(
        &Spectrum::normalized(vec![1.0; 3], 2, 1).unwrap(),
        &env,
        2,
        1,
        &opts,
    )
    .map_err(|x| x.to_string())?;
    let aniso = obstruction_check(
        &Spectrum::normalized(vec![0.5, 1.0, 2.0], 2, 1).unwrap(),
        &env,
        2,
        1,
        &opts,
    )
    .map_err(|x| x.to_string())?;
    ensure(
        iso.max_residual < 1e-10,
        format!("isotropic residual {:e}", iso.max_residual),
    )?;
    ensure(
        aniso.max_residual > 1e-6,
        format!("anisotropic residual {:e}", aniso.max_residual),
    )?;
    Ok(format!(
        "isotropic {:.1e}, anisotropic {:.1e}",
        iso.max_residual, aniso.max_residual
    ))
}

fn c12_kernel_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst_t: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(2..=8);
        let values: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..3.0)).collect();
        let s = Spectrum::new(values).unwrap();
        let a = s.values();
        for j in 1..=n {
            let tb = s.t_bounds(j).unwrap();
            let sj = sigma_brute(a, j);
            let axes: Vec<f64> = (0..n)
                .map(|i| a[i] * sigma_excluding_brute(a, j - 1, i) / sj)
                .collect();
            let hi = axes.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = axes.iter().cloned().fold(f64::INFINITY, f64::min);
            worst_t = worst_t
                .max((tb.t_upper - hi).abs())
                .max((tb.t_lower - lo).abs());
            // no direction beats the axes
            for _ in 0..20 {
                let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                if x.iter().all(|v| *v == 0.0) {
                    continue;
                }
                let lam = s.lambda_ratio(&x, j).unwrap();
                ensure(
                    lam <= hi + 1e-9 && lam >= lo - 1e-9,
                    format!("direction ratio {lam} outside [{lo}, {hi}]"),
                )?;
            }
        }
    }
    ensure(worst_t <= 1e-9, format!("t_bounds off by {worst_t:e}"))?;
    let mut worst_r: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(1..=8);
        let p: Vec<f64> = (0..n).map(|_| rng.random_range(-1.5..1.5)).collect();
        let q: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let s = rng.random_range(-2.0..2.0);
        let qv = DVector::from_column_slice(&q);
        let m = DMatrix::from_diagonal(&DVector::from_column_slice(&p)) + &qv * qv.transpose() * s;
        let oracle = eigen_sigmas(m);
        for (k, want) in oracle.iter().enumerate() {
            let v = rank_one_sigma(&p, &q, s, k).unwrap();
            worst_r = worst_r.max((v - want).abs());
        }
    }
    ensure(
        worst_r <= 1e-9,
        format!("rank_one_sigma off by {worst_r:e}"),
    )?;
    Ok(format!(
        "t_bounds {worst_t:.1e}, rank-one sigma {worst_r:.1e}"
    ))
}

#[test]
fn acceptance_criteria() {
    let criteria: [Criterion; 12] = [
        ("thresholds for l = 0", c1_thresholds),
        ("special Lagrangian constants", c2_special_lagrangian),
        ("planar closed form", c3_planar),
        ("radial residual and flux", c4_radial_residual),
        ("asymptotic constant map", c5_asymptotic_constant),
        ("profile sandwiches", c6_sandwiches),
        ("reference profile fixed point", c7_reference_profile),
        ("barrier inequalities", c8_barrier_inequalities),
        ("envelope ordering", c9_envelope_ordering),
        ("decay rates", c10_decay_rates),
        ("obstruction", c11_obstruction),
        ("kernel oracles", c12_kernel_oracles),
    ];
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = t0.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name} ({secs:.2}s): {detail}", i + 1),
            Err(why) => {
                println!("criterion {:>2} FAIL  {name} ({secs:.2}s): {why}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
