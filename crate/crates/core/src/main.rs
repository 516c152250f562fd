use clap::{Args, Parser, Subcommand};
use hessquot::asymptotics::{fit_decay, probe_remainder, FitOptions};
use hessquot::barrier::{assemble_envelope, verify_barriers, BarrierContext};
use hessquot::numeric::grid::log_spaced;
use hessquot::radial::{
    dim2_solution, radial_profile, special_lagrangian_3d, thresholds, HqParams, RadialSolution,
};
use hessquot::scenario::{
    build_profiles, create, exit, output_dir, resolve, run_scenario, write_json, RunError,
    RunOptions, Scenario,
};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Radial solutions, profile ODEs, barriers and decay fits for exterior Hessian quotient equations.
#[derive(Parser)]
#[command(name = "hessquot", version)]
struct Cli {
    /// Seed for every sampled check; overrides the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Multiplies every check tolerance.
    #[arg(long, global = true, default_value_t = 1.0)]
    tol_scale: f64,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone, Copy)]
struct Orders {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    l: usize,
    /// Convexity order; defaults to k.
    #[arg(long)]
    m: Option<usize>,
}

impl Orders {
    fn params(&self) -> Result<HqParams, RunError> {
        HqParams::new(self.n, self.k, self.l, self.m.unwrap_or(self.k))
            .map_err(|e| RunError::from_lib("params", e))
    }
}

#[derive(Args, Clone, Copy)]
struct Grid {
    #[arg(long, default_value_t = 1e3)]
    r_max: f64,
    #[arg(long, default_value_t = 2000)]
    nodes: usize,
}

impl Grid {
    fn nodes(&self) -> Result<Vec<f64>, RunError> {
        if self.nodes < 3 || !(self.r_max > 1.0) {
            return Err(RunError::config("grid needs --r-max > 1 and --nodes >= 3"));
        }
        Ok(log_spaced(1.0, self.r_max, self.nodes))
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Admissibility thresholds alpha1, alpha2 and the isotropic scale.
    Thresholds {
        #[command(flatten)]
        orders: Orders,
    },
    /// Radial solution for a flux constant; writes profiles.csv.
    Radial {
        #[command(flatten)]
        orders: Orders,
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        b: f64,
        #[command(flatten)]
        grid: Grid,
    },
    /// Planar closed form; writes dim2.csv.
    Dim2 {
        #[arg(long, allow_hyphen_values = true)]
        rho: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        b: f64,
        #[command(flatten)]
        grid: Grid,
    },
    /// Three-dimensional special Lagrangian radial solution; writes profiles.csv.
    Sl3 {
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        b: f64,
        #[command(flatten)]
        grid: Grid,
    },
    /// Profile ODE solutions h, H and h0 of a scenario; writes h.csv, big_h.csv, h0.csv.
    Profiles { config: String },
    /// Builds the ordered envelope pair of a scenario; writes envelope.json.
    Barriers { config: String },
    /// Sampled sub/supersolution inequalities of a scenario; writes verify.json.
    Verify { config: String },
    /// Remainder decay fit of a scenario; writes decay.csv and decay.json.
    Asymptotics { config: String },
    /// Runs scenario configs (paths or bundled ids) concurrently.
    Run {
        #[arg(required = true)]
        configs: Vec<String>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("HESSQUOT_LOG", "warn")).init();
    let cli = Cli::parse();
    let code = match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    };
    ExitCode::from(code as u8)
}

fn print_json<T: Serialize>(v: &T) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn ensure_dir(dir: &Path) -> Result<(), RunError> {
    fs::create_dir_all(dir).map_err(|e| RunError::io(dir, e))
}

fn write_radial(dir: &Path, sol: &RadialSolution) -> Result<(), RunError> {
    ensure_dir(dir)?;
    let mut w = create(dir, "profiles.csv")?;
    sol.write_csv(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| RunError::io(&dir.join("profiles.csv"), e))
}

/// Default window, moved inward on short grids to keep 1.5 decades.
fn summary_window(r: &[f64]) -> FitOptions {
    let hi = r[r.len() - 1].min(2000.0);
    FitOptions {
        r_lo: 50f64.min(hi / 10f64.powf(1.51)),
        r_hi: hi,
        ..Default::default()
    }
}

fn radial_summary(sol: &RadialSolution) -> serde_json::Value {
    let fit = fit_decay(&sol.r, &sol.remainder(), &summary_window(&sol.r)).ok();
    json!({
        "params": sol.params,
        "alpha": sol.alpha,
        "b": sol.b,
        "c": sol.c,
        "a_hat": sol.params.a_hat(),
        "max_residual": sol.max_residual(),
        "max_flux_drift": sol.max_flux_drift(),
        "remainder_fit": fit,
    })
}

fn scenario_dir(cli: &Cli, config: &str) -> Result<(Scenario, PathBuf), RunError> {
    let mut sc = resolve(config)?;
    if let Some(seed) = cli.seed {
        sc.seed = seed;
    }
    let dir = output_dir(&sc, &cli.out);
    ensure_dir(&dir)?;
    Ok((sc, dir))
}

fn lib<T>(stage: &str, r: hessquot::Result<T>) -> Result<T, RunError> {
    r.map_err(|e| RunError::from_lib(stage, e))
}

fn barrier_context(sc: &Scenario) -> Result<BarrierContext, RunError> {
    let spec = lib("barrier", sc.barrier_spec())?;
    lib("barrier/prepare", BarrierContext::prepare(&spec))
}

fn dispatch(cli: &Cli) -> Result<i32, RunError> {
    if !(cli.tol_scale > 0.0 && cli.tol_scale.is_finite()) {
        return Err(RunError::config(format!(
            "--tol-scale must be positive, got {}",
            cli.tol_scale
        )));
    }
    match &cli.cmd {
        Cmd::Thresholds { orders } => {
            let p = orders.params()?;
            let t = lib("radial/thresholds", thresholds(&p))?;
            print_json(&json!({
                "params": p,
                "alpha1": t.alpha1,
                "alpha2": if t.alpha2.is_finite() { json!(t.alpha2) } else { json!("inf") },
                "a_hat": p.a_hat(),
                "grid_discrepancy": t.grid_discrepancy,
            }));
            Ok(exit::PASS)
        }
        Cmd::Radial {
            orders,
            alpha,
            b,
            grid,
        } => {
            let p = orders.params()?;
            let sol = lib(
                "radial/radial_profile",
                radial_profile(*alpha, *b, &p, &grid.nodes()?),
            )?;
            write_radial(&cli.out, &sol)?;
            print_json(&radial_summary(&sol));
            Ok(exit::PASS)
        }
        Cmd::Sl3 { alpha, b, grid } => {
            let sol = lib(
                "radial/special_lagrangian_3d",
                special_lagrangian_3d(*alpha, *b, &grid.nodes()?),
            )?;
            write_radial(&cli.out, &sol)?;
            print_json(&radial_summary(&sol));
            Ok(exit::PASS)
        }
        Cmd::Dim2 { rho, b, grid } => {
            let sol = lib(
                "radial/dim2_solution",
                dim2_solution(*rho, *b, &grid.nodes()?),
            )?;
            ensure_dir(&cli.out)?;
            let path = cli.out.join("dim2.csv");
            let mut w = create(&cli.out, "dim2.csv")?;
            let res: std::io::Result<()> = (|| {
                writeln!(w, "r,u,du,remainder")?;
                for i in 0..sol.r.len() {
                    writeln!(
                        w,
                        "{:e},{:e},{:e},{:e}",
                        sol.r[i], sol.u[i], sol.du[i], sol.remainder[i]
                    )?;
                }
                w.flush()
            })();
            res.map_err(|e| RunError::io(&path, e))?;
            let fit = fit_decay(&sol.r, &sol.remainder, &summary_window(&sol.r)).ok();
            print_json(&json!({"rho": sol.rho, "b": sol.b, "nu": sol.nu, "remainder_fit": fit}));
            Ok(exit::PASS)
        }
        Cmd::Profiles { config } => {
            let (sc, dir) = scenario_dir(cli, config)?;
            let (h, big_h, h0) = lib("profiles", build_profiles(&sc))?;
            let mut summary = Vec::new();
            for (name, p) in [("h.csv", &h), ("big_h.csv", &big_h), ("h0.csv", &h0)] {
                let mut w = create(&dir, name)?;
                p.write_csv(&mut w)
                    .and_then(|_| w.flush())
                    .map_err(|e| RunError::io(&dir.join(name), e))?;
                summary.push(json!({"file": name, "kind": p.kind, "nodes": p.r.len(), "max_residual": p.max_residual()}));
            }
            print_json(&summary);
            Ok(exit::PASS)
        }
        Cmd::Barriers { config } => {
            let (sc, dir) = scenario_dir(cli, config)?;
            let ctx = barrier_context(&sc)?;
            let offset = sc.barrier.as_ref().map(|b| b.c_offset).unwrap_or(0.05);
            let pair = lib(
                "barrier/assemble_envelope",
                assemble_envelope(&ctx, ctx.c_tilde + offset),
            )?;
            let out = json!({
                "id": sc.id,
                "seed": sc.seed,
                "decay_exponent": ctx.exps.decay(),
                "c": pair.c,
                "c_tilde": pair.c_tilde,
                "delta": pair.delta,
                "delta_hat": ctx.delta_hat,
                "tau": pair.tau,
                "zeta1": pair.zeta1,
                "zeta2": pair.zeta2,
                "sampled": ctx.sampled,
                "far_gap": pair.far_gap,
                "pass": pair.pass(),
                "reports": pair.reports,
            });
            write_json(&dir, "envelope.json", &out)?;
            print_json(&out);
            Ok(if pair.pass() {
                exit::PASS
            } else {
                exit::CHECK_FAILED
            })
        }
        Cmd::Verify { config } => {
            let (sc, dir) = scenario_dir(cli, config)?;
            let ctx = barrier_context(&sc)?;
            let reports = lib(
                "barrier/verify_barriers",
                verify_barriers(&ctx, ctx.delta_hat),
            )?;
            let pass = reports.iter().all(|r| r.pass);
            let out = json!({"id": sc.id, "seed": sc.seed, "delta": ctx.delta_hat, "c": ctx.c_tilde, "pass": pass, "reports": reports});
            write_json(&dir, "verify.json", &out)?;
            print_json(&out);
            Ok(if pass { exit::PASS } else { exit::CHECK_FAILED })
        }
        Cmd::Asymptotics { config } => {
            let (sc, dir) = scenario_dir(cli, config)?;
            let spec = lib("asymptotics", sc.probe_spec())?;
            let res = lib("asymptotics/probe_remainder", probe_remainder(&spec))?;
            let mut w = create(&dir, "decay.csv")?;
            res.fit
                .write_csv(&res.r, &res.e, &mut w)
                .and_then(|_| w.flush())
                .map_err(|e| RunError::io(&dir.join("decay.csv"), e))?;
            let pass = res.pass(0.15 * cli.tol_scale);
            let out = json!({"id": sc.id, "pass": pass, "result": res});
            write_json(&dir, "decay.json", &out)?;
            print_json(&out);
            Ok(if pass { exit::PASS } else { exit::CHECK_FAILED })
        }
        Cmd::Run { configs } => run_batch(cli, configs),
    }
}

/// Loads every config first so that config errors stop the batch before any work.
fn run_batch(cli: &Cli, configs: &[String]) -> Result<i32, RunError> {
    let scenarios: Vec<Scenario> = configs
        .iter()
        .map(|c| resolve(c))
        .collect::<Result<_, _>>()?;
    let mut ids = BTreeSet::new();
    for sc in &scenarios {
        if !ids.insert(sc.id.as_str()) {
            return Err(RunError::config(format!(
                "scenario id `{}` appears twice in one run",
                sc.id
            )));
        }
    }
    let opts = RunOptions {
        seed: cli.seed,
        tol_scale: cli.tol_scale,
    };
    let results: Vec<_> = scenarios
        .par_iter()
        .map(|sc| run_scenario(sc, &cli.out, &opts))
        .collect();
    let mut code = exit::PASS;
    for (sc, res) in scenarios.iter().zip(results) {
        match res {
            Ok(rep) => {
                let failed: Vec<&str> = rep
                    .checks
                    .iter()
                    .filter(|c| !c.pass)
                    .map(|c| c.check.as_str())
                    .collect();
                if failed.is_empty() {
                    println!("{}: pass ({} checks)", sc.id, rep.checks.len());
                } else {
                    println!("{}: FAIL ({})", sc.id, failed.join(", "));
                }
                code = code.max(rep.exit_code());
            }
            Err(e) => {
                eprintln!("{}: error: {e}", sc.id);
                code = code.max(e.code);
            }
        }
    }
    Ok(code)
}
