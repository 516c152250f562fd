//! JSON scenario configs, the check catalogue, and the runner that writes
//! `profiles.csv`, `report.json` and `timing.json`.

use crate::asymptotics::{probe_remainder, FitOptions, ProbeResult, ProbeSpec};
use crate::barrier::{
    assemble_envelope, obstruction_check, verify_barriers, BarrierContext, BarrierSpec,
    BoundaryData, CheckReport, GridSpec, ObstructionOptions,
};
use crate::error::Error;
use crate::numeric::grid::log_spaced;
use crate::profiles::{
    fixed_point_residual, integrate_big_h, integrate_h, solve_h0, FixedPointOptions, G0Spec,
    GEnvelope, ProfileExponents, SampledProfile,
};
use crate::radial::{radial_profile, thresholds, HqParams, RadialSolution, Thresholds};
use crate::symmetric::Spectrum;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const SCHEMA: u32 = 1;

/// Process exit codes.
pub mod exit {
    pub const PASS: i32 = 0;
    pub const CHECK_FAILED: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const NUMERIC: i32 = 3;
    pub const IO: i32 = 4;
}

/// A failure that ends a scenario before its report is complete.
#[derive(Debug, Clone, PartialEq)]
pub struct RunError {
    pub code: i32,
    pub message: String,
}

impl RunError {
    pub fn config(message: impl Into<String>) -> Self {
        RunError {
            code: exit::CONFIG,
            message: message.into(),
        }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        RunError {
            code: exit::IO,
            message: format!("{}: {err}", path.display()),
        }
    }

    /// Library error raised inside `stage`.
    pub fn from_lib(stage: &str, err: Error) -> Self {
        RunError {
            code: err.exit_code(),
            message: format!("{stage}: {err}"),
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for RunError {}

type RunResult<T> = std::result::Result<T, RunError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpectrumConfig {
    /// `"isotropic"`: the multiple of the identity in the quotient class
    Named(String),
    Values {
        values: Vec<f64>,
        /// rescale into the class `sigma_k = sigma_l`
        #[serde(default = "yes")]
        normalize: bool,
    },
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeConfig {
    pub g0: G0Spec,
    pub c1: f64,
    pub beta: f64,
    #[serde(default = "one")]
    pub theta0: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadialConfig {
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub b: f64,
    #[serde(default = "default_r_max")]
    pub r_max: f64,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
}

fn default_r_max() -> f64 {
    1e3
}

fn default_nodes() -> usize {
    2000
}

impl Default for RadialConfig {
    fn default() -> Self {
        RadialConfig {
            alpha: 0.0,
            b: 0.0,
            r_max: default_r_max(),
            nodes: default_nodes(),
        }
    }
}

/// Parameters of the profile stage; defaults sit inside the admissible ranges.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub tau: Option<f64>,
    #[serde(default)]
    pub grid: GridSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierConfig {
    pub phi: BoundaryData,
    pub r_omega: f64,
    pub r0: f64,
    pub r_outer: f64,
    #[serde(default)]
    pub curvature: Option<f64>,
    #[serde(default)]
    pub tau: Option<f64>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_boundary_points")]
    pub boundary_points: usize,
    #[serde(default = "default_r_far")]
    pub r_far: f64,
    /// the envelope pair uses `c = c_tilde + c_offset`
    #[serde(default = "default_c_offset")]
    pub c_offset: f64,
}

fn default_samples() -> usize {
    1000
}

fn default_boundary_points() -> usize {
    128
}

fn default_r_far() -> f64 {
    1e3
}

fn default_c_offset() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayConfig {
    #[serde(default = "unit_g0")]
    pub g0: G0Spec,
    pub c1: f64,
    /// envelope power; resonant (`beta = K`) when absent
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default = "one")]
    pub theta0: f64,
    pub excess: f64,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub fit: FitOptions,
}

fn unit_g0() -> G0Spec {
    G0Spec::Constant { value: 1.0 }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObstructionExpectation {
    /// residual below the tolerance
    Consistent,
    /// residual above the tolerance
    Mismatch,
}

/// Named verification with its tolerance. Margins in the report are nonnegative when
/// the check is satisfied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckSpec {
    Alpha1 {
        expected: f64,
        tolerance: f64,
        #[serde(default)]
        params: Option<HqParams>,
    },
    Alpha2 {
        expected: f64,
        tolerance: f64,
        #[serde(default)]
        params: Option<HqParams>,
    },
    AHat {
        expected: f64,
        tolerance: f64,
        #[serde(default)]
        params: Option<HqParams>,
    },
    /// node residual and flux drift of the radial profile
    RadialResidual {
        tolerance: f64,
        #[serde(default = "default_flux_tol")]
        flux_tolerance: f64,
    },
    ProfileSandwich {
        tolerance: f64,
    },
    H0FixedPoint {
        tolerance: f64,
    },
    BarrierInequalities {
        tolerance: f64,
        #[serde(default = "default_convexity_tol")]
        convexity_tolerance: f64,
    },
    EnvelopeOrdering {
        tolerance: f64,
        #[serde(default = "default_far_tol")]
        far_tolerance: f64,
    },
    DecayRate {
        tolerance: f64,
    },
    Obstruction {
        expect: ObstructionExpectation,
        tolerance: f64,
    },
}

fn default_flux_tol() -> f64 {
    1e-9
}

fn default_convexity_tol() -> f64 {
    1e-10
}

fn default_far_tol() -> f64 {
    1e-2
}

impl CheckSpec {
    pub fn name(&self) -> &'static str {
        match self {
            CheckSpec::Alpha1 { .. } => "alpha1",
            CheckSpec::Alpha2 { .. } => "alpha2",
            CheckSpec::AHat { .. } => "a_hat",
            CheckSpec::RadialResidual { .. } => "radial_residual",
            CheckSpec::ProfileSandwich { .. } => "profile_sandwich",
            CheckSpec::H0FixedPoint { .. } => "h0_fixed_point",
            CheckSpec::BarrierInequalities { .. } => "barrier_inequalities",
            CheckSpec::EnvelopeOrdering { .. } => "envelope_ordering",
            CheckSpec::DecayRate { .. } => "decay_rate",
            CheckSpec::Obstruction { .. } => "obstruction",
        }
    }

    fn tolerances(&self) -> Vec<(&'static str, f64)> {
        match self {
            CheckSpec::Alpha1 { tolerance, .. }
            | CheckSpec::Alpha2 { tolerance, .. }
            | CheckSpec::AHat { tolerance, .. }
            | CheckSpec::ProfileSandwich { tolerance }
            | CheckSpec::H0FixedPoint { tolerance }
            | CheckSpec::DecayRate { tolerance }
            | CheckSpec::Obstruction { tolerance, .. } => vec![("tolerance", *tolerance)],
            CheckSpec::RadialResidual {
                tolerance,
                flux_tolerance,
            } => vec![
                ("tolerance", *tolerance),
                ("flux_tolerance", *flux_tolerance),
            ],
            CheckSpec::BarrierInequalities {
                tolerance,
                convexity_tolerance,
            } => {
                vec![
                    ("tolerance", *tolerance),
                    ("convexity_tolerance", *convexity_tolerance),
                ]
            }
            CheckSpec::EnvelopeOrdering {
                tolerance,
                far_tolerance,
            } => vec![("tolerance", *tolerance), ("far_tolerance", *far_tolerance)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: u32,
    pub id: String,
    #[serde(default)]
    pub seed: u64,
    pub params: HqParams,
    #[serde(default)]
    pub radial: Option<RadialConfig>,
    #[serde(default)]
    pub spectrum: Option<SpectrumConfig>,
    #[serde(default)]
    pub envelope: Option<EnvelopeConfig>,
    #[serde(default)]
    pub profiles: Option<ProfileConfig>,
    #[serde(default)]
    pub barrier: Option<BarrierConfig>,
    #[serde(default)]
    pub decay: Option<DecayConfig>,
    #[serde(default)]
    pub checks: Vec<CheckSpec>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl Scenario {
    /// Parses JSON; errors carry the path of the offending field.
    pub fn from_json(text: &str) -> RunResult<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let sc: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            RunError::config(format!("config field `{path}`: {}", e.inner()))
        })?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> RunResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| RunError::io(path, e))?;
        Scenario::from_json(&text).map_err(|e| RunError {
            message: format!("{}: {}", path.display(), e.message),
            ..e
        })
    }

    /// Structural checks that do not need any numerics beyond the constructors.
    pub fn validate(&self) -> RunResult<()> {
        if self.schema != SCHEMA {
            return Err(RunError::config(format!(
                "config field `schema`: expected {SCHEMA}, found {}",
                self.schema
            )));
        }
        if self.id.trim().is_empty() || self.id.contains(['/', '\\']) {
            return Err(RunError::config(
                "config field `id`: must be a nonempty name without path separators",
            ));
        }
        self.params
            .validate()
            .map_err(|e| RunError::config(format!("config field `params`: {e}")))?;
        if let Some(env) = &self.envelope {
            self.build_envelope(env)
                .map_err(|e| RunError::config(format!("config field `envelope`: {e}")))?;
        }
        if self.spectrum.is_some() {
            self.spectrum()
                .map_err(|e| RunError::config(format!("config field `spectrum`: {e}")))?;
        }
        if let Some(d) = &self.decay {
            if let Some(beta) = d.beta {
                if !(beta > 2.0) {
                    return Err(RunError::config(format!(
                        "config field `decay.beta`: decay exponent beta = {beta} must satisfy beta > 2"
                    )));
                }
            }
        }
        for (i, c) in self.checks.iter().enumerate() {
            for (field, tol) in c.tolerances() {
                if !(tol > 0.0 && tol.is_finite()) {
                    return Err(RunError::config(format!(
                        "config field `checks[{i}].{field}`: tolerance must be positive, got {tol}"
                    )));
                }
            }
            let needs: &[(&str, bool)] = match c {
                CheckSpec::RadialResidual { .. } => &[],
                CheckSpec::ProfileSandwich { .. } | CheckSpec::H0FixedPoint { .. } => &[
                    ("spectrum", self.spectrum.is_some()),
                    ("envelope", self.envelope.is_some()),
                ],
                CheckSpec::BarrierInequalities { .. } | CheckSpec::EnvelopeOrdering { .. } => &[
                    ("spectrum", self.spectrum.is_some()),
                    ("envelope", self.envelope.is_some()),
                    ("barrier", self.barrier.is_some()),
                ],
                CheckSpec::DecayRate { .. } => &[
                    ("spectrum", self.spectrum.is_some()),
                    ("decay", self.decay.is_some()),
                ],
                CheckSpec::Obstruction { .. } => &[
                    ("spectrum", self.spectrum.is_some()),
                    ("envelope", self.envelope.is_some()),
                ],
                _ => &[],
            };
            for (section, present) in needs {
                if !present {
                    return Err(RunError::config(format!(
                        "config field `checks[{i}]`: check `{}` needs a `{section}` section",
                        c.name()
                    )));
                }
            }
        }
        Ok(())
    }

    fn build_envelope(&self, env: &EnvelopeConfig) -> crate::Result<GEnvelope> {
        GEnvelope::build(env.g0.clone(), env.c1, env.beta, env.theta0)
    }

    pub fn spectrum(&self) -> crate::Result<Spectrum> {
        let (n, k, l) = (self.params.n, self.params.k, self.params.l);
        match &self.spectrum {
            None => Err(Error::InvalidParams("no spectrum given".into())),
            Some(SpectrumConfig::Named(s)) if s == "isotropic" => {
                Spectrum::normalized(vec![1.0; n], k, l)
            }
            Some(SpectrumConfig::Named(s)) => Err(Error::InvalidParams(format!(
                "unknown spectrum `{s}`; use \"isotropic\" or {{\"values\": [...]}}"
            ))),
            Some(SpectrumConfig::Values { values, normalize }) => {
                if values.len() != n {
                    return Err(Error::InvalidParams(format!(
                        "{} values for dimension n = {n}",
                        values.len()
                    )));
                }
                if *normalize {
                    Spectrum::normalized(values.clone(), k, l)
                } else {
                    Spectrum::new(values.clone())
                }
            }
        }
    }

    pub fn envelope(&self) -> crate::Result<GEnvelope> {
        match &self.envelope {
            Some(e) => self.build_envelope(e),
            None => Err(Error::InvalidParams("no envelope given".into())),
        }
    }

    pub fn barrier_spec(&self) -> crate::Result<BarrierSpec> {
        let b = self
            .barrier
            .as_ref()
            .ok_or_else(|| Error::InvalidParams("no barrier section".into()))?;
        Ok(BarrierSpec {
            k: self.params.k,
            l: self.params.l,
            spectrum: self.spectrum()?,
            envelope: self.envelope()?,
            phi: b.phi.clone(),
            r_omega: b.r_omega,
            r0: b.r0,
            r_outer: b.r_outer,
            curvature: b.curvature,
            tau: b.tau,
            grid: b.grid,
            samples: b.samples,
            boundary_points: b.boundary_points,
            r_far: b.r_far,
            seed: self.seed,
        })
    }

    pub fn probe_spec(&self) -> crate::Result<ProbeSpec> {
        let d = self
            .decay
            .as_ref()
            .ok_or_else(|| Error::InvalidParams("no decay section".into()))?;
        Ok(ProbeSpec {
            k: self.params.k,
            l: self.params.l,
            spectrum: self.spectrum()?,
            g0: d.g0.clone(),
            c1: d.c1,
            beta: d.beta,
            theta0: d.theta0,
            excess: d.excess,
            grid: d.grid,
            fit: d.fit,
        })
    }
}

/// Result of one named check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub check: String,
    pub pass: bool,
    /// smallest margin; nonnegative when satisfied, compared against `-tolerance`
    pub worst_margin: f64,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected: Option<f64>,
    /// per-zone or per-inequality sampled reports
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub details: Vec<CheckReport>,
}

impl CheckOutcome {
    fn from_margin(check: &str, margin: f64, tolerance: f64) -> Self {
        CheckOutcome {
            check: check.into(),
            pass: !margin.is_nan() && margin >= -tolerance,
            worst_margin: margin,
            tolerance,
            value: None,
            expected: None,
            details: Vec::new(),
        }
    }

    /// `|value - expected| <= tolerance`.
    fn closeness(check: &str, value: f64, expected: f64, tolerance: f64) -> Self {
        let margin = tolerance - (value - expected).abs();
        CheckOutcome {
            value: Some(value),
            expected: Some(expected),
            ..Self::from_margin(check, margin, 0.0)
        }
        .with_tolerance(tolerance)
    }

    fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    /// Folds sampled reports, rescored at their own tolerances.
    fn from_reports(check: &str, reports: Vec<CheckReport>) -> Self {
        let pass = reports.iter().all(|r| r.pass);
        let worst = reports
            .iter()
            .map(|r| {
                if r.worst_margin.is_nan() {
                    f64::NEG_INFINITY
                } else {
                    r.worst_margin + r.tolerance
                }
            })
            .fold(f64::INFINITY, f64::min);
        CheckOutcome {
            check: check.into(),
            pass,
            worst_margin: worst,
            tolerance: 0.0,
            value: None,
            expected: None,
            details: reports,
        }
    }
}

fn rescore(mut r: CheckReport, tolerance: f64) -> CheckReport {
    r.tolerance = tolerance;
    r.pass = !r.worst_margin.is_nan() && r.worst_margin >= -tolerance;
    r
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema: u32,
    pub id: String,
    pub seed: u64,
    pub tol_scale: f64,
    pub pass: bool,
    pub checks: Vec<CheckOutcome>,
    /// files written next to the report
    pub artifacts: Vec<String>,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            exit::PASS
        } else {
            exit::CHECK_FAILED
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub tol_scale: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            seed: None,
            tol_scale: 1.0,
        }
    }
}

/// Stage cache for one scenario run.
struct Runner<'a> {
    sc: &'a Scenario,
    timing: BTreeMap<String, f64>,
    thresholds: BTreeMap<(usize, usize, usize, usize), Thresholds>,
    radial: Option<RadialSolution>,
    profiles: Option<(SampledProfile, SampledProfile, SampledProfile)>,
    barrier: Option<BarrierContext>,
    probe: Option<ProbeResult>,
}

impl<'a> Runner<'a> {
    fn timed<T>(&mut self, stage: &str, f: impl FnOnce() -> crate::Result<T>) -> RunResult<T> {
        let t = Instant::now();
        let out = f().map_err(|e| RunError::from_lib(stage, e));
        *self.timing.entry(stage.to_string()).or_insert(0.0) += t.elapsed().as_secs_f64();
        out
    }

    fn thresholds(&mut self, p: HqParams) -> RunResult<Thresholds> {
        let key = (p.n, p.k, p.l, p.m);
        if let Some(t) = self.thresholds.get(&key) {
            return Ok(*t);
        }
        let t = self.timed("radial/thresholds", || thresholds(&p))?;
        self.thresholds.insert(key, t);
        Ok(t)
    }

    fn radial(&mut self) -> RunResult<&RadialSolution> {
        if self.radial.is_none() {
            let cfg = self.sc.radial.clone().unwrap_or_default();
            let p = self.sc.params;
            let sol = self.timed("radial/radial_profile", || {
                if cfg.nodes < 3 || !(cfg.r_max > 1.0) {
                    return Err(Error::InvalidParams(
                        "radial grid needs r_max > 1 and at least 3 nodes".into(),
                    ));
                }
                radial_profile(cfg.alpha, cfg.b, &p, &log_spaced(1.0, cfg.r_max, cfg.nodes))
            })?;
            self.radial = Some(sol);
        }
        Ok(self.radial.as_ref().unwrap())
    }

    fn profiles(&mut self) -> RunResult<&(SampledProfile, SampledProfile, SampledProfile)> {
        if self.profiles.is_none() {
            let sc = self.sc;
            let out = self.timed("profiles/integrate", || build_profiles(sc))?;
            self.profiles = Some(out);
        }
        Ok(self.profiles.as_ref().unwrap())
    }

    fn barrier(&mut self) -> RunResult<&BarrierContext> {
        if self.barrier.is_none() {
            let sc = self.sc;
            let ctx = self.timed("barrier/prepare", || {
                BarrierContext::prepare(&sc.barrier_spec()?)
            })?;
            self.barrier = Some(ctx);
        }
        Ok(self.barrier.as_ref().unwrap())
    }

    fn probe(&mut self) -> RunResult<&ProbeResult> {
        if self.probe.is_none() {
            let sc = self.sc;
            let res = self.timed("asymptotics/probe_remainder", || {
                probe_remainder(&sc.probe_spec()?)
            })?;
            self.probe = Some(res);
        }
        Ok(self.probe.as_ref().unwrap())
    }

    fn check(&mut self, spec: &CheckSpec, scale: f64) -> RunResult<CheckOutcome> {
        let name = spec.name();
        let own = self.sc.params;
        Ok(match spec {
            CheckSpec::Alpha1 {
                expected,
                tolerance,
                params,
            } => {
                let t = self.thresholds(params.unwrap_or(own))?;
                CheckOutcome::closeness(name, t.alpha1, *expected, tolerance * scale)
            }
            CheckSpec::Alpha2 {
                expected,
                tolerance,
                params,
            } => {
                let t = self.thresholds(params.unwrap_or(own))?;
                CheckOutcome::closeness(name, t.alpha2, *expected, tolerance * scale)
            }
            CheckSpec::AHat {
                expected,
                tolerance,
                params,
            } => {
                let p = params.unwrap_or(own);
                CheckOutcome::closeness(name, p.a_hat(), *expected, tolerance * scale)
            }
            CheckSpec::RadialResidual {
                tolerance,
                flux_tolerance,
            } => {
                let sol = self.radial()?;
                let res = CheckOutcome::from_margin(
                    "node_residual",
                    tolerance * scale - sol.max_residual(),
                    0.0,
                );
                let flux = CheckOutcome::from_margin(
                    "flux_drift",
                    flux_tolerance * scale - sol.max_flux_drift(),
                    0.0,
                );
                let details = vec![
                    outcome_as_report(&res, sol.max_residual()),
                    outcome_as_report(&flux, sol.max_flux_drift()),
                ];
                CheckOutcome {
                    value: Some(sol.max_residual()),
                    ..CheckOutcome::from_reports(name, details)
                }
                .with_tolerance(tolerance * scale)
            }
            CheckSpec::ProfileSandwich { tolerance } => {
                let (h, big_h, _) = self.profiles()?;
                let reports = vec![
                    rescore(sandwich_report("h_sandwich", h), tolerance * scale),
                    rescore(sandwich_report("big_h_sandwich", big_h), tolerance * scale),
                    rescore(
                        monotone_report("h_nonincreasing", h, -1.0),
                        tolerance * scale,
                    ),
                    rescore(
                        monotone_report("big_h_nondecreasing", big_h, 1.0),
                        tolerance * scale,
                    ),
                ];
                CheckOutcome::from_reports(name, reports)
            }
            CheckSpec::H0FixedPoint { tolerance } => {
                let (_, _, h0) = self.profiles()?;
                let h0 = h0.clone();
                let worst = self.timed("profiles/fixed_point_residual", || {
                    fixed_point_residual(&h0)
                })?;
                CheckOutcome {
                    value: Some(worst),
                    ..CheckOutcome::from_margin(name, -worst, tolerance * scale)
                }
            }
            CheckSpec::BarrierInequalities {
                tolerance,
                convexity_tolerance,
            } => {
                let (t, ct) = (tolerance * scale, convexity_tolerance * scale);
                let reports = self.timed_barrier("barrier/verify_barriers", |ctx| {
                    verify_barriers(ctx, ctx.delta_hat)
                })?;
                let reports = reports
                    .into_iter()
                    .map(|r| {
                        if r.check.ends_with("k_convexity") {
                            rescore(r, ct)
                        } else {
                            rescore(r, t)
                        }
                    })
                    .collect();
                CheckOutcome::from_reports(name, reports)
            }
            CheckSpec::EnvelopeOrdering {
                tolerance,
                far_tolerance,
            } => {
                let (t, ft) = (tolerance * scale, far_tolerance * scale);
                let offset = self.sc.barrier.as_ref().map(|b| b.c_offset).unwrap_or(0.05);
                let pair = self.timed_barrier("barrier/assemble_envelope", |ctx| {
                    assemble_envelope(ctx, ctx.c_tilde + offset)
                })?;
                let reports = pair
                    .reports
                    .iter()
                    .cloned()
                    .map(|r| match r.check.as_str() {
                        "far_field_constant" => rescore(r, ft),
                        "seam_subsolution_above_envelope" => r,
                        _ => rescore(r, t),
                    })
                    .collect();
                CheckOutcome {
                    value: Some(pair.far_gap),
                    ..CheckOutcome::from_reports(name, reports)
                }
            }
            CheckSpec::DecayRate { tolerance } => {
                let res = self.probe()?;
                let t = tolerance * scale;
                let mut out = if res.fit.underflow {
                    CheckOutcome::from_margin(name, 0.0, t)
                } else {
                    CheckOutcome::closeness(name, res.fit.rate(), res.expected_slope, t)
                };
                if res.resonant && !res.fit.underflow && !res.fit.log_factor {
                    out.pass = false;
                }
                out.expected = Some(res.expected_slope);
                out
            }
            CheckSpec::Obstruction { expect, tolerance } => {
                let sc = self.sc;
                let rep = self.timed("barrier/obstruction_check", || {
                    obstruction_check(
                        &sc.spectrum()?,
                        &sc.envelope()?,
                        sc.params.k,
                        sc.params.l,
                        &ObstructionOptions::default(),
                    )
                })?;
                let t = tolerance * scale;
                let margin = match expect {
                    ObstructionExpectation::Consistent => t - rep.max_residual,
                    ObstructionExpectation::Mismatch => rep.max_residual - t,
                };
                CheckOutcome {
                    value: Some(rep.max_residual),
                    ..CheckOutcome::from_margin(name, margin, 0.0)
                }
                .with_tolerance(t)
            }
        })
    }

    fn timed_barrier<T>(
        &mut self,
        stage: &str,
        f: impl FnOnce(&BarrierContext) -> crate::Result<T>,
    ) -> RunResult<T> {
        self.barrier()?;
        let ctx = self.barrier.take().unwrap();
        let out = self.timed(stage, || f(&ctx));
        self.barrier = Some(ctx);
        out
    }
}

fn outcome_as_report(o: &CheckOutcome, value: f64) -> CheckReport {
    CheckReport {
        check: o.check.clone(),
        n_points: 1,
        worst_margin: o.worst_margin,
        location: vec![value],
        tolerance: o.tolerance,
        pass: o.pass,
    }
}

/// Relative distance to the nearer sandwich bound, over nodes with `r >= 1`.
fn sandwich_report(check: &str, p: &SampledProfile) -> CheckReport {
    let m: Vec<(f64, Vec<f64>)> = (0..p.r.len())
        .filter(|i| p.r[*i] >= 1.0)
        .map(|i| {
            let v = p.value[i];
            (
                (v - p.bound_low[i]).min(p.bound_high[i] - v) / v.abs().max(1.0),
                vec![p.r[i]],
            )
        })
        .collect();
    CheckReport::from_margins(check, &m, 0.0)
}

fn monotone_report(check: &str, p: &SampledProfile, sign: f64) -> CheckReport {
    let m: Vec<(f64, Vec<f64>)> = (0..p.r.len())
        .filter(|i| p.r[*i] >= 1.0)
        .map(|i| (sign * p.deriv[i], vec![p.r[i]]))
        .collect();
    CheckReport::from_margins(check, &m, 0.0)
}

/// `h`, `H` and `h0` for the scenario's spectrum and envelope.
pub fn build_profiles(
    sc: &Scenario,
) -> crate::Result<(SampledProfile, SampledProfile, SampledProfile)> {
    let a = sc.spectrum()?;
    let env = sc.envelope()?;
    let exps = ProfileExponents::from_spectrum(&a, sc.params.k, sc.params.l)?;
    let cfg = sc.profiles.clone().unwrap_or_default();
    let m = exps.gap() as f64;
    let delta = cfg
        .delta
        .unwrap_or(1.5 * env.sup_upper(1.0, f64::INFINITY).powf(1.0 / m));
    let tau = cfg
        .tau
        .unwrap_or(((0.5 * (1.0 + exps.ratio())) * env.lower(1.0)).powf(1.0 / m));
    let grid = cfg.grid.profile();
    let h = integrate_h(delta, &env, &exps, &grid)?;
    let big_h = integrate_big_h(tau, &env, &exps, &grid)?;
    let h0 = solve_h0(
        &env,
        &exps,
        &cfg.grid.reference(),
        &FixedPointOptions::default(),
    )?;
    Ok((h, big_h, h0))
}

/// Opens `dir/name` for buffered writing.
pub fn create(dir: &Path, name: &str) -> RunResult<BufWriter<fs::File>> {
    let path = dir.join(name);
    fs::File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| RunError::io(&path, e))
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> RunResult<()> {
    let path = dir.join(name);
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| RunError::io(&path, e.into()))?;
    writeln!(w)
        .and_then(|_| w.flush())
        .map_err(|e| RunError::io(&path, e))
}

fn write_with<F>(dir: &Path, name: &str, f: F) -> RunResult<()>
where
    F: FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>,
{
    let mut w = create(dir, name)?;
    f(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| RunError::io(&dir.join(name), e))
}

#[derive(Debug, Clone, Serialize)]
struct Timing<'a> {
    id: &'a str,
    total_seconds: f64,
    stages: &'a BTreeMap<String, f64>,
}

/// Output directory: the scenario's own, relative paths resolved under `out`.
pub fn output_dir(sc: &Scenario, out: &Path) -> PathBuf {
    match &sc.output_dir {
        Some(p) if p.is_absolute() => p.clone(),
        Some(p) => out.join(p),
        None => out.join(&sc.id),
    }
}

/// Runs every check and writes the artifacts. The report depends only on the config,
/// the seed and the tolerance scale.
pub fn run_scenario(sc: &Scenario, out: &Path, opts: &RunOptions) -> RunResult<Report> {
    if !(opts.tol_scale > 0.0 && opts.tol_scale.is_finite()) {
        return Err(RunError::config(format!(
            "--tol-scale must be positive, got {}",
            opts.tol_scale
        )));
    }
    let start = Instant::now();
    let mut sc = sc.clone();
    if let Some(seed) = opts.seed {
        sc.seed = seed;
    }
    let dir = output_dir(&sc, out);
    fs::create_dir_all(&dir).map_err(|e| RunError::io(&dir, e))?;
    let mut runner = Runner {
        sc: &sc,
        timing: BTreeMap::new(),
        thresholds: BTreeMap::new(),
        radial: None,
        profiles: None,
        barrier: None,
        probe: None,
    };
    let mut checks = Vec::with_capacity(sc.checks.len());
    for c in &sc.checks {
        let outcome = runner.check(c, opts.tol_scale)?;
        log::info!(
            "{}: {} {}",
            sc.id,
            outcome.check,
            if outcome.pass { "pass" } else { "FAIL" }
        );
        checks.push(outcome);
    }
    let mut artifacts = Vec::new();
    if sc.radial.is_some() || runner.radial.is_some() {
        let sol = runner.radial()?;
        write_with(&dir, "profiles.csv", |w| sol.write_csv(w))?;
        artifacts.push("profiles.csv".to_string());
    }
    if sc.profiles.is_some() || runner.profiles.is_some() {
        let (h, big_h, h0) = runner.profiles()?;
        for (name, p) in [("h.csv", h), ("big_h.csv", big_h), ("h0.csv", h0)] {
            write_with(&dir, name, |w| p.write_csv(w))?;
            artifacts.push(name.to_string());
        }
    }
    if let Some(res) = &runner.probe {
        write_with(&dir, "decay.csv", |w| res.fit.write_csv(&res.r, &res.e, w))?;
        artifacts.push("decay.csv".to_string());
    }
    artifacts.push("report.json".into());
    artifacts.push("timing.json".into());
    let report = Report {
        schema: SCHEMA,
        id: sc.id.clone(),
        seed: sc.seed,
        tol_scale: opts.tol_scale,
        pass: checks.iter().all(|c| c.pass),
        checks,
        artifacts,
    };
    write_json(&dir, "report.json", &report)?;
    let timing = Timing {
        id: &sc.id,
        total_seconds: start.elapsed().as_secs_f64(),
        stages: &runner.timing,
    };
    write_json(&dir, "timing.json", &timing)?;
    Ok(report)
}

/// Scenarios shipped with the crate, by id.
pub const BUNDLED: &[(&str, &str)] = &[
    (
        "l0_thresholds",
        include_str!("../scenarios/l0_thresholds.json"),
    ),
    (
        "special_lagrangian",
        include_str!("../scenarios/special_lagrangian.json"),
    ),
    (
        "anisotropic_barriers",
        include_str!("../scenarios/anisotropic_barriers.json"),
    ),
    (
        "resonant_decay",
        include_str!("../scenarios/resonant_decay.json"),
    ),
];

/// A path to a JSON file, or the id of a bundled scenario when no such file exists.
pub fn resolve(arg: &str) -> RunResult<Scenario> {
    let path = Path::new(arg);
    if !path.exists() {
        if let Some((_, text)) = BUNDLED.iter().find(|(id, _)| *id == arg) {
            return Scenario::from_json(text);
        }
    }
    Scenario::load(path)
}
