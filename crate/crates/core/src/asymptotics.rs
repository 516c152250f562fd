//! Far-field decay rates of remainders, with a logarithmic model for the resonant case
//! where the envelope's decay power equals the profile exponent.

use crate::barrier::{GapIntegral, GridSpec};
use crate::error::{Error, Result};
use crate::numeric::fit::{fit_line, LineFit};
use crate::profiles::{
    integrate_h, solve_h0, FixedPointOptions, G0Spec, GEnvelope, ProfileExponents,
};
use crate::symmetric::Spectrum;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Remainders below `FLOOR * scale` are treated as numerically zero.
pub const FLOOR: f64 = 1e-13;
pub const MIN_NODES: usize = 20;
pub const MIN_DECADES: f64 = 1.5;
/// `rms_log / rms_power` below this detects the log factor, above `1 / DETECT` rejects it.
pub const DETECT: f64 = 0.9;
/// Exponents this close count as resonant.
pub const RESONANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub r_lo: f64,
    pub r_hi: f64,
    /// also fit `ln|e| - ln ln r` and compare
    pub log_model: bool,
    pub scale: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            r_lo: 50.0,
            r_hi: 2000.0,
            log_model: false,
            scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// exponent of the pure power model
    pub slope: f64,
    pub log_factor: bool,
    pub r_window: [f64; 2],
    /// rms of the pure power model in `ln|e|`
    pub rms: f64,
    pub n_points: usize,
    /// every sample in the window was below the floor
    pub underflow: bool,
    pub intercept: f64,
    pub log_slope: Option<f64>,
    pub log_intercept: Option<f64>,
    pub rms_log: Option<f64>,
    pub rms_ratio: Option<f64>,
    /// ratio in `[DETECT, 1/DETECT]`; widen the window
    pub inconclusive: bool,
    /// sign of the remainder in the window
    pub sign: f64,
}

impl DecayFit {
    /// Exponent of the winning model.
    pub fn rate(&self) -> f64 {
        if self.log_factor {
            self.log_slope.unwrap_or(self.slope)
        } else {
            self.slope
        }
    }

    /// Underflow passes any rate test.
    pub fn rate_within(&self, expected: f64, tol: f64) -> bool {
        self.underflow || (self.rate() - expected).abs() <= tol
    }

    pub fn model_power(&self, r: f64) -> f64 {
        self.sign * (self.intercept + self.slope * r.ln()).exp()
    }

    pub fn model_logpower(&self, r: f64) -> f64 {
        match (self.log_intercept, self.log_slope) {
            (Some(a), Some(s)) => self.sign * (a + s * r.ln()).exp() * r.ln(),
            _ => f64::NAN,
        }
    }

    /// CSV with columns `r,e,model_power,model_logpower`.
    pub fn write_csv<W: Write>(&self, r: &[f64], e: &[f64], mut w: W) -> std::io::Result<()> {
        writeln!(w, "r,e,model_power,model_logpower")?;
        for (x, v) in r.iter().zip(e) {
            writeln!(
                w,
                "{:e},{:e},{:e},{:e}",
                x,
                v,
                self.model_power(*x),
                self.model_logpower(*x)
            )?;
        }
        Ok(())
    }
}

/// Least-squares decay exponent of `|e|` over the window.
pub fn fit_decay(r: &[f64], e: &[f64], opts: &FitOptions) -> Result<DecayFit> {
    if r.len() != e.len() {
        return Err(Error::InvalidParams(format!(
            "{} radii but {} remainders",
            r.len(),
            e.len()
        )));
    }
    if !(opts.r_lo > 1.0 && opts.r_hi > opts.r_lo) {
        return Err(Error::InvalidParams(format!(
            "bad window [{}, {}]",
            opts.r_lo, opts.r_hi
        )));
    }
    if (opts.r_hi / opts.r_lo).log10() < MIN_DECADES {
        return Err(Error::InsufficientData(format!(
            "window [{}, {}] spans fewer than {MIN_DECADES} decades",
            opts.r_lo, opts.r_hi
        )));
    }
    let floor = FLOOR * opts.scale.abs().max(f64::MIN_POSITIVE);
    let inside: Vec<(f64, f64)> = r
        .iter()
        .zip(e)
        .filter(|(x, _)| **x >= opts.r_lo && **x <= opts.r_hi)
        .map(|(x, v)| (*x, *v))
        .collect();
    if inside.len() < MIN_NODES {
        return Err(Error::InsufficientData(format!(
            "{} nodes in the window, need {MIN_NODES}",
            inside.len()
        )));
    }
    if inside.iter().any(|(_, v)| !v.is_finite()) {
        return Err(Error::numeric(
            "fit_decay",
            "non-finite remainder in the window",
        ));
    }
    let kept: Vec<(f64, f64)> = inside
        .iter()
        .copied()
        .filter(|(_, v)| v.abs() >= floor)
        .collect();
    let window = [opts.r_lo, opts.r_hi];
    if kept.is_empty() {
        return Ok(DecayFit {
            slope: f64::NEG_INFINITY,
            log_factor: false,
            r_window: window,
            rms: 0.0,
            n_points: inside.len(),
            underflow: true,
            intercept: f64::NEG_INFINITY,
            log_slope: None,
            log_intercept: None,
            rms_log: None,
            rms_ratio: None,
            inconclusive: false,
            sign: 0.0,
        });
    }
    let span = (kept[kept.len() - 1].0 / kept[0].0).log10();
    if kept.len() < MIN_NODES || span < MIN_DECADES {
        return Err(Error::InsufficientData(format!(
            "{} nodes over {span:.2} decades remain above the floor {floor:e}",
            kept.len()
        )));
    }
    let xs: Vec<f64> = kept.iter().map(|(x, _)| x.ln()).collect();
    let ys: Vec<f64> = kept.iter().map(|(_, v)| v.abs().ln()).collect();
    let pos = kept.iter().filter(|(_, v)| *v > 0.0).count();
    let sign = if 2 * pos >= kept.len() { 1.0 } else { -1.0 };
    let power = fit_line(&xs, &ys);
    let mut fit = DecayFit {
        slope: power.slope,
        log_factor: false,
        r_window: window,
        rms: power.rms,
        n_points: kept.len(),
        underflow: false,
        intercept: power.intercept,
        log_slope: None,
        log_intercept: None,
        rms_log: None,
        rms_ratio: None,
        inconclusive: false,
        sign,
    };
    if opts.log_model {
        let yl: Vec<f64> = ys.iter().zip(&xs).map(|(y, x)| y - x.ln()).collect();
        let LineFit {
            intercept,
            slope,
            rms,
        } = fit_line(&xs, &yl);
        let ratio = if power.rms > 0.0 {
            rms / power.rms
        } else if rms > 0.0 {
            f64::INFINITY
        } else {
            1.0
        };
        fit.log_slope = Some(slope);
        fit.log_intercept = Some(intercept);
        fit.rms_log = Some(rms);
        fit.rms_ratio = Some(ratio);
        fit.log_factor = ratio < DETECT;
        fit.inconclusive = (DETECT..=1.0 / DETECT).contains(&ratio);
        if fit.inconclusive {
            log::warn!("log-factor test inconclusive (rms ratio {ratio:.3}); try a wider window");
        }
    }
    Ok(fit)
}

/// Remainder experiment: reference data `g0` perturbed
/// by `c1 r^-beta`, subsolution profile started `excess` above the envelope at `r = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSpec {
    pub k: usize,
    pub l: usize,
    pub spectrum: Spectrum,
    pub g0: G0Spec,
    pub c1: f64,
    /// envelope power; the profile exponent `K` when absent
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default = "default_theta0")]
    pub theta0: f64,
    /// `delta^(k-l) - g_upper(1)`
    pub excess: f64,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub fit: FitOptions,
}

fn default_theta0() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeResult {
    pub decay_exponent: f64,
    pub beta: f64,
    /// `2 - min(beta, K)`
    pub expected_slope: f64,
    pub resonant: bool,
    pub fit: DecayFit,
    #[serde(skip)]
    pub r: Vec<f64>,
    /// `w - int_0^r theta h0 - mu = -int_r^inf theta (h - h0)`
    #[serde(skip)]
    pub e: Vec<f64>,
}

impl ProbeResult {
    /// Rate check against `2 - min(beta, K)`; in the resonant case the log model must win.
    pub fn pass(&self, tol: f64) -> bool {
        if self.fit.underflow {
            return true;
        }
        if self.resonant && !self.fit.log_factor {
            return false;
        }
        self.fit.rate_within(self.expected_slope, tol)
    }
}

/// Subsolution remainder and its fitted rate. The log model is fitted when `beta` is
/// within `RESONANCE` of `K`.
pub fn probe_remainder(spec: &ProbeSpec) -> Result<ProbeResult> {
    let exps = ProfileExponents::from_spectrum(&spec.spectrum, spec.k, spec.l)?;
    let big_k = exps.decay();
    let beta = spec.beta.unwrap_or(big_k);
    let env = GEnvelope::build(spec.g0.clone(), spec.c1, beta, spec.theta0)?;
    if !(spec.excess > 0.0) {
        return Err(Error::InvalidParams(format!(
            "excess must be positive, got {}",
            spec.excess
        )));
    }
    let m = exps.gap() as f64;
    let delta = (env.upper(1.0) + spec.excess).powf(1.0 / m);
    let h0 = solve_h0(
        &env,
        &exps,
        &spec.grid.reference(),
        &FixedPointOptions::default(),
    )?;
    let h = integrate_h(delta, &env, &exps, &spec.grid.profile())?;
    let gaps = GapIntegral::new(&h, &h0)?;
    let r: Vec<f64> =
        h.r.iter()
            .copied()
            .filter(|x| *x >= spec.fit.r_lo && *x <= spec.fit.r_hi)
            .collect();
    let e: Vec<f64> = r
        .iter()
        .map(|x| gaps.from(*x).map(|v| -v))
        .collect::<Result<_>>()?;
    let resonant = (beta - big_k).abs() < RESONANCE;
    let opts = FitOptions {
        log_model: spec.fit.log_model || resonant,
        ..spec.fit
    };
    let fit = fit_decay(&r, &e, &opts)?;
    Ok(ProbeResult {
        decay_exponent: big_k,
        beta,
        expected_slope: 2.0 - beta.min(big_k),
        resonant,
        fit,
        r,
        e,
    })
}

/// Resonant probe: `beta` set exactly to `K`.
pub fn borderline_probe(spec: &ProbeSpec) -> Result<ProbeResult> {
    probe_remainder(&ProbeSpec {
        beta: None,
        ..spec.clone()
    })
}
