//! Right-hand-side envelopes `g_lower <= g0 <= g_upper` around a base profile.

use crate::error::{Error, Result};
use crate::numeric::grid::decade_lattice;
use serde::{Deserialize, Serialize};

/// Base profile `g0(r)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum G0Spec {
    Constant {
        value: f64,
    },
    /// `limit + amplitude * (1 + r)^(-power)`
    RationalDecay {
        limit: f64,
        amplitude: f64,
        power: f64,
    },
    /// Piecewise linear through `(r, g)`, constant outside the table.
    Tabulated {
        r: Vec<f64>,
        g: Vec<f64>,
    },
}

impl G0Spec {
    pub fn value(&self, r: f64) -> f64 {
        match self {
            G0Spec::Constant { value } => *value,
            G0Spec::RationalDecay {
                limit,
                amplitude,
                power,
            } => limit + amplitude * (1.0 + r).powf(-power),
            G0Spec::Tabulated { r: rs, g } => {
                if r <= rs[0] {
                    return g[0];
                }
                if r >= rs[rs.len() - 1] {
                    return g[g.len() - 1];
                }
                let i = crate::numeric::grid::locate(rs, r);
                let s = (r - rs[i]) / (rs[i + 1] - rs[i]);
                g[i] + s * (g[i + 1] - g[i])
            }
        }
    }

    pub fn deriv(&self, r: f64) -> f64 {
        match self {
            G0Spec::Constant { .. } => 0.0,
            G0Spec::RationalDecay {
                amplitude, power, ..
            } => -amplitude * power * (1.0 + r).powf(-power - 1.0),
            G0Spec::Tabulated { r: rs, g } => {
                if r < rs[0] || r >= rs[rs.len() - 1] {
                    return 0.0;
                }
                let i = crate::numeric::grid::locate(rs, r);
                (g[i + 1] - g[i]) / (rs[i + 1] - rs[i])
            }
        }
    }

    /// `lim_{r -> inf} g0(r)`.
    pub fn limit(&self) -> f64 {
        match self {
            G0Spec::Constant { value } => *value,
            G0Spec::RationalDecay { limit, .. } => *limit,
            G0Spec::Tabulated { g, .. } => g[g.len() - 1],
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            G0Spec::Constant { value } if !(*value > 0.0 && value.is_finite()) => Err(
                Error::InvalidParams(format!("g0 constant must be positive, got {value}")),
            ),
            G0Spec::RationalDecay {
                limit,
                amplitude,
                power,
            } => {
                if !(*limit > 0.0) || !amplitude.is_finite() || !(*power > 0.0) {
                    return Err(Error::InvalidParams(format!(
                        "rational decay needs limit > 0 and power > 0, got limit {limit}, power {power}"
                    )));
                }
                if limit + amplitude.min(0.0) <= 0.0 {
                    return Err(Error::InvalidParams(
                        "rational decay g0 is not positive".into(),
                    ));
                }
                Ok(())
            }
            G0Spec::Tabulated { r, g } => {
                if r.len() < 2
                    || r.len() != g.len()
                    || r.windows(2).any(|w| w[1] <= w[0])
                    || r[0] < 0.0
                {
                    return Err(Error::InvalidParams(
                        "table needs >= 2 increasing nonnegative radii".into(),
                    ));
                }
                if g.iter().any(|v| !(*v > 0.0)) {
                    return Err(Error::InvalidParams("tabulated g0 must be positive".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Which member of the envelope drives an ODE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Drive {
    Upper,
    Lower,
    Base,
}

/// `g_upper = g0 + C1 r^-beta`, `g_lower = g0 - C1 r^-beta` for `r > theta0`, continued
/// by constant offsets below `theta0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GEnvelope {
    pub g0: G0Spec,
    pub c1: f64,
    pub beta: f64,
    pub theta0: f64,
}

/// Radii on which envelope properties are checked.
fn validation_grid(theta0: f64) -> Vec<f64> {
    let mut g = vec![0.0];
    g.extend(decade_lattice(1e-3, 1e6, 50));
    g.push(theta0);
    g.sort_by(|a, b| a.partial_cmp(b).unwrap());
    g.dedup();
    g
}

impl GEnvelope {
    /// Builds and validates an envelope. `c1 = 0` is accepted as the unperturbed limit.
    pub fn build(g0: G0Spec, c1: f64, beta: f64, theta0: f64) -> Result<Self> {
        if !(beta > 2.0) {
            return Err(Error::Hypothesis(format!(
                "decay exponent beta = {beta} must satisfy beta > 2"
            )));
        }
        if !(c1 >= 0.0) || !c1.is_finite() {
            return Err(Error::InvalidParams(format!(
                "perturbation amplitude C1 = {c1} must be nonnegative"
            )));
        }
        if !(theta0 > 0.0) {
            return Err(Error::InvalidParams(format!(
                "switch radius theta0 = {theta0} must be positive"
            )));
        }
        g0.validate()?;
        let env = GEnvelope {
            g0,
            c1,
            beta,
            theta0,
        };
        let grid = validation_grid(theta0);
        let mut prev: Option<(f64, f64)> = None;
        for &r in &grid {
            let lo = env.lower(r);
            if !(lo > 0.0) {
                return Err(Error::Hypothesis(format!(
                    "g_lower({r}) = {lo} is not positive; reduce C1 or raise theta0"
                )));
            }
            if !(lo <= env.g0.value(r) && env.g0.value(r) <= env.upper(r)) {
                return Err(Error::numeric(
                    "envelope_build",
                    format!("ordering fails at r = {r}"),
                ));
            }
            // monotonicity is required where profiles live, r >= 1
            if r >= 1.0 {
                if let Some((pr, pl)) = prev {
                    if lo < pl - 1e-14 * pl {
                        return Err(Error::Hypothesis(format!(
                            "g_lower decreases between r = {pr} and r = {r}; choose a larger theta0 or C1"
                        )));
                    }
                }
                prev = Some((r, lo));
            }
        }
        Ok(env)
    }

    /// `C1 max(r, theta0)^-beta`.
    pub fn offset(&self, r: f64) -> f64 {
        self.c1 * r.max(self.theta0).powf(-self.beta)
    }

    /// One-sided derivative of the offset; `right` selects the limit from above at the kink.
    pub fn offset_deriv_sided(&self, r: f64, right: bool) -> f64 {
        if r > self.theta0 || (right && r == self.theta0) {
            -self.beta * self.c1 * r.powf(-self.beta - 1.0)
        } else {
            0.0
        }
    }

    pub fn upper(&self, r: f64) -> f64 {
        self.g0.value(r) + self.offset(r)
    }

    pub fn lower(&self, r: f64) -> f64 {
        self.g0.value(r) - self.offset(r)
    }

    pub fn eval(&self, drive: Drive, r: f64) -> f64 {
        match drive {
            Drive::Upper => self.upper(r),
            Drive::Lower => self.lower(r),
            Drive::Base => self.g0.value(r),
        }
    }

    /// Difference `drive - g0`, exact.
    pub fn drive_offset(&self, drive: Drive, r: f64) -> f64 {
        match drive {
            Drive::Upper => self.offset(r),
            Drive::Lower => -self.offset(r),
            Drive::Base => 0.0,
        }
    }

    pub fn offset_deriv(&self, r: f64) -> f64 {
        self.offset_deriv_sided(r, true)
    }

    /// Derivative of the driving function, taken from above at the switch radius.
    pub fn eval_deriv(&self, drive: Drive, r: f64) -> f64 {
        self.eval_deriv_sided(drive, r, true)
    }

    pub fn eval_deriv_sided(&self, drive: Drive, r: f64, right: bool) -> f64 {
        let d0 = self.g0.deriv(r);
        match drive {
            Drive::Upper => d0 + self.offset_deriv_sided(r, right),
            Drive::Lower => d0 - self.offset_deriv_sided(r, right),
            Drive::Base => d0,
        }
    }

    /// Sampled supremum of `g_upper` on `[lo, hi]`.
    pub fn sup_upper(&self, lo: f64, hi: f64) -> f64 {
        let mut s = self.upper(lo).max(self.upper(hi));
        for r in validation_grid(self.theta0) {
            if r >= lo && r <= hi {
                s = s.max(self.upper(r));
            }
        }
        if hi.is_infinite() {
            s = s.max(self.g0.limit());
        }
        s
    }

    /// Whether `g_upper` is nonincreasing on `[1, inf)`; the sandwich for the
    /// subsolution profile needs this.
    pub fn check_upper_nonincreasing(&self) -> Result<()> {
        let mut prev: Option<(f64, f64)> = None;
        for r in validation_grid(self.theta0)
            .into_iter()
            .filter(|r| *r >= 1.0)
        {
            let v = self.upper(r);
            if let Some((pr, pv)) = prev {
                if v > pv + 1e-14 * pv {
                    return Err(Error::Hypothesis(format!(
                        "g_upper increases between r = {pr} and r = {r}; the subsolution profile would turn upward"
                    )));
                }
            }
            prev = Some((r, v));
        }
        Ok(())
    }
}
