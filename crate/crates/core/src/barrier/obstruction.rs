//! Cross-axis consistency test for generalized symmetric solutions.
//!
//! Along coordinate axis `i` at `r_A = r`, a solution `G(r_A)` with `J = G'/r` must satisfy
//! `sigma_k J^k + r J' J^(k-1) s_{k-1,i} a_i = g [sigma_l J^l + r J' J^(l-1) s_{l-1,i} a_i]`.
//! We solve this along the first axis and measure how badly the other axes fail.

use crate::error::{Error, Result};
use crate::numeric::grid::log_spaced;
use crate::numeric::ode::{integrate_nodes, OdeOptions};
use crate::profiles::GEnvelope;
use crate::symmetric::{ExclusionTable, Spectrum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstructionReport {
    pub check: String,
    /// largest normalized mismatch over axes and radii
    pub max_residual: f64,
    pub worst_axis: usize,
    pub worst_r: f64,
    /// largest mismatch per axis; the fitted axis is zero up to the integrator
    pub per_axis: Vec<f64>,
    pub n_points: usize,
}

/// Options: radial range, node count and the off-equilibrium start factor for `J(1)`.
#[derive(Debug, Clone, Copy)]
pub struct ObstructionOptions {
    pub r_end: f64,
    pub nodes: usize,
    pub start_factor: f64,
}

impl Default for ObstructionOptions {
    fn default() -> Self {
        ObstructionOptions {
            r_end: 10.0,
            nodes: 60,
            start_factor: 1.2,
        }
    }
}

/// Fits `J` along the first axis and reports the mismatch on the others.
///
/// `J(1)` starts off the constant solution `g^(1/(k-l))`, which solves every axis at once
/// when `g` is constant.
pub fn obstruction_check(
    a: &Spectrum,
    env: &GEnvelope,
    k: usize,
    l: usize,
    opts: &ObstructionOptions,
) -> Result<ObstructionReport> {
    let n = a.n();
    if !(1 <= l && l < k && k < n) {
        return Err(Error::NotApplicable(format!(
            "needs 1 <= l < k <= n - 1, got k={k}, l={l}, n={n}"
        )));
    }
    if !a.in_quotient_class(k, l)? {
        return Err(Error::InvalidParams(
            "spectrum must satisfy sigma_k(a) = sigma_l(a)".into(),
        ));
    }
    let av = a.values();
    let table = ExclusionTable::new(av);
    let (sk, sl) = (table.full[k], table.full[l]);
    let (ki, li): (Vec<f64>, Vec<f64>) = (0..n)
        .map(|i| (table.excl(i, k - 1) * av[i], table.excl(i, l - 1) * av[i]))
        .unzip();
    let (kf, lf) = (k as i32, l as i32);
    let slope = |r: f64, j: f64| -> Result<f64> {
        let g = env.upper(r);
        let den = r * (j.powi(kf - 1) * ki[0] - g * j.powi(lf - 1) * li[0]);
        if !(den.abs() > 1e-14) {
            return Err(Error::Singularity { r });
        }
        Ok((g * sl * j.powi(lf) - sk * j.powi(kf)) / den)
    };
    let rs = log_spaced(1.0, opts.r_end, opts.nodes);
    let j1 = opts.start_factor * env.upper(1.0).powf(1.0 / (k - l) as f64);
    let js = integrate_nodes(slope, &rs, j1, &OdeOptions::default())?;
    let mut per_axis = vec![0.0f64; n];
    let (mut worst, mut worst_axis, mut worst_r) = (0.0, 0, rs[0]);
    for (r, j) in rs.iter().zip(&js) {
        let dj = slope(*r, *j)?;
        let g = env.upper(*r);
        let scale = sk * j.powi(kf) + g * sl * j.powi(lf);
        for i in 0..n {
            let lhs = sk * j.powi(kf) + r * dj * j.powi(kf - 1) * ki[i];
            let rhs = g * (sl * j.powi(lf) + r * dj * j.powi(lf - 1) * li[i]);
            let res = (lhs - rhs).abs() / scale;
            per_axis[i] = per_axis[i].max(res);
            if res > worst {
                worst = res;
                worst_axis = i;
                worst_r = *r;
            }
        }
    }
    Ok(ObstructionReport {
        check: "cross_axis_mismatch".into(),
        max_residual: worst,
        worst_axis,
        worst_r,
        per_axis,
        n_points: rs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::G0Spec;

    fn unit() -> GEnvelope {
        GEnvelope::build(G0Spec::Constant { value: 1.0 }, 0.0, 3.0, 1.0).unwrap()
    }

    #[test]
    fn isotropic_has_no_mismatch() {
        let a = Spectrum::normalized(vec![1.0; 3], 2, 1).unwrap();
        let rep = obstruction_check(&a, &unit(), 2, 1, &ObstructionOptions::default()).unwrap();
        assert!(rep.max_residual < 1e-10, "{rep:?}");
        let a = Spectrum::normalized(vec![1.0; 5], 3, 1).unwrap();
        let env = GEnvelope::build(
            G0Spec::RationalDecay {
                limit: 1.0,
                amplitude: 0.05,
                power: 4.0,
            },
            0.1,
            3.0,
            1.0,
        )
        .unwrap();
        assert!(
            obstruction_check(&a, &env, 3, 1, &ObstructionOptions::default())
                .unwrap()
                .max_residual
                < 1e-10
        );
    }

    #[test]
    fn anisotropic_mismatch_shrinks_along_homotopy() {
        let base = [0.5, 1.0, 2.0];
        let mut prev = f64::INFINITY;
        for step in 0..=5 {
            let s = step as f64 / 5.0;
            let v: Vec<f64> = base.iter().map(|b| (1.0 - s) * b + s).collect();
            let a = Spectrum::normalized(v, 2, 1).unwrap();
            let rep = obstruction_check(&a, &unit(), 2, 1, &ObstructionOptions::default()).unwrap();
            if step < 5 {
                assert!(rep.max_residual > 1e-6);
            } else {
                assert!(rep.max_residual < 1e-10);
            }
            assert!(rep.max_residual < prev);
            prev = rep.max_residual;
        }
    }

    #[test]
    fn top_order_is_not_applicable() {
        let a = Spectrum::normalized(vec![0.5, 1.0, 2.0], 3, 1).unwrap();
        assert!(matches!(
            obstruction_check(&a, &unit(), 3, 1, &ObstructionOptions::default()),
            Err(Error::NotApplicable(_))
        ));
    }
}
