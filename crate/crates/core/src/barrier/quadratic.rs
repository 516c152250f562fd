//! Quadratic barriers touching the boundary data from below at one boundary point,
//! and their upper envelope.

use super::sampling::{CheckReport, Sampler};
use crate::error::{Error, Result};
use crate::symmetric::Spectrum;
use serde::{Deserialize, Serialize};

/// Boundary data `phi` on the boundary of `Omega`, extended to all of space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundaryData {
    Constant {
        value: f64,
    },
    /// `offset + sum_i curvature_i x_i^2 / 2`
    Quadratic {
        offset: f64,
        curvature: Vec<f64>,
    },
}

impl BoundaryData {
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            BoundaryData::Constant { value } => *value,
            BoundaryData::Quadratic { offset, curvature } => {
                offset + 0.5 * curvature.iter().zip(x).map(|(c, v)| c * v * v).sum::<f64>()
            }
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            BoundaryData::Constant { .. } => vec![0.0; x.len()],
            BoundaryData::Quadratic { curvature, .. } => {
                curvature.iter().zip(x).map(|(c, v)| c * v).collect()
            }
        }
    }

    pub fn check_dim(&self, n: usize) -> Result<()> {
        match self {
            BoundaryData::Quadratic { curvature, .. } if curvature.len() != n => {
                Err(Error::InvalidParams(format!(
                    "boundary data has {} curvature entries, dimension is {n}",
                    curvature.len()
                )))
            }
            _ => Ok(()),
        }
    }
}

/// `rho(x) = phi(xi) + curv/2 [(x - c)^T A (x - c) - (xi - c)^T A (xi - c)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticBarrier {
    pub xi: Vec<f64>,
    pub center: Vec<f64>,
    pub phi_xi: f64,
    pub curvature: f64,
    a: Vec<f64>,
    reach: f64,
}

fn a_norm2(a: &[f64], v: &[f64]) -> f64 {
    a.iter().zip(v).map(|(ai, vi)| ai * vi * vi).sum()
}

impl QuadraticBarrier {
    fn new(
        a: &Spectrum,
        phi: &BoundaryData,
        xi: &[f64],
        curvature: f64,
        r_omega: f64,
        spread: f64,
    ) -> Self {
        let av = a.values();
        let grad = phi.gradient(xi);
        let center: Vec<f64> = (0..xi.len())
            .map(|i| -(spread / r_omega) * xi[i] - grad[i] / (av[i] * curvature))
            .collect();
        let d: Vec<f64> = xi.iter().zip(&center).map(|(x, c)| x - c).collect();
        QuadraticBarrier {
            xi: xi.to_vec(),
            phi_xi: phi.value(xi),
            curvature,
            reach: a_norm2(av, &d),
            a: av.to_vec(),
            center,
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let d: Vec<f64> = x.iter().zip(&self.center).map(|(x, c)| x - c).collect();
        self.phi_xi + 0.5 * self.curvature * (a_norm2(&self.a, &d) - self.reach)
    }
}

/// A family of barriers over sampled boundary points of `Omega = {r_A < r_omega}`.
///
/// Centers sit on the far side, `c(xi) = -(t / r_omega) xi - A^-1 grad phi(xi) / curv`, with
/// one spread `t` for all `xi`, doubled until every barrier lies strictly below `phi` on
/// the sampled boundary away from its own touching point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BarrierSet {
    pub spectrum: Spectrum,
    pub phi: BoundaryData,
    pub r_omega: f64,
    pub curvature: f64,
    pub spread: f64,
    pub barriers: Vec<QuadraticBarrier>,
    /// largest `|c(xi)|` over the sample
    pub center_bound: f64,
    pub boundary_report: CheckReport,
}

impl BarrierSet {
    pub fn build(
        a: &Spectrum,
        phi: &BoundaryData,
        r_omega: f64,
        curvature: f64,
        count: usize,
        seed: u64,
    ) -> Result<Self> {
        phi.check_dim(a.n())?;
        if !(curvature > 0.0) {
            return Err(Error::InvalidParams(format!(
                "barrier curvature must be positive, got {curvature}"
            )));
        }
        let boundary = Sampler::new(seed).shell(a, r_omega, count.max(2));
        let mut spread = 0.05;
        let mut last = None;
        for _ in 0..40 {
            let barriers: Vec<QuadraticBarrier> = boundary
                .iter()
                .map(|xi| QuadraticBarrier::new(a, phi, xi, curvature, r_omega, spread))
                .collect();
            let report = boundary_check(a, phi, &barriers, &boundary);
            if report.pass {
                let center_bound = barriers
                    .iter()
                    .map(|b| b.center.iter().map(|v| v * v).sum::<f64>().sqrt())
                    .fold(0.0, f64::max);
                return Ok(BarrierSet {
                    spectrum: a.clone(),
                    phi: phi.clone(),
                    r_omega,
                    curvature,
                    spread,
                    barriers,
                    center_bound,
                    boundary_report: report,
                });
            }
            last = Some(report);
            spread *= 2.0;
        }
        let r = last.unwrap();
        Err(Error::BarrierConstruction {
            worst: r.worst_margin,
            location: r.location,
        })
    }

    /// Barrier touching at a boundary point `xi`.
    pub fn barrier_at(&self, xi: &[f64]) -> Result<QuadraticBarrier> {
        let r = self.spectrum.r_a(xi);
        if (r - self.r_omega).abs() > 1e-9 * self.r_omega {
            return Err(Error::Domain(format!(
                "point with r_A = {r} is not on the boundary r_A = {}",
                self.r_omega
            )));
        }
        Ok(QuadraticBarrier::new(
            &self.spectrum,
            &self.phi,
            xi,
            self.curvature,
            self.r_omega,
            self.spread,
        ))
    }

    /// Sampled upper envelope of the barriers, including the one touching at the radial
    /// projection of `x` onto the boundary.
    pub fn envelope(&self, x: &[f64]) -> f64 {
        let mut best = self
            .barriers
            .iter()
            .map(|b| b.value(x))
            .fold(f64::NEG_INFINITY, f64::max);
        let r = self.spectrum.r_a(x);
        if r > 0.0 {
            let proj: Vec<f64> = x.iter().map(|v| v * self.r_omega / r).collect();
            let b = QuadraticBarrier::new(
                &self.spectrum,
                &self.phi,
                &proj,
                self.curvature,
                self.r_omega,
                self.spread,
            );
            best = best.max(b.value(x));
        }
        best
    }
}

/// `(phi - rho_xi) / (|x - xi|_A^2 / 2)` over sampled boundary pairs; must stay positive.
fn boundary_check(
    a: &Spectrum,
    phi: &BoundaryData,
    barriers: &[QuadraticBarrier],
    boundary: &[Vec<f64>],
) -> CheckReport {
    let mut margins = Vec::with_capacity(barriers.len());
    for b in barriers {
        let mut worst = f64::INFINITY;
        let mut at = b.xi.clone();
        for x in boundary {
            let d: Vec<f64> = x.iter().zip(&b.xi).map(|(p, q)| p - q).collect();
            let dist = a_norm2(a.values(), &d);
            if dist < 1e-20 {
                // touching point: equality up to rounding
                let gap = (phi.value(x) - b.value(x)).abs();
                if gap > 1e-9 {
                    worst = worst.min(-gap);
                    at = x.clone();
                }
                continue;
            }
            let m = (phi.value(x) - b.value(x)) / (0.5 * dist) - 1e-9;
            if m < worst {
                worst = m;
                at = x.clone();
            }
        }
        margins.push((worst, at));
    }
    CheckReport::from_margins("barrier_below_boundary_data", &margins, 0.0)
}
