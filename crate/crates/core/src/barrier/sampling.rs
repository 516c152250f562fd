//! Seeded point samples in A-ellipsoidal shells and the JSON check reports built on them.

use crate::symmetric::Spectrum;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Shell `lo <= r_A(x) <= hi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Zone {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
}

impl Zone {
    pub fn new(name: &str, lo: f64, hi: f64) -> Self {
        Zone {
            name: name.to_string(),
            lo,
            hi,
        }
    }
}

/// Outcome of one sampled inequality. Margins are oriented so that nonnegative means
/// satisfied; `pass` iff `worst_margin >= -tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check: String,
    pub n_points: usize,
    pub worst_margin: f64,
    pub location: Vec<f64>,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckReport {
    /// Reduces margins in input order; ties keep the first point.
    pub fn from_margins(
        check: impl Into<String>,
        margins: &[(f64, Vec<f64>)],
        tolerance: f64,
    ) -> Self {
        let mut worst = f64::INFINITY;
        let mut location = Vec::new();
        for (m, x) in margins {
            // NaN margins count as failures
            let m = if m.is_nan() { f64::NEG_INFINITY } else { *m };
            if m < worst {
                worst = m;
                location = x.clone();
            }
        }
        CheckReport {
            check: check.into(),
            n_points: margins.len(),
            worst_margin: worst,
            location,
            tolerance,
            pass: worst >= -tolerance,
        }
    }
}

/// Deterministic sampler: Gaussian directions rescaled to a target `r_A`.
pub struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Sampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Point with `r_A(x) = r` in a random direction.
    pub fn on_shell(&mut self, a: &Spectrum, r: f64) -> Vec<f64> {
        let n = a.n();
        loop {
            let d: Vec<f64> = (0..n)
                .map(|_| self.rng.sample::<f64, _>(StandardNormal))
                .collect();
            let s = a.r_a(&d);
            if s > 1e-12 {
                return d.iter().map(|v| v * r / s).collect();
            }
        }
    }

    /// `count` points spread round-robin over the zones, radii log-uniform in each.
    pub fn in_zones(
        &mut self,
        a: &Spectrum,
        zones: &[Zone],
        count: usize,
    ) -> Vec<(usize, Vec<f64>)> {
        (0..count)
            .map(|i| {
                let z = i % zones.len();
                let (lo, hi) = (zones[z].lo.ln(), zones[z].hi.ln());
                let u: f64 = self.rng.random();
                let r = (lo + u * (hi - lo)).exp();
                (z, self.on_shell(a, r))
            })
            .collect()
    }

    pub fn shell(&mut self, a: &Spectrum, r: f64, count: usize) -> Vec<Vec<f64>> {
        (0..count).map(|_| self.on_shell(a, r)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samples_are_reproducible_and_on_shell() {
        let a = Spectrum::new(vec![0.5, 1.0, 2.0]).unwrap();
        let zones = [Zone::new("a", 1.0, 2.0), Zone::new("b", 10.0, 100.0)];
        let p = Sampler::new(7).in_zones(&a, &zones, 50);
        let q = Sampler::new(7).in_zones(&a, &zones, 50);
        assert_eq!(p, q);
        for (z, x) in &p {
            let r = a.r_a(x);
            assert!(r >= zones[*z].lo * (1.0 - 1e-12) && r <= zones[*z].hi * (1.0 + 1e-12));
        }
        let s = Sampler::new(1).shell(&a, 3.0, 10);
        assert!(s.iter().all(|x| (a.r_a(x) - 3.0).abs() < 1e-12));
    }

    #[test]
    fn report_keeps_worst() {
        let m = vec![(0.5, vec![1.0]), (-2e-9, vec![2.0]), (0.1, vec![3.0])];
        let r = CheckReport::from_margins("c", &m, 1e-8);
        assert_eq!(
            (r.worst_margin, r.location.clone(), r.pass),
            (-2e-9, vec![2.0], true)
        );
        let r = CheckReport::from_margins("c", &m, 1e-9);
        assert!(!r.pass);
        let r = CheckReport::from_margins("c", &[(f64::NAN, vec![0.0])], 1.0);
        assert!(!r.pass);
    }
}
