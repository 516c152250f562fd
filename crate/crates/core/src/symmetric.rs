//! Elementary symmetric functions of spectra and the quantities built from them:
//! exclusion variants, the directional ratio, its coordinate extrema and the
//! diagonal-plus-rank-one formula.

use crate::error::{Error, Result};
use crate::numeric::binom;
use serde::{Deserialize, Serialize};

/// All `e_0..=e_n` of `v` by the prefix recurrence `e_j <- e_j + v_i e_{j-1}`.
pub fn elem_sym_all(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut e = vec![0.0; n + 1];
    e[0] = 1.0;
    for (i, &x) in v.iter().enumerate() {
        for j in (1..=i + 1).rev() {
            e[j] += x * e[j - 1];
        }
    }
    e
}

/// `sigma_j(v)`; `sigma_0 = 1`.
pub fn elem_sym(v: &[f64], j: usize) -> Result<f64> {
    let n = v.len();
    if j > n {
        return Err(Error::OrderOutOfRange { j, n });
    }
    // truncated recurrence, only orders up to j are needed
    let mut e = vec![0.0; j + 1];
    e[0] = 1.0;
    for (i, &x) in v.iter().enumerate() {
        for q in (1..=(i + 1).min(j)).rev() {
            e[q] += x * e[q - 1];
        }
    }
    Ok(e[j])
}

/// `sigma_j` of `v` with the entries at `excluded` (0-based) set to zero.
pub fn elem_sym_excluding(v: &[f64], j: usize, excluded: &[usize]) -> Result<f64> {
    let n = v.len();
    let mut w = v.to_vec();
    for &i in excluded {
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, n });
        }
        w[i] = 0.0;
    }
    elem_sym(&w, j)
}

/// Table of single-exclusion values: `table[i][j] = sigma_{j;i}(v)` for `j = 0..=n`.
#[derive(Debug, Clone)]
pub struct ExclusionTable {
    pub full: Vec<f64>,
    pub table: Vec<Vec<f64>>,
}

impl ExclusionTable {
    pub fn new(v: &[f64]) -> Self {
        let full = elem_sym_all(v);
        let table = (0..v.len())
            .map(|i| {
                let mut w = v.to_vec();
                w[i] = 0.0;
                elem_sym_all(&w)
            })
            .collect();
        ExclusionTable { full, table }
    }

    /// `sigma_{j;i}`.
    pub fn excl(&self, i: usize, j: usize) -> f64 {
        self.table[i][j]
    }
}

/// `sigma_k` of the eigenvalues of `diag(p) + s q q^T`, without diagonalising.
pub fn rank_one_sigma(p: &[f64], q: &[f64], s: f64, k: usize) -> Result<f64> {
    let n = p.len();
    if q.len() != n {
        return Err(Error::InvalidParams(format!(
            "p has length {n}, q has length {}",
            q.len()
        )));
    }
    if k > n {
        return Err(Error::OrderOutOfRange { j: k, n });
    }
    let base = elem_sym(p, k)?;
    if k == 0 || s == 0.0 {
        return Ok(base);
    }
    let mut acc = 0.0;
    for i in 0..n {
        if q[i] != 0.0 {
            acc += elem_sym_excluding(p, k - 1, &[i])? * q[i] * q[i];
        }
    }
    Ok(base + s * acc)
}

/// All `sigma_0..=sigma_n` of `diag(p) + s q q^T` in one pass.
pub fn rank_one_sigma_all(p: &[f64], q: &[f64], s: f64) -> Vec<f64> {
    let n = p.len();
    let table = ExclusionTable::new(p);
    let mut out = table.full.clone();
    if s != 0.0 {
        for k in 1..=n {
            let mut acc = 0.0;
            for i in 0..n {
                acc += table.excl(i, k - 1) * q[i] * q[i];
            }
            out[k] += s * acc;
        }
    }
    out
}

/// `sigma_j` of the radial spectrum `(u'', u'/r, ..., u'/r)` in dimension `n`.
pub fn radial_hessian_sigma(u1: f64, u2: f64, r: f64, j: usize, n: usize) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("radius must be positive, got {r}")));
    }
    if j > n {
        return Err(Error::OrderOutOfRange { j, n });
    }
    if j == 0 {
        return Ok(1.0);
    }
    let w = u1 / r;
    Ok(binom(n - 1, j - 1) * u2 * w.powi(j as i32 - 1) + binom(n - 1, j) * w.powi(j as i32))
}

/// Coordinate extrema of the directional ratio for one order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TBounds {
    pub t_upper: f64,
    pub t_lower: f64,
    pub order: usize,
}

/// Positive eigenvalues of a diagonal matrix, sorted ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    a: Vec<f64>,
}

impl Spectrum {
    pub fn new(mut a: Vec<f64>) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::InvalidParams("empty spectrum".into()));
        }
        if let Some(bad) = a.iter().find(|x| !(**x > 0.0) || !x.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "spectrum entries must be positive, got {bad}"
            )));
        }
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        Ok(Spectrum { a })
    }

    /// `c * (1, ..., 1)`.
    pub fn isotropic(n: usize, c: f64) -> Result<Self> {
        Spectrum::new(vec![c; n])
    }

    /// Rescales `v` so that `sigma_k = sigma_l`.
    pub fn normalized(v: Vec<f64>, k: usize, l: usize) -> Result<Self> {
        let s = Spectrum::new(v)?;
        if !(l < k && k <= s.n()) {
            return Err(Error::InvalidParams(format!(
                "need l < k <= n, got k={k}, l={l}"
            )));
        }
        let lam = (s.sigma(l)? / s.sigma(k)?).powf(1.0 / (k - l) as f64);
        Spectrum::new(s.a.iter().map(|x| x * lam).collect())
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.a
    }

    pub fn sigma(&self, j: usize) -> Result<f64> {
        elem_sym(&self.a, j)
    }

    /// Whether `sigma_k / sigma_l = 1` within `1e-12`.
    pub fn in_quotient_class(&self, k: usize, l: usize) -> Result<bool> {
        Ok((self.sigma(k)? / self.sigma(l)? - 1.0).abs() <= 1e-12)
    }

    pub fn is_isotropic(&self) -> bool {
        let (lo, hi) = (self.a[0], self.a[self.n() - 1]);
        hi - lo <= 1e-14 * hi
    }

    /// Directional ratio for order `j` along `x` (any nonzero multiple gives the same value).
    pub fn lambda_ratio(&self, x: &[f64], j: usize) -> Result<f64> {
        let n = self.n();
        if x.len() != n {
            return Err(Error::InvalidParams(format!(
                "direction has length {}, expected {n}",
                x.len()
            )));
        }
        if j > n {
            return Err(Error::OrderOutOfRange { j, n });
        }
        if x.iter().all(|v| *v == 0.0) {
            return Err(Error::DegenerateDirection);
        }
        if j == 0 {
            return Ok(0.0);
        }
        let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..n {
            let xi = x[i] / scale;
            num += elem_sym_excluding(&self.a, j - 1, &[i])? * self.a[i] * self.a[i] * xi * xi;
            den += self.a[i] * xi * xi;
        }
        Ok(num / (self.sigma(j)? * den))
    }

    /// Extrema of the directional ratio, attained on coordinate axes. Order 0 gives `(0, 0)`.
    pub fn t_bounds(&self, j: usize) -> Result<TBounds> {
        let n = self.n();
        if j > n {
            return Err(Error::OrderOutOfRange { j, n });
        }
        if j == 0 {
            return Ok(TBounds {
                t_upper: 0.0,
                t_lower: 0.0,
                order: 0,
            });
        }
        let sj = self.sigma(j)?;
        let mut hi = f64::NEG_INFINITY;
        let mut lo = f64::INFINITY;
        for i in 0..n {
            let v = self.a[i] * elem_sym_excluding(&self.a, j - 1, &[i])? / sj;
            hi = hi.max(v);
            lo = lo.min(v);
        }
        if j == n {
            // every coordinate gives exactly one; remove rounding noise
            hi = 1.0;
            lo = 1.0;
        }
        Ok(TBounds {
            t_upper: hi,
            t_lower: lo,
            order: j,
        })
    }

    /// `sigma_j` of the Hessian of `f(r_A(x))` at `x`, where `r_A = sqrt(x^T A x)` and
    /// `f'(r) = r v`, `v' = dv`: the matrix `v A + (dv / r) (A x)(A x)^T`.
    pub fn profile_hessian_sigmas(&self, x: &[f64], v: f64, dv: f64, r: f64) -> Vec<f64> {
        let p: Vec<f64> = self.a.iter().map(|ai| v * ai).collect();
        let q: Vec<f64> = self.a.iter().zip(x).map(|(ai, xi)| ai * xi).collect();
        rank_one_sigma_all(&p, &q, dv / r)
    }

    /// `sqrt(x^T A x)`.
    pub fn r_a(&self, x: &[f64]) -> f64 {
        self.a
            .iter()
            .zip(x)
            .map(|(ai, xi)| ai * xi * xi)
            .sum::<f64>()
            .sqrt()
    }
}
