//! Dormand–Prince 5(4) integrator for scalar initial value problems.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-10,
            atol: 1e-12,
            max_steps: 200_000,
        }
    }
}

/// Advances `y' = f(t, y)` from `(t0, y0)` to `t1`. `h` carries the step size
/// between successive calls so that stepping node-to-node stays cheap.
pub fn advance<F>(
    f: &mut F,
    t0: f64,
    y0: f64,
    t1: f64,
    h: &mut f64,
    opts: &OdeOptions,
) -> Result<f64>
where
    F: FnMut(f64, f64) -> Result<f64>,
{
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(y0);
    }
    let dir = span.signum();
    let mut t = t0;
    let mut y = y0;
    if !(*h > 0.0) || !h.is_finite() {
        *h = (span.abs() * 1e-3).max(1e-8);
    }
    let mut k1 = f(t, y)?;
    let mut steps = 0usize;
    while (t1 - t) * dir > 0.0 {
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::numeric(
                "ode",
                format!("step limit reached at t = {t}"),
            ));
        }
        let mut step = h.min((t1 - t).abs());
        let last = step >= (t1 - t).abs();
        let hs = dir * step;
        let k2 = f(t + hs / 5.0, y + hs * (k1 / 5.0))?;
        let k3 = f(t + hs * 0.3, y + hs * (3.0 / 40.0 * k1 + 9.0 / 40.0 * k2))?;
        let k4 = f(
            t + hs * 0.8,
            y + hs * (44.0 / 45.0 * k1 - 56.0 / 15.0 * k2 + 32.0 / 9.0 * k3),
        )?;
        let k5 = f(
            t + hs * 8.0 / 9.0,
            y + hs
                * (19372.0 / 6561.0 * k1 - 25360.0 / 2187.0 * k2 + 64448.0 / 6561.0 * k3
                    - 212.0 / 729.0 * k4),
        )?;
        let k6 = f(
            t + hs,
            y + hs
                * (9017.0 / 3168.0 * k1 - 355.0 / 33.0 * k2
                    + 46732.0 / 5247.0 * k3
                    + 49.0 / 176.0 * k4
                    - 5103.0 / 18656.0 * k5),
        )?;
        let y5 = y + hs
            * (35.0 / 384.0 * k1 + 500.0 / 1113.0 * k3 + 125.0 / 192.0 * k4 - 2187.0 / 6784.0 * k5
                + 11.0 / 84.0 * k6);
        let t_new = if last { t1 } else { t + hs };
        let k7 = f(t_new, y5)?;
        let err = hs
            * (71.0 / 57600.0 * k1 - 71.0 / 16695.0 * k3 + 71.0 / 1920.0 * k4
                - 17253.0 / 339200.0 * k5
                + 22.0 / 525.0 * k6
                - 1.0 / 40.0 * k7);
        let scale = opts.atol + opts.rtol * y.abs().max(y5.abs());
        let ratio = (err / scale).abs();
        if !ratio.is_finite() {
            *h = step * 0.25;
            if *h < 1e-14 * t.abs().max(1.0) {
                return Err(Error::numeric("ode", format!("non-finite step at t = {t}")));
            }
            continue;
        }
        if ratio <= 1.0 {
            t = t_new;
            y = y5;
            k1 = k7;
            let grow = if ratio == 0.0 {
                5.0
            } else {
                (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0)
            };
            if !last || grow < 1.0 {
                step *= grow;
                *h = step;
            }
        } else {
            *h = step * (0.9 * ratio.powf(-0.25)).clamp(0.1, 0.9);
            if *h < 1e-14 * t.abs().max(1.0) {
                return Err(Error::numeric("ode", format!("step underflow at t = {t}")));
            }
        }
    }
    Ok(y)
}

/// Integrates through the increasing or decreasing node sequence `ts`, returning the
/// solution at each node (the first entry is `y0`).
pub fn integrate_nodes<F>(mut f: F, ts: &[f64], y0: f64, opts: &OdeOptions) -> Result<Vec<f64>>
where
    F: FnMut(f64, f64) -> Result<f64>,
{
    let mut out = Vec::with_capacity(ts.len());
    if ts.is_empty() {
        return Ok(out);
    }
    out.push(y0);
    let mut h = f64::NAN;
    let mut y = y0;
    for w in ts.windows(2) {
        y = advance(&mut f, w[0], y, w[1], &mut h, opts)?;
        out.push(y);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_growth() {
        let ts: Vec<f64> = (0..=10).map(|i| i as f64 * 0.5).collect();
        let ys = integrate_nodes(|_, y| Ok(y), &ts, 1.0, &OdeOptions::default()).unwrap();
        for (t, y) in ts.iter().zip(&ys) {
            assert!((y / t.exp() - 1.0).abs() < 1e-9, "t={t}");
        }
    }

    #[test]
    fn backward_in_time() {
        let ts = [1.0, 0.5, 0.0];
        let ys = integrate_nodes(|t, _| Ok(2.0 * t), &ts, 1.0, &OdeOptions::default()).unwrap();
        assert!((ys[2] - 0.0).abs() < 1e-12);
    }

    #[test]
    fn decaying_solution_keeps_relative_accuracy() {
        let opts = OdeOptions {
            rtol: 1e-10,
            atol: 1e-300,
            max_steps: 100_000,
        };
        let ts = [0.0, 20.0];
        let ys = integrate_nodes(|_, y| Ok(-y), &ts, 1.0, &opts).unwrap();
        assert!((ys[1] / (-20f64).exp() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn rhs_errors_propagate() {
        let r = integrate_nodes(
            |t, _| {
                if t > 0.5 {
                    Err(Error::Singularity { r: t })
                } else {
                    Ok(1.0)
                }
            },
            &[0.0, 1.0],
            0.0,
            &OdeOptions::default(),
        );
        assert!(matches!(r, Err(Error::Singularity { .. })));
    }
}
