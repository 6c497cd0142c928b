//! Adaptive Dormand-Prince 5(4) integration with terminal event location.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rtol: 1e-12, atol: 1e-13, h_max: f64::INFINITY, max_steps: 200_000 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OdeResult<const N: usize> {
    pub t: f64,
    pub y: [f64; N],
    /// Index of the terminal event that stopped integration, if any.
    pub event: Option<usize>,
    pub steps: usize,
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One step of size `h`; returns the fifth-order solution and the error estimate.
fn step<const N: usize>(f: &impl Fn(f64, &[f64; N]) -> [f64; N], t: f64, y: &[f64; N], h: f64) -> ([f64; N], [f64; N]) {
    let mut k = [[0.0; N]; 7];
    for s in 0..7 {
        let mut ys = *y;
        for (p, kp) in k.iter().enumerate().take(s) {
            for i in 0..N {
                ys[i] += h * A[s][p] * kp[i];
            }
        }
        k[s] = f(t + C[s] * h, &ys);
    }
    let mut y5 = *y;
    let mut err = [0.0; N];
    for i in 0..N {
        for s in 0..7 {
            y5[i] += h * B5[s] * k[s][i];
            err[i] += h * (B5[s] - B4[s]) * k[s][i];
        }
    }
    (y5, err)
}

/// Integrates from `t0` towards `t1` (either direction). Integration stops early
/// at the first sign change of any event function, located to near machine precision.
pub fn integrate<const N: usize>(
    f: impl Fn(f64, &[f64; N]) -> [f64; N],
    t0: f64,
    y0: [f64; N],
    t1: f64,
    opts: &OdeOptions,
    events: &[&dyn Fn(f64, &[f64; N]) -> f64],
) -> Result<OdeResult<N>> {
    let dir = (t1 - t0).signum();
    let span = (t1 - t0).abs();
    if span == 0.0 {
        return Ok(OdeResult { t: t0, y: y0, event: None, steps: 0 });
    }
    let mut t = t0;
    let mut y = y0;
    let mut h = (span / 100.0).min(opts.h_max).min(1e-2 * (1.0 + t0.abs()));
    let mut g_prev: Vec<f64> = events.iter().map(|g| g(t, &y)).collect();
    let mut steps = 0;
    while (t1 - t) * dir > 0.0 {
        if steps >= opts.max_steps {
            return Err(Error::Integration(format!("step limit reached at t = {t}")));
        }
        let h_try = h.min((t1 - t).abs());
        let (y_new, err) = step(&f, t, &y, dir * h_try);
        let mut e = 0.0f64;
        for i in 0..N {
            let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            e = e.max((err[i] / sc).abs());
        }
        if !e.is_finite() {
            h = h_try / 10.0;
            if h < 1e-300 {
                return Err(Error::Integration(format!("non-finite state at t = {t}")));
            }
            continue;
        }
        if e <= 1.0 {
            let t_new = if h_try == (t1 - t).abs() { t1 } else { t + dir * h_try };
            steps += 1;
            // Terminal events.
            let g_new: Vec<f64> = events.iter().map(|g| g(t_new, &y_new)).collect();
            let crossed = (0..events.len()).find(|&k| g_prev[k] != 0.0 && g_prev[k].signum() != g_new[k].signum());
            if let Some(k) = crossed {
                let (te, ye) = locate(&f, events[k], t, &y, dir * h_try, g_prev[k]);
                return Ok(OdeResult { t: te, y: ye, event: Some(k), steps });
            }
            t = t_new;
            y = y_new;
            g_prev = g_new;
            if t == t1 {
                break;
            }
        }
        let fac = if e == 0.0 { 5.0 } else { (0.9 * e.powf(-0.2)).clamp(0.2, 5.0) };
        h = (h_try * fac).min(opts.h_max);
        if e > 1.0 && h < 1e-14 * (1.0 + t.abs()) {
            return Err(Error::Integration(format!("step size underflow at t = {t}")));
        }
    }
    Ok(OdeResult { t, y, event: None, steps })
}

/// Bisection on the length of a single step from `(t, y)`.
fn locate<const N: usize>(
    f: &impl Fn(f64, &[f64; N]) -> [f64; N],
    g: &dyn Fn(f64, &[f64; N]) -> f64,
    t: f64,
    y: &[f64; N],
    h: f64,
    g0: f64,
) -> (f64, [f64; N]) {
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let (ym, _) = step(f, t, y, h * mid);
        if g(t + h * mid, &ym).signum() == g0.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-16 {
            break;
        }
    }
    let (ye, _) = step(f, t, y, h * hi);
    (t + h * hi, ye)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_is_accurate() {
        let f = |_t: f64, y: &[f64; 2]| [y[1], -y[0]];
        let r = integrate(f, 0.0, [1.0, 0.0], 10.0, &OdeOptions::default(), &[]).unwrap();
        assert!((r.y[0] - 10f64.cos()).abs() < 1e-10);
        assert!((r.y[1] + 10f64.sin()).abs() < 1e-10);
    }

    #[test]
    fn backward_integration() {
        let f = |_t: f64, y: &[f64; 1]| [y[0]];
        let r = integrate(f, 1.0, [1f64.exp()], 0.0, &OdeOptions::default(), &[]).unwrap();
        assert!((r.y[0] - 1.0).abs() < 1e-11);
    }

    #[test]
    fn event_is_located() {
        // x(t) = cos t first crosses zero at pi/2.
        let f = |_t: f64, y: &[f64; 2]| [y[1], -y[0]];
        let g = |_t: f64, y: &[f64; 2]| y[0];
        let r = integrate(f, 0.0, [1.0, 0.0], 10.0, &OdeOptions::default(), &[&g]).unwrap();
        assert_eq!(r.event, Some(0));
        assert!((r.t - std::f64::consts::FRAC_PI_2).abs() < 1e-11);
    }
}
