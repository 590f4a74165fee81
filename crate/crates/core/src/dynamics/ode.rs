//! Adaptive Dormand-Prince 5(4) integration of `dy/dt = f(t, y)` on complex
//! vectors, with steps clamped to land exactly on the requested output
//! times.

use crate::error::{Error, Result};
use crate::C64;

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
/// Fifth-order weights minus the embedded fourth-order ones.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    /// Absolute and relative local error target per step (max norm).
    pub tol: f64,
    /// Upper bound on the step size.
    pub h_max: f64,
    /// Abort after this many attempted steps.
    pub max_steps: usize,
}

impl OdeOptions {
    pub fn new(tol: f64) -> Self {
        Self {
            tol,
            h_max: f64::INFINITY,
            max_steps: 50_000_000,
        }
    }

    pub fn with_h_max(mut self, h_max: f64) -> Self {
        self.h_max = h_max;
        self
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
}

fn max_abs(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Integrates from `times[0]`, where the solution equals `y0`, through every
/// entry of `times` (nondecreasing), calling `output(k, y)` at each.
pub fn integrate<F, O>(
    mut rhs: F,
    y0: Vec<C64>,
    times: &[f64],
    opts: OdeOptions,
    mut output: O,
) -> Result<OdeStats>
where
    F: FnMut(f64, &[C64], &mut [C64]),
    O: FnMut(usize, &[C64]),
{
    if !(opts.tol > 0.0) || !(opts.h_max > 0.0) {
        return Err(Error::InvalidParameter(
            "integrator needs tol > 0 and h_max > 0".into(),
        ));
    }
    if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter(
            "output times must be finite and nondecreasing".into(),
        ));
    }
    let mut stats = OdeStats::default();
    let Some(&t_start) = times.first() else {
        return Ok(stats);
    };
    let n = y0.len();
    let zero = C64::new(0.0, 0.0);
    let mut y = y0;
    let mut k: Vec<Vec<C64>> = vec![vec![zero; n]; 7];
    let mut stage = vec![zero; n];
    let mut y_new = vec![zero; n];
    let mut t = t_start;
    rhs(t, &y, &mut k[0]);

    let span = times[times.len() - 1] - t_start;
    let mut h = {
        let (d0, d1) = (max_abs(&y), max_abs(&k[0]));
        let guess = if d0 > 1e-5 && d1 > 1e-5 {
            0.01 * d0 / d1
        } else {
            1e-6
        };
        guess
            .min(opts.h_max)
            .min(if span > 0.0 { span } else { f64::INFINITY })
    };

    for (idx, &target) in times.iter().enumerate() {
        while t < target {
            if stats.accepted + stats.rejected >= opts.max_steps {
                return Err(Error::StepUnderflow {
                    t,
                    h,
                    accepted: stats.accepted,
                });
            }
            let remaining = target - t;
            let clamp = h >= remaining;
            let step = if clamp { remaining } else { h };
            if step < 1e-14 * t.abs().max(1.0) && !clamp {
                return Err(Error::StepUnderflow {
                    t,
                    h: step,
                    accepted: stats.accepted,
                });
            }
            for s in 1..7 {
                for i in 0..n {
                    let mut acc = y[i];
                    for (j, kj) in k.iter().enumerate().take(s) {
                        let a = A[s][j];
                        if a != 0.0 {
                            acc += kj[i] * (step * a);
                        }
                    }
                    stage[i] = acc;
                }
                rhs(t + C[s] * step, &stage, &mut k[s]);
                if s == 6 {
                    y_new.copy_from_slice(&stage);
                }
            }
            // y_new is the fifth-order solution (row 6 of A holds its weights);
            // k[6] is f(t + h, y_new).
            let mut err = 0.0f64;
            for i in 0..n {
                let mut e = zero;
                for (j, kj) in k.iter().enumerate() {
                    if E[j] != 0.0 {
                        e += kj[i] * E[j];
                    }
                }
                let scale = opts.tol * (1.0 + y[i].norm().max(y_new[i].norm()));
                err = err.max(e.norm() * step / scale);
            }
            if !err.is_finite() {
                err = 1e10;
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            if err <= 1.0 {
                stats.accepted += 1;
                t = if clamp { target } else { t + step };
                std::mem::swap(&mut y, &mut y_new);
                k.swap(0, 6);
                // a step shortened to hit an output time says nothing about h
                if !clamp || factor < 1.0 {
                    h = (step * factor).min(opts.h_max);
                }
            } else {
                stats.rejected += 1;
                h = step * factor.min(1.0);
            }
        }
        output(idx, &y);
    }
    Ok(stats)
}
