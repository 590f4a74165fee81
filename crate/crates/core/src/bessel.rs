//! Bessel functions of the first kind for integer order.
//!
//! Small arguments (`x^2 / 4 <= (n + 1) / 2`) use the ascending series, whose
//! terms then shrink geometrically without cancellation. Everything else uses
//! Miller's downward recurrence normalized by `J_0 + 2 sum_k J_2k = 1`.

/// `J_n(x)` for integer `n >= 0` and real `x`.
pub fn bessel_j(n: u32, x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        let v = bessel_j(n, -x);
        return if n.is_multiple_of(2) { v } else { -v };
    }
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    if x * x / 4.0 <= 0.5 * (n as f64 + 1.0) {
        ascending_series(n, x)
    } else {
        downward_recurrence(n, x)
    }
}

fn ascending_series(n: u32, x: f64) -> f64 {
    let half = x / 2.0;
    let q = -half * half;
    let mut term = (n as f64 * half.ln() - crate::ln_factorial(n)).exp();
    let mut sum = term;
    for m in 1..200u32 {
        term *= q / (m as f64 * (m + n) as f64);
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

fn downward_recurrence(n: u32, x: f64) -> f64 {
    let top = (n as f64).max(x);
    // even starting order comfortably above both n and x
    let mut start = (top + 30.0 + (50.0 * top).sqrt()) as u32;
    start += start % 2;

    let mut next = 0.0; // J_{k+1}
    let mut cur = 1e-300; // J_k, arbitrary scale
    let mut wanted = 0.0;
    let mut norm = 0.0;
    for k in (1..=start).rev() {
        let prev = 2.0 * k as f64 / x * cur - next;
        next = cur;
        cur = prev;
        // cur now holds J_{k-1}
        let order = k - 1;
        if order == n {
            wanted = cur;
        }
        if order > 0 && order % 2 == 0 {
            norm += 2.0 * cur;
        }
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            wanted *= 1e-250;
            norm *= 1e-250;
        }
    }
    norm += cur;
    wanted / norm
}

/// First positive root of `J_0`, by bisection on `[2, 3]` polished with Newton
/// steps (`J_0' = -J_1`).
pub fn find_j0_zero() -> f64 {
    let (mut lo, mut hi) = (2.0f64, 3.0f64);
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if bessel_j(0, lo) * bessel_j(0, mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut r = 0.5 * (lo + hi);
    for _ in 0..20 {
        let step = bessel_j(0, r) / bessel_j(1, r);
        r += step;
        if step.abs() < 1e-15 {
            break;
        }
    }
    r
}
