//! Special functions needed by the lattice resolvent.

use core::f64::consts::PI;

use libm::{exp, log, sqrt};

/// Exponentially scaled modified Bessel function e^{-x} I_0(x) for x >= 0.
pub fn i0e(x: f64) -> f64 {
    let x = x.abs();
    if x < 20.0 {
        let q = 0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        loop {
            term *= q / (k * k);
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
            k += 1.0;
        }
        sum * exp(-x)
    } else {
        i0e_asymptotic(x)
    }
}

fn i0e_asymptotic(x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while k < 2.0 * x {
        let next = term * (2.0 * k - 1.0) * (2.0 * k - 1.0) / (8.0 * k * x);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
        k += 1.0;
    }
    sum / sqrt(2.0 * PI * x)
}

/// Coefficients c_k of e^{-x} I_0(x) ~ (2 pi x)^{-1/2} sum_k c_k x^{-k}.
pub(crate) fn i0e_asymptotic_coefficients<const N: usize>() -> [f64; N] {
    let mut c = [0.0; N];
    if N > 0 {
        c[0] = 1.0;
    }
    for k in 1..N {
        let kf = k as f64;
        c[k] = c[k - 1] * (2.0 * kf - 1.0) * (2.0 * kf - 1.0) / (8.0 * kf);
    }
    c
}

/// Exponential integral E_1(x) for x > 0.
pub fn e1(x: f64) -> f64 {
    if x <= 0.0 {
        return f64::INFINITY;
    }
    if x <= 1.0 {
        const EULER: f64 = 0.577_215_664_901_532_9;
        let mut sum = 0.0;
        let mut term = 1.0;
        let mut k = 1.0;
        loop {
            term *= -x / k;
            let add = -term / k;
            sum += add;
            if add.abs() < 1e-17 * sum.abs().max(1e-300) {
                break;
            }
            k += 1.0;
        }
        -EULER - log(x) + sum
    } else {
        // modified Lentz evaluation of the continued fraction
        let tiny = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        let mut i = 1.0;
        loop {
            let an = -i * i;
            b += 2.0;
            d = 1.0 / (an * d + b);
            c = b + an / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
            i += 1.0;
            if i > 1000.0 {
                break;
            }
        }
        h * exp(-x)
    }
}
