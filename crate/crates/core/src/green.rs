//! The separable lattice resolvent
//!
//! `G(r, s) = (2 pi)^{-3} \int_{T^3} dq / (s + sum_j r_j (1 - cos q_j))`
//!
//! evaluated through its Laplace form `\int_0^\infty e^{-ts} prod_j e^{-t r_j} I_0(t r_j) dt`.
//! The integral is split into a short Gauss-Legendre segment near 0, Gauss-Legendre
//! panels in `log t`, and an analytic tail from the asymptotic series of `I_0`.

use core::f64::consts::PI;

use libm::{erfc, exp, log, pow, sqrt};

use crate::quadrature::{GL8_NODES as GX, GL8_WEIGHTS as GW};
use crate::special::{e1, i0e, i0e_asymptotic_coefficients};

const TAIL_TERMS: usize = 10;

/// Resolution of the Laplace-transform rule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LaplaceRule {
    /// Panel width in `log t`.
    pub panel_width: f64,
    /// Start of the asymptotic tail, in units of `1 / min r_j`.
    pub tail_start: f64,
}

impl Default for LaplaceRule {
    fn default() -> Self {
        LaplaceRule { panel_width: 0.5, tail_start: 30.0 }
    }
}

/// `G(r, s)` with the default rule. Requires `r_j >= 0`, `s >= 0`; returns +inf when the
/// integral diverges.
pub fn resolvent(r: [f64; 3], s: f64) -> f64 {
    resolvent_with(r, s, &LaplaceRule::default())
}

pub fn resolvent_with(r: [f64; 3], s: f64, rule: &LaplaceRule) -> f64 {
    debug_assert!(s >= 0.0);
    let mut rs = [0.0; 3];
    let mut d = 0;
    for &x in &r {
        if x > 0.0 {
            rs[d] = x;
            d += 1;
        }
    }
    let rs = &rs[..d];
    if d == 0 {
        return if s > 0.0 { 1.0 / s } else { f64::INFINITY };
    }
    let rmax = rs.iter().cloned().fold(0.0, f64::max);
    let rmin = rs.iter().cloned().fold(f64::INFINITY, f64::min);

    let integrand = |t: f64| -> f64 {
        let mut v = exp(-t * s);
        for &x in rs {
            v *= i0e(t * x);
        }
        v
    };

    let t0 = rule.tail_start / rmin;
    let t_decay = if s > 0.0 { 45.0 / s } else { f64::INFINITY };
    let t_hi = t0.min(t_decay);
    let t_a = (1e-3 / rmax.max(s)).min(0.5 * t_hi);

    let mut total = 0.0;
    let half = 0.5 * t_a;
    for i in 0..8 {
        total += GW[i] * half * integrand(half * (GX[i] + 1.0));
    }
    let (ua, ub) = (log(t_a), log(t_hi));
    let panels = libm::ceil((ub - ua) / rule.panel_width).max(1.0) as usize;
    let h = (ub - ua) / panels as f64;
    for k in 0..panels {
        let lo = ua + h * k as f64;
        let mut acc = 0.0;
        for i in 0..8 {
            let u = lo + 0.5 * h * (GX[i] + 1.0);
            let t = exp(u);
            acc += GW[i] * t * integrand(t);
        }
        total += 0.5 * h * acc;
    }
    if t0 < t_decay {
        total += tail(rs, s, t0);
    }
    total
}

/// \int_{t0}^\infty e^{-ts} prod_j g(t r_j) dt from the asymptotic expansion of g.
fn tail(rs: &[f64], s: f64, t0: f64) -> f64 {
    let c = i0e_asymptotic_coefficients::<TAIL_TERMS>();
    // Cauchy product of the per-factor series sum_k c_k r^{-k} t^{-k}
    let mut prod = [0.0; TAIL_TERMS];
    prod[0] = 1.0;
    let mut norm = 1.0;
    for &x in rs {
        norm *= x;
        let mut next = [0.0; TAIL_TERMS];
        for (n, slot) in next.iter_mut().enumerate() {
            let mut acc = 0.0;
            let mut rk = 1.0;
            for k in 0..=n {
                acc += c[k] * rk * prod[n - k];
                rk /= x;
            }
            *slot = acc;
        }
        prod = next;
    }
    let d = rs.len();
    let a = 0.5 * d as f64;
    let pref = pow(2.0 * PI, -a) / sqrt(norm);
    let moments = power_tail_moments(a, s, t0);
    let mut sum = 0.0;
    for n in 0..TAIL_TERMS {
        sum += prod[n] * moments[n];
    }
    pref * sum
}

/// I(a + n) = \int_{t0}^\infty t^{-(a+n)} e^{-st} dt for n = 0..TAIL_TERMS.
fn power_tail_moments(a: f64, s: f64, t0: f64) -> [f64; TAIL_TERMS] {
    let mut out = [0.0; TAIL_TERMS];
    if s == 0.0 {
        for (n, slot) in out.iter_mut().enumerate() {
            let p = a + n as f64;
            *slot = if p > 1.0 { pow(t0, 1.0 - p) / (p - 1.0) } else { f64::INFINITY };
        }
        return out;
    }
    let decay = exp(-s * t0);
    let (p0, mut val) = if (a - libm::floor(a)) > 0.25 {
        (0.5, sqrt(PI / s) * erfc(sqrt(s * t0)))
    } else {
        (1.0, e1(s * t0))
    };
    let m = libm::round(a - p0) as usize;
    let mut p = p0;
    for idx in 0..m + TAIL_TERMS {
        if idx >= m {
            out[idx - m] = val;
        }
        val = (pow(t0, -p) * decay - s * val) / p;
        p += 1.0;
    }
    out
}
