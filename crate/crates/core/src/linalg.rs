//! Dense symmetric linear algebra: inertia, extreme eigenvalues, determinants and
//! a bracketed scalar root finder.

use alloc::vec;
use alloc::vec::Vec;

use libm::{exp, hypot, log, sqrt};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const BLOCK: usize = 64;
/// Seed of the Lanczos start vector used by [`max_eigenvalue`].
pub const DEFAULT_SEED: u64 = 0x0bad_5eed_1234_5678;

/// Real symmetric matrix in full column-major storage.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymmetricMatrix {
    pub fn zeros(n: usize) -> Self {
        SymmetricMatrix { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        let mut m = Self::zeros(n);
        for (i, v) in d.iter().enumerate() {
            m.data[i * n + i] = *v;
        }
        m
    }

    /// Builds the matrix from the lower triangle `f(i, j)`, `i >= j`.
    pub fn from_lower<F: FnMut(usize, usize) -> f64>(n: usize, mut f: F) -> Self {
        let mut m = Self::zeros(n);
        for j in 0..n {
            for i in j..n {
                let v = f(i, j);
                m.data[i + j * n] = v;
                m.data[j + i * n] = v;
            }
        }
        m
    }

    /// Takes a full column-major array; fails if it is not symmetric to 1e-12.
    pub fn from_full(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::Invariant("matrix data length mismatch".into()));
        }
        let m = SymmetricMatrix { n, data };
        if m.symmetry_residual() > 1e-12 * m.max_abs().max(1.0) {
            return Err(Error::Invariant("matrix is not symmetric".into()));
        }
        if m.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invariant("matrix has non-finite entries".into()));
        }
        Ok(m)
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i + j * self.n]
    }

    /// Sets both (i, j) and (j, i).
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i + j * self.n] = v;
        self.data[j + i * self.n] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn symmetry_residual(&self) -> f64 {
        let n = self.n;
        let mut r: f64 = 0.0;
        for j in 0..n {
            for i in j + 1..n {
                r = r.max((self.data[i + j * n] - self.data[j + i * n]).abs());
            }
        }
        r
    }

    pub fn frobenius_norm(&self) -> f64 {
        sqrt(self.data.iter().map(|v| v * v).sum())
    }

    /// Gershgorin bound on the spectral radius.
    pub fn gershgorin_bound(&self) -> f64 {
        let n = self.n;
        (0..n).map(|j| self.data[j * n..(j + 1) * n].iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let n = self.n;
        y.iter_mut().for_each(|v| *v = 0.0);
        for (j, &xj) in x.iter().enumerate() {
            if xj == 0.0 {
                continue;
            }
            let col = &self.data[j * n..(j + 1) * n];
            for (yi, a) in y.iter_mut().zip(col) {
                *yi += a * xj;
            }
        }
    }

    /// `self - shift * I` as a fresh array.
    fn shifted_data(&self, shift: f64) -> Vec<f64> {
        let mut d = self.data.clone();
        for i in 0..self.n {
            d[i * self.n + i] -= shift;
        }
        d
    }
}

/// Signs of the eigenvalues.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Inertia {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

/// Determinant as sign and log-magnitude.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SignedLogDet {
    pub sign: f64,
    pub ln_abs: f64,
}

impl SignedLogDet {
    pub fn value(&self) -> f64 {
        if self.sign == 0.0 {
            0.0
        } else {
            self.sign * exp(self.ln_abs)
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Factorization {
    inertia: Inertia,
    det: SignedLogDet,
}

struct Pivots {
    inertia: Inertia,
    sign: f64,
    ln_abs: f64,
}

impl Pivots {
    fn one(&mut self, d: f64) {
        if d > 0.0 {
            self.inertia.positive += 1;
        } else if d < 0.0 {
            self.inertia.negative += 1;
            self.sign = -self.sign;
        } else {
            self.inertia.zero += 1;
            self.sign = 0.0;
        }
        if d != 0.0 {
            self.ln_abs += log(d.abs());
        }
    }

    fn two(&mut self, a: f64, b: f64, c: f64) {
        // det computed as b^2 ((a/b)(c/b) - 1) to avoid overflow
        let det = (a / b) * (c / b) - 1.0;
        let det_full = det * b * b;
        if det_full < 0.0 {
            self.inertia.positive += 1;
            self.inertia.negative += 1;
            self.sign = -self.sign;
        } else if det_full > 0.0 {
            if a + c > 0.0 {
                self.inertia.positive += 2;
            } else {
                self.inertia.negative += 2;
            }
        } else {
            self.inertia.zero += 1;
            self.sign = 0.0;
            if a + c > 0.0 {
                self.inertia.positive += 1;
            } else {
                self.inertia.negative += 1;
            }
        }
        if det_full != 0.0 {
            self.ln_abs += log(det.abs()) + 2.0 * log(b.abs());
        }
    }
}

/// Blocked Bunch-Kaufman LDL^T factorisation of the lower triangle of `a`
/// (column-major, order `n`), returning inertia and determinant. `a` is overwritten.
fn bunch_kaufman(a: &mut [f64], n: usize) -> Factorization {
    let mut piv = Pivots { inertia: Inertia::default(), sign: 1.0, ln_abs: 0.0 };
    let mut w = vec![0.0; n * BLOCK.min(n.max(1))];
    let mut k = 0;
    while k < n {
        let rem = n - k;
        let nb = if rem > BLOCK { BLOCK } else { rem };
        let kb = panel(a, n, k, nb, &mut w, &mut piv);
        k += kb;
    }
    Factorization { inertia: piv.inertia, det: SignedLogDet { sign: piv.sign, ln_abs: piv.ln_abs } }
}

/// Factors up to `nb` columns of the trailing block starting at `k0` and updates the rest.
fn panel(a: &mut [f64], n: usize, k0: usize, nb: usize, w: &mut [f64], piv: &mut Pivots) -> usize {
    let alpha = (1.0 + sqrt(17.0)) / 8.0;
    let m = n - k0;
    let base = k0 + k0 * n;
    macro_rules! at {
        ($i:expr, $j:expr) => {
            a[base + ($i) + ($j) * n]
        };
    }
    macro_rules! wt {
        ($i:expr, $j:expr) => {
            w[($i) + ($j) * m]
        };
    }
    let mut k = 0;
    loop {
        if (k + 1 >= nb && nb < m) || k >= m {
            break;
        }
        let mut kstep = 1;
        for i in k..m {
            wt!(i, k) = at!(i, k);
        }
        for j in 0..k {
            let c = wt!(k, j);
            if c != 0.0 {
                for i in k..m {
                    wt!(i, k) -= at!(i, j) * c;
                }
            }
        }
        let absakk = wt!(k, k).abs();
        let (mut imax, mut colmax) = (k, 0.0);
        for i in k + 1..m {
            let v = wt!(i, k).abs();
            if v > colmax {
                colmax = v;
                imax = i;
            }
        }
        let kp;
        if absakk.max(colmax) == 0.0 {
            for i in k..m {
                at!(i, k) = wt!(i, k);
            }
            piv.one(0.0);
            k += 1;
            continue;
        } else if absakk >= alpha * colmax {
            kp = k;
        } else {
            for j in k..imax {
                wt!(j, k + 1) = at!(imax, j);
            }
            for i in imax..m {
                wt!(i, k + 1) = at!(i, imax);
            }
            for j in 0..k {
                let c = wt!(imax, j);
                if c != 0.0 {
                    for i in k..m {
                        wt!(i, k + 1) -= at!(i, j) * c;
                    }
                }
            }
            let mut rowmax: f64 = 0.0;
            for j in k..imax {
                rowmax = rowmax.max(wt!(j, k + 1).abs());
            }
            for i in imax + 1..m {
                rowmax = rowmax.max(wt!(i, k + 1).abs());
            }
            if absakk >= alpha * colmax * (colmax / rowmax) {
                kp = k;
            } else if wt!(imax, k + 1).abs() >= alpha * rowmax {
                kp = imax;
                for i in k..m {
                    wt!(i, k) = wt!(i, k + 1);
                }
            } else {
                kp = imax;
                kstep = 2;
            }
        }
        let kk = k + kstep - 1;
        if kp != kk {
            at!(kp, kp) = at!(kk, kk);
            for j in kk + 1..kp {
                at!(kp, j) = at!(j, kk);
            }
            for i in kp + 1..m {
                at!(i, kp) = at!(i, kk);
            }
            for j in 0..kk {
                let t = at!(kk, j);
                at!(kk, j) = at!(kp, j);
                at!(kp, j) = t;
            }
            for j in 0..=kk {
                let t = wt!(kk, j);
                wt!(kk, j) = wt!(kp, j);
                wt!(kp, j) = t;
            }
        }
        if kstep == 1 {
            for i in k..m {
                at!(i, k) = wt!(i, k);
            }
            let d = at!(k, k);
            piv.one(d);
            let r1 = 1.0 / d;
            for i in k + 1..m {
                at!(i, k) *= r1;
            }
        } else {
            let (d11w, d21w, d22w) = (wt!(k, k), wt!(k + 1, k), wt!(k + 1, k + 1));
            if k + 2 < m {
                let d11 = d22w / d21w;
                let d22 = d11w / d21w;
                let t = 1.0 / (d11 * d22 - 1.0);
                let d21 = t / d21w;
                for j in k + 2..m {
                    let (wk, wk1) = (wt!(j, k), wt!(j, k + 1));
                    at!(j, k) = d21 * (d11 * wk - wk1);
                    at!(j, k + 1) = d21 * (d22 * wk1 - wk);
                }
            }
            at!(k, k) = d11w;
            at!(k + 1, k) = d21w;
            at!(k + 1, k + 1) = d22w;
            piv.two(d11w, d21w, d22w);
        }
        k += kstep;
    }
    let kb = k;
    if kb < m {
        // A22 -= L21 W21^T on the lower triangle, one block column at a time
        let mut j0 = kb;
        while j0 < m {
            let jb = BLOCK.min(m - j0);
            for jj in j0..j0 + jb {
                for t in 0..kb {
                    let c = wt!(jj, t);
                    if c != 0.0 {
                        for i in jj..j0 + jb {
                            at!(i, jj) -= at!(i, t) * c;
                        }
                    }
                }
            }
            let r0 = j0 + jb;
            if r0 < m {
                let rows = m - r0;
                // SAFETY: the source panel (columns < kb), the workspace and the target
                // block (columns >= kb) are disjoint; all indices stay inside the buffers.
                unsafe {
                    let ap = a.as_mut_ptr();
                    let lhs = ap.add(base + r0) as *const f64;
                    let rhs = w.as_ptr().add(j0);
                    let out = ap.add(base + r0 + j0 * n);
                    matrixmultiply::dgemm(
                        rows,
                        kb,
                        jb,
                        -1.0,
                        lhs,
                        1,
                        n as isize,
                        rhs,
                        m as isize,
                        1,
                        1.0,
                        out,
                        1,
                        n as isize,
                    );
                }
            }
            j0 += jb;
        }
    }
    kb
}

fn factor_shifted(a: &SymmetricMatrix, shift: f64) -> Factorization {
    let mut d = a.shifted_data(shift);
    bunch_kaufman(&mut d, a.n)
}

/// Inertia of `a - shift I`.
pub fn inertia(a: &SymmetricMatrix, shift: f64) -> Inertia {
    factor_shifted(a, shift).inertia
}

/// Number of eigenvalues strictly greater than `lambda`.
pub fn count_above(a: &SymmetricMatrix, lambda: f64) -> Result<usize> {
    let f = factor_shifted(a, lambda);
    if f.inertia.zero == 0 {
        return Ok(f.inertia.positive);
    }
    let nudged = lambda + 1e-12 * lambda.abs().max(1.0);
    let f = factor_shifted(a, nudged);
    if f.inertia.zero == 0 {
        Ok(f.inertia.positive)
    } else {
        Err(Error::Breakdown)
    }
}

pub fn determinant_sym(a: &SymmetricMatrix) -> SignedLogDet {
    factor_shifted(a, 0.0).det
}

/// Inertia and determinant of `a - shift I` from one factorisation.
pub fn inertia_and_determinant(a: &SymmetricMatrix, shift: f64) -> (Inertia, SignedLogDet) {
    let f = factor_shifted(a, shift);
    (f.inertia, f.det)
}

/// Eigenvalues of a symmetric tridiagonal matrix by implicit QL; `z` receives the
/// eigenvectors column-wise (row-major n x n, `z[r * n + c]`).
pub fn tridiagonal_eigen(diag: &[f64], sub: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n.saturating_sub(1)].copy_from_slice(&sub[..n.saturating_sub(1)]);
    let mut z = vec![0.0; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut mm = l;
            while mm + 1 < n {
                let dd = d[mm].abs() + d[mm + 1].abs();
                if e[mm].abs() <= f64::EPSILON * dd {
                    break;
                }
                mm += 1;
            }
            if mm == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::NoConvergence("tridiagonal QL".into()));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = hypot(g, 1.0);
            g = d[mm] - d[l] + e[l] / (g + if g >= 0.0 { r.abs() } else { -r.abs() });
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = mm;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = hypot(f, g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[mm] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    let f = z[k * n + i + 1];
                    z[k * n + i + 1] = s * z[k * n + i] + c * f;
                    z[k * n + i] = c * z[k * n + i] - s * f;
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[mm] = 0.0;
        }
    }
    Ok((d, z))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Largest eigenvalue by Lanczos iteration with full reorthogonalisation and a fixed
/// pseudo-random start vector.
pub fn max_eigenvalue(a: &SymmetricMatrix) -> Result<f64> {
    max_eigenvalue_seeded(a, DEFAULT_SEED)
}

/// As [`max_eigenvalue`], with the start vector drawn from `seed`.
pub fn max_eigenvalue_seeded(a: &SymmetricMatrix, seed: u64) -> Result<f64> {
    let n = a.n;
    if n == 0 {
        return Err(Error::Invariant("empty matrix".into()));
    }
    if n == 1 {
        return Ok(a.data[0]);
    }
    let scale = a.gershgorin_bound().max(f64::MIN_POSITIVE);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut start: Vec<f64> = (0..n).map(|_| (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 - 0.5).collect();
    let cycle = n.min(300);
    let mut total = 0usize;
    let mut prev = f64::NEG_INFINITY;
    loop {
        let nrm = sqrt(dot(&start, &start));
        start.iter_mut().for_each(|v| *v /= nrm);
        let mut basis: Vec<Vec<f64>> = vec![start.clone()];
        let mut alphas = Vec::new();
        let mut betas: Vec<f64> = Vec::new();
        let mut wv = vec![0.0; n];
        for j in 0..cycle {
            total += 1;
            a.matvec(&basis[j], &mut wv);
            let al = dot(&wv, &basis[j]);
            alphas.push(al);
            for _ in 0..2 {
                for b in &basis {
                    let c = dot(&wv, b);
                    wv.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
                }
            }
            let beta = sqrt(dot(&wv, &wv));
            let last = j + 1 == cycle;
            let invariant = beta <= 1e-14 * scale;
            if j >= 1 && (j % 4 == 0 || last || invariant) {
                let (vals, z) = tridiagonal_eigen(&alphas, &betas)?;
                let m = vals.len();
                let (imax, theta) = vals.iter().cloned().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, v)| {
                    if v > acc.1 {
                        (i, v)
                    } else {
                        acc
                    }
                });
                let resid = beta * z[(m - 1) * m + imax].abs();
                let converged = resid <= 1e-12 * scale || invariant || (theta - prev).abs() <= 1e-15 * scale;
                prev = theta;
                if converged && (resid <= 1e-8 * scale || invariant) {
                    return Ok(theta);
                }
                if last {
                    // restart from the current Ritz vector
                    let mut ritz = vec![0.0; n];
                    for (i, b) in basis.iter().enumerate() {
                        let c = z[i * m + imax];
                        ritz.iter_mut().zip(b).for_each(|(x, y)| *x += c * y);
                    }
                    start = ritz;
                    break;
                }
            }
            if invariant {
                break;
            }
            betas.push(beta);
            basis.push(wv.iter().map(|v| v / beta).collect());
        }
        if total >= 10_000 {
            return Err(Error::NoConvergence("Lanczos iteration".into()));
        }
    }
}

/// Root of a sign-changing scalar function on [lo, hi] by Illinois-modified secant
/// steps safeguarded with bisection.
pub fn bracketed_root<F: FnMut(f64) -> Result<f64>>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let mut fa = f(a)?;
    let mut fb = f(b)?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() || !fa.is_finite() || !fb.is_finite() {
        return Err(Error::Bracket { lo: a, hi: b });
    }
    let mut side = 0i8;
    for _ in 0..200 {
        if b - a <= tol {
            return Ok(if fa.abs() < fb.abs() { a } else { b });
        }
        let mut x = b - fb * (b - a) / (fb - fa);
        let mid = 0.5 * (a + b);
        if !(x > a && x < b) {
            x = mid;
        }
        // keep steps from crowding an endpoint
        let guard = 0.25 * tol;
        if x - a < guard {
            x = a + guard.min(0.5 * (b - a));
        } else if b - x < guard {
            x = b - guard.min(0.5 * (b - a));
        }
        let fx = f(x)?;
        if fx == 0.0 {
            return Ok(x);
        }
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = x;
            fb = fx;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
    }
    Err(Error::NoConvergence("bracketed root".into()))
}
