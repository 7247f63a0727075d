//! Quadrature on the torus: uniform product rules, the Watson integral, graded
//! log-radial spherical grids, and Gauss-Legendre rules.

use alloc::vec::Vec;
use core::f64::consts::PI;

use libm::{cos, log10, sin, sqrt};

use crate::error::{Error, Result};
use crate::model::{norm, reduce_angle, TorusPoint, Vec3};

const TAU: f64 = 2.0 * PI;

/// (2 pi)^3, the volume of the torus.
pub const TORUS_VOLUME: f64 = TAU * TAU * TAU;

pub(crate) const GL8_NODES: [f64; 8] = [
    -0.960_289_856_497_536_2,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_2,
];

pub(crate) const GL8_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_7,
    0.222_381_034_453_374_3,
    0.313_706_645_877_887,
    0.362_683_783_378_361_8,
    0.362_683_783_378_361_8,
    0.313_706_645_877_887,
    0.222_381_034_453_374_3,
    0.101_228_536_290_376_7,
];

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut x = alloc::vec![0.0; n];
    let mut w = alloc::vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = cos(PI * (i as f64 + 0.75) / (nf + 0.5));
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        dp = if d != 0.0 { d } else { dp };
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// P_n(x) and P_n'(x).
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Legendre polynomial P_l(t).
pub fn legendre(l: usize, t: f64) -> f64 {
    if l == 0 {
        return 1.0;
    }
    legendre_with_derivative(l, t).0
}

/// Sum in a fixed binary-tree order.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 16 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

/// Product rule with N points per axis and uniform weights (2 pi / N)^3.
#[derive(Clone, Debug, PartialEq)]
pub struct UniformTorusGrid {
    n: usize,
    axis: [Vec<f64>; 3],
}

impl UniformTorusGrid {
    /// Nodes at -pi + 2 pi j / N.
    pub fn new(n: usize) -> Self {
        let h = TAU / n as f64;
        let line: Vec<f64> = (0..n).map(|j| reduce_angle(-PI + h * j as f64)).collect();
        UniformTorusGrid { n, axis: [line.clone(), line.clone(), line] }
    }

    /// Nodes offset by half a step from `singular`, so that point is never sampled.
    pub fn avoiding(n: usize, singular: TorusPoint) -> Self {
        let h = TAU / n as f64;
        let c = singular.coords();
        let axis = c.map(|ci| (0..n).map(|j| reduce_angle(ci + h * (j as f64 + 0.5))).collect());
        UniformTorusGrid { n, axis }
    }

    pub fn points_per_axis(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn weight(&self) -> f64 {
        let h = TAU / self.n as f64;
        h * h * h
    }

    pub fn axis(&self, i: usize) -> &[f64] {
        &self.axis[i]
    }

    pub fn nodes(&self) -> impl Iterator<Item = Vec3> + '_ {
        let n = self.n;
        (0..n * n * n).map(move |idx| {
            let (i, j, k) = (idx / (n * n), (idx / n) % n, idx % n);
            [self.axis[0][i], self.axis[1][j], self.axis[2][k]]
        })
    }
}

/// Weighted node sum over a uniform grid, reduced plane by plane in a fixed order.
pub fn integrate_uniform<F: Fn(Vec3) -> f64>(f: F, grid: &UniformTorusGrid) -> Result<f64> {
    let n = grid.n;
    let mut planes = Vec::with_capacity(n);
    let mut buf = alloc::vec![0.0; n * n];
    for (i, &x) in grid.axis[0].iter().enumerate() {
        for (j, &y) in grid.axis[1].iter().enumerate() {
            for (k, &z) in grid.axis[2].iter().enumerate() {
                let v = f([x, y, z]);
                if !v.is_finite() {
                    return Err(Error::NonFinite((i * n + j) * n + k));
                }
                buf[j * n + k] = v;
            }
        }
        planes.push(pairwise_sum(&buf));
    }
    Ok(pairwise_sum(&planes) * grid.weight())
}

/// How the Watson integral is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WatsonMethod {
    /// Midpoint grids shifted off the origin, Richardson in 1/N and 1/N^3.
    ShiftedMidpoint,
    /// Midpoint grids after subtracting a compactly supported 2/|q|^2 model.
    Subtraction,
    /// Laplace transform with Bessel factors, see [`crate::green`].
    Laplace,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WatsonEstimate {
    pub value: f64,
    /// Difference between the two most refined extrapolants.
    pub spread: f64,
}

/// W = (2 pi)^{-3} \int dq / eps(q).
///
/// `sizes` lists the grid sizes used by the two midpoint methods, in increasing order.
pub fn integrate_inverse_epsilon(method: WatsonMethod, sizes: &[usize], tol: f64) -> Result<WatsonEstimate> {
    if method == WatsonMethod::Laplace {
        let a = crate::green::resolvent([1.0; 3], 0.0);
        let rule = crate::green::LaplaceRule { panel_width: 0.25, tail_start: 60.0 };
        let b = crate::green::resolvent_with([1.0; 3], 0.0, &rule);
        let spread = (a - b).abs();
        if !(spread <= tol) {
            return Err(Error::NoConvergence(alloc::format!("Laplace rule spread {spread:e}")));
        }
        return Ok(WatsonEstimate { value: a, spread });
    }
    if sizes.len() < 3 || sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("need at least three increasing grid sizes".into()));
    }
    let raw: Vec<f64> = sizes.iter().map(|&n| watson_midpoint(n, method)).collect();
    let powers: [i32; 2] = match method {
        WatsonMethod::ShiftedMidpoint => [1, 3],
        _ => [3, 5],
    };
    let extrap = |i: usize| richardson3(&sizes[i..i + 3], &raw[i..i + 3], powers);
    let m = sizes.len();
    let best = extrap(m - 3);
    let spread = if m >= 4 { (best - extrap(m - 4)).abs() } else { (best - raw[m - 1]).abs() };
    if !(spread <= tol) {
        return Err(Error::NoConvergence(alloc::format!("Watson extrapolants differ by {spread:e}")));
    }
    Ok(WatsonEstimate { value: best, spread })
}

/// Unextrapolated midpoint value at resolution `n`.
pub fn watson_midpoint(n: usize, method: WatsonMethod) -> f64 {
    let h = TAU / n as f64;
    let coords: Vec<f64> = (0..n).map(|j| -PI + h * (j as f64 + 0.5)).collect();
    let c: Vec<f64> = coords.iter().map(|&x| 1.0 - cos(x)).collect();
    let sq: Vec<f64> = coords.iter().map(|&x| x * x).collect();
    let subtract = method == WatsonMethod::Subtraction;
    let pi2 = PI * PI;
    let mut planes = Vec::with_capacity(n);
    let mut line = alloc::vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let e = c[i] + c[j] + c[k];
                let mut v = 1.0 / e;
                if subtract {
                    let q2 = sq[i] + sq[j] + sq[k];
                    if q2 < pi2 {
                        let t = 1.0 - q2 / pi2;
                        v -= 2.0 / q2 * t * t * t;
                    }
                }
                line[j * n + k] = v;
            }
        }
        planes.push(pairwise_sum(&line));
    }
    let mut total = pairwise_sum(&planes) * h * h * h;
    if subtract {
        total += 128.0 * pi2 / 35.0;
    }
    total / TORUS_VOLUME
}

/// Eliminates c_1 N^{-p1} + c_2 N^{-p2} from three samples.
fn richardson3(n: &[usize], v: &[f64], p: [i32; 2]) -> f64 {
    let row = |i: usize| {
        let x = 1.0 / n[i] as f64;
        [1.0, libm::pow(x, p[0] as f64), libm::pow(x, p[1] as f64)]
    };
    let a = [row(0), row(1), row(2)];
    solve3(&a, &[v[0], v[1], v[2]])[0]
}

pub(crate) fn solve3(a: &[[f64; 3]; 3], b: &[f64; 3]) -> [f64; 3] {
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(a);
    let mut out = [0.0; 3];
    for (c, slot) in out.iter_mut().enumerate() {
        let mut m = *a;
        for r in 0..3 {
            m[r][c] = b[r];
        }
        *slot = det(&m) / d;
    }
    out
}

/// Parameters of a graded spherical grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradedGridSpec {
    /// Geometric radial panels per decade between the inner and outer radius.
    pub panels_per_decade: f64,
    /// Gauss-Legendre points per radial panel; 1 gives a purely geometric node sequence.
    pub radial_order: usize,
    pub n_theta: usize,
    pub n_phi: usize,
    /// Uniform cells per axis in the far field.
    pub far_cells: usize,
    /// Sub-samples per axis used to measure how much of a seam cell lies outside the ball.
    pub far_subsamples: usize,
    pub r_outer: f64,
}

impl Default for GradedGridSpec {
    fn default() -> Self {
        GradedGridSpec {
            panels_per_decade: 2.0,
            radial_order: 2,
            n_theta: 4,
            n_phi: 8,
            far_cells: 8,
            far_subsamples: 4,
            r_outer: PI,
        }
    }
}

impl GradedGridSpec {
    /// Twice the radial panel density and twice the angular points in each direction.
    pub fn doubled(&self) -> Self {
        GradedGridSpec {
            panels_per_decade: 2.0 * self.panels_per_decade,
            n_theta: 2 * self.n_theta,
            n_phi: 2 * self.n_phi,
            ..*self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.panels_per_decade > 0.0
            && self.radial_order >= 1
            && self.n_theta >= 1
            && self.n_phi >= 1
            && self.far_cells >= 1
            && self.far_subsamples >= 1
            && self.r_outer > 0.0
            && self.r_outer <= PI;
        if ok {
            Ok(())
        } else {
            Err(Error::Config("graded grid parameters must be positive with r_outer <= pi".into()))
        }
    }
}

/// Log-radial product grid on a ball around `center` plus a uniform far field
/// covering the rest of the torus.
#[derive(Clone, Debug, PartialEq)]
pub struct GradedSphericalGrid {
    pub center: TorusPoint,
    pub r_inner: f64,
    pub r_outer: f64,
    /// Radial nodes of the ball part, increasing.
    pub radii: Vec<f64>,
    /// Node displacements from the center.
    pub offsets: Vec<Vec3>,
    /// Absolute node positions reduced to the torus.
    pub nodes: Vec<Vec3>,
    pub weights: Vec<f64>,
    /// Number of leading nodes that belong to the ball.
    pub n_ball: usize,
}

impl GradedSphericalGrid {
    pub fn new(center: TorusPoint, spec: &GradedGridSpec, r_inner: f64) -> Result<Self> {
        spec.validate()?;
        let r_outer = spec.r_outer;
        if !(r_inner > 0.0 && r_inner < r_outer) {
            return Err(Error::Config(alloc::format!("inner radius {r_inner} outside (0, {r_outer})")));
        }
        let (gx, gw) = gauss_legendre(spec.radial_order);
        let mut radii = Vec::new();
        let mut rw = Vec::new();
        let mut panel = |a: f64, b: f64| {
            for (x, w) in gx.iter().zip(&gw) {
                let r = 0.5 * (a + b) + 0.5 * (b - a) * x;
                radii.push(r);
                rw.push(0.5 * (b - a) * w * r * r);
            }
        };
        panel(0.0, r_inner);
        let decades = log10(r_outer / r_inner);
        let panels = libm::ceil(decades * spec.panels_per_decade).max(1.0) as usize;
        let ratio = libm::pow(r_outer / r_inner, 1.0 / panels as f64);
        let mut a = r_inner;
        for i in 0..panels {
            let b = if i + 1 == panels { r_outer } else { a * ratio };
            panel(a, b);
            a = b;
        }

        let (ct, wt) = gauss_legendre(spec.n_theta);
        let dphi = TAU / spec.n_phi as f64;
        let mut dirs = Vec::with_capacity(spec.n_theta * spec.n_phi);
        for (c, w) in ct.iter().zip(&wt) {
            let st = sqrt((1.0 - c * c).max(0.0));
            for j in 0..spec.n_phi {
                let phi = dphi * (j as f64 + 0.5);
                dirs.push(([st * cos(phi), st * sin(phi), *c], w * dphi));
            }
        }

        let c = center.coords();
        let mut offsets = Vec::new();
        let mut weights = Vec::new();
        for (r, w) in radii.iter().zip(&rw) {
            for (d, dw) in &dirs {
                offsets.push([r * d[0], r * d[1], r * d[2]]);
                weights.push(w * dw);
            }
        }
        let n_ball = offsets.len();
        let ball_total = pairwise_sum(&weights);

        let nf = spec.far_cells;
        let ns = spec.far_subsamples;
        let h = TAU / nf as f64;
        let mut far_w = Vec::new();
        for i in 0..nf {
            for j in 0..nf {
                for k in 0..nf {
                    let cell = [-PI + h * (i as f64 + 0.5), -PI + h * (j as f64 + 0.5), -PI + h * (k as f64 + 0.5)];
                    let mut count = 0usize;
                    let mut acc = [0.0; 3];
                    for a in 0..ns {
                        for b in 0..ns {
                            for e in 0..ns {
                                let s = |t: usize| h * ((t as f64 + 0.5) / ns as f64 - 0.5);
                                let p = [cell[0] + s(a), cell[1] + s(b), cell[2] + s(e)];
                                if norm(&p) >= r_outer {
                                    count += 1;
                                    for m in 0..3 {
                                        acc[m] += p[m];
                                    }
                                }
                            }
                        }
                    }
                    if count > 0 {
                        let cf = count as f64;
                        offsets.push([acc[0] / cf, acc[1] / cf, acc[2] / cf]);
                        far_w.push(cf / (ns * ns * ns) as f64 * h * h * h);
                    }
                }
            }
        }
        let far_total = pairwise_sum(&far_w);
        let target = TORUS_VOLUME - ball_total;
        weights.extend(far_w.iter().map(|w| w * target / far_total));

        let nodes = offsets
            .iter()
            .map(|o| [reduce_angle(c[0] + o[0]), reduce_angle(c[1] + o[1]), reduce_angle(c[2] + o[2])])
            .collect();
        Ok(GradedSphericalGrid { center, r_inner, r_outer, radii, offsets, nodes, weights, n_ball })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Weighted sum over ball and far-field nodes. The integrand receives the absolute node
/// position and the displacement from the grid center.
pub fn integrate_graded<F: Fn(Vec3, Vec3) -> f64>(f: F, grid: &GradedSphericalGrid) -> Result<f64> {
    let mut terms = Vec::with_capacity(grid.len());
    for (i, (p, o)) in grid.nodes.iter().zip(&grid.offsets).enumerate() {
        let v = f(*p, *o);
        if !v.is_finite() {
            return Err(Error::NonFinite(i));
        }
        terms.push(v * grid.weights[i]);
    }
    Ok(pairwise_sum(&terms))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_rules() {
        let (x, w) = gauss_legendre(1);
        assert_eq!(x, alloc::vec![0.0]);
        assert!((w[0] - 2.0).abs() < 1e-15);
        let (x, w) = gauss_legendre(2);
        assert!((x[1] - 1.0 / sqrt(3.0)).abs() < 1e-15 && (x[0] + x[1]).abs() < 1e-15);
        assert!((w[0] - 1.0).abs() < 1e-14 && (w[1] - 1.0).abs() < 1e-14);
        let (x, w) = gauss_legendre(3);
        let i4: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(4)).sum();
        assert!((i4 - 0.4).abs() < 1e-14);
    }

    #[test]
    fn gl8_constants_match_generator() {
        let (x, w) = gauss_legendre(8);
        for i in 0..8 {
            assert!((x[i] - GL8_NODES[i]).abs() < 1e-15);
            assert!((w[i] - GL8_WEIGHTS[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn uniform_trigonometric() {
        let g = UniformTorusGrid::new(16);
        let one = integrate_uniform(|_| 1.0, &g).unwrap();
        assert!((one - TORUS_VOLUME).abs() < 1e-10 * TORUS_VOLUME);
        let c = integrate_uniform(|p| cos(p[0]), &g).unwrap();
        assert!(c.abs() < 1e-12);
    }

    #[test]
    fn uniform_rejects_singular_node() {
        let g = UniformTorusGrid::new(8);
        assert!(matches!(integrate_uniform(|p| 1.0 / crate::model::epsilon_raw(&p), &g), Err(Error::NonFinite(_))));
        let g = UniformTorusGrid::avoiding(8, TorusPoint::ZERO);
        assert!(integrate_uniform(|p| 1.0 / crate::model::epsilon_raw(&p), &g).is_ok());
    }

    #[test]
    fn graded_partition_and_radial_ratio() {
        let spec = GradedGridSpec { radial_order: 1, ..Default::default() };
        let g = GradedSphericalGrid::new(TorusPoint::new([0.3, -0.2, 3.0]), &spec, 1e-4).unwrap();
        let total: f64 = pairwise_sum(&g.weights);
        assert!((total - TORUS_VOLUME).abs() < 1e-10 * TORUS_VOLUME);
        assert!(g.weights.iter().all(|&w| w > 0.0));
        let ratios: Vec<f64> = g.radii.windows(2).skip(1).map(|w| w[1] / w[0]).collect();
        for r in &ratios {
            assert!((r - ratios[0]).abs() < 1e-12 * ratios[0]);
        }
    }
}
