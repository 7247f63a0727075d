//! Three-particle fibers H(K): band edges, channel thresholds, the Faddeev-type kernel
//! T(K, z) and Birman-Schwinger counting.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use libm::{cos, sin, sqrt};

use crate::error::{Error, Result};
use crate::linalg::{
    bracketed_root, count_above, inertia_and_determinant, max_eigenvalue, max_eigenvalue_seeded, SignedLogDet, SymmetricMatrix,
    DEFAULT_SEED,
};
use crate::model::{amplitude, epsilon_raw, reduce_angle, PairIndex, SystemConfig, TorusPoint, Vec3};
use crate::quadrature::{solve3, GradedGridSpec, GradedSphericalGrid, TORUS_VOLUME};
use crate::two_body::{tabulate_branch, BoundStateBranch, DeterminantEvaluator};

const SCAN: usize = 12;
const FD_STEP: f64 = 1e-3;
const NEWTON_ITERS: usize = 50;

pub type Matrix3 = [[f64; 3]; 3];

/// Bound-state branches for the three pairs.
pub fn tabulate_branches(cfg: &SystemConfig, n: usize) -> Result<[BoundStateBranch; 3]> {
    Ok([
        tabulate_branch(PairIndex::from_zero_based(0), cfg, n)?,
        tabulate_branch(PairIndex::from_zero_based(1), cfg, n)?,
        tabulate_branch(PairIndex::from_zero_based(2), cfg, n)?,
    ])
}

/// Minimum or maximum of a 2 pi periodic function: scan plus golden-section refinement.
fn extremum_periodic<F: Fn(f64) -> f64>(f: F, maximize: bool) -> (f64, f64) {
    let sgn = if maximize { -1.0 } else { 1.0 };
    let g = |x: f64| sgn * f(x);
    let n = 720;
    let h = 2.0 * PI / n as f64;
    let (mut xb, mut vb) = (0.0, g(0.0));
    for i in 0..n {
        let x = -PI + h * (i as f64 + 1.0);
        let v = g(x);
        if v < vb {
            xb = x;
            vb = v;
        }
    }
    let inv_phi = 0.5 * (sqrt(5.0) - 1.0);
    let (mut a, mut b) = (xb - h, xb + h);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (g(c), g(d));
    while b - a > 1e-11 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = g(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = g(d);
        }
    }
    let x = 0.5 * (a + b);
    let v = g(x);
    if v < vb {
        (reduce_angle(x), sgn * v)
    } else {
        (xb, sgn * vb)
    }
}

fn band_component(a: PairIndex, kappa: f64, cfg: &SystemConfig, maximize: bool) -> (f64, f64) {
    let (b, g) = a.complement();
    let l = cfg.masses();
    let sgn = if maximize { 1.0 } else { -1.0 };
    extremum_periodic(
        |x| l[a.idx()] * (1.0 - cos(x)) + (l[b] + l[g]) + sgn * amplitude(l[b], l[g], kappa - x),
        maximize,
    )
}

/// Bottom and top of the three-particle continuum [E_min(K), E_max(K)].
pub fn three_body_band(k: TorusPoint, cfg: &SystemConfig) -> (f64, f64) {
    let a = PairIndex::from_zero_based(0);
    let kc = k.coords();
    let mut lo = 0.0;
    let mut hi = 0.0;
    for &kj in &kc {
        lo += band_component(a, kj, cfg, false).1;
        hi += band_component(a, kj, cfg, true).1;
    }
    (lo, hi)
}

/// The alpha-coordinate p at which the three-particle symbol attains E_min(K).
pub fn band_minimizer(a: PairIndex, k: TorusPoint, cfg: &SystemConfig) -> TorusPoint {
    let kc = k.coords();
    let m = cfg.m(a);
    let mut p = [0.0; 3];
    for j in 0..3 {
        let (x, _) = band_component(a, kc[j], cfg, false);
        p[j] = m * kc[j] - x;
    }
    TorusPoint::new(p)
}

/// Z_alpha(K, p) = eps_alpha(m_alpha K - p) + z_alpha((m_beta + m_gamma) K + p).
fn channel_point(a: PairIndex, k: &Vec3, p: &Vec3, cfg: &SystemConfig) -> (Vec3, TorusPoint) {
    let m = cfg.m(a);
    let own = [m * k[0] - p[0], m * k[1] - p[1], m * k[2] - p[2]];
    let pair = TorusPoint::new([(1.0 - m) * k[0] + p[0], (1.0 - m) * k[1] + p[1], (1.0 - m) * k[2] + p[2]]);
    (own, pair)
}

/// Channel energy using the tabulated branch; `None` where the pair has no bound state.
pub fn channel_energy(a: PairIndex, k: TorusPoint, p: TorusPoint, branch: &BoundStateBranch) -> Result<Option<f64>> {
    let cfg = branch.config();
    let (own, pair) = channel_point(a, &k.coords(), &p.coords(), cfg);
    Ok(branch.value(pair)?.map(|z| cfg.l(a) * epsilon_raw(&own) + z))
}

fn channel_energy_direct(a: PairIndex, k: &Vec3, p: &Vec3, branch: &BoundStateBranch) -> Result<f64> {
    let cfg = branch.config();
    let (own, pair) = channel_point(a, k, p, cfg);
    match branch.direct(pair)? {
        Some(z) => Ok(cfg.l(a) * epsilon_raw(&own) + z),
        None => Ok(f64::INFINITY),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelMinimum {
    pub alpha: PairIndex,
    pub k: TorusPoint,
    /// Minimiser p^Z_alpha(K).
    pub p: TorusPoint,
    /// Threshold tau_s^alpha(K).
    pub value: f64,
    pub hessian: Matrix3,
}

fn fd_gradient_hessian<F: FnMut(&Vec3) -> Result<f64>>(f: &mut F, p: &Vec3, h: f64) -> Result<(f64, Vec3, Matrix3)> {
    let f0 = f(p)?;
    let shift = |d: &[(usize, f64)]| {
        let mut q = *p;
        for &(i, s) in d {
            q[i] += s;
        }
        q
    };
    let mut g = [0.0; 3];
    let mut hm = [[0.0; 3]; 3];
    for i in 0..3 {
        let fp = f(&shift(&[(i, h)]))?;
        let fm = f(&shift(&[(i, -h)]))?;
        g[i] = (fp - fm) / (2.0 * h);
        hm[i][i] = (fp - 2.0 * f0 + fm) / (h * h);
    }
    for i in 0..3 {
        for j in i + 1..3 {
            let fpp = f(&shift(&[(i, h), (j, h)]))?;
            let fpm = f(&shift(&[(i, h), (j, -h)]))?;
            let fmp = f(&shift(&[(i, -h), (j, h)]))?;
            let fmm = f(&shift(&[(i, -h), (j, -h)]))?;
            let v = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
            hm[i][j] = v;
            hm[j][i] = v;
        }
    }
    Ok((f0, g, hm))
}

fn positive_definite(h: &Matrix3) -> bool {
    let d1 = h[0][0];
    let d2 = h[0][0] * h[1][1] - h[0][1] * h[1][0];
    let d3 = h[0][0] * (h[1][1] * h[2][2] - h[1][2] * h[2][1]) - h[0][1] * (h[1][0] * h[2][2] - h[1][2] * h[2][0])
        + h[0][2] * (h[1][0] * h[2][1] - h[1][1] * h[2][0]);
    d1 > 0.0 && d2 > 0.0 && d3 > 0.0
}

/// Global minimum of Z_alpha(K, .): coarse scan of the tabulated branch followed by
/// finite-difference Newton steps on direct root solves. `None` if the channel has no
/// bound state anywhere on the scan grid.
pub fn channel_minimum(a: PairIndex, k: TorusPoint, branch: &BoundStateBranch) -> Result<Option<ChannelMinimum>> {
    let kc = k.coords();
    let mut f = |p: &Vec3| channel_energy_direct(a, &kc, p, branch);
    if kc == [0.0; 3] {
        let (v, _, h) = fd_gradient_hessian(&mut f, &[0.0; 3], FD_STEP)?;
        if !v.is_finite() {
            return Ok(None);
        }
        return Ok(Some(ChannelMinimum { alpha: a, k, p: TorusPoint::ZERO, value: v, hessian: h }));
    }
    let step = 2.0 * PI / SCAN as f64;
    let mut best: Option<(f64, Vec3)> = None;
    for i in 0..SCAN {
        for j in 0..SCAN {
            for l in 0..SCAN {
                let p = [-PI + step * (i + 1) as f64, -PI + step * (j + 1) as f64, -PI + step * (l + 1) as f64];
                if let Some(v) = channel_energy(a, k, TorusPoint::new(p), branch)? {
                    if best.is_none_or(|(b, _)| v < b) {
                        best = Some((v, p));
                    }
                }
            }
        }
    }
    let Some((_, mut p)) = best else { return Ok(None) };
    for _ in 0..NEWTON_ITERS {
        let (v, g, h) = fd_gradient_hessian(&mut f, &p, FD_STEP)?;
        if !v.is_finite() {
            return Err(Error::NoConvergence("channel minimum left the bound-state region".into()));
        }
        let dir = if positive_definite(&h) {
            let s = solve3(&h, &g);
            [-s[0], -s[1], -s[2]]
        } else {
            [-0.1 * g[0], -0.1 * g[1], -0.1 * g[2]]
        };
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..40 {
            let q = [p[0] + t * dir[0], p[1] + t * dir[1], p[2] + t * dir[2]];
            let vq = f(&q)?;
            if vq <= v {
                p = q;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        let len = t * sqrt(dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]);
        if !moved || len < 1e-10 {
            let (v, _, h) = fd_gradient_hessian(&mut f, &p, FD_STEP)?;
            return Ok(Some(ChannelMinimum { alpha: a, k, p: TorusPoint::new(p), value: v, hessian: h }));
        }
    }
    Err(Error::NoConvergence("channel minimum refinement".into()))
}

/// Range of values of one channel and of the three-particle band.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BandStructure {
    pub k: TorusPoint,
    pub channels: [Option<Interval>; 3],
    /// Connected pieces of each channel value set as resolved by the scan.
    pub components: [Vec<Interval>; 3],
    pub minima: [Option<ChannelMinimum>; 3],
    pub band: Interval,
    /// Union of the intervals above, sorted and disjoint.
    pub merged: Vec<Interval>,
    pub tau_ess: f64,
}

pub fn merge_intervals(mut v: Vec<Interval>) -> Vec<Interval> {
    v.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    let mut out: Vec<Interval> = Vec::new();
    for iv in v {
        match out.last_mut() {
            Some(last) if iv.lo <= last.hi => last.hi = last.hi.max(iv.hi),
            _ => out.push(iv),
        }
    }
    out
}

/// Essential spectrum of H(K) from the channel value sets and the continuum.
pub fn essential_spectrum(k: TorusPoint, cfg: &SystemConfig, branches: &[BoundStateBranch; 3]) -> Result<BandStructure> {
    let (e_lo, e_hi) = three_body_band(k, cfg);
    let band = Interval { lo: e_lo, hi: e_hi };
    let mut channels = [None; 3];
    let mut components: [Vec<Interval>; 3] = Default::default();
    let mut minima = [None; 3];
    let step = 2.0 * PI / SCAN as f64;
    let at = |i: usize, j: usize, l: usize| (i % SCAN) * SCAN * SCAN + (j % SCAN) * SCAN + l % SCAN;
    for a in PairIndex::ALL {
        let br = &branches[a.idx()];
        let min = channel_minimum(a, k, br)?;
        let mut values = vec![None; SCAN * SCAN * SCAN];
        for i in 0..SCAN {
            for j in 0..SCAN {
                for l in 0..SCAN {
                    let p = [-PI + step * (i + 1) as f64, -PI + step * (j + 1) as f64, -PI + step * (l + 1) as f64];
                    values[at(i, j, l)] = channel_energy(a, k, TorusPoint::new(p), br)?;
                }
            }
        }
        let Some(m) = min else {
            continue;
        };
        components[a.idx()] = value_components(&values, m.value, &at);
        let hi = components[a.idx()].last().map_or(m.value, |c| c.hi);
        channels[a.idx()] = Some(Interval { lo: m.value, hi });
        minima[a.idx()] = Some(m);
    }
    let mut all: Vec<Interval> = components.iter().flatten().copied().collect();
    all.push(band);
    let tau_ess = all.iter().fold(f64::INFINITY, |m, iv| m.min(iv.lo));
    Ok(BandStructure { k, channels, components, minima, band, merged: merge_intervals(all), tau_ess })
}

/// Splits scanned channel values into pieces. Neighbouring scan points differ by at
/// most the largest step between adjacent defined values, so a larger gap in the sorted
/// values separates values that no chain of neighbours connects.
fn value_components(values: &[Option<f64>], min: f64, at: &dyn Fn(usize, usize, usize) -> usize) -> Vec<Interval> {
    let mut step = 0.0f64;
    for i in 0..SCAN {
        for j in 0..SCAN {
            for l in 0..SCAN {
                let Some(v) = values[at(i, j, l)] else { continue };
                for n in [at(i + 1, j, l), at(i, j + 1, l), at(i, j, l + 1)] {
                    if let Some(w) = values[n] {
                        step = step.max((v - w).abs());
                    }
                }
            }
        }
    }
    // the refined minimum is more accurate than interpolated scan values near it
    let mut sorted: Vec<f64> = values.iter().flatten().map(|&v| v.max(min)).collect();
    sorted.push(min);
    sorted.sort_by(f64::total_cmp);
    let mut out = vec![Interval { lo: sorted[0], hi: sorted[0] }];
    for &v in &sorted[1..] {
        let last = out.last_mut().expect("nonempty");
        if v - last.hi > step {
            out.push(Interval { lo: v, hi: v });
        } else {
            last.hi = v;
        }
    }
    out
}

/// Delta_alpha((m_beta + m_gamma) K + p, z - eps_alpha(m_alpha K - p)).
pub fn shifted_delta(a: PairIndex, k: TorusPoint, p: TorusPoint, z: f64, cfg: &SystemConfig) -> Result<f64> {
    let (own, pair) = channel_point(a, &k.coords(), &p.coords(), cfg);
    crate::two_body::delta(a, pair, z - cfg.l(a) * epsilon_raw(&own), cfg)
}

/// Discretisation parameters of the Faddeev kernel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FaddeevGridSpec {
    pub graded: GradedGridSpec,
    /// Inner radius as a multiple of sqrt(tau_ess - z).
    pub inner_scale: f64,
    /// Lower limit of the inner radius.
    pub inner_floor: f64,
    /// Seed of the Lanczos start vector in [`ground_state`].
    pub seed: u64,
}

impl Default for FaddeevGridSpec {
    fn default() -> Self {
        FaddeevGridSpec { graded: GradedGridSpec::default(), inner_scale: 1e-2, inner_floor: 1e-4, seed: DEFAULT_SEED }
    }
}

impl FaddeevGridSpec {
    /// Doubled radial density and angular resolution.
    pub fn doubled(&self) -> Self {
        FaddeevGridSpec { graded: self.graded.doubled(), ..*self }
    }

    /// Inner radius halved and radial panel density doubled.
    pub fn refined_inner(&self) -> Self {
        let mut g = self.graded;
        g.panels_per_decade *= 2.0;
        FaddeevGridSpec { graded: g, inner_scale: 0.5 * self.inner_scale, inner_floor: 0.5 * self.inner_floor, ..*self }
    }

    pub fn inner_radius(&self, gap: f64) -> f64 {
        (self.inner_scale * sqrt(gap.max(0.0))).max(self.inner_floor).min(0.5 * self.graded.r_outer)
    }

    pub fn validate(&self) -> Result<()> {
        self.graded.validate()?;
        if !(self.inner_scale > 0.0 && self.inner_floor > 0.0) {
            return Err(Error::Config("inner radius parameters must be positive".into()));
        }
        Ok(())
    }
}

/// Everything about one fiber H(K) that does not depend on z.
#[derive(Debug)]
pub struct FiberContext {
    cfg: SystemConfig,
    k: TorusPoint,
    minima: [Option<ChannelMinimum>; 3],
    band: (f64, f64),
    tau_ess: f64,
    centers: [TorusPoint; 3],
    evaluators: [DeterminantEvaluator; 3],
}

impl FiberContext {
    pub fn new(cfg: &SystemConfig, k: TorusPoint, branches: &[BoundStateBranch; 3]) -> Result<Self> {
        let band = three_body_band(k, cfg);
        let mut minima = [None; 3];
        for a in PairIndex::ALL {
            minima[a.idx()] = channel_minimum(a, k, &branches[a.idx()])?;
        }
        Ok(Self::from_minima(cfg, k, minima, band))
    }

    /// Builds the context from known channel minima and continuum edges.
    pub fn from_minima(cfg: &SystemConfig, k: TorusPoint, minima: [Option<ChannelMinimum>; 3], band: (f64, f64)) -> Self {
        let tau_ess = minima.iter().flatten().fold(band.0, |m, c| m.min(c.value));
        let centers = PairIndex::ALL.map(|a| match minima[a.idx()] {
            Some(m) if m.value <= tau_ess + 1e-12 * tau_ess.abs().max(1.0) => m.p,
            _ => band_minimizer(a, k, cfg),
        });
        let evaluators = PairIndex::ALL.map(|a| DeterminantEvaluator::new(a, cfg));
        FiberContext { cfg: *cfg, k, minima, band, tau_ess, centers, evaluators }
    }

    pub fn config(&self) -> &SystemConfig {
        &self.cfg
    }

    pub fn k(&self) -> TorusPoint {
        self.k
    }

    pub fn tau_ess(&self) -> f64 {
        self.tau_ess
    }

    pub fn band(&self) -> (f64, f64) {
        self.band
    }

    pub fn minimum(&self, a: PairIndex) -> Option<&ChannelMinimum> {
        self.minima[a.idx()].as_ref()
    }

    pub fn center(&self, a: PairIndex) -> TorusPoint {
        self.centers[a.idx()]
    }

    pub fn shifted_delta(&self, a: PairIndex, p: TorusPoint, z: f64) -> Result<f64> {
        let (own, pair) = channel_point(a, &self.k.coords(), &p.coords(), &self.cfg);
        self.evaluators[a.idx()].delta(pair, z - self.cfg.l(a) * epsilon_raw(&own))
    }

    /// Channel grids with the inner radius set by the distance of z below tau_ess.
    pub fn grids(&self, z: f64, spec: &FaddeevGridSpec) -> Result<[GradedSphericalGrid; 3]> {
        self.grids_with_inner(spec.inner_radius(self.tau_ess - z), spec)
    }

    pub fn grids_with_inner(&self, r_inner: f64, spec: &FaddeevGridSpec) -> Result<[GradedSphericalGrid; 3]> {
        spec.validate()?;
        Ok([
            GradedSphericalGrid::new(self.centers[0], &spec.graded, r_inner)?,
            GradedSphericalGrid::new(self.centers[1], &spec.graded, r_inner)?,
            GradedSphericalGrid::new(self.centers[2], &spec.graded, r_inner)?,
        ])
    }

    fn check_energy(&self, z: f64) -> Result<()> {
        if z > self.tau_ess + 1e-12 * self.tau_ess.abs().max(1.0) {
            return Err(Error::Config(alloc::format!(
                "energy {z} above the bottom of the essential spectrum {}",
                self.tau_ess
            )));
        }
        Ok(())
    }
}

/// Per-node data of one channel.
struct ChannelNodes {
    /// sqrt(mu w / Delta) for each node.
    f: Vec<f64>,
    /// l_alpha eps(k_alpha).
    own: Vec<f64>,
    /// cos and sin of k_alpha.
    c: Vec<Vec3>,
    s: Vec<Vec3>,
    /// cos and sin of K - k_alpha.
    cr: Vec<Vec3>,
    sr: Vec<Vec3>,
}

fn channel_nodes(ctx: &FiberContext, a: PairIndex, grid: &GradedSphericalGrid, z: f64) -> Result<ChannelNodes> {
    let n = grid.len();
    let kc = ctx.k.coords();
    let m = ctx.cfg.m(a);
    let mu = ctx.cfg.mu(a);
    let l = ctx.cfg.l(a);
    let mut out = ChannelNodes {
        f: Vec::with_capacity(n),
        own: Vec::with_capacity(n),
        c: Vec::with_capacity(n),
        s: Vec::with_capacity(n),
        cr: Vec::with_capacity(n),
        sr: Vec::with_capacity(n),
    };
    for (i, (p, w)) in grid.nodes.iter().zip(&grid.weights).enumerate() {
        let d = ctx.shifted_delta(a, TorusPoint::new(*p), z)?;
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::SingularDelta { channel: a.label(), node: i });
        }
        out.f.push(sqrt(mu * w / d));
        let ka = [m * kc[0] - p[0], m * kc[1] - p[1], m * kc[2] - p[2]];
        let mut e = 0.0;
        let mut c = [0.0; 3];
        let mut s = [0.0; 3];
        let mut cr = [0.0; 3];
        let mut sr = [0.0; 3];
        for j in 0..3 {
            let h = sin(0.5 * ka[j]);
            e += 2.0 * h * h;
            c[j] = cos(ka[j]);
            s[j] = sin(ka[j]);
            cr[j] = cos(kc[j] - ka[j]);
            sr[j] = sin(kc[j] - ka[j]);
        }
        out.own.push(l * e);
        out.c.push(c);
        out.s.push(s);
        out.cr.push(cr);
        out.sr.push(sr);
    }
    Ok(out)
}

/// Visits every entry of the off-diagonal block (alpha, beta), alpha < beta.
fn for_each_block_entry<F: FnMut(usize, usize, f64)>(ctx: &FiberContext, z: f64, a: usize, b: usize, na: &ChannelNodes, nb: &ChannelNodes, mut sink: F) {
    let g = 3 - a - b;
    let lg = ctx.cfg.masses()[g];
    let pref = 1.0 / TORUS_VOLUME;
    for i in 0..na.f.len() {
        let (cr, sr) = (na.cr[i], na.sr[i]);
        let base = na.own[i] + 3.0 * lg - z;
        let fi = pref * na.f[i];
        for j in 0..nb.f.len() {
            let (c, s) = (&nb.c[j], &nb.s[j]);
            let dot = cr[0] * c[0] + sr[0] * s[0] + cr[1] * c[1] + sr[1] * s[1] + cr[2] * c[2] + sr[2] * s[2];
            let e = base + nb.own[j] - lg * dot;
            sink(i, j, fi * nb.f[j] / e);
        }
    }
}

/// Dense symmetric discretisation of T(K, z).
#[derive(Clone, Debug)]
pub struct FaddeevMatrix {
    pub k: TorusPoint,
    pub z: f64,
    pub r_inner: f64,
    pub centers: [TorusPoint; 3],
    /// Channel block boundaries.
    pub offsets: [usize; 4],
    pub matrix: SymmetricMatrix,
}

impl FaddeevMatrix {
    pub fn order(&self) -> usize {
        self.offsets[3]
    }
}

pub fn assemble_faddeev(ctx: &FiberContext, z: f64, spec: &FaddeevGridSpec) -> Result<FaddeevMatrix> {
    ctx.check_energy(z)?;
    let grids = ctx.grids(z, spec)?;
    assemble_on_grids(ctx, z, &grids)
}

pub fn assemble_on_grids(ctx: &FiberContext, z: f64, grids: &[GradedSphericalGrid; 3]) -> Result<FaddeevMatrix> {
    ctx.check_energy(z)?;
    let nodes = [
        channel_nodes(ctx, PairIndex::from_zero_based(0), &grids[0], z)?,
        channel_nodes(ctx, PairIndex::from_zero_based(1), &grids[1], z)?,
        channel_nodes(ctx, PairIndex::from_zero_based(2), &grids[2], z)?,
    ];
    let sizes = [grids[0].len(), grids[1].len(), grids[2].len()];
    let offsets = [0, sizes[0], sizes[0] + sizes[1], sizes[0] + sizes[1] + sizes[2]];
    let mut m = SymmetricMatrix::zeros(offsets[3]);
    for a in 0..3 {
        for b in a + 1..3 {
            let (oa, ob) = (offsets[a], offsets[b]);
            for_each_block_entry(ctx, z, a, b, &nodes[a], &nodes[b], |i, j, v| m.set(oa + i, ob + j, v));
        }
    }
    if m.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::Invariant("non-finite kernel entry".into()));
    }
    Ok(FaddeevMatrix { k: ctx.k, z, r_inner: grids[0].r_inner, centers: ctx.centers, offsets, matrix: m })
}

/// Frobenius norm of the discretised kernel without storing the matrix.
pub fn frobenius_norm(ctx: &FiberContext, z: f64, spec: &FaddeevGridSpec) -> Result<f64> {
    ctx.check_energy(z)?;
    let grids = ctx.grids(z, spec)?;
    let nodes = [
        channel_nodes(ctx, PairIndex::from_zero_based(0), &grids[0], z)?,
        channel_nodes(ctx, PairIndex::from_zero_based(1), &grids[1], z)?,
        channel_nodes(ctx, PairIndex::from_zero_based(2), &grids[2], z)?,
    ];
    let mut total = 0.0;
    for a in 0..3 {
        for b in a + 1..3 {
            let mut acc = 0.0;
            for_each_block_entry(ctx, z, a, b, &nodes[a], &nodes[b], |_, _, v| acc += v * v);
            total += 2.0 * acc;
        }
    }
    if !total.is_finite() {
        return Err(Error::Invariant("non-finite kernel entry".into()));
    }
    Ok(sqrt(total))
}

/// N(K, z): eigenvalues of the kernel above 1.
pub fn count_n(ctx: &FiberContext, z: f64, spec: &FaddeevGridSpec) -> Result<usize> {
    let t = assemble_faddeev(ctx, z, spec)?;
    count_above(&t.matrix, 1.0)
}

/// det(I - T(K, z)) as sign and log-magnitude.
pub fn fredholm_det(ctx: &FiberContext, z: f64, spec: &FaddeevGridSpec) -> Result<SignedLogDet> {
    let t = assemble_faddeev(ctx, z, spec)?;
    fredholm_det_of(&t)
}

pub fn fredholm_det_of(t: &FaddeevMatrix) -> Result<SignedLogDet> {
    let (_, det) = inertia_and_determinant(&t.matrix, 1.0);
    if det.sign == 0.0 {
        return Err(Error::Breakdown);
    }
    let flip = if t.order() % 2 == 1 { -1.0 } else { 1.0 };
    Ok(SignedLogDet { sign: flip * det.sign, ln_abs: det.ln_abs })
}

/// Largest eigenvalue of the discretised kernel.
pub fn kernel_max_eigenvalue(ctx: &FiberContext, z: f64, grids: &[GradedSphericalGrid; 3]) -> Result<f64> {
    max_eigenvalue(&assemble_on_grids(ctx, z, grids)?.matrix)
}

/// The lowest eigenvalue tau_s(K) below tau_ess(K), located as the largest z with
/// lambda_max(T(K, z)) = 1 on a grid fixed by the top probe energy.
pub fn ground_state(ctx: &FiberContext, spec: &FaddeevGridSpec) -> Result<Option<f64>> {
    let tau = ctx.tau_ess;
    let delta = 1e-6 * tau.abs().max(1.0);
    let z_top = tau - delta;
    let grids = ctx.grids(z_top, spec)?;
    let f = |z: f64| max_eigenvalue_seeded(&assemble_on_grids(ctx, z, &grids)?.matrix, spec.seed).map(|l| l - 1.0);
    if f(z_top)? < 0.0 {
        return Ok(None);
    }
    let mut gap = 1.0;
    let mut z_lo = tau - gap;
    let mut tries = 0;
    while f(z_lo)? >= 0.0 {
        gap *= 2.0;
        z_lo = tau - gap;
        tries += 1;
        if tries > 20 {
            return Err(Error::Bracket { lo: z_lo, hi: z_top });
        }
    }
    bracketed_root(f, z_lo, z_top, 1e-9).map(Some)
}

/// tau_s^alpha(K) - mu_beta - mu_gamma against tau_s(K).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LowerBound {
    pub bound: f64,
    pub tau_s: f64,
    /// Whether tau_s came from a discrete eigenvalue rather than tau_ess.
    pub discrete: bool,
}

impl LowerBound {
    pub fn gap(&self) -> f64 {
        self.tau_s - self.bound
    }
}

pub fn lower_bound_gap(a: PairIndex, ctx: &FiberContext, spec: &FaddeevGridSpec) -> Result<LowerBound> {
    let m = ctx
        .minimum(a)
        .ok_or_else(|| Error::Config(alloc::format!("channel {a} has no bound state")))?;
    let (b, g) = a.complement();
    let mu = ctx.cfg.couplings();
    let bound = m.value - mu[b] - mu[g];
    let gs = ground_state(ctx, spec)?;
    Ok(LowerBound { bound, tau_s: gs.unwrap_or(ctx.tau_ess), discrete: gs.is_some() })
}

/// Counts just below tau_ess(K) at two grid resolutions.
#[derive(Clone, Debug, PartialEq)]
pub struct FinitenessReport {
    pub k: TorusPoint,
    pub tau_ess: f64,
    pub deltas: Vec<f64>,
    pub coarse: Vec<usize>,
    pub doubled: Vec<usize>,
}

impl FinitenessReport {
    /// True if the counts at the two smallest offsets agree on both grids.
    pub fn stabilised(&self) -> bool {
        let n = self.deltas.len();
        n >= 2 && self.coarse[n - 1] == self.coarse[n - 2] && self.doubled[n - 1] == self.doubled[n - 2]
    }
}

pub fn finiteness_probe(ctx: &FiberContext, spec: &FaddeevGridSpec, deltas: &[f64]) -> Result<FinitenessReport> {
    let mut coarse = vec![];
    let mut doubled = vec![];
    let fine = spec.doubled();
    for &d in deltas {
        let z = ctx.tau_ess - d;
        coarse.push(count_n(ctx, z, spec)?);
        doubled.push(count_n(ctx, z, &fine)?);
    }
    Ok(FinitenessReport { k: ctx.k, tau_ess: ctx.tau_ess, deltas: deltas.to_vec(), coarse, doubled })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_at_zero() {
        let c = SystemConfig::new([1.0, 2.0, 3.0], [1.0; 3], true).unwrap();
        let (lo, hi) = three_body_band(TorusPoint::ZERO, &c);
        assert!(lo.abs() < 1e-14);
        // x2 = x3 = pi, x1 = 0 in every component
        assert!((hi - 30.0).abs() < 1e-9);
    }

    #[test]
    fn band_matches_brute_force() {
        let c = SystemConfig::new([1.0, 2.0, 3.0], [1.0; 3], true).unwrap();
        let k = TorusPoint::new([0.4, -1.0, 2.5]);
        let (lo, _) = three_body_band(k, &c);
        // per-component brute force over (x1, x2), x3 = K - x1 - x2
        let n = 400;
        let mut total = 0.0;
        for &kj in &k.coords() {
            let mut best = f64::INFINITY;
            for i in 0..n {
                for j in 0..n {
                    let x1 = -PI + 2.0 * PI * i as f64 / n as f64;
                    let x2 = -PI + 2.0 * PI * j as f64 / n as f64;
                    let v = (1.0 - cos(x1)) + 2.0 * (1.0 - cos(x2)) + 3.0 * (1.0 - cos(kj - x1 - x2));
                    best = best.min(v);
                }
            }
            total += best;
        }
        assert!(lo <= total + 1e-12 && total - lo < 1e-3);
    }

    #[test]
    fn merging() {
        let v = vec![Interval { lo: 2.0, hi: 3.0 }, Interval { lo: 0.0, hi: 1.0 }, Interval { lo: 0.5, hi: 1.5 }];
        let m = merge_intervals(v);
        assert_eq!(m, vec![Interval { lo: 0.0, hi: 1.5 }, Interval { lo: 2.0, hi: 3.0 }]);
    }
}
