//! The limiting operator S_r on (0, r) x S^2 and the counting slopes that define U_0.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use libm::{cosh, fabs, log, pow, sqrt};

use crate::error::{Error, Result};
use crate::linalg::{count_above, SymmetricMatrix};
use crate::model::{PairIndex, SystemConfig, TorusPoint};
use crate::quadrature::{gauss_legendre, legendre};
use crate::three_body::{count_n, FaddeevGridSpec, FiberContext};
use crate::two_body::BoundStateBranch;

const ANGULAR_ORDER: usize = 64;
const TAIL_HALF_WIDTH: f64 = 60.0;
const TAIL_STEP: f64 = 0.02;

/// Coefficients of one off-diagonal entry of S_r.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairCoefficients {
    pub u: f64,
    pub r: f64,
    pub s: f64,
    /// Whether both channels are resonant.
    pub k: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SobolevModel {
    coeffs: [[PairCoefficients; 3]; 3],
    resonant: [bool; 3],
}

fn pair_masses(cfg: &SystemConfig, a: usize, b: usize) -> (f64, f64, f64) {
    let l = cfg.masses();
    let g = 3 - a - b;
    (l[a] + l[g], l[b] + l[g], l[g])
}

/// Coefficients with l_{alpha gamma} read as l_alpha + l_gamma.
pub fn sobolev_coefficients(cfg: &SystemConfig, resonant: [bool; 3]) -> Result<SobolevModel> {
    let zero = PairCoefficients { u: 0.0, r: 0.0, s: 0.0, k: false };
    let mut coeffs = [[zero; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            if a == b {
                continue;
            }
            let (lag, lbg, lg) = pair_masses(cfg, a, b);
            let na = cfg.n(PairIndex::from_zero_based(a));
            let nb = cfg.n(PairIndex::from_zero_based(b));
            let k = resonant[a] && resonant[b];
            let s = lg / sqrt(lag * lbg);
            if !(s < 1.0) {
                return Err(Error::Invariant(alloc::format!("kernel parameter s = {s} is not below 1")));
            }
            let u = if k { pow(lag * lbg / (na * nb), 0.25) } else { 0.0 };
            coeffs[a][b] = PairCoefficients { u, r: 0.5 * log(lag / lbg), s, k };
        }
    }
    Ok(SobolevModel { coeffs, resonant })
}

/// u_{alpha beta} recovered from the prefactor D = (l_ag l_bg)^{3/4} / (2 pi^2) of the
/// small-momentum kernel after the dilation p = e^x xi.
pub fn dilation_coefficient(cfg: &SystemConfig, a: PairIndex, b: PairIndex) -> f64 {
    let (lag, lbg, _) = pair_masses(cfg, a.idx(), b.idx());
    let d = pow(lag * lbg, 0.75) / (2.0 * PI * PI);
    let c = d * pow(cfg.n(a) * cfg.n(b), -0.25);
    // lbg e^{-y} + lag e^{y} = 2 sqrt(lag lbg) cosh(y + r)
    4.0 * PI * PI * c / (2.0 * sqrt(lag * lbg))
}

impl SobolevModel {
    pub fn pair(&self, a: PairIndex, b: PairIndex) -> &PairCoefficients {
        &self.coeffs[a.idx()][b.idx()]
    }

    pub fn resonant(&self) -> [bool; 3] {
        self.resonant
    }

    /// True when every off-diagonal entry vanishes.
    pub fn is_trivial(&self) -> bool {
        self.coeffs.iter().flatten().all(|c| !c.k)
    }

    /// S_{alpha beta}(y; t).
    pub fn kernel(&self, a: PairIndex, b: PairIndex, y: f64, t: f64) -> f64 {
        if a == b {
            return 0.0;
        }
        let c = self.pair(a, b);
        c.u / (4.0 * PI * PI * (cosh(y + c.r) + c.s * t))
    }
}

/// The l-th Funk-Hecke component 2 pi \int S(y; t) P_l(t) dt for all channel pairs.
#[derive(Clone, Debug)]
pub struct SectorSymbol {
    ell: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl SectorSymbol {
    pub fn new(ell: usize) -> Self {
        let (nodes, w) = gauss_legendre(ANGULAR_ORDER.max(ell + 2));
        let weights = nodes.iter().zip(&w).map(|(&t, &wt)| 2.0 * PI * wt * legendre(ell, t)).collect();
        SectorSymbol { ell, nodes, weights }
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn eval(&self, model: &SobolevModel, a: PairIndex, b: PairIndex, y: f64) -> f64 {
        if a == b || !model.pair(a, b).k {
            return 0.0;
        }
        self.nodes.iter().zip(&self.weights).map(|(&t, &w)| w * model.kernel(a, b, y, t)).sum()
    }

    /// max_alpha sum_beta \int_R |S^{(l)}_{alpha beta}(y)| dy, a bound on the sector norm.
    pub fn norm_bound(&self, model: &SobolevModel) -> f64 {
        let n = (2.0 * TAIL_HALF_WIDTH / TAIL_STEP) as usize;
        let mut best: f64 = 0.0;
        for a in PairIndex::ALL {
            let mut row = 0.0;
            for b in PairIndex::ALL {
                if a == b || !model.pair(a, b).k {
                    continue;
                }
                let mut acc = 0.0;
                for i in 0..=n {
                    let y = -TAIL_HALF_WIDTH + TAIL_STEP * i as f64;
                    let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                    acc += w * fabs(self.eval(model, a, b, y));
                }
                row += acc * TAIL_STEP;
            }
            best = best.max(row);
        }
        best
    }
}

/// `sector_symbol(l, a, b, model)(y)` as a one-off evaluation.
pub fn sector_symbol(ell: usize, a: PairIndex, b: PairIndex, model: &SobolevModel, y: f64) -> f64 {
    SectorSymbol::new(ell).eval(model, a, b, y)
}

/// Nystrom matrix of the l-th sector on (0, r) with `n` midpoint nodes per channel.
pub fn sector_matrix(sym: &SectorSymbol, model: &SobolevModel, r: f64, n: usize) -> SymmetricMatrix {
    let h = r / n as f64;
    // values at the 2n - 1 distinct differences (i - j) h
    let mut diffs = [[Vec::new(), Vec::new(), Vec::new()], [Vec::new(), Vec::new(), Vec::new()], [Vec::new(), Vec::new(), Vec::new()]];
    for a in PairIndex::ALL {
        for b in PairIndex::ALL {
            diffs[a.idx()][b.idx()] = (0..2 * n - 1).map(|d| h * sym.eval(model, a, b, (d as f64 - (n - 1) as f64) * h)).collect();
        }
    }
    SymmetricMatrix::from_lower(3 * n, |p, q| {
        let (a, i) = (p / n, p % n);
        let (b, j) = (q / n, q % n);
        diffs[a][b][i + n - 1 - j]
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SobolevCount {
    pub count: usize,
    /// Eigenvalues above lambda per sector, without the 2l + 1 multiplicity.
    pub per_sector: Vec<usize>,
    /// Norm bounds of the sectors visited.
    pub bounds: Vec<f64>,
}

/// n(lambda, S_r): sectors are added until their norm bound drops below lambda.
pub fn count_sobolev(lambda: f64, r: f64, model: &SobolevModel, ell_max: usize, n: usize) -> Result<SobolevCount> {
    if !(lambda > 0.0 && r > 0.0) || n == 0 {
        return Err(Error::Config("count_sobolev needs lambda > 0, r > 0, n > 0".into()));
    }
    let mut out = SobolevCount { count: 0, per_sector: vec![], bounds: vec![] };
    for ell in 0..=ell_max {
        let sym = SectorSymbol::new(ell);
        let bound = sym.norm_bound(model);
        out.bounds.push(bound);
        if bound < lambda {
            return Ok(out);
        }
        let m = sector_matrix(&sym, model, r, n);
        let c = count_above(&m, lambda)?;
        out.per_sector.push(c);
        out.count += (2 * ell + 1) * c;
    }
    Err(Error::Truncation { l: ell_max, bound: *out.bounds.last().unwrap_or(&f64::INFINITY) })
}

/// Least-squares line through (abscissa, count) pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct SlopeFit {
    pub abscissae: Vec<f64>,
    pub counts: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    /// Euclidean norm of the residuals.
    pub residual: f64,
}

pub fn fit_slope(abscissae: &[f64], counts: &[f64]) -> Result<SlopeFit> {
    let n = abscissae.len();
    if n < 4 || counts.len() != n {
        return Err(Error::Config("a slope fit needs at least four points".into()));
    }
    if abscissae.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Config("slope-fit abscissae must be strictly increasing".into()));
    }
    let nf = n as f64;
    let mx = abscissae.iter().sum::<f64>() / nf;
    let my = counts.iter().sum::<f64>() / nf;
    let sxx: f64 = abscissae.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = abscissae.iter().zip(counts).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = sqrt(abscissae.iter().zip(counts).map(|(x, y)| {
        let e = y - intercept - slope * x;
        e * e
    }).sum());
    Ok(SlopeFit { abscissae: abscissae.to_vec(), counts: counts.to_vec(), slope, intercept, residual })
}

/// Settings for the Sobolev-operator route.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SobolevGrid {
    pub ell_max: usize,
    /// Nystrom nodes per unit length of (0, r).
    pub nodes_per_unit: f64,
}

impl Default for SobolevGrid {
    fn default() -> Self {
        SobolevGrid { ell_max: 40, nodes_per_unit: 15.0 }
    }
}

impl SobolevGrid {
    pub fn nodes(&self, r: f64) -> usize {
        libm::ceil(self.nodes_per_unit * r).max(1.0) as usize
    }
}

/// U(lambda) as the slope of n(lambda, S_r) against 2r; the abscissae of the fit are 2r.
pub fn estimate_u(lambda: f64, model: &SobolevModel, ladder: &[f64], grid: &SobolevGrid) -> Result<SlopeFit> {
    if ladder.len() < 4 || ladder[ladder.len() - 1] < 4.0 * ladder[0] {
        return Err(Error::Config("r ladder needs four points spanning a factor of four".into()));
    }
    let mut xs = Vec::with_capacity(ladder.len());
    let mut ys = Vec::with_capacity(ladder.len());
    for &r in ladder {
        let c = count_sobolev(lambda, r, model, grid.ell_max, grid.nodes(r))?;
        xs.push(2.0 * r);
        ys.push(c.count as f64);
    }
    let fit = fit_slope(&xs, &ys)?;
    if !model.is_trivial() && !(fit.slope > 0.0) {
        return Err(Error::Invariant(alloc::format!("nonpositive counting slope {}", fit.slope)));
    }
    Ok(fit)
}

/// The cutoff r = |log(|K|^2 / (2M) + |z|)| / 2.
pub fn cutoff_r(k: TorusPoint, z: f64, cfg: &SystemConfig) -> f64 {
    let kk = k.norm();
    0.5 * fabs(log(kk * kk / (2.0 * cfg.big_m()) + fabs(z)))
}

/// Slopes of N(0, z) against |log|z|| and of N(K, 0) against 2|log|K||, with K along the
/// first axis.
pub fn fit_counting_slopes(
    cfg: &SystemConfig,
    branches: &[BoundStateBranch; 3],
    z_ladder: &[f64],
    k_ladder: &[f64],
    spec: &FaddeevGridSpec,
) -> Result<(SlopeFit, SlopeFit)> {
    let ctx0 = FiberContext::new(cfg, TorusPoint::ZERO, branches)?;
    let mut zs: Vec<(f64, f64)> = Vec::new();
    for &z in z_ladder {
        if !(z < 0.0) {
            return Err(Error::Config("z ladder must be negative".into()));
        }
        zs.push((fabs(log(-z)), count_n(&ctx0, z, spec)? as f64));
    }
    zs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut ks: Vec<(f64, f64)> = Vec::new();
    for &k in k_ladder {
        if !(k > 0.0) {
            return Err(Error::Config("|K| ladder must be positive".into()));
        }
        let ctx = FiberContext::new(cfg, TorusPoint::new([k, 0.0, 0.0]), branches)?;
        ks.push((2.0 * fabs(log(k)), count_n(&ctx, 0.0, spec)? as f64));
    }
    ks.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (zx, zy): (Vec<f64>, Vec<f64>) = zs.into_iter().unzip();
    let (kx, ky): (Vec<f64>, Vec<f64>) = ks.into_iter().unzip();
    Ok((fit_slope(&zx, &zy)?, fit_slope(&kx, &ky)?))
}
