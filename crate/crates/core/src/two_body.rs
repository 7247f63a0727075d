//! The pair operators h_alpha(k): determinant, resonance coupling and the bound-state branch.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::cell::RefCell;
use core::f64::consts::{PI, SQRT_2};

use libm::{acos, cos, pow, sin, sqrt};

use crate::error::{Error, Result};
use crate::green::{resolvent_with, LaplaceRule};
use crate::linalg::bracketed_root;
use crate::model::{amplitudes, PairIndex, SystemConfig, TorusPoint, Vec3};

const CACHE_LIMIT: usize = 1 << 16;
const ROOT_TOL_W: f64 = 1e-12;
const EDGE_TOL: f64 = 1e-10;

/// Chebyshev nodes per amplitude axis used when no resolution is requested.
pub const DEFAULT_BRANCH_RESOLUTION: usize = 14;

/// Resonance coupling (l_beta + l_gamma) / W with W the Watson integral.
pub fn mu_resonance(a: PairIndex, cfg: &SystemConfig) -> f64 {
    cfg.pair_mass(a) / resolvent_with([1.0; 3], 0.0, &LaplaceRule::default())
}

fn delta_amplitudes(mu: f64, base: f64, r: Vec3, z: f64, rule: &LaplaceRule) -> Result<f64> {
    let sum = r[0] + r[1] + r[2];
    let (lo, hi) = (base - sum, base + sum);
    if z <= lo {
        Ok(1.0 - mu * resolvent_with(r, lo - z, rule))
    } else if z >= hi && hi > lo {
        Ok(1.0 + mu * resolvent_with(r, z - hi, rule))
    } else {
        Err(Error::BandInterior { z, lo, hi })
    }
}

/// Fredholm determinant of the pair operator at momentum k and energy z outside the band.
pub fn delta(a: PairIndex, k: TorusPoint, z: f64, cfg: &SystemConfig) -> Result<f64> {
    let r = amplitudes(a, &k.coords(), cfg);
    delta_amplitudes(cfg.mu(a), 3.0 * cfg.pair_mass(a), r, z, &LaplaceRule::default())
}

/// Determinant at depth w below the band bottom, z = E_min(k) - w^2.
pub fn delta_tilde(a: PairIndex, k: TorusPoint, w: f64, cfg: &SystemConfig) -> Result<f64> {
    let r = amplitudes(a, &k.coords(), cfg);
    let emin = 3.0 * cfg.pair_mass(a) - (r[0] + r[1] + r[2]);
    delta_amplitudes(cfg.mu(a), 3.0 * cfg.pair_mass(a), r, emin - w * w, &LaplaceRule::default())
}

/// Bound state below the band given the amplitudes; `None` if Delta(k, E_min) >= 0.
fn bound_state_amplitudes(mu: f64, base: f64, r: Vec3, rule: &LaplaceRule) -> Result<Option<f64>> {
    let sum = r[0] + r[1] + r[2];
    let emin = base - sum;
    let at_edge = 1.0 - mu * resolvent_with(r, 0.0, rule);
    if at_edge >= 0.0 {
        return Ok(None);
    }
    let depth = 10.0 * (2.0 * sum).max(mu);
    let f = |w: f64| Ok(1.0 - mu * resolvent_with(r, w * w, rule));
    let w_hi = sqrt(depth);
    // vanishing amplitudes make G infinite at the edge; start just below it
    let mut w_lo = 0.0;
    if !at_edge.is_finite() {
        w_lo = 1e-3 * ROOT_TOL_W;
        if f(w_lo)? >= 0.0 {
            return Ok(Some(emin - w_lo * w_lo));
        }
    }
    let w = match bracketed_root(f, w_lo, w_hi, ROOT_TOL_W) {
        Ok(w) => w,
        Err(Error::Bracket { .. }) => {
            return Err(Error::Invariant("bound state not bracketed below the band".into()));
        }
        Err(e) => return Err(e),
    };
    Ok(Some(emin - w * w))
}

/// The eigenvalue z_alpha(k) below the band bottom, if it exists.
pub fn bound_state(a: PairIndex, k: TorusPoint, cfg: &SystemConfig) -> Result<Option<f64>> {
    let r = amplitudes(a, &k.coords(), cfg);
    bound_state_amplitudes(cfg.mu(a), 3.0 * cfg.pair_mass(a), r, &LaplaceRule::default())
}

/// Closed-form and numerical slope of Delta~(0, w) at w = 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpansionSlope {
    pub analytic: f64,
    pub finite_difference: f64,
}

impl ExpansionSlope {
    pub fn relative_error(&self) -> f64 {
        (self.finite_difference - self.analytic).abs() / self.analytic.abs()
    }
}

pub fn expansion_slope(a: PairIndex, cfg: &SystemConfig) -> Result<ExpansionSlope> {
    let l = cfg.pair_mass(a);
    let analytic = mu_resonance(a, cfg) / (SQRT_2 * PI * pow(l, 1.5));
    let zero = TorusPoint::ZERO;
    let d0 = delta_tilde(a, zero, 0.0, cfg)?;
    let hs = [1e-2, 5e-3, 2.5e-3];
    let mut q = [0.0; 3];
    for (i, &h) in hs.iter().enumerate() {
        q[i] = (delta_tilde(a, zero, h, cfg)? - d0) / h;
    }
    // quotient = slope + c1 h + c2 h^2
    let rows = hs.map(|h| [1.0, h, h * h]);
    let fd = crate::quadrature::solve3(&rows, &q)[0];
    let out = ExpansionSlope { analytic, finite_difference: fd };
    if out.relative_error() > 0.05 {
        return Err(Error::Invariant(alloc::format!(
            "expansion slope {fd} disagrees with closed form {analytic}"
        )));
    }
    Ok(out)
}

/// Cached evaluator of Delta_alpha(k, z) for one pair.
#[derive(Debug)]
pub struct DeterminantEvaluator {
    alpha: PairIndex,
    cfg: SystemConfig,
    rule: LaplaceRule,
    cache: RefCell<BTreeMap<[u64; 4], f64>>,
}

impl DeterminantEvaluator {
    pub fn new(alpha: PairIndex, cfg: &SystemConfig) -> Self {
        Self::with_rule(alpha, cfg, LaplaceRule::default())
    }

    pub fn with_rule(alpha: PairIndex, cfg: &SystemConfig, rule: LaplaceRule) -> Self {
        DeterminantEvaluator { alpha, cfg: *cfg, rule, cache: RefCell::new(BTreeMap::new()) }
    }

    pub fn alpha(&self) -> PairIndex {
        self.alpha
    }

    pub fn config(&self) -> &SystemConfig {
        &self.cfg
    }

    pub fn rule(&self) -> &LaplaceRule {
        &self.rule
    }

    pub fn cached(&self) -> usize {
        self.cache.borrow().len()
    }

    pub fn delta(&self, k: TorusPoint, z: f64) -> Result<f64> {
        let c = k.coords();
        let key = [c[0].to_bits(), c[1].to_bits(), c[2].to_bits(), z.to_bits()];
        if let Some(v) = self.cache.borrow().get(&key) {
            return Ok(*v);
        }
        let r = amplitudes(self.alpha, &c, &self.cfg);
        let v = delta_amplitudes(self.cfg.mu(self.alpha), 3.0 * self.cfg.pair_mass(self.alpha), r, z, &self.rule)?;
        let mut cache = self.cache.borrow_mut();
        if cache.len() >= CACHE_LIMIT {
            cache.clear();
        }
        cache.insert(key, v);
        Ok(v)
    }

    pub fn delta_tilde(&self, k: TorusPoint, w: f64) -> Result<f64> {
        let r = amplitudes(self.alpha, &k.coords(), &self.cfg);
        let emin = 3.0 * self.cfg.pair_mass(self.alpha) - (r[0] + r[1] + r[2]);
        self.delta(k, emin - w * w)
    }

    pub fn bound_state(&self, k: TorusPoint) -> Result<Option<f64>> {
        let r = amplitudes(self.alpha, &k.coords(), &self.cfg);
        bound_state_amplitudes(self.cfg.mu(self.alpha), 3.0 * self.cfg.pair_mass(self.alpha), r, &self.rule)
    }
}

/// Table of z_alpha(k) over the amplitude cube [|l_b - l_g|, l_b + l_g]^3.
///
/// The determinant depends on k only through the three amplitudes, so the branch is a
/// symmetric function of them; it is sampled on a Chebyshev tensor grid and evaluated by
/// barycentric interpolation. A table is incomplete when some node has no bound state;
/// evaluation then falls back to a direct root solve.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundStateBranch {
    alpha: PairIndex,
    cfg: SystemConfig,
    n: usize,
    lo: f64,
    hi: f64,
    nodes: Vec<f64>,
    bary: Vec<f64>,
    values: Vec<f64>,
    complete: bool,
}

fn chebyshev_nodes(n: usize, lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
    let mut x = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    for i in 0..n {
        let th = (2 * i + 1) as f64 * PI / (2 * n) as f64;
        x.push(0.5 * (lo + hi) + 0.5 * (hi - lo) * cos(th));
        w.push(if i % 2 == 0 { sin(th) } else { -sin(th) });
    }
    (x, w)
}

impl BoundStateBranch {
    /// Builds a table from stored values (row-major over node triples, NaN where no bound state).
    pub fn from_values(alpha: PairIndex, cfg: &SystemConfig, n: usize, values: Vec<f64>) -> Result<Self> {
        if n < 2 || values.len() != n * n * n {
            return Err(Error::Config("branch table size mismatch".into()));
        }
        let (b, g) = alpha.complement();
        let l = cfg.masses();
        let (lo, hi) = ((l[b] - l[g]).abs(), l[b] + l[g]);
        let (nodes, bary) = chebyshev_nodes(n, lo, hi);
        let complete = values.iter().all(|v| v.is_finite());
        Ok(BoundStateBranch { alpha, cfg: *cfg, n, lo, hi, nodes, bary, values, complete })
    }

    pub fn alpha(&self) -> PairIndex {
        self.alpha
    }

    pub fn config(&self) -> &SystemConfig {
        &self.cfg
    }

    pub fn resolution(&self) -> usize {
        self.n
    }

    pub fn is_complete(&self) -> bool {
        self.complete
    }

    /// Amplitude nodes along one axis.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Momentum component in [0, pi] whose amplitude equals `r`.
    pub fn momentum_of_amplitude(&self, r: f64) -> f64 {
        let (b, g) = self.alpha.complement();
        let l = self.cfg.masses();
        let c = (r * r - l[b] * l[b] - l[g] * l[g]) / (2.0 * l[b] * l[g]);
        acos(c.clamp(-1.0, 1.0))
    }

    /// Node momenta for the table row `idx`.
    pub fn node_momentum(&self, idx: usize) -> Vec3 {
        let n = self.n;
        let (i, j, k) = (idx / (n * n), (idx / n) % n, idx % n);
        [
            self.momentum_of_amplitude(self.nodes[i]),
            self.momentum_of_amplitude(self.nodes[j]),
            self.momentum_of_amplitude(self.nodes[k]),
        ]
    }

    fn axis_weights(&self, x: f64, out: &mut [f64]) {
        for (i, &xi) in self.nodes.iter().enumerate() {
            if x == xi {
                out.iter_mut().for_each(|v| *v = 0.0);
                out[i] = 1.0;
                return;
            }
        }
        let mut s = 0.0;
        for i in 0..self.n {
            out[i] = self.bary[i] / (x - self.nodes[i]);
            s += out[i];
        }
        out.iter_mut().for_each(|v| *v /= s);
    }

    fn interpolate(&self, r: Vec3) -> f64 {
        let n = self.n;
        let mut wx = vec![0.0; n];
        let mut wy = vec![0.0; n];
        let mut wz = vec![0.0; n];
        self.axis_weights(r[0].clamp(self.lo, self.hi), &mut wx);
        self.axis_weights(r[1].clamp(self.lo, self.hi), &mut wy);
        self.axis_weights(r[2].clamp(self.lo, self.hi), &mut wz);
        let mut acc = 0.0;
        for i in 0..n {
            if wx[i] == 0.0 {
                continue;
            }
            let mut ai = 0.0;
            for j in 0..n {
                if wy[j] == 0.0 {
                    continue;
                }
                let row = &self.values[(i * n + j) * n..(i * n + j + 1) * n];
                let aj: f64 = row.iter().zip(&wz).map(|(v, w)| v * w).sum();
                ai += wy[j] * aj;
            }
            acc += wx[i] * ai;
        }
        acc
    }

    /// z_alpha(k), with z_alpha(0) = 0 under resonance coupling.
    pub fn value(&self, k: TorusPoint) -> Result<Option<f64>> {
        let r = amplitudes(self.alpha, &k.coords(), &self.cfg);
        if self.complete {
            return Ok(Some(self.interpolate(r)));
        }
        self.direct(k)
    }

    /// Direct root solve, bypassing the table. Where the determinant vanishes at the band
    /// bottom the branch is continued by the band edge itself.
    pub fn direct(&self, k: TorusPoint) -> Result<Option<f64>> {
        let r = amplitudes(self.alpha, &k.coords(), &self.cfg);
        let base = 3.0 * self.cfg.pair_mass(self.alpha);
        let mu = self.cfg.mu(self.alpha);
        let rule = LaplaceRule::default();
        match bound_state_amplitudes(mu, base, r, &rule)? {
            Some(z) => Ok(Some(z)),
            None => {
                let edge = 1.0 - mu * resolvent_with(r, 0.0, &rule);
                Ok((edge.abs() <= EDGE_TOL).then(|| base - (r[0] + r[1] + r[2])))
            }
        }
    }
}

/// Tabulates the bound-state branch with `n` Chebyshev nodes per amplitude axis.
pub fn tabulate_branch(a: PairIndex, cfg: &SystemConfig, n: usize) -> Result<BoundStateBranch> {
    if n < 2 {
        return Err(Error::Config("branch resolution must be at least 2".into()));
    }
    let (b, g) = a.complement();
    let l = cfg.masses();
    let (lo, hi) = ((l[b] - l[g]).abs(), l[b] + l[g]);
    let (nodes, _) = chebyshev_nodes(n, lo, hi);
    let mut values = vec![f64::NAN; n * n * n];
    let rule = LaplaceRule::default();
    let base = 3.0 * cfg.pair_mass(a);
    for i in 0..n {
        for j in i..n {
            for k in j..n {
                let r = [nodes[i], nodes[j], nodes[k]];
                let z = bound_state_amplitudes(cfg.mu(a), base, r, &rule)?.unwrap_or(f64::NAN);
                for (x, y, w) in [(i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)] {
                    values[(x * n + y) * n + w] = z;
                }
            }
        }
    }
    BoundStateBranch::from_values(a, cfg, n, values)
}
