//! Masses, couplings, dispersion laws and the relative-coordinate maps.

use core::f64::consts::PI;
use core::fmt;

use libm::{atan2, cos, fmod, sqrt};

use crate::error::{Error, Result};

const TAU: f64 = 2.0 * PI;

pub type Vec3 = [f64; 3];

/// Reduces an angle to the half-open interval (-pi, pi].
pub fn reduce_angle(x: f64) -> f64 {
    let mut y = fmod(x, TAU);
    if y <= -PI {
        y += TAU;
    } else if y > PI {
        y -= TAU;
    }
    y
}

/// A point of the torus (-pi, pi]^3.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct TorusPoint([f64; 3]);

impl TorusPoint {
    pub const ZERO: TorusPoint = TorusPoint([0.0; 3]);

    pub fn new(p: Vec3) -> Self {
        TorusPoint([reduce_angle(p[0]), reduce_angle(p[1]), reduce_angle(p[2])])
    }

    pub fn coords(&self) -> Vec3 {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn neg(&self) -> Self {
        TorusPoint::new([-self.0[0], -self.0[1], -self.0[2]])
    }
}

impl From<Vec3> for TorusPoint {
    fn from(p: Vec3) -> Self {
        TorusPoint::new(p)
    }
}

pub(crate) fn norm(p: &Vec3) -> f64 {
    sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2])
}

pub(crate) fn add(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub(crate) fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn scale(c: f64, a: &Vec3) -> Vec3 {
    [c * a[0], c * a[1], c * a[2]]
}

/// Particle label alpha in {1, 2, 3}; beta and gamma are the other two in cyclic order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PairIndex(u8);

impl PairIndex {
    pub const ALL: [PairIndex; 3] = [PairIndex(0), PairIndex(1), PairIndex(2)];

    /// Builds the index from the one-based label used in the text.
    pub fn new(alpha: usize) -> Result<Self> {
        if (1..=3).contains(&alpha) {
            Ok(PairIndex((alpha - 1) as u8))
        } else {
            Err(Error::Config(alloc::format!("pair index {alpha} outside 1..=3")))
        }
    }

    pub fn from_zero_based(i: usize) -> Self {
        assert!(i < 3, "pair index out of range");
        PairIndex(i as u8)
    }

    /// Zero-based position.
    pub fn idx(self) -> usize {
        self.0 as usize
    }

    pub fn label(self) -> usize {
        self.0 as usize + 1
    }

    /// Zero-based (beta, gamma).
    pub fn complement(self) -> (usize, usize) {
        match self.0 {
            0 => (1, 2),
            1 => (2, 0),
            _ => (0, 1),
        }
    }
}

impl fmt::Display for PairIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

/// Inverse-mass parameters, couplings and the kinematic coefficients derived from them.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SystemConfig {
    l: Vec3,
    mu: Vec3,
    strict: bool,
    big_m: f64,
    m: Vec3,
    n: Vec3,
    l_bg: Vec3,
    l_gb: Vec3,
}

impl SystemConfig {
    pub fn new(l: Vec3, mu: Vec3, strict_hypothesis: bool) -> Result<Self> {
        for a in 0..3 {
            if !(l[a] > 0.0 && l[a].is_finite()) {
                return Err(Error::Config(alloc::format!("l{} = {} must be positive", a + 1, l[a])));
            }
            if !(mu[a] > 0.0 && mu[a].is_finite()) {
                return Err(Error::Config(alloc::format!("mu{} = {} must be positive", a + 1, mu[a])));
            }
        }
        if strict_hypothesis && (l[0] == l[1] || l[1] == l[2] || l[0] == l[2]) {
            return Err(Error::Config("strict hypothesis requires pairwise distinct l".into()));
        }
        let big_m = 1.0 / l[0] + 1.0 / l[1] + 1.0 / l[2];
        let mut m = [0.0; 3];
        let mut n = [0.0; 3];
        let mut l_bg = [0.0; 3];
        let mut l_gb = [0.0; 3];
        let pairs = l[0] * l[1] + l[0] * l[2] + l[1] * l[2];
        for a in 0..3 {
            let (b, g) = PairIndex(a as u8).complement();
            m[a] = 1.0 / (l[a] * big_m);
            n[a] = pairs / (l[b] + l[g]);
            l_bg[a] = l[b] / (l[b] + l[g]);
            l_gb[a] = l[g] / (l[b] + l[g]);
        }
        Ok(SystemConfig { l, mu, strict: strict_hypothesis, big_m, m, n, l_bg, l_gb })
    }

    /// Configuration with every coupling at its zero-energy resonance value.
    pub fn resonant(l: Vec3, strict_hypothesis: bool) -> Result<Self> {
        let probe = SystemConfig::new(l, [1.0; 3], strict_hypothesis)?;
        let mu = PairIndex::ALL.map(|a| crate::two_body::mu_resonance(a, &probe));
        SystemConfig::new(l, mu, strict_hypothesis)
    }

    pub fn with_couplings(&self, mu: Vec3) -> Result<Self> {
        SystemConfig::new(self.l, mu, self.strict)
    }

    pub fn l(&self, a: PairIndex) -> f64 {
        self.l[a.idx()]
    }

    pub fn mu(&self, a: PairIndex) -> f64 {
        self.mu[a.idx()]
    }

    pub fn masses(&self) -> Vec3 {
        self.l
    }

    pub fn couplings(&self) -> Vec3 {
        self.mu
    }

    pub fn strict_hypothesis(&self) -> bool {
        self.strict
    }

    /// Sum of the reciprocal l's.
    pub fn big_m(&self) -> f64 {
        self.big_m
    }

    /// Mass fraction m_alpha; the three sum to one.
    pub fn m(&self, a: PairIndex) -> f64 {
        self.m[a.idx()]
    }

    pub fn n(&self, a: PairIndex) -> f64 {
        self.n[a.idx()]
    }

    /// l_beta / (l_beta + l_gamma) for the pair opposite alpha.
    pub fn l_bg(&self, a: PairIndex) -> f64 {
        self.l_bg[a.idx()]
    }

    /// l_gamma / (l_beta + l_gamma) for the pair opposite alpha.
    pub fn l_gb(&self, a: PairIndex) -> f64 {
        self.l_gb[a.idx()]
    }

    /// l_beta + l_gamma.
    pub fn pair_mass(&self, a: PairIndex) -> f64 {
        let (b, g) = a.complement();
        self.l[b] + self.l[g]
    }

    pub fn has_equal_masses(&self) -> bool {
        self.l[0] == self.l[1] || self.l[1] == self.l[2] || self.l[0] == self.l[2]
    }
}

pub(crate) fn epsilon_raw(p: &Vec3) -> f64 {
    (1.0 - cos(p[0])) + (1.0 - cos(p[1])) + (1.0 - cos(p[2]))
}

/// Lattice Laplacian symbol, sum of (1 - cos p_i).
pub fn epsilon(p: TorusPoint) -> f64 {
    epsilon_raw(&p.0)
}

pub fn epsilon_alpha(a: PairIndex, p: TorusPoint, cfg: &SystemConfig) -> f64 {
    cfg.l(a) * epsilon(p)
}

/// Relative-motion dispersion of the pair opposite alpha at pair momentum k.
pub fn pair_dispersion(a: PairIndex, k: TorusPoint, q: TorusPoint, cfg: &SystemConfig) -> f64 {
    let (b, g) = a.complement();
    let k = k.0;
    let q = q.0;
    let x = add(&scale(cfg.l_gb(a), &k), &q);
    let y = sub(&scale(cfg.l_bg(a), &k), &q);
    cfg.l[b] * epsilon_raw(&x) + cfg.l[g] * epsilon_raw(&y)
}

/// Momenta (k1, k2, k3) from the alpha-coordinates (K, q, p), without reduction.
pub fn inverse_coordinate_map_raw(a: PairIndex, big_k: &Vec3, q: &Vec3, p: &Vec3, cfg: &SystemConfig) -> [Vec3; 3] {
    let (b, g) = a.complement();
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        out[a.idx()][i] = cfg.m[a.idx()] * big_k[i] - p[i];
        out[b][i] = cfg.m[b] * big_k[i] + cfg.l_gb(a) * p[i] + q[i];
        out[g][i] = cfg.m[g] * big_k[i] + cfg.l_bg(a) * p[i] - q[i];
    }
    out
}

pub fn inverse_coordinate_map(a: PairIndex, big_k: TorusPoint, q: TorusPoint, p: TorusPoint, cfg: &SystemConfig) -> [TorusPoint; 3] {
    inverse_coordinate_map_raw(a, &big_k.0, &q.0, &p.0, cfg).map(TorusPoint::new)
}

/// (q, p) from the unreduced momenta; the inverse of [`inverse_coordinate_map_raw`].
pub fn forward_coordinate_map_raw(a: PairIndex, k: &[Vec3; 3], cfg: &SystemConfig) -> (Vec3, Vec3) {
    let (b, g) = a.complement();
    let ai = a.idx();
    let mut q = [0.0; 3];
    let mut p = [0.0; 3];
    for i in 0..3 {
        q[i] = cfg.l_bg(a) * k[b][i] - cfg.l_gb(a) * k[g][i];
        p[i] = cfg.m[ai] * (k[b][i] + k[g][i]) - (cfg.m[b] + cfg.m[g]) * k[ai][i];
    }
    (q, p)
}

/// Kinetic energy of three particles written in the alpha-coordinates.
pub fn three_body_symbol(a: PairIndex, big_k: TorusPoint, q: TorusPoint, p: TorusPoint, cfg: &SystemConfig) -> f64 {
    let k = inverse_coordinate_map_raw(a, &big_k.0, &q.0, &p.0, cfg);
    cfg.l[0] * epsilon_raw(&k[0]) + cfg.l[1] * epsilon_raw(&k[1]) + cfg.l[2] * epsilon_raw(&k[2])
}

/// Amplitude r_alpha(k) of one component of the pair momentum.
pub(crate) fn amplitude(lb: f64, lg: f64, k: f64) -> f64 {
    let v = lb * lb + lg * lg + 2.0 * lb * lg * cos(k);
    if v > 0.0 {
        sqrt(v)
    } else {
        0.0
    }
}

pub(crate) fn amplitudes(a: PairIndex, k: &Vec3, cfg: &SystemConfig) -> Vec3 {
    let (b, g) = a.complement();
    let (lb, lg) = (cfg.l[b], cfg.l[g]);
    [amplitude(lb, lg, k[0]), amplitude(lb, lg, k[1]), amplitude(lb, lg, k[2])]
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MinimumPoint {
    pub p: TorusPoint,
    pub r: Vec3,
}

/// Minimiser of `pair_dispersion(a, k, .)` together with the three amplitudes.
///
/// A component whose amplitude vanishes (equal l_beta, l_gamma at k_j = pi) leaves the
/// dispersion flat in that direction; the component is then reported as 0.
pub fn minimum_point(a: PairIndex, k: TorusPoint, cfg: &SystemConfig) -> MinimumPoint {
    let (b, g) = a.complement();
    let (lb, lg) = (cfg.l[b], cfg.l[g]);
    let (cb, cg) = (cfg.l_gb(a), cfg.l_bg(a));
    let r = amplitudes(a, &k.0, cfg);
    let mut p = [0.0; 3];
    for j in 0..3 {
        let kj = k.0[j];
        let aa = lb * cos(cb * kj) + lg * cos(cg * kj);
        let bb = lb * libm::sin(cb * kj) - lg * libm::sin(cg * kj);
        p[j] = if r[j] > 1e-14 * (lb + lg) { atan2(-bb, aa) } else { 0.0 };
    }
    MinimumPoint { p: TorusPoint::new(p), r }
}

/// Bottom and top of the continuous spectrum of the pair operator at momentum k.
pub fn pair_band_edges(a: PairIndex, k: TorusPoint, cfg: &SystemConfig) -> (f64, f64) {
    let r = amplitudes(a, &k.0, cfg);
    let base = 3.0 * cfg.pair_mass(a);
    let sum = r[0] + r[1] + r[2];
    (base - sum, base + sum)
}
