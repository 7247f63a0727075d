//! The JSON run configuration.

use std::path::{Path, PathBuf};

use efimov_core::efimov::SobolevGrid;
use efimov_core::quadrature::GradedGridSpec;
use efimov_core::three_body::FaddeevGridSpec;
use efimov_core::two_body::{mu_resonance, DEFAULT_BRANCH_RESOLUTION};
use efimov_core::{PairIndex, SystemConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Coupling of one pair: the resonance value or an explicit number.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coupling {
    Named(CouplingMode),
    Value(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingMode {
    Resonant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Quadrature {
    /// Chebyshev nodes per amplitude axis of the bound-state tables.
    pub branch_resolution: usize,
    /// Grid sizes of the two midpoint routes to the Watson integral.
    pub watson_sizes: Vec<usize>,
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature { branch_resolution: DEFAULT_BRANCH_RESOLUTION, watson_sizes: vec![48, 64, 96, 128] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub panels_per_decade: f64,
    pub radial_order: usize,
    pub n_theta: usize,
    pub n_phi: usize,
    pub far_cells: usize,
    pub far_subsamples: usize,
    pub inner_scale: f64,
    pub inner_floor: f64,
}

impl Default for Grid {
    fn default() -> Self {
        let f = FaddeevGridSpec::default();
        let g = f.graded;
        Grid {
            panels_per_decade: g.panels_per_decade,
            radial_order: g.radial_order,
            n_theta: g.n_theta,
            n_phi: g.n_phi,
            far_cells: g.far_cells,
            far_subsamples: g.far_subsamples,
            inner_scale: f.inner_scale,
            inner_floor: f.inner_floor,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sobolev {
    pub ell_max: usize,
    pub nodes_per_unit: f64,
    pub lambda: f64,
}

impl Default for Sobolev {
    fn default() -> Self {
        let g = SobolevGrid::default();
        Sobolev { ell_max: g.ell_max, nodes_per_unit: g.nodes_per_unit, lambda: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ladders {
    /// Negative energies, increasing.
    pub z: Vec<f64>,
    /// |K| values, increasing.
    pub k: Vec<f64>,
    /// Cutoffs of the limiting operator, increasing.
    pub r: Vec<f64>,
    /// Offsets below tau_ess(K), decreasing.
    pub deltas: Vec<f64>,
    /// Inner radius floor of the Faddeev grid on the z and |K| ladders.
    pub slope_inner_floor: f64,
}

impl Default for Ladders {
    fn default() -> Self {
        Ladders {
            z: (2..=16).map(|m| -(10f64).powf(-(m as f64) / 2.0)).collect(),
            k: (1..=9).rev().map(|m| (10f64).powf(-(m as f64) / 2.0)).collect(),
            r: vec![10.0, 15.0, 20.0, 30.0, 40.0],
            deltas: vec![1e-2, 1e-3, 1e-4, 1e-5],
            slope_inner_floor: 1e-9,
        }
    }
}

/// Momenta visited by the per-point commands.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Momenta {
    pub two_body: Vec<[f64; 3]>,
    pub bands: Vec<[f64; 3]>,
    pub count: Vec<[f64; 3]>,
}

impl Default for Momenta {
    fn default() -> Self {
        Momenta {
            two_body: vec![[0.5, 0.0, 0.0], [1.0, 0.0, 0.0], [0.3, -0.7, 1.2]],
            bands: vec![[0.0; 3], [0.1, 0.0, 0.0], [0.3, 0.0, 0.0]],
            count: vec![[0.0; 3]],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub masses: [f64; 3],
    pub couplings: [Coupling; 3],
    #[serde(default)]
    pub strict_hypothesis: bool,
    #[serde(default)]
    pub quadrature: Quadrature,
    #[serde(default)]
    pub grid: Grid,
    #[serde(default)]
    pub sobolev: Sobolev,
    #[serde(default)]
    pub ladders: Ladders,
    #[serde(default)]
    pub momenta: Momenta,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn default_seed() -> u64 {
    efimov_core::linalg::DEFAULT_SEED
}

fn sorted(v: &[f64], increasing: bool) -> bool {
    v.windows(2).all(|w| if increasing { w[0] < w[1] } else { w[0] > w[1] })
}

impl RunConfig {
    pub fn resonant(masses: [f64; 3]) -> Self {
        RunConfig {
            masses,
            couplings: [Coupling::Named(CouplingMode::Resonant); 3],
            strict_hypothesis: false,
            quadrature: Quadrature::default(),
            grid: Grid::default(),
            sobolev: Sobolev::default(),
            ladders: Ladders::default(),
            momenta: Momenta::default(),
            output_dir: default_output(),
            cache_dir: None,
            seed: default_seed(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let c: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Config(m.to_string()));
        if self.masses.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return bad("masses must be positive");
        }
        for c in &self.couplings {
            if let Coupling::Value(v) = c {
                if !(v.is_finite() && *v >= 0.0) {
                    return bad("explicit couplings must be finite and nonnegative");
                }
            }
        }
        let q = &self.quadrature;
        if q.branch_resolution < 2 || q.watson_sizes.is_empty() || q.watson_sizes.contains(&0) {
            return bad("quadrature resolutions must be positive");
        }
        if !q.watson_sizes.windows(2).all(|w| w[0] < w[1]) {
            return bad("watson_sizes must be increasing");
        }
        let g = &self.grid;
        if g.radial_order == 0 || g.n_theta == 0 || g.n_phi == 0 || g.far_cells == 0 || g.far_subsamples == 0 {
            return bad("grid resolutions must be positive");
        }
        if !(g.panels_per_decade > 0.0 && g.inner_scale > 0.0 && g.inner_floor > 0.0) {
            return bad("grid scales must be positive");
        }
        let s = &self.sobolev;
        if !(s.nodes_per_unit > 0.0 && s.lambda > 0.0) {
            return bad("sobolev settings must be positive");
        }
        let l = &self.ladders;
        if !sorted(&l.z, true) || l.z.iter().any(|&z| z >= 0.0) {
            return bad("z ladder must be negative and increasing");
        }
        if !sorted(&l.k, true) || l.k.iter().any(|&k| k <= 0.0) {
            return bad("|K| ladder must be positive and increasing");
        }
        if !sorted(&l.r, true) || l.r.iter().any(|&r| r <= 0.0) {
            return bad("r ladder must be positive and increasing");
        }
        if l.slope_inner_floor.is_nan() || l.slope_inner_floor <= 0.0 {
            return bad("slope_inner_floor must be positive");
        }
        if !sorted(&l.deltas, false) || l.deltas.iter().any(|&d| d <= 0.0) {
            return bad("delta ladder must be positive and decreasing");
        }
        self.system()?;
        Ok(())
    }

    /// Resonance flag per channel.
    pub fn resonant_channels(&self) -> [bool; 3] {
        self.couplings.map(|c| matches!(c, Coupling::Named(CouplingMode::Resonant)))
    }

    pub fn system(&self) -> Result<SystemConfig, CliError> {
        let base = SystemConfig::resonant(self.masses, self.strict_hypothesis).map_err(|e| CliError::Config(e.to_string()))?;
        let mu = PairIndex::ALL.map(|a| match self.couplings[a.idx()] {
            Coupling::Named(CouplingMode::Resonant) => mu_resonance(a, &base),
            Coupling::Value(v) => v,
        });
        base.with_couplings(mu).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn faddeev_spec(&self) -> FaddeevGridSpec {
        let g = &self.grid;
        FaddeevGridSpec {
            graded: GradedGridSpec {
                panels_per_decade: g.panels_per_decade,
                radial_order: g.radial_order,
                n_theta: g.n_theta,
                n_phi: g.n_phi,
                far_cells: g.far_cells,
                far_subsamples: g.far_subsamples,
                ..GradedGridSpec::default()
            },
            inner_scale: g.inner_scale,
            inner_floor: g.inner_floor,
            seed: self.seed,
        }
    }

    pub fn sobolev_grid(&self) -> SobolevGrid {
        SobolevGrid { ell_max: self.sobolev.ell_max, nodes_per_unit: self.sobolev.nodes_per_unit }
    }

    /// SHA-256 of the configuration with the output and cache locations blanked.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        c.cache_dir = None;
        hex_digest(serde_json::to_string(&c).expect("config serialises").as_bytes())
    }

    pub fn grid_hash(&self) -> String {
        hex_digest(serde_json::to_string(&(&self.grid, self.seed)).expect("grid serialises").as_bytes())
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
