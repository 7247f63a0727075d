//! The five experiments. Each writes its files under the output directory and returns
//! their paths.

use std::path::{Path, PathBuf};

use efimov_core::efimov::{cutoff_r, estimate_u, fit_counting_slopes, sobolev_coefficients, SlopeFit};
use efimov_core::model::pair_band_edges;
use efimov_core::quadrature::{integrate_inverse_epsilon, WatsonMethod};
use efimov_core::three_body::{count_n, essential_spectrum, FiberContext};
use efimov_core::two_body::{bound_state, delta, mu_resonance, BoundStateBranch};
use efimov_core::{PairIndex, SystemConfig, TorusPoint};
use serde::Serialize;

use crate::cache;
use crate::config::RunConfig;
use crate::error::CliError;
use crate::report::{num, opt, write_json, CsvReport};

/// Agreement tolerance between the three routes to U_0.
pub const ROUTE_TOLERANCE: f64 = 0.3;
const WATSON_TOL: f64 = 1e-4;

pub struct Run {
    pub config: RunConfig,
    pub system: SystemConfig,
    pub out: PathBuf,
    pub cache: Option<PathBuf>,
    pub hash: String,
}

impl Run {
    pub fn new(config: RunConfig, out: Option<&Path>, cache_flag: Option<&Path>) -> Result<Self, CliError> {
        config.validate()?;
        let system = config.system()?;
        if system.has_equal_masses() {
            log::warn!("equal masses: the distinct-mass hypothesis does not hold");
        }
        let out = out.map(Path::to_path_buf).unwrap_or_else(|| config.output_dir.clone());
        let cache = cache::resolve_dir(cache_flag, config.cache_dir.as_deref());
        let hash = config.hash();
        Ok(Run { config, system, out, cache, hash })
    }

    fn branches(&self) -> Result<[BoundStateBranch; 3], CliError> {
        cache::branches(&self.system, self.config.quadrature.branch_resolution, self.cache.as_deref())
    }

    fn csv(&self, name: &str, header: &[&str]) -> Result<CsvReport, CliError> {
        CsvReport::create(&self.out.join(name), &self.hash, header)
    }
}

#[derive(Debug, Serialize)]
pub struct WatsonSummary {
    pub laplace: f64,
    pub shifted: f64,
    pub shifted_spread: f64,
    pub subtraction: f64,
    pub subtraction_spread: f64,
}

#[derive(Debug, Serialize)]
pub struct ResonanceSummary {
    pub config_hash: String,
    pub watson: WatsonSummary,
    pub mu0: [f64; 3],
    pub delta_at_origin: [f64; 3],
}

pub fn resonance(run: &Run) -> Result<Vec<PathBuf>, CliError> {
    let sizes = &run.config.quadrature.watson_sizes;
    let laplace = integrate_inverse_epsilon(WatsonMethod::Laplace, sizes, WATSON_TOL)?;
    let shifted = integrate_inverse_epsilon(WatsonMethod::ShiftedMidpoint, sizes, WATSON_TOL)?;
    let sub = integrate_inverse_epsilon(WatsonMethod::Subtraction, sizes, WATSON_TOL)?;
    let base = SystemConfig::resonant(run.system.masses(), false)?;
    let mu0 = PairIndex::ALL.map(|a| mu_resonance(a, &base));
    let mut d0 = [0.0; 3];
    let mut csv = run.csv("resonance.csv", &["alpha", "pair_mass", "mu0", "delta_at_origin"])?;
    for a in PairIndex::ALL {
        d0[a.idx()] = delta(a, TorusPoint::ZERO, 0.0, &base)?;
        csv.row([a.label().to_string(), num(base.pair_mass(a)), num(mu0[a.idx()]), num(d0[a.idx()])])?;
    }
    let summary = ResonanceSummary {
        config_hash: run.hash.clone(),
        watson: WatsonSummary {
            laplace: laplace.value,
            shifted: shifted.value,
            shifted_spread: shifted.spread,
            subtraction: sub.value,
            subtraction_spread: sub.spread,
        },
        mu0,
        delta_at_origin: d0,
    };
    for a in PairIndex::ALL {
        println!("mu0[{a}] = {:.10}", mu0[a.idx()]);
    }
    Ok(vec![csv.finish()?, write_json(&run.out.join("resonance.json"), &summary)?])
}

pub fn two_body(run: &Run) -> Result<Vec<PathBuf>, CliError> {
    let cfg = &run.system;
    let resonant = run.config.resonant_channels();
    let mut csv = run.csv(
        "two_body.csv",
        &["alpha", "k1", "k2", "k3", "e_min", "e_max", "z", "delta_at_zero", "delta_at_edge"],
    )?;
    for &k in &run.config.momenta.two_body {
        let kp = TorusPoint::new(k);
        for a in PairIndex::ALL {
            let (lo, hi) = pair_band_edges(a, kp, cfg);
            let z = bound_state(a, kp, cfg)?;
            let d0 = delta(a, kp, 0.0, cfg)?;
            let de = delta(a, kp, lo, cfg)?;
            if resonant[a.idx()] && kp.norm() > 0.0 && !(d0 > 0.0 && de < 0.0) {
                return Err(CliError::Invariant(format!(
                    "sign pattern violated for channel {a} at k = {k:?}: delta(k, 0) = {d0}, delta(k, E_min) = {de}"
                )));
            }
            let kc = kp.coords();
            csv.row([a.label().to_string(), num(kc[0]), num(kc[1]), num(kc[2]), num(lo), num(hi), opt(z), num(d0), num(de)])?;
        }
    }
    Ok(vec![csv.finish()?])
}

pub fn bands(run: &Run) -> Result<Vec<PathBuf>, CliError> {
    let branches = run.branches()?;
    let mut csv = run.csv(
        "bands.csv",
        &[
            "k1", "k2", "k3", "tau_ess", "band_lo", "band_hi", "ch1_lo", "ch1_hi", "ch2_lo", "ch2_hi", "ch3_lo", "ch3_hi", "merged",
        ],
    )?;
    for &k in &run.config.momenta.bands {
        let kp = TorusPoint::new(k);
        let s = essential_spectrum(kp, &run.system, &branches)?;
        let kc = kp.coords();
        let mut row = vec![num(kc[0]), num(kc[1]), num(kc[2]), num(s.tau_ess), num(s.band.lo), num(s.band.hi)];
        for c in &s.channels {
            row.push(opt(c.map(|i| i.lo)));
            row.push(opt(c.map(|i| i.hi)));
        }
        row.push(s.merged.iter().map(|i| format!("{}:{}", num(i.lo), num(i.hi))).collect::<Vec<_>>().join(";"));
        csv.row(row)?;
    }
    Ok(vec![csv.finish()?])
}

pub fn count(run: &Run) -> Result<Vec<PathBuf>, CliError> {
    let branches = run.branches()?;
    let spec = run.config.faddeev_spec();
    let grid_hash = run.config.grid_hash();
    let mut csv = run.csv("count.csv", &["k1", "k2", "k3", "tau_ess", "z", "delta", "n", "grid_hash"])?;
    for &k in &run.config.momenta.count {
        let kp = TorusPoint::new(k);
        let ctx = FiberContext::new(&run.system, kp, &branches)?;
        let tau = ctx.tau_ess();
        let kc = kp.coords();
        let mut points: Vec<(f64, Option<f64>)> = run.config.ladders.z.iter().filter(|&&z| z < tau).map(|&z| (z, None)).collect();
        points.extend(run.config.ladders.deltas.iter().map(|&d| (tau - d, Some(d))));
        for (z, d) in points {
            let n = count_n(&ctx, z, &spec)?;
            log::debug!("K = {kc:?}, z = {z}: N = {n}");
            csv.row([num(kc[0]), num(kc[1]), num(kc[2]), num(tau), num(z), opt(d), n.to_string(), grid_hash.clone()])?;
        }
    }
    Ok(vec![csv.finish()?])
}

#[derive(Debug, Serialize)]
pub struct FitSummary {
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
}

impl From<&SlopeFit> for FitSummary {
    fn from(f: &SlopeFit) -> Self {
        FitSummary { slope: f.slope, intercept: f.intercept, residual: f.residual }
    }
}

#[derive(Debug, Serialize)]
pub struct Ratios {
    pub energy_over_sobolev: Option<f64>,
    pub momentum_over_sobolev: Option<f64>,
    pub energy_over_momentum: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct EfimovSummary {
    pub config_hash: String,
    pub grid_hash: String,
    pub resonant: [bool; 3],
    pub lambda: f64,
    pub sobolev: FitSummary,
    pub energy_ladder: FitSummary,
    pub momentum_ladder: FitSummary,
    pub ratios: Ratios,
    pub tolerance: f64,
    pub agree: bool,
}

fn ratio(a: f64, b: f64) -> Option<f64> {
    (b != 0.0).then(|| a / b)
}

/// Whether every pair of positive estimates lies within the relative tolerance.
pub fn routes_agree(values: &[f64], tol: f64) -> bool {
    values.iter().all(|&v| v > 0.0)
        && values.iter().all(|&a| values.iter().all(|&b| (a - b).abs() <= tol * a.min(b)))
}

pub fn efimov(run: &Run) -> Result<Vec<PathBuf>, CliError> {
    let cfg = &run.config;
    let resonant = cfg.resonant_channels();
    let model = sobolev_coefficients(&run.system, resonant)?;
    let u = estimate_u(cfg.sobolev.lambda, &model, &cfg.ladders.r, &run.sobolev_grid())?;
    let branches = run.branches()?;
    let mut spec = cfg.faddeev_spec();
    spec.inner_floor = cfg.ladders.slope_inner_floor;
    let (fz, fk) = fit_counting_slopes(&run.system, &branches, &cfg.ladders.z, &cfg.ladders.k, &spec)?;

    let mut csv = run.csv("efimov.csv", &["route", "abscissa", "cutoff_r", "count", "slope", "intercept", "residual"])?;
    let mut emit = |route: &str, f: &SlopeFit, cut: &dyn Fn(f64) -> f64| -> Result<(), CliError> {
        for (x, n) in f.abscissae.iter().zip(&f.counts) {
            csv.row([route.to_string(), num(*x), num(cut(*x)), num(*n), num(f.slope), num(f.intercept), num(f.residual)])?;
        }
        Ok(())
    };
    let sys = run.system;
    emit("sobolev", &u, &|x| 0.5 * x)?;
    emit("energy", &fz, &|x| cutoff_r(TorusPoint::ZERO, -(-x).exp(), &sys))?;
    emit("momentum", &fk, &|x| cutoff_r(TorusPoint::new([(-0.5 * x).exp(), 0.0, 0.0]), 0.0, &sys))?;

    let agree = routes_agree(&[u.slope, fz.slope, fk.slope], ROUTE_TOLERANCE);
    let summary = EfimovSummary {
        config_hash: run.hash.clone(),
        grid_hash: cfg.grid_hash(),
        resonant,
        lambda: cfg.sobolev.lambda,
        sobolev: (&u).into(),
        energy_ladder: (&fz).into(),
        momentum_ladder: (&fk).into(),
        ratios: Ratios {
            energy_over_sobolev: ratio(fz.slope, u.slope),
            momentum_over_sobolev: ratio(fk.slope, u.slope),
            energy_over_momentum: ratio(fz.slope, fk.slope),
        },
        tolerance: ROUTE_TOLERANCE,
        agree,
    };
    println!("U0 (limiting operator) = {:.4}", u.slope);
    println!("slope N(0,z) / |log|z||  = {:.4}", fz.slope);
    println!("slope N(K,0) / 2|log|K|| = {:.4}", fk.slope);
    let paths = vec![csv.finish()?, write_json(&run.out.join("efimov.json"), &summary)?];
    Ok(paths)
}

impl Run {
    fn sobolev_grid(&self) -> efimov_core::efimov::SobolevGrid {
        self.config.sobolev_grid()
    }
}
