//! On-disk cache of bound-state branch tables.
//!
//! A table file is plain text:
//!
//! ```text
//! # efimov branch table v1
//! masses <l1> <l2> <l3>
//! couplings <mu1> <mu2> <mu3>
//! alpha <1|2|3>
//! resolution <n>
//! tolerance <root tolerance in w>
//! <k1> <k2> <k3> <z>
//! ...
//! ```
//!
//! with one row per node triple in row-major order, momenta in [0, pi] and `nan` where
//! the pair has no bound state. Numbers are written in shortest round-trip form.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use efimov_core::three_body::tabulate_branches;
use efimov_core::two_body::BoundStateBranch;
use efimov_core::{PairIndex, SystemConfig};

use crate::config::hex_digest;
use crate::error::CliError;

pub const CACHE_ENV: &str = "EFIMOV_CACHE_DIR";
const MAGIC: &str = "# efimov branch table v1";
const TOLERANCE: f64 = 1e-12;

/// Cache directory: explicit flag, then the environment, then the config file.
pub fn resolve_dir(flag: Option<&Path>, config: Option<&Path>) -> Option<PathBuf> {
    if let Some(p) = flag {
        return Some(p.to_path_buf());
    }
    if let Some(p) = std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()) {
        return Some(PathBuf::from(p));
    }
    config.map(Path::to_path_buf)
}

fn fmt_f(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:?}")
    }
}

fn key(cfg: &SystemConfig, a: PairIndex, n: usize) -> String {
    let text = format!("{:?} {:?} {} {}", cfg.masses(), cfg.couplings(), a.label(), n);
    hex_digest(text.as_bytes())[..16].to_string()
}

pub fn table_path(dir: &Path, cfg: &SystemConfig, a: PairIndex, n: usize) -> PathBuf {
    dir.join(format!("branch-{}-a{}-n{}.txt", key(cfg, a, n), a.label(), n))
}

pub fn write_table(branch: &BoundStateBranch) -> String {
    let cfg = branch.config();
    let mut s = String::new();
    let [l1, l2, l3] = cfg.masses();
    let [m1, m2, m3] = cfg.couplings();
    writeln!(s, "{MAGIC}").unwrap();
    writeln!(s, "masses {} {} {}", fmt_f(l1), fmt_f(l2), fmt_f(l3)).unwrap();
    writeln!(s, "couplings {} {} {}", fmt_f(m1), fmt_f(m2), fmt_f(m3)).unwrap();
    writeln!(s, "alpha {}", branch.alpha().label()).unwrap();
    writeln!(s, "resolution {}", branch.resolution()).unwrap();
    writeln!(s, "tolerance {}", fmt_f(TOLERANCE)).unwrap();
    for (i, z) in branch.values().iter().enumerate() {
        let k = branch.node_momentum(i);
        writeln!(s, "{} {} {} {}", fmt_f(k[0]), fmt_f(k[1]), fmt_f(k[2]), fmt_f(*z)).unwrap();
    }
    s
}

fn header<'a>(lines: &mut impl Iterator<Item = &'a str>, name: &str) -> Result<Vec<f64>, CliError> {
    let line = lines.next().ok_or_else(|| CliError::Config(format!("branch table truncated before {name}")))?;
    let mut it = line.split_whitespace();
    if it.next() != Some(name) {
        return Err(CliError::Config(format!("branch table: expected {name}")));
    }
    it.map(|t| t.parse::<f64>().map_err(|e| CliError::Config(format!("branch table {name}: {e}")))).collect()
}

/// Parses a table and checks it against the configuration it is meant for.
pub fn read_table(text: &str, cfg: &SystemConfig, a: PairIndex, n: usize) -> Result<BoundStateBranch, CliError> {
    let mut lines = text.lines();
    if lines.next() != Some(MAGIC) {
        return Err(CliError::Config("not a branch table".into()));
    }
    let masses = header(&mut lines, "masses")?;
    let couplings = header(&mut lines, "couplings")?;
    let alpha = header(&mut lines, "alpha")?;
    let res = header(&mut lines, "resolution")?;
    header(&mut lines, "tolerance")?;
    if masses != cfg.masses() || couplings != cfg.couplings() || alpha != [a.label() as f64] || res != [n as f64] {
        return Err(CliError::Config("branch table belongs to a different configuration".into()));
    }
    let mut values = Vec::with_capacity(n * n * n);
    for line in lines {
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 4 {
            return Err(CliError::Config("branch table row must have four columns".into()));
        }
        values.push(cols[3].parse::<f64>().map_err(|e| CliError::Config(format!("branch table value: {e}")))?);
    }
    Ok(BoundStateBranch::from_values(a, cfg, n, values)?)
}

/// Branch tables for all pairs, through the cache when one is configured.
pub fn branches(cfg: &SystemConfig, n: usize, dir: Option<&Path>) -> Result<[BoundStateBranch; 3], CliError> {
    let Some(dir) = dir else {
        return Ok(tabulate_branches(cfg, n)?);
    };
    std::fs::create_dir_all(dir)?;
    let mut out = Vec::with_capacity(3);
    for a in PairIndex::ALL {
        let path = table_path(dir, cfg, a, n);
        let cached = match std::fs::read_to_string(&path) {
            Ok(text) => match read_table(&text, cfg, a, n) {
                Ok(b) => {
                    log::info!("branch table cache hit: {}", path.display());
                    Some(b)
                }
                Err(e) => {
                    log::warn!("ignoring cached table {}: {e}", path.display());
                    None
                }
            },
            Err(_) => None,
        };
        let b = match cached {
            Some(b) => b,
            None => {
                let b = efimov_core::two_body::tabulate_branch(a, cfg, n)?;
                std::fs::write(&path, write_table(&b))?;
                log::info!("branch table written: {}", path.display());
                b
            }
        };
        out.push(b);
    }
    let [b1, b2, b3]: [BoundStateBranch; 3] = out.try_into().expect("three tables");
    Ok([b1, b2, b3])
}
