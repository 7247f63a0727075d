use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("energy {z} lies inside the continuous band ({lo}, {hi})")]
    BandInterior { z: f64, lo: f64, hi: f64 },
    #[error("non-finite integrand value at node {0}")]
    NonFinite(usize),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("root not bracketed on [{lo}, {hi}]")]
    Bracket { lo: f64, hi: f64 },
    #[error("symmetric factorization broke down")]
    Breakdown,
    #[error("determinant vanishes at node {node} of channel {channel}")]
    SingularDelta { channel: usize, node: usize },
    #[error("angular series truncated at l = {l} with tail bound {bound}")]
    Truncation { l: usize, bound: f64 },
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    /// True for failures of an iterative or quadrature procedure to settle.
    pub fn is_convergence(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence(_) | Error::Bracket { .. } | Error::Breakdown | Error::Truncation { .. }
        )
    }
}

pub type Result<T> = core::result::Result<T, Error>;
