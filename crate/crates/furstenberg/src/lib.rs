//! Exact dyadic incidence geometry in the plane.
//!
//! Squares and tubes live on dyadic grids `δ = 2⁻ᵏ` with integer indices, so
//! membership and incidence are decided in integer arithmetic. Exponents are
//! replaced by rational proxies (see [`exact::exponent`]) and every bound that
//! involves `r^s` is compared exactly through [`exact::Monomial`].

pub mod dyadic;
pub mod deltaset;
pub mod exact;
pub mod generators;
pub mod incidence;
pub mod multiscale;
pub mod par;
pub mod projections;
pub mod refine;
pub mod tubes;

pub use exact::{exponent, Monomial, Rat};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("scale error: {0}")]
    Scale(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("check failed: {0}")]
    Check(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Check(msg()))
    }
}
