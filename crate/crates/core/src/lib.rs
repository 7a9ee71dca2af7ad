//! Exact certifiers for nonexpansive maps on polyhedral-normed spaces.
pub mod certificate;
pub mod certify;
pub mod error;
pub mod formats;
pub mod generate;
mod linalg;
pub mod mapexpr;
pub mod oracle;
pub mod polynorm;
pub mod raylimits;
pub mod scalar;
pub mod sets;
pub mod topical;

pub use num_rational::BigRational;

pub type Rational = BigRational;
pub type ExactVector = Vec<Rational>;
pub type FloatVector = Vec<f64>;
pub type ExactPwa = raylimits::PwaFunction1D<Rational>;
pub type FloatPwa = raylimits::PwaFunction1D<f64>;
