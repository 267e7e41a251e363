//! Exact synthesis of power series distributions from a prescribed
//! variance-to-mean covariance.

pub mod cli;
pub mod covariance;
pub mod distribution;
pub mod fixtures;
pub mod fps;
pub mod synthesis;
pub mod transforms;

pub use covariance::{parse_spec, preset, CovarianceError, CovarianceSpec, DomainHint, SpecKind};
pub use distribution::{moments, pmf, sample, PsdModel};
pub use fps::{Rational, Series};
pub use synthesis::{synthesize, SynthesisOptions, SynthesisResult};
pub use transforms::{transform_covariance, transform_omega, TransformSpec};
