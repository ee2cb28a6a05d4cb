//! Numerical estimation of metric complexity and generalized local entropies.

pub mod arithmetic;
pub mod bowen;
pub mod covering;
pub mod error;
pub mod exponents;
pub mod iet;
pub mod rng;
pub mod scaling;
pub mod systems;

pub use error::{Error, Result};
pub use iet::IetSpec;
pub use scaling::Gauge;
pub use systems::{ConjugacySpec, MapRule, MeasureSpec, MetricSpec, Point, SystemDescriptor};
