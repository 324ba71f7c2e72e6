//! Numerical toolkit for collapsing families of Calabi–Yau fibrations:
//! log canonical thresholds of degenerate fibers, fiber-volume asymptotics,
//! generalized Kähler–Einstein equations on a flat torus base, the flows that
//! approach them, and discrete metric geometry of the resulting base metrics.

pub mod error;
pub mod fiber_volume;
pub mod flow;
pub mod gke;
pub mod grid;
pub mod lct;
pub mod metric;
pub mod quadrature;

pub use error::{Error, Result};
pub use lct::{AsymptoticProfile, DivisorRecord, KodairaType, Rational, ResolutionData};
