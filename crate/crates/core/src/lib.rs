//! Anchored (Halpern-type) proximal point iteration on concrete maximally
//! monotone operators, exact arbitrary-precision evaluation of the
//! quantitative rates the method admits, and empirical certification that
//! computed trajectories obey every bound.
//!
//! The crate is organized around the pipeline:
//! [`operators`] supplies exact resolvents; [`schedule`] and [`dynamics`]
//! generate trajectories and approximant paths; [`moduli`] evaluates rates
//! exactly over big naturals; [`certify`] checks inequalities, validates
//! moduli against schedules, and searches metastability witnesses;
//! [`showcase`] packages a worked polynomial-rate instance end to end.

pub mod bigcount;
pub mod certify;
pub mod counterfunction;
pub mod dynamics;
pub mod error;
pub mod export;
pub mod moduli;
pub mod operators;
pub mod point;
pub mod schedule;
pub mod showcase;

pub use bigcount::{bc, BigCount};
pub use certify::{CertReport, CheckResult, Tolerance, WitnessKind, WitnessRecord};
pub use counterfunction::Counterfunction;
pub use dynamics::{IterationKind, Trajectory};
pub use error::{Error, Result};
pub use moduli::{Branch, ModuliPack};
pub use operators::MonotoneOperator;
pub use point::Point;
pub use schedule::{AlphaFamily, BetaFamily, ErrDirection, ErrFamily, ParamSchedule};
