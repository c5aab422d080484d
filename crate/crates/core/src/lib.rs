//! Coherent risk, capital allocation and no-good-deal pricing on finite
//! scenario spaces and event trees.
//!
//! A coherent utility is `u(X) = inf_{Q in D} E_Q X` for a determining set `D`
//! of probability densities; the risk is `-u(X)`. [`RiskSpec`] describes `D`
//! symbolically, [`ground`](ground::ground) compiles it into linear
//! constraints, and every pricing or allocation question reduces to a linear
//! program over those constraints plus market rows.

pub mod error;
pub mod gaussian;
pub mod geometry;
pub mod ground;
pub mod hedging;
pub mod markets;
pub mod quadrature;
pub mod risk;
pub mod space;
pub mod spec;
pub mod tol;
pub mod txcost;

pub use error::{CoreError, Result, Violation, ViolationKind};
pub use risk::{extreme_measure, risk, utility, ExtremeResult};
pub use space::{Density, Pnl, ScenarioSpace};
pub use spec::RiskSpec;
