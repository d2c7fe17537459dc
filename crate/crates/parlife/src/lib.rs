//! Structural valuation of a life insurer that sells participating
//! contracts, with an endogenous bankruptcy barrier chosen by equity holders.

pub mod analysis;
pub mod barrier;
pub mod closed;
pub mod error;
pub mod integrals;
pub mod math;
pub mod mc;
pub mod optimize;
pub mod params;
pub mod quad;
pub mod valuation;

pub use error::{Error, Result};
pub use params::{ContractParams, FrictionParams, MarketParams, Scenario};
