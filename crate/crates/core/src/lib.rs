//! Optimal portfolios for power utility under Black-Scholes, Heston-type
//! stochastic volatility and Kim-Omberg return predictability, together with
//! Monte Carlo checks of the convex-duality bounds that certify them.

pub mod closed_form;
pub mod csv;
pub mod error;
pub mod long_run;
pub mod model;
pub mod ode;
pub mod riccati;
pub mod sim;
pub mod verify;

pub use error::{Error, Result};
pub use model::{BlackScholesParams, FactorMarket, HestonParams, KimOmbergParams, Preferences, RiccatiCoeffs};
