//! Quadrature and sampling engines.

pub mod expectation;
pub mod kronrod;
pub mod laguerre;
pub mod montecarlo;

pub use expectation::{gamma_expectation, gamma_window, Estimate, GammaPlan, Mode, DEFAULT_ORDER};
pub use kronrod::{adaptive_gk15, adaptive_pieces, gk15};
pub use laguerre::{laguerre_rule, QuadRule};
pub use montecarlo::{gamma_mc, gaussian_mc, gaussian_mc_many, McEstimate};
