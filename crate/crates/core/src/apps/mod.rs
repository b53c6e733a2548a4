//! Three applications of iterated random stochastic matrices: a mass-exchange
//! Markov chain, random nested simplices, and a cyclic polling walk.

mod exchange;
mod polling;
mod simplices;

pub use exchange::{exchange_stationary_test, ExchangeChain};
pub use polling::{
    beta_params, polling_stationary_test, station_matrix, BetaSource, PollingWalk,
};
pub use simplices::{simplices_run, AffineFrame, CascadeResult, SimplexCascade};
