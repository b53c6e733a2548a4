//! Simulation and statistical verification of products of random row-stochastic
//! matrices.
//!
//! The library samples i.i.d. random stochastic matrices from several ensembles,
//! forms left products `X(n) * X(n-1) * ... * X(1)`, detects convergence to a
//! rank-one limit, and checks the distribution of the limit rows against
//! Dirichlet laws. It also provides distributional fixed-point checks
//! (`V X =d V` for gamma vectors, `Y X =d Y` for Dirichlet vectors), pushforward
//! checks for explicit parameter matrices, and three worked applications: a
//! random exchange chain on the simplex, nested random simplices, and a cyclic
//! polling walk.

pub mod apps;
pub mod characterization;
pub mod error;
pub mod products;
pub mod rng;
pub mod sampling;
pub mod stats;
pub mod types;

pub use error::{Error, Result};
pub use rng::RngStream;
