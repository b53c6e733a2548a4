//! Iterated left products of i.i.d. random stochastic matrices.
//!
//! New draws multiply on the left: after n steps the product is
//! X(n) X(n-1) ... X(1). For ensembles whose products eventually have all
//! entries positive, the product collapses to a rank-one matrix (all rows
//! equal); `row_spread` measures the distance from that state, and the first
//! row of a converged product is one sample of the limit row.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::{par_samples, RngStream};
use crate::sampling::Ensemble;
use crate::types::{mat_product, StochasticMatrix};

/// The trajectory summary of one iterated product run.
#[derive(Clone, Debug, Serialize)]
pub struct ProductTrace {
    /// The product after the last step taken.
    pub final_matrix: StochasticMatrix,
    /// Number of factors consumed.
    pub steps: usize,
    /// (step, row_spread) samples: every step up to 1000, then every 10th,
    /// plus the final step. `None` after explicit stripping for bounded
    /// reports.
    pub spread_history: Option<Vec<(usize, f64)>>,
    /// Whether `row_spread` reached the requested tolerance.
    pub converged: bool,
}

/// Empirical search for the smallest product length with a fully positive
/// product.
#[derive(Clone, Debug, Serialize)]
pub struct PositivityReport {
    /// Least m at which a trial produced an all-positive product, if any.
    /// A `None` says "not observed within the budget", never "impossible".
    pub m_star: Option<usize>,
    pub trials_per_m: usize,
    /// (m, fraction of trials with all entries positive) for m = 1..=max_m.
    pub hit_fraction: Vec<(usize, f64)>,
}

/// The product X(n) X(n-1) ... X(1) of n fresh draws.
pub fn left_product(e: &Ensemble, n: usize, rng: &mut RngStream) -> Result<StochasticMatrix> {
    e.dim()?;
    if n < 1 {
        return Err(Error::TooFewSamples { need: 1, got: 0 });
    }
    let mut acc = e.sample(rng)?;
    for _ in 1..n {
        let next = e.sample(rng)?;
        acc = mat_product(&next, &acc)?;
    }
    Ok(acc)
}

/// Multiplies fresh draws on the left until the row spread of the product is
/// at most `epsilon`, or `max_n` factors have been used.
///
/// Non-convergence is reported through the `converged` flag rather than an
/// error: some ensembles (the identity, permutation mixtures) never collapse.
pub fn iterate_until_converged(
    e: &Ensemble,
    epsilon: f64,
    max_n: usize,
    rng: &mut RngStream,
) -> Result<ProductTrace> {
    assert!(epsilon > 0.0, "epsilon must be positive");
    assert!(max_n >= 1, "max_n must be at least 1");
    e.dim()?;
    let mut acc = e.sample(rng)?;
    let mut steps = 1usize;
    let mut spread = acc.row_spread();
    let mut history = vec![(steps, spread)];
    while spread > epsilon && steps < max_n {
        let next = e.sample(rng)?;
        acc = mat_product(&next, &acc)?;
        steps += 1;
        spread = acc.row_spread();
        if steps <= 1000 || steps % 10 == 0 {
            history.push((steps, spread));
        }
    }
    if history.last().map(|&(s, _)| s) != Some(steps) {
        history.push((steps, spread));
    }
    Ok(ProductTrace {
        final_matrix: acc,
        steps,
        spread_history: Some(history),
        converged: spread <= epsilon,
    })
}

/// For each m = 1..=max_m, estimates the probability that the length-m
/// product has every entry strictly positive, from `trials` independent
/// products per m.
///
/// Trials run replicate-parallel on streams derived from (m, trial index),
/// so the report is a pure function of the parent stream.
pub fn positivity_time(
    e: &Ensemble,
    max_m: usize,
    trials: usize,
    rng: &RngStream,
) -> Result<PositivityReport> {
    assert!(max_m >= 1, "max_m must be at least 1");
    assert!(trials >= 1, "trials must be at least 1");
    e.dim()?;
    let mut hit_fraction = Vec::with_capacity(max_m);
    let mut m_star = None;
    for m in 1..=max_m {
        let parent = rng.derive(m as u64);
        let outcomes: Result<Vec<bool>> = par_samples(&parent, trials, |_, s| {
            Ok(left_product(e, m, s)?.is_positive())
        })
        .into_iter()
        .collect();
        let hits = outcomes?.into_iter().filter(|&h| h).count();
        if hits > 0 && m_star.is_none() {
            m_star = Some(m);
        }
        hit_fraction.push((m, hits as f64 / trials as f64));
    }
    Ok(PositivityReport {
        m_star,
        trials_per_m: trials,
        hit_fraction,
    })
}
