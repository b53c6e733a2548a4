//! Random exchange chain: d agents hold nonnegative shares of one unit of
//! mass, and at every step agent i passes fraction X_ij of its holding to
//! agent j, all transfers governed by one fresh draw X(n). The state evolves
//! as q(n) = q(n-1) X(n), so total mass is conserved exactly.

use crate::characterization::{distribution_battery, flatten_battery, Law};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::sampling::Ensemble;
use crate::stats::TestReport;
use crate::types::{vec_mat_product, ParamVector, ProbVector};

/// The chain state: current share vector and step count.
#[derive(Clone, Debug)]
pub struct ExchangeChain {
    ensemble: Ensemble,
    state: ProbVector,
    steps: usize,
}

impl ExchangeChain {
    /// Starts a chain at `q0`; the ensemble must be square with matching
    /// dimension.
    pub fn new(ensemble: Ensemble, q0: ProbVector) -> Result<Self> {
        let d = ensemble.dim()?;
        if q0.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "initial state has length {}, ensemble dimension is {d}",
                q0.len()
            )));
        }
        Ok(ExchangeChain {
            ensemble,
            state: q0,
            steps: 0,
        })
    }

    pub fn state(&self) -> &ProbVector {
        &self.state
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// One transition q(n) = q(n-1) X(n) with a fresh draw.
    pub fn step(&mut self, rng: &mut RngStream) -> Result<()> {
        let x = self.ensemble.sample(rng)?;
        let next = vec_mat_product(self.state.entries(), &x)?;
        debug_assert!((next.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
        self.state = ProbVector::from_normalized(next);
        self.steps += 1;
        Ok(())
    }
}

/// Tests whether the chain's long-run state follows the Dirichlet law with
/// parameters `t`.
///
/// Starts from the uniform share vector, discards `burn_in` steps, then
/// retains one state every `thin` steps until `n_samples` states are
/// collected. Retained states are compared to the Dirichlet law by the
/// moment battery and per-coordinate KS tests (consecutive chain states are
/// dependent, so the two-sample energy test is not run here). The aggregate
/// report carries each component's headline number plus the per-coordinate
/// sample means and variances.
pub fn exchange_stationary_test(
    e: &Ensemble,
    t: &ParamVector,
    burn_in: usize,
    n_samples: usize,
    thin: usize,
    level: f64,
    rng: &mut RngStream,
) -> Result<TestReport> {
    let d = e.dim()?;
    if t.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "parameter vector has length {}, ensemble dimension is {d}",
            t.len()
        )));
    }
    assert!(thin >= 1, "thin must be at least 1");
    let mut chain = ExchangeChain::new(e.clone(), ProbVector::uniform(d))?;
    for _ in 0..burn_in {
        chain.step(rng)?;
    }
    let mut samples = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        for _ in 0..thin {
            chain.step(rng)?;
        }
        samples.push(chain.state().entries().to_vec());
    }

    let battery = distribution_battery("exchange", &samples, t, Law::Dirichlet, level, None)?;

    let nf = n_samples as f64;
    let mut extra = Vec::new();
    for j in 0..d {
        let mean = samples.iter().map(|s| s[j]).sum::<f64>() / nf;
        let var = samples
            .iter()
            .map(|s| (s[j] - mean) * (s[j] - mean))
            .sum::<f64>()
            / (nf - 1.0);
        extra.push((format!("mean_{}", j + 1), mean));
        extra.push((format!("var_{}", j + 1), var));
    }
    Ok(flatten_battery(
        "exchange_stationary",
        &battery,
        n_samples,
        rng.ids(),
        extra,
    ))
}
