//! Cyclic polling walk on the simplex: a server visits stations 1..d in
//! round-robin order; when it serves station r, the mass x_r waiting there is
//! redistributed over all stations according to row r of that cycle's matrix
//! draw. All d stations of one cycle share a single draw.
//!
//! Observed at a fixed residue r (after station r's service, once per cycle),
//! the walk is a homogeneous Markov chain whose stationary law is Dirichlet
//! with parameters given by windowed column sums of the draw's Dirichlet
//! parameter matrix.

use crate::characterization::{
    distribution_battery, estimate_limit_params, flatten_battery, Law,
};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::sampling::Ensemble;
use crate::stats::TestReport;
use crate::types::{mat_product, ParamMatrix, ParamVector, ProbVector, StochasticMatrix};

/// The identity matrix with row `r` (1-based) replaced by row `r` of `x`:
/// the service operator of station r, acting on row vectors from the right.
pub fn station_matrix(x: &StochasticMatrix, r: usize) -> Result<StochasticMatrix> {
    if !x.is_square() {
        return Err(Error::NotSquare(x.rows(), x.cols()));
    }
    let d = x.rows();
    if r < 1 || r > d {
        return Err(Error::IndexOutOfRange { index: r, dim: d });
    }
    let mut rows: Vec<Vec<f64>> = StochasticMatrix::identity(d).to_rows();
    rows[r - 1] = x.row(r - 1).to_vec();
    Ok(StochasticMatrix::validate(&rows, 1e-9)?)
}

/// Stationary Dirichlet parameters of the residue-r chain, from the draw's
/// parameter matrix: beta_{r,j} sums alpha_{i,j} over the window i = j..r
/// for j <= r and i = j..d+r for j > r, row indices wrapping past d.
pub fn beta_params(a: &ParamMatrix, r: usize) -> Result<ParamVector> {
    if !a.is_square() {
        return Err(Error::NotSquare(a.rows(), a.cols()));
    }
    let d = a.rows();
    if r < 1 || r > d {
        return Err(Error::IndexOutOfRange { index: r, dim: d });
    }
    let mut beta = Vec::with_capacity(d);
    for j in 1..=d {
        let hi = if j <= r { r } else { d + r };
        let mut sum = 0.0;
        for i in j..=hi {
            let wrapped = (i - 1) % d;
            sum += a.get(wrapped, j - 1);
        }
        beta.push(sum);
    }
    ParamVector::extended(beta)
}

/// The walk state: station masses and step bookkeeping.
#[derive(Clone, Debug)]
pub struct PollingWalk {
    ensemble: Ensemble,
    state: ProbVector,
    /// Completed single-station service steps.
    steps: usize,
    d: usize,
}

impl PollingWalk {
    pub fn new(ensemble: Ensemble, b0: ProbVector) -> Result<Self> {
        let d = ensemble.dim()?;
        if b0.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "initial state has length {}, ensemble dimension is {d}",
                b0.len()
            )));
        }
        Ok(PollingWalk {
            ensemble,
            state: b0,
            steps: 0,
            d,
        })
    }

    pub fn state(&self) -> &ProbVector {
        &self.state
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Serves station `r` (1-based) with redistribution weights `row`:
    /// the new mass at j is (old mass at j, or 0 for j = r) + x_r * row_j.
    pub fn station_step(&mut self, r: usize, row: &[f64]) -> Result<()> {
        if r < 1 || r > self.d {
            return Err(Error::IndexOutOfRange { index: r, dim: self.d });
        }
        if row.len() != self.d {
            return Err(Error::DimensionMismatch(format!(
                "service row has length {}, expected {}",
                row.len(),
                self.d
            )));
        }
        debug_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        let x_r = self.state.entries()[r - 1];
        let mut next: Vec<f64> = self.state.entries().to_vec();
        next[r - 1] = 0.0;
        for (n, &w) in next.iter_mut().zip(row) {
            *n += x_r * w;
        }
        debug_assert!((next.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
        self.state = ProbVector::from_normalized(next);
        self.steps += 1;
        Ok(())
    }

    /// One full cycle: stations 1..d served in order, all with rows of one
    /// fresh draw (or each with its own draw when `fresh_per_step`).
    pub fn cycle(&mut self, fresh_per_step: bool, rng: &mut RngStream) -> Result<()> {
        if fresh_per_step {
            for r in 1..=self.d {
                let x = self.ensemble.sample(rng)?;
                self.station_step(r, &x.row(r - 1).to_vec())?;
            }
        } else {
            let x = self.ensemble.sample(rng)?;
            for r in 1..=self.d {
                self.station_step(r, &x.row(r - 1).to_vec())?;
            }
        }
        Ok(())
    }

    /// One transition of the residue-r chain: stations r+1..d then 1..r, all
    /// with rows of a single fresh draw. Starting from a state observed just
    /// after station r, this lands on the next such observation.
    pub fn residue_cycle(&mut self, r: usize, rng: &mut RngStream) -> Result<()> {
        if r < 1 || r > self.d {
            return Err(Error::IndexOutOfRange { index: r, dim: self.d });
        }
        let x = self.ensemble.sample(rng)?;
        for s in (r + 1..=self.d).chain(1..=r) {
            self.station_step(s, &x.row(s - 1).to_vec())?;
        }
        Ok(())
    }
}

/// The residue-r cycle operator of one draw: the right-multiplication matrix
/// T_{r+1}(x) ... T_d(x) T_1(x) ... T_r(x).
pub fn residue_cycle_matrix(x: &StochasticMatrix, r: usize) -> Result<StochasticMatrix> {
    if !x.is_square() {
        return Err(Error::NotSquare(x.rows(), x.cols()));
    }
    let d = x.rows();
    if r < 1 || r > d {
        return Err(Error::IndexOutOfRange { index: r, dim: d });
    }
    let mut acc: Option<StochasticMatrix> = None;
    for s in (r + 1..=d).chain(1..=r) {
        let t = station_matrix(x, s)?;
        acc = Some(match acc {
            None => t,
            Some(a) => mat_product(&a, &t)?,
        });
    }
    Ok(acc.expect("station range is nonempty"))
}

/// Where the stationary Dirichlet parameters come from.
#[derive(Clone, Debug)]
pub enum BetaSource {
    /// Derive them from the draw's Dirichlet parameter matrix.
    Alpha(ParamMatrix),
    /// Use these parameters directly.
    Explicit(ParamVector),
}

/// Tests whether the residue-r chain's long-run state follows the Dirichlet
/// law with the windowed-sum parameters.
///
/// Before simulating, a short probe checks that products of cycle operators
/// can become entrywise positive at all; if never observed, the chain cannot
/// forget its start and the report comes back failed with
/// `details["applicable"] = 0`.
#[allow(clippy::too_many_arguments)]
pub fn polling_stationary_test(
    e: &Ensemble,
    beta_source: &BetaSource,
    r: usize,
    burn_in: usize,
    n_samples: usize,
    thin: usize,
    level: f64,
    rng: &mut RngStream,
) -> Result<TestReport> {
    let d = e.dim()?;
    if r < 1 || r > d {
        return Err(Error::IndexOutOfRange { index: r, dim: d });
    }
    assert!(thin >= 1, "thin must be at least 1");
    let beta = match beta_source {
        BetaSource::Alpha(a) => {
            if a.rows() != d || a.cols() != d {
                return Err(Error::DimensionMismatch(format!(
                    "parameter matrix is {}x{}, ensemble dimension is {d}",
                    a.rows(),
                    a.cols()
                )));
            }
            beta_params(a, r)?
        }
        BetaSource::Explicit(v) => {
            if v.len() != d {
                return Err(Error::DimensionMismatch(format!(
                    "parameter vector has length {}, ensemble dimension is {d}",
                    v.len()
                )));
            }
            v.clone()
        }
    };

    // Applicability probe: a few trials of growing cycle-operator products.
    let probe_trials = 32usize;
    let probe_depth = 4 * d;
    let mut applicable = false;
    'trials: for trial in 0..probe_trials {
        let mut probe_rng = rng.derive(1_000_000 + trial as u64);
        let mut acc: Option<StochasticMatrix> = None;
        for _ in 0..probe_depth {
            let x = e.sample(&mut probe_rng)?;
            let cycle = residue_cycle_matrix(&x, r)?;
            acc = Some(match acc {
                None => cycle,
                Some(a) => mat_product(&a, &cycle)?,
            });
            if acc.as_ref().unwrap().is_positive() {
                applicable = true;
                break 'trials;
            }
        }
    }
    if !applicable {
        let mut details = std::collections::BTreeMap::new();
        details.insert("applicable".into(), 0.0);
        return Ok(TestReport {
            name: "polling_stationary".into(),
            statistic: 0.0,
            threshold_or_pvalue: 0.0,
            n: vec![0],
            seed: rng.ids().to_vec(),
            pass: false,
            details,
        });
    }

    let mut walk = PollingWalk::new(e.clone(), ProbVector::uniform(d))?;
    // Alignment: advance through stations 1..r once so every later
    // observation sits just after station r's service.
    {
        let x = walk.ensemble.sample(rng)?;
        for s in 1..=r {
            walk.station_step(s, &x.row(s - 1).to_vec())?;
        }
    }
    for _ in 0..burn_in {
        walk.residue_cycle(r, rng)?;
    }
    let mut samples = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        for _ in 0..thin {
            walk.residue_cycle(r, rng)?;
        }
        samples.push(walk.state().entries().to_vec());
    }

    let battery = distribution_battery("polling", &samples, &beta, Law::Dirichlet, level, None)?;
    let mut extra = vec![("applicable".to_string(), 1.0)];
    for (j, &b) in beta.entries().iter().enumerate() {
        extra.push((format!("beta_{}", j + 1), b));
    }
    if let Ok(fit) = estimate_limit_params(&samples) {
        for (j, &v) in fit.entries().iter().enumerate() {
            extra.push((format!("t_hat_{}", j + 1), v));
        }
    }
    Ok(flatten_battery(
        "polling_stationary",
        &battery,
        n_samples,
        rng.ids(),
        extra,
    ))
}
