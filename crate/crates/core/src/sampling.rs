//! Gamma, Dirichlet, and random-matrix samplers.
//!
//! Dirichlet draws are gamma vectors normalized by their sum; a zero shape
//! parameter yields the constant 0 (extended Dirichlet convention). Matrix
//! ensembles produce i.i.d. row-stochastic matrices.

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::types::{mat_product, NonNegVector, ParamMatrix, ParamVector, ProbVector, StochasticMatrix};
use rand_distr::{Distribution, Gamma};

/// One draw from the gamma law with the given shape and scale 1.
pub fn sample_gamma(shape: f64, rng: &mut RngStream) -> Result<f64> {
    if !shape.is_finite() || shape <= 0.0 {
        return Err(Error::NonPositiveShape(shape));
    }
    let dist = Gamma::new(shape, 1.0).map_err(|_| Error::NonPositiveShape(shape))?;
    Ok(dist.sample(rng))
}

/// Independent gamma components with shapes `t`; zero shapes map to exactly 0.
pub fn sample_gamma_vector(t: &ParamVector, rng: &mut RngStream) -> Result<NonNegVector> {
    let mut entries = Vec::with_capacity(t.len());
    for &shape in t.entries() {
        if shape == 0.0 {
            entries.push(0.0);
        } else {
            entries.push(sample_gamma(shape, rng)?);
        }
    }
    NonNegVector::new(entries)
}

/// One Dirichlet draw: a gamma vector divided by its sum. Zero-shape
/// coordinates are identically 0.
pub fn sample_dirichlet(t: &ParamVector, rng: &mut RngStream) -> Result<ProbVector> {
    let xi = sample_gamma_vector(t, rng)?;
    let total = xi.total();
    if total <= 0.0 {
        return Err(Error::DegenerateSample(
            "gamma vector summed to zero (shape underflow)".into(),
        ));
    }
    let entries = xi.into_entries().into_iter().map(|v| v / total).collect();
    Ok(ProbVector::from_normalized(entries))
}

/// Independent gamma entries, entry (i, j) with shape `a[i][j]`; zero shapes
/// map to exactly 0.
pub fn sample_gamma_matrix(a: &ParamMatrix, rng: &mut RngStream) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(a.rows());
    for i in 0..a.rows() {
        let mut row = Vec::with_capacity(a.cols());
        for &shape in a.row(i) {
            if shape == 0.0 {
                row.push(0.0);
            } else {
                row.push(sample_gamma(shape, rng)?);
            }
        }
        out.push(row);
    }
    Ok(out)
}

/// The Dirichlet parameter matrix whose row law equals the cyclic ensemble:
/// row k has weight 1 at columns k and k+1 (mod d), zero elsewhere.
pub fn cyclic_alpha(d: usize) -> ParamMatrix {
    let mut rows = vec![vec![0.0; d]; d];
    for (k, row) in rows.iter_mut().enumerate() {
        row[k] = 1.0;
        row[(k + 1) % d] = 1.0;
    }
    ParamMatrix::new(&rows).expect("cyclic pattern is a valid parameter matrix")
}

/// A law of i.i.d. random row-stochastic matrices.
///
/// Construct through the checked constructors; the variants are public for
/// inspection only. `Dirichlet` ensembles may be rectangular; the square-only
/// operations (products, fixed points, applications) check shape themselves.
#[derive(Clone, Debug)]
pub enum Ensemble {
    /// Independent rows, row i Dirichlet with parameters `alpha.row(i)`.
    Dirichlet(ParamMatrix),
    /// Row k carries U_k at column k and 1-U_k at column k+1 (mod d), with
    /// independent uniform U_k.
    Cyclic(usize),
    /// One uniform U drives every row: row 1 = (U, 1-U, 0, ..); with
    /// I = indicator{U > 1/2}, rows 2..d-1 put I at the diagonal and 1-I on
    /// the next column, and row d puts 1-I at column 1 and I at column d.
    Leader(usize),
    /// Pick matrix k with probability weight k (weights stored normalized).
    Mixture(Vec<(f64, StochasticMatrix)>),
    /// Product of one draw from each part, multiplied left to right.
    Composite(Vec<Ensemble>),
}

impl Ensemble {
    pub fn dirichlet(alpha: ParamMatrix) -> Result<Ensemble> {
        if alpha.cols() < 2 {
            return Err(Error::InvalidEnsemble(format!(
                "dirichlet ensemble needs at least 2 columns, got {}",
                alpha.cols()
            )));
        }
        for i in 0..alpha.rows() {
            if !alpha.row(i).iter().any(|&v| v > 0.0) {
                return Err(Error::InvalidEnsemble(format!(
                    "dirichlet ensemble row {i} has no positive parameter"
                )));
            }
        }
        Ok(Ensemble::Dirichlet(alpha))
    }

    pub fn cyclic(d: usize) -> Result<Ensemble> {
        if d < 2 {
            return Err(Error::InvalidEnsemble(format!(
                "cyclic ensemble needs dimension >= 2, got {d}"
            )));
        }
        Ok(Ensemble::Cyclic(d))
    }

    pub fn leader(d: usize) -> Result<Ensemble> {
        if d < 2 {
            return Err(Error::InvalidEnsemble(format!(
                "leader ensemble needs dimension >= 2, got {d}"
            )));
        }
        Ok(Ensemble::Leader(d))
    }

    pub fn mixture(components: Vec<(f64, StochasticMatrix)>) -> Result<Ensemble> {
        if components.is_empty() {
            return Err(Error::InvalidEnsemble("mixture has no components".into()));
        }
        let (r, c) = (components[0].1.rows(), components[0].1.cols());
        for (w, m) in &components {
            if !w.is_finite() || *w < 0.0 {
                return Err(Error::InvalidEnsemble(format!("invalid mixture weight {w}")));
            }
            if m.rows() != r || m.cols() != c {
                return Err(Error::InvalidEnsemble(
                    "mixture components have differing dimensions".into(),
                ));
            }
        }
        let total: f64 = components.iter().map(|(w, _)| w).sum();
        if total <= 0.0 {
            return Err(Error::InvalidEnsemble("mixture weights sum to zero".into()));
        }
        let components = if (total - 1.0).abs() <= 1e-9 {
            components
        } else {
            components.into_iter().map(|(w, m)| (w / total, m)).collect()
        };
        Ok(Ensemble::Mixture(components))
    }

    /// The deterministic ensemble concentrated on the identity matrix.
    pub fn identity(d: usize) -> Ensemble {
        Ensemble::Mixture(vec![(1.0, StochasticMatrix::identity(d))])
    }

    pub fn composite(parts: Vec<Ensemble>) -> Result<Ensemble> {
        if parts.is_empty() {
            return Err(Error::InvalidEnsemble("composite has no parts".into()));
        }
        for pair in parts.windows(2) {
            if pair[0].cols() != pair[1].rows() {
                return Err(Error::InvalidEnsemble(format!(
                    "composite parts do not chain: {}x{} then {}x{}",
                    pair[0].rows(),
                    pair[0].cols(),
                    pair[1].rows(),
                    pair[1].cols()
                )));
            }
        }
        Ok(Ensemble::Composite(parts))
    }

    pub fn rows(&self) -> usize {
        match self {
            Ensemble::Dirichlet(a) => a.rows(),
            Ensemble::Cyclic(d) | Ensemble::Leader(d) => *d,
            Ensemble::Mixture(c) => c[0].1.rows(),
            Ensemble::Composite(p) => p[0].rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            Ensemble::Dirichlet(a) => a.cols(),
            Ensemble::Cyclic(d) | Ensemble::Leader(d) => *d,
            Ensemble::Mixture(c) => c[0].1.cols(),
            Ensemble::Composite(p) => p[p.len() - 1].cols(),
        }
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    /// Dimension of a square ensemble.
    pub fn dim(&self) -> Result<usize> {
        if !self.is_square() {
            return Err(Error::NotSquare(self.rows(), self.cols()));
        }
        Ok(self.rows())
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Ensemble::Dirichlet(_) => "dirichlet",
            Ensemble::Cyclic(_) => "cyclic",
            Ensemble::Leader(_) => "leader",
            Ensemble::Mixture(_) => "explicit_mixture",
            Ensemble::Composite(_) => "composite",
        }
    }

    /// One i.i.d. draw from the ensemble.
    pub fn sample(&self, rng: &mut RngStream) -> Result<StochasticMatrix> {
        match self {
            Ensemble::Dirichlet(alpha) => {
                let (r, c) = (alpha.rows(), alpha.cols());
                let mut data = Vec::with_capacity(r * c);
                for i in 0..r {
                    let mut sum = 0.0;
                    let start = data.len();
                    for &shape in alpha.row(i) {
                        let v = if shape == 0.0 {
                            0.0
                        } else {
                            sample_gamma(shape, rng)?
                        };
                        sum += v;
                        data.push(v);
                    }
                    if sum <= 0.0 {
                        return Err(Error::DegenerateSample(
                            "gamma row summed to zero (shape underflow)".into(),
                        ));
                    }
                    for v in &mut data[start..] {
                        *v /= sum;
                    }
                }
                Ok(StochasticMatrix::from_raw(r, c, data))
            }
            Ensemble::Cyclic(d) => {
                let d = *d;
                let mut data = vec![0.0; d * d];
                for k in 0..d {
                    let u = rng.next_f64();
                    data[k * d + k] = u;
                    data[k * d + (k + 1) % d] = 1.0 - u;
                }
                Ok(StochasticMatrix::from_raw(d, d, data))
            }
            Ensemble::Leader(d) => {
                let d = *d;
                let u = rng.next_f64();
                let up = u > 0.5;
                let mut data = vec![0.0; d * d];
                data[0] = u;
                data[1] = 1.0 - u;
                for k in 1..d - 1 {
                    if up {
                        data[k * d + k] = 1.0;
                    } else {
                        data[k * d + k + 1] = 1.0;
                    }
                }
                if up {
                    data[(d - 1) * d + (d - 1)] = 1.0;
                } else {
                    data[(d - 1) * d] = 1.0;
                }
                Ok(StochasticMatrix::from_raw(d, d, data))
            }
            Ensemble::Mixture(components) => {
                let u = rng.next_f64();
                let mut cum = 0.0;
                for (w, m) in components {
                    cum += w;
                    if u <= cum {
                        return Ok(m.clone());
                    }
                }
                Ok(components[components.len() - 1].1.clone())
            }
            Ensemble::Composite(parts) => {
                let mut acc = parts[0].sample(rng)?;
                for part in &parts[1..] {
                    let next = part.sample(rng)?;
                    acc = mat_product(&acc, &next)?;
                }
                Ok(acc)
            }
        }
    }
}
