//! Random nested simplices: starting from a nondegenerate simplex on d
//! vertices in R^(d-1), each step replaces every vertex by a random convex
//! combination of the current vertices, the weights being the rows of one
//! stochastic draw. The simplices shrink to a common random limit point whose
//! barycentric coordinates relative to the starting frame are the first row
//! of the accumulated left product.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::sampling::Ensemble;
use crate::types::{mat_product, ProbVector, StochasticMatrix};

/// A nondegenerate simplex frame: d points in R^(d-1) with the linear system
/// for barycentric coordinates factorized once.
#[derive(Clone, Debug)]
pub struct AffineFrame {
    vertices: Vec<Vec<f64>>,
    lu: nalgebra::linalg::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl AffineFrame {
    /// Builds a frame from `d` points in R^(d-1). The edge vectors from the
    /// first vertex must be linearly independent (|det| > 1e-12).
    pub fn new(vertices: Vec<Vec<f64>>) -> Result<Self> {
        let d = vertices.len();
        if d < 2 {
            return Err(Error::DimensionMismatch(format!(
                "frame needs at least 2 vertices, got {d}"
            )));
        }
        for (k, v) in vertices.iter().enumerate() {
            if v.len() != d - 1 {
                return Err(Error::DimensionMismatch(format!(
                    "vertex {k} has {} coordinates, expected {}",
                    v.len(),
                    d - 1
                )));
            }
        }
        // Column k-1 holds the edge p_k - p_1.
        let edges = DMatrix::from_fn(d - 1, d - 1, |i, j| vertices[j + 1][i] - vertices[0][i]);
        let lu = edges.lu();
        let det: f64 = lu.determinant();
        if det.abs() <= 1e-12 {
            return Err(Error::DimensionMismatch(
                "frame vertices are affinely dependent".into(),
            ));
        }
        Ok(AffineFrame { vertices, lu })
    }

    /// The standard frame: the origin followed by the d-1 unit vectors.
    pub fn standard(d: usize) -> Self {
        let mut vertices = vec![vec![0.0; d - 1]];
        for k in 0..d - 1 {
            let mut v = vec![0.0; d - 1];
            v[k] = 1.0;
            vertices.push(v);
        }
        AffineFrame::new(vertices).expect("standard frame is nondegenerate")
    }

    /// Number of vertices d (the ambient space is R^(d-1)).
    pub fn dim(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    /// The point with the given barycentric weights: sum_k b_k p_k.
    pub fn to_cartesian(&self, barycentric: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim();
        if barycentric.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "barycentric vector has length {}, frame has {d} vertices",
                barycentric.len()
            )));
        }
        let mut out = vec![0.0; d - 1];
        for (b, p) in barycentric.iter().zip(&self.vertices) {
            for (o, &c) in out.iter_mut().zip(p) {
                *o += b * c;
            }
        }
        Ok(out)
    }

    /// Barycentric coordinates of a point: solves the cached edge system for
    /// the weights of p_2..p_d; the first weight is 1 minus their sum.
    pub fn to_barycentric(&self, point: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim();
        if point.len() != d - 1 {
            return Err(Error::DimensionMismatch(format!(
                "point has {} coordinates, expected {}",
                point.len(),
                d - 1
            )));
        }
        let rhs = DVector::from_fn(d - 1, |i, _| point[i] - self.vertices[0][i]);
        let w = self
            .lu
            .solve(&rhs)
            .ok_or_else(|| Error::DimensionMismatch("frame system is singular".into()))?;
        let mut out = Vec::with_capacity(d);
        out.push(1.0 - w.iter().sum::<f64>());
        out.extend(w.iter().copied());
        Ok(out)
    }
}

/// The evolving simplex: current vertices plus the accumulated left product
/// of the draws, whose rows are the vertices' barycentric coordinates in the
/// starting frame.
#[derive(Clone, Debug)]
pub struct SimplexCascade {
    frame: AffineFrame,
    vertices: Vec<Vec<f64>>,
    product: StochasticMatrix,
    steps: usize,
}

impl SimplexCascade {
    pub fn new(frame: AffineFrame) -> Self {
        let d = frame.dim();
        SimplexCascade {
            vertices: frame.vertices().to_vec(),
            product: StochasticMatrix::identity(d),
            frame,
            steps: 0,
        }
    }

    pub fn frame(&self) -> &AffineFrame {
        &self.frame
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    /// Accumulated product X(n) ... X(1); row k is vertex k in barycentric
    /// coordinates of the frame.
    pub fn product(&self) -> &StochasticMatrix {
        &self.product
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Replaces every vertex by the convex combination given by its row of
    /// `x`: p_k(n) = sum_j x_kj p_j(n-1).
    pub fn apply(&mut self, x: &StochasticMatrix) -> Result<()> {
        let d = self.frame.dim();
        if x.rows() != d || x.cols() != d {
            return Err(Error::DimensionMismatch(format!(
                "draw is {}x{}, simplex has {d} vertices",
                x.rows(),
                x.cols()
            )));
        }
        let mut next = vec![vec![0.0; d - 1]; d];
        for (k, target) in next.iter_mut().enumerate() {
            for j in 0..d {
                let w = x.get(k, j);
                if w == 0.0 {
                    continue;
                }
                for (t, &c) in target.iter_mut().zip(&self.vertices[j]) {
                    *t += w * c;
                }
            }
        }
        self.vertices = next;
        self.product = mat_product(x, &self.product)?;
        self.steps += 1;
        Ok(())
    }

    /// Largest pairwise Euclidean distance between vertices.
    pub fn diameter(&self) -> f64 {
        let d = self.vertices.len();
        let mut best = 0.0f64;
        for i in 0..d {
            for j in (i + 1)..d {
                let dist: f64 = self.vertices[i]
                    .iter()
                    .zip(&self.vertices[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                best = best.max(dist);
            }
        }
        best
    }
}

/// Outcome of one cascade run.
#[derive(Clone, Debug, serde::Serialize)]
pub struct CascadeResult {
    /// The limit point in cartesian coordinates (vertex centroid at stop).
    pub point: Vec<f64>,
    /// Its barycentric coordinates: the first row of the converged product.
    pub barycentric: ProbVector,
    pub steps: usize,
    /// False when the diameter did not reach epsilon within max_n steps.
    pub converged: bool,
}

/// Runs one cascade until the simplex diameter is at most `epsilon` or
/// `max_n` draws are consumed.
pub fn simplices_run(
    frame: &AffineFrame,
    e: &Ensemble,
    epsilon: f64,
    max_n: usize,
    rng: &mut RngStream,
) -> Result<CascadeResult> {
    assert!(epsilon > 0.0, "epsilon must be positive");
    assert!(max_n >= 1, "max_n must be at least 1");
    let d = e.dim()?;
    if d != frame.dim() {
        return Err(Error::DimensionMismatch(format!(
            "ensemble dimension {d} does not match frame with {} vertices",
            frame.dim()
        )));
    }
    let mut cascade = SimplexCascade::new(frame.clone());
    while cascade.diameter() > epsilon && cascade.steps() < max_n {
        let x = e.sample(rng)?;
        cascade.apply(&x)?;
    }
    let nf = d as f64;
    let mut point = vec![0.0; d - 1];
    for v in cascade.vertices() {
        for (p, &c) in point.iter_mut().zip(v) {
            *p += c / nf;
        }
    }
    Ok(CascadeResult {
        point,
        barycentric: cascade.product().row_vector(0),
        steps: cascade.steps(),
        converged: cascade.diameter() <= epsilon,
    })
}
