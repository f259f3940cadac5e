//! Affine maps `y = W·x + b`, the building block of every learned projection.

use crate::error::{Error, Result};
use crate::grid::check_finite;
use crate::rng::SimRng;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap {
    in_dim: usize,
    out_dim: usize,
    /// out_dim × in_dim, row-major.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl LinearMap {
    pub fn new(in_dim: usize, out_dim: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::InvalidParameter(format!(
                "linear map dimensions must be positive, got {in_dim}->{out_dim}"
            )));
        }
        if weights.len() != in_dim * out_dim {
            return Err(Error::DimensionMismatch {
                what: "linear map weights",
                expected: in_dim * out_dim,
                actual: weights.len(),
            });
        }
        if bias.len() != out_dim {
            return Err(Error::DimensionMismatch {
                what: "linear map bias",
                expected: out_dim,
                actual: bias.len(),
            });
        }
        check_finite(&weights)?;
        check_finite(&bias)?;
        Ok(Self {
            in_dim,
            out_dim,
            weights,
            bias,
        })
    }

    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for i in 0..dim {
            m.weights[i * dim + i] = 1.0;
        }
        m
    }

    /// Weights and bias drawn from U(−1/√fan_in, 1/√fan_in).
    pub fn init_uniform(in_dim: usize, out_dim: usize, rng: &mut SimRng) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        let mut m = Self::zeros(in_dim, out_dim);
        for w in m.weights.iter_mut().chain(m.bias.iter_mut()) {
            *w = rng.uniform_in(-bound, bound);
        }
        m
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    #[inline]
    pub fn weight(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.in_dim + col]
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.in_dim {
            return Err(Error::DimensionMismatch {
                what: "linear map input",
                expected: self.in_dim,
                actual: x.len(),
            });
        }
        let mut out = vec![0.0; self.out_dim];
        self.apply_into(x, &mut out);
        Ok(out)
    }

    /// Unchecked variant for hot loops; lengths are debug-asserted.
    #[inline]
    pub(crate) fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.in_dim);
        debug_assert_eq!(out.len(), self.out_dim);
        for (o, (row, b)) in out
            .iter_mut()
            .zip(self.weights.chunks_exact(self.in_dim).zip(&self.bias))
        {
            *o = b + row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>();
        }
    }

    /// Accumulates `dW += g·xᵀ`, `db += g` for an upstream gradient `g` on the output.
    #[inline]
    pub(crate) fn accumulate_grad(&mut self, x: &[f64], g: &[f64]) {
        for (row, (gi, bi)) in self
            .weights
            .chunks_exact_mut(self.in_dim)
            .zip(g.iter().zip(self.bias.iter_mut()))
        {
            *bi += gi;
            if *gi != 0.0 {
                for (w, xi) in row.iter_mut().zip(x) {
                    *w += gi * xi;
                }
            }
        }
    }

    /// `Wᵀ·g`, the gradient with respect to the input.
    pub(crate) fn backward_input(&self, g: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (row, gi) in self.weights.chunks_exact(self.in_dim).zip(g) {
            for (o, w) in out.iter_mut().zip(row) {
                *o += gi * w;
            }
        }
    }

    pub(crate) fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub(crate) fn params(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(self.bias.iter())
    }

    pub(crate) fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.iter_mut().chain(self.bias.iter_mut())
    }
}
