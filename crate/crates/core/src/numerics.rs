//! Dense linear algebra helpers, the seeded random source, and the Gaussian
//! tail function shared by the channel and learner modules.

use nalgebra::{DMatrix, DVector};
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};

/// Dense real matrix (channel gains, decoder kernels, hints).
pub type Matrix = DMatrix<f64>;
/// Dense real vector (codewords, channel outputs, noise).
pub type Vector = DVector<f64>;

/// `sqrt(trace(mᵀm))`.
pub fn frobenius_norm(m: &Matrix) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Euclidean projection onto `{G : ‖G‖_F ≤ radius}`.
pub fn project_frobenius_ball(m: &Matrix, radius: f64) -> Result<Matrix> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::invalid(format!(
            "Frobenius ball radius must be positive and finite, got {radius}"
        )));
    }
    let norm = frobenius_norm(m);
    if norm <= radius {
        Ok(m.clone())
    } else {
        Ok(m * (radius / norm))
    }
}

/// Standard normal upper tail `Q(x) = P(N(0,1) > x)`.
///
/// Evaluated as `erfc(x/√2)/2`, which stays accurate deep into the tail.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Deterministic random source.
///
/// Wraps a ChaCha8 generator. Independent streams for the same base seed are
/// obtained with [`Rng::derived`], which selects a distinct ChaCha stream, so
/// a run's randomness depends only on `(seed, stream)` and never on the order
/// in which runs execute.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn seeded(seed: u64) -> Self {
        Self::derived(seed, 0)
    }

    pub fn derived(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { seed, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform on `[low, high)`.
    pub fn uniform_range(&mut self, low: f64, high: f64) -> f64 {
        low + (high - low) * self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Standard Laplace (location 0, scale 1) by inversion.
    pub fn laplace(&mut self) -> f64 {
        // u in (-1/2, 1/2); the endpoint -1/2 has probability zero but is
        // rejected to keep ln finite.
        loop {
            let u = self.uniform() - 0.5;
            let tail = 1.0 - 2.0 * u.abs();
            if tail > 0.0 {
                return -u.signum() * tail.ln();
            }
        }
    }

    /// Dirichlet draw with the given concentration parameters.
    pub fn dirichlet(&mut self, alpha: &[f64]) -> Result<Vec<f64>> {
        if alpha.is_empty() {
            return Err(Error::invalid("Dirichlet needs at least one component"));
        }
        let mut draws = Vec::with_capacity(alpha.len());
        for &a in alpha {
            let gamma = Gamma::new(a, 1.0)
                .map_err(|e| Error::invalid(format!("Dirichlet concentration {a}: {e}")))?;
            draws.push(gamma.sample(&mut self.inner));
        }
        let total: f64 = draws.iter().sum();
        if !(total > 0.0) {
            // All gamma draws underflowed; only possible for tiny concentrations.
            return Err(Error::invalid("degenerate Dirichlet draw"));
        }
        Ok(draws.into_iter().map(|g| g / total).collect())
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    /// Index drawn with probability proportional to `weights`.
    ///
    /// Falls back to the last positive entry when rounding leaves the
    /// cumulative sum short of the drawn threshold.
    pub fn categorical(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().sum();
        let threshold = self.uniform() * total;
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (i, &w) in weights.iter().enumerate() {
            if w > 0.0 {
                last_positive = i;
            }
            acc += w;
            if threshold < acc {
                return i;
            }
        }
        last_positive
    }

    pub fn normal_vector(&mut self, dim: usize) -> Vector {
        Vector::from_fn(dim, |_, _| self.normal())
    }

    pub fn normal_matrix(&mut self, rows: usize, cols: usize) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| self.normal())
    }
}
