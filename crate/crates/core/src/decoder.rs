//! Online learning of the linear decoder kernel.
//!
//! The per-round loss of a kernel `G` is the pairwise hinge surrogate
//! `(1/M) Σ_j Σ_{j'≠j} [r − ‖x^{j'} − G y^j‖² + ‖x^j − G y^j‖²]_+`, which
//! upper-bounds the 0-1 symbol error rate whenever `r ≥ 1`. Optimistic OMD
//! with a Euclidean regularizer plays `G_t = Π[G'_t − η_t M_t]` using the
//! previous round's gradient as hint `M_t`, then moves the auxiliary iterate
//! with the observed gradient. Step sizes are self-confident:
//! `η_t = D / √(1 + Σ_{τ<t} ‖∇_τ − M_τ‖²_F)`.

use log::warn;
use nalgebra::SVD;

use crate::codebooks::{ser_decoder, Codebook};
use crate::error::{Error, Result};
use crate::numerics::{frobenius_norm, project_frobenius_ball, Matrix, Vector};

/// Which subgradient the learners follow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GradientMode {
    /// `(2/M) Σ_j Σ_{j'≠j} (x^{j'} − x^j)(y^j)ᵀ`: the surrogate's subgradient
    /// once `r ≥ 2·d*·D·L + 1/√T`, where every hinge is active.
    IndicatorFree,
    /// Exact subgradient of the surrogate at the given margin `r ≥ 1`.
    Hinge(f64),
}

/// Constants of the surrogate and the feasible ball `{‖G‖_F ≤ D}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurrogateParams {
    pub radius: f64,
    /// Bound `L` on channel-output norms.
    pub output_bound: f64,
    /// Largest pairwise codeword distance `d*`.
    pub d_star: f64,
    pub horizon: u64,
    pub mode: GradientMode,
}

impl SurrogateParams {
    pub fn new(
        radius: f64,
        output_bound: f64,
        d_star: f64,
        horizon: u64,
        mode: GradientMode,
    ) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::invalid(format!("radius D must be positive, got {radius}")));
        }
        if !(output_bound > 0.0) || !output_bound.is_finite() {
            return Err(Error::invalid(format!("output bound L must be positive, got {output_bound}")));
        }
        if horizon == 0 {
            return Err(Error::invalid("horizon T must be at least 1"));
        }
        if let GradientMode::Hinge(r) = mode {
            check_margin(r)?;
        }
        Ok(Self {
            radius,
            output_bound,
            d_star,
            horizon,
            mode,
        })
    }

    /// `r = 2·d*·D·L + 1/√T`.
    pub fn all_active_margin(&self) -> f64 {
        2.0 * self.d_star * self.radius * self.output_bound + 1.0 / (self.horizon as f64).sqrt()
    }

    /// Whether `d* ≥ 1/(2DL)`, the condition under which the all-active margin
    /// is at least 1.
    pub fn margin_condition_holds(&self) -> bool {
        self.d_star >= 1.0 / (2.0 * self.radius * self.output_bound)
    }

    /// Margin used to evaluate (and, in hinge mode, differentiate) the surrogate.
    pub fn margin(&self) -> f64 {
        match self.mode {
            GradientMode::IndicatorFree => self.all_active_margin().max(1.0),
            GradientMode::Hinge(r) => r,
        }
    }

    pub fn gradient(&self, g: &Matrix, cb: &Codebook, ys: &[Vector]) -> Result<Matrix> {
        match self.mode {
            GradientMode::IndicatorFree => indicator_free_subgradient(cb, ys),
            GradientMode::Hinge(r) => surrogate_subgradient(g, cb, ys, r),
        }
    }
}

/// `L = √(2(γ_X γ_H)² + 2γ_W²)`.
pub fn output_bound(gamma_x: f64, gamma_h: f64, gamma_w: f64) -> f64 {
    (2.0 * (gamma_x * gamma_h).powi(2) + 2.0 * gamma_w.powi(2)).sqrt()
}

fn check_margin(r: f64) -> Result<()> {
    if r >= 1.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("surrogate margin r must be ≥ 1, got {r}")))
    }
}

fn check_round(g: &Matrix, cb: &Codebook, ys: &[Vector]) -> Result<()> {
    Error::check_dim(cb.len(), ys.len())?;
    let d = cb.dim();
    Error::check_dim(d, g.nrows())?;
    Error::check_dim(d, g.ncols())?;
    for y in ys {
        Error::check_dim(d, y.len())?;
    }
    Ok(())
}

/// Squared distances `‖x^{j'} − G y^j‖²` for every `j'`, one row per `j`.
fn distance_table(g: &Matrix, cb: &Codebook, ys: &[Vector]) -> Vec<Vec<f64>> {
    ys.iter()
        .map(|y| {
            let z = g * y;
            cb.codewords().iter().map(|x| (x - &z).norm_squared()).collect()
        })
        .collect()
}

pub fn surrogate_loss(g: &Matrix, cb: &Codebook, ys: &[Vector], r: f64) -> Result<f64> {
    check_margin(r)?;
    check_round(g, cb, ys)?;
    let m = cb.len();
    let dist = distance_table(g, cb, ys);
    let mut total = 0.0;
    for (j, row) in dist.iter().enumerate() {
        for (k, &dk) in row.iter().enumerate() {
            if k != j {
                total += (r - dk + row[j]).max(0.0);
            }
        }
    }
    Ok(total / m as f64)
}

/// `(2/M) Σ_j Σ_{j'≠j} 1{‖x^{j'}−Gy^j‖² − ‖x^j−Gy^j‖² ≤ r}·(x^{j'} − x^j)(y^j)ᵀ`.
pub fn surrogate_subgradient(g: &Matrix, cb: &Codebook, ys: &[Vector], r: f64) -> Result<Matrix> {
    check_margin(r)?;
    check_round(g, cb, ys)?;
    let m = cb.len();
    let d = cb.dim();
    let xs = cb.codewords();
    let dist = distance_table(g, cb, ys);
    let mut grad = Matrix::zeros(d, d);
    for (j, row) in dist.iter().enumerate() {
        let mut direction = Vector::zeros(d);
        for (k, &dk) in row.iter().enumerate() {
            if k != j && dk - row[j] <= r {
                direction += &xs[k] - &xs[j];
            }
        }
        grad.ger(2.0 / m as f64, &direction, &ys[j], 1.0);
    }
    Ok(grad)
}

/// Surrogate subgradient with every hinge active. Since
/// `Σ_{j'≠j}(x^{j'} − x^j) = S − M·x^j` with `S = Σ_k x^k`, this costs
/// `O(M·d²)` rather than `O(M²·d)`.
pub fn indicator_free_subgradient(cb: &Codebook, ys: &[Vector]) -> Result<Matrix> {
    Error::check_dim(cb.len(), ys.len())?;
    let m = cb.len();
    let d = cb.dim();
    let xs = cb.codewords();
    let sum = xs.iter().fold(Vector::zeros(d), |acc, x| acc + x);
    let mut grad = Matrix::zeros(d, d);
    for (x, y) in xs.iter().zip(ys) {
        Error::check_dim(d, y.len())?;
        let direction = &sum - x * m as f64;
        grad.ger(2.0 / m as f64, &direction, y, 1.0);
    }
    Ok(grad)
}

/// Result of one learner round.
#[derive(Debug, Clone)]
pub struct RoundOutcome {
    /// Kernel played this round.
    pub kernel: Matrix,
    /// Step size used this round.
    pub eta: f64,
    /// Surrogate loss of the played kernel.
    pub surrogate: f64,
    /// 0-1 symbol error rate of the played kernel.
    pub ser: f64,
    /// `‖∇_t − M_t‖_F` (optimistic OMD) or `‖∇_t‖_F` (OGD).
    pub deviation: f64,
}

/// Optimistic OMD state for the decoder kernel.
#[derive(Debug, Clone)]
pub struct DecoderLearner {
    kernel: Matrix,
    aux: Matrix,
    hint: Matrix,
    cum_sq: f64,
    radius: f64,
    t: u64,
    use_hints: bool,
    played: bool,
}

impl DecoderLearner {
    /// Starts from `G₁ = G'₁ = 0` with a zero hint.
    pub fn new(dim: usize, radius: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("kernel dimension must be at least 1"));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::invalid(format!("radius D must be positive, got {radius}")));
        }
        Ok(Self {
            kernel: Matrix::zeros(dim, dim),
            aux: Matrix::zeros(dim, dim),
            hint: Matrix::zeros(dim, dim),
            cum_sq: 0.0,
            radius,
            t: 1,
            use_hints: true,
            played: false,
        })
    }

    /// Same learner with the hint pinned to zero.
    pub fn without_hints(dim: usize, radius: f64) -> Result<Self> {
        let mut learner = Self::new(dim, radius)?;
        learner.use_hints = false;
        Ok(learner)
    }

    pub fn round(&self) -> u64 {
        self.t
    }

    pub fn kernel(&self) -> &Matrix {
        &self.kernel
    }

    pub fn aux(&self) -> &Matrix {
        &self.aux
    }

    pub fn hint(&self) -> &Matrix {
        &self.hint
    }

    pub fn cumulative_deviation(&self) -> f64 {
        self.cum_sq
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn step_size(&self) -> f64 {
        self.radius / (1.0 + self.cum_sq).sqrt()
    }

    /// `G_t = Π[G'_t − η_t M_t]`. Uses rounds `1..t` only.
    pub fn play(&mut self) -> Result<&Matrix> {
        let eta = self.step_size();
        self.kernel = project_frobenius_ball(&(&self.aux - &self.hint * eta), self.radius)?;
        self.played = true;
        Ok(&self.kernel)
    }

    /// `G'_{t+1} = Π[G'_t − η_t ∇_t]`; returns `‖∇_t − M_t‖_F`.
    pub fn observe(&mut self, gradient: &Matrix) -> Result<f64> {
        if !self.played {
            return Err(Error::InvalidState(
                "observe called before play in this round".into(),
            ));
        }
        Error::check_dim(self.aux.nrows(), gradient.nrows())?;
        Error::check_dim(self.aux.ncols(), gradient.ncols())?;
        let eta = self.step_size();
        self.aux = project_frobenius_ball(&(&self.aux - gradient * eta), self.radius)?;
        let deviation = frobenius_norm(&(gradient - &self.hint));
        self.cum_sq += deviation * deviation;
        if self.use_hints {
            self.hint.copy_from(gradient);
        }
        self.t += 1;
        self.played = false;
        Ok(deviation)
    }
}

/// One optimistic OMD round: play from the hint, evaluate, update.
pub fn oomd_decoder_round(
    learner: &mut DecoderLearner,
    cb: &Codebook,
    ys: &[Vector],
    params: &SurrogateParams,
) -> Result<RoundOutcome> {
    let eta = learner.step_size();
    let kernel = learner.play()?.clone();
    check_round(&kernel, cb, ys)?;
    let ser = ser_decoder(cb, &kernel, ys)?;
    let surrogate = surrogate_loss(&kernel, cb, ys, params.margin())?;
    let gradient = params.gradient(&kernel, cb, ys)?;
    let deviation = learner.observe(&gradient)?;
    Ok(RoundOutcome {
        kernel,
        eta,
        surrogate,
        ser,
        deviation,
    })
}

/// Projected online gradient descent with self-confident step sizes
/// `η_t = D / √(1 + Σ_{τ<t} ‖∇_τ‖²_F)`.
#[derive(Debug, Clone)]
pub struct OgdLearner {
    kernel: Matrix,
    cum_sq: f64,
    radius: f64,
    t: u64,
}

impl OgdLearner {
    pub fn new(dim: usize, radius: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("kernel dimension must be at least 1"));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::invalid(format!("radius D must be positive, got {radius}")));
        }
        Ok(Self {
            kernel: Matrix::zeros(dim, dim),
            cum_sq: 0.0,
            radius,
            t: 1,
        })
    }

    pub fn kernel(&self) -> &Matrix {
        &self.kernel
    }

    pub fn round(&self) -> u64 {
        self.t
    }

    pub fn step_size(&self) -> f64 {
        self.radius / (1.0 + self.cum_sq).sqrt()
    }

    /// `G_{t+1} = Π[G_t − η_t ∇_t]`; returns `‖∇_t‖_F`.
    pub fn observe(&mut self, gradient: &Matrix) -> Result<f64> {
        Error::check_dim(self.kernel.nrows(), gradient.nrows())?;
        Error::check_dim(self.kernel.ncols(), gradient.ncols())?;
        let eta = self.step_size();
        self.kernel = project_frobenius_ball(&(&self.kernel - gradient * eta), self.radius)?;
        let norm = frobenius_norm(gradient);
        self.cum_sq += norm * norm;
        self.t += 1;
        Ok(norm)
    }
}

pub fn ogd_decoder_round(
    learner: &mut OgdLearner,
    cb: &Codebook,
    ys: &[Vector],
    params: &SurrogateParams,
) -> Result<RoundOutcome> {
    let eta = learner.step_size();
    let kernel = learner.kernel().clone();
    check_round(&kernel, cb, ys)?;
    let ser = ser_decoder(cb, &kernel, ys)?;
    let surrogate = surrogate_loss(&kernel, cb, ys, params.margin())?;
    let gradient = params.gradient(&kernel, cb, ys)?;
    let deviation = learner.observe(&gradient)?;
    Ok(RoundOutcome {
        kernel,
        eta,
        surrogate,
        ser,
        deviation,
    })
}

/// `(A + ridge·I)⁻¹`, refusing numerically singular systems.
fn regularized_inverse(a: &Matrix, ridge: f64) -> Result<Matrix> {
    let n = a.nrows();
    let shifted = a + Matrix::identity(n, n) * ridge;
    let singular = SVD::new(shifted.clone(), false, false).singular_values;
    let max = singular.max();
    let min = singular.min();
    if !(max.is_finite() && min > max * 1e-13) {
        return Err(Error::Singular(format!(
            "condition number too large (σ_min = {min:e}, σ_max = {max:e}, ridge = {ridge:e})"
        )));
    }
    shifted
        .try_inverse()
        .ok_or_else(|| Error::Singular("matrix inverse failed".into()))
}

/// Ridge least-squares channel estimate `Ĥ = Y Xᵀ (X Xᵀ + ridge·I)⁻¹`.
pub fn ls_channel_estimate(cb: &Codebook, ys: &[Vector], ridge: f64) -> Result<Matrix> {
    if !(ridge >= 0.0) || !ridge.is_finite() {
        return Err(Error::invalid(format!("ridge must be ≥ 0, got {ridge}")));
    }
    Error::check_dim(cb.len(), ys.len())?;
    for y in ys {
        Error::check_dim(cb.dim(), y.len())?;
    }
    let x = Matrix::from_columns(cb.codewords());
    let y = Matrix::from_columns(ys);
    let gram = &x * x.transpose();
    Ok(&y * x.transpose() * regularized_inverse(&gram, ridge)?)
}

/// Regularized pseudo-inverse `(ĤᵀĤ + ridge·I)⁻¹Ĥᵀ` of the LS channel
/// estimate, before projection.
pub fn ls_inverse(cb: &Codebook, ys: &[Vector], ridge: f64) -> Result<Matrix> {
    let h = ls_channel_estimate(cb, ys, ridge)?;
    let gram = h.transpose() * &h;
    Ok(regularized_inverse(&gram, ridge)? * h.transpose())
}

/// Least-squares baseline kernel, projected onto the `D`-ball.
pub fn ls_decoder(cb: &Codebook, ys: &[Vector], ridge: f64, radius: f64) -> Result<Matrix> {
    project_frobenius_ball(&ls_inverse(cb, ys, ridge)?, radius)
}

/// Logs a warning when a codebook is too tight for the all-active margin.
pub fn warn_if_margin_condition_fails(params: &SurrogateParams) {
    if !params.margin_condition_holds() {
        warn!(
            "d* = {} is below 1/(2DL) = {}; the all-active margin falls under 1 and is clamped",
            params.d_star,
            1.0 / (2.0 * params.radius * params.output_bound)
        );
    }
}
