//! Codebook selection as an adversarial multi-armed bandit.
//!
//! [`BanditLearner`] runs optimistic online mirror descent on the probability
//! simplex with the log-barrier regularizer `ψ(w) = (1/η) Σ_i ln(1/w_i)`.
//! Each round it plays `w_t = argmin ⟨w, m_t⟩ + B_ψ(w, w'_t)` where the hint
//! `m_{t,i}` is the last loss observed for arm `i`, samples an arm from
//! `w_t`, and moves the auxiliary point with the importance-weighted
//! estimate `ℓ̂_t`. EXP3 and uniform selection are provided as baselines.

use crate::error::{Error, Result};
use crate::numerics::Rng;

/// Largest admissible log-barrier learning rate.
pub const MAX_LOG_BARRIER_ETA: f64 = 1.0 / 162.0;

const SIMPLEX_TOLERANCE: f64 = 1e-10;
const SOLVER_TOLERANCE: f64 = 1e-12;
const SOLVER_MAX_ITERATIONS: usize = 200;

/// Strictly interior point of the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexPoint(Vec<f64>);

impl SimplexPoint {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::invalid("simplex point needs at least one coordinate"));
        }
        if let Some((i, x)) = w.iter().enumerate().find(|(_, &x)| !(x > 0.0) || !x.is_finite()) {
            return Err(Error::InvalidState(format!(
                "simplex coordinate {i} = {x} is not strictly positive"
            )));
        }
        let total: f64 = w.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::InvalidState(format!("simplex point sums to {total}")));
        }
        Ok(Self(w))
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("simplex point needs at least one coordinate"));
        }
        Ok(Self(vec![1.0 / n as f64; n]))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl std::ops::Index<usize> for SimplexPoint {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// `argmin_{w ∈ Δ} ⟨w, g⟩ + B_ψ(w, w_prev)` for the log-barrier `ψ` with rate `η`.
///
/// Stationarity gives `1/w_i = 1/w_prev,i + η(g_i − λ)`; the multiplier `λ`
/// lies below `min_i (g_i + 1/(η w_prev,i))`, where the sum of the `w_i` is
/// increasing in `λ`. It is found by a Newton iteration safeguarded with
/// bisection inside a bracket located by doubling.
pub fn logbarrier_bregman_step(prev: &SimplexPoint, g: &[f64], eta: f64) -> Result<SimplexPoint> {
    Error::check_dim(prev.len(), g.len())?;
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::invalid(format!("learning rate must be positive, got {eta}")));
    }
    if g.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("loss vector must be finite"));
    }
    let w_prev = prev.as_slice();
    if w_prev.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::InvalidState("previous point is not interior".into()));
    }
    // A constant loss vector is absorbed entirely by λ.
    if g.iter().all(|&x| x == g[0]) {
        return Ok(prev.clone());
    }

    let inv_prev: Vec<f64> = w_prev.iter().map(|&w| 1.0 / w).collect();
    let weights_at = |lambda: f64| -> Vec<f64> {
        inv_prev
            .iter()
            .zip(g)
            .map(|(&inv, &gi)| 1.0 / (inv + eta * (gi - lambda)))
            .collect()
    };

    // Every denominator is positive iff λ < upper.
    let upper = inv_prev
        .iter()
        .zip(g)
        .map(|(&inv, &gi)| gi + inv / eta)
        .fold(f64::INFINITY, f64::min);

    // Sum of weights tends to 0 as λ → −∞ and to +∞ as λ → upper.
    let total_at = |lambda: f64| -> f64 { weights_at(lambda).iter().sum() };
    let mut lo = upper - 1.0;
    let mut span = 1.0;
    let mut guard = 0;
    while total_at(lo) > 1.0 {
        span *= 2.0;
        lo = upper - span;
        guard += 1;
        if guard > 2000 {
            return Err(Error::SolverFailure("could not bracket the multiplier".into()));
        }
    }
    let mut hi = upper;

    // Start from the weighted mean of g, which is exact to first order.
    let mut lambda = w_prev.iter().zip(g).map(|(w, gi)| w * gi).sum::<f64>();
    if !(lambda > lo && lambda < hi) {
        lambda = 0.5 * (lo + hi);
    }
    for _ in 0..SOLVER_MAX_ITERATIONS {
        let w = weights_at(lambda);
        let total: f64 = w.iter().sum();
        let residual = total - 1.0;
        if residual.abs() <= SOLVER_TOLERANCE {
            let w: Vec<f64> = w.into_iter().map(|x| x / total).collect();
            return SimplexPoint::new(w);
        }
        if residual > 0.0 {
            hi = lambda;
        } else {
            lo = lambda;
        }
        // d(Σw)/dλ = η Σ w_i².
        let slope = eta * w.iter().map(|x| x * x).sum::<f64>();
        let newton = lambda - residual / slope;
        lambda = if newton > lo && newton < hi && slope > 0.0 {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= f64::EPSILON * lambda.abs().max(1.0) {
            let w = weights_at(lambda);
            let total: f64 = w.iter().sum();
            if (total - 1.0).abs() <= 1e-9 {
                return SimplexPoint::new(w.into_iter().map(|x| x / total).collect());
            }
            break;
        }
    }
    Err(Error::SolverFailure(format!(
        "log-barrier multiplier did not converge within {SOLVER_MAX_ITERATIONS} iterations"
    )))
}

/// `ℓ̂_i = m_i + (ℓ − m_i)/w_i` for the chosen arm, `m_i` elsewhere.
pub fn loss_estimator(
    loss_obs: f64,
    hints: &[f64],
    w: &SimplexPoint,
    chosen: usize,
) -> Result<Vec<f64>> {
    Error::check_dim(w.len(), hints.len())?;
    if chosen >= w.len() {
        return Err(Error::invalid(format!("arm {chosen} out of range 0..{}", w.len())));
    }
    let p = w[chosen];
    if !(p > 0.0) {
        return Err(Error::InvalidState(format!("arm {chosen} has probability {p}")));
    }
    let mut estimate = hints.to_vec();
    estimate[chosen] += (loss_obs - hints[chosen]) / p;
    Ok(estimate)
}

/// Arm-selection policy driven by bandit feedback.
pub trait ArmSelector {
    fn arms(&self) -> usize;

    /// Picks this round's arm.
    fn select(&mut self, rng: &mut Rng) -> Result<usize>;

    /// Reports the loss of the arm picked by the last [`select`](Self::select).
    fn feedback(&mut self, arm: usize, loss: f64) -> Result<()>;

    /// Sampling distribution used by the last [`select`](Self::select).
    fn distribution(&self) -> &[f64];

    /// Current learning rate, if the policy has one.
    fn learning_rate(&self) -> Option<f64>;
}

/// Learning-rate policy for the log-barrier learner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateSchedule {
    /// Fixed `η ≤ 1/162`.
    Constant(f64),
    /// Starts at `η ≤ 1/162` and restarts from the uniform point with `η`
    /// halved each time the cumulative squared hint error
    /// `Σ_τ (ℓ_τ − m_{τ,i_τ})²` passes the next power of two.
    Doubling(f64),
}

impl RateSchedule {
    fn initial(&self) -> f64 {
        match *self {
            Self::Constant(eta) | Self::Doubling(eta) => eta,
        }
    }
}

/// Optimistic OMD with log-barrier regularizer over `N` arms.
#[derive(Debug, Clone)]
pub struct BanditLearner {
    w: SimplexPoint,
    w_aux: SimplexPoint,
    hints: Vec<f64>,
    eta: f64,
    schedule: RateSchedule,
    hint_error: f64,
    next_restart: f64,
    restarts: u32,
    t: u64,
    pending: Option<usize>,
}

impl BanditLearner {
    /// Starts from the uniform point, the minimizer of the symmetric
    /// log-barrier, with all hints at zero.
    pub fn new(arms: usize, schedule: RateSchedule) -> Result<Self> {
        let eta = schedule.initial();
        if !(eta > 0.0) || eta > MAX_LOG_BARRIER_ETA {
            return Err(Error::invalid(format!(
                "log-barrier learning rate must lie in (0, 1/162], got {eta}"
            )));
        }
        let uniform = SimplexPoint::uniform(arms)?;
        Ok(Self {
            w: uniform.clone(),
            w_aux: uniform,
            hints: vec![0.0; arms],
            eta,
            schedule,
            hint_error: 0.0,
            next_restart: 1.0,
            restarts: 0,
            t: 1,
            pending: None,
        })
    }

    pub fn round(&self) -> u64 {
        self.t
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn restarts(&self) -> u32 {
        self.restarts
    }

    pub fn hints(&self) -> &[f64] {
        &self.hints
    }

    /// Point played in the current (or most recent) round.
    pub fn weights(&self) -> &SimplexPoint {
        &self.w
    }

    pub fn aux_weights(&self) -> &SimplexPoint {
        &self.w_aux
    }

    /// Computes `w_t` from the hint and samples an arm from it.
    pub fn choose_arm(&mut self, rng: &mut Rng) -> Result<usize> {
        self.w = logbarrier_bregman_step(&self.w_aux, &self.hints, self.eta)?;
        let arm = if self.w.len() == 1 {
            0
        } else {
            rng.categorical(self.w.as_slice())
        };
        self.pending = Some(arm);
        Ok(arm)
    }

    /// Feeds back the observed loss of this round's arm.
    pub fn update_after_loss(&mut self, chosen: usize, loss_obs: f64) -> Result<()> {
        match self.pending.take() {
            Some(arm) if arm == chosen => {}
            Some(arm) => {
                self.pending = Some(arm);
                return Err(Error::InvalidState(format!(
                    "feedback for arm {chosen} but arm {arm} was chosen"
                )));
            }
            None => {
                return Err(Error::InvalidState("feedback before choose_arm".into()));
            }
        }
        if !(0.0..=1.0).contains(&loss_obs) {
            return Err(Error::invalid(format!("loss must lie in [0, 1], got {loss_obs}")));
        }
        let estimate = loss_estimator(loss_obs, &self.hints, &self.w, chosen)?;
        self.w_aux = logbarrier_bregman_step(&self.w_aux, &estimate, self.eta)?;

        let miss = loss_obs - self.hints[chosen];
        self.hints[chosen] = loss_obs;
        self.hint_error += miss * miss;
        if let RateSchedule::Doubling(_) = self.schedule {
            if self.hint_error > self.next_restart {
                while self.hint_error > self.next_restart {
                    self.next_restart *= 2.0;
                }
                self.eta *= 0.5;
                self.restarts += 1;
                self.w_aux = SimplexPoint::uniform(self.hints.len())?;
            }
        }
        self.t += 1;
        Ok(())
    }
}

impl ArmSelector for BanditLearner {
    fn arms(&self) -> usize {
        self.hints.len()
    }

    fn select(&mut self, rng: &mut Rng) -> Result<usize> {
        self.choose_arm(rng)
    }

    fn feedback(&mut self, arm: usize, loss: f64) -> Result<()> {
        self.update_after_loss(arm, loss)
    }

    fn distribution(&self) -> &[f64] {
        self.w.as_slice()
    }

    fn learning_rate(&self) -> Option<f64> {
        Some(self.eta)
    }
}

/// Exponential weights over cumulative importance-weighted losses.
#[derive(Debug, Clone)]
pub struct Exp3 {
    eta: f64,
    cumulative: Vec<f64>,
    probs: Vec<f64>,
}

impl Exp3 {
    /// Uses the horizon-tuned rate `η = √(2 ln N / (N T))`.
    pub fn new(arms: usize, horizon: u64) -> Result<Self> {
        if arms == 0 {
            return Err(Error::invalid("EXP3 needs at least one arm"));
        }
        if horizon == 0 {
            return Err(Error::invalid("EXP3 horizon must be at least 1"));
        }
        let n = arms as f64;
        Self::with_rate(arms, (2.0 * n.ln() / (n * horizon as f64)).sqrt())
    }

    pub fn with_rate(arms: usize, eta: f64) -> Result<Self> {
        if arms == 0 {
            return Err(Error::invalid("EXP3 needs at least one arm"));
        }
        if !(eta >= 0.0) || !eta.is_finite() {
            return Err(Error::invalid(format!("EXP3 rate must be ≥ 0, got {eta}")));
        }
        Ok(Self {
            eta,
            cumulative: vec![0.0; arms],
            probs: vec![1.0 / arms as f64; arms],
        })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    fn refresh(&mut self) {
        let best = self.cumulative.iter().copied().fold(f64::INFINITY, f64::min);
        for (p, &l) in self.probs.iter_mut().zip(&self.cumulative) {
            *p = (-self.eta * (l - best)).exp();
        }
        let total: f64 = self.probs.iter().sum();
        for p in &mut self.probs {
            *p /= total;
        }
    }
}

impl ArmSelector for Exp3 {
    fn arms(&self) -> usize {
        self.probs.len()
    }

    fn select(&mut self, rng: &mut Rng) -> Result<usize> {
        self.refresh();
        Ok(if self.probs.len() == 1 {
            0
        } else {
            rng.categorical(&self.probs)
        })
    }

    fn feedback(&mut self, arm: usize, loss: f64) -> Result<()> {
        if arm >= self.probs.len() {
            return Err(Error::invalid(format!("arm {arm} out of range")));
        }
        self.cumulative[arm] += loss / self.probs[arm];
        Ok(())
    }

    fn distribution(&self) -> &[f64] {
        &self.probs
    }

    fn learning_rate(&self) -> Option<f64> {
        Some(self.eta)
    }
}

pub fn random_select(arms: usize, rng: &mut Rng) -> usize {
    if arms <= 1 {
        0
    } else {
        rng.index(arms)
    }
}

/// Uniformly random arm every round.
#[derive(Debug, Clone)]
pub struct UniformSelector {
    probs: Vec<f64>,
}

impl UniformSelector {
    pub fn new(arms: usize) -> Result<Self> {
        if arms == 0 {
            return Err(Error::invalid("selector needs at least one arm"));
        }
        Ok(Self {
            probs: vec![1.0 / arms as f64; arms],
        })
    }
}

impl ArmSelector for UniformSelector {
    fn arms(&self) -> usize {
        self.probs.len()
    }

    fn select(&mut self, rng: &mut Rng) -> Result<usize> {
        Ok(random_select(self.probs.len(), rng))
    }

    fn feedback(&mut self, _arm: usize, _loss: f64) -> Result<()> {
        Ok(())
    }

    fn distribution(&self) -> &[f64] {
        &self.probs
    }

    fn learning_rate(&self) -> Option<f64> {
        None
    }
}
