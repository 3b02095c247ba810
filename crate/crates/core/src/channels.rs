//! Time-correlated channel simulators.
//!
//! Both channels follow a first-order Markov recursion
//! `S_{t+1} = √(1−μ_t)·S_t + √μ_t·E_t`, where `S` is the fading gain matrix
//! or the additive noise vector and every entry of the innovation `E_t` is an
//! i.i.d. draw from a Gaussian or Laplace mixture. The memoryless Rayleigh and
//! AWGN channels are the `μ_t ≡ 1` special cases and are built here from the
//! same types.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MixtureKind {
    Gaussian,
    Laplace,
}

/// Finite mixture of Gaussian or Laplace components.
///
/// `scales` holds the standard deviation for Gaussian components and the
/// Laplace scale `γ` (density `e^{-|x-ν|/γ}/(2γ)`) for Laplace components.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureDistribution {
    kind: MixtureKind,
    weights: Vec<f64>,
    means: Vec<f64>,
    scales: Vec<f64>,
}

impl MixtureDistribution {
    pub fn new(
        kind: MixtureKind,
        weights: Vec<f64>,
        means: Vec<f64>,
        scales: Vec<f64>,
    ) -> Result<Self> {
        let k = weights.len();
        if k == 0 {
            return Err(Error::invalid("mixture needs at least one component"));
        }
        Error::check_dim(k, means.len())?;
        Error::check_dim(k, scales.len())?;
        if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::invalid("mixture weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("mixture weights sum to {total}, not 1")));
        }
        if means.iter().any(|m| !m.is_finite()) {
            return Err(Error::invalid("mixture means must be finite"));
        }
        if scales.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::invalid("mixture scales must be positive and finite"));
        }
        Ok(Self {
            kind,
            weights,
            means,
            scales,
        })
    }

    /// Single Gaussian component `N(mean, std²)`.
    pub fn gaussian(mean: f64, std: f64) -> Result<Self> {
        Self::new(MixtureKind::Gaussian, vec![1.0], vec![mean], vec![std])
    }

    pub fn kind(&self) -> MixtureKind {
        self.kind
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn sample(&self, rng: &mut Rng) -> f64 {
        let k = if self.weights.len() == 1 {
            0
        } else {
            rng.categorical(&self.weights)
        };
        let base = match self.kind {
            MixtureKind::Gaussian => rng.normal(),
            MixtureKind::Laplace => rng.laplace(),
        };
        self.means[k] + self.scales[k] * base
    }

    pub fn sample_vector(&self, dim: usize, rng: &mut Rng) -> Vector {
        Vector::from_fn(dim, |_, _| self.sample(rng))
    }

    pub fn sample_matrix(&self, rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| self.sample(rng))
    }
}

/// Random mixture with symmetric Dirichlet(1, …, 1) weights, means uniform on
/// `(0, ρ)` and unit scales.
pub fn make_mixture(
    kind: MixtureKind,
    components: usize,
    rho: f64,
    rng: &mut Rng,
) -> Result<MixtureDistribution> {
    if components == 0 {
        return Err(Error::invalid("mixture component count K must be at least 1"));
    }
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(Error::invalid(format!("mixture mean range ρ must be ≥ 0, got {rho}")));
    }
    let weights = if components == 1 {
        vec![1.0]
    } else {
        rng.dirichlet(&vec![1.0; components])?
    };
    let means = (0..components).map(|_| rng.uniform_range(0.0, rho)).collect();
    MixtureDistribution::new(kind, weights, means, vec![1.0; components])
}

/// How the mixing coefficient `μ_t` evolves with the round index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MixingSchedule {
    /// `μ_t = μ^t`.
    Geometric(f64),
    /// `μ_t = μ`.
    Constant(f64),
}

impl MixingSchedule {
    pub fn new_geometric(mu: f64) -> Result<Self> {
        check_unit_interval(mu)?;
        Ok(Self::Geometric(mu))
    }

    pub fn new_constant(mu: f64) -> Result<Self> {
        check_unit_interval(mu)?;
        Ok(Self::Constant(mu))
    }

    pub fn mu_at(&self, t: u64) -> f64 {
        match *self {
            Self::Geometric(mu) => mu.powi(t.min(i32::MAX as u64) as i32),
            Self::Constant(mu) => mu,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Self::Geometric(mu) | Self::Constant(mu) => check_unit_interval(mu),
        }
    }
}

fn check_unit_interval(mu: f64) -> Result<()> {
    if (0.0..=1.0).contains(&mu) {
        Ok(())
    } else {
        Err(Error::invalid(format!("mixing coefficient μ must lie in [0, 1], got {mu}")))
    }
}

/// `Y = H·X + W` with a Markov-evolving gain `H` and white Gaussian `W`.
///
/// The state's round index starts at 1; the gain it holds is the one used in
/// the current round, and [`FadingChannelState::step`] applies `μ_t` of the
/// current round to produce the next gain.
#[derive(Debug, Clone)]
pub struct FadingChannelState {
    t: u64,
    gain: Matrix,
    schedule: MixingSchedule,
    innovation: MixtureDistribution,
    noise_std: f64,
}

impl FadingChannelState {
    pub fn new(
        gain: Matrix,
        schedule: MixingSchedule,
        innovation: MixtureDistribution,
        noise_std: f64,
    ) -> Result<Self> {
        if !gain.is_square() {
            return Err(Error::invalid("fading gain must be square"));
        }
        if gain.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("fading gain must be finite"));
        }
        if !(noise_std >= 0.0) || !noise_std.is_finite() {
            return Err(Error::invalid("noise standard deviation must be ≥ 0"));
        }
        schedule.validate()?;
        Ok(Self {
            t: 1,
            gain,
            schedule,
            innovation,
            noise_std,
        })
    }

    /// Markov fading channel whose initial gain has i.i.d. `N(0, 1)` entries.
    pub fn markov(
        dim: usize,
        schedule: MixingSchedule,
        innovation: MixtureDistribution,
        noise_std: f64,
        rng: &mut Rng,
    ) -> Result<Self> {
        let gain = rng.normal_matrix(dim, dim);
        Self::new(gain, schedule, innovation, noise_std)
    }

    /// Memoryless Rayleigh channel: every round draws a fresh gain with
    /// i.i.d. `N(0, 1/d)` entries.
    pub fn rayleigh(dim: usize, noise_std: f64, rng: &mut Rng) -> Result<Self> {
        let innovation = MixtureDistribution::gaussian(0.0, 1.0 / (dim as f64).sqrt())?;
        let gain = innovation.sample_matrix(dim, dim, rng);
        Self::new(gain, MixingSchedule::Constant(1.0), innovation, noise_std)
    }

    pub fn round(&self) -> u64 {
        self.t
    }

    pub fn dim(&self) -> usize {
        self.gain.nrows()
    }

    pub fn gain(&self) -> &Matrix {
        &self.gain
    }

    pub fn schedule(&self) -> MixingSchedule {
        self.schedule
    }

    pub fn innovation(&self) -> &MixtureDistribution {
        &self.innovation
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    /// Advance to the next round's gain.
    pub fn step(&mut self, rng: &mut Rng) {
        let mu = self.schedule.mu_at(self.t);
        let d = self.dim();
        let innovation = self.innovation.sample_matrix(d, d, rng);
        if mu == 0.0 {
            // frozen
        } else if mu == 1.0 {
            self.gain = innovation;
        } else {
            self.gain = &self.gain * (1.0 - mu).sqrt() + innovation * mu.sqrt();
        }
        self.t += 1;
    }

    /// Pass one codeword through the current round's gain. Noise is drawn
    /// afresh for every call; the gain is shared by all calls in the round.
    pub fn transmit(&self, x: &Vector, rng: &mut Rng) -> Result<Vector> {
        Error::check_dim(self.dim(), x.len())?;
        let mut y = &self.gain * x;
        if self.noise_std > 0.0 {
            for v in y.iter_mut() {
                *v += self.noise_std * rng.normal();
            }
        }
        Ok(y)
    }
}

/// `Y = X + Z` with a Markov-evolving noise vector `Z`.
#[derive(Debug, Clone)]
pub struct NoiseChannelState {
    t: u64,
    noise: Vector,
    schedule: MixingSchedule,
    innovation: MixtureDistribution,
}

impl NoiseChannelState {
    pub fn new(
        noise: Vector,
        schedule: MixingSchedule,
        innovation: MixtureDistribution,
    ) -> Result<Self> {
        if noise.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("channel noise must be finite"));
        }
        schedule.validate()?;
        Ok(Self {
            t: 1,
            noise,
            schedule,
            innovation,
        })
    }

    /// Markov noise channel whose initial noise is an innovation draw.
    pub fn markov(
        dim: usize,
        schedule: MixingSchedule,
        innovation: MixtureDistribution,
        rng: &mut Rng,
    ) -> Result<Self> {
        let noise = innovation.sample_vector(dim, rng);
        Self::new(noise, schedule, innovation)
    }

    /// Memoryless Gaussian noise, `Z_t ~ N(0, σ²I)` independently each round.
    pub fn awgn(dim: usize, std: f64, rng: &mut Rng) -> Result<Self> {
        let innovation = MixtureDistribution::gaussian(0.0, std)?;
        Self::markov(dim, MixingSchedule::Constant(1.0), innovation, rng)
    }

    pub fn round(&self) -> u64 {
        self.t
    }

    pub fn dim(&self) -> usize {
        self.noise.len()
    }

    pub fn noise(&self) -> &Vector {
        &self.noise
    }

    pub fn schedule(&self) -> MixingSchedule {
        self.schedule
    }

    pub fn innovation(&self) -> &MixtureDistribution {
        &self.innovation
    }

    pub fn step(&mut self, rng: &mut Rng) {
        let mu = self.schedule.mu_at(self.t);
        let innovation = self.innovation.sample_vector(self.dim(), rng);
        if mu == 0.0 {
        } else if mu == 1.0 {
            self.noise = innovation;
        } else {
            self.noise = &self.noise * (1.0 - mu).sqrt() + innovation * mu.sqrt();
        }
        self.t += 1;
    }

    pub fn transmit(&self, x: &Vector) -> Result<Vector> {
        Error::check_dim(self.dim(), x.len())?;
        Ok(x + &self.noise)
    }
}

/// Per-dimension noise standard deviation for a target SNR, with
/// `SNR = γ_X² / (d·σ_W²)`.
pub fn noise_std_for_snr(gamma_x: f64, dim: usize, snr_db: f64) -> f64 {
    let snr = 10f64.powf(snr_db / 10.0);
    gamma_x / (dim as f64 * snr).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn std_normal() -> MixtureDistribution {
        MixtureDistribution::gaussian(0.0, 1.0).unwrap()
    }

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    #[test]
    fn degenerate_mixture() {
        let mut rng = Rng::seeded(0);
        let m = make_mixture(MixtureKind::Gaussian, 1, 0.0, &mut rng).unwrap();
        assert_eq!(m.weights(), &[1.0]);
        assert_eq!(m.means(), &[0.0]);
        assert_eq!(m.scales(), &[1.0]);
    }

    #[test]
    fn three_component_mixtures() {
        let mut rng = Rng::seeded(11);
        let g = make_mixture(MixtureKind::Gaussian, 3, 0.1, &mut rng).unwrap();
        assert_eq!(g.components(), 3);
        assert!((g.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(g.means().iter().all(|&m| (0.0..=0.1).contains(&m)));

        let l = make_mixture(MixtureKind::Laplace, 3, 0.7, &mut rng).unwrap();
        assert_eq!(l.kind(), MixtureKind::Laplace);
        assert!(l.means().iter().all(|&m| (0.0..=0.7).contains(&m)));
    }

    #[test]
    fn mixture_parameter_errors() {
        let mut rng = Rng::seeded(0);
        assert!(matches!(
            make_mixture(MixtureKind::Gaussian, 0, 0.1, &mut rng),
            Err(Error::InvalidParameter(_))
        ));
        assert!(make_mixture(MixtureKind::Gaussian, 2, -0.1, &mut rng).is_err());
        assert!(MixtureDistribution::new(
            MixtureKind::Gaussian,
            vec![0.5, 0.6],
            vec![0.0, 0.0],
            vec![1.0, 1.0]
        )
        .is_err());
        assert!(MixtureDistribution::gaussian(0.0, 0.0).is_err());
    }

    #[test]
    fn gaussian_component_moments() {
        let mut rng = Rng::seeded(21);
        let dist = std_normal();
        let xs: Vec<f64> = (0..100_000).map(|_| dist.sample(&mut rng)).collect();
        let (m, v) = mean_var(&xs);
        assert!(m.abs() < 0.02);
        assert!((v - 1.0).abs() < 0.05);
    }

    #[test]
    fn laplace_component_moments() {
        let mut rng = Rng::seeded(22);
        let dist =
            MixtureDistribution::new(MixtureKind::Laplace, vec![1.0], vec![5.0], vec![1.0])
                .unwrap();
        let xs: Vec<f64> = (0..100_000).map(|_| dist.sample(&mut rng)).collect();
        let (m, v) = mean_var(&xs);
        assert!((m - 5.0).abs() < 0.05);
        assert!((v - 2.0).abs() < 0.1);
    }

    #[test]
    fn degenerate_weights_pick_first_component() {
        let mut rng = Rng::seeded(23);
        let dist = MixtureDistribution::new(
            MixtureKind::Gaussian,
            vec![1.0, 0.0],
            vec![100.0, -100.0],
            vec![1.0, 1.0],
        )
        .unwrap();
        for _ in 0..10_000 {
            assert!(dist.sample(&mut rng) > 50.0);
        }
    }

    #[test]
    fn geometric_schedule_powers() {
        let s = MixingSchedule::new_geometric(0.96).unwrap();
        let mut partial = 1.0;
        let mut prev = f64::INFINITY;
        for t in 1..200u64 {
            assert_eq!(s.mu_at(t), 0.96f64.powi(t as i32));
            partial *= 1.0 - s.mu_at(t);
            assert!(partial <= prev);
            prev = partial;
        }
        assert_eq!(MixingSchedule::new_constant(0.03).unwrap().mu_at(500), 0.03);
        assert!(MixingSchedule::new_geometric(1.5).is_err());
    }

    #[test]
    fn frozen_and_memoryless_fading() {
        let mut rng = Rng::seeded(31);
        let gain = rng.normal_matrix(3, 3);
        let mut frozen =
            FadingChannelState::new(gain.clone(), MixingSchedule::Constant(0.0), std_normal(), 0.1)
                .unwrap();
        frozen.step(&mut rng);
        assert_eq!(frozen.gain(), &gain);
        assert_eq!(frozen.round(), 2);

        let mut fresh =
            FadingChannelState::new(gain.clone(), MixingSchedule::Constant(1.0), std_normal(), 0.1)
                .unwrap();
        let mut replay = Rng::seeded(99);
        let mut rng2 = replay.clone();
        fresh.step(&mut rng2);
        let expected = std_normal().sample_matrix(3, 3, &mut replay);
        assert_eq!(fresh.gain(), &expected);
    }

    #[test]
    fn geometric_fading_stays_bounded() {
        let mut rng = Rng::seeded(41);
        let schedule = MixingSchedule::new_geometric(0.96).unwrap();
        let trajectories = 100;
        let mut sum_sq = vec![0.0; 1001];
        for _ in 0..trajectories {
            let mut ch = FadingChannelState::markov(2, schedule, std_normal(), 0.0, &mut rng)
                .unwrap();
            for acc in sum_sq.iter_mut() {
                let g = ch.gain();
                *acc += g.iter().map(|v| v * v).sum::<f64>() / 4.0;
                ch.step(&mut rng);
            }
        }
        // Convex mixing of unit-variance matrices keeps the entrywise second
        // moment at 1; allow Monte-Carlo slack.
        for (t, s) in sum_sq.iter().enumerate() {
            let second_moment = s / trajectories as f64;
            assert!(second_moment < 2.0, "t = {t}: {second_moment}");
        }
    }

    #[test]
    fn frozen_and_memoryless_noise() {
        let mut rng = Rng::seeded(51);
        let z = Vector::from_vec(vec![0.3, -0.2]);
        let mut frozen =
            NoiseChannelState::new(z.clone(), MixingSchedule::Constant(0.0), std_normal()).unwrap();
        frozen.step(&mut rng);
        assert_eq!(frozen.noise(), &z);

        let mut fresh =
            NoiseChannelState::new(z, MixingSchedule::Constant(1.0), std_normal()).unwrap();
        let mut replay = Rng::seeded(5);
        let mut rng2 = replay.clone();
        fresh.step(&mut rng2);
        assert_eq!(fresh.noise(), &std_normal().sample_vector(2, &mut replay));
    }

    #[test]
    fn noise_recursion_stationary_variance() {
        // var_{t+1} = (1-μ)var_t + μ·1 has fixed point 1 for any start.
        let mut rng = Rng::seeded(61);
        let mut ch = NoiseChannelState::new(
            Vector::zeros(1),
            MixingSchedule::new_constant(0.5).unwrap(),
            std_normal(),
        )
        .unwrap();
        let burn_in = 100;
        let mut xs = Vec::with_capacity(100_000);
        for t in 0..100_000 + burn_in {
            ch.step(&mut rng);
            if t >= burn_in {
                xs.push(ch.noise()[0]);
            }
        }
        let (_, v) = mean_var(&xs);
        assert!((v - 1.0).abs() < 0.05, "variance {v}");
    }

    #[test]
    fn fading_transmission() {
        let mut rng = Rng::seeded(71);
        let x = Vector::from_vec(vec![1.0, 1.0]);
        let id = FadingChannelState::new(
            Matrix::identity(2, 2),
            MixingSchedule::Constant(0.0),
            std_normal(),
            0.0,
        )
        .unwrap();
        assert_eq!(id.transmit(&x, &mut rng).unwrap(), x);

        let double = FadingChannelState::new(
            Matrix::identity(2, 2) * 2.0,
            MixingSchedule::Constant(0.0),
            std_normal(),
            0.0,
        )
        .unwrap();
        assert_eq!(
            double.transmit(&x, &mut rng).unwrap(),
            Vector::from_vec(vec![2.0, 2.0])
        );
        assert!(matches!(
            double.transmit(&Vector::zeros(3), &mut rng),
            Err(Error::DimensionMismatch { expected: 2, found: 3 })
        ));
    }

    #[test]
    fn fading_noise_energy() {
        let mut rng = Rng::seeded(72);
        let ch = FadingChannelState::new(
            Matrix::identity(8, 8),
            MixingSchedule::Constant(0.0),
            std_normal(),
            1.0,
        )
        .unwrap();
        let zero = Vector::zeros(8);
        let n = 100_000;
        let energy = (0..n)
            .map(|_| ch.transmit(&zero, &mut rng).unwrap().norm_squared())
            .sum::<f64>()
            / n as f64;
        assert!((energy - 8.0).abs() < 0.02 * 8.0, "energy {energy}");
    }

    #[test]
    fn gain_shared_within_round() {
        let mut rng = Rng::seeded(73);
        let gain = rng.normal_matrix(4, 4);
        let ch = FadingChannelState::new(gain, MixingSchedule::Constant(0.5), std_normal(), 0.0)
            .unwrap();
        let e = Vector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        let a = ch.transmit(&e, &mut rng).unwrap();
        let b = ch.transmit(&e, &mut rng).unwrap();
        assert_eq!(a, b);
        assert_eq!(ch.transmit(&Vector::zeros(4), &mut rng).unwrap(), Vector::zeros(4));
    }

    #[test]
    fn additive_transmission() {
        let zero = NoiseChannelState::new(Vector::zeros(2), MixingSchedule::Constant(0.0), std_normal())
            .unwrap();
        let x = Vector::from_vec(vec![1.0, 2.0]);
        assert_eq!(zero.transmit(&x).unwrap(), x);

        let z = Vector::from_vec(vec![0.5, -0.5]);
        let ch = NoiseChannelState::new(z.clone(), MixingSchedule::Constant(0.0), std_normal())
            .unwrap();
        assert_eq!(ch.transmit(&Vector::zeros(2)).unwrap(), z);
        assert_eq!(ch.transmit(&x).unwrap(), Vector::from_vec(vec![1.5, 1.5]));
        assert!(ch.transmit(&Vector::zeros(3)).is_err());
    }

    #[test]
    fn rayleigh_and_awgn_are_memoryless_special_cases() {
        let mut rng = Rng::seeded(81);
        let ray = FadingChannelState::rayleigh(4, 0.1, &mut rng).unwrap();
        assert_eq!(ray.schedule().mu_at(17), 1.0);
        assert_eq!(ray.innovation().components(), 1);
        assert_relative_eq!(ray.innovation().scales()[0], 0.5);

        let awgn = NoiseChannelState::awgn(4, 0.3, &mut rng).unwrap();
        assert_eq!(awgn.schedule(), MixingSchedule::Constant(1.0));
        assert_eq!(awgn.innovation().means(), &[0.0]);
        assert_eq!(awgn.innovation().scales(), &[0.3]);

        // Entrywise variance of the Rayleigh gain is 1/d.
        let mut ray = ray;
        let mut acc = 0.0;
        let rounds = 20_000;
        for _ in 0..rounds {
            ray.step(&mut rng);
            acc += ray.gain().iter().map(|v| v * v).sum::<f64>() / 16.0;
        }
        assert!((acc / rounds as f64 - 0.25).abs() < 0.01);
    }

    #[test]
    fn snr_to_noise_std() {
        // 24 dB, d = 8, unit codewords: σ² = 1/(8·10^2.4).
        let s = noise_std_for_snr(1.0, 8, 24.0);
        assert_relative_eq!(s * s, 1.0 / (8.0 * 10f64.powf(2.4)), max_relative = 1e-12);
        assert_relative_eq!(noise_std_for_snr(1.0, 1, 0.0), 1.0);
    }
}
