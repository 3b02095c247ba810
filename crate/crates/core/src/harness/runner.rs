//! Seeded experiment runs for both tasks.
//!
//! Every seed draws its randomness from separate streams for the channel
//! evolution, the per-symbol noise, the codebooks and the learner, so two
//! algorithms run with the same seed see the same channel realization.

use log::{debug, info};
use rayon::prelude::*;

use crate::bandit::{ArmSelector, BanditLearner, Exp3, RateSchedule, UniformSelector};
use crate::channels::{
    make_mixture, noise_std_for_snr, FadingChannelState, MixingSchedule, MixtureDistribution,
    NoiseChannelState,
};
use crate::codebooks::{
    generate_super_codebook, make_constant_modulus_codebook, max_pairwise_distance, ser_codebook,
    ser_decoder, Codebook, SuperCodebook,
};
use crate::decoder::{
    ls_decoder, oomd_decoder_round, ogd_decoder_round, output_bound, surrogate_loss,
    warn_if_margin_condition_fails, DecoderLearner, GradientMode, OgdLearner, SurrogateParams,
};
use crate::error::{Error, Result};
use crate::numerics::{frobenius_norm, Matrix, Rng, Vector};

use super::config::{Algorithm, ChannelKind, ExperimentConfig, Task};
use super::records::{RoundRecord, SeedRun};

pub const STREAM_CHANNEL: u64 = 1;
pub const STREAM_NOISE: u64 = 2;
pub const STREAM_CODEBOOK: u64 = 3;
pub const STREAM_LEARNER: u64 = 4;

fn innovation(cfg: &ExperimentConfig, rng: &mut Rng) -> Result<MixtureDistribution> {
    make_mixture(cfg.dist.into(), cfg.k, cfg.rho, rng)
}

/// Codebook, fading channel and noise source of one decoder-task run.
#[derive(Debug, Clone)]
pub struct DecoderEnvironment {
    pub codebook: Codebook,
    pub channel: FadingChannelState,
    channel_rng: Rng,
    noise_rng: Rng,
}

impl DecoderEnvironment {
    pub fn new(cfg: &ExperimentConfig, seed: u64) -> Result<Self> {
        let mut codebook_rng = Rng::derived(seed, STREAM_CODEBOOK);
        let codebook = make_constant_modulus_codebook(cfg.m, cfg.d, cfg.gamma_x, &mut codebook_rng)?;
        let mut channel_rng = Rng::derived(seed, STREAM_CHANNEL);
        let sigma_w = noise_std_for_snr(cfg.gamma_x, cfg.d, cfg.snr_db);
        let channel = match cfg.channel {
            ChannelKind::Markov => {
                let innovation = innovation(cfg, &mut channel_rng)?;
                FadingChannelState::markov(cfg.d, cfg.schedule()?, innovation, sigma_w, &mut channel_rng)?
            }
            ChannelKind::Rayleigh => FadingChannelState::rayleigh(cfg.d, sigma_w, &mut channel_rng)?,
            // Unit gain held fixed: only the Gaussian noise remains.
            ChannelKind::Awgn => FadingChannelState::new(
                Matrix::identity(cfg.d, cfg.d),
                MixingSchedule::new_constant(0.0)?,
                MixtureDistribution::gaussian(0.0, 1.0)?,
                sigma_w,
            )?,
        };
        Ok(Self::from_parts(codebook, channel, seed))
    }

    pub fn from_parts(codebook: Codebook, channel: FadingChannelState, seed: u64) -> Self {
        Self {
            codebook,
            channel,
            channel_rng: Rng::derived(seed, STREAM_CHANNEL),
            noise_rng: Rng::derived(seed, STREAM_NOISE),
        }
    }

    /// This round's outputs for every training codeword, all through the
    /// same gain.
    pub fn outputs(&mut self) -> Result<Vec<Vector>> {
        self.codebook
            .codewords()
            .iter()
            .map(|x| self.channel.transmit(x, &mut self.noise_rng))
            .collect()
    }

    pub fn advance(&mut self) {
        self.channel.step(&mut self.channel_rng);
    }
}

/// Surrogate constants implied by a configuration and codebook.
pub fn surrogate_params(cfg: &ExperimentConfig, codebook: &Codebook) -> Result<SurrogateParams> {
    let sigma_w = noise_std_for_snr(cfg.gamma_x, cfg.d, cfg.snr_db);
    let root_d = (cfg.d as f64).sqrt();
    let l = output_bound(cfg.gamma_x, root_d, 3.0 * sigma_w * root_d);
    let mode = match cfg.margin {
        Some(r) => GradientMode::Hinge(r),
        None => GradientMode::IndicatorFree,
    };
    SurrogateParams::new(cfg.radius, l, max_pairwise_distance(codebook), cfg.horizon, mode)
}

enum DecoderPolicy {
    Oomd(DecoderLearner),
    Ogd(OgdLearner),
    Ls,
}

/// Runs the decoder task over an explicit environment.
pub fn run_decoder_rounds(
    cfg: &ExperimentConfig,
    env: &mut DecoderEnvironment,
) -> Result<Vec<RoundRecord>> {
    let params = surrogate_params(cfg, &env.codebook)?;
    warn_if_margin_condition_fails(&params);
    let mut policy = match cfg.algorithm {
        Algorithm::Oomd => DecoderPolicy::Oomd(DecoderLearner::new(cfg.d, cfg.radius)?),
        Algorithm::Ogd => DecoderPolicy::Ogd(OgdLearner::new(cfg.d, cfg.radius)?),
        Algorithm::Ls => DecoderPolicy::Ls,
        other => {
            return Err(Error::Config(format!("algorithm '{other}' is not a decoder learner")))
        }
    };
    let mut records = Vec::with_capacity(cfg.horizon as usize);
    let mut total = 0.0;
    for t in 1..=cfg.horizon {
        let ys = env.outputs()?;
        let (loss, extras) = match &mut policy {
            DecoderPolicy::Oomd(learner) => {
                let out = oomd_decoder_round(learner, &env.codebook, &ys, &params)?;
                (out.ser, learner_extras(out.eta, out.surrogate, out.deviation, &out.kernel))
            }
            DecoderPolicy::Ogd(learner) => {
                let out = ogd_decoder_round(learner, &env.codebook, &ys, &params)?;
                (out.ser, learner_extras(out.eta, out.surrogate, out.deviation, &out.kernel))
            }
            DecoderPolicy::Ls => {
                let g = ls_decoder(&env.codebook, &ys, cfg.ridge, cfg.radius)?;
                let ser = ser_decoder(&env.codebook, &g, &ys)?;
                let surrogate = surrogate_loss(&g, &env.codebook, &ys, params.margin())?;
                (
                    ser,
                    vec![
                        ("surrogate".to_owned(), surrogate),
                        ("kernel_norm".to_owned(), frobenius_norm(&g)),
                    ],
                )
            }
        };
        total += loss;
        records.push(RoundRecord {
            t,
            loss,
            running_avg: total / t as f64,
            extras,
        });
        env.advance();
    }
    Ok(records)
}

fn learner_extras(eta: f64, surrogate: f64, deviation: f64, kernel: &Matrix) -> Vec<(String, f64)> {
    vec![
        ("eta".to_owned(), eta),
        ("surrogate".to_owned(), surrogate),
        ("deviation".to_owned(), deviation),
        ("kernel_norm".to_owned(), frobenius_norm(kernel)),
    ]
}

/// Super-codebook and additive-noise channel of one codebook-task run.
#[derive(Debug, Clone)]
pub struct CodebookEnvironment {
    pub codebooks: SuperCodebook,
    pub channel: NoiseChannelState,
    channel_rng: Rng,
}

impl CodebookEnvironment {
    pub fn new(cfg: &ExperimentConfig, seed: u64) -> Result<Self> {
        let mut codebook_rng = Rng::derived(seed, STREAM_CODEBOOK);
        let codebooks = generate_super_codebook(cfg.n, cfg.m, cfg.d, cfg.gamma_x, &mut codebook_rng)?;
        let mut channel_rng = Rng::derived(seed, STREAM_CHANNEL);
        let channel = match cfg.channel {
            ChannelKind::Markov => {
                let innovation = innovation(cfg, &mut channel_rng)?;
                NoiseChannelState::markov(cfg.d, cfg.schedule()?, innovation, &mut channel_rng)?
            }
            ChannelKind::Awgn => {
                let sigma = noise_std_for_snr(cfg.gamma_x, cfg.d, cfg.snr_db);
                NoiseChannelState::awgn(cfg.d, sigma, &mut channel_rng)?
            }
            ChannelKind::Rayleigh => {
                return Err(Error::Config(
                    "the codebook task runs over additive-noise channels".into(),
                ))
            }
        };
        Ok(Self::from_parts(codebooks, channel, seed))
    }

    pub fn from_parts(codebooks: SuperCodebook, channel: NoiseChannelState, seed: u64) -> Self {
        Self {
            codebooks,
            channel,
            channel_rng: Rng::derived(seed, STREAM_CHANNEL),
        }
    }

    /// Symbol error rate of codebook `arm` under this round's noise.
    pub fn loss(&self, arm: usize) -> Result<f64> {
        let cb = self
            .codebooks
            .get(arm)
            .ok_or_else(|| Error::invalid(format!("arm {arm} out of range")))?;
        let ys = cb
            .codewords()
            .iter()
            .map(|x| self.channel.transmit(x))
            .collect::<Result<Vec<_>>>()?;
        ser_codebook(cb, &ys)
    }

    pub fn advance(&mut self) {
        self.channel.step(&mut self.channel_rng);
    }
}

pub fn make_selector(cfg: &ExperimentConfig) -> Result<Box<dyn ArmSelector + Send>> {
    Ok(match cfg.algorithm {
        Algorithm::Oomd => {
            let schedule = if cfg.doubling {
                RateSchedule::Doubling(cfg.eta)
            } else {
                RateSchedule::Constant(cfg.eta)
            };
            Box::new(BanditLearner::new(cfg.n, schedule)?)
        }
        Algorithm::Exp3 => Box::new(Exp3::new(cfg.n, cfg.horizon)?),
        Algorithm::Random => Box::new(UniformSelector::new(cfg.n)?),
        other => {
            return Err(Error::Config(format!("algorithm '{other}' is not a codebook selector")))
        }
    })
}

/// Runs the codebook task over an explicit environment.
pub fn run_codebook_rounds(
    cfg: &ExperimentConfig,
    env: &mut CodebookEnvironment,
    seed: u64,
) -> Result<Vec<RoundRecord>> {
    let mut selector = make_selector(cfg)?;
    let mut rng = Rng::derived(seed, STREAM_LEARNER);
    let mut records = Vec::with_capacity(cfg.horizon as usize);
    let mut total = 0.0;
    for t in 1..=cfg.horizon {
        let arm = selector.select(&mut rng)?;
        let prob = selector.distribution()[arm];
        let eta = selector.learning_rate();
        let loss = env.loss(arm)?;
        selector.feedback(arm, loss)?;
        total += loss;
        let mut extras = vec![("arm".to_owned(), arm as f64), ("prob".to_owned(), prob)];
        if let Some(eta) = eta {
            extras.push(("eta".to_owned(), eta));
        }
        records.push(RoundRecord {
            t,
            loss,
            running_avg: total / t as f64,
            extras,
        });
        env.advance();
    }
    Ok(records)
}

pub fn run_decoder_seed(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<RoundRecord>> {
    let mut env = DecoderEnvironment::new(cfg, seed)?;
    run_decoder_rounds(cfg, &mut env)
}

pub fn run_codebook_seed(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<RoundRecord>> {
    let mut env = CodebookEnvironment::new(cfg, seed)?;
    run_codebook_rounds(cfg, &mut env, seed)
}

fn run_seeds(
    cfg: &ExperimentConfig,
    run: fn(&ExperimentConfig, u64) -> Result<Vec<RoundRecord>>,
) -> Result<Vec<SeedRun>> {
    cfg.validate()?;
    info!(
        "{} task, algorithm {}, T = {}, {} seed(s)",
        cfg.task,
        cfg.algorithm,
        cfg.horizon,
        cfg.seeds.len()
    );
    cfg.seeds
        .par_iter()
        .map(|&seed| {
            let records = run(cfg, seed)?;
            debug!("seed {seed} done");
            Ok(SeedRun { seed, records })
        })
        .collect()
}

pub fn run_decoder_experiment(cfg: &ExperimentConfig) -> Result<Vec<SeedRun>> {
    if cfg.task != Task::Decoder {
        return Err(Error::Config("configuration is not for the decoder task".into()));
    }
    run_seeds(cfg, run_decoder_seed)
}

pub fn run_codebook_experiment(cfg: &ExperimentConfig) -> Result<Vec<SeedRun>> {
    if cfg.task != Task::Codebook {
        return Err(Error::Config("configuration is not for the codebook task".into()));
    }
    run_seeds(cfg, run_codebook_seed)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<SeedRun>> {
    match cfg.task {
        Task::Decoder => run_decoder_experiment(cfg),
        Task::Codebook => run_codebook_experiment(cfg),
    }
}
