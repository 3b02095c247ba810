use chanlearn::channels::{FadingChannelState, MixingSchedule, MixtureDistribution};
use chanlearn::codebooks::make_constant_modulus_codebook;
use chanlearn::harness::runner::run_decoder_rounds;
use chanlearn::harness::{
    mean_and_stderr, run_experiment, Algorithm, DecoderEnvironment, ExperimentConfig, MuMode, Task,
};
use chanlearn::numerics::{Matrix, Rng};

fn frozen_env(seed: u64) -> DecoderEnvironment {
    let mut rng = Rng::seeded(seed);
    let codebook = make_constant_modulus_codebook(6, 4, 1.0, &mut rng).unwrap();
    let gain = Matrix::identity(4, 4) + rng.normal_matrix(4, 4) * 0.3;
    let channel = FadingChannelState::new(
        gain,
        MixingSchedule::new_constant(0.0).unwrap(),
        MixtureDistribution::gaussian(0.0, 1.0).unwrap(),
        0.01,
    )
    .unwrap();
    DecoderEnvironment::from_parts(codebook, channel, seed)
}

#[test]
fn hinge_learners_settle_on_frozen_channel() {
    for algorithm in [Algorithm::Oomd, Algorithm::Ogd] {
        let mut cfg = ExperimentConfig::defaults(Task::Decoder);
        cfg.algorithm = algorithm;
        cfg.d = 4;
        cfg.m = 6;
        cfg.horizon = 400;
        cfg.margin = Some(1.0);
        let records = run_decoder_rounds(&cfg, &mut frozen_env(3)).unwrap();
        let tail: f64 = records[300..].iter().map(|r| r.loss).sum::<f64>() / 100.0;
        assert!(tail < 0.02, "{algorithm}: tail SER {tail}");
        let etas: Vec<f64> = records.iter().map(|r| r.extra("eta").unwrap()).collect();
        assert!(etas.windows(2).all(|w| w[1] <= w[0]));
        assert!(records.iter().all(|r| r.extra("kernel_norm").unwrap() <= cfg.radius + 1e-9));
    }
}

#[test]
fn noisier_innovations_do_not_help_least_squares() {
    let mut cfg = ExperimentConfig::defaults(Task::Decoder);
    cfg.algorithm = Algorithm::Ls;
    cfg.m = 16;
    cfg.horizon = 200;
    cfg.seeds = (0..5).collect();
    let mean_at = |snr: f64| {
        let mut cfg = cfg.clone();
        cfg.snr_db = snr;
        let runs = run_experiment(&cfg).unwrap();
        let finals: Vec<f64> = runs.iter().filter_map(|r| r.final_running_avg()).collect();
        mean_and_stderr(&finals).unwrap().0
    };
    assert!(mean_at(30.0) <= mean_at(5.0));
}

#[test]
fn memoryless_channel_is_unlearnable_for_fixed_kernel() {
    // With a fresh gain every round no single kernel fits; the learner's
    // SER stays far above the within-round least-squares baseline.
    let mut cfg = ExperimentConfig::defaults(Task::Decoder);
    cfg.m = 16;
    cfg.horizon = 200;
    cfg.seeds = vec![0, 1, 2];
    cfg.mu = 1.0;
    cfg.mu_mode = MuMode::Constant;
    cfg.margin = Some(1.0);
    let final_mean = |algorithm| {
        let mut cfg = cfg.clone();
        cfg.algorithm = algorithm;
        let runs = run_experiment(&cfg).unwrap();
        let finals: Vec<f64> = runs.iter().filter_map(|r| r.final_running_avg()).collect();
        mean_and_stderr(&finals).unwrap().0
    };
    assert!(final_mean(Algorithm::Oomd) > final_mean(Algorithm::Ls) + 0.2);
}
