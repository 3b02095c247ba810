//! Experiment configuration, per-round protocol, metrics and CSV output.

pub mod config;
pub mod records;
pub mod runner;

pub use config::{
    parse_seeds, resolve_config, Algorithm, ChannelKind, ConfigOverrides, ExperimentConfig,
    InnovationKind, MuMode, Task,
};
pub use records::{
    mean_and_stderr, read_csv, read_csv_from, running_average, write_csv, write_csv_to,
    RoundRecord, SeedRun,
};
pub use runner::{
    run_codebook_experiment, run_codebook_seed, run_decoder_experiment, run_decoder_seed,
    run_experiment, CodebookEnvironment, DecoderEnvironment,
};
