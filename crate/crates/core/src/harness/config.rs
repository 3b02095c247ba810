//! Experiment configuration: JSON documents, CLI overrides, validation.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channels::{MixingSchedule, MixtureKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Decoder,
    Codebook,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Oomd,
    Ogd,
    Ls,
    Exp3,
    Random,
}

impl Algorithm {
    pub fn valid_for(&self, task: Task) -> bool {
        match task {
            Task::Decoder => matches!(self, Self::Oomd | Self::Ogd | Self::Ls),
            Task::Codebook => matches!(self, Self::Oomd | Self::Exp3 | Self::Random),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MuMode {
    Geometric,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InnovationKind {
    Gmd,
    Lmd,
}

impl From<InnovationKind> for MixtureKind {
    fn from(kind: InnovationKind) -> Self {
        match kind {
            InnovationKind::Gmd => MixtureKind::Gaussian,
            InnovationKind::Lmd => MixtureKind::Laplace,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelKind {
    Markov,
    Rayleigh,
    Awgn,
}

macro_rules! lowercase_enum_text {
    ($ty:ty, $what:literal, [$($variant:ident => $text:literal),+ $(,)?]) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self {
                    $(Self::$variant => $text,)+
                })
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok(Self::$variant),)+
                    other => Err(Error::Config(format!(
                        concat!("unknown ", $what, " '{}'"),
                        other
                    ))),
                }
            }
        }
    };
}

lowercase_enum_text!(Task, "task", [Decoder => "decoder", Codebook => "codebook"]);
lowercase_enum_text!(Algorithm, "algorithm", [
    Oomd => "oomd", Ogd => "ogd", Ls => "ls", Exp3 => "exp3", Random => "random",
]);
lowercase_enum_text!(MuMode, "mu mode", [Geometric => "geometric", Constant => "constant"]);
lowercase_enum_text!(InnovationKind, "innovation distribution", [Gmd => "gmd", Lmd => "lmd"]);
lowercase_enum_text!(ChannelKind, "channel", [
    Markov => "markov", Rayleigh => "rayleigh", Awgn => "awgn",
]);

/// Fully resolved experiment settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub task: Task,
    pub algorithm: Algorithm,
    #[serde(rename = "T")]
    pub horizon: u64,
    pub d: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub mu: f64,
    pub mu_mode: MuMode,
    pub dist: InnovationKind,
    #[serde(rename = "K")]
    pub k: usize,
    pub rho: f64,
    pub snr_db: f64,
    pub channel: ChannelKind,
    pub gamma_x: f64,
    #[serde(rename = "D")]
    pub radius: f64,
    pub seeds: Vec<u64>,
    pub out: Option<PathBuf>,
    /// Ridge for the least-squares baseline.
    pub ridge: f64,
    /// Log-barrier learning rate.
    pub eta: f64,
    /// Halve the log-barrier rate on hint-error doublings.
    pub doubling: bool,
    /// Explicit hinge margin; `None` follows the indicator-free gradient.
    pub margin: Option<f64>,
}

impl ExperimentConfig {
    /// Default bundle: `d = 8`, `K = 3`, geometric `μ = 0.96`, 24 dB,
    /// `T = 1000`, seeds `0..10`; `M = 64, ρ = 0.1` for the decoder task and
    /// `M = 16, N = 100, ρ = 0.01` for the codebook task.
    pub fn defaults(task: Task) -> Self {
        let (m, rho) = match task {
            Task::Decoder => (64, 0.1),
            Task::Codebook => (16, 0.01),
        };
        Self {
            task,
            algorithm: Algorithm::Oomd,
            horizon: 1000,
            d: 8,
            m,
            n: 100,
            mu: 0.96,
            mu_mode: MuMode::Geometric,
            dist: InnovationKind::Gmd,
            k: 3,
            rho,
            snr_db: 24.0,
            channel: ChannelKind::Markov,
            gamma_x: 1.0,
            radius: 10.0,
            seeds: (0..10).collect(),
            out: None,
            ridge: 1e-8,
            eta: 1.0 / 162.0,
            doubling: false,
            margin: None,
        }
    }

    pub fn schedule(&self) -> Result<MixingSchedule> {
        match self.mu_mode {
            MuMode::Geometric => MixingSchedule::new_geometric(self.mu),
            MuMode::Constant => MixingSchedule::new_constant(self.mu),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !self.algorithm.valid_for(self.task) {
            return fail(format!(
                "algorithm '{}' is not available for the {} task",
                self.algorithm, self.task
            ));
        }
        if self.horizon == 0 {
            return fail("T must be at least 1".into());
        }
        if self.d == 0 {
            return fail("d must be at least 1".into());
        }
        if self.m == 0 || (self.task == Task::Decoder && self.m < 2) {
            return fail(format!("M = {} is too small for the {} task", self.m, self.task));
        }
        if self.task == Task::Codebook && self.n == 0 {
            return fail("N must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.mu) {
            return fail(format!("mu must lie in [0, 1], got {}", self.mu));
        }
        if self.k == 0 {
            return fail("K must be at least 1".into());
        }
        if !(self.rho >= 0.0) || !self.rho.is_finite() {
            return fail(format!("rho must be ≥ 0, got {}", self.rho));
        }
        if !self.snr_db.is_finite() {
            return fail("snr_db must be finite".into());
        }
        if !(self.gamma_x > 0.0) || !self.gamma_x.is_finite() {
            return fail(format!("gamma_x must be positive, got {}", self.gamma_x));
        }
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return fail(format!("D must be positive, got {}", self.radius));
        }
        if self.seeds.is_empty() {
            return fail("at least one seed is required".into());
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return fail("seeds must be distinct".into());
        }
        if !(self.ridge >= 0.0) || !self.ridge.is_finite() {
            return fail(format!("ridge must be ≥ 0, got {}", self.ridge));
        }
        if !(self.eta > 0.0) || self.eta > 1.0 / 162.0 {
            return fail(format!("eta must lie in (0, 1/162], got {}", self.eta));
        }
        if let Some(r) = self.margin {
            if !(r >= 1.0) || !r.is_finite() {
                return fail(format!("margin must be ≥ 1, got {r}"));
            }
        }
        if self.task == Task::Codebook && self.channel == ChannelKind::Rayleigh {
            return fail("the codebook task runs over additive-noise channels (markov or awgn)".into());
        }
        Ok(())
    }
}

/// Optional settings, as read from a JSON document or the command line.
/// Every field left out keeps the value underneath it.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    pub task: Option<Task>,
    pub algorithm: Option<Algorithm>,
    #[serde(rename = "T")]
    pub horizon: Option<u64>,
    pub d: Option<usize>,
    #[serde(rename = "M")]
    pub m: Option<usize>,
    #[serde(rename = "N")]
    pub n: Option<usize>,
    pub mu: Option<f64>,
    pub mu_mode: Option<MuMode>,
    pub dist: Option<InnovationKind>,
    #[serde(rename = "K")]
    pub k: Option<usize>,
    pub rho: Option<f64>,
    pub snr_db: Option<f64>,
    pub channel: Option<ChannelKind>,
    pub gamma_x: Option<f64>,
    #[serde(rename = "D")]
    pub radius: Option<f64>,
    pub seeds: Option<Vec<u64>>,
    pub out: Option<PathBuf>,
    pub ridge: Option<f64>,
    pub eta: Option<f64>,
    pub doubling: Option<bool>,
    pub margin: Option<f64>,
}

impl ConfigOverrides {
    /// Parses a JSON configuration document. Unknown keys are rejected and
    /// `T` must be present.
    pub fn from_json(text: &str) -> Result<Self> {
        let parsed: Self = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("invalid configuration: {e}")))?;
        if parsed.horizon.is_none() {
            return Err(Error::Config("missing required key 'T'".into()));
        }
        Ok(parsed)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        macro_rules! set {
            ($($field:ident),+) => {
                $(if let Some(v) = &self.$field {
                    cfg.$field = v.clone();
                })+
            };
        }
        set!(
            task, algorithm, horizon, d, m, n, mu, mu_mode, dist, k, rho, snr_db, channel,
            gamma_x, radius, seeds, ridge, eta, doubling
        );
        if let Some(out) = &self.out {
            cfg.out = Some(out.clone());
        }
        if let Some(r) = self.margin {
            cfg.margin = Some(r);
        }
    }
}

/// Builds the configuration for `task`: defaults, then the file, then the
/// command-line flags.
pub fn resolve_config(
    task: Task,
    file: Option<&ConfigOverrides>,
    flags: &ConfigOverrides,
) -> Result<ExperimentConfig> {
    for layer in file.into_iter().chain(std::iter::once(flags)) {
        if let Some(t) = layer.task {
            if t != task {
                return Err(Error::Config(format!(
                    "configuration names task '{t}' but '{task}' was requested"
                )));
            }
        }
    }
    let mut cfg = ExperimentConfig::defaults(task);
    if let Some(file) = file {
        file.apply(&mut cfg);
    }
    flags.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

/// Parses a comma-separated seed list such as `1,2,3`.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<u64>()
                .map_err(|_| Error::Config(format!("invalid seed '{}'", s.trim())))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_horizon_is_named() {
        let err = ConfigOverrides::from_json(r#"{"d": 8}"#).unwrap_err();
        assert!(err.to_string().contains("'T'"), "{err}");
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = ConfigOverrides::from_json(r#"{"T": 10, "lr": 0.1}"#).unwrap_err();
        assert!(err.to_string().contains("lr"), "{err}");
    }

    #[test]
    fn flags_override_file() {
        let file = ConfigOverrides::from_json(r#"{"T": 10, "rho": 0.1, "M": 16}"#).unwrap();
        let flags = ConfigOverrides {
            rho: Some(0.3),
            ..Default::default()
        };
        let cfg = resolve_config(Task::Decoder, Some(&file), &flags).unwrap();
        assert_eq!(cfg.rho, 0.3);
        assert_eq!(cfg.m, 16);
        assert_eq!(cfg.horizon, 10);
    }

    #[test]
    fn algorithm_must_match_task() {
        let flags = ConfigOverrides {
            algorithm: Some(Algorithm::Exp3),
            ..Default::default()
        };
        assert!(resolve_config(Task::Decoder, None, &flags).is_err());
        assert!(resolve_config(Task::Codebook, None, &flags).is_ok());
        let flags = ConfigOverrides {
            algorithm: Some(Algorithm::Ls),
            ..Default::default()
        };
        assert!(resolve_config(Task::Codebook, None, &flags).is_err());
    }

    #[test]
    fn task_conflict_rejected() {
        let file = ConfigOverrides::from_json(r#"{"T": 10, "task": "codebook"}"#).unwrap();
        assert!(resolve_config(Task::Decoder, Some(&file), &ConfigOverrides::default()).is_err());
        assert!(resolve_config(Task::Codebook, Some(&file), &ConfigOverrides::default()).is_ok());
    }

    #[test]
    fn enum_text_round_trips() {
        for a in [Algorithm::Oomd, Algorithm::Ogd, Algorithm::Ls, Algorithm::Exp3, Algorithm::Random] {
            assert_eq!(a.to_string().parse::<Algorithm>().unwrap(), a);
        }
        assert!("lms".parse::<Algorithm>().is_err());
        assert_eq!("lmd".parse::<InnovationKind>().unwrap(), InnovationKind::Lmd);
        assert_eq!("awgn".parse::<ChannelKind>().unwrap(), ChannelKind::Awgn);
    }

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("1,2, 3").unwrap(), vec![1, 2, 3]);
        assert!(parse_seeds("1,x").is_err());
    }

    #[test]
    fn validation_catches_bad_values() {
        let base = ExperimentConfig::defaults(Task::Codebook);
        let mut bad = base.clone();
        bad.horizon = 0;
        assert!(bad.validate().is_err());
        let mut bad = base.clone();
        bad.eta = 0.01;
        assert!(bad.validate().is_err());
        let mut bad = base.clone();
        bad.seeds = vec![1, 1];
        assert!(bad.validate().is_err());
        let mut bad = base.clone();
        bad.channel = ChannelKind::Rayleigh;
        assert!(bad.validate().is_err());
        assert!(base.validate().is_ok());
    }
}
