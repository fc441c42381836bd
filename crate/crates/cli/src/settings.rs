//! Experiment settings: defaults, JSON config file and flag overrides.

use std::path::{Path, PathBuf};

use ddp_fpm::analyst::{AnalystConfig, Strategy};
use ddp_fpm::data::{generate_synthetic, load_dataset_with, DataError, IdMapping, SyntheticSpec};
use ddp_fpm::patterns::{LocalData, PatternKind, PatternUniverse, DEFAULT_MAX_LENGTH};
use ddp_fpm::privacy::NoiseParams;
use ddp_fpm::runtime::{ExperimentConfig, NoiseMode, Participation};
use ddp_fpm::seeding::{stream_rng, Stream};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const DEFAULT_EPSILON: f64 = 2.0;
pub const DEFAULT_K: usize = 50;
pub const DEFAULT_P: usize = 1000;
pub const DEFAULT_F: f64 = 0.05;
pub const DEFAULT_ETA: f64 = 0.01;
pub const DEFAULT_TAU_ROUNDS: u64 = 20;
pub const DEFAULT_OWNERS: usize = 50_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DatasetSource {
    File { path: PathBuf, mapping: IdMapping },
    /// Generated from the run seed.
    Synthetic { spec: SyntheticSpec },
}

/// Fully resolved settings; every report embeds one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub kind: PatternKind,
    pub f: f64,
    pub epsilon: f64,
    pub k: usize,
    pub p: usize,
    pub tau: u64,
    pub eta_g: f64,
    pub eta_s: f64,
    pub strategy: Strategy,
    pub seed: u64,
    pub noise: NoiseMode,
    pub exhaustive: bool,
    pub owner_cap: Option<usize>,
    pub with_replacement: bool,
    pub aggregation_degree: Option<usize>,
    pub max_length: usize,
    /// Universe size; `None` means inferred from the data.
    pub universe: Option<u32>,
    pub dataset: DatasetSource,
}

/// Partial settings as read from a config file or flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Overrides {
    pub kind: Option<PatternKind>,
    pub f: Option<f64>,
    pub epsilon: Option<f64>,
    pub k: Option<usize>,
    pub p: Option<usize>,
    pub tau: Option<u64>,
    pub eta_g: Option<f64>,
    pub eta_s: Option<f64>,
    pub strategy: Option<Strategy>,
    pub seed: Option<u64>,
    pub noise: Option<NoiseMode>,
    pub exhaustive: Option<bool>,
    pub owner_cap: Option<usize>,
    pub with_replacement: Option<bool>,
    pub aggregation_degree: Option<usize>,
    pub max_length: Option<usize>,
    pub universe: Option<u32>,
    pub dataset: Option<PathBuf>,
    pub mapping: Option<IdMapping>,
    pub owners: Option<usize>,
    pub synthetic: Option<SyntheticSpec>,
}

impl Overrides {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// `self` wins wherever it is set.
    pub fn over(self, base: Overrides) -> Overrides {
        macro_rules! pick {
            ($($field:ident),*) => {
                Overrides { $($field: self.$field.or(base.$field)),* }
            };
        }
        pick!(
            kind, f, epsilon, k, p, tau, eta_g, eta_s, strategy, seed, noise, exhaustive, owner_cap,
            with_replacement, aggregation_degree, max_length, universe, dataset, mapping, owners, synthetic
        )
    }

    pub fn resolve(self) -> Result<Settings, CliError> {
        let kind = self.kind.or(self.synthetic.as_ref().map(|s| s.kind)).unwrap_or(PatternKind::Itemset);
        let p = self.p.unwrap_or(DEFAULT_P);
        let dataset = match (self.dataset, self.synthetic) {
            (Some(_), Some(_)) => return Err(CliError::Config("give either a dataset file or a synthetic spec, not both".into())),
            (Some(path), None) => DatasetSource::File { path, mapping: self.mapping.unwrap_or_default() },
            (None, Some(mut spec)) => {
                if let Some(owners) = self.owners {
                    spec.owners = owners;
                }
                DatasetSource::Synthetic { spec }
            }
            (None, None) => {
                let owners = self.owners.unwrap_or(DEFAULT_OWNERS);
                let spec = SyntheticSpec::nested_workload(owners, kind).map_err(|e| CliError::Config(e.to_string()))?;
                DatasetSource::Synthetic { spec }
            }
        };
        if let DatasetSource::Synthetic { spec } = &dataset {
            if spec.kind != kind {
                return Err(CliError::Config(format!("synthetic spec is {} but kind is {kind}", spec.kind)));
            }
            spec.validate().map_err(|e| CliError::Config(e.to_string()))?;
        }
        let exhaustive = self.exhaustive.unwrap_or(false);
        let noise = self.noise.unwrap_or(if exhaustive { NoiseMode::Off } else { NoiseMode::Distributed });
        if exhaustive && noise != NoiseMode::Off {
            return Err(CliError::Config("exhaustive mode runs without noise; drop `--noise on`".into()));
        }
        Ok(Settings {
            kind,
            f: self.f.unwrap_or(DEFAULT_F),
            epsilon: self.epsilon.unwrap_or(DEFAULT_EPSILON),
            k: self.k.unwrap_or(DEFAULT_K),
            p,
            tau: self.tau.unwrap_or(DEFAULT_TAU_ROUNDS * p as u64),
            eta_g: self.eta_g.unwrap_or(DEFAULT_ETA),
            eta_s: self.eta_s.unwrap_or(DEFAULT_ETA),
            strategy: self.strategy.unwrap_or(Strategy::Vanilla),
            seed: self.seed.unwrap_or(0),
            noise,
            exhaustive,
            owner_cap: self.owner_cap,
            with_replacement: self.with_replacement.unwrap_or(false),
            aggregation_degree: self.aggregation_degree,
            max_length: self.max_length.unwrap_or(DEFAULT_MAX_LENGTH),
            universe: self.universe,
            dataset,
        })
    }
}

/// The owner population plus the universe it lives in.
pub struct Population {
    pub owners: Vec<LocalData>,
    pub universe: PatternUniverse,
}

impl Settings {
    pub fn load_population(&self) -> Result<Population, CliError> {
        let (owners, inferred) = match &self.dataset {
            DatasetSource::File { path, mapping } => {
                let loaded = load_dataset_with(path, self.kind, *mapping).map_err(|e| match e {
                    DataError::Io(io) => CliError::Io(format!("{}: {io}", path.display())),
                    other => CliError::Io(format!("{}: {other}", path.display())),
                })?;
                (loaded.owners, loaded.universe_size)
            }
            DatasetSource::Synthetic { spec } => {
                let owners = generate_synthetic(spec, &mut stream_rng(self.seed, Stream::Synthetic, &[]))
                    .map_err(|e| CliError::Config(e.to_string()))?;
                (owners, spec.universe)
            }
        };
        let size = self.universe.unwrap_or(inferred);
        let universe =
            PatternUniverse::new(size, self.kind, self.max_length).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(Population { owners, universe })
    }

    /// Builds the experiment for a population of `population` owners.
    pub fn experiment(&self, universe: PatternUniverse, population: usize) -> Result<ExperimentConfig, CliError> {
        let config_error = |e: &dyn std::fmt::Display| CliError::Config(e.to_string());
        if !(self.f > 0.0 && self.f < 1.0) {
            return Err(CliError::Config(format!("f must lie in (0, 1), got {}", self.f)));
        }
        let mut config = if self.exhaustive {
            ExperimentConfig::exhaustive(population, self.f, universe, self.seed).map_err(|e| config_error(&e))?
        } else {
            let noise = NoiseParams::new(self.epsilon, self.k, self.p).map_err(|e| config_error(&e))?;
            let analyst = AnalystConfig {
                tau: self.tau,
                eta_g: self.eta_g,
                eta_s: self.eta_s,
                ..AnalystConfig::new(noise, self.f, self.strategy).map_err(|e| config_error(&e))?
            };
            analyst.validate().map_err(|e| config_error(&e))?;
            ExperimentConfig::new(analyst, universe, self.seed)
        };
        config.noise = self.noise;
        config.participation = if self.exhaustive { Participation::Exhaustive } else { Participation::Sampled };
        config.owner_cap = self.owner_cap;
        config.with_replacement = self.with_replacement;
        config.aggregation_degree = self.aggregation_degree;
        Ok(config)
    }
}
