//! Experiment configuration files (TOML) and their resolution into gate sets,
//! noise and SPAM.
//!
//! ```toml
//! gateset = "pauli"            # "pauli", "shelving", or a path to a gate-set JSON file
//! m_list = [10, 20, 30]
//! n_sequences = 30
//! seed = 2015
//! # shots = 1000               # omit for exact probabilities
//!
//! [noise]
//! model = "filter"             # "none" | "filter" | "shelving" | "channel"
//! # seed = 7                   # filter draw seed; derived from `seed` when absent
//! # params = [{ p = 0.01, r = [0.0, 0.0, 1.0] }, ...]
//!
//! [spam]                       # optional channel JSON files
//! # prep = "prep.json"
//! # meas = "meas.json"
//! ```
//!
//! Relative paths are resolved against the directory holding the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gatesets::{GateSet, NoiseAssignment};
use crate::liouville::s_matrix;
use crate::liouville::Channel;
use crate::noise::{
    averaged_coherent_channel, sample_filter_model, shelving_assignment, FilterModel, FilterParams,
    ShelvingParams, DEFAULT_ORACLE_SAMPLES,
};
use crate::protocol::{
    aggregate, run_sequences, DecayDataset, Provenance, SequenceRecord, Spam, DOMAIN_NOISE,
    DOMAIN_ORACLE,
};
use crate::rng::{RandomStream, RNG_ALGORITHM};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub gateset: String,
    pub noise: NoiseConfig,
    pub m_list: Vec<usize>,
    pub n_sequences: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<u64>,
    pub seed: u64,
    #[serde(default)]
    pub spam: SpamConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NoiseConfig {
    None,
    Filter {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        params: Option<Vec<FilterParams>>,
    },
    Shelving {
        #[serde(default = "default_phi")]
        phi: f64,
        #[serde(default = "default_sigma_gamma")]
        sigma_gamma: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        oracle_samples: Option<usize>,
    },
    /// The same channel, read from a JSON file, after every gate.
    Channel {
        file: String,
    },
}

fn default_phi() -> f64 {
    ShelvingParams::default().phi
}

fn default_sigma_gamma() -> f64 {
    ShelvingParams::default().sigma_gamma
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpamConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prep: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meas: Option<String>,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_list.is_empty() || self.m_list.contains(&0) {
            return Err(Error::Config(
                "m_list must be nonempty with every m >= 1".into(),
            ));
        }
        if self.n_sequences == 0 {
            return Err(Error::Config("n_sequences must be at least 1".into()));
        }
        if self.shots == Some(0) {
            return Err(Error::Config("shots must be positive when given".into()));
        }
        if let NoiseConfig::Shelving {
            phi,
            sigma_gamma,
            oracle_samples,
        } = &self.noise
        {
            ShelvingParams::new(*phi, *sigma_gamma).map_err(|e| Error::Config(e.to_string()))?;
            if *oracle_samples == Some(0) {
                return Err(Error::Config("oracle_samples must be positive".into()));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Oracle {
    pub quantity: String,
    pub value: f64,
    pub method: String,
}

/// A configuration resolved into the objects the engine runs on.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub gateset: GateSet,
    pub noise: NoiseAssignment,
    pub spam: Spam,
    /// Drawn filter parameters, for the `1 - mean(p)/2` oracle.
    pub filter_model: Option<FilterModel>,
    pub shelving: Option<ShelvingParams>,
}

fn resolve(base: &Path, file: &str) -> PathBuf {
    let p = Path::new(file);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn read(base: &Path, file: &str) -> Result<String> {
    let path = resolve(base, file);
    std::fs::read_to_string(&path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

impl Experiment {
    pub fn from_config(config: ExperimentConfig, base_dir: &Path) -> Result<Self> {
        config.validate()?;
        let gateset = match config.gateset.as_str() {
            "pauli" | "shelving" => GateSet::from_id(&config.gateset)?,
            path => GateSet::from_json(&read(base_dir, path)?)
                .map_err(|e| Error::Config(e.to_string()))?,
        };
        let a = gateset.size();
        let mut filter_model = None;
        let mut shelving = None;
        let noise = match &config.noise {
            NoiseConfig::None => NoiseAssignment::noiseless(&gateset),
            NoiseConfig::Filter { seed, params } => {
                if gateset.space().d() != 2 || gateset.space().has_leakage() {
                    return Err(Error::Config("filter noise needs a qubit gate set".into()));
                }
                let model = match params {
                    Some(p) => {
                        FilterModel::new(p.clone()).map_err(|e| Error::Config(e.to_string()))?
                    }
                    None => {
                        let mut rng = match seed {
                            Some(s) => RandomStream::new(*s),
                            None => RandomStream::derive(config.seed, &[DOMAIN_NOISE]),
                        };
                        let mut params = Vec::with_capacity(a);
                        while params.len() < a {
                            params.extend(sample_filter_model(&mut rng).params);
                        }
                        params.truncate(a);
                        FilterModel { params }
                    }
                };
                if model.params.len() != a {
                    return Err(Error::Config(format!(
                        "filter noise has {} channels for {a} gates",
                        model.params.len()
                    )));
                }
                let na = model.assignment()?;
                filter_model = Some(model);
                na
            }
            NoiseConfig::Shelving {
                phi, sigma_gamma, ..
            } => {
                let sp = ShelvingParams::new(*phi, *sigma_gamma)?;
                if gateset.space() != crate::liouville::SpaceSpec::qutrit_leak() {
                    return Err(Error::Config(
                        "shelving noise needs a qubit plus one leakage level".into(),
                    ));
                }
                shelving = Some(sp);
                shelving_assignment(sp)
            }
            NoiseConfig::Channel { file } => {
                let ch = Channel::from_json(&read(base_dir, file)?)
                    .map_err(|e| Error::Config(e.to_string()))?;
                if ch.space() != gateset.space() {
                    return Err(Error::Config(
                        "noise channel and gate set act on different spaces".into(),
                    ));
                }
                NoiseAssignment::gate_independent(ch, a)
            }
        };
        let load_channel = |f: &Option<String>| -> Result<Option<Channel>> {
            f.as_ref()
                .map(|f| {
                    Channel::from_json(&read(base_dir, f)?)
                        .map_err(|e| Error::Config(e.to_string()))
                })
                .transpose()
        };
        let spam = Spam {
            prep: load_channel(&config.spam.prep)?,
            meas: load_channel(&config.spam.meas)?,
        };
        for ch in spam.prep.iter().chain(spam.meas.iter()) {
            if ch.space() != gateset.space() {
                return Err(Error::Config(
                    "SPAM channel acts on a different space".into(),
                ));
            }
        }
        Ok(Self {
            config,
            gateset,
            noise,
            spam,
            filter_model,
            shelving,
        })
    }

    pub fn oracle_samples(&self) -> usize {
        match self.config.noise {
            NoiseConfig::Shelving {
                oracle_samples: Some(n),
                ..
            } => n,
            _ => DEFAULT_ORACLE_SAMPLES,
        }
    }

    /// Independent reference for the fitted decay parameter: `1 - mean(p)/2`
    /// for filter noise, the smaller twirl eigenvalue of the Monte Carlo
    /// averaged channel for shelving noise, `None` otherwise.
    pub fn oracle(&self) -> Result<Option<Oracle>> {
        if let Some(fm) = &self.filter_model {
            return Ok(Some(Oracle {
                quantity: "s_inc".into(),
                value: fm.analytic_s_inc(),
                method: "1 - mean(p)/2 over the drawn filter parameters".into(),
            }));
        }
        if let Some(sp) = &self.shelving {
            let n = self.oracle_samples();
            let mut rng = RandomStream::derive(self.config.seed, &[DOMAIN_ORACLE]);
            let ch = averaged_coherent_channel(sp, n, &mut rng)?;
            let (_, lambda_minus) = s_matrix(&ch)?.lambda_pm()?;
            return Ok(Some(Oracle {
                quantity: "decay_eigenvalue".into(),
                value: lambda_minus,
                method: format!("lambda_minus of the channel averaged over {n} noise draws"),
            }));
        }
        Ok(None)
    }

    pub fn provenance(&self) -> Provenance {
        let noise = match &self.config.noise {
            NoiseConfig::None => "none".to_string(),
            NoiseConfig::Filter { .. } => "filter".to_string(),
            NoiseConfig::Shelving {
                phi, sigma_gamma, ..
            } => {
                format!("shelving(phi={phi}, sigma_gamma={sigma_gamma})")
            }
            NoiseConfig::Channel { file } => format!("channel({file})"),
        };
        Provenance {
            config_hash: self.config.hash(),
            seed: self.config.seed,
            rng_algorithm: RNG_ALGORITHM.to_string(),
            gateset: self.gateset.label().to_string(),
            noise,
            shots: self.config.shots,
        }
    }

    pub fn run_records(&self, jobs: usize) -> Result<Vec<SequenceRecord>> {
        run_sequences(
            &self.gateset,
            &self.noise,
            &self.spam,
            &self.config.m_list,
            self.config.n_sequences,
            self.config.shots,
            self.config.seed,
            jobs,
        )
    }

    pub fn run(&self, jobs: usize) -> Result<DecayDataset> {
        let records = self.run_records(jobs)?;
        Ok(DecayDataset {
            points: aggregate(&records),
            provenance: Some(self.provenance()),
        })
    }
}

/// Runs a configuration whose relative paths resolve against the working
/// directory, on all available cores.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<DecayDataset> {
    Experiment::from_config(cfg.clone(), Path::new("."))?.run(rayon::current_num_threads())
}
