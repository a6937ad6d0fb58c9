//! TOML run configurations and the shared corpus / identifier specs.

use std::path::{Path, PathBuf};

use adversim_agents::SearchConfig;
use adversim_core::corpus::{generate_corpus_with, CorpusConfig, TemplateWeights};
use adversim_core::identifier::{load_program, parse_program, IdentifierMethod, KineticParams};
use adversim_core::io::load_set;
use adversim_core::{ScenarioSet, Split};
use adversim_train::{Condition, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Either a saved scenario set or generator parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSpec {
    #[serde(default)]
    pub set: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub n: usize,
    #[serde(default = "default_split")]
    pub split: String,
}

fn default_split() -> String {
    "train".into()
}

impl CorpusSpec {
    pub fn generated(seed: u64, n: usize, split: Split) -> Self {
        Self {
            set: None,
            seed,
            n,
            split: split.as_str().into(),
        }
    }

    /// Paths in the spec are taken relative to `base`.
    pub fn load(&self, base: &Path) -> Result<ScenarioSet, CliError> {
        if let Some(p) = &self.set {
            return Ok(load_set(base.join(p))?);
        }
        if self.n == 0 {
            return Err(CliError::Validation("corpus needs either `set` or `n` > 0".into()));
        }
        let split = Split::parse(&self.split)
            .ok_or_else(|| CliError::Validation(format!("unknown split `{}`", self.split)))?;
        Ok(generate_corpus_with(
            self.seed,
            self.n,
            &TemplateWeights::uniform(),
            &CorpusConfig::default(),
            split,
        )?)
    }
}

/// How attackers are chosen: `random`, `min_ttc`, `kinetic_field` or
/// `program` (with an inline expression or a `.dsl` file).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSpec {
    pub method: String,
    #[serde(default)]
    pub program: Option<String>,
    #[serde(default)]
    pub program_file: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

impl MethodSpec {
    pub fn resolve(&self, base: &Path) -> Result<IdentifierMethod, CliError> {
        let m = match self.method.replace('-', "_").as_str() {
            "random" => IdentifierMethod::Random { seed: self.seed },
            "min_ttc" => IdentifierMethod::MinTtc,
            "kinetic_field" => IdentifierMethod::KineticField(KineticParams::default()),
            "program" => match (&self.program, &self.program_file) {
                (Some(src), None) => IdentifierMethod::Program(parse_program(src)?),
                (None, Some(p)) => IdentifierMethod::Program(load_program(base.join(p))?),
                _ => {
                    return Err(CliError::Validation(
                        "method `program` needs exactly one of `program` or `program_file`".into(),
                    ))
                }
            },
            other => return Err(CliError::Validation(format!("unknown identifier method `{other}`"))),
        };
        m.validate()?;
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchFile {
    pub corpus: CorpusSpec,
    #[serde(default)]
    pub search: SearchConfig,
    /// Seed of the offline mock client.
    #[serde(default)]
    pub mock_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainFile {
    /// Label used in reports, e.g. `replay` or `adversarial`.
    #[serde(default = "default_dataset")]
    pub dataset: String,
    pub train_corpus: CorpusSpec,
    pub test_corpus: CorpusSpec,
    pub identifier: MethodSpec,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default = "default_conditions")]
    pub conditions: Vec<Condition>,
    #[serde(default)]
    pub train: TrainConfig,
}

fn default_dataset() -> String {
    "adversarial".into()
}

fn default_repeats() -> usize {
    1
}

fn default_conditions() -> Vec<Condition> {
    Condition::ALL.to_vec()
}

pub fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    toml::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

pub fn parse_conditions(s: &str) -> Result<Vec<Condition>, CliError> {
    s.split(',')
        .map(|c| Condition::from_name(c.trim()).ok_or_else(|| CliError::Validation(format!("unknown condition `{c}`"))))
        .collect()
}
