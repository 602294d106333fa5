//! Experiment configuration file (JSON) and its content digest.
//!
//! The digest is computed over the canonicalized document (keys sorted,
//! formatting normalized), so reordering keys or reformatting the file does
//! not change it.

use std::path::{Path, PathBuf};

use fedshot_core::model::{FeaturizerConfig, ModelSpec, OptimizerConfig};
use fedshot_core::params::{PartitionSpec, Strategy};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub featurizer: FeaturizerConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub federation: FederationSection,
    pub clients: Vec<ClientSection>,
    /// Few-shot sizes swept by `run`.
    #[serde(default = "default_sweep")]
    pub sweep: Vec<u32>,
    pub output_dir: PathBuf,
    /// Seed for split construction, independent of the federation seeds.
    #[serde(default = "default_split_seed")]
    pub split_seed: u64,
    /// Save final parameter checkpoints for the first seed of each fl run.
    #[serde(default)]
    pub save_checkpoints: bool,
    #[serde(default)]
    pub toxicity: Option<ToxicitySection>,
}

fn default_sweep() -> Vec<u32> {
    vec![0, 3, 9, 15]
}

fn default_split_seed() -> u64 {
    13
}

#[derive(Debug, Clone, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default = "default_embed_dim")]
    pub embed_dim: usize,
    #[serde(default = "default_block_count")]
    pub block_count: usize,
    #[serde(default = "default_adapter_dim")]
    pub adapter_dim: usize,
}

fn default_embed_dim() -> usize {
    64
}
fn default_block_count() -> usize {
    4
}
fn default_adapter_dim() -> usize {
    16
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            embed_dim: 64,
            block_count: 4,
            adapter_dim: 16,
        }
    }
}

#[derive(Debug, Clone, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FederationSection {
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_strategy")]
    pub strategy: Strategy,
    #[serde(default)]
    pub k_p: usize,
}

fn default_rounds() -> usize {
    5
}
fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3, 4, 5]
}
fn default_strategy() -> Strategy {
    Strategy::Standard
}

impl Default for FederationSection {
    fn default() -> Self {
        Self {
            rounds: 5,
            seeds: default_seeds(),
            strategy: Strategy::Standard,
            k_p: 0,
        }
    }
}

#[derive(Debug, Clone, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClientSection {
    pub id: String,
    pub corpus: PathBuf,
    /// Test ids for split construction (JSON list, or an object with a
    /// `test` key). Required by `build-splits`.
    #[serde(default)]
    pub test_ids: Option<PathBuf>,
    /// Split file consumed by `run`; defaults to `<output_dir>/splits/<id>.json`.
    #[serde(default)]
    pub split: Option<PathBuf>,
    #[serde(default = "default_ratio")]
    pub dev_max_ratio: f64,
    #[serde(default = "default_ratio")]
    pub train_max_ratio: f64,
    #[serde(default)]
    pub dev_size: usize,
}

fn default_ratio() -> f64 {
    0.5
}

#[derive(Debug, Clone, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToxicitySection {
    pub endpoint: String,
    /// Name of the environment variable holding the bearer token / API key.
    #[serde(default)]
    pub token_env: Option<String>,
    #[serde(default = "default_thresholds")]
    pub thresholds: Vec<f64>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_retries")]
    pub retries: u32,
    #[serde(default)]
    pub profile: crate::toxicity::ApiProfile,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
}

fn default_thresholds() -> Vec<f64> {
    vec![0.7, 0.9]
}
fn default_timeout_ms() -> u64 {
    10_000
}
fn default_retries() -> u32 {
    2
}
fn default_in_flight() -> usize {
    4
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<(ExperimentConfig, String), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        let digest = canonical_digest(&text)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let config: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok((config, digest))
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.clients.is_empty() {
            return Err(CliError::config("clients: list is empty"));
        }
        for shot in &self.sweep {
            if !matches!(shot, 0 | 3 | 9 | 15) {
                return Err(CliError::config(format!(
                    "sweep: shot count {shot} not in {{0, 3, 9, 15}}"
                )));
            }
        }
        if let Some(tox) = &self.toxicity {
            let t = &tox.thresholds;
            if t.is_empty() {
                return Err(CliError::config("toxicity.thresholds: list is empty"));
            }
            if !t.windows(2).all(|w| w[0] < w[1]) {
                return Err(CliError::config(
                    "toxicity.thresholds: must be sorted ascending",
                ));
            }
            if t.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
                return Err(CliError::config(
                    "toxicity.thresholds: values must lie in [0, 1]",
                ));
            }
        }
        self.model_spec()
            .validate()
            .map_err(|e| CliError::config(e.to_string()))?;
        self.featurizer
            .validate()
            .map_err(|e| CliError::config(e.to_string()))?;
        self.optimizer
            .validate()
            .map_err(|e| CliError::config(e.to_string()))?;
        Ok(())
    }

    /// The model takes its input width from the featurizer hash dimension.
    pub fn model_spec(&self) -> ModelSpec {
        ModelSpec::new(
            self.featurizer.hash_dim,
            self.model.embed_dim,
            self.model.block_count,
            self.model.adapter_dim,
        )
    }

    pub fn partition_spec(&self) -> PartitionSpec {
        PartitionSpec {
            strategy: self.federation.strategy,
            k_p: self.federation.k_p,
        }
    }

    /// Split file for a client, defaulting into the effective output
    /// directory (which `--out` may override).
    pub fn split_path(&self, client: &ClientSection, out_dir: &Path) -> PathBuf {
        client
            .split
            .clone()
            .unwrap_or_else(|| out_dir.join("splits").join(format!("{}.json", client.id)))
    }
}

/// SHA-256 of the canonicalized JSON document, as lowercase hex.
pub fn canonical_digest(text: &str) -> Result<String, serde_json::Error> {
    // serde_json::Value maps are BTreeMaps, so re-serializing sorts keys
    // and normalizes whitespace and number spelling.
    let value: serde_json::Value = serde_json::from_str(text)?;
    let canonical = serde_json::to_string(&value)?;
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    Ok(hex(&hasher.finalize()))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "clients": [{"id": "a", "corpus": "a.jsonl"}],
        "output_dir": "out"
    }"#;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str(MINIMAL).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.federation.rounds, 5);
        assert_eq!(cfg.federation.seeds.len(), 5);
        assert_eq!(cfg.sweep, vec![0, 3, 9, 15]);
        assert_eq!(cfg.model_spec().hash_dim, 32_768);
        assert_eq!(cfg.model_spec().block_count, 4);
        assert_eq!(cfg.optimizer.learning_rate, 0.05);
    }

    #[test]
    fn digest_is_stable_under_key_reordering() {
        let a = r#"{"output_dir": "out", "clients": [], "sweep": [0, 3]}"#;
        let b = r#"{"sweep":[0,3],"clients":[],"output_dir":"out"}"#;
        assert_eq!(canonical_digest(a).unwrap(), canonical_digest(b).unwrap());
        let c = r#"{"sweep":[3,0],"clients":[],"output_dir":"out"}"#;
        assert_ne!(canonical_digest(a).unwrap(), canonical_digest(c).unwrap());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = r#"{"clients": [], "output_dir": "o", "typo_field": 1}"#;
        assert!(serde_json::from_str::<ExperimentConfig>(bad).is_err());
    }

    #[test]
    fn sweep_values_are_checked() {
        let bad = r#"{
            "clients": [{"id": "a", "corpus": "a.jsonl"}],
            "output_dir": "out",
            "sweep": [0, 4]
        }"#;
        let cfg: ExperimentConfig = serde_json::from_str(bad).unwrap();
        assert!(cfg.validate().is_err());
    }
}
