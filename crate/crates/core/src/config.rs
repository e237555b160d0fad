//! Pipeline configuration: JSON file plus flag overrides, with defaults
//! matching the reference setup (60 agents, temperatures 0.7/0.5, four
//! classifiers, increment grid 2..20).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::eval::ClassifierSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Offline deterministic providers; forces zero network use.
    pub mock: bool,
    pub seed: u64,
    pub artifact_dir: PathBuf,
    /// One synthetic interview dataset is produced per chat model tag.
    pub chat_models: Vec<String>,
    pub answer_embedder: String,
    pub answer_embed_dim: usize,
    pub memory_embedder: String,
    pub memory_embed_dim: usize,
    pub total_agents: usize,
    pub generation_temperature: f64,
    pub dialogue_temperature: f64,
    /// One question per line; the built-in 19-question protocol when unset.
    pub protocol_path: Option<PathBuf>,
    pub retrieval_k: usize,
    pub max_answer_tokens: u32,
    /// Directory of per-interview human transcript JSON files. In mock mode
    /// a synthetic "human" cohort is fabricated instead when unset.
    pub human_transcripts_dir: Option<PathBuf>,
    /// JSON object mapping interview_id to style for the labeled subset.
    pub human_labels_path: Option<PathBuf>,
    /// Mock-human labeled counts per style, canonical style order.
    pub mock_human_labeled: Vec<usize>,
    pub mock_human_unlabeled: usize,
    pub classifiers: Vec<ClassifierSpec>,
    /// Classifier for the data-increment experiment (kept deterministic by
    /// default so the curve isolates sampling noise).
    pub increment_classifier: ClassifierSpec,
    pub increment_grid: Vec<usize>,
    pub increment_reps: usize,
    /// "Today" for memory generation, "%Y-%m-%d %H:%M:%S".
    pub reference_timestamp: String,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            mock: true,
            seed: 7,
            artifact_dir: PathBuf::from("artifacts"),
            chat_models: vec!["mock-gpt".into(), "mock-claude".into()],
            answer_embedder: "answer-embedder".into(),
            answer_embed_dim: 1536,
            memory_embedder: "memory-embedder".into(),
            memory_embed_dim: 384,
            total_agents: 60,
            generation_temperature: 0.7,
            dialogue_temperature: 0.5,
            protocol_path: None,
            retrieval_k: 3,
            max_answer_tokens: 512,
            human_transcripts_dir: None,
            human_labels_path: None,
            mock_human_labeled: vec![4, 3, 2],
            mock_human_unlabeled: 17,
            classifiers: ClassifierSpec::default_suite(),
            increment_classifier: ClassifierSpec::logreg_l2(),
            increment_grid: crate::eval::protocols::default_increment_grid(),
            increment_reps: 10,
            reference_timestamp: "2024-01-01 00:00:00".into(),
        }
    }
}

/// Flag-level overrides; precedence is flags > file > defaults.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub mock: Option<bool>,
    pub seed: Option<u64>,
    pub total_agents: Option<usize>,
    pub artifact_dir: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn load(file: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut config = match file {
            Some(path) => {
                let bytes = std::fs::read(path).map_err(|_| {
                    Error::MissingArtifact(path.display().to_string(), "config".into())
                })?;
                serde_json::from_slice(&bytes).map_err(|e| Error::Schema {
                    file: path.display().to_string(),
                    line: e.line(),
                    detail: e.to_string(),
                })?
            }
            None => PipelineConfig::default(),
        };
        if let Some(mock) = overrides.mock {
            config.mock = mock;
        }
        if let Some(seed) = overrides.seed {
            config.seed = seed;
        }
        if let Some(total) = overrides.total_agents {
            config.total_agents = total;
        }
        if let Some(dir) = &overrides.artifact_dir {
            config.artifact_dir = dir.clone();
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, t) in [
            ("generation", self.generation_temperature),
            ("dialogue", self.dialogue_temperature),
        ] {
            if !(0.0..=2.0).contains(&t) {
                return Err(Error::Validation(format!(
                    "{name} temperature {t} outside [0, 2]"
                )));
            }
        }
        if self.total_agents == 0 || self.total_agents % 3 != 0 {
            return Err(Error::Validation(format!(
                "total_agents {} must be a positive multiple of 3",
                self.total_agents
            )));
        }
        if self.chat_models.is_empty() {
            return Err(Error::Validation("at least one chat model required".into()));
        }
        {
            let mut tags = self.chat_models.clone();
            tags.sort();
            tags.dedup();
            if tags.len() != self.chat_models.len() {
                return Err(Error::Validation("duplicate chat model tags".into()));
            }
        }
        if self.answer_embed_dim == 0 || self.memory_embed_dim == 0 {
            return Err(Error::Validation("embedding dimensions must be positive".into()));
        }
        if self.mock_human_labeled.len() != 3 {
            return Err(Error::Validation(
                "mock_human_labeled needs one count per style".into(),
            ));
        }
        if self.retrieval_k == 0 {
            return Err(Error::Validation("retrieval_k must be at least 1".into()));
        }
        crate::domain::parse_reference_timestamp(&self.reference_timestamp)?;
        Ok(())
    }

    /// Stable hash of the full configuration; artifacts record it so a
    /// changed config never silently reuses stale outputs.
    pub fn content_hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&canonical);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn reference(&self) -> chrono::NaiveDateTime {
        crate::domain::parse_reference_timestamp(&self.reference_timestamp)
            .expect("validated timestamp")
    }

    pub fn mock_human_total(&self) -> usize {
        self.mock_human_labeled.iter().sum::<usize>() + self.mock_human_unlabeled
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_reference_shaped() {
        let config = PipelineConfig::default();
        config.validate().unwrap();
        assert_eq!(config.total_agents, 60);
        assert_eq!(config.generation_temperature, 0.7);
        assert_eq!(config.dialogue_temperature, 0.5);
        assert_eq!(config.mock_human_labeled, vec![4, 3, 2]);
        assert_eq!(config.mock_human_total(), 26);
        assert_eq!(config.classifiers.len(), 4);
        assert_eq!(config.increment_reps, 10);
    }

    #[test]
    fn flags_beat_file_beat_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        let mut file_config = PipelineConfig::default();
        file_config.seed = 100;
        file_config.total_agents = 30;
        std::fs::write(&path, serde_json::to_vec(&file_config).unwrap()).unwrap();

        let overrides = Overrides {
            seed: Some(5),
            ..Default::default()
        };
        let loaded = PipelineConfig::load(Some(&path), &overrides).unwrap();
        assert_eq!(loaded.seed, 5); // flag wins
        assert_eq!(loaded.total_agents, 30); // file wins over default
        assert!(loaded.mock); // default survives
    }

    #[test]
    fn invalid_settings_are_rejected() {
        let mut c = PipelineConfig::default();
        c.generation_temperature = 2.5;
        assert!(c.validate().is_err());

        let mut c = PipelineConfig::default();
        c.total_agents = 20;
        assert!(c.validate().is_err());

        let mut c = PipelineConfig::default();
        c.chat_models = vec!["m".into(), "m".into()];
        assert!(c.validate().is_err());

        let mut c = PipelineConfig::default();
        c.reference_timestamp = "not a date".into();
        assert!(c.validate().is_err());
    }

    #[test]
    fn unknown_config_keys_are_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        std::fs::write(&path, br#"{"seeed": 3}"#).unwrap();
        assert!(PipelineConfig::load(Some(&path), &Overrides::default()).is_err());
    }

    #[test]
    fn content_hash_tracks_changes() {
        let a = PipelineConfig::default();
        let mut b = a.clone();
        assert_eq!(a.content_hash(), b.content_hash());
        b.seed = 8;
        assert_ne!(a.content_hash(), b.content_hash());
    }

    #[test]
    fn missing_config_file_maps_to_missing_artifact() {
        let err =
            PipelineConfig::load(Some(Path::new("/no/such/config.json")), &Overrides::default())
                .unwrap_err();
        assert!(matches!(err, Error::MissingArtifact(..)));
    }
}
