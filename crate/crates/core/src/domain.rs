//! Shared vocabulary types used by every other module. All values are
//! immutable after construction and safe to share across threads.

use std::fmt;
use std::str::FromStr;

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Three-class attachment scheme: avoidant, secure, preoccupied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttachmentStyle {
    Avoidant,
    Secure,
    Preoccupied,
}

impl AttachmentStyle {
    pub const ALL: [AttachmentStyle; 3] = [
        AttachmentStyle::Avoidant,
        AttachmentStyle::Secure,
        AttachmentStyle::Preoccupied,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            AttachmentStyle::Avoidant => "avoidant",
            AttachmentStyle::Secure => "secure",
            AttachmentStyle::Preoccupied => "preoccupied",
        }
    }
}

impl fmt::Display for AttachmentStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AttachmentStyle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_attachment_style(s)
    }
}

/// Case-insensitive parse over the three valid variants.
pub fn parse_attachment_style(s: &str) -> Result<AttachmentStyle> {
    match s.trim().to_ascii_lowercase().as_str() {
        "avoidant" => Ok(AttachmentStyle::Avoidant),
        "secure" => Ok(AttachmentStyle::Secure),
        "preoccupied" => Ok(AttachmentStyle::Preoccupied),
        _ => Err(Error::UnknownStyle {
            input: s.to_string(),
        }),
    }
}

/// The 14-key persona profile produced by the profile-generation prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserProfile {
    pub name: String,
    pub age: u32,
    pub race: String,
    pub gender: String,
    pub dob: NaiveDate,
    pub birthplace: String,
    pub current_job: String,
    pub places_lived: String,
    pub children: String,
    pub siblings: String,
    pub fathers_jobs: String,
    pub mothers_jobs: String,
    pub father_adjectives: String,
    pub mother_adjectives: String,
}

pub const PROFILE_KEYS: [&str; 14] = [
    "name",
    "age",
    "race",
    "gender",
    "dob",
    "birthplace",
    "current_job",
    "places_lived",
    "children",
    "siblings",
    "fathers_jobs",
    "mothers_jobs",
    "father_adjectives",
    "mother_adjectives",
];

/// Validates a raw key-value record into a `UserProfile`.
///
/// All 14 keys must be present and non-empty; `age` must be an integer in
/// [18, 100]; `dob` must parse as a YYYY-MM-DD calendar date. Age/dob
/// cross-consistency is deliberately not enforced.
pub fn validate_profile(raw: &serde_json::Map<String, serde_json::Value>) -> Result<UserProfile> {
    fn text_field(
        raw: &serde_json::Map<String, serde_json::Value>,
        key: &str,
    ) -> Result<String> {
        let v = raw
            .get(key)
            .ok_or_else(|| Error::MissingKey(key.to_string()))?;
        let s = match v {
            serde_json::Value::String(s) => s.clone(),
            serde_json::Value::Number(n) => n.to_string(),
            _ => {
                return Err(Error::FieldType {
                    key: key.to_string(),
                    detail: format!("expected text, got {v}"),
                })
            }
        };
        if s.trim().is_empty() {
            return Err(Error::FieldType {
                key: key.to_string(),
                detail: "empty value".to_string(),
            });
        }
        Ok(s)
    }

    for key in PROFILE_KEYS {
        if !raw.contains_key(key) {
            return Err(Error::MissingKey(key.to_string()));
        }
    }

    let age_value = raw.get("age").unwrap();
    let age = match age_value {
        serde_json::Value::Number(n) => n.as_u64(),
        serde_json::Value::String(s) => s.trim().parse::<u64>().ok(),
        _ => None,
    }
    .ok_or_else(|| Error::FieldType {
        key: "age".to_string(),
        detail: format!("not an integer: {age_value}"),
    })?;
    if !(18..=100).contains(&age) {
        return Err(Error::FieldType {
            key: "age".to_string(),
            detail: format!("age {age} outside [18, 100]"),
        });
    }

    let dob_text = text_field(raw, "dob")?;
    let dob = NaiveDate::parse_from_str(dob_text.trim(), "%Y-%m-%d").map_err(|e| {
        Error::FieldType {
            key: "dob".to_string(),
            detail: format!("{dob_text:?} is not a YYYY-MM-DD date: {e}"),
        }
    })?;

    Ok(UserProfile {
        name: text_field(raw, "name")?,
        age: age as u32,
        race: text_field(raw, "race")?,
        gender: text_field(raw, "gender")?,
        dob,
        birthplace: text_field(raw, "birthplace")?,
        current_job: text_field(raw, "current_job")?,
        places_lived: text_field(raw, "places_lived")?,
        children: text_field(raw, "children")?,
        siblings: text_field(raw, "siblings")?,
        fathers_jobs: text_field(raw, "fathers_jobs")?,
        mothers_jobs: text_field(raw, "mothers_jobs")?,
        father_adjectives: text_field(raw, "father_adjectives")?,
        mother_adjectives: text_field(raw, "mother_adjectives")?,
    })
}

/// One childhood memory with the moment the remembered event happened.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChildhoodMemory {
    #[serde(with = "memory_timestamp")]
    pub creation_timestamp: NaiveDateTime,
    pub content: String,
}

impl ChildhoodMemory {
    /// Content must be non-empty and the event must predate `reference`.
    pub fn validate(&self, reference: NaiveDateTime) -> Result<()> {
        if self.content.trim().is_empty() {
            return Err(Error::Validation("memory content is empty".to_string()));
        }
        if self.creation_timestamp >= reference {
            return Err(Error::Validation(format!(
                "memory timestamp {} is not earlier than reference {}",
                self.creation_timestamp.format(MEMORY_TS_FORMAT),
                reference.format(MEMORY_TS_FORMAT)
            )));
        }
        Ok(())
    }
}

pub const MEMORY_TS_FORMAT: &str = "%Y-%m-%d %H:%M:%S";

/// Parses a "today" timestamp in the memory format.
pub fn parse_reference_timestamp(raw: &str) -> Result<NaiveDateTime> {
    NaiveDateTime::parse_from_str(raw, MEMORY_TS_FORMAT).map_err(|e| {
        Error::FieldType {
            key: "reference_timestamp".into(),
            detail: format!("{raw:?}: {e}"),
        }
    })
}

mod memory_timestamp {
    use chrono::NaiveDateTime;
    use serde::{self, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(ts: &NaiveDateTime, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&ts.format(super::MEMORY_TS_FORMAT).to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<NaiveDateTime, D::Error> {
        let raw = String::deserialize(d)?;
        NaiveDateTime::parse_from_str(&raw, super::MEMORY_TS_FORMAT)
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Interviewer,
    Interviewee,
}

/// One turn of an interview chat.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub text: String,
    pub turn_index: u32,
}

/// Provenance of a transcript: a synthetic model run or a human session.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Source {
    Synthetic(String),
    Human,
}

impl Source {
    pub fn model_tag(&self) -> Option<&str> {
        match self {
            Source::Synthetic(tag) => Some(tag),
            Source::Human => None,
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Synthetic(tag) => write!(f, "synthetic:{tag}"),
            Source::Human => f.write_str("human"),
        }
    }
}

impl FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "human" {
            Ok(Source::Human)
        } else if let Some(tag) = s.strip_prefix("synthetic:") {
            if tag.is_empty() {
                Err(Error::Validation("empty model tag in source".to_string()))
            } else {
                Ok(Source::Synthetic(tag.to_string()))
            }
        } else {
            Err(Error::Validation(format!("bad source {s:?}")))
        }
    }
}

impl Serialize for Source {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Source {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

/// Ordered interviewer/interviewee turns with provenance and optional label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterviewTranscript {
    pub interview_id: String,
    pub source: Source,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<AttachmentStyle>,
    pub turns: Vec<ChatMessage>,
}

impl InterviewTranscript {
    /// Checks role alternation (interviewer first), strictly increasing
    /// turn indices, and complete question/answer pairing.
    pub fn validate(&self) -> Result<()> {
        if self.turns.is_empty() {
            return Err(Error::Validation(format!(
                "transcript {} has no turns",
                self.interview_id
            )));
        }
        let mut prev_index: Option<u32> = None;
        for (i, turn) in self.turns.iter().enumerate() {
            let expected = if i % 2 == 0 {
                Role::Interviewer
            } else {
                Role::Interviewee
            };
            if turn.role != expected {
                return Err(Error::Validation(format!(
                    "transcript {}: turn {i} has role {:?}, expected {:?}",
                    self.interview_id, turn.role, expected
                )));
            }
            if let Some(p) = prev_index {
                if turn.turn_index <= p {
                    return Err(Error::Validation(format!(
                        "transcript {}: turn_index not strictly increasing at turn {i}",
                        self.interview_id
                    )));
                }
            }
            prev_index = Some(turn.turn_index);
        }
        if self.turns.len() % 2 != 0 {
            return Err(Error::Validation(format!(
                "transcript {}: dangling interviewer question without answer",
                self.interview_id
            )));
        }
        Ok(())
    }

    /// Number of complete question/answer pairs.
    pub fn pair_count(&self) -> usize {
        self.turns.len() / 2
    }

    /// Interviewee answers in order.
    pub fn answers(&self) -> impl Iterator<Item = &ChatMessage> {
        self.turns.iter().filter(|t| t.role == Role::Interviewee)
    }
}

/// A persona: profile, assigned style, ten childhood memories, generator tag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentRecord {
    pub agent_id: String,
    pub profile: UserProfile,
    pub style: AttachmentStyle,
    pub memories: Vec<ChildhoodMemory>,
    pub model_tag: String,
}

pub const MEMORIES_PER_AGENT: usize = 10;

impl AgentRecord {
    pub fn validate(&self) -> Result<()> {
        if self.memories.len() != MEMORIES_PER_AGENT {
            return Err(Error::Validation(format!(
                "agent {} has {} memories, expected {MEMORIES_PER_AGENT}",
                self.agent_id,
                self.memories.len()
            )));
        }
        Ok(())
    }
}

/// Fixed-dimension real vector; all components finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector(pub Vec<f64>);

impl Vector {
    pub fn new(components: Vec<f64>) -> Result<Self> {
        if components.iter().any(|c| !c.is_finite()) {
            return Err(Error::Validation(
                "vector contains a non-finite component".to_string(),
            ));
        }
        Ok(Vector(components))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Which corpus an interview embedding belongs to.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum EmbeddingDomain {
    Synthetic(String),
    HumanLabeled,
    HumanUnlabeled,
}

impl fmt::Display for EmbeddingDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EmbeddingDomain::Synthetic(tag) => write!(f, "synthetic:{tag}"),
            EmbeddingDomain::HumanLabeled => f.write_str("human_labeled"),
            EmbeddingDomain::HumanUnlabeled => f.write_str("human_unlabeled"),
        }
    }
}

impl FromStr for EmbeddingDomain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "human_labeled" => Ok(EmbeddingDomain::HumanLabeled),
            "human_unlabeled" => Ok(EmbeddingDomain::HumanUnlabeled),
            other => match other.strip_prefix("synthetic:") {
                Some(tag) if !tag.is_empty() => Ok(EmbeddingDomain::Synthetic(tag.to_string())),
                _ => Err(Error::Validation(format!("bad embedding domain {s:?}"))),
            },
        }
    }
}

impl Serialize for EmbeddingDomain {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for EmbeddingDomain {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

/// One interview-level embedding: the element-wise mean of answer vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterviewEmbedding {
    pub interview_id: String,
    pub vector: Vector,
    pub domain: EmbeddingDomain,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<AttachmentStyle>,
}

impl InterviewEmbedding {
    pub fn validate(&self) -> Result<()> {
        match self.domain {
            EmbeddingDomain::HumanLabeled if self.label.is_none() => Err(Error::Validation(
                format!("{}: human_labeled entry without label", self.interview_id),
            )),
            EmbeddingDomain::HumanUnlabeled if self.label.is_some() => Err(Error::Validation(
                format!("{}: human_unlabeled entry carries a label", self.interview_id),
            )),
            _ => Ok(()),
        }
    }
}

/// A set of interview embeddings sharing one dimension, ids unique.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingDataset {
    pub entries: Vec<InterviewEmbedding>,
    pub embed_dim: usize,
}

impl EmbeddingDataset {
    pub fn new(mut entries: Vec<InterviewEmbedding>, embed_dim: usize) -> Result<Self> {
        entries.sort_by(|a, b| a.interview_id.cmp(&b.interview_id));
        let mut seen = std::collections::BTreeSet::new();
        for e in &entries {
            e.validate()?;
            if e.vector.dim() != embed_dim {
                return Err(Error::DimMismatch {
                    expected: embed_dim,
                    got: e.vector.dim(),
                });
            }
            if !seen.insert(e.interview_id.clone()) {
                return Err(Error::Validation(format!(
                    "duplicate interview_id {}",
                    e.interview_id
                )));
            }
        }
        Ok(EmbeddingDataset { entries, embed_dim })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries restricted to one label.
    pub fn by_label(&self, style: AttachmentStyle) -> Vec<&InterviewEmbedding> {
        self.entries
            .iter()
            .filter(|e| e.label == Some(style))
            .collect()
    }
}
