//! Agent cohort generation: profiles, ten childhood memories each, and
//! balanced attachment-style assignment. Generation is resumable; each
//! completed agent is appended to `agents.jsonl` immediately.

use std::path::Path;

use chrono::NaiveDateTime;

use crate::domain::{
    validate_profile, AgentRecord, AttachmentStyle, ChildhoodMemory, UserProfile,
    MEMORIES_PER_AGENT, MEMORY_TS_FORMAT,
};
use crate::error::{Error, Result};
use crate::gateway::{extract_json, ChatRequest, ChatRole, Gateway};
use crate::jsonl;
use crate::prompts;

const GENERATION_ATTEMPTS: u32 = 3;

#[derive(Debug, Clone)]
pub struct CohortSpec {
    pub total_agents: usize,
    pub per_style_count: usize,
    pub generation_temperature: f64,
    pub reference_timestamp: NaiveDateTime,
    pub model_tag: String,
}

impl CohortSpec {
    pub fn new(
        total_agents: usize,
        per_style_count: usize,
        reference_timestamp: NaiveDateTime,
        model_tag: &str,
    ) -> Result<Self> {
        let spec = CohortSpec {
            total_agents,
            per_style_count,
            generation_temperature: 0.7,
            reference_timestamp,
            model_tag: model_tag.to_string(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_agents == 0 || self.per_style_count == 0 {
            return Err(Error::Validation("cohort counts must be positive".into()));
        }
        if self.total_agents != 3 * self.per_style_count {
            return Err(Error::Validation(format!(
                "total_agents {} must equal 3 x per_style_count {}",
                self.total_agents, self.per_style_count
            )));
        }
        Ok(())
    }
}

/// Sends the profile prompt verbatim and validates the returned JSON,
/// regenerating up to 3 times on invalid output. The `nonce` rides along as
/// a separate system message so distinct agents (and retry attempts) yield
/// distinct completions even on the deterministic mock provider.
pub fn generate_profile(
    gateway: &Gateway,
    model_tag: &str,
    temperature: f64,
    nonce: &str,
) -> Result<UserProfile> {
    let mut last_detail = String::new();
    for attempt in 0..GENERATION_ATTEMPTS {
        let req = ChatRequest {
            messages: vec![
                (ChatRole::System, format!("sample {nonce}/{attempt}")),
                (ChatRole::User, prompts::PROFILE_PROMPT.to_string()),
            ],
            temperature,
            max_output_tokens: 1024,
            model_tag: model_tag.to_string(),
        };
        let resp = gateway.chat(&req)?;
        match extract_json(&resp.text).and_then(|raw| validate_profile(&raw)) {
            Ok(profile) => return Ok(profile),
            Err(e) => last_detail = e.to_string(),
        }
    }
    Err(Error::GenerationFailed {
        attempts: GENERATION_ATTEMPTS,
        detail: format!("profile generation: {last_detail}"),
    })
}

/// Fills the memories prompt placeholders for `profile` and parses the
/// response into exactly ten validated memories, retrying as needed.
pub fn generate_memories(
    gateway: &Gateway,
    model_tag: &str,
    profile: &UserProfile,
    reference_timestamp: NaiveDateTime,
    temperature: f64,
    nonce: &str,
) -> Result<Vec<ChildhoodMemory>> {
    let profile_json = serde_json::to_string_pretty(profile)?;
    let prompt = prompts::render(
        prompts::MEMORIES_PROMPT,
        &[
            (
                "reference_timestamp",
                &reference_timestamp.format(MEMORY_TS_FORMAT).to_string(),
            ),
            ("user_profile", &profile_json),
        ],
    )?;

    let mut last_detail = String::new();
    for attempt in 0..GENERATION_ATTEMPTS {
        let req = ChatRequest {
            messages: vec![
                (ChatRole::System, format!("sample {nonce}/{attempt}")),
                (ChatRole::User, prompt.clone()),
            ],
            temperature,
            max_output_tokens: 4096,
            model_tag: model_tag.to_string(),
        };
        let resp = gateway.chat(&req)?;
        match parse_memories(&resp.text, reference_timestamp) {
            Ok(memories) => return Ok(memories),
            Err(e) => last_detail = e.to_string(),
        }
    }
    Err(Error::GenerationFailed {
        attempts: GENERATION_ATTEMPTS,
        detail: format!("memory generation: {last_detail}"),
    })
}

fn parse_memories(
    text: &str,
    reference: NaiveDateTime,
) -> Result<Vec<ChildhoodMemory>> {
    let obj = extract_json(text)?;
    // The prompt asks for "a JSON object containing a list"; take the first
    // array-valued field whatever the provider named it.
    let list = obj
        .values()
        .find_map(|v| v.as_array())
        .ok_or_else(|| Error::MalformedObject("no memory list in object".into()))?;
    let memories: Vec<ChildhoodMemory> = list
        .iter()
        .map(|v| {
            serde_json::from_value(v.clone())
                .map_err(|e| Error::MalformedObject(e.to_string()))
        })
        .collect::<Result<_>>()?;
    if memories.len() != MEMORIES_PER_AGENT {
        return Err(Error::Validation(format!(
            "expected {MEMORIES_PER_AGENT} memories, got {}",
            memories.len()
        )));
    }
    for m in &memories {
        m.validate(reference)?;
    }
    Ok(memories)
}

/// Style for the agent at `index` under round-robin balanced assignment.
pub fn style_for_index(index: usize) -> AttachmentStyle {
    AttachmentStyle::ALL[index % 3]
}

/// Generates the full cohort, assigning styles round-robin so each style
/// receives exactly `per_style_count` agents. If `out_path` already holds
/// completed agents, generation resumes after them.
pub fn build_cohort(
    gateway: &Gateway,
    spec: &CohortSpec,
    out_path: &Path,
) -> Result<Vec<AgentRecord>> {
    build_cohort_with_ids(gateway, spec, out_path, "agent")
}

pub fn build_cohort_with_ids(
    gateway: &Gateway,
    spec: &CohortSpec,
    out_path: &Path,
    id_prefix: &str,
) -> Result<Vec<AgentRecord>> {
    spec.validate()?;

    let mut agents: Vec<AgentRecord> = if out_path.exists() {
        jsonl::read_jsonl(out_path)?
    } else {
        Vec::new()
    };
    for a in &agents {
        a.validate()?;
    }
    if agents.len() > spec.total_agents {
        return Err(Error::Validation(format!(
            "{} already holds {} agents but the spec wants {}",
            out_path.display(),
            agents.len(),
            spec.total_agents
        )));
    }

    for index in agents.len()..spec.total_agents {
        let agent_id = format!("{id_prefix}-{index:03}");
        let agent = generate_agent(gateway, spec, &agent_id, style_for_index(index))
            .map_err(|e| match e {
                Error::GenerationFailed { attempts, detail } => Error::GenerationFailed {
                    attempts,
                    detail: format!("{detail} (after {index} completed agents)"),
                },
                other => other,
            })?;
        jsonl::append_jsonl(out_path, &agent)?;
        agents.push(agent);
    }
    Ok(agents)
}

fn generate_agent(
    gateway: &Gateway,
    spec: &CohortSpec,
    agent_id: &str,
    style: AttachmentStyle,
) -> Result<AgentRecord> {
    let profile = generate_profile(
        gateway,
        &spec.model_tag,
        spec.generation_temperature,
        agent_id,
    )?;
    let memories = generate_memories(
        gateway,
        &spec.model_tag,
        &profile,
        spec.reference_timestamp,
        spec.generation_temperature,
        agent_id,
    )?;
    let agent = AgentRecord {
        agent_id: agent_id.to_string(),
        profile,
        style,
        memories,
        model_tag: spec.model_tag.clone(),
    };
    agent.validate()?;
    Ok(agent)
}
