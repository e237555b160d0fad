//! HTTPS backends for the two commercial vendors. Credentials come from
//! environment variables and are never written to disk or logs.

use std::time::Duration;

use serde_json::json;

use crate::domain::Vector;
use crate::error::{Error, Result};
use crate::gateway::{ChatBackend, ChatRequest, ChatResponse, ChatRole, EmbedBackend, TokenUsage};

pub const OPENAI_KEY_VAR: &str = "OPENAI_API_KEY";
pub const ANTHROPIC_KEY_VAR: &str = "ANTHROPIC_API_KEY";

/// Interviews run about two minutes end to end, so individual calls get a
/// generous but bounded window.
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);

fn client() -> Result<reqwest::blocking::Client> {
    reqwest::blocking::Client::builder()
        .timeout(DEFAULT_TIMEOUT)
        .build()
        .map_err(|e| Error::Provider(e.to_string()))
}

fn classify_status(status: reqwest::StatusCode, body: &str) -> Error {
    let detail = format!("{status}: {}", body.chars().take(200).collect::<String>());
    if status == reqwest::StatusCode::UNAUTHORIZED || status == reqwest::StatusCode::FORBIDDEN {
        Error::Auth(detail)
    } else if status == reqwest::StatusCode::TOO_MANY_REQUESTS {
        Error::RateLimited(detail)
    } else if status.is_server_error() {
        Error::Provider(detail)
    } else {
        Error::MalformedObject(detail)
    }
}

fn send_error(e: reqwest::Error) -> Error {
    if e.is_timeout() {
        Error::Timeout(e.to_string())
    } else {
        Error::Provider(e.to_string())
    }
}

fn role_str(role: ChatRole) -> &'static str {
    match role {
        ChatRole::System => "system",
        ChatRole::User => "user",
        ChatRole::Assistant => "assistant",
    }
}

/// OpenAI chat-completions endpoint.
pub struct OpenAiChatBackend {
    pub api_key: String,
    pub model: String,
    pub base_url: String,
}

impl OpenAiChatBackend {
    pub fn from_env(model: &str) -> Result<Self> {
        let api_key = std::env::var(OPENAI_KEY_VAR)
            .map_err(|_| Error::Auth(format!("{OPENAI_KEY_VAR} is not set")))?;
        Ok(OpenAiChatBackend {
            api_key,
            model: model.to_string(),
            base_url: "https://api.openai.com/v1".to_string(),
        })
    }

    pub fn request_body(&self, req: &ChatRequest) -> serde_json::Value {
        json!({
            "model": self.model,
            "temperature": req.temperature,
            "max_tokens": req.max_output_tokens,
            "messages": req.messages.iter().map(|(role, text)| json!({
                "role": role_str(*role),
                "content": text,
            })).collect::<Vec<_>>(),
        })
    }
}

impl ChatBackend for OpenAiChatBackend {
    fn chat(&self, req: &ChatRequest) -> Result<ChatResponse> {
        let resp = client()?
            .post(format!("{}/chat/completions", self.base_url))
            .bearer_auth(&self.api_key)
            .json(&self.request_body(req))
            .send()
            .map_err(send_error)?;
        let status = resp.status();
        let body = resp.text().map_err(send_error)?;
        if !status.is_success() {
            return Err(classify_status(status, &body));
        }
        let parsed: serde_json::Value =
            serde_json::from_str(&body).map_err(|e| Error::MalformedObject(e.to_string()))?;
        let text = parsed["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| Error::MalformedObject("missing message content".into()))?
            .to_string();
        if text.is_empty() {
            return Err(Error::Provider("empty completion".into()));
        }
        let usage = TokenUsage {
            input_tokens: parsed["usage"]["prompt_tokens"].as_u64().unwrap_or(0),
            output_tokens: parsed["usage"]["completion_tokens"].as_u64().unwrap_or(0),
        };
        Ok(ChatResponse { text, usage })
    }
}

/// OpenAI embeddings endpoint (text-embedding-3-small by default, 1536-dim).
pub struct OpenAiEmbedBackend {
    pub api_key: String,
    pub model: String,
    pub base_url: String,
    pub dim: usize,
}

impl OpenAiEmbedBackend {
    pub fn from_env(model: &str, dim: usize) -> Result<Self> {
        let api_key = std::env::var(OPENAI_KEY_VAR)
            .map_err(|_| Error::Auth(format!("{OPENAI_KEY_VAR} is not set")))?;
        Ok(OpenAiEmbedBackend {
            api_key,
            model: model.to_string(),
            base_url: "https://api.openai.com/v1".to_string(),
            dim,
        })
    }
}

impl EmbedBackend for OpenAiEmbedBackend {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vector>> {
        let resp = client()?
            .post(format!("{}/embeddings", self.base_url))
            .bearer_auth(&self.api_key)
            .json(&json!({ "model": self.model, "input": texts }))
            .send()
            .map_err(send_error)?;
        let status = resp.status();
        let body = resp.text().map_err(send_error)?;
        if !status.is_success() {
            return Err(classify_status(status, &body));
        }
        let parsed: serde_json::Value =
            serde_json::from_str(&body).map_err(|e| Error::MalformedObject(e.to_string()))?;
        let data = parsed["data"]
            .as_array()
            .ok_or_else(|| Error::MalformedObject("missing data array".into()))?;
        data.iter()
            .map(|item| {
                let comps: Vec<f64> = item["embedding"]
                    .as_array()
                    .ok_or_else(|| Error::MalformedObject("missing embedding".into()))?
                    .iter()
                    .map(|v| v.as_f64().unwrap_or(f64::NAN))
                    .collect();
                Vector::new(comps)
            })
            .collect()
    }

    fn dim(&self) -> usize {
        self.dim
    }
}

/// Anthropic messages endpoint.
pub struct AnthropicChatBackend {
    pub api_key: String,
    pub model: String,
    pub base_url: String,
}

impl AnthropicChatBackend {
    pub fn from_env(model: &str) -> Result<Self> {
        let api_key = std::env::var(ANTHROPIC_KEY_VAR)
            .map_err(|_| Error::Auth(format!("{ANTHROPIC_KEY_VAR} is not set")))?;
        Ok(AnthropicChatBackend {
            api_key,
            model: model.to_string(),
            base_url: "https://api.anthropic.com/v1".to_string(),
        })
    }

    pub fn request_body(&self, req: &ChatRequest) -> serde_json::Value {
        // Anthropic takes the system prompt as a top-level field.
        let system: Vec<&str> = req
            .messages
            .iter()
            .filter(|(r, _)| *r == ChatRole::System)
            .map(|(_, t)| t.as_str())
            .collect();
        let mut body = json!({
            "model": self.model,
            "temperature": req.temperature,
            "max_tokens": req.max_output_tokens,
            "messages": req.messages.iter()
                .filter(|(r, _)| *r != ChatRole::System)
                .map(|(role, text)| json!({
                    "role": role_str(*role),
                    "content": text,
                })).collect::<Vec<_>>(),
        });
        if !system.is_empty() {
            body["system"] = json!(system.join("\n"));
        }
        body
    }
}

impl ChatBackend for AnthropicChatBackend {
    fn chat(&self, req: &ChatRequest) -> Result<ChatResponse> {
        let resp = client()?
            .post(format!("{}/messages", self.base_url))
            .header("x-api-key", &self.api_key)
            .header("anthropic-version", "2023-06-01")
            .json(&self.request_body(req))
            .send()
            .map_err(send_error)?;
        let status = resp.status();
        let body = resp.text().map_err(send_error)?;
        if !status.is_success() {
            return Err(classify_status(status, &body));
        }
        let parsed: serde_json::Value =
            serde_json::from_str(&body).map_err(|e| Error::MalformedObject(e.to_string()))?;
        let text = parsed["content"][0]["text"]
            .as_str()
            .ok_or_else(|| Error::MalformedObject("missing content text".into()))?
            .to_string();
        if text.is_empty() {
            return Err(Error::Provider("empty completion".into()));
        }
        let usage = TokenUsage {
            input_tokens: parsed["usage"]["input_tokens"].as_u64().unwrap_or(0),
            output_tokens: parsed["usage"]["output_tokens"].as_u64().unwrap_or(0),
        };
        Ok(ChatResponse { text, usage })
    }
}
