//! Uniform access to chat-completion and text-embedding providers, with a
//! deterministic offline mock and token-usage accounting.

pub mod mock;
pub mod providers;

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain::Vector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChatRole {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone)]
pub struct ChatRequest {
    pub messages: Vec<(ChatRole, String)>,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub model_tag: String,
}

impl ChatRequest {
    pub fn user(model_tag: &str, prompt: &str, temperature: f64) -> Self {
        ChatRequest {
            messages: vec![(ChatRole::User, prompt.to_string())],
            temperature,
            max_output_tokens: 512,
            model_tag: model_tag.to_string(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.messages.is_empty() {
            return Err(Error::Validation("chat request has no messages".into()));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(Error::Validation(format!(
                "invalid temperature {}: must lie in [0, 2]",
                self.temperature
            )));
        }
        if self.max_output_tokens == 0 {
            return Err(Error::Validation("max_output_tokens must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatResponse {
    pub text: String,
    pub usage: TokenUsage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenUsage {
    pub input_tokens: u64,
    pub output_tokens: u64,
}

impl TokenUsage {
    pub fn add(&mut self, other: TokenUsage) {
        self.input_tokens += other.input_tokens;
        self.output_tokens += other.output_tokens;
    }
}

#[derive(Debug, Clone)]
pub struct EmbedRequest {
    pub texts: Vec<String>,
    pub model_tag: String,
}

impl EmbedRequest {
    fn validate(&self) -> Result<()> {
        if self.texts.is_empty() {
            return Err(Error::EmptyInput("embed request has no texts".into()));
        }
        for (i, t) in self.texts.iter().enumerate() {
            if t.trim().is_empty() {
                return Err(Error::EmptyInput(format!("embed request text {i} is empty")));
            }
        }
        Ok(())
    }
}

/// A chat-completion provider behind the gateway.
pub trait ChatBackend: Send + Sync {
    fn chat(&self, req: &ChatRequest) -> Result<ChatResponse>;
}

/// A text-embedding provider behind the gateway.
pub trait EmbedBackend: Send + Sync {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vector>>;
    fn dim(&self) -> usize;
}

#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub backoff_base: Duration,
}

impl Default for RetryPolicy {
    // 3 attempts, backoff 1s/2s/4s, transient failures only.
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            backoff_base: Duration::from_secs(1),
        }
    }
}

/// Routes requests to registered backends by model tag, retries transient
/// failures, accumulates token usage, and caches embeddings by content hash.
pub struct Gateway {
    chat_backends: HashMap<String, Box<dyn ChatBackend>>,
    embed_backends: HashMap<String, Box<dyn EmbedBackend>>,
    usage: Mutex<BTreeMap<String, TokenUsage>>,
    cache: Mutex<HashMap<String, Vector>>,
    cache_dir: Option<PathBuf>,
    retry: RetryPolicy,
}

impl Gateway {
    pub fn new() -> Self {
        Gateway {
            chat_backends: HashMap::new(),
            embed_backends: HashMap::new(),
            usage: Mutex::new(BTreeMap::new()),
            cache: Mutex::new(HashMap::new()),
            cache_dir: None,
            retry: RetryPolicy::default(),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    /// On-disk embedding cache under the artifact directory.
    pub fn with_cache_dir(mut self, dir: PathBuf) -> Self {
        self.cache_dir = Some(dir);
        self
    }

    pub fn register_chat(&mut self, tag: &str, backend: Box<dyn ChatBackend>) {
        self.chat_backends.insert(tag.to_string(), backend);
    }

    pub fn register_embed(&mut self, tag: &str, backend: Box<dyn EmbedBackend>) {
        self.embed_backends.insert(tag.to_string(), backend);
    }

    pub fn embed_dim(&self, tag: &str) -> Result<usize> {
        self.embed_backends
            .get(tag)
            .map(|b| b.dim())
            .ok_or_else(|| Error::Provider(format!("no embed backend registered for {tag:?}")))
    }

    pub fn chat(&self, req: &ChatRequest) -> Result<ChatResponse> {
        req.validate()?;
        let backend = self
            .chat_backends
            .get(&req.model_tag)
            .ok_or_else(|| Error::Provider(format!("no chat backend registered for {:?}", req.model_tag)))?;

        let mut last_err = None;
        for attempt in 0..self.retry.attempts {
            if attempt > 0 {
                std::thread::sleep(self.retry.backoff_base * (1 << (attempt - 1)));
            }
            match backend.chat(req) {
                Ok(resp) => {
                    self.record_usage(&req.model_tag, resp.usage);
                    return Ok(resp);
                }
                Err(e) if e.is_transient() => last_err = Some(e),
                Err(e) => return Err(e),
            }
        }
        Err(last_err.unwrap())
    }

    /// One vector per input text; results cached by content hash so repeated
    /// texts are embedded once per model tag.
    pub fn embed(&self, req: &EmbedRequest) -> Result<Vec<Vector>> {
        req.validate()?;
        let backend = self
            .embed_backends
            .get(&req.model_tag)
            .ok_or_else(|| Error::Provider(format!("no embed backend registered for {:?}", req.model_tag)))?;

        let keys: Vec<String> = req
            .texts
            .iter()
            .map(|t| content_key(&req.model_tag, t))
            .collect();

        let mut results: Vec<Option<Vector>> = vec![None; req.texts.len()];
        let mut miss_idx = Vec::new();
        {
            let cache = self.cache.lock().unwrap();
            for (i, key) in keys.iter().enumerate() {
                if let Some(v) = cache.get(key) {
                    results[i] = Some(v.clone());
                } else {
                    miss_idx.push(i);
                }
            }
        }
        // Second chance from the on-disk cache.
        if let Some(dir) = &self.cache_dir {
            miss_idx.retain(|&i| {
                let path = dir.join(format!("{}.json", keys[i]));
                match std::fs::read(&path) {
                    Ok(bytes) => match serde_json::from_slice::<Vec<f64>>(&bytes) {
                        Ok(components) => {
                            let v = Vector(components);
                            self.cache.lock().unwrap().insert(keys[i].clone(), v.clone());
                            results[i] = Some(v);
                            false
                        }
                        Err(_) => true,
                    },
                    Err(_) => true,
                }
            });
        }

        if !miss_idx.is_empty() {
            let miss_texts: Vec<String> =
                miss_idx.iter().map(|&i| req.texts[i].clone()).collect();
            let vectors = self.embed_with_retry(backend.as_ref(), &miss_texts)?;
            if vectors.len() != miss_texts.len() {
                return Err(Error::Provider(format!(
                    "embed backend returned {} vectors for {} texts",
                    vectors.len(),
                    miss_texts.len()
                )));
            }
            let input_tokens: u64 = miss_texts
                .iter()
                .map(|t| t.split_whitespace().count() as u64)
                .sum();
            self.record_usage(
                &req.model_tag,
                TokenUsage {
                    input_tokens,
                    output_tokens: 0,
                },
            );
            let mut cache = self.cache.lock().unwrap();
            for (&i, v) in miss_idx.iter().zip(vectors) {
                if v.dim() != backend.dim() {
                    return Err(Error::DimMismatch {
                        expected: backend.dim(),
                        got: v.dim(),
                    });
                }
                if let Some(dir) = &self.cache_dir {
                    let _ = std::fs::create_dir_all(dir);
                    let path = dir.join(format!("{}.json", keys[i]));
                    let _ = std::fs::write(path, serde_json::to_vec(&v.0).unwrap());
                }
                cache.insert(keys[i].clone(), v.clone());
                results[i] = Some(v);
            }
        }

        Ok(results.into_iter().map(|v| v.unwrap()).collect())
    }

    fn embed_with_retry(
        &self,
        backend: &dyn EmbedBackend,
        texts: &[String],
    ) -> Result<Vec<Vector>> {
        let mut last_err = None;
        for attempt in 0..self.retry.attempts {
            if attempt > 0 {
                std::thread::sleep(self.retry.backoff_base * (1 << (attempt - 1)));
            }
            match backend.embed(texts) {
                Ok(v) => return Ok(v),
                Err(e) if e.is_transient() => last_err = Some(e),
                Err(e) => return Err(e),
            }
        }
        Err(last_err.unwrap())
    }

    fn record_usage(&self, tag: &str, usage: TokenUsage) {
        let mut ledger = self.usage.lock().unwrap();
        ledger.entry(tag.to_string()).or_default().add(usage);
    }

    /// Running totals since gateway construction.
    pub fn usage_report(&self) -> TokenUsage {
        let ledger = self.usage.lock().unwrap();
        let mut total = TokenUsage::default();
        for u in ledger.values() {
            total.add(*u);
        }
        total
    }

    /// Running totals partitioned by model tag.
    pub fn usage_by_model(&self) -> BTreeMap<String, TokenUsage> {
        self.usage.lock().unwrap().clone()
    }
}

impl Default for Gateway {
    fn default() -> Self {
        Gateway::new()
    }
}

fn content_key(model_tag: &str, text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(model_tag.as_bytes());
    hasher.update([0u8]);
    hasher.update(text.as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Strips code fences, locates the first balanced top-level JSON object in
/// `text`, and parses it. Providers routinely wrap JSON in prose.
pub fn extract_json(text: &str) -> Result<serde_json::Map<String, serde_json::Value>> {
    let stripped: String = text
        .lines()
        .filter(|line| !line.trim_start().starts_with("```"))
        .collect::<Vec<_>>()
        .join("\n");

    let bytes = stripped.as_bytes();
    let start = stripped.find('{').ok_or(Error::NoObjectFound)?;
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (offset, &b) in bytes[start..].iter().enumerate() {
        if in_string {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_string = false;
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    let candidate = &stripped[start..start + offset + 1];
                    return serde_json::from_str(candidate)
                        .map_err(|e| Error::MalformedObject(e.to_string()));
                }
            }
            _ => {}
        }
    }
    Err(Error::MalformedObject("unbalanced braces".to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicU32, Ordering};

    #[test]
    fn extract_json_strips_fences() {
        let obj = extract_json("```json\n{\"a\":1}\n```").unwrap();
        assert_eq!(obj.get("a").unwrap(), &serde_json::json!(1));
    }

    #[test]
    fn extract_json_balanced_scan() {
        let obj = extract_json("Here you go: {\"a\": {\"b\": 2}} thanks").unwrap();
        assert_eq!(obj.get("a").unwrap(), &serde_json::json!({"b": 2}));
    }

    #[test]
    fn extract_json_no_braces() {
        assert!(matches!(
            extract_json("no braces here").unwrap_err(),
            Error::NoObjectFound
        ));
    }

    #[test]
    fn extract_json_braces_inside_strings() {
        let obj = extract_json(r#"{"a": "closing } brace"}"#).unwrap();
        assert_eq!(obj.get("a").unwrap(), &serde_json::json!("closing } brace"));
    }

    #[test]
    fn temperature_range_enforced() {
        let gw = Gateway::new();
        let req = ChatRequest {
            messages: vec![(ChatRole::User, "hi".into())],
            temperature: 2.5,
            max_output_tokens: 16,
            model_tag: "mock".into(),
        };
        assert!(matches!(gw.chat(&req).unwrap_err(), Error::Validation(_)));
    }

    struct Flaky {
        calls: AtomicU32,
        fail_times: u32,
    }

    impl ChatBackend for Flaky {
        fn chat(&self, _req: &ChatRequest) -> Result<ChatResponse> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.fail_times {
                Err(Error::RateLimited("slow down".into()))
            } else {
                Ok(ChatResponse {
                    text: "ok".into(),
                    usage: TokenUsage {
                        input_tokens: 3,
                        output_tokens: 5,
                    },
                })
            }
        }
    }

    #[test]
    fn transient_failures_retried_up_to_three_attempts() {
        let mut gw = Gateway::new().with_retry(RetryPolicy {
            attempts: 3,
            backoff_base: Duration::from_millis(1),
        });
        gw.register_chat(
            "flaky",
            Box::new(Flaky {
                calls: AtomicU32::new(0),
                fail_times: 2,
            }),
        );
        let req = ChatRequest::user("flaky", "hi", 0.5);
        assert_eq!(gw.chat(&req).unwrap().text, "ok");

        let mut gw = Gateway::new().with_retry(RetryPolicy {
            attempts: 3,
            backoff_base: Duration::from_millis(1),
        });
        gw.register_chat(
            "flaky",
            Box::new(Flaky {
                calls: AtomicU32::new(0),
                fail_times: 5,
            }),
        );
        assert!(matches!(
            gw.chat(&req).unwrap_err(),
            Error::RateLimited(_)
        ));
    }

    #[test]
    fn usage_accumulates_by_model() {
        let mut gw = Gateway::new();
        gw.register_chat(
            "m",
            Box::new(Flaky {
                calls: AtomicU32::new(0),
                fail_times: 0,
            }),
        );
        assert_eq!(gw.usage_report(), TokenUsage::default());
        let req = ChatRequest::user("m", "hi", 0.5);
        gw.chat(&req).unwrap();
        gw.chat(&req).unwrap();
        let total = gw.usage_report();
        assert_eq!(total.input_tokens, 6);
        assert_eq!(total.output_tokens, 10);
        assert_eq!(gw.usage_by_model().get("m").unwrap().output_tokens, 10);
    }
}
