//! Per-agent vector store over childhood memories with cosine-similarity
//! retrieval. At ten memories per agent an exhaustive scan is exact and
//! cheap; no approximate index is involved.

use std::path::Path;

use crate::domain::{AgentRecord, ChatMessage, Vector};
use crate::error::{Error, Result};
use crate::gateway::{EmbedRequest, Gateway};

/// Immutable embedding index over one agent's memories.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryIndex {
    pub agent_id: String,
    pub entries: Vec<(usize, Vector)>,
    pub embed_dim: usize,
}

/// Ranked retrieval hits: (memory_ref, cosine score), scores non-increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalResult {
    pub ranked: Vec<(usize, f64)>,
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNorm("cosine operand".into()));
    }
    Ok(dot / (na.sqrt() * nb.sqrt()))
}

/// Embeds each memory once; the index is immutable thereafter.
pub fn index_memories(
    agent: &AgentRecord,
    gateway: &Gateway,
    embed_tag: &str,
) -> Result<MemoryIndex> {
    if agent.memories.is_empty() {
        return Err(Error::EmptyInput(format!(
            "agent {} has no memories to index",
            agent.agent_id
        )));
    }
    let texts: Vec<String> = agent.memories.iter().map(|m| m.content.clone()).collect();
    let vectors = gateway.embed(&EmbedRequest {
        texts,
        model_tag: embed_tag.to_string(),
    })?;
    let embed_dim = vectors[0].dim();
    Ok(MemoryIndex {
        agent_id: agent.agent_id.clone(),
        entries: vectors.into_iter().enumerate().collect(),
        embed_dim,
    })
}

/// Concatenates the last four (or fewer) chat messages, oldest first,
/// newline-separated, into a retrieval query.
pub fn build_query(history: &[ChatMessage]) -> Result<String> {
    if history.is_empty() {
        return Err(Error::EmptyInput("chat history is empty".into()));
    }
    let window = &history[history.len().saturating_sub(4)..];
    Ok(window
        .iter()
        .map(|m| m.text.as_str())
        .collect::<Vec<_>>()
        .join("\n"))
}

/// Top-k entries by cosine similarity; ties broken by ascending memory_ref.
pub fn retrieve(
    index: &MemoryIndex,
    query: &str,
    k: usize,
    gateway: &Gateway,
    embed_tag: &str,
) -> Result<RetrievalResult> {
    if index.entries.is_empty() {
        return Err(Error::EmptyInput(format!(
            "memory index for {} is empty",
            index.agent_id
        )));
    }
    if k == 0 {
        return Err(Error::Validation("retrieval k must be at least 1".into()));
    }
    let query_vec = gateway
        .embed(&EmbedRequest {
            texts: vec![query.to_string()],
            model_tag: embed_tag.to_string(),
        })?
        .remove(0);

    let mut scored: Vec<(usize, f64)> = index
        .entries
        .iter()
        .map(|(memory_ref, v)| Ok((*memory_ref, cosine(query_vec.as_slice(), v.as_slice())?)))
        .collect::<Result<_>>()?;
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    scored.truncate(k);
    Ok(RetrievalResult { ranked: scored })
}

const SIDECAR_MAGIC: &[u8; 4] = b"MIDX";

impl MemoryIndex {
    /// Binary sidecar persistence keyed by agent_id; regeneration from the
    /// agents file must reproduce identical vectors, so this is an optional
    /// cache only.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        buf.extend_from_slice(SIDECAR_MAGIC);
        buf.extend_from_slice(&(self.agent_id.len() as u32).to_le_bytes());
        buf.extend_from_slice(self.agent_id.as_bytes());
        buf.extend_from_slice(&(self.embed_dim as u32).to_le_bytes());
        buf.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for (memory_ref, v) in &self.entries {
            buf.extend_from_slice(&(*memory_ref as u32).to_le_bytes());
            for c in v.as_slice() {
                buf.extend_from_slice(&c.to_le_bytes());
            }
        }
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        let mut pos = 0usize;
        let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
            let slice = bytes
                .get(*pos..*pos + n)
                .ok_or_else(|| Error::Validation("truncated index sidecar".into()))?;
            *pos += n;
            Ok(slice)
        };
        if take(&mut pos, 4)? != SIDECAR_MAGIC {
            return Err(Error::Validation("bad index sidecar magic".into()));
        }
        let id_len = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
        let agent_id = String::from_utf8(take(&mut pos, id_len)?.to_vec())
            .map_err(|e| Error::Validation(e.to_string()))?;
        let embed_dim = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
        let count = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
        let mut entries = Vec::with_capacity(count);
        for _ in 0..count {
            let memory_ref = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
            let mut comps = Vec::with_capacity(embed_dim);
            for _ in 0..embed_dim {
                comps.push(f64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap()));
            }
            entries.push((memory_ref, Vector::new(comps)?));
        }
        Ok(MemoryIndex {
            agent_id,
            entries,
            embed_dim,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{ChatMessage, Role};
    use crate::gateway::mock::MockEmbedBackend;

    fn toy_index(vectors: Vec<Vec<f64>>) -> MemoryIndex {
        let embed_dim = vectors[0].len();
        MemoryIndex {
            agent_id: "toy".into(),
            entries: vectors
                .into_iter()
                .enumerate()
                .map(|(i, v)| (i, Vector::new(v).unwrap()))
                .collect(),
            embed_dim,
        }
    }

    struct FixedEmbed {
        vector: Vec<f64>,
    }

    impl crate::gateway::EmbedBackend for FixedEmbed {
        fn embed(&self, texts: &[String]) -> Result<Vec<Vector>> {
            Ok(texts
                .iter()
                .map(|_| Vector::new(self.vector.clone()).unwrap())
                .collect())
        }

        fn dim(&self) -> usize {
            self.vector.len()
        }
    }

    fn gateway_with_fixed(vector: Vec<f64>) -> Gateway {
        let mut gw = Gateway::new();
        gw.register_embed("fixed", Box::new(FixedEmbed { vector }));
        gw
    }

    #[test]
    fn cosine_identity_and_scaling_invariance() {
        let v = vec![0.3, -1.2, 4.0];
        assert!((cosine(&v, &v).unwrap() - 1.0).abs() < 1e-12);
        let scaled: Vec<f64> = v.iter().map(|x| x * 7.5).collect();
        let w = vec![1.0, 0.5, -2.0];
        assert!((cosine(&v, &w).unwrap() - cosine(&scaled, &w).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn cosine_zero_norm_is_an_error() {
        assert!(matches!(
            cosine(&[0.0, 0.0], &[1.0, 0.0]).unwrap_err(),
            Error::ZeroNorm(_)
        ));
    }

    #[test]
    fn build_query_windows_last_four() {
        let history: Vec<ChatMessage> = ["a", "b", "c", "d", "e", "f"]
            .iter()
            .enumerate()
            .map(|(i, t)| ChatMessage {
                role: if i % 2 == 0 {
                    Role::Interviewer
                } else {
                    Role::Interviewee
                },
                text: t.to_string(),
                turn_index: i as u32,
            })
            .collect();
        assert_eq!(build_query(&history).unwrap(), "c\nd\ne\nf");
        assert_eq!(build_query(&history[..1]).unwrap(), "a");
        assert_eq!(build_query(&history[..4]).unwrap(), "a\nb\nc\nd");
        assert!(build_query(&[]).is_err());
    }

    #[test]
    fn retrieve_hand_computed_cosine() {
        let index = toy_index(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let gw = gateway_with_fixed(vec![1.0, 0.0]);
        let result = retrieve(&index, "q", 1, &gw, "fixed").unwrap();
        assert_eq!(result.ranked.len(), 1);
        assert_eq!(result.ranked[0].0, 0);
        assert!((result.ranked[0].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ties_break_by_ascending_memory_ref() {
        let index = toy_index(vec![vec![1.0, 1.0], vec![1.0, 1.0]]);
        let gw = gateway_with_fixed(vec![2.0, 2.0]);
        let result = retrieve(&index, "q", 1, &gw, "fixed").unwrap();
        assert_eq!(result.ranked[0].0, 0);
    }

    #[test]
    fn k_at_least_set_size_returns_all_sorted() {
        let index = toy_index(vec![vec![1.0, 0.0], vec![0.5, 0.5], vec![0.0, 1.0]]);
        let gw = gateway_with_fixed(vec![1.0, 0.0]);
        let result = retrieve(&index, "q", 3, &gw, "fixed").unwrap();
        assert_eq!(result.ranked.len(), 3);
        for pair in result.ranked.windows(2) {
            assert!(pair[0].1 >= pair[1].1);
        }
    }

    #[test]
    fn topk_matches_exhaustive_sort_on_mock_embeddings() {
        let mut gw = Gateway::new();
        gw.register_embed("m", Box::new(MockEmbedBackend::new(64)));
        let texts: Vec<String> = (0..10)
            .map(|i| format!("memory number {i} about family and school"))
            .collect();
        let vectors = gw
            .embed(&EmbedRequest {
                texts,
                model_tag: "m".into(),
            })
            .unwrap();
        let index = MemoryIndex {
            agent_id: "a".into(),
            entries: vectors.into_iter().enumerate().collect(),
            embed_dim: 64,
        };
        for k in [1, 3, 10] {
            let got = retrieve(&index, "family school evening", k, &gw, "m").unwrap();
            let query = gw
                .embed(&EmbedRequest {
                    texts: vec!["family school evening".into()],
                    model_tag: "m".into(),
                })
                .unwrap()
                .remove(0);
            let mut oracle: Vec<(usize, f64)> = index
                .entries
                .iter()
                .map(|(r, v)| (*r, cosine(query.as_slice(), v.as_slice()).unwrap()))
                .collect();
            oracle.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
            oracle.truncate(k);
            assert_eq!(got.ranked, oracle);
        }
    }

    #[test]
    fn sidecar_round_trip() {
        let index = toy_index(vec![vec![1.0, 2.0], vec![-0.5, 0.25]]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("toy.midx");
        index.save(&path).unwrap();
        let back = MemoryIndex::load(&path).unwrap();
        assert_eq!(back, index);
    }
}
