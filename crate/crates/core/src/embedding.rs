//! Turns transcripts into interview-level embedding vectors: per-answer
//! embeddings averaged element-wise, with the transcriber-marker cleaning
//! rules applied to human-sourced answers only.

use std::collections::BTreeMap;
use std::path::Path;

use crate::domain::{
    AttachmentStyle, EmbeddingDataset, EmbeddingDomain, InterviewEmbedding, InterviewTranscript,
    Source, Vector,
};
use crate::error::{Error, Result};
use crate::gateway::{EmbedRequest, Gateway};

/// Removes transcriber markers ("..." and "--"), collapses whitespace, and
/// drops answers shorter than ten words. Marker removal loops to a fixed
/// point so the operation is idempotent even when removals abut.
pub fn clean_human_answer(text: &str) -> Option<String> {
    let mut s = text.to_string();
    loop {
        let next = s.replace("...", "").replace("--", "");
        if next == s {
            break;
        }
        s = next;
    }
    let words: Vec<&str> = s.split_whitespace().collect();
    if words.len() < 10 {
        None
    } else {
        Some(words.join(" "))
    }
}

/// Embeds each surviving interviewee answer and returns the component-wise
/// mean. Interviewer questions are never embedded; cleaning applies only to
/// human transcripts.
pub fn embed_interview(
    transcript: &InterviewTranscript,
    gateway: &Gateway,
    embed_tag: &str,
) -> Result<InterviewEmbedding> {
    transcript.validate()?;
    let is_human = transcript.source == Source::Human;
    let answers: Vec<String> = transcript
        .answers()
        .filter_map(|m| {
            if is_human {
                clean_human_answer(&m.text)
            } else {
                Some(m.text.clone())
            }
        })
        .collect();
    if answers.is_empty() {
        return Err(Error::EmptyInput(format!(
            "interview {}: no usable answers after cleaning",
            transcript.interview_id
        )));
    }

    let vectors = gateway.embed(&EmbedRequest {
        texts: answers,
        model_tag: embed_tag.to_string(),
    })?;
    let dim = vectors[0].dim();
    let mut mean = vec![0.0f64; dim];
    for v in &vectors {
        for (m, c) in mean.iter_mut().zip(v.as_slice()) {
            *m += c;
        }
    }
    let n = vectors.len() as f64;
    for m in mean.iter_mut() {
        *m /= n;
    }

    let domain = match &transcript.source {
        Source::Synthetic(tag) => EmbeddingDomain::Synthetic(tag.clone()),
        Source::Human => {
            if transcript.label.is_some() {
                EmbeddingDomain::HumanLabeled
            } else {
                EmbeddingDomain::HumanUnlabeled
            }
        }
    };
    Ok(InterviewEmbedding {
        interview_id: transcript.interview_id.clone(),
        vector: Vector::new(mean)?,
        domain,
        label: transcript.label,
    })
}

/// Embeds a whole transcript set into one dataset.
pub fn embed_transcripts(
    transcripts: &[InterviewTranscript],
    gateway: &Gateway,
    embed_tag: &str,
) -> Result<EmbeddingDataset> {
    let dim = gateway.embed_dim(embed_tag)?;
    let entries: Vec<InterviewEmbedding> = transcripts
        .iter()
        .map(|t| embed_interview(t, gateway, embed_tag))
        .collect::<Result<_>>()?;
    EmbeddingDataset::new(entries, dim)
}

/// Reads human transcripts from a directory of per-interview JSON files,
/// applies cleaning, embeds, and attaches labels where the mapping provides
/// them. Returns one dataset containing both labeled and unlabeled entries.
pub fn ingest_human_transcripts(
    dir: &Path,
    labels: Option<&BTreeMap<String, AttachmentStyle>>,
    gateway: &Gateway,
    embed_tag: &str,
) -> Result<EmbeddingDataset> {
    let dim = gateway.embed_dim(embed_tag)?;
    if !dir.exists() {
        return Err(Error::MissingArtifact(
            dir.display().to_string(),
            "ingest".into(),
        ));
    }
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        eprintln!("warning: no human transcripts found in {}", dir.display());
        return EmbeddingDataset::new(Vec::new(), dim);
    }

    let mut transcripts = Vec::new();
    for path in &paths {
        let bytes = std::fs::read(path)?;
        let mut t: InterviewTranscript =
            serde_json::from_slice(&bytes).map_err(|e| Error::Schema {
                file: path.display().to_string(),
                line: e.line(),
                detail: e.to_string(),
            })?;
        if t.source != Source::Human {
            return Err(Error::Schema {
                file: path.display().to_string(),
                line: 1,
                detail: format!("expected source \"human\", got {}", t.source),
            });
        }
        t.validate().map_err(|e| Error::Schema {
            file: path.display().to_string(),
            line: 1,
            detail: e.to_string(),
        })?;
        if let Some(map) = labels {
            if let Some(style) = map.get(&t.interview_id) {
                t.label = Some(*style);
            }
        }
        transcripts.push(t);
    }

    if let Some(map) = labels {
        let known: std::collections::BTreeSet<&String> =
            transcripts.iter().map(|t| &t.interview_id).collect();
        for id in map.keys() {
            if !known.contains(id) {
                return Err(Error::Validation(format!(
                    "label provided for unknown interview_id {id:?}"
                )));
            }
        }
    }

    let entries: Vec<InterviewEmbedding> = transcripts
        .iter()
        .map(|t| embed_interview(t, gateway, embed_tag))
        .collect::<Result<_>>()?;
    EmbeddingDataset::new(entries, dim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{ChatMessage, Role};
    use crate::gateway::mock::MockEmbedBackend;
    use crate::gateway::EmbedBackend;

    #[test]
    fn cleaning_documented_examples() {
        assert_eq!(clean_human_answer("I think... it was -- hard, yes"), None);
        let ten = "one two three four five six seven eight nine ten";
        assert_eq!(clean_human_answer(ten).as_deref(), Some(ten));
        assert_eq!(
            clean_human_answer("a... b -- c d e f g h i j k").as_deref(),
            Some("a b c d e f g h i j k")
        );
    }

    #[test]
    fn cleaning_is_idempotent_on_adjacent_markers() {
        // "-...-" collapses to "--" after one removal pass; the fixed-point
        // loop must keep going.
        let tricky = "w1 w2 w3 w4 w5 w6 w7 w8 w9 w10 -...-x";
        let once = clean_human_answer(tricky).unwrap();
        let twice = clean_human_answer(&once).unwrap();
        assert_eq!(once, twice);
        assert!(!once.contains("--"));
    }

    struct EchoEmbed;

    // Embeds "a,b" as the literal vector (a, b); lets tests pick geometry.
    impl EmbedBackend for EchoEmbed {
        fn embed(&self, texts: &[String]) -> Result<Vec<Vector>> {
            texts
                .iter()
                .map(|t| {
                    let comps: Vec<f64> = t
                        .split(',')
                        .map(|p| p.trim().parse::<f64>().unwrap())
                        .collect();
                    Vector::new(comps)
                })
                .collect()
        }

        fn dim(&self) -> usize {
            2
        }
    }

    fn echo_gateway() -> Gateway {
        let mut gw = Gateway::new();
        gw.register_embed("echo", Box::new(EchoEmbed));
        gw
    }

    fn transcript(answers: &[&str], source: Source, label: Option<AttachmentStyle>) -> InterviewTranscript {
        let mut turns = Vec::new();
        for (i, a) in answers.iter().enumerate() {
            turns.push(ChatMessage {
                role: Role::Interviewer,
                text: format!("question {i}"),
                turn_index: (2 * i) as u32,
            });
            turns.push(ChatMessage {
                role: Role::Interviewee,
                text: a.to_string(),
                turn_index: (2 * i + 1) as u32,
            });
        }
        InterviewTranscript {
            interview_id: "t0".into(),
            source,
            label,
            turns,
        }
    }

    #[test]
    fn interview_vector_is_mean_of_answers() {
        let gw = echo_gateway();
        let t = transcript(&["1,3", "3,5"], Source::Synthetic("m".into()), None);
        let e = embed_interview(&t, &gw, "echo").unwrap();
        assert_eq!(e.vector.as_slice(), &[2.0, 4.0]);

        let single = transcript(&["1,3"], Source::Synthetic("m".into()), None);
        let e1 = embed_interview(&single, &gw, "echo").unwrap();
        assert_eq!(e1.vector.as_slice(), &[1.0, 3.0]);
    }

    #[test]
    fn mean_is_permutation_invariant_and_bounded() {
        let gw = echo_gateway();
        let a = transcript(&["1,8", "5,2", "3,5"], Source::Synthetic("m".into()), None);
        let b = transcript(&["3,5", "1,8", "5,2"], Source::Synthetic("m".into()), None);
        let ea = embed_interview(&a, &gw, "echo").unwrap();
        let eb = embed_interview(&b, &gw, "echo").unwrap();
        assert_eq!(ea.vector, eb.vector);
        assert!(ea.vector.as_slice()[0] >= 1.0 && ea.vector.as_slice()[0] <= 5.0);
        assert!(ea.vector.as_slice()[1] >= 2.0 && ea.vector.as_slice()[1] <= 8.0);
    }

    #[test]
    fn human_transcript_with_all_short_answers_errors() {
        let gw = echo_gateway();
        let t = transcript(&["too short"], Source::Human, None);
        assert!(matches!(
            embed_interview(&t, &gw, "echo").unwrap_err(),
            Error::EmptyInput(_)
        ));
    }

    #[test]
    fn ingest_fixture_with_mixed_labels() {
        let dir = tempfile::tempdir().unwrap();
        let mut labels = BTreeMap::new();
        // 9 labeled (4 avoidant / 3 preoccupied / 2 secure) + 17 unlabeled.
        let styles = [
            (AttachmentStyle::Avoidant, 4),
            (AttachmentStyle::Preoccupied, 3),
            (AttachmentStyle::Secure, 2),
        ];
        let mut count = 0;
        for (style, n) in styles {
            for _ in 0..n {
                labels.insert(format!("h-{count:02}"), style);
                count += 1;
            }
        }
        for i in 0..26 {
            let mut t = transcript(
                &["this answer easily has more than ten words in total today"],
                Source::Human,
                None,
            );
            t.interview_id = format!("h-{i:02}");
            std::fs::write(
                dir.path().join(format!("h-{i:02}.json")),
                serde_json::to_vec(&t).unwrap(),
            )
            .unwrap();
        }
        let mut gw = Gateway::new();
        gw.register_embed("m", Box::new(MockEmbedBackend::new(32)));
        let ds = ingest_human_transcripts(dir.path(), Some(&labels), &gw, "m").unwrap();
        assert_eq!(ds.len(), 26);
        let labeled: Vec<_> = ds
            .entries
            .iter()
            .filter(|e| e.domain == EmbeddingDomain::HumanLabeled)
            .collect();
        assert_eq!(labeled.len(), 9);
        assert_eq!(ds.by_label(AttachmentStyle::Avoidant).len(), 4);
        assert_eq!(ds.by_label(AttachmentStyle::Preoccupied).len(), 3);
        assert_eq!(ds.by_label(AttachmentStyle::Secure).len(), 2);

        // Label for an unknown interview id is rejected.
        labels.insert("nope".into(), AttachmentStyle::Secure);
        assert!(ingest_human_transcripts(dir.path(), Some(&labels), &gw, "m").is_err());
    }

    #[test]
    fn ingest_empty_directory_warns_and_returns_empty() {
        let dir = tempfile::tempdir().unwrap();
        let mut gw = Gateway::new();
        gw.register_embed("m", Box::new(MockEmbedBackend::new(32)));
        let ds = ingest_human_transcripts(dir.path(), None, &gw, "m").unwrap();
        assert!(ds.is_empty());
    }
}
