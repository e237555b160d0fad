//! Simulated interview orchestration: a scripted interviewer asks the 19
//! protocol questions in order; the interviewee agent refreshes working
//! memory through retrieval each turn and answers via the chat prompt.

use std::path::Path;

use crate::domain::{
    AgentRecord, AttachmentStyle, ChatMessage, InterviewTranscript, Role, Source,
};
use crate::error::{Error, Result};
use crate::gateway::{ChatRequest, ChatRole, Gateway};
use crate::prompts;
use crate::retrieval::{self, MemoryIndex};

/// Ordered interviewer questions; the default is the embedded 19-question
/// protocol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterviewProtocol {
    pub questions: Vec<String>,
}

impl InterviewProtocol {
    pub fn default_aai() -> Self {
        InterviewProtocol {
            questions: prompts::AAI_QUESTIONS_RAW
                .lines()
                .filter(|l| !l.trim().is_empty())
                .map(String::from)
                .collect(),
        }
    }

    /// Plain text protocol file, one question per line.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let questions: Vec<String> = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(String::from)
            .collect();
        if questions.is_empty() {
            return Err(Error::Validation(format!(
                "protocol file {} has no questions",
                path.display()
            )));
        }
        Ok(InterviewProtocol { questions })
    }

    pub fn len(&self) -> usize {
        self.questions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.questions.is_empty()
    }
}

/// The retrieved memories injected into the current turn's prompt; replaced
/// wholesale each turn.
#[derive(Debug, Clone, Default)]
pub struct WorkingMemory {
    pub memories: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StyleDescription {
    pub style: AttachmentStyle,
    pub text: &'static str,
}

pub fn attachment_style_description(style: AttachmentStyle) -> StyleDescription {
    StyleDescription {
        style,
        text: prompts::attachment_style_description(style),
    }
}

#[derive(Debug, Clone)]
pub struct InterviewConfig {
    pub chat_model_tag: String,
    pub memory_embed_tag: String,
    pub dialogue_temperature: f64,
    pub max_answer_tokens: u32,
    pub retrieval_k: usize,
}

impl InterviewConfig {
    pub fn new(chat_model_tag: &str, memory_embed_tag: &str) -> Self {
        InterviewConfig {
            chat_model_tag: chat_model_tag.to_string(),
            memory_embed_tag: memory_embed_tag.to_string(),
            dialogue_temperature: 0.5,
            max_answer_tokens: 512,
            retrieval_k: 3,
        }
    }
}

/// Fills every chat-prompt placeholder: style description, the ten profile
/// fields, working-memory contents, and the last four chat messages.
pub fn render_chat_prompt(
    agent: &AgentRecord,
    wm: &WorkingMemory,
    history: &[ChatMessage],
) -> Result<String> {
    match history.last() {
        Some(last) if last.role == Role::Interviewer => {}
        _ => {
            return Err(Error::Validation(
                "chat prompt requires an interviewer question as the last message".into(),
            ))
        }
    }

    let life_memories = if wm.memories.is_empty() {
        "- (none)".to_string()
    } else {
        wm.memories
            .iter()
            .map(|(content, _)| format!("- {content}"))
            .collect::<Vec<_>>()
            .join("\n")
    };

    let window = &history[history.len().saturating_sub(4)..];
    let chat_history = window
        .iter()
        .map(|m| match m.role {
            Role::Interviewer => format!("Interviewer: {}", m.text),
            Role::Interviewee => format!("Interviewee: {}", m.text),
        })
        .collect::<Vec<_>>()
        .join("\n");

    let p = &agent.profile;
    let age = p.age.to_string();
    let dob = p.dob.format("%Y-%m-%d").to_string();
    prompts::render(
        prompts::CHAT_PROMPT,
        &[
            (
                "attachment_style_description",
                prompts::attachment_style_description(agent.style),
            ),
            ("name", &p.name),
            ("age", &age),
            ("dob", &dob),
            ("current_job", &p.current_job),
            ("birthplace", &p.birthplace),
            ("children", &p.children),
            ("siblings", &p.siblings),
            ("places_lived", &p.places_lived),
            ("fathers_jobs", &p.fathers_jobs),
            ("mothers_jobs", &p.mothers_jobs),
            ("life_memories", &life_memories),
            ("chat_history", &chat_history),
        ],
    )
}

/// One interviewee turn: retrieve memories from the recent context, render
/// the prompt, and call the chat model at the dialogue temperature.
pub fn answer_turn(
    agent: &AgentRecord,
    index: &MemoryIndex,
    history: &[ChatMessage],
    gateway: &Gateway,
    config: &InterviewConfig,
) -> Result<ChatMessage> {
    let last = history.last().ok_or_else(|| {
        Error::Validation("cannot answer with an empty chat history".into())
    })?;
    if last.role != Role::Interviewer {
        return Err(Error::Validation(
            "last history message must be an interviewer turn".into(),
        ));
    }

    let query = retrieval::build_query(history)?;
    let hits = retrieval::retrieve(
        index,
        &query,
        config.retrieval_k,
        gateway,
        &config.memory_embed_tag,
    )?;
    let wm = WorkingMemory {
        memories: hits
            .ranked
            .iter()
            .map(|&(memory_ref, score)| (agent.memories[memory_ref].content.clone(), score))
            .collect(),
    };

    let prompt = render_chat_prompt(agent, &wm, history)?;
    let req = ChatRequest {
        messages: vec![(ChatRole::User, prompt)],
        temperature: config.dialogue_temperature,
        max_output_tokens: config.max_answer_tokens,
        model_tag: config.chat_model_tag.clone(),
    };
    let resp = gateway.chat(&req)?;
    Ok(ChatMessage {
        role: Role::Interviewee,
        text: resp.text,
        turn_index: last.turn_index + 1,
    })
}

/// Runs the whole interview: one question/answer pair per protocol entry,
/// in order. A mid-interview failure surfaces the completed turns.
pub fn run_interview(
    agent: &AgentRecord,
    index: &MemoryIndex,
    protocol: &InterviewProtocol,
    gateway: &Gateway,
    config: &InterviewConfig,
    interview_id: &str,
) -> Result<InterviewTranscript> {
    if protocol.is_empty() {
        return Err(Error::Validation("interview protocol is empty".into()));
    }
    let mut turns: Vec<ChatMessage> = Vec::with_capacity(protocol.len() * 2);
    for (qi, question) in protocol.questions.iter().enumerate() {
        turns.push(ChatMessage {
            role: Role::Interviewer,
            text: question.clone(),
            turn_index: (qi * 2) as u32,
        });
        let answer = answer_turn(agent, index, &turns, gateway, config).map_err(|e| {
            let turn_err = Error::InterviewTurn {
                turn: qi,
                source: Box::new(e),
            };
            Error::PartialTranscript {
                completed: turns[..turns.len() - 1].to_vec(),
                source: Box::new(turn_err),
            }
        })?;
        turns.push(answer);
    }
    let transcript = InterviewTranscript {
        interview_id: interview_id.to_string(),
        source: Source::Synthetic(config.chat_model_tag.clone()),
        label: Some(agent.style),
        turns,
    };
    transcript.validate()?;
    Ok(transcript)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::MEMORY_TS_FORMAT;
    use crate::gateway::mock::{MockChatBackend, MockEmbedBackend};
    use crate::persona;
    use chrono::NaiveDateTime;

    fn reference() -> NaiveDateTime {
        NaiveDateTime::parse_from_str("2024-01-01 00:00:00", MEMORY_TS_FORMAT).unwrap()
    }

    fn mock_setup(seed: u64) -> (Gateway, AgentRecord, MemoryIndex, InterviewConfig) {
        let mut gw = Gateway::new();
        gw.register_chat("mock", Box::new(MockChatBackend::new(seed, "mock")));
        gw.register_embed("mock-mem", Box::new(MockEmbedBackend::new(384)));
        let profile = persona::generate_profile(&gw, "mock", 0.7, "t").unwrap();
        let memories =
            persona::generate_memories(&gw, "mock", &profile, reference(), 0.7, "t").unwrap();
        let agent = AgentRecord {
            agent_id: "agent-000".into(),
            profile,
            style: AttachmentStyle::Avoidant,
            memories,
            model_tag: "mock".into(),
        };
        let index = retrieval::index_memories(&agent, &gw, "mock-mem").unwrap();
        let config = InterviewConfig::new("mock", "mock-mem");
        (gw, agent, index, config)
    }

    #[test]
    fn default_protocol_has_19_questions() {
        let protocol = InterviewProtocol::default_aai();
        assert_eq!(protocol.len(), 19);
        assert!(protocol.questions[0].starts_with("Could you start by helping me get oriented"));
    }

    #[test]
    fn prompt_contains_profile_and_question() {
        let (_gw, agent, _index, _config) = mock_setup(3);
        let history = vec![ChatMessage {
            role: Role::Interviewer,
            text: "Where were you born?".into(),
            turn_index: 0,
        }];
        let wm = WorkingMemory {
            memories: vec![
                ("memory one".into(), 0.9),
                ("memory two".into(), 0.8),
                ("memory three".into(), 0.7),
            ],
        };
        let prompt = render_chat_prompt(&agent, &wm, &history).unwrap();
        assert!(prompt.contains(&agent.profile.name));
        assert!(prompt.contains("Where were you born?"));
        for m in ["memory one", "memory two", "memory three"] {
            assert!(prompt.contains(m));
        }
        let memories_section = prompt.split("#MEMORIES#").nth(1).unwrap();
        assert!(memories_section.contains("memory one"));
    }

    #[test]
    fn chat_history_window_is_last_four() {
        let (_gw, agent, _index, _config) = mock_setup(3);
        // Seven messages ending on an interviewer question; the window
        // keeps the last four (3..=6).
        let history: Vec<ChatMessage> = (0..7)
            .map(|i| ChatMessage {
                role: if i % 2 == 0 {
                    Role::Interviewer
                } else {
                    Role::Interviewee
                },
                text: format!("message-{i}"),
                turn_index: i as u32,
            })
            .collect();
        let prompt =
            render_chat_prompt(&agent, &WorkingMemory::default(), &history).unwrap();
        let section = prompt.split("#CHAT HISTORY").nth(1).unwrap();
        for i in 0..3 {
            assert!(!section.contains(&format!("message-{i}")));
        }
        for i in 3..7 {
            assert!(section.contains(&format!("message-{i}")));
        }
    }

    #[test]
    fn answer_turn_is_deterministic_and_requires_question() {
        let (gw, agent, index, config) = mock_setup(5);
        let history = vec![ChatMessage {
            role: Role::Interviewer,
            text: "Tell me about your father.".into(),
            turn_index: 0,
        }];
        let a = answer_turn(&agent, &index, &history, &gw, &config).unwrap();
        let b = answer_turn(&agent, &index, &history, &gw, &config).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.role, Role::Interviewee);
        assert_eq!(a.turn_index, 1);
        assert!(answer_turn(&agent, &index, &[], &gw, &config).is_err());
    }

    #[test]
    fn father_question_retrieves_father_memory() {
        let (gw, mut agent, _index, config) = mock_setup(5);
        // Toy memory set where exactly one memory concerns the father.
        for (i, m) in agent.memories.iter_mut().enumerate() {
            m.content = format!("a day at the lake with my cousins number {i}");
        }
        agent.memories[4].content =
            "My father shouted at me about homework in the kitchen".into();
        let index = retrieval::index_memories(&agent, &gw, "mock-mem").unwrap();
        let history = vec![ChatMessage {
            role: Role::Interviewer,
            text: "Can you describe your relationship with your father and his homework rules?"
                .into(),
            turn_index: 0,
        }];
        let query = retrieval::build_query(&history).unwrap();
        let hits = retrieval::retrieve(&index, &query, 3, &gw, &config.memory_embed_tag).unwrap();
        assert!(hits.ranked.iter().any(|&(r, _)| r == 4));
    }

    #[test]
    fn full_interview_has_19_pairs_and_alternates() {
        let (gw, agent, index, config) = mock_setup(7);
        let protocol = InterviewProtocol::default_aai();
        let t = run_interview(&agent, &index, &protocol, &gw, &config, "i-0").unwrap();
        assert_eq!(t.pair_count(), 19);
        t.validate().unwrap();
        // Interviewer turns reproduce protocol questions verbatim, in order.
        for (qi, q) in protocol.questions.iter().enumerate() {
            assert_eq!(&t.turns[qi * 2].text, q);
        }
        // Answers never leak the style description.
        let description = prompts::attachment_style_description(agent.style);
        for a in t.answers() {
            assert!(!a.text.contains(description));
        }
    }

    #[test]
    fn one_question_protocol_yields_one_pair() {
        let (gw, agent, index, config) = mock_setup(9);
        let protocol = InterviewProtocol {
            questions: vec!["How are you?".into()],
        };
        let t = run_interview(&agent, &index, &protocol, &gw, &config, "i-1").unwrap();
        assert_eq!(t.pair_count(), 1);
    }
}
