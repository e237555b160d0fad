//! Deterministic offline providers. With a fixed seed the mock chat backend
//! is a pure function of (seed, request); the mock embedder is a pure
//! function of the text. Interview answers lexically encode the agent's
//! attachment style through distinct word pools so downstream classifiers
//! have separable-but-noisy signal to work with.

use std::collections::HashMap;
use std::sync::Mutex;

use chrono::NaiveDateTime;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::domain::{Vector, MEMORY_TS_FORMAT};
use crate::error::Result;
use crate::gateway::{ChatBackend, ChatRequest, ChatResponse, EmbedBackend, TokenUsage};

fn seeded_rng(parts: &[&[u8]]) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    for p in parts {
        hasher.update(p);
        hasher.update([0xfe]);
    }
    let digest = hasher.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(seed)
}

const FIRST_NAMES: [&str; 20] = [
    "Leonard", "Martha", "Diego", "Yuki", "Amara", "Tobias", "Ingrid", "Rashid", "Celia",
    "Marcus", "Petra", "Samuel", "Noor", "Elena", "Viktor", "Tessa", "Omar", "Greta", "Felix",
    "Rosa",
];
const LAST_NAMES: [&str; 20] = [
    "Fitzgerald", "Okafor", "Lindqvist", "Moreau", "Tanaka", "Alvarez", "Kowalski", "Haddad",
    "Bergstrom", "Quinn", "Demir", "Castellano", "Novak", "Armstrong", "Iversen", "Mbeki",
    "Sorensen", "Vargas", "Oyelaran", "Petrov",
];
const RACES: [&str; 6] = [
    "Caucasian", "Black", "Hispanic", "East Asian", "South Asian", "Middle Eastern",
];
const GENDERS: [&str; 4] = ["male", "female", "gay", "non-binary"];
const JOBS: [&str; 14] = [
    "Architect", "Nurse", "Electrician", "Schoolteacher", "Accountant", "Chef", "Librarian",
    "Carpenter", "Pharmacist", "Bus driver", "Tailor", "Journalist", "Farmer", "Mechanic",
];
const FATHER_ADJ: [&str; 9] = [
    "Strict", "Impatient", "Hardworking", "Cold", "Stubborn", "Absent", "Demanding", "Gruff",
    "Unpredictable",
];
const MOTHER_ADJ: [&str; 9] = [
    "Overprotective", "Tired", "Devoted", "Critical", "Gentle", "Moody", "Resourceful",
    "Fragile", "Stern",
];

// Interview-answer word pools. Deliberately disjoint from the three
// style-description texts so answers never echo them.
const AVOIDANT_WORDS: [&str; 14] = [
    "practical", "busy", "privately", "alone", "factual", "brief", "logical", "routine",
    "orderly", "unbothered", "composed", "separate", "detached", "self-contained",
];
const SECURE_WORDS: [&str; 14] = [
    "warm", "supported", "loved", "open", "steady", "grateful", "honest", "caring",
    "appreciated", "encouraged", "comforted", "nurturing", "reliable", "cherished",
];
const PREOCCUPIED_WORDS: [&str; 14] = [
    "worried", "anxious", "longing", "clingy", "overwhelmed", "restless", "tearful",
    "yearning", "panicky", "craving", "frantic", "desperate", "uneasy", "fretting",
];
const FILLER_WORDS: [&str; 20] = [
    "indeed", "certainly", "honestly", "frankly", "naturally", "obviously", "truly",
    "actually", "perhaps", "somewhat", "rather", "quite", "basically", "essentially",
    "generally", "typically", "mostly", "fairly", "pretty", "really",
];
const GENERIC_WORDS: [&str; 24] = [
    "childhood", "house", "kitchen", "school", "evening", "summer", "winter", "garden",
    "street", "dinner", "morning", "weekend", "holiday", "neighbors", "room", "yard",
    "town", "river", "family", "years", "times", "days", "moments", "home",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PromptKind {
    Profile,
    Memories,
    Interview,
    Other,
}

fn classify(prompt: &str) -> PromptKind {
    if prompt.contains("familial information for a fictional individual") {
        PromptKind::Profile
    } else if prompt.contains("#CHILDHOOD MEMORIES#") {
        PromptKind::Memories
    } else if prompt.contains("impersonating a human") {
        PromptKind::Interview
    } else {
        PromptKind::Other
    }
}

pub struct MockChatBackend {
    seed: u64,
    model_tag: String,
}

impl MockChatBackend {
    pub fn new(seed: u64, model_tag: &str) -> Self {
        MockChatBackend {
            seed,
            model_tag: model_tag.to_string(),
        }
    }

    fn profile_json(&self, rng: &mut ChaCha8Rng) -> String {
        let first = FIRST_NAMES.choose(rng).unwrap();
        let last = LAST_NAMES.choose(rng).unwrap();
        let age: u32 = rng.gen_range(23..=78);
        let year: i32 = rng.gen_range(1950..=1999);
        let month: u32 = rng.gen_range(1..=12);
        let day: u32 = rng.gen_range(1..=28);
        let place = |rng: &mut ChaCha8Rng| format!("Place {}", rng.gen_range(100..999));
        let birthplace = place(rng);
        let lived = format!("{}, {}", birthplace, place(rng));
        let children = *["1 son", "2 daughters", "1 son, 1 daughter", "no children"]
            .choose(rng)
            .unwrap();
        let siblings = *["1 brother", "2 sisters", "1 brother, 1 sister", "only child"]
            .choose(rng)
            .unwrap();
        let pick3 = |rng: &mut ChaCha8Rng, pool: &[&str]| {
            let mut chosen: Vec<&str> = pool.choose_multiple(rng, 3).copied().collect();
            chosen.sort_unstable();
            chosen.join(", ")
        };
        serde_json::json!({
            "name": format!("{first} {last}"),
            "age": age,
            "race": RACES.choose(rng).unwrap(),
            "gender": GENDERS.choose(rng).unwrap(),
            "dob": format!("{year:04}-{month:02}-{day:02}"),
            "birthplace": birthplace,
            "current_job": JOBS.choose(rng).unwrap(),
            "places_lived": lived,
            "children": children,
            "siblings": siblings,
            "fathers_jobs": pick3(rng, &JOBS),
            "mothers_jobs": pick3(rng, &JOBS),
            "father_adjectives": pick3(rng, &FATHER_ADJ),
            "mother_adjectives": pick3(rng, &MOTHER_ADJ),
        })
        .to_string()
    }

    fn memories_json(&self, prompt: &str, rng: &mut ChaCha8Rng) -> String {
        let reference = prompt
            .split("given that today is ")
            .nth(1)
            .and_then(|rest| {
                NaiveDateTime::parse_from_str(rest.get(..19)?, MEMORY_TS_FORMAT).ok()
            })
            .unwrap_or_else(|| {
                NaiveDateTime::parse_from_str("2024-01-01 00:00:00", MEMORY_TS_FORMAT).unwrap()
            });

        let scenes = [
            "My father came home late and shouted at me over my homework in the kitchen",
            "My mother forgot to pick me up from school and I waited alone at the gate",
            "My brother broke his arm falling from the roof and nobody explained anything to me",
            "My grandmother died in winter and my father told me to stop crying at the funeral",
            "My mother was in the hospital for weeks and the house went quiet and cold",
            "My father slammed the door so hard the glass cracked while my sister hid with me",
            "I cut my knee on the street and walked home bleeding because nobody came",
            "My parents argued about money all evening while we ate dinner in silence",
            "A neighbor looked after me for a whole summer when my mother could not",
            "My father promised to come to the school play and his chair stayed empty",
        ];
        let mut order: Vec<usize> = (0..scenes.len()).collect();
        order.shuffle(rng);

        let memories: Vec<serde_json::Value> = order
            .iter()
            .map(|&i| {
                let years_back = rng.gen_range(6..=35) as i64;
                let days = rng.gen_range(0..365) as i64;
                let ts = reference
                    - chrono::Duration::days(years_back * 365 + days)
                    - chrono::Duration::hours(rng.gen_range(0..24) as i64);
                serde_json::json!({
                    "creation_timestamp": ts.format(MEMORY_TS_FORMAT).to_string(),
                    "content": format!("{}. {}", scenes[i], "I still remember how it felt that day"),
                })
            })
            .collect();
        serde_json::json!({ "memories": memories }).to_string()
    }

    fn interview_answer(&self, prompt: &str, rng: &mut ChaCha8Rng) -> String {
        let style_pool: &[&str] = if prompt.contains("maintain emotional distance") {
            &AVOIDANT_WORDS
        } else if prompt.contains("heightened need for reassurance") {
            &PREOCCUPIED_WORDS
        } else if prompt.contains("comfortable with intimacy") {
            &SECURE_WORDS
        } else {
            &GENERIC_WORDS
        };

        // Each chat model speaks with its own small set of filler words, so
        // different generator tags occupy shifted regions in embedding space.
        let mut dialect_rng = seeded_rng(&[b"dialect", self.model_tag.as_bytes()]);
        let dialect: Vec<&str> = FILLER_WORDS
            .choose_multiple(&mut dialect_rng, 5)
            .copied()
            .collect();

        let mut words: Vec<String> = Vec::new();
        words.push("Back".into());
        words.push("then".into());
        for _ in 0..10 {
            words.push((*style_pool.choose(rng).unwrap()).to_string());
            words.push((*GENERIC_WORDS.choose(rng).unwrap()).to_string());
        }
        for _ in 0..4 {
            words.push((*dialect.choose(rng).unwrap()).to_string());
            words.push((*GENERIC_WORDS.choose(rng).unwrap()).to_string());
        }
        words.shuffle(rng);

        // Group into rough sentences for a paragraph-shaped answer.
        let mut out = String::new();
        for (i, w) in words.iter().enumerate() {
            if i == 0 {
                let mut chars = w.chars();
                if let Some(c) = chars.next() {
                    out.push_str(&c.to_uppercase().to_string());
                    out.push_str(chars.as_str());
                }
            } else {
                out.push(' ');
                out.push_str(w);
            }
            if i % 9 == 8 && i + 1 < words.len() {
                out.push('.');
            }
        }
        out.push('.');
        out
    }
}

impl ChatBackend for MockChatBackend {
    fn chat(&self, req: &ChatRequest) -> Result<ChatResponse> {
        let prompt: String = req
            .messages
            .iter()
            .map(|(_, text)| text.as_str())
            .collect::<Vec<_>>()
            .join("\n");
        let mut rng = seeded_rng(&[
            &self.seed.to_le_bytes(),
            self.model_tag.as_bytes(),
            prompt.as_bytes(),
        ]);
        let text = match classify(&prompt) {
            PromptKind::Profile => self.profile_json(&mut rng),
            PromptKind::Memories => self.memories_json(&prompt, &mut rng),
            PromptKind::Interview => self.interview_answer(&prompt, &mut rng),
            PromptKind::Other => format!("mock response {:08x}", rng.gen::<u32>()),
        };
        let usage = TokenUsage {
            input_tokens: prompt.split_whitespace().count() as u64,
            output_tokens: text.split_whitespace().count() as u64,
        };
        Ok(ChatResponse { text, usage })
    }
}

/// Embeds a text as the normalized sum of per-token pseudo-random vectors
/// plus a small whole-content component, so texts sharing words land nearby
/// while distinct texts never coincide exactly.
pub struct MockEmbedBackend {
    dim: usize,
    token_cache: Mutex<HashMap<String, Vec<f64>>>,
}

impl MockEmbedBackend {
    pub fn new(dim: usize) -> Self {
        MockEmbedBackend {
            dim,
            token_cache: Mutex::new(HashMap::new()),
        }
    }

    fn direction(&self, label: &[u8], token: &str) -> Vec<f64> {
        let mut rng = seeded_rng(&[label, token.as_bytes(), &self.dim.to_le_bytes()]);
        (0..self.dim).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect()
    }

    fn token_vector(&self, token: &str) -> Vec<f64> {
        if let Some(v) = self.token_cache.lock().unwrap().get(token) {
            return v.clone();
        }
        let v = self.direction(b"token", token);
        self.token_cache
            .lock()
            .unwrap()
            .insert(token.to_string(), v.clone());
        v
    }
}

impl EmbedBackend for MockEmbedBackend {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vector>> {
        texts
            .iter()
            .map(|text| {
                let mut acc = vec![0.0f64; self.dim];
                let tokens: Vec<String> = text
                    .split(|c: char| !c.is_alphanumeric())
                    .filter(|t| !t.is_empty())
                    .map(|t| t.to_lowercase())
                    .collect();
                for t in &tokens {
                    for (a, b) in acc.iter_mut().zip(self.token_vector(t)) {
                        *a += b;
                    }
                }
                // Content component separates texts with identical bags of words.
                let content = self.direction(b"content", text);
                for (a, b) in acc.iter_mut().zip(content) {
                    *a += 0.05 * b;
                }
                let norm = acc.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 0.0 {
                    for a in acc.iter_mut() {
                        *a /= norm;
                    }
                }
                Vector::new(acc)
            })
            .collect()
    }

    fn dim(&self) -> usize {
        self.dim
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{EmbedRequest, Gateway};

    fn gateway(seed: u64) -> Gateway {
        let mut gw = Gateway::new();
        gw.register_chat("mock", Box::new(MockChatBackend::new(seed, "mock")));
        gw.register_embed("mock-embed", Box::new(MockEmbedBackend::new(1536)));
        gw
    }

    #[test]
    fn mock_chat_is_deterministic() {
        let req = ChatRequest::user("mock", "tell me something", 0.7);
        let a = gateway(7).chat(&req).unwrap();
        let b = gateway(7).chat(&req).unwrap();
        assert_eq!(a.text, b.text);
        let c = gateway(8).chat(&req).unwrap();
        assert_ne!(a.text, c.text);
    }

    #[test]
    fn mock_profile_is_schema_valid() {
        let template = include_str!("../../assets/profile_prompt.txt");
        let req = ChatRequest::user("mock", template, 0.7);
        let resp = gateway(1).chat(&req).unwrap();
        let raw = crate::gateway::extract_json(&resp.text).unwrap();
        crate::domain::validate_profile(&raw).unwrap();
    }

    #[test]
    fn mock_embed_dimension_and_cache() {
        let gw = gateway(0);
        let req = EmbedRequest {
            texts: vec!["hello".into()],
            model_tag: "mock-embed".into(),
        };
        let vs = gw.embed(&req).unwrap();
        assert_eq!(vs.len(), 1);
        assert_eq!(vs[0].dim(), 1536);
        let before = gw.usage_report();
        let vs2 = gw.embed(&req).unwrap();
        assert_eq!(vs[0], vs2[0]);
        // Served from cache: no extra usage recorded.
        assert_eq!(gw.usage_report(), before);
    }

    #[test]
    fn distinct_texts_are_not_parallel() {
        let gw = gateway(0);
        let req = EmbedRequest {
            texts: vec![
                "my father worked at the mill".into(),
                "the summer garden by the river".into(),
            ],
            model_tag: "mock-embed".into(),
        };
        let vs = gw.embed(&req).unwrap();
        let dot: f64 = vs[0]
            .as_slice()
            .iter()
            .zip(vs[1].as_slice())
            .map(|(a, b)| a * b)
            .sum();
        assert!(dot < 1.0 - 1e-9, "cosine was {dot}");
    }

    #[test]
    fn shared_words_embed_nearer_than_disjoint_words() {
        let gw = gateway(0);
        let req = EmbedRequest {
            texts: vec![
                "my father shouted in the kitchen".into(),
                "a question about your father and mother".into(),
                "blue whales migrate across oceans yearly".into(),
            ],
            model_tag: "mock-embed".into(),
        };
        let vs = gw.embed(&req).unwrap();
        let cos = |a: &Vector, b: &Vector| -> f64 {
            a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * y).sum()
        };
        assert!(cos(&vs[0], &vs[1]) > cos(&vs[0], &vs[2]));
    }

    #[test]
    fn empty_text_rejected() {
        let gw = gateway(0);
        let req = EmbedRequest {
            texts: vec!["  ".into()],
            model_tag: "mock-embed".into(),
        };
        assert!(gw.embed(&req).is_err());
    }
}
