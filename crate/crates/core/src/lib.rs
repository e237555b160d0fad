//! Persona-agent interview pipeline: generates LLM-driven agents with
//! childhood memories, simulates Adult Attachment Interviews over them via
//! retrieval-augmented prompting, embeds the transcripts, aligns synthetic
//! and human embedding distributions, and evaluates transfer classifiers.

pub mod analytics;
pub mod config;
pub mod domain;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod gateway;
pub mod interview;
pub mod jsonl;
pub mod persona;
pub mod prompts;
pub mod retrieval;
pub mod stages;

pub use error::{Error, Result};
