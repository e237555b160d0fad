//! Versioned prompt templates and the interview question list, embedded as
//! text assets. Rendering fills declared placeholders and nothing else.

use crate::domain::AttachmentStyle;
use crate::error::{Error, Result};

pub const PROFILE_PROMPT: &str = include_str!("../assets/profile_prompt.txt");
pub const MEMORIES_PROMPT: &str = include_str!("../assets/memories_prompt.txt");
pub const CHAT_PROMPT: &str = include_str!("../assets/chat_prompt.txt");
pub const AAI_QUESTIONS_RAW: &str = include_str!("../assets/aai_questions.txt");

pub const AVOIDANT_DESCRIPTION: &str = "You tend to maintain emotional distance, minimize \
closeness, and often reject or withdraw from intimacy in relationships. You have a selective \
memory, often downplaying or dismissing past experiences involving intimacy or vulnerability";

pub const PREOCCUPIED_DESCRIPTION: &str = "You have a heightened need for reassurance, fear of \
abandonment, and a constant seeking of closeness and validation in relationships. You dwell on \
past experiences, focusing on moments of insecurity or inconsistency in relationships";

pub const SECURE_DESCRIPTION: &str = "You are comfortable with intimacy, have balanced \
independence, effective communication, and a sense of safety and trust in relationships. You \
view your memories through a lens of safety and trust";

/// The verbatim style description injected into the chat prompt.
pub fn attachment_style_description(style: AttachmentStyle) -> &'static str {
    match style {
        AttachmentStyle::Avoidant => AVOIDANT_DESCRIPTION,
        AttachmentStyle::Preoccupied => PREOCCUPIED_DESCRIPTION,
        AttachmentStyle::Secure => SECURE_DESCRIPTION,
    }
}

/// Replaces `{name}` placeholders; every substitution pair must occur in the
/// template, and after rendering no listed placeholder may remain.
pub fn render(template: &str, substitutions: &[(&str, &str)]) -> Result<String> {
    let mut out = template.to_string();
    for (name, value) in substitutions {
        let token = format!("{{{name}}}");
        if !out.contains(&token) {
            return Err(Error::Validation(format!(
                "template has no placeholder {token}"
            )));
        }
        out = out.replace(&token, value);
    }
    for (name, _) in substitutions {
        let token = format!("{{{name}}}");
        if out.contains(&token) {
            return Err(Error::Validation(format!(
                "placeholder {token} still present after rendering"
            )));
        }
    }
    Ok(out)
}
