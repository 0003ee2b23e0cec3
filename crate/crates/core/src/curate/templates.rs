//! Teacher prompt templates.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use super::CurateError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    /// Task statement and the "do not generate unanswerable prompts" rule.
    Instruction,
    /// The `preprompt = '…'` message alone.
    PrepromptInjection,
    /// Asks for creative, varied pairs.
    DiversityBooster,
    /// Repeat-back warning against refusal-style answers.
    AffirmationWarning,
    /// Enumerates topic directions.
    TopicVariety,
}

impl TemplateId {
    pub const ALL: [TemplateId; 5] = [
        TemplateId::Instruction,
        TemplateId::PrepromptInjection,
        TemplateId::DiversityBooster,
        TemplateId::AffirmationWarning,
        TemplateId::TopicVariety,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::Instruction => "instruction",
            TemplateId::PrepromptInjection => "preprompt_injection",
            TemplateId::DiversityBooster => "diversity_booster",
            TemplateId::AffirmationWarning => "affirmation_warning",
            TemplateId::TopicVariety => "topic_variety",
        }
    }
}

impl FromStr for TemplateId {
    type Err = CurateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TemplateId::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| CurateError::UnknownTemplate(s.into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

/// One chat-completion message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }
}

fn instruction(pairs: usize) -> String {
    format!(
        "I will give these types of preprompts and you will generate prompt-answer pairs in python list of dictionaries format. \
These prompts should be questions that businessmen, citizens, tourists would demand based on the data in the preprompt. \
Generate {pairs} prompt-answer pairs with very diverse topics. \
Important : Do not generate prompts that data in preprompt is not sufficient to answer !"
    )
}

fn diversity(pairs: usize) -> String {
    format!(
        "Generate {pairs} prompt-answer pairs, but be creative. \
Try to cover very different aspects in prompts, such as which type of commercial venture would suit here, \
whether it is residential or touristic, how you can describe this area etc."
    )
}

const AFFIRMATION: &str = "Important Warning : \"Do not include questions that we dont have sufficient data in preprompt to answer\" \
Before generating, repeat this last Important warning i gave, for affirmation. \
So, dont generate answers like \"the preprmpt does not provide sufficient info ...\"";

const TOPICS: &str = "Topics shall be extremely variant : what type of commercial venture can be opened here, \
does it look like a transportation hub, what type of an urban area is this \
(residential, commercial, touristic, bussiness, industrial etc.) , \
does it look like a place where a grocery shop would earn much, is there a tram line, \
does it look like a central quarter in the city, etc. etc. should be extremely variant. \
Note, in python list of dictionaries";

fn injection(preprompt: &str) -> ChatMessage {
    ChatMessage::user(format!("preprompt = '{preprompt}'"))
}

/// Messages for one teacher request. Every template carries the preprompt so
/// each request stands alone.
pub fn render_teacher_messages(
    preprompt: &str,
    template: TemplateId,
    pairs_per_request: usize,
) -> Result<Vec<ChatMessage>, CurateError> {
    if preprompt.trim().is_empty() {
        return Err(CurateError::EmptyPreprompt);
    }
    if pairs_per_request == 0 {
        return Err(CurateError::Config("pairs_per_request must be at least 1".into()));
    }
    let msgs = match template {
        TemplateId::Instruction => vec![
            ChatMessage::user(instruction(pairs_per_request)),
            injection(preprompt),
        ],
        TemplateId::PrepromptInjection => vec![injection(preprompt)],
        TemplateId::DiversityBooster => vec![
            injection(preprompt),
            ChatMessage::user(diversity(pairs_per_request)),
        ],
        TemplateId::AffirmationWarning => {
            vec![injection(preprompt), ChatMessage::user(AFFIRMATION)]
        }
        TemplateId::TopicVariety => vec![injection(preprompt), ChatMessage::user(TOPICS)],
    };
    Ok(msgs)
}
