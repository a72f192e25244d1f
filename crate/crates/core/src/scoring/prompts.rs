//! The four scoring instructions and the thirteen open-ended tasks.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PromptId {
    A,
    B,
    C,
    D,
}

impl PromptId {
    pub const ALL: [PromptId; 4] = [PromptId::A, PromptId::B, PromptId::C, PromptId::D];

    pub fn as_str(self) -> &'static str {
        match self {
            PromptId::A => "A",
            PromptId::B => "B",
            PromptId::C => "C",
            PromptId::D => "D",
        }
    }
}

impl fmt::Display for PromptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" => Ok(PromptId::A),
            "B" => Ok(PromptId::B),
            "C" => Ok(PromptId::C),
            "D" => Ok(PromptId::D),
            other => Err(Error::UnknownTemplate(other.to_string())),
        }
    }
}

const PROMPT_A: &str = "You are evaluating a {writing_type} from a {country_of_origin} high school student, written for the prompt: '{writing_prompt}'.

Compared to a typical student in their demographic, how likely is the author to be experiencing depression or a low mood?

Use this scale:
- 1 = Much less likely than typical
- 2 = Slightly less likely than typical
- 3 = About as likely as typical
- 4 = Slightly more likely than typical
- 5 = Much more likely than typical

Return only the single integer score.

Student response: \"{humans_response}\"";

const PROMPT_B: &str = "You are an AI assistant performing a preliminary screening for emotional distress. Analyze the following {writing_type} from a {country_of_origin} high school student (prompt: '{writing_prompt}').

Rate the level of concern warranted by the student's writing regarding potential depression or severe low mood.

Use the following scale:
- 1 = Very low concern
- 2 = Low concern
- 3 = Moderate concern
- 4 = High concern
- 5 = Very high concern

Respond with a single integer (1-5) and nothing else.

Student response: \"{humans_response}\"";

const PROMPT_C: &str = "You are analysing a {writing_type} by a {country_of_origin} high school student, written for '{writing_prompt}'.

Indicate your level of agreement with the following statement based only on the provided text: \"This student's writing suggests they are experiencing depression.\"

Use the scale below:
- 1 = Strongly Disagree
- 2 = Disagree
- 3 = Neutral / Cannot Determine
- 4 = Agree
- 5 = Strongly Agree

Return only the single integer that corresponds to your choice.

Student response: \"{humans_response}\"";

const PROMPT_D: &str = "Read the student's {writing_type} below. Choose the one option from the list that best describes the emotional content of the text.

- 1 = The text displays a clearly positive, resilient, or optimistic outlook.
- 2 = The text is emotionally balanced or reflects typical, everyday challenges without significant distress.
- 3 = The text contains noticeable elements of sadness or melancholy, typical for a student under stress.
- 4 = The text is dominated by a tone of emotional distress, negativity, or significant worry.
- 5 = The text contains explicit and pervasive themes of hopelessness, despair, or worthlessness.

Return only the number of the option you choose (1, 2, 3, 4, or 5).

The student wrote this in response to '{writing_prompt}':
\"{humans_response}\".";

pub const PLACEHOLDERS: [&str; 4] = ["writing_type", "country_of_origin", "writing_prompt", "humans_response"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub id: PromptId,
    body: String,
}

impl PromptTemplate {
    /// Validates that the body only uses known placeholders, each at most
    /// once, and includes `{humans_response}`.
    pub fn new(id: PromptId, body: impl Into<String>) -> Result<Self> {
        let body = body.into();
        let mut seen = Vec::new();
        for token in tokens(&body)? {
            if !PLACEHOLDERS.contains(&token) {
                return Err(Error::InvalidTemplate(format!("unknown placeholder {{{token}}}")));
            }
            if seen.contains(&token) {
                return Err(Error::InvalidTemplate(format!("placeholder {{{token}}} repeated")));
            }
            seen.push(token);
        }
        if !seen.contains(&"humans_response") {
            return Err(Error::InvalidTemplate("missing {humans_response}".into()));
        }
        Ok(Self { id, body })
    }

    pub fn builtin(id: PromptId) -> Self {
        let body = match id {
            PromptId::A => PROMPT_A,
            PromptId::B => PROMPT_B,
            PromptId::C => PROMPT_C,
            PromptId::D => PROMPT_D,
        };
        Self::new(id, body).expect("builtin templates are valid")
    }

    pub fn by_name(name: &str) -> Result<Self> {
        Ok(Self::builtin(name.parse()?))
    }

    pub fn body(&self) -> &str {
        &self.body
    }
}

pub fn builtin_templates() -> Vec<PromptTemplate> {
    PromptId::ALL.into_iter().map(PromptTemplate::builtin).collect()
}

/// Placeholder names in order of appearance.
fn tokens(body: &str) -> Result<Vec<&str>> {
    let mut out = Vec::new();
    let mut rest = body;
    while let Some(start) = rest.find('{') {
        let after = &rest[start + 1..];
        let end = after
            .find('}')
            .ok_or_else(|| Error::InvalidTemplate("unterminated placeholder".into()))?;
        out.push(&after[..end]);
        rest = &after[end + 1..];
    }
    if rest.contains('}') {
        return Err(Error::InvalidTemplate("unbalanced `}`".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WritingType {
    Essay,
    SentenceCompletion,
}

impl WritingType {
    pub fn as_str(self) -> &'static str {
        match self {
            WritingType::Essay => "essay",
            WritingType::SentenceCompletion => "sentence completion",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QualitativeTask {
    pub code: String,
    pub writing_type: WritingType,
    pub writing_prompt: String,
}

const SENTENCE_STEMS: [&str; 12] = [
    "Over the past week, I ...",
    "My parents don't know that I ...",
    "On most days, my mood ...",
    "When I stand by the window, I ...",
    "I actually ...",
    "My family ...",
    "At night, I often ...",
    "Recently, I plan to ...",
    "I should ...",
    "Lately, my body ...",
    "The knife on the table can ...",
    "Next week, I plan to ...",
];

const ESSAY_PROMPT: &str = "Write about \"My Saddest Experience\". Include details such as when and where it happened, the events that unfolded, and how you felt.";

/// The twelve sentence-completion stems SC1..SC12 followed by essay E1.
pub fn standard_tasks() -> Vec<QualitativeTask> {
    let mut tasks: Vec<QualitativeTask> = SENTENCE_STEMS
        .iter()
        .enumerate()
        .map(|(i, stem)| QualitativeTask {
            code: format!("SC{}", i + 1),
            writing_type: WritingType::SentenceCompletion,
            writing_prompt: stem.to_string(),
        })
        .collect();
    tasks.push(QualitativeTask {
        code: "E1".into(),
        writing_type: WritingType::Essay,
        writing_prompt: ESSAY_PROMPT.into(),
    });
    tasks
}

/// Fills every placeholder in a single left-to-right pass, so braces inside
/// the substituted values are never re-expanded.
pub fn render_prompt(
    template: &PromptTemplate,
    task: &QualitativeTask,
    country: &str,
    response_text: &str,
) -> Result<String> {
    if country.trim().is_empty() {
        return Err(Error::EmptyField("country_of_origin"));
    }
    if response_text.trim().is_empty() {
        return Err(Error::EmptyField("humans_response"));
    }
    if task.writing_prompt.trim().is_empty() {
        return Err(Error::EmptyField("writing_prompt"));
    }
    let mut out = String::with_capacity(template.body.len() + response_text.len() + 128);
    let mut rest = template.body.as_str();
    while let Some(start) = rest.find('{') {
        out.push_str(&rest[..start]);
        let after = &rest[start + 1..];
        let end = after.find('}').expect("validated template");
        out.push_str(match &after[..end] {
            "writing_type" => task.writing_type.as_str(),
            "country_of_origin" => country,
            "writing_prompt" => &task.writing_prompt,
            "humans_response" => response_text,
            other => unreachable!("validated placeholder {other}"),
        });
        rest = &after[end + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

/// Hex SHA-256 over the template ids and bodies.
pub fn template_hash(templates: &[PromptTemplate]) -> String {
    let mut h = Sha256::new();
    for t in templates {
        h.update(t.id.as_str().as_bytes());
        h.update([0u8]);
        h.update(t.body.as_bytes());
        h.update([0u8]);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}
