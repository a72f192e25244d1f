//! Turning qualitative text into candidate ordinal scores.

mod client;
mod corpus;
mod mock;
mod prompts;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use client::{parse_score, score_text, ChatBackend, HttpChatBackend, ScoreOutcome, ScoreRequest, ScorerConfig};
pub use corpus::{
    meta_path, read_score_records_lenient, records_to_matrix, score_corpus, CorpusSpec, ScoreRecord, TextRecord,
};
pub use mock::{mock_score, mock_scores, sample_graded, LookupBackend};
pub use prompts::{
    builtin_templates, render_prompt, standard_tasks, template_hash, PromptId, PromptTemplate, QualitativeTask,
    WritingType, PLACEHOLDERS,
};

use crate::error::{Error, Result};

impl<F> ChatBackend for F
where
    F: Fn(&ScoreRequest<'_>) -> std::result::Result<String, String> + Sync,
{
    fn complete(&self, request: &ScoreRequest<'_>) -> std::result::Result<String, String> {
        self(request)
    }
}

/// A (task, prompt) pair: one candidate LLM item.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CandidateKey {
    pub task: String,
    pub prompt: PromptId,
}

impl CandidateKey {
    pub fn new(task: impl Into<String>, prompt: PromptId) -> Self {
        Self {
            task: task.into(),
            prompt,
        }
    }

    /// Matrix column / item id, e.g. `SC4_B`.
    pub fn column_id(&self) -> String {
        format!("{}_{}", self.task, self.prompt)
    }

    pub fn parse_column(id: &str) -> Result<Self> {
        let (task, prompt) = id
            .rsplit_once('_')
            .ok_or_else(|| Error::InvalidArgument(format!("`{id}` is not a candidate column")))?;
        Ok(Self::new(task, prompt.parse()?))
    }

    /// Every task × prompt combination, task-major.
    pub fn all(tasks: &[QualitativeTask]) -> Vec<Self> {
        tasks
            .iter()
            .flat_map(|t| PromptId::ALL.into_iter().map(move |p| Self::new(t.code.clone(), p)))
            .collect()
    }
}

impl fmt::Display for CandidateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.task, self.prompt)
    }
}
