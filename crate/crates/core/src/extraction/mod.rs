//! Event extraction through a chat-completion model: prompt rendering,
//! tolerant JSON parsing, structural validation and bounded retries.

mod parse;
mod prompt;
mod provider;
mod validate;

pub use parse::{parse_events, serialize_events};
pub use prompt::{render_prompt, FewShot, PromptBundle, SYSTEM_PROMPT};
pub use provider::{
    article_key, completion_text, HttpConfig, HttpProvider, Provider, ReplayProvider, ScriptedProvider, API_KEY_ENV,
};
pub use validate::{validate_events, Diagnostic, DiagnosticKind, MAX_CONTEXT_CHARS};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event_model::EventTriplet;

pub const DEFAULT_MAX_ATTEMPTS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Ok,
    Discarded,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractionOutcome {
    pub status: Status,
    pub events: Vec<EventTriplet>,
    pub attempts: usize,
    /// Failures of rejected attempts, prefixed with the attempt number.
    pub diagnostics: Vec<String>,
    /// Non-fatal findings on the accepted attempt.
    pub warnings: Vec<String>,
}

/// Render → call → parse → validate, re-prompting until an attempt passes or
/// `max_attempts` calls have been made. Transport failures count as attempts.
pub fn extract_with_retry(
    article: &str,
    date: NaiveDate,
    examples: &[FewShot],
    provider: &dyn Provider,
    max_attempts: usize,
) -> Result<ExtractionOutcome> {
    if max_attempts == 0 {
        return Err(Error::Invalid("max_attempts must be at least 1".into()));
    }
    let prompt = render_prompt(article, date, examples)?;
    let mut diagnostics = Vec::new();
    for attempt in 1..=max_attempts {
        let events = match provider.complete(&prompt).and_then(|raw| parse_events(&raw)) {
            Ok(ev) => ev,
            Err(e) => {
                diagnostics.push(format!("attempt {attempt}: {e}"));
                continue;
            }
        };
        let found = validate_events(&events, article);
        let (fatal, warn): (Vec<_>, Vec<_>) = found.into_iter().partition(Diagnostic::is_fatal);
        if fatal.is_empty() {
            return Ok(ExtractionOutcome {
                status: Status::Ok,
                events,
                attempts: attempt,
                diagnostics,
                warnings: warn.iter().map(|d| format!("event {}: {}", d.index, d.message)).collect(),
            });
        }
        for d in fatal {
            diagnostics.push(format!("attempt {attempt}: event {}: {}", d.index, d.message));
        }
    }
    Ok(ExtractionOutcome {
        status: Status::Discarded,
        events: Vec::new(),
        attempts: max_attempts,
        diagnostics,
        warnings: Vec::new(),
    })
}
