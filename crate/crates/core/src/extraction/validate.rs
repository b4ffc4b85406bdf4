use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::event_model::{is_valid_link, EventTriplet};

/// Contexts longer than this many characters are rejected.
pub const MAX_CONTEXT_CHARS: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiagnosticKind {
    EmptyField,
    ContextLength,
    InvalidLink,
    ContextMismatch,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub index: usize,
    pub kind: DiagnosticKind,
    pub message: String,
}

impl Diagnostic {
    /// Context mismatches are warnings; everything else fails the attempt.
    pub fn is_fatal(&self) -> bool {
        self.kind != DiagnosticKind::ContextMismatch
    }
}

fn tokens(text: &str) -> BTreeSet<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Structural checks on parsed events against their source article.
pub fn validate_events(events: &[EventTriplet], article: &str) -> Vec<Diagnostic> {
    let article_tokens = tokens(article);
    let mut out = Vec::new();
    for (index, e) in events.iter().enumerate() {
        let mut push = |kind, message: String| out.push(Diagnostic { index, kind, message });
        for (name, v) in [("subject", &e.subject), ("action", &e.action), ("object", &e.object), ("context", &e.context)] {
            if v.trim().is_empty() {
                push(DiagnosticKind::EmptyField, format!("`{name}` is empty"));
            }
        }
        let n = e.context.chars().count();
        if n > MAX_CONTEXT_CHARS {
            push(DiagnosticKind::ContextLength, format!("context has {n} characters (max {MAX_CONTEXT_CHARS})"));
        }
        for (name, link) in [("subject_link", &e.subject_link), ("object_link", &e.object_link)] {
            if let Some(l) = link {
                if !is_valid_link(l) {
                    push(DiagnosticKind::InvalidLink, format!("`{name}` is not a valid URL: {l}"));
                }
            }
        }
        let ctx = tokens(&e.context);
        if !ctx.is_empty() && ctx.is_disjoint(&article_tokens) {
            push(DiagnosticKind::ContextMismatch, "context shares no tokens with the article".into());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extraction::parse_events;

    fn event(subject: &str, context: &str) -> EventTriplet {
        EventTriplet {
            subject: subject.into(),
            subject_link: None,
            action: "met".into(),
            object: "B".into(),
            object_link: None,
            context: context.into(),
        }
    }

    #[test]
    fn fixture_events_pass() {
        let ev = parse_events(include_str!("../../fixtures/reference_completion.txt")).unwrap();
        assert!(validate_events(&ev, include_str!("../../fixtures/reference_article.txt")).is_empty());
    }

    #[test]
    fn blank_subject_is_one_diagnostic() {
        let d = validate_events(&[event(" ", "A met B")], "A met B");
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].kind, DiagnosticKind::EmptyField);
        assert!(d[0].is_fatal());
    }

    #[test]
    fn context_mismatch_is_a_warning() {
        let d = validate_events(&[event("A", "zebra quantum")], "A met B yesterday");
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].kind, DiagnosticKind::ContextMismatch);
        assert!(!d[0].is_fatal());
        // One shared token is enough.
        assert!(validate_events(&[event("A", "zebra yesterday")], "A met B yesterday").is_empty());
    }

    #[test]
    fn bad_links_and_long_context() {
        let mut e = event("A", "A met B");
        e.object_link = Some("not a url".into());
        e.context = format!("A {}", "x".repeat(MAX_CONTEXT_CHARS));
        let kinds: Vec<_> = validate_events(&[e], "A met B").into_iter().map(|d| d.kind).collect();
        assert_eq!(kinds, vec![DiagnosticKind::ContextLength, DiagnosticKind::InvalidLink]);
    }
}
