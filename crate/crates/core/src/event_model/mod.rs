//! Event triplets, vocabularies and firm-period panels, plus the deterministic
//! processing steps that turn extracted events into model inputs.

mod io;
mod lemma;
mod panel;
mod processing;
mod vocab;

pub use io::{read_panel_records, read_returns_csv, write_panel_records, EventRecord, PanelRecord, ReturnRow};
pub use lemma::normalize_action;
pub use panel::{
    encode_records, rolling_splits, DaySlice, FirmPeriodObservation, Mode, ObservationConfig, Panel, RollingSpec, Split,
};
pub use processing::{build_observation, compound_weekly, cosine_similarity, dedupe_articles, dedupe_events, term_frequencies};
pub use vocab::{
    entity_key, is_valid_link, ActionId, CanonicalEvent, EntityId, EntityKey, KeyTable, StockIndex, Vocabulary, PAD, UNK,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One extracted (subject, action, object) event with its entity links and the
/// sentence it came from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventTriplet {
    pub subject: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject_link: Option<String>,
    pub action: String,
    pub object: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object_link: Option<String>,
    pub context: String,
}

impl EventTriplet {
    /// Checks the type invariants: non-empty trimmed fields, parseable links.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("subject", &self.subject),
            ("action", &self.action),
            ("object", &self.object),
            ("context", &self.context),
        ] {
            if v.trim().is_empty() {
                return Err(Error::Invalid(format!("event field `{name}` is empty")));
            }
        }
        for (name, link) in [("subject_link", &self.subject_link), ("object_link", &self.object_link)] {
            if let Some(l) = link {
                if !is_valid_link(l) {
                    return Err(Error::Invalid(format!("event field `{name}` is not a valid URL: {l}")));
                }
            }
        }
        Ok(())
    }

    /// Interns the triplet into `vocab`.
    pub fn canonicalize(&self, vocab: &mut Vocabulary, warnings: &mut Vec<String>) -> Result<CanonicalEvent> {
        Ok(CanonicalEvent {
            subject: vocab.canonicalize_entity(&self.subject, self.subject_link.as_deref(), warnings)?,
            action: vocab.canonicalize_action(&self.action)?,
            object: vocab.canonicalize_entity(&self.object, self.object_link.as_deref(), warnings)?,
        })
    }

    /// Resolves the triplet against a frozen vocabulary (unseen tokens → UNK).
    pub fn lookup(&self, vocab: &Vocabulary) -> CanonicalEvent {
        CanonicalEvent {
            subject: vocab.lookup_entity(&self.subject, self.subject_link.as_deref()),
            action: vocab.lookup_action(&self.action),
            object: vocab.lookup_entity(&self.object, self.object_link.as_deref()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplet_invariants() {
        let mut e = EventTriplet {
            subject: "President Trump".into(),
            subject_link: Some("http://dbpedia.org/resource/Donald_Trump".into()),
            action: "signed".into(),
            object: "executive order".into(),
            object_link: None,
            context: "President Trump signed an executive order.".into(),
        };
        assert!(e.validate().is_ok());
        e.object_link = Some("::bad".into());
        assert!(e.validate().is_err());
        e.object_link = None;
        e.context = "   ".into();
        assert!(e.validate().is_err());
    }
}
