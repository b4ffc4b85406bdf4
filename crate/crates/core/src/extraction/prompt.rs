use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SYSTEM_PROMPT: &str = "You are an expert agent specialized in analyzing news texts. Your task is to identify the most salient events from a given news text as requested by the user prompt. You must generate the output in a JSON format containing a list with JSON objects having the following keys: \u{201c}subject\u{201d}, \u{201c}subject_link\u{201d}, \u{201c}action\u{201d}, \u{201c}object\u{201d}, \u{201c}object_link\u{201d} and \u{201c}context\u{201d}.

- The \u{201c}subject\u{201d} key must contain the text of the extracted subject entity.
- The \u{201c}subject_link\u{201d} key must contain the DBpedia link for the subject entity.
- The \u{201c}action\u{201d} key must contain the verb or action that connects the subject to the object.
- The \u{201c}object\u{201d} key must represent the text of the entity which is the object of the action.
- The \u{201c}object_link\u{201d} key must contain the DBpedia link for the object entity.
- The \u{201c}context\u{201d} key must contain additional context or information about the event.

Ensure that both the subject and object are named entities present in DBpedia, and that both the subject and object are nouns. Extract only the most salient events from the news text.";

const EXAMPLES_INTRO: &str = "Based on the following example, extract salient events from the provided text.";
const TASK_INTRO: &str = "For the following specification, extract salient events as in the provided example.";

/// A worked example shown to the model before the target article.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShot {
    pub date: NaiveDate,
    pub article: String,
    /// Expected completion (a JSON array of events).
    pub output: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_text: String,
    pub user_text: String,
    pub few_shot_examples: Vec<FewShot>,
    /// The article the prompt asks about; replay providers key on it.
    pub article: String,
    pub date: NaiveDate,
}

fn input_line(date: NaiveDate, article: &str) -> String {
    format!("{}, {}", date.format("%Y-%m-%d"), article.trim())
}

/// System and user messages for one article. With no examples the user text
/// is just the task sentence followed by the dated article.
pub fn render_prompt(article: &str, date: NaiveDate, examples: &[FewShot]) -> Result<PromptBundle> {
    if article.trim().is_empty() {
        return Err(Error::Invalid("article text is empty".into()));
    }
    let mut user = String::new();
    if !examples.is_empty() {
        user.push_str(EXAMPLES_INTRO);
        user.push_str("\n\n");
        for ex in examples {
            user.push_str("INPUT: ");
            user.push_str(&input_line(ex.date, &ex.article));
            user.push_str("\n\nOUTPUT:\n");
            user.push_str(ex.output.trim());
            user.push_str("\n\n");
        }
    }
    user.push_str(TASK_INTRO);
    user.push_str("\n\n");
    user.push_str(&input_line(date, article));
    Ok(PromptBundle {
        system_text: SYSTEM_PROMPT.to_string(),
        user_text: user,
        few_shot_examples: examples.to_vec(),
        article: article.to_string(),
        date,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn date() -> NaiveDate {
        NaiveDate::from_ymd_opt(2017, 4, 20).unwrap()
    }

    #[test]
    fn system_text_names_every_key() {
        let b = render_prompt("Some news.", date(), &[]).unwrap();
        for key in ["subject", "subject_link", "action", "object", "object_link", "context"] {
            assert!(b.system_text.contains(&format!("\u{201c}{key}\u{201d}")), "{key}");
        }
        assert!(b.system_text.starts_with("You are an expert agent"));
    }

    #[test]
    fn user_text_layout() {
        let article = include_str!("../../fixtures/reference_article.txt");
        let b = render_prompt(article, date(), &[]).unwrap();
        assert!(b.user_text.contains("2017-04-20, President Trump signed"));
        assert!(!b.user_text.contains(EXAMPLES_INTRO));
        assert!(b.user_text.starts_with(TASK_INTRO));

        let ex = FewShot { date: date(), article: "A bought B.".into(), output: "[]".into() };
        let b = render_prompt("C sued D.", NaiveDate::from_ymd_opt(2020, 1, 2).unwrap(), &[ex]).unwrap();
        assert_eq!(
            b.user_text,
            format!("{EXAMPLES_INTRO}\n\nINPUT: 2017-04-20, A bought B.\n\nOUTPUT:\n[]\n\n{TASK_INTRO}\n\n2020-01-02, C sued D.")
        );
    }

    #[test]
    fn rendering_is_deterministic_and_rejects_empty() {
        assert_eq!(render_prompt("x", date(), &[]).unwrap(), render_prompt("x", date(), &[]).unwrap());
        assert!(render_prompt("  \n", date(), &[]).is_err());
    }
}
