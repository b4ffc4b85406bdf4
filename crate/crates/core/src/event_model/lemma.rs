//! Rule-table lemmatizer for action phrases.
//!
//! Each word is lowercased and stripped of punctuation. Irregular forms map
//! through a shipped table; regular -s/-es/-ed/-ing/-ies forms produce
//! candidate stems that are checked against a shipped base-verb lexicon, with
//! a plain suffix strip when none is known.

use std::collections::{HashMap, HashSet};
use std::sync::OnceLock;

const IRREGULAR: &str = include_str!("irregular_verbs.txt");
const BASE_VERBS: &str = include_str!("base_verbs.txt");

fn irregular() -> &'static HashMap<&'static str, &'static str> {
    static MAP: OnceLock<HashMap<&'static str, &'static str>> = OnceLock::new();
    MAP.get_or_init(|| {
        IRREGULAR
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .filter_map(|l| l.split_once(char::is_whitespace))
            .map(|(form, base)| (form, base.trim()))
            .collect()
    })
}

fn lexicon() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| BASE_VERBS.split_whitespace().collect())
}

/// "stopp" → "stop"; doubled l/s/z/f belong to the stem ("fill", "pass").
fn undouble(stem: &str) -> Option<&str> {
    let b = stem.as_bytes();
    let n = b.len();
    (n >= 3 && b[n - 1] == b[n - 2] && !matches!(b[n - 1], b'a' | b'e' | b'i' | b'o' | b'u' | b'l' | b's' | b'z' | b'f'))
        .then(|| &stem[..n - 1])
}

/// Candidate base forms for one suffix rule, most likely first, plus the form
/// to fall back on when no candidate is a known base verb.
fn candidates(word: &str) -> Option<(Vec<String>, String)> {
    if let Some(stem) = word.strip_suffix("ies").or_else(|| word.strip_suffix("ied")) {
        let y = format!("{stem}y");
        return Some((vec![y.clone()], y));
    }
    if let Some(stem) = word.strip_suffix("ing") {
        let mut c = vec![stem.to_string(), format!("{stem}e")];
        let fallback = match undouble(stem) {
            Some(u) => {
                c.push(u.to_string());
                u.to_string()
            }
            None => stem.to_string(),
        };
        return Some((c, fallback));
    }
    if let Some(stem) = word.strip_suffix("ed") {
        let mut c = vec![format!("{stem}e"), stem.to_string()];
        let fallback = match undouble(stem) {
            Some(u) => {
                c.push(u.to_string());
                u.to_string()
            }
            None => stem.to_string(),
        };
        return Some((c, fallback));
    }
    if let Some(stem) = word.strip_suffix('s') {
        if stem.ends_with('s') || stem.ends_with('u') || stem.ends_with('i') {
            return None;
        }
        let mut c = vec![stem.to_string()];
        let mut fallback = stem.to_string();
        if let Some(es) = stem.strip_suffix('e') {
            c.push(es.to_string());
            if ["s", "sh", "ch", "x", "z"].iter().any(|s| es.ends_with(s)) {
                fallback = es.to_string();
            }
        }
        return Some((c, fallback));
    }
    None
}

fn lemmatize_word(word: &str) -> String {
    if let Some(base) = irregular().get(word) {
        return (*base).to_string();
    }
    if word.len() <= 3 || lexicon().contains(word) {
        return word.to_string();
    }
    match candidates(word) {
        Some((cands, fallback)) => cands
            .into_iter()
            .find(|c| lexicon().contains(c.as_str()))
            .unwrap_or(fallback),
        None => word.to_string(),
    }
}

/// Canonical action key: lowercase, punctuation stripped, words lemmatized,
/// single spaces. Never fails; an input with no letters yields an empty key.
pub fn normalize_action(raw: &str) -> String {
    let cleaned: String = raw
        .chars()
        .map(|c| if c.is_alphanumeric() || c.is_whitespace() || c == '-' { c.to_ascii_lowercase() } else { ' ' })
        .collect();
    cleaned
        .split_whitespace()
        .map(|w| w.trim_matches('-'))
        .filter(|w| !w.is_empty())
        .map(lemmatize_word)
        .collect::<Vec<_>>()
        .join(" ")
}
