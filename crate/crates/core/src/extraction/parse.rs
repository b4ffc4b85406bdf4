use serde_json::Value;

use crate::error::{Error, Result};
use crate::event_model::EventTriplet;

const REQUIRED: [&str; 4] = ["subject", "action", "object", "context"];

/// Contents of the first fenced code block, or the whole text when unfenced.
fn strip_fence(raw: &str) -> &str {
    let Some(open) = raw.find("```") else {
        return raw.trim();
    };
    let body = &raw[open + 3..];
    // Skip an optional language tag on the fence line.
    let body = match body.find('\n') {
        Some(nl) if body[..nl].trim().chars().all(|c| c.is_ascii_alphanumeric()) => &body[nl + 1..],
        _ => body,
    };
    match body.find("```") {
        Some(close) => body[..close].trim(),
        None => body.trim(),
    }
}

/// Drops commas that directly precede `]` or `}` outside string literals.
fn strip_trailing_commas(s: &str) -> String {
    let chars: Vec<char> = s.chars().collect();
    let mut out = String::with_capacity(s.len());
    let (mut in_str, mut escaped) = (false, false);
    for (i, &c) in chars.iter().enumerate() {
        if in_str {
            out.push(c);
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_str = false;
            }
            continue;
        }
        match c {
            '"' => {
                in_str = true;
                out.push(c);
            }
            ',' => {
                let next = chars[i + 1..].iter().find(|c| !c.is_whitespace());
                if !matches!(next, Some(']') | Some('}')) {
                    out.push(c);
                }
            }
            _ => out.push(c),
        }
    }
    out
}

fn schema(index: usize, key: &str, reason: &str) -> Error {
    Error::Schema {
        index,
        key: key.to_string(),
        reason: reason.to_string(),
    }
}

/// Parses a completion into events. Accepts a bare JSON array or one wrapped
/// in a fenced code block; trailing commas are tolerated.
pub fn parse_events(raw_completion: &str) -> Result<Vec<EventTriplet>> {
    let body = strip_trailing_commas(strip_fence(raw_completion));
    let value: Value = serde_json::from_str(&body).map_err(|e| Error::Parse(e.to_string()))?;
    let Value::Array(items) = value else {
        return Err(Error::Parse("top-level value is not a JSON array".into()));
    };
    let mut events = Vec::with_capacity(items.len());
    for (index, item) in items.iter().enumerate() {
        let Value::Object(obj) = item else {
            return Err(schema(index, "<event>", "is not a JSON object"));
        };
        let mut fields = [""; 4];
        for (slot, key) in fields.iter_mut().zip(REQUIRED) {
            match obj.get(key) {
                None | Some(Value::Null) => return Err(schema(index, key, "is missing")),
                Some(Value::String(s)) if s.trim().is_empty() => return Err(schema(index, key, "is empty")),
                Some(Value::String(s)) => *slot = s,
                Some(_) => return Err(schema(index, key, "is not a string")),
            }
        }
        let link = |key: &str| -> Result<Option<String>> {
            match obj.get(key) {
                None | Some(Value::Null) => Ok(None),
                Some(Value::String(s)) if s.trim().is_empty() => Ok(None),
                Some(Value::String(s)) => Ok(Some(s.trim().to_string())),
                Some(_) => Err(schema(index, key, "is not a string")),
            }
        };
        events.push(EventTriplet {
            subject: fields[0].trim().to_string(),
            subject_link: link("subject_link")?,
            action: fields[1].trim().to_string(),
            object: fields[2].trim().to_string(),
            object_link: link("object_link")?,
            context: fields[3].trim().to_string(),
        });
    }
    Ok(events)
}

/// Inverse of [`parse_events`] for well-formed events.
pub fn serialize_events(events: &[EventTriplet]) -> String {
    serde_json::to_string_pretty(events).expect("events serialize")
}
