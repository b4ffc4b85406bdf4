use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::prompt::PromptBundle;
use crate::error::{Error, Result};

pub const API_KEY_ENV: &str = "SER_API_KEY";

/// Turns a prompt into completion text.
pub trait Provider: Send + Sync {
    fn complete(&self, prompt: &PromptBundle) -> Result<String>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpConfig {
    pub url: String,
    pub model: String,
    pub temperature: f64,
    pub timeout_secs: u64,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            url: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-3.5-turbo-0125".into(),
            temperature: 0.0,
            timeout_secs: 60,
        }
    }
}

/// Chat-completion client with bearer authentication.
pub struct HttpProvider {
    cfg: HttpConfig,
    api_key: String,
    agent: ureq::Agent,
}

impl HttpProvider {
    pub fn new(cfg: HttpConfig, api_key: String) -> Result<Self> {
        url::Url::parse(&cfg.url).map_err(|e| Error::Invalid(format!("endpoint URL {}: {e}", cfg.url)))?;
        let agent = ureq::AgentBuilder::new().timeout(Duration::from_secs(cfg.timeout_secs)).build();
        Ok(Self { cfg, api_key, agent })
    }

    /// Reads the key from `SER_API_KEY`.
    pub fn from_env(cfg: HttpConfig) -> Result<Self> {
        let key = std::env::var(API_KEY_ENV).map_err(|_| Error::Invalid(format!("{API_KEY_ENV} is not set")))?;
        Self::new(cfg, key)
    }

    pub fn request_body(&self, prompt: &PromptBundle) -> serde_json::Value {
        serde_json::json!({
            "model": self.cfg.model,
            "messages": [
                {"role": "system", "content": prompt.system_text},
                {"role": "user", "content": prompt.user_text},
            ],
            "temperature": self.cfg.temperature,
        })
    }
}

/// `choices[0].message.content` of a chat-completion response.
pub fn completion_text(response: &serde_json::Value) -> Result<String> {
    response
        .pointer("/choices/0/message/content")
        .and_then(serde_json::Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| Error::Transport("response has no choices[0].message.content".into()))
}

impl Provider for HttpProvider {
    fn complete(&self, prompt: &PromptBundle) -> Result<String> {
        let resp = self
            .agent
            .post(&self.cfg.url)
            .set("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(self.request_body(prompt))
            .map_err(|e| Error::Transport(e.to_string()))?;
        let body: serde_json::Value = resp.into_json().map_err(|e| Error::Transport(e.to_string()))?;
        completion_text(&body)
    }
}

/// Hex sha256 of the article text.
pub fn article_key(article: &str) -> String {
    hex::encode(Sha256::digest(article.as_bytes()))
}

/// Answers from recorded completions keyed by [`article_key`].
#[derive(Clone, Debug, Default)]
pub struct ReplayProvider {
    pub completions: BTreeMap<String, String>,
}

impl ReplayProvider {
    pub fn load(path: &Path) -> Result<Self> {
        let completions = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Ok(Self { completions })
    }

    pub fn insert(&mut self, article: &str, completion: &str) {
        self.completions.insert(article_key(article), completion.to_string());
    }
}

impl Provider for ReplayProvider {
    fn complete(&self, prompt: &PromptBundle) -> Result<String> {
        self.completions
            .get(&article_key(&prompt.article))
            .cloned()
            .ok_or_else(|| Error::Transport(format!("no recorded completion for article {}", article_key(&prompt.article))))
    }
}

/// Replies with a fixed script, one entry per call; the last entry repeats.
pub struct ScriptedProvider {
    script: Mutex<Vec<Result<String>>>,
    calls: AtomicUsize,
}

impl ScriptedProvider {
    pub fn new(script: Vec<Result<String>>) -> Self {
        Self {
            script: Mutex::new(script),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Provider for ScriptedProvider {
    fn complete(&self, _prompt: &PromptBundle) -> Result<String> {
        let n = self.calls.fetch_add(1, Ordering::SeqCst);
        let script = self.script.lock().expect("script lock");
        let Some(entry) = script.get(n).or_else(|| script.last()) else {
            return Err(Error::Transport("empty script".into()));
        };
        match entry {
            Ok(s) => Ok(s.clone()),
            Err(e) => Err(Error::Transport(e.to_string())),
        }
    }
}
