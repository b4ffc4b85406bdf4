//! Run configuration shared by the CLI commands, stored as TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attribution::Reduction;
use crate::comovement::ComoveConfig;
use crate::error::{Error, Result};
use crate::event_model::{Mode, RollingSpec};
use crate::extraction::{HttpConfig, DEFAULT_MAX_ATTEMPTS};
use crate::model::{ModelConfig, ModelPresets};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    /// Articles JSONL: `{id, date, stock_id, text}` per line.
    pub articles: Option<PathBuf>,
    /// Few-shot examples JSON (array of `{date, article, output}`).
    pub few_shot: Option<PathBuf>,
    /// Replay completions JSON keyed by article hash, used instead of HTTP.
    pub replay: Option<PathBuf>,
    /// Extraction output JSONL.
    pub extracted: Option<PathBuf>,
    /// Panel JSONL (one firm-period record per line).
    pub panel: Option<PathBuf>,
    /// Daily returns CSV: date, stock_id, ret.
    pub returns: Option<PathBuf>,
    /// Factor CSV: date, mktrf, smb, hml, rmw, cma, rf.
    pub factors: Option<PathBuf>,
    /// Directory of per-window checkpoints and `windows.json`.
    pub checkpoints: Option<PathBuf>,
    /// Predictions CSV written by `predict`.
    pub predictions: Option<PathBuf>,
    /// Output directory when `--out` is not given.
    pub outputs: Option<PathBuf>,
}

impl Paths {
    /// Makes relative paths relative to `base` (the config file's directory).
    pub fn resolve_relative(&mut self, base: &Path) {
        for p in [
            &mut self.articles,
            &mut self.few_shot,
            &mut self.replay,
            &mut self.extracted,
            &mut self.panel,
            &mut self.returns,
            &mut self.factors,
            &mut self.checkpoints,
            &mut self.predictions,
            &mut self.outputs,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

/// How the panel is divided into training and test periods.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SplitConfig {
    /// One chronological split: the first `train_fraction` of periods train.
    Fraction { train_fraction: f64 },
    /// Calendar-year rolling windows.
    Rolling(RollingSpec),
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig::Rolling(RollingSpec::default())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractionSettings {
    pub http: HttpConfig,
    pub max_attempts: usize,
    /// Articles of the same stock and period more similar than this are dropped.
    pub dedupe_threshold: f64,
}

impl Default for ExtractionSettings {
    fn default() -> Self {
        Self { http: HttpConfig::default(), max_attempts: DEFAULT_MAX_ATTEMPTS, dedupe_threshold: 0.9 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluationSettings {
    pub min_freq_events: usize,
    pub min_freq_entities: usize,
    pub reduction: Reduction,
    /// Rows per polarity table.
    pub top_n: usize,
    pub nw_lags: usize,
    /// Execution delays (1 = immediate).
    pub delays: Vec<usize>,
    pub standardize: bool,
    /// Trailing-return control windows in periods; mode defaults when absent.
    pub control_windows: Option<Vec<usize>>,
}

impl Default for EvaluationSettings {
    fn default() -> Self {
        Self {
            min_freq_events: crate::attribution::DESK_MIN_FREQ_EVENTS,
            min_freq_entities: crate::attribution::DESK_MIN_FREQ_ENTITIES,
            reduction: Reduction::Mean,
            top_n: 20,
            nw_lags: crate::econometrics::DEFAULT_NW_LAGS,
            delays: vec![1, 2],
            standardize: true,
            control_windows: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TopicSettings {
    pub k: usize,
    /// Defaults to 50/K.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub top_terms: usize,
}

impl Default for TopicSettings {
    fn default() -> Self {
        Self { k: crate::topics::DEFAULT_TOPICS, alpha: None, beta: crate::topics::DEFAULT_BETA, iterations: 1000, top_terms: 10 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub mode: Mode,
    /// Root seed; every stage derives its own stream from it.
    pub seed: u64,
    pub paths: Paths,
    pub model: ModelConfig,
    pub presets: ModelPresets,
    pub split: SplitConfig,
    pub extraction: ExtractionSettings,
    pub evaluation: EvaluationSettings,
    pub comovement: ComoveConfig,
    pub topics: TopicSettings,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Invalid(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Invalid(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if let SplitConfig::Fraction { train_fraction } = self.split {
            if !(train_fraction > 0.0 && train_fraction < 1.0) {
                return Err(Error::Invalid(format!("train_fraction {train_fraction} must lie in (0, 1)")));
            }
        }
        if self.evaluation.delays.contains(&0) {
            return Err(Error::Invalid("delays start at 1 (immediate execution)".into()));
        }
        if self.extraction.max_attempts == 0 {
            return Err(Error::Invalid("extraction.max_attempts must be at least 1".into()));
        }
        if self.topics.k == 0 || self.topics.iterations == 0 {
            return Err(Error::Invalid("topics.k and topics.iterations must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let c = RunConfig::default();
        let text = c.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), c);
    }

    #[test]
    fn partial_file_fills_defaults() {
        let c = RunConfig::from_toml(
            r#"
            mode = "weekly"
            seed = 7
            [model]
            dim = 16
            heads = 2
            [split]
            kind = "fraction"
            train_fraction = 0.6
            [comovement]
            taus = [1, 2]
            "#,
        )
        .unwrap();
        assert_eq!(c.mode, Mode::Weekly);
        assert_eq!(c.model.dim, 16);
        assert_eq!(c.model.max_events, 30);
        assert_eq!(c.split, SplitConfig::Fraction { train_fraction: 0.6 });
        assert_eq!(c.comovement.top_k, 15);
        assert_eq!(RunConfig::from_toml(&c.to_toml().unwrap()).unwrap(), c);
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let mut p = Paths { articles: Some("a.jsonl".into()), returns: Some("/abs/r.csv".into()), ..Default::default() };
        p.resolve_relative(Path::new("/data/run"));
        assert_eq!(p.articles.unwrap(), Path::new("/data/run/a.jsonl"));
        assert_eq!(p.returns.unwrap(), Path::new("/abs/r.csv"));
        assert!(p.panel.is_none());
    }

    #[test]
    fn rejects_bad_values() {
        assert!(RunConfig::from_toml("[split]\nkind = \"fraction\"\ntrain_fraction = 1.5").is_err());
        assert!(RunConfig::from_toml("[model]\ndim = 10\nheads = 3").is_err());
        assert!(RunConfig::from_toml("[evaluation]\ndelays = [0]").is_err());
        assert!(RunConfig::from_toml("bogus = [").is_err());
    }
}
