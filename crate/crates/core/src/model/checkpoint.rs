use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::params::ModelParams;
use super::train::TableSizes;
use crate::error::{Error, Result};
use crate::event_model::{Mode, Vocabulary};

const FORMAT: &str = "ser-checkpoint";
const VERSION: u32 = 1;

/// Everything needed to rerun inference: config, vocabulary and tensors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub mode: Mode,
    pub config: ModelConfig,
    pub sizes: TableSizes,
    pub vocab: Vocabulary,
    pub params: ModelParams,
    /// First and last training period.
    pub train_span: Option<(NaiveDate, NaiveDate)>,
    pub epoch_mse: Vec<f64>,
}

impl Checkpoint {
    pub fn new(mode: Mode, config: ModelConfig, vocab: Vocabulary, params: ModelParams) -> Self {
        Self {
            format: FORMAT.into(),
            version: VERSION,
            mode,
            config,
            sizes: TableSizes::of(&vocab),
            vocab,
            params,
            train_span: None,
            epoch_mse: Vec::new(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut c: Checkpoint = serde_json::from_str(text)?;
        if c.format != FORMAT || c.version != VERSION {
            return Err(Error::Invalid(format!(
                "unsupported checkpoint {} v{} (expected {FORMAT} v{VERSION})",
                c.format, c.version
            )));
        }
        c.vocab.reindex();
        c.validate()?;
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Shapes agree with the config and vocabulary; all entries finite.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let m = self.config.dim;
        let p = &self.params;
        let want = [
            ("entity", p.entity.shape(), (self.sizes.entities, m)),
            ("action", p.action.shape(), (self.sizes.actions, m)),
            ("stock", p.stock.shape(), (self.sizes.stocks, m)),
        ];
        for (name, got, exp) in want {
            if got != exp {
                return Err(Error::Shape {
                    op: "checkpoint",
                    detail: format!("{name} table is {got:?}, expected {exp:?}"),
                });
            }
        }
        if TableSizes::of(&self.vocab) != self.sizes {
            return Err(Error::Invalid("vocabulary sizes disagree with tables".into()));
        }
        if p.daily.len() != self.config.daily_layers
            || p.weekly.len() != self.config.weekly_layers
            || p.mlp.len() != self.config.mlp_layers
        {
            return Err(Error::Invalid("layer counts disagree with config".into()));
        }
        if !p.is_finite() {
            return Err(Error::Invalid("checkpoint holds non-finite parameters".into()));
        }
        Ok(())
    }
}
