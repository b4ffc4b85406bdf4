use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Architecture and optimization settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Embedding width M.
    pub dim: usize,
    /// Attention heads H; per-head query/key/value width is `dim / heads`.
    pub heads: usize,
    /// Daily attention layers L. Zero means the [CLS] row passes straight through.
    pub daily_layers: usize,
    /// Weekly attention layers P.
    pub weekly_layers: usize,
    /// MLP layers S (the last one is linear).
    pub mlp_layers: usize,
    /// Hidden width of the MLP; defaults to `dim`.
    pub mlp_hidden: Option<usize>,
    pub max_events: usize,
    pub days_per_week: usize,
    pub l2: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Std of the N(0, σ²) initialization. Around 0.02 the network starts with
    /// near-constant outputs on return-scale targets and stays there.
    pub init_std: f64,
    pub seed: u64,
    /// Weight of the optional TransE margin loss on event triplets; 0 disables it.
    pub transe_weight: f64,
    pub transe_margin: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            dim: 64,
            heads: 4,
            daily_layers: 2,
            weekly_layers: 2,
            mlp_layers: 2,
            mlp_hidden: None,
            max_events: 30,
            days_per_week: 5,
            l2: 1e-7,
            lr: 1e-3,
            epochs: 30,
            batch_size: 64,
            init_std: 0.1,
            seed: 0,
            transe_weight: 0.0,
            transe_margin: 1.0,
        }
    }
}

impl ModelConfig {
    pub fn head_dim(&self) -> usize {
        self.dim / self.heads
    }

    pub fn hidden(&self) -> usize {
        self.mlp_hidden.unwrap_or(self.dim)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Invalid(msg));
        if self.dim == 0 || self.heads == 0 {
            return bad("dim and heads must be positive".into());
        }
        if self.dim % self.heads != 0 {
            return bad(format!("dim {} is not divisible by heads {}", self.dim, self.heads));
        }
        if self.mlp_layers == 0 || self.max_events == 0 || self.days_per_week == 0 {
            return bad("mlp_layers, max_events and days_per_week must be at least 1".into());
        }
        if self.hidden() == 0 || self.batch_size == 0 {
            return bad("mlp_hidden and batch_size must be positive".into());
        }
        if !(self.l2 >= 0.0) || !(self.lr > 0.0) || !(self.init_std >= 0.0) || !(self.transe_weight >= 0.0) {
            return bad("l2, init_std and transe_weight must be >= 0 and lr > 0".into());
        }
        Ok(())
    }
}

/// Config overrides for a contiguous group of rolling splits: tune on the
/// first split of the group, then hold fixed for the rest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PresetGroup {
    /// 1-based split numbers, inclusive.
    pub first_split: usize,
    pub last_split: usize,
    pub model: ModelConfig,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelPresets {
    pub groups: Vec<PresetGroup>,
}

impl ModelPresets {
    /// Config for 1-based split `number`, falling back to `base`.
    pub fn for_split<'a>(&'a self, number: usize, base: &'a ModelConfig) -> &'a ModelConfig {
        self.groups
            .iter()
            .find(|g| (g.first_split..=g.last_split).contains(&number))
            .map_or(base, |g| &g.model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(ModelConfig::default().validate().is_ok());
        assert_eq!(ModelConfig::default().head_dim(), 16);
        let c = ModelConfig { dim: 10, heads: 4, ..Default::default() };
        assert!(c.validate().is_err());
        let c = ModelConfig { mlp_layers: 0, ..Default::default() };
        assert!(c.validate().is_err());
        let c = ModelConfig { l2: -1.0, ..Default::default() };
        assert!(c.validate().is_err());
        let c = ModelConfig { daily_layers: 0, weekly_layers: 0, ..Default::default() };
        assert!(c.validate().is_ok());
    }

    #[test]
    fn presets_pick_group() {
        let base = ModelConfig::default();
        let p = ModelPresets {
            groups: vec![PresetGroup { first_split: 6, last_split: 10, model: ModelConfig { lr: 5e-4, ..Default::default() } }],
        };
        assert_eq!(p.for_split(3, &base).lr, 1e-3);
        assert_eq!(p.for_split(6, &base).lr, 5e-4);
        assert_eq!(p.for_split(10, &base).lr, 5e-4);
        assert_eq!(p.for_split(11, &base).lr, 1e-3);
    }
}
