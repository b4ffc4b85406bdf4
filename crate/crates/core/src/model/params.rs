use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use crate::autodiff::Matrix;

/// Projections for one multi-head attention layer. Head `h` uses `query[h]`,
/// `key[h]`, `value[h]` (each M×d) and rows `h·d..(h+1)·d` of `output` (H·d×M).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionLayer {
    pub query: Vec<Matrix>,
    pub key: Vec<Matrix>,
    pub value: Vec<Matrix>,
    pub output: Matrix,
}

/// `h ↦ h·weight + bias` on row vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weight: Matrix,
    pub bias: Matrix,
}

/// Every learnable tensor of the network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub entity: Matrix,
    pub action: Matrix,
    pub stock: Matrix,
    pub cls_daily: Matrix,
    pub cls_weekly: Matrix,
    pub daily: Vec<AttentionLayer>,
    pub weekly: Vec<AttentionLayer>,
    pub mlp: Vec<Dense>,
}

/// Which embedding table a sparse gradient row belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Table {
    Entity,
    Action,
    Stock,
}

impl ModelParams {
    /// All tensors drawn i.i.d. from N(0, init_std²).
    pub fn init(cfg: &ModelConfig, n_entities: usize, n_actions: usize, n_stocks: usize, rng: &mut impl Rng) -> Self {
        let normal = Normal::new(0.0, cfg.init_std.max(0.0)).expect("finite std");
        let mut draw = |rows: usize, cols: usize| Matrix::from_fn(rows, cols, |_, _| normal.sample(rng));
        let (m, d, h) = (cfg.dim, cfg.head_dim(), cfg.heads);
        let layer = |draw: &mut dyn FnMut(usize, usize) -> Matrix| AttentionLayer {
            query: (0..h).map(|_| draw(m, d)).collect(),
            key: (0..h).map(|_| draw(m, d)).collect(),
            value: (0..h).map(|_| draw(m, d)).collect(),
            output: draw(h * d, m),
        };
        let entity = draw(n_entities, m);
        let action = draw(n_actions, m);
        let stock = draw(n_stocks, m);
        let cls_daily = draw(1, m);
        let cls_weekly = draw(1, m);
        let daily = (0..cfg.daily_layers).map(|_| layer(&mut draw)).collect();
        let weekly = (0..cfg.weekly_layers).map(|_| layer(&mut draw)).collect();
        let mut mlp = Vec::with_capacity(cfg.mlp_layers);
        for s in 0..cfg.mlp_layers {
            let fan_in = if s == 0 { m } else { cfg.hidden() };
            let fan_out = if s + 1 == cfg.mlp_layers { 1 } else { cfg.hidden() };
            mlp.push(Dense {
                weight: draw(fan_in, fan_out),
                bias: draw(1, fan_out),
            });
        }
        Self {
            entity,
            action,
            stock,
            cls_daily,
            cls_weekly,
            daily,
            weekly,
            mlp,
        }
    }

    /// Same shapes, all zeros.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.for_each_mut(|m| m.data_mut().fill(0.0));
        z
    }

    /// Zeros for the dense tensors; the embedding tables are 0×M.
    pub fn dense_zeros_like(&self) -> Self {
        let m = self.entity.cols();
        let zero = |t: &Matrix| Matrix::zeros(t.rows(), t.cols());
        let layer = |l: &AttentionLayer| AttentionLayer {
            query: l.query.iter().map(zero).collect(),
            key: l.key.iter().map(zero).collect(),
            value: l.value.iter().map(zero).collect(),
            output: zero(&l.output),
        };
        Self {
            entity: Matrix::zeros(0, m),
            action: Matrix::zeros(0, m),
            stock: Matrix::zeros(0, m),
            cls_daily: zero(&self.cls_daily),
            cls_weekly: zero(&self.cls_weekly),
            daily: self.daily.iter().map(layer).collect(),
            weekly: self.weekly.iter().map(layer).collect(),
            mlp: self.mlp.iter().map(|d| Dense { weight: zero(&d.weight), bias: zero(&d.bias) }).collect(),
        }
    }

    /// Every tensor in a fixed order: tables, CLS tokens, daily layers,
    /// weekly layers, MLP.
    pub fn tensors(&self) -> Vec<&Matrix> {
        let mut v = vec![&self.entity, &self.action, &self.stock, &self.cls_daily, &self.cls_weekly];
        for l in self.daily.iter().chain(&self.weekly) {
            v.extend(l.query.iter().chain(&l.key).chain(&l.value));
            v.push(&l.output);
        }
        for d in &self.mlp {
            v.push(&d.weight);
            v.push(&d.bias);
        }
        v
    }

    /// Same order as [`ModelParams::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut v = vec![&mut self.entity, &mut self.action, &mut self.stock, &mut self.cls_daily, &mut self.cls_weekly];
        for l in self.daily.iter_mut().chain(self.weekly.iter_mut()) {
            v.extend(l.query.iter_mut().chain(l.key.iter_mut()).chain(l.value.iter_mut()));
            v.push(&mut l.output);
        }
        for d in &mut self.mlp {
            v.push(&mut d.weight);
            v.push(&mut d.bias);
        }
        v
    }

    pub fn for_each(&self, f: impl FnMut(&Matrix)) {
        self.tensors().into_iter().for_each(f);
    }

    pub fn for_each_mut(&mut self, f: impl FnMut(&mut Matrix)) {
        self.tensors_mut().into_iter().for_each(f);
    }

    /// Adds `other` into `self`, skipping the three embedding tables.
    pub fn add_dense(&mut self, other: &Self) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()).skip(3) {
            a.add_assign(b);
        }
    }

    pub fn n_scalars(&self) -> usize {
        let mut n = 0;
        self.for_each(|m| n += m.data().len());
        n
    }

    pub fn sum_sq(&self) -> f64 {
        let mut s = 0.0;
        self.for_each(|m| s += m.sum_sq());
        s
    }

    pub fn is_finite(&self) -> bool {
        let mut ok = true;
        self.for_each(|m| ok &= m.is_finite());
        ok
    }

    pub fn table_mut(&mut self, t: Table) -> &mut Matrix {
        match t {
            Table::Entity => &mut self.entity,
            Table::Action => &mut self.action,
            Table::Stock => &mut self.stock,
        }
    }

    /// Flat copy of every scalar in visiting order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_scalars());
        self.for_each(|m| v.extend_from_slice(m.data()));
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn shapes_follow_config() {
        let cfg = ModelConfig { dim: 8, heads: 2, daily_layers: 1, weekly_layers: 1, mlp_layers: 2, ..Default::default() };
        let p = ModelParams::init(&cfg, 10, 5, 4, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(p.entity.shape(), (10, 8));
        assert_eq!(p.action.shape(), (5, 8));
        assert_eq!(p.stock.shape(), (4, 8));
        assert_eq!(p.daily[0].query.len(), 2);
        assert_eq!(p.daily[0].query[0].shape(), (8, 4));
        assert_eq!(p.daily[0].output.shape(), (8, 8));
        assert_eq!(p.mlp[0].weight.shape(), (8, 8));
        assert_eq!(p.mlp[1].weight.shape(), (8, 1));
        assert_eq!(p.mlp[1].bias.shape(), (1, 1));
        let z = p.zeros_like();
        assert_eq!(z.sum_sq(), 0.0);
        assert_eq!(z.n_scalars(), p.n_scalars());
    }

    #[test]
    fn init_is_seeded() {
        let cfg = ModelConfig { dim: 8, heads: 2, ..Default::default() };
        let a = ModelParams::init(&cfg, 6, 6, 3, &mut ChaCha8Rng::seed_from_u64(42));
        let b = ModelParams::init(&cfg, 6, 6, 3, &mut ChaCha8Rng::seed_from_u64(42));
        assert_eq!(a, b);
        let std = (a.sum_sq() / a.n_scalars() as f64).sqrt();
        assert!((std - cfg.init_std).abs() < 0.1 * cfg.init_std, "{std}");
    }
}
