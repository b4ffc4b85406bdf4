//! The event network: TransE event composition, daily and weekly attention
//! with [CLS] summaries, an MLP head, and its training.

mod checkpoint;
mod config;
mod forward;
mod gradcheck;
mod params;
mod train;
mod walk;

pub use checkpoint::Checkpoint;
pub use config::{ModelConfig, ModelPresets, PresetGroup};
pub use forward::{
    attention_stack, attention_values, check_layout, daily_forward, encode_events, encode_slots, forward_on_tape,
    predict, predict_many, weekly_forward, DayTrace, EventNodes, ForwardOptions, ForwardTrace, Graph, LayerLeaves,
    ParamLeaves,
};
pub use gradcheck::{model_grad_check, prediction_gradient};
pub use params::{AttentionLayer, Dense, ModelParams, Table};
pub use train::{batch_gradient, evaluate_mse, train, train_from, Adam, BatchGradient, TableSizes, TouchedRows, TrainReport};
pub use walk::{encode_window, predict_panel, run_window, walk_forward, Prediction, WindowResult};
