//! Structured event representations (subject–action–object triplets extracted
//! from news) and the tooling around them: extraction through a chat-completion
//! endpoint, an attention network that maps a stock's events to its next-period
//! return, gradient×input attribution, and the asset-pricing evaluation stack
//! (portfolio sorts, Fama–MacBeth, entity-driven comovement, LDA topics).

pub mod attribution;
pub mod autodiff;
pub mod cli;
pub mod comovement;
pub mod config;
pub mod econometrics;
pub mod error;
pub mod event_model;
pub mod extraction;
pub mod model;
pub mod seeds;
pub mod synth;
pub mod topics;

pub use error::{Error, Result};
