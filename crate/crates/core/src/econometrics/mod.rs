//! Signal evaluation: quintile long-short sorts (optionally delayed),
//! performance statistics, five-factor alpha, and Fama–MacBeth regressions
//! with Newey–West errors.

mod data;
mod fmb;
mod ols;
mod portfolio;

pub use data::{default_control_windows, panel_from_returns, read_factors_csv, read_signals_csv, ReturnTable, SignalFileRow};
pub use fmb::{fama_macbeth, newey_west_se, FmCoefficient, FmResult, DEFAULT_NW_LAGS};
pub use ols::{ols, OlsFit};
pub use portfolio::{
    delayed_series, factor_alpha, performance, quintile_sort, CrossSection, FactorAlpha, FactorRow, LongShortSeries, Performance, QuintileSort,
    SignalPanel, SignalRow,
};
