//! The `ser` command line. Every command reads its inputs from the config
//! (falling back to files inside the output directory), writes CSVs there, and
//! finishes with `<command>_summary.json`.

mod evaluate;
mod ingest;
mod modeling;

use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::{Datelike, Days, NaiveDate};
use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::attribution::Level;
use crate::config::RunConfig;
use crate::econometrics::ReturnTable;
use crate::error::{Error, Result};
use crate::event_model::{compound_weekly, read_returns_csv, Mode, ReturnRow};

pub use ingest::{Article, ExtractedArticle};
pub use modeling::{ImportanceRow, WindowEntry};

#[derive(Debug, Parser)]
#[command(name = "ser", version, about = "Structured event representations for news-driven return prediction")]
pub struct Cli {
    /// Run configuration (TOML). Defaults apply when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured mode.
    #[arg(long, global = true, value_enum)]
    pub mode: Option<Mode>,
    /// Overrides the configured root seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; also where inputs are looked up when not configured.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract event triplets from articles through the chat-completion provider.
    Extract,
    /// Generate a synthetic panel with planted effects.
    Synth {
        /// Synthetic spec (TOML); mode and seed come from the run config.
        #[arg(long)]
        spec: Option<PathBuf>,
    },
    /// Turn extracted articles and daily returns into the event panel.
    Build,
    /// Train one model per split window.
    Train,
    /// Out-of-sample predictions for every window's test span.
    Predict,
    /// Gradient×input importance on the test spans, aggregated by feature.
    Attribute {
        #[arg(long, value_enum, default_value_t = Level::Event)]
        level: Level,
    },
    /// Quintile long-short portfolios on the predictions.
    Sort,
    /// Fama-MacBeth regressions of realized returns on the predictions.
    Fmb,
    /// Return comovement around news shocks of the top-ranked entities.
    Comove {
        /// Entity ranking CSV; defaults to the one written by `attribute --level entity`.
        #[arg(long)]
        ranking: Option<PathBuf>,
    },
    /// LDA topics over event contexts and their aggregated importance.
    Topics {
        /// Event-level importance CSV; defaults to the one written by `attribute`.
        #[arg(long)]
        importance: Option<PathBuf>,
    },
}

impl Command {
    /// Stem of the summary file.
    fn name(&self) -> &'static str {
        match self {
            Command::Extract => "extract",
            Command::Synth { .. } => "synth",
            Command::Build => "build",
            Command::Train => "train",
            Command::Predict => "predict",
            Command::Attribute { level: Level::Event } => "attribute_event",
            Command::Attribute { level: Level::Entity } => "attribute_entity",
            Command::Sort => "sort",
            Command::Fmb => "fmb",
            Command::Comove { .. } => "comove",
            Command::Topics { .. } => "topics",
        }
    }
}

/// Resolved configuration plus the output directory.
pub struct Context {
    pub cfg: RunConfig,
    pub out: PathBuf,
}

impl Context {
    pub fn new(cli: &Cli) -> Result<Self> {
        let mut cfg = match &cli.config {
            Some(p) => {
                let mut cfg = RunConfig::load(p)?;
                cfg.paths.resolve_relative(p.parent().unwrap_or(Path::new("")));
                cfg
            }
            None => RunConfig::default(),
        };
        if let Some(m) = cli.mode {
            cfg.mode = m;
        }
        if let Some(s) = cli.seed {
            cfg.seed = s;
        }
        let out = cli.out.clone().or_else(|| cfg.paths.outputs.clone()).unwrap_or_else(|| PathBuf::from("out"));
        std::fs::create_dir_all(&out)?;
        Ok(Self { cfg, out })
    }

    fn output(&self, configured: &Option<PathBuf>, default: &str) -> PathBuf {
        configured.clone().unwrap_or_else(|| self.out.join(default))
    }

    fn input(&self, configured: &Option<PathBuf>, default: &str, what: &str) -> Result<PathBuf> {
        let p = self.output(configured, default);
        if !p.exists() {
            return Err(Error::Invalid(format!("{what} file {} does not exist", p.display())));
        }
        Ok(p)
    }

    fn optional_input(&self, configured: &Option<PathBuf>, default: &str) -> Option<PathBuf> {
        Some(self.output(configured, default)).filter(|p| p.exists())
    }

    /// Returns on the mode's period calendar: daily as given, weekly compounded
    /// per ISO week and dated on the week's Monday.
    fn returns(&self) -> Result<ReturnTable> {
        let rows = self.daily_returns()?;
        match self.cfg.mode {
            Mode::Daily => ReturnTable::from_rows(&rows),
            Mode::Weekly => ReturnTable::from_rows(&weekly_returns(&rows)?),
        }
    }

    fn daily_returns(&self) -> Result<Vec<ReturnRow>> {
        read_returns_csv(&self.input(&self.cfg.paths.returns, "returns.csv", "returns")?)
    }

    fn write_summary<T: Serialize>(&self, command: &str, started: Instant, result: &T) -> Result<PathBuf> {
        // Only `metadata` may differ between otherwise identical runs.
        let doc = serde_json::json!({
            "command": command,
            "mode": self.cfg.mode,
            "seed": self.cfg.seed,
            "result": result,
            "metadata": {
                "version": env!("CARGO_PKG_VERSION"),
                "elapsed_secs": started.elapsed().as_secs_f64(),
                "finished_at": chrono::Utc::now().to_rfc3339(),
            },
        });
        let path = self.out.join(format!("{command}_summary.json"));
        std::fs::write(&path, serde_json::to_string_pretty(&doc)?)?;
        Ok(path)
    }
}

pub fn week_start(date: NaiveDate) -> NaiveDate {
    date - Days::new(date.weekday().num_days_from_monday() as u64)
}

/// Daily rows compounded per stock and ISO week.
pub fn weekly_returns(daily: &[ReturnRow]) -> Result<Vec<ReturnRow>> {
    let mut by_week: std::collections::BTreeMap<(i64, NaiveDate), Vec<(NaiveDate, f64)>> = Default::default();
    for r in daily {
        by_week.entry((r.stock_id, week_start(r.date))).or_default().push((r.date, r.ret));
    }
    by_week
        .into_iter()
        .map(|((stock_id, date), mut days)| {
            days.sort_by_key(|d| d.0);
            let rets: Vec<f64> = days.iter().map(|d| d.1).collect();
            Ok(ReturnRow { date, stock_id, ret: compound_weekly(&rets)? })
        })
        .collect()
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn read_csv<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let rows: std::result::Result<Vec<T>, _> = rdr.deserialize().collect();
    Ok(rows?)
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| serde_json::from_str(l).map_err(|e| Error::Invalid(format!("{}:{}: {e}", path.display(), n + 1))))
        .collect()
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut text = String::new();
    for r in rows {
        text.push_str(&serde_json::to_string(r)?);
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Runs one command and returns the path of its summary.
pub fn run(cli: &Cli) -> Result<PathBuf> {
    let ctx = Context::new(cli)?;
    ctx.cfg.validate()?;
    let started = Instant::now();
    let name = cli.command.name();
    log::info!("{name}: mode {:?}, seed {}, output {}", ctx.cfg.mode, ctx.cfg.seed, ctx.out.display());
    let result = match &cli.command {
        Command::Extract => serde_json::to_value(ingest::extract(&ctx)?)?,
        Command::Synth { spec } => serde_json::to_value(ingest::synth(&ctx, spec.as_deref())?)?,
        Command::Build => serde_json::to_value(ingest::build(&ctx)?)?,
        Command::Train => serde_json::to_value(modeling::train(&ctx)?)?,
        Command::Predict => serde_json::to_value(modeling::predict(&ctx)?)?,
        Command::Attribute { level } => serde_json::to_value(modeling::attribute(&ctx, *level)?)?,
        Command::Sort => serde_json::to_value(evaluate::sort(&ctx)?)?,
        Command::Fmb => serde_json::to_value(evaluate::fmb(&ctx)?)?,
        Command::Comove { ranking } => serde_json::to_value(evaluate::comove(&ctx, ranking.as_deref())?)?,
        Command::Topics { importance } => serde_json::to_value(evaluate::topics(&ctx, importance.as_deref())?)?,
    };
    ctx.write_summary(name, started, &result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weeks_start_on_monday() {
        let d = |m, day| NaiveDate::from_ymd_opt(2024, m, day).unwrap();
        assert_eq!(week_start(d(1, 10)), d(1, 8));
        assert_eq!(week_start(d(1, 8)), d(1, 8));
        assert_eq!(week_start(d(1, 14)), d(1, 8));
    }

    #[test]
    fn weekly_compounding_groups_by_iso_week() {
        let d = |day| NaiveDate::from_ymd_opt(2024, 1, day).unwrap();
        let rows = vec![
            ReturnRow { date: d(9), stock_id: 1, ret: 0.1 },
            ReturnRow { date: d(8), stock_id: 1, ret: -0.1 },
            ReturnRow { date: d(15), stock_id: 1, ret: 0.02 },
        ];
        let w = weekly_returns(&rows).unwrap();
        assert_eq!(w.len(), 2);
        assert_eq!(w[0].date, d(8));
        assert!((w[0].ret - (1.1 * 0.9 - 1.0)).abs() < 1e-15);
        assert_eq!(w[1], ReturnRow { date: d(15), stock_id: 1, ret: 0.02 });
    }
}
